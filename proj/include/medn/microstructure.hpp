#pragma once

#include <algorithm>

namespace medn {

/// Scalar NODDI outputs for one voxel.
struct Microstructure {
  double v_ic = 0.0;
  double v_iso = 0.0;
  double od = 0.0;

  Microstructure clamped() const {
    return {std::clamp(v_ic, 0.0, 1.0), std::clamp(v_iso, 0.0, 1.0), std::clamp(od, 0.0, 1.0)};
  }

  bool operator==(const Microstructure&) const = default;
};

}  // namespace medn
