// Writes the shipped scheme fixtures: two_shell_60.txt and three_shell_90.txt.

#include <filesystem>
#include <iostream>

#include "medn/datagen.hpp"
#include "medn/io.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);
  medn::io::write_scheme(dir / "two_shell_60.txt", medn::two_shell_protocol());
  medn::io::write_scheme(dir / "three_shell_90.txt", medn::three_shell_protocol());
  std::cout << "wrote " << (dir / "two_shell_60.txt") << " and " << (dir / "three_shell_90.txt") << '\n';
  return 0;
}
