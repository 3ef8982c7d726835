#pragma once

#include <string>

namespace mlrisk {

// Whole-file read/write; failures raise IoError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mlrisk
