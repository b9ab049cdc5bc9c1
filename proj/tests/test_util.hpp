#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "multimix/error.hpp"

namespace testutil {

/// Fresh empty directory under the system temp root, wiped if it already
/// exists so reruns start clean.
inline std::filesystem::path tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "multimix-tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Runs f and reports the Errc it failed with, if any.
inline std::optional<multimix::Errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const multimix::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace testutil
