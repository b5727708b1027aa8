#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "feet/embedding_io.hpp"

namespace feet::testing {

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("feet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline EmbeddingSet tiny_set(std::size_t n = 10, std::uint32_t dim = 4, std::uint32_t classes = 2, unsigned seed = 7) {
  EmbeddingSet s;
  s.model_id = "m";
  s.task_id = "t";
  s.dim = dim;
  s.num_classes = classes;
  std::mt19937 gen(seed);
  std::normal_distribution<float> nd;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord r;
    r.id = "id" + std::to_string(i);
    r.label = static_cast<std::uint32_t>(i % classes);
    for (std::uint32_t d = 0; d < dim; ++d) r.vector.push_back(nd(gen));
    s.records.push_back(std::move(r));
  }
  return s;
}

}  // namespace feet::testing
