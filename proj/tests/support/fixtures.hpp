#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mesh/rng.hpp"
#include "mesh/tensor.hpp"
#include "mesh/tkg.hpp"

namespace mesh::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mesh_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes the five-file layout with `entities` and `relations` named ids.
inline void write_dataset_files(const std::filesystem::path& dir, std::size_t entities, std::size_t relations,
                                const std::string& train, const std::string& valid, const std::string& test) {
  std::filesystem::create_directories(dir);
  std::string e, r;
  for (std::size_t i = 0; i < entities; ++i) e += "entity_" + std::to_string(i) + "\t" + std::to_string(i) + "\n";
  for (std::size_t i = 0; i < relations; ++i) r += "relation_" + std::to_string(i) + "\t" + std::to_string(i) + "\n";
  write_text(dir / "entity2id.txt", e);
  write_text(dir / "relation2id.txt", r);
  write_text(dir / "train.txt", train);
  write_text(dir / "valid.txt", valid);
  write_text(dir / "test.txt", test);
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (Real& v : t.values()) v = static_cast<Real>(scale * rng.normal());
  return t;
}

// Random facts over small vocabularies, with repeats to exercise counting.
inline std::vector<Quadruple> random_facts(std::size_t n, std::size_t entities, std::size_t relations,
                                           std::size_t timestamps, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Quadruple> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({static_cast<EntityId>(gen() % entities), static_cast<RelationId>(gen() % relations),
                   static_cast<EntityId>(gen() % entities), static_cast<Timestamp>(gen() % timestamps)});
  }
  return out;
}

}  // namespace mesh::testing
