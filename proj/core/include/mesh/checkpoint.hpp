#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mesh/model.hpp"

namespace mesh {

// Binary container: "MESHCKPT", format version, config echo, vocabulary
// sizes, rng seed, then every named tensor with its element type tag, frozen
// flag, shape and little-endian values.
struct Checkpoint {
  struct Entry {
    std::string name;
    Tensor value;
    bool frozen = false;
  };

  std::uint32_t version = 1;
  std::string config_echo;
  std::uint64_t num_entities = 0;
  std::uint64_t num_relations = 0;
  std::uint64_t seed = 0;
  std::vector<Entry> tensors;

  [[nodiscard]] std::vector<std::string> frozen_names() const;
};

Checkpoint capture_checkpoint(MeshModel& model, const std::string& config_echo, std::uint64_t seed);
void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
Checkpoint read_checkpoint(const std::filesystem::path& file);

inline void save_checkpoint(MeshModel& model, const std::string& config_echo, std::uint64_t seed,
                            const std::filesystem::path& file) {
  write_checkpoint(capture_checkpoint(model, config_echo, seed), file);
}

// Copies values and frozen flags into `model`. Throws DataError when a
// tensor is missing, unexpected or of the wrong shape.
void restore_parameters(MeshModel& model, const Checkpoint& checkpoint);

}  // namespace mesh
