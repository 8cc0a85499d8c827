#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mesh/model.hpp"
#include "mesh/training.hpp"

namespace mesh {

enum class Profile { full, desk };

const char* profile_name(Profile p);
Profile parse_profile(const std::string& text);

// Fully resolved settings of one run. Every field has a flat text key; the
// echo lists all of them and parses back to the same configuration.
struct RunConfig {
  std::string dataset;
  Profile profile = Profile::full;
  std::size_t dim = 100;
  std::size_t llm_dim = 4096;
  std::size_t adapter_hidden = 256;
  std::size_t channels = 50;
  std::size_t kernel_width = 3;
  std::size_t window = 3;
  std::size_t layers = 2;
  double dropout = 0.2;
  bool normalize = true;
  std::size_t experts_historical = 1;
  std::size_t experts_non_historical = 1;
  double omega = 1.0;
  double learning_rate = 0.001;
  std::size_t stage0_epochs = 500;
  std::size_t stage1_epochs = 50;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::cross_entropy;
  std::size_t batch_size = 0;
  AblationConfig ablation;
  std::string embeddings;  // semantic table file; empty selects the fallback
  bool synthetic_embeddings = false;
  std::uint64_t synthetic_seed = 0;
  std::size_t max_timestamps = 0;  // 0 keeps every timestamp
  std::size_t cache_budget_mb = 1024;
  std::string out = "runs/latest";

  static RunConfig preset(Profile profile);
  static const std::vector<std::string>& keys();

  // Throws ConfigError for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] std::string get(const std::string& key) const;

  // `key = value` lines for every key.
  [[nodiscard]] std::string echo() const;

  void validate() const;
  [[nodiscard]] ModelConfig model_config(const Vocabulary& augmented) const;
  [[nodiscard]] TrainConfig train_config() const;
};

using Settings = std::map<std::string, std::string>;

// Flat `key = value` text; `#` starts a comment, blank lines are ignored.
Settings parse_settings(const std::string& text, const std::string& origin);
Settings read_settings_file(const std::filesystem::path& file);

// MESH_<KEY> variables for every known key, upper-cased.
Settings environment_settings();

// Preset of the profile, then the file, then the environment, then flags.
// The profile itself is taken from the highest layer that names it.
RunConfig resolve_config(const Settings& file, const Settings& environment, const Settings& flags);

}  // namespace mesh
