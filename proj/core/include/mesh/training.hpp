#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mesh/evaluation.hpp"
#include "mesh/losses.hpp"
#include "mesh/optim.hpp"

namespace mesh {

struct TrainConfig {
  std::size_t stage0_epochs = 500;
  std::size_t stage1_epochs = 50;
  Real learning_rate = Real{0.001};
  Real omega = Real{1};
  LossMode loss_mode = LossMode::cross_entropy;
  std::size_t batch_size = 0;  // 0: one batch per snapshot
  std::uint64_t seed = 0;
  // Structural encodings reused across stage-1 epochs while they fit.
  std::size_t cache_budget_bytes = std::size_t{1} << 30;

  void validate() const;
};

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double valid_mrr = 0;
};

struct TrainResult {
  std::vector<EpochRecord> stage0;
  std::vector<EpochRecord> stage1;
  std::size_t best_epoch = 0;  // 0 when no stage-1 epoch ran
  double best_valid_mrr = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Pre-trains the structural encoder with its decoder on structural logits,
// then freezes the encoder.
std::vector<EpochRecord> train_structural(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                                          const EpochCallback& on_epoch = {});

// Trains every unfrozen parameter on the total loss, keeping the parameters
// of the best validation epoch.
TrainResult train_fusion(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

// Both stages in order. The structural stage is skipped when the model has no
// structural path.
TrainResult train(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Mean per-batch total loss of the current parameters over the training
// split, with dropout off.
double training_loss(MeshModel& model, const QueryContext& context, const TrainConfig& config);

// `epoch<TAB>train_loss<TAB>valid_mrr` lines.
std::string format_epoch(const EpochRecord& record);
std::string format_training_log(std::span<const EpochRecord> records);

}  // namespace mesh
