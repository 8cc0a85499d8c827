#include "mesh/training.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace mesh {

void TrainConfig::validate() const {
  if (!(omega >= 0)) throw ConfigError("omega must be non-negative");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
}

namespace {

Rng batch_rng(std::uint64_t seed, int stage, std::size_t epoch, std::size_t batch) {
  return Rng(seed).split(static_cast<std::uint64_t>(stage)).split(epoch).split(batch);
}

void check_loss(Var loss, int stage, std::size_t epoch, std::size_t batch, Timestamp t) {
  if (!std::isfinite(static_cast<double>(loss.value().item())))
    throw NumericError("non-finite loss in stage " + std::to_string(stage) + ", epoch " + std::to_string(epoch) +
                       ", batch " + std::to_string(batch) + " (timestamp " + std::to_string(t) + ")");
}

double valid_mrr(MeshModel& model, const QueryContext& context, bool structural_only) {
  if (context.split(Split::valid).fact_count() == 0) return 0;
  EvaluationOptions options;
  options.structural_only = structural_only;
  return evaluate(model, context, Split::valid, options).metrics.overall.mrr;
}

Real effective_omega(const MeshModel& model, const TrainConfig& config) {
  return model.config().ablation.disable_event_aware ? Real{0} : config.omega;
}

// Total loss of one batch divided by its size.
Var fusion_loss(MeshModel& model, Tape& tape, const StructuralEncoder::Output& structure, const QueryBatch& batch,
                LossMode mode, Real omega) {
  const ForwardOutputs fw = model.forward(tape, structure, batch);
  Var loss = major_loss(fw.logits, batch.objects, mode);
  if (fw.has_experts()) {
    const ExpertLosses ex =
        expert_losses(fw.logits_historical, fw.logits_non_historical, batch.objects, batch.indicators, mode);
    loss = total_loss(loss, ex, omega);
  }
  return scale(loss, Real{1} / static_cast<Real>(batch.size()));
}

// Eval-mode structural encodings per timestamp. The encoder is frozen during
// the fusion stage, so these are exactly what a fresh encode would return.
class StructureCache {
 public:
  StructureCache(MeshModel& model, const QueryContext& context, std::size_t budget)
      : model_(model), context_(context), budget_(budget) {}

  StructuralEncoder::Output get(Tape& tape, Timestamp t) {
    auto it = cache_.find(t);
    if (it == cache_.end()) {
      Tape scratch(false, Rng{0}, false);
      const auto out = model_.encode_structure(scratch, context_.history(t, model_.config().window));
      Entry e{out.entities.value(), out.relations.value()};
      const std::size_t bytes = (e.entities.size() + e.relations.size()) * sizeof(Real);
      if (used_ + bytes > budget_) return {tape.constant(std::move(e.entities)), tape.constant(std::move(e.relations))};
      used_ += bytes;
      it = cache_.emplace(t, std::move(e)).first;
    }
    return {tape.constant(it->second.entities), tape.constant(it->second.relations)};
  }

 private:
  struct Entry {
    Tensor entities;
    Tensor relations;
  };
  MeshModel& model_;
  const QueryContext& context_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::map<Timestamp, Entry> cache_;
};

}  // namespace

std::vector<EpochRecord> train_structural(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                                          const EpochCallback& on_epoch) {
  config.validate();
  std::vector<Parameter*> params = model.structural_parameters();
  for (Parameter* p : model.structural_decoder.parameters()) params.push_back(p);
  model.structural.set_frozen(false);
  Adam adam({.learning_rate = config.learning_rate});
  const auto batches = context.batches(Split::train, config.batch_size);
  std::vector<EpochRecord> log;
  for (std::size_t epoch = 1; epoch <= config.stage0_epochs; ++epoch) {
    double total = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const QueryBatch& batch = batches[b];
      Tape tape(true, batch_rng(config.seed, 0, epoch, b));
      const auto structure = model.encode_structure(tape, context.history(batch.t, model.config().window));
      Var loss = scale(major_loss(model.structural_logits(tape, structure, batch), batch.objects,
                                  LossMode::cross_entropy),
                       Real{1} / static_cast<Real>(batch.size()));
      check_loss(loss, 0, epoch, b, batch.t);
      for (Parameter* p : params) p->zero_grad();
      tape.backward(loss);
      adam.step(params);
      total += static_cast<double>(loss.value().item());
    }
    EpochRecord rec{0, epoch, batches.empty() ? 0.0 : total / static_cast<double>(batches.size()),
                    valid_mrr(model, context, true)};
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.structural.set_frozen(true);
  return log;
}

TrainResult train_fusion(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  config.validate();
  const bool structural = !model.config().ablation.disable_structural;
  std::vector<Parameter*> params;
  for (Parameter* p : model.parameters())
    if (!p->frozen) params.push_back(p);
  Adam adam({.learning_rate = config.learning_rate});
  const Real omega = effective_omega(model, config);
  const auto batches = context.batches(Split::train, config.batch_size);
  StructureCache cache(model, context, config.cache_budget_bytes);

  TrainResult result;
  std::vector<Tensor> best;
  for (std::size_t epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
    double total = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const QueryBatch& batch = batches[b];
      Tape tape(true, batch_rng(config.seed, 1, epoch, b));
      StructuralEncoder::Output structure;
      if (structural) structure = cache.get(tape, batch.t);
      Var loss = fusion_loss(model, tape, structure, batch, config.loss_mode, omega);
      check_loss(loss, 1, epoch, b, batch.t);
      for (Parameter* p : params) p->zero_grad();
      tape.backward(loss);
      adam.step(params);
      total += static_cast<double>(loss.value().item());
    }
    EpochRecord rec{1, epoch, batches.empty() ? 0.0 : total / static_cast<double>(batches.size()),
                    valid_mrr(model, context, false)};
    result.stage1.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (result.best_epoch == 0 || rec.valid_mrr > result.best_valid_mrr) {
      result.best_epoch = epoch;
      result.best_valid_mrr = rec.valid_mrr;
      best.clear();
      for (Parameter* p : params) best.push_back(p->value);
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) params[i]->value = best[i];
  return result;
}

TrainResult train(MeshModel& model, const QueryContext& context, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  std::vector<EpochRecord> stage0;
  if (!model.config().ablation.disable_structural) stage0 = train_structural(model, context, config, on_epoch);
  model.structural.set_frozen(true);
  TrainResult result = train_fusion(model, context, config, on_epoch);
  result.stage0 = std::move(stage0);
  return result;
}

double training_loss(MeshModel& model, const QueryContext& context, const TrainConfig& config) {
  const bool structural = !model.config().ablation.disable_structural;
  const Real omega = effective_omega(model, config);
  const auto batches = context.batches(Split::train, config.batch_size);
  if (batches.empty()) return 0;
  double total = 0;
  for (const QueryBatch& batch : batches) {
    Tape tape(false, Rng{0}, false);
    StructuralEncoder::Output structure;
    if (structural) structure = model.encode_structure(tape, context.history(batch.t, model.config().window));
    total += static_cast<double>(fusion_loss(model, tape, structure, batch, config.loss_mode, omega).value().item());
  }
  return total / static_cast<double>(batches.size());
}

std::string format_epoch(const EpochRecord& record) {
  char line[96];
  std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\n", record.epoch, record.train_loss, record.valid_mrr);
  return line;
}

std::string format_training_log(std::span<const EpochRecord> records) {
  std::string out;
  for (const EpochRecord& r : records) out += format_epoch(r);
  return out;
}

}  // namespace mesh
