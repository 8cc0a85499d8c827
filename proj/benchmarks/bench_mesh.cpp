#include <benchmark/benchmark.h>

#include "mesh/evaluation.hpp"
#include "mesh/history.hpp"
#include "mesh/query_context.hpp"
#include "mesh/synthetic.hpp"
#include "mesh/training.hpp"

namespace mesh {
namespace {

Tensor filled(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (Real& v : t.values()) v = static_cast<Real>(rng.normal());
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = filled({n, n}, 1), b = filled({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(32)->Arg(128)->Arg(512);

struct Workload {
  std::unique_ptr<QueryContext> context;
  std::unique_ptr<MeshModel> model;

  explicit Workload(std::size_t entities) {
    SyntheticSpec spec;
    spec.entities = entities;
    spec.relations = 8;
    spec.timestamps = 30;
    spec.facts_per_timestamp = entities;
    spec.recurring_pool = entities;
    context = std::make_unique<QueryContext>(synthetic_dataset(spec));
    ModelConfig c;
    c.num_entities = context->vocab().num_entities();
    c.num_relations = context->vocab().num_relations();
    c.dim = 32;
    c.llm_dim = 128;
    c.channels = 8;
    model = std::make_unique<MeshModel>(c, synthetic_embeddings(context->vocab(), c.llm_dim, 1));
  }
};

void BM_StructuralEncode(benchmark::State& state) {
  Workload w(static_cast<std::size_t>(state.range(0)));
  const auto history = w.context->history(20, w.model->config().window);
  for (auto _ : state) {
    Tape tape(false, Rng{0}, false);
    benchmark::DoNotOptimize(w.model->encode_structure(tape, history).entities.value().data());
  }
}
BENCHMARK(BM_StructuralEncode)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  Workload w(static_cast<std::size_t>(state.range(0)));
  const QueryBatch batch = w.context->batches(Split::train).back();
  w.model->structural.set_frozen(true);
  Tape cache(false, Rng{0}, false);
  const auto cached = w.model->encode_structure(cache, w.context->history(batch.t, w.model->config().window));
  for (auto _ : state) {
    Tape tape(true, Rng{1});
    const StructuralEncoder::Output structure{tape.constant(cached.entities.value()),
                                              tape.constant(cached.relations.value())};
    const ForwardOutputs out = w.model->forward(tape, structure, batch);
    tape.backward(major_loss(out.logits, batch.objects, LossMode::cross_entropy));
    for (Parameter* p : w.model->parameters()) p->zero_grad();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch.size()));
}
BENCHMARK(BM_ForwardBackward)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RankQuery(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor scores = filled({n}, 3);
  const std::vector<EntityId> filter = {1, 5, 9, 13};
  for (auto _ : state) benchmark::DoNotOptimize(rank_query(scores.values(), 7, filter));
}
BENCHMARK(BM_RankQuery)->Arg(7128)->Arg(23033);

void BM_NaiveBaseline(benchmark::State& state) {
  SyntheticSpec spec;
  spec.entities = 2000;
  spec.relations = 20;
  spec.timestamps = 100;
  spec.facts_per_timestamp = 500;
  spec.recurring_pool = 3000;
  const Dataset ds = synthetic_dataset(spec);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_naive(ds).mrr);
}
BENCHMARK(BM_NaiveBaseline)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mesh

BENCHMARK_MAIN();
