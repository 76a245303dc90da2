#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "feedrec/evaluation.hpp"
#include "feedrec/layers.hpp"
#include "feedrec/q_network.hpp"
#include "feedrec/s_network.hpp"
#include "feedrec/synthetic_env.hpp"

using namespace feedrec;

namespace {

// Desk-scale network shapes: 100 users, 500 items, 20-dim embeddings,
// hidden 20, MLP 50.
model::StackDims desk_dims() {
  model::StackDims d;
  d.n_users = 100;
  d.n_items = 500;
  return d;
}

nn::Vector noise(std::size_t n, Rng& rng) {
  nn::Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = uniform01(rng) - 0.5;
  return v;
}

SessionState history(std::size_t len, Rng& rng) {
  SessionState s(3, make_range_pool(500));
  for (std::size_t k = 0; k < len; ++k) {
    const auto c = s.candidates();
    const auto fb = static_cast<FeedbackType>(uniform_index(rng, 3));
    s = s.advance({c[uniform_index(rng, c.size())], fb, 30.0 * uniform01(rng)});
  }
  return s;
}

struct World {
  std::shared_ptr<sim::World> world;
  sim::SimConfig cfg;
  World() {
    Rng rng = make_rng(0, 10);
    world = std::make_shared<sim::World>(sim::make_world(100, 500, cfg, rng));
    Rng cal = make_rng(0, 11);
    cfg = sim::calibrated(cfg, sim::calibrate_entropy_range(*world, cfg, cal));
  }
};

const World& desk_world() {
  static const World w;
  return w;
}

}  // namespace

static void BM_LstmStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(1);
  nn::ParamStore p;
  const auto cell = nn::LstmCell::create(p, "l", 20, h);
  p.init_uniform(-0.1, 0.1, rng);
  const nn::Vector x = noise(20, rng);
  auto st = nn::RecurrentState::zeros(h);
  nn::LstmCache cache;
  for (auto _ : state) {
    const auto next = cell.forward(p, x, st, &cache);
    benchmark::DoNotOptimize(cell.backward(p, cache, next.h, next.c));
  }
}
BENCHMARK(BM_LstmStep)->Arg(20)->Arg(50);

static void BM_TimeLstmStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(2);
  nn::ParamStore p;
  const auto cell = nn::TimeLstmCell::create(p, "t", 20, h);
  p.init_uniform(-0.1, 0.1, rng);
  const nn::Vector x = noise(20, rng);
  auto st = nn::RecurrentState::zeros(h);
  nn::TimeLstmCache cache;
  for (auto _ : state) {
    const auto next = cell.forward(p, x, 0.4, st, &cache);
    benchmark::DoNotOptimize(cell.backward(p, cache, next.h, next.c));
  }
}
BENCHMARK(BM_TimeLstmStep)->Arg(20)->Arg(50);

static void BM_EmbedHistory(benchmark::State& state) {
  model::QNetwork q({desk_dims(), 50});
  Rng rng = make_rng(3);
  q.init(rng);
  const auto s = history(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(q.embed_history(s));
}
BENCHMARK(BM_EmbedHistory)->Arg(1)->Arg(5)->Arg(20)->Arg(50);

// Greedy action over every remaining candidate.
static void BM_GreedyOverPool(benchmark::State& state) {
  model::QNetwork q({desk_dims(), 50});
  Rng rng = make_rng(4);
  q.init(rng);
  const auto s = history(5, rng);
  const auto scorer = q.scorer();
  const auto sv = q.embed_history(s);
  for (auto _ : state) benchmark::DoNotOptimize(scorer.best(sv, s));
}
BENCHMARK(BM_GreedyOverPool);

static void BM_QUpdate(benchmark::State& state) {
  model::QNetwork q({desk_dims(), 50});
  Rng rng = make_rng(5);
  q.init(rng);
  std::vector<Transition> batch;
  for (int k = 0; k < state.range(0); ++k) {
    const auto s = history(uniform_index(rng, 6), rng);
    const auto c = s.candidates();
    const Interaction x{c[uniform_index(rng, c.size())], FeedbackType::Click, 20.0};
    batch.push_back({s, x.item, compute_metrics(x.feedback, 1.0, 0.0), s.advance(x), false});
  }
  for (auto _ : state) benchmark::DoNotOptimize(q.q_update(batch, RewardWeights{}, 0.9, 0.005));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_QUpdate)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_SnetLoss(benchmark::State& state) {
  const auto& w = desk_world();
  model::SNetwork s({desk_dims(), 50});
  Rng rng = make_rng(6);
  s.init(rng);
  const auto logs = sim::generate_logged_data(*w.world, 32, UniformPolicy{}, w.cfg, 1);
  const UniformPolicy pi;
  for (auto _ : state) {
    s.params().zero_grad();
    benchmark::DoNotOptimize(model::snet_loss(s, logs, pi, w.world->pool, model::LossWeights{}));
  }
}
BENCHMARK(BM_SnetLoss)->Unit(benchmark::kMillisecond);

static void BM_ListEntropy(benchmark::State& state) {
  const auto& w = desk_world();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<sim::TopicVector> items(w.world->items.begin(), w.world->items.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto _ : state) benchmark::DoNotOptimize(sim::list_entropy(items, 1e-6));
}
BENCHMARK(BM_ListEntropy)->Arg(5)->Arg(50);

static void BM_GenerateLogged(benchmark::State& state) {
  const auto& w = desk_world();
  const sim::BehaviorPolicy behavior(w.world, 1.0, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(sim::generate_logged_data(*w.world, 1000, behavior, w.cfg, 2));
}
BENCHMARK(BM_GenerateLogged)->Unit(benchmark::kMillisecond);

static void BM_StepNcis(benchmark::State& state) {
  const auto& w = desk_world();
  const auto logs = sim::generate_logged_data(*w.world, 1200, UniformPolicy{}, w.cfg, 3);
  std::vector<std::vector<double>> probs;
  for (const auto& t : logs) probs.push_back(t.propensities);
  const auto depth = eval::selector(eval::Metric::Depth);
  for (auto _ : state) benchmark::DoNotOptimize(eval::step_ncis(logs, probs, 5.0, depth));
}
BENCHMARK(BM_StepNcis);
BENCHMARK_MAIN();
