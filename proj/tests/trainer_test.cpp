#include "feedrec/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "feedrec/replay_buffer.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace feedrec::train {
namespace {

using testing::tiny_dims;

ReplayEntry entry(ItemId item) {
  Transition t{SessionState(0, make_range_pool(8)), item, {}, SessionState(0, make_range_pool(8)), true};
  return {std::move(t), nullptr, 0};
}

TEST(Epsilon, StartsAtEps0) {
  TrainConfig c;
  EXPECT_EQ(epsilon_at(0, c), 0.5);
}

TEST(Epsilon, FloorsAtMinimum) {
  TrainConfig c;
  EXPECT_EQ(epsilon_at(100000, c), c.eps_min);
}

TEST(Epsilon, NonIncreasing) {
  TrainConfig c;
  for (std::size_t k = 0; k < 500; ++k) EXPECT_LE(epsilon_at(k + 1, c), epsilon_at(k, c));
}

TEST(ReplayBuffer, NeverExceedsCapacityAndEvictsOldest) {
  ReplayBuffer b(3);
  for (ItemId i = 0; i < 5; ++i) {
    b.push(entry(i));
    EXPECT_LE(b.size(), 3u);
  }
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.at(0).transition.action, 2u);
  EXPECT_EQ(b.at(2).transition.action, 4u);
}

TEST(ReplayBuffer, SampleIsDistinctAndBounded) {
  ReplayBuffer b(10);
  for (ItemId i = 0; i < 6; ++i) b.push(entry(i));
  Rng rng = make_rng(1, 99);
  auto s = b.sample(4, rng);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) EXPECT_NE(s[i], s[j]);
  EXPECT_EQ(b.sample(50, rng).size(), 6u);
}

TEST(ReplayBuffer, EmptySampleThrows) {
  ReplayBuffer b(4);
  Rng rng = make_rng(1, 99);
  EXPECT_THROW(b.sample(1, rng), std::logic_error);
}

struct Fixture {
  testing::SmallWorld w = testing::small_world(sim::Style::Linear, 5, 20, 3);
  std::vector<Trajectory> data;
  model::QNetwork q{{tiny_dims(5, 20), 6}};
  model::SNetwork s{{tiny_dims(5, 20), 6}};

  Fixture() {
    data = sim::generate_logged_data(*w.world, 40, UniformPolicy{}, w.cfg, 5);
    Rng r1 = make_rng(2, 12, 0), r2 = make_rng(2, 12, 1);
    q.init(r1, 0.3);
    s.init(r2, 0.3);
  }
};

TrainConfig smoke_config() {
  TrainConfig c;
  c.iterations = 2;
  c.logged_per_iteration = 16;
  c.batch_size = 8;
  c.s_batch_transitions = 4;
  c.sim.max_depth = 6;
  return c;
}

TEST(RunTraining, ZeroIterationsLeavesParamsUnchanged) {
  Fixture f;
  const auto q0 = f.q.params().value(f.q.out_weight()).values;
  auto c = smoke_config();
  c.iterations = 0;
  auto curves = run_training(f.data, f.w.world->pool, c, f.q, f.s);
  EXPECT_TRUE(curves.rows.empty());
  EXPECT_EQ(f.q.params().value(f.q.out_weight()).values, q0);
}

TEST(RunTraining, SmokeRunHasFiniteCurves) {
  Fixture f;
  auto curves = run_training(f.data, f.w.world->pool, smoke_config(), f.q, f.s);
  ASSERT_EQ(curves.rows.size(), 2u);
  for (const auto& r : curves.rows) {
    EXPECT_TRUE(std::isfinite(r.td_loss));
    EXPECT_TRUE(std::isfinite(r.s_loss));
    EXPECT_GT(r.simulated, 0u);
  }
  EXPECT_TRUE(f.q.params().values_finite());
}

TEST(RunTraining, SameSeedSameCurves) {
  Fixture a, b;
  auto ca = run_training(a.data, a.w.world->pool, smoke_config(), a.q, a.s);
  auto cb = run_training(b.data, b.w.world->pool, smoke_config(), b.q, b.s);
  ASSERT_EQ(ca.rows.size(), cb.rows.size());
  for (std::size_t k = 0; k < ca.rows.size(); ++k) {
    EXPECT_EQ(ca.rows[k].td_loss, cb.rows[k].td_loss);
    EXPECT_EQ(ca.rows[k].s_loss, cb.rows[k].s_loss);
    EXPECT_EQ(ca.rows[k].simulated, cb.rows[k].simulated);
  }
}

TEST(RunTraining, SimulatedCountTracksMixWithinOneEpisode) {
  Fixture f;
  auto c = smoke_config();
  c.sim_ratio = 2.0;
  auto curves = run_training(f.data, f.w.world->pool, c, f.q, f.s);
  for (const auto& r : curves.rows) {
    const double target = 2.0 * static_cast<double>(r.logged);
    EXPECT_GE(static_cast<double>(r.simulated), target);
    EXPECT_LT(static_cast<double>(r.simulated), target + static_cast<double>(c.sim.max_depth));
  }
}

TEST(RunTraining, AblationAddsNoSimulatedTransitions) {
  Fixture f;
  auto c = smoke_config();
  c.simulate = false;
  auto curves = run_training(f.data, f.w.world->pool, c, f.q, f.s);
  for (const auto& r : curves.rows) EXPECT_EQ(r.simulated, 0u);
}

TEST(RunTraining, EmptyDataThrows) {
  Fixture f;
  std::vector<Trajectory> none;
  EXPECT_THROW(run_training(none, f.w.world->pool, smoke_config(), f.q, f.s), std::invalid_argument);
}

TEST(RunTraining, BadConfigThrows) {
  auto c = smoke_config();
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = smoke_config();
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RunTraining, EvalHookFillsRows) {
  Fixture f;
  EvalFn ev = [](const model::QNetwork&, std::size_t it) { return EvalPoint{1.0, 2.0 + it, 3.0, 4.0}; };
  auto curves = run_training(f.data, f.w.world->pool, smoke_config(), f.q, f.s, ev);
  EXPECT_EQ(curves.rows[1].eval.depth, 3.0);
}

TEST(RunTraining, ResumeContinuesFromCheckpoint) {
  const auto dir = std::filesystem::temp_directory_path() / "feedrec_trainer_resume";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  Fixture whole;
  auto full = run_training(whole.data, whole.w.world->pool, smoke_config(), whole.q, whole.s);

  Fixture part;
  auto c = smoke_config();
  c.iterations = 1;
  c.checkpoint_every = 1;
  c.checkpoint_dir = dir;
  run_training(part.data, part.w.world->pool, c, part.q, part.s);

  Fixture resumed;
  resumed.q.load(dir);
  resumed.s.load(dir);
  auto st = load_train_state(dir);
  EXPECT_EQ(st.next_iteration, 1u);
  // The buffer starts empty again, so only the shape of the continuation is
  // comparable, not its numbers.
  auto rest = run_training(resumed.data, resumed.w.world->pool, smoke_config(), resumed.q, resumed.s, {}, st);
  ASSERT_EQ(rest.rows.size(), full.rows.size());
  EXPECT_EQ(rest.rows[0].td_loss, full.rows[0].td_loss);
  EXPECT_EQ(rest.rows[1].iteration, 1u);
  std::filesystem::remove_all(dir);
}

TEST(Curves, RoundTrip) {
  TrainingCurves c;
  CurveRow r;
  r.iteration = 3;
  r.td_loss = 0.125;
  r.eval.depth = 2.5;
  r.logged = 7;
  c.rows.push_back(r);
  const auto path = std::filesystem::temp_directory_path() / "feedrec_curves_test.tsv";
  save_curves(path, c);
  auto back = load_curves(path);
  ASSERT_EQ(back.rows.size(), 1u);
  EXPECT_EQ(back.rows[0].td_loss, 0.125);
  EXPECT_EQ(back.rows[0].eval.depth, 2.5);
  EXPECT_TRUE(std::isnan(back.rows[0].eval.clicks));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace feedrec::train
