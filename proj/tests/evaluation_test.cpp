#include "feedrec/evaluation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace feedrec::eval {
namespace {

using testing::make_trajectory;

constexpr auto C = FeedbackType::Click;
constexpr auto S = FeedbackType::Skip;
constexpr auto L = FeedbackType::Leave;

// A: click, skip (gap 2). B: click (gap 4).
std::vector<Trajectory> two_sessions() {
  return {make_trajectory(0, {{1, C, 3.0}, {2, S, 1.0}}, 2.0, {0.25, 0.5}),
          make_trajectory(1, {{3, C, 3.0}}, 4.0, {0.2})};
}
const std::vector<std::vector<double>> kTarget = {{0.5, 0.5}, {0.1}};

std::vector<std::vector<double>> behavior_probs(std::span<const Trajectory> t) {
  std::vector<std::vector<double>> p;
  for (const auto& x : t) p.push_back(x.propensities);
  return p;
}

TEST(StepNcis, HandComputedTwoSessions) {
  const auto t = two_sessions();
  // rho_A = [2, 2], rho_B = [0.5]; B keeps 0.5 in the normalizer after it ends.
  EXPECT_NEAR(step_ncis(t, kTarget, kNoCap, selector(Metric::Clicks)), 1.0, 1e-12);
  EXPECT_NEAR(step_ncis(t, kTarget, kNoCap, selector(Metric::Depth)), 1.0 + 2.0 / 2.5, 1e-12);
  EXPECT_NEAR(step_ncis(t, kTarget, kNoCap, selector(Metric::ReturnRecip)), 0.125 / 2.5 + 1.0 / 2.5, 1e-12);
}

TEST(StepNcis, CapClipsCumulativeRatio) {
  const auto t = two_sessions();
  // rho_A capped to [1.5, 1.5]: step 1 gives 1.5 / 2.0.
  EXPECT_NEAR(step_ncis(t, kTarget, 1.5, selector(Metric::Depth)), 1.0 + 1.5 / 2.0, 1e-12);
}

TEST(StepNcis, BehaviorPolicyGivesSessionMeans) {
  const std::vector<Trajectory> t = {
      make_trajectory(0, {{1, C, 3.0}, {2, S, 1.0}, {4, L, 0.5}}, 2.0, {0.3, 0.2, 0.9}),
      make_trajectory(1, {{3, C, 3.0}}, 4.0, {0.7}),
      make_trajectory(2, {{5, S, 3.0}, {6, C, 2.0}}, 1.0, {0.05, 0.6})};
  const auto p = behavior_probs(t);
  const auto m = session_metrics(t);
  EXPECT_NEAR(step_ncis(t, p, kNoCap, selector(Metric::Clicks)), m.avg_clicks, 1e-12);
  EXPECT_NEAR(step_ncis(t, p, kNoCap, selector(Metric::Depth)), m.avg_depth, 1e-12);
  EXPECT_NEAR(step_ncis(t, p, kNoCap, selector(Metric::ReturnRecip, 1.0)), (0.5 + 0.25 + 1.0) / 3.0, 1e-12);
}

TEST(StepNcis, SingleTrajectoryIgnoresItsRatios) {
  const std::vector<Trajectory> t = {make_trajectory(0, {{1, C, 3.0}, {2, S, 1.0}, {3, C, 1.0}}, 2.0, {0.5, 0.5, 0.5})};
  const std::vector<std::vector<double>> p = {{0.01, 0.9, 0.3}};
  EXPECT_NEAR(step_ncis(t, p, kNoCap, selector(Metric::Clicks)), 2.0, 1e-12);
  EXPECT_NEAR(step_ncis(t, p, kNoCap, selector(Metric::Depth)), 3.0, 1e-12);
}

TEST(StepNcis, DuplicationInvariant) {
  auto t = two_sessions();
  auto p = kTarget;
  const double once = step_ncis(t, p, 5.0, selector(Metric::Depth));
  const auto copy = t;
  t.insert(t.end(), copy.begin(), copy.end());
  p.insert(p.end(), kTarget.begin(), kTarget.end());
  EXPECT_NEAR(step_ncis(t, p, 5.0, selector(Metric::Depth)), once, 1e-12);
}

TEST(StepNcis, CapAboveAllRatiosIsInactive) {
  const auto t = two_sessions();
  for (auto m : {Metric::Clicks, Metric::Depth, Metric::ReturnRecip}) {
    EXPECT_EQ(step_ncis(t, kTarget, 5.0, selector(m)), step_ncis(t, kTarget, kNoCap, selector(m)));
  }
}

TEST(StepNcis, ZeroPropensityNamesTrajectory) {
  auto t = two_sessions();
  t[1].propensities[0] = 0.0;
  try {
    step_ncis(t, kTarget, 5.0, selector(Metric::Depth));
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("trajectory 1"), std::string::npos) << e.what();
  }
}

TEST(StepNcis, RejectsEmptySetAndSmallCap) {
  std::vector<Trajectory> none;
  std::vector<std::vector<double>> no_probs;
  EXPECT_THROW(step_ncis(none, no_probs, 5.0, selector(Metric::Depth)), std::invalid_argument);
  EXPECT_THROW(step_ncis(two_sessions(), kTarget, 0.5, selector(Metric::Depth)), std::invalid_argument);
}

TEST(Selector, ReturnRewardOnlyOnLastStep) {
  const auto t = two_sessions();
  const auto r = selector(Metric::ReturnRecip, 2.0);
  EXPECT_EQ(r(t[0], 0), 0.0);
  EXPECT_EQ(r(t[0], 1), 1.0);
  EXPECT_EQ(r(t[1], 0), 0.5);
}

TEST(SessionMetrics, Means) {
  const auto m = session_metrics(two_sessions());
  EXPECT_EQ(m.sessions, 2u);
  EXPECT_EQ(m.steps, 3u);
  EXPECT_DOUBLE_EQ(m.avg_clicks, 1.0);
  EXPECT_DOUBLE_EQ(m.avg_depth, 1.5);
  EXPECT_DOUBLE_EQ(m.avg_return_time, 3.0);
}

TEST(SessionMetrics, DuplicateSessionsChangeNothing) {
  const auto t = two_sessions();
  const std::vector<Trajectory> one = {t[0]}, twice = {t[0], t[0]};
  const auto a = session_metrics(one), b = session_metrics(twice);
  EXPECT_EQ(a.avg_clicks, b.avg_clicks);
  EXPECT_EQ(a.avg_depth, b.avg_depth);
  EXPECT_EQ(a.avg_return_time, b.avg_return_time);
}

TEST(SessionMetrics, EmptyThrows) {
  std::vector<Trajectory> none;
  EXPECT_THROW(session_metrics(none), std::invalid_argument);
}

TEST(Evaluate, UniformOnUniformLogsEqualsSessionMeans) {
  auto w = testing::small_world(sim::Style::Linear, 5, 20, 4);
  const auto logs = sim::generate_logged_data(*w.world, 300, UniformPolicy{}, w.cfg, 9);
  const auto r = evaluate(logs, UniformPolicy{}, w.world->pool, 5.0);
  EXPECT_NEAR(r.ncis_clicks, r.avg_clicks, 1e-12);
  EXPECT_NEAR(r.ncis_depth, r.avg_depth, 1e-12);
  double recip = 0.0;
  for (const auto& t : logs) recip += 1.0 / t.return_gap;
  EXPECT_NEAR(r.ncis_return_recip, recip / static_cast<double>(logs.size()), 1e-12);
}

TEST(Evaluate, DeskScaleUniformMatchesMonteCarlo) {
  auto w = testing::small_world(sim::Style::Linear, 100, 500, 0);
  const auto logs = sim::generate_logged_data(*w.world, 10000, UniformPolicy{}, w.cfg, 1);
  const auto r = evaluate(logs, UniformPolicy{}, w.world->pool, 5.0);
  // Fresh rollouts on a different seed.
  const auto mc = sim::rollout_stats(*w.world, UniformPolicy{}, w.cfg, 10000, 77);
  EXPECT_NEAR(r.ncis_depth, mc.depth, 0.05 * mc.depth);
  EXPECT_NEAR(r.ncis_clicks, mc.clicks, 0.05 * mc.clicks);
  EXPECT_NEAR(r.avg_return_time, mc.return_gap, 0.05 * mc.return_gap);
}

TEST(Report, HasFixedColumns) {
  std::ostringstream out;
  write_report(out, session_metrics(two_sessions()));
  const auto s = out.str();
  EXPECT_EQ(s.rfind("metric\tvalue\n", 0), 0u);
  EXPECT_NE(s.find("avg_depth_per_session\t1.5"), std::string::npos);
  EXPECT_NE(s.find("ncis_depth\t"), std::string::npos);
}

struct ScatterSetup {
  testing::SmallWorld w = testing::small_world(sim::Style::Linear, 5, 20, 6);
  std::vector<Trajectory> logs;
  ScatterSetup() { logs = sim::generate_logged_data(*w.world, 60, UniformPolicy{}, w.cfg, 2); }
};

TEST(Scatter, UniformOnUniformKeepsEveryStepWithUnitWeight) {
  ScatterSetup s;
  std::size_t steps = 0;
  for (const auto& t : s.logs) steps += t.interactions.size();
  const auto pts =
      diversity_engagement_points(UniformPolicy{}, s.logs, s.w.world->pool, s.w.world->items, 0.01, 100000, 3);
  ASSERT_EQ(pts.size(), steps);
  for (const auto& p : pts) EXPECT_NEAR(p.weight, 1.0, 1e-12);
}

TEST(Scatter, RespectsPointBudgetAndOrder) {
  ScatterSetup s;
  const auto pts = diversity_engagement_points(UniformPolicy{}, s.logs, s.w.world->pool, s.w.world->items, 0.01, 25, 3);
  ASSERT_EQ(pts.size(), 25u);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_TRUE(std::pair(pts[i - 1].trajectory, pts[i - 1].step) < std::pair(pts[i].trajectory, pts[i].step));
  }
  const auto again =
      diversity_engagement_points(UniformPolicy{}, s.logs, s.w.world->pool, s.w.world->items, 0.01, 25, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].step, again[i].step);
}

TEST(Scatter, ThresholdAboveAllWeightsKeepsNothing) {
  ScatterSetup s;
  EXPECT_TRUE(
      diversity_engagement_points(UniformPolicy{}, s.logs, s.w.world->pool, s.w.world->items, 1.0, 100, 3).empty());
}

TEST(Scatter, FiltersOnOneStepRatioNotRunningProduct) {
  ScatterSetup s;
  auto q = std::make_shared<model::QNetwork>(model::QNetConfig{testing::tiny_dims(5, 20), 6});
  Rng rng = make_rng(4, 1);
  q->init(rng, 0.3);
  const model::QPolicy pi(q, 0.05);
  // eps-greedy over uniform logs: every one-step ratio is at least eps
  std::size_t steps = 0;
  for (const auto& t : s.logs) steps += t.interactions.size();
  const auto pts = diversity_engagement_points(pi, s.logs, s.w.world->pool, s.w.world->items, 0.01, 100000, 3);
  ASSERT_EQ(pts.size(), steps);
  for (const auto& p : pts) {
    const auto& t = s.logs[p.trajectory];
    const double r = pi.trajectory_probabilities(t, s.w.world->pool)[p.step] / t.propensities[p.step];
    EXPECT_NEAR(p.weight, std::min(r, 5.0), 1e-12);
  }
}

TEST(Scatter, DiversityIsPrefixEntropyAndDepthIsSessionDepth) {
  ScatterSetup s;
  const auto pts = diversity_engagement_points(UniformPolicy{}, s.logs, s.w.world->pool, s.w.world->items, 0.01, 40, 8);
  for (const auto& p : pts) {
    const auto& t = s.logs[p.trajectory];
    std::vector<sim::TopicVector> prefix;
    for (std::size_t k = 0; k <= p.step; ++k) prefix.push_back(s.w.world->items[t.interactions[k].item]);
    EXPECT_NEAR(p.diversity, sim::list_entropy(prefix, 1e-6), 1e-9);
    EXPECT_EQ(p.depth, static_cast<double>(t.depth()));
    EXPECT_EQ(p.return_gap, t.return_gap);
  }
}

TEST(Correlation, PearsonBasics) {
  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1}, k = {5, 5, 5, 5};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
  EXPECT_EQ(pearson(x, k), 0.0);
  const std::vector<double> one = {1.0};
  EXPECT_THROW(pearson(one, one), std::invalid_argument);
}

TEST(Correlation, SpearmanUsesAverageRanks) {
  const std::vector<double> x = {1, 2, 3, 4}, cubed = {1, 8, 27, 64};
  EXPECT_NEAR(spearman(x, cubed), 1.0, 1e-12);
  // ranks (1.5, 1.5, 3) against (1, 2, 3)
  const std::vector<double> a = {1, 1, 2}, b = {1, 2, 3};
  EXPECT_NEAR(spearman(a, b), std::sqrt(3.0) / 2.0, 1e-12);
}

}  // namespace
}  // namespace feedrec::eval
