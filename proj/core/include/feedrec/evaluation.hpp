#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/policy.hpp"
#include "feedrec/synthetic_env.hpp"

namespace feedrec::eval {

inline constexpr double kNoCap = std::numeric_limits<double>::infinity();

enum class Metric { Clicks, Depth, ReturnRecip };

// r_t of one step of one trajectory.
using RewardSelector = std::function<double(const Trajectory&, std::size_t step)>;
RewardSelector selector(Metric m, double beta = 1.0);

// Step-wise normalized capped importance sampling:
//   sum_t sum_k rho_k(t) r_k(t) / sum_j rho_j(t),  rho = min(cap, prod pi / pi_b).
// A trajectory that already ended keeps its last ratio in the normalizer and
// contributes no reward, so with rho = 1 the estimate is the mean session
// total. target_probs[k][t] = pi(a_t | s_t) for trajectory k.
double step_ncis(std::span<const Trajectory> test, std::span<const std::vector<double>> target_probs, double cap,
                 const RewardSelector& reward);
double step_ncis(std::span<const Trajectory> test, const Policy& pi, const CandidatePool& pool, double cap,
                 const RewardSelector& reward);

struct EvalReport {
  double avg_clicks = 0.0;
  double avg_depth = 0.0;
  double avg_return_time = 0.0;
  double ncis_clicks = std::numeric_limits<double>::quiet_NaN();
  double ncis_depth = std::numeric_limits<double>::quiet_NaN();
  double ncis_return_recip = std::numeric_limits<double>::quiet_NaN();
  std::size_t sessions = 0;
  std::size_t steps = 0;
};

// Plain means of per-session clicks, depth and return gap.
EvalReport session_metrics(std::span<const Trajectory> trajectories);
// session_metrics of the logs plus NCIS estimates for `pi`.
EvalReport evaluate(std::span<const Trajectory> test, const Policy& pi, const CandidatePool& pool, double cap,
                    double beta = 1.0);
// Two-column metric/value table.
void write_report(std::ostream& out, const EvalReport& r);

struct ScatterPoint {
  std::size_t trajectory = 0;
  std::size_t step = 0;
  double weight = 0.0;     // capped cumulative ratio
  double diversity = 0.0;  // list entropy of the items shown up to the step
  double depth = 0.0;      // depth of the whole session
  double return_gap = 0.0;
};

// Samples up to n_points state-action pairs whose one-step capped ratio
// min(pi/pi_b, cap) exceeds `threshold`, in (trajectory, step) order. The
// running product would filter out nearly every step past the first under an
// epsilon-greedy policy over a large pool.
std::vector<ScatterPoint> diversity_engagement_points(const Policy& pi, std::span<const Trajectory> test,
                                                      const CandidatePool& pool,
                                                      std::span<const sim::TopicVector> item_vectors,
                                                      double threshold, std::size_t n_points, std::uint64_t seed,
                                                      double cap = 5.0, double eps_kl = 1e-6);
void write_points(std::ostream& out, std::span<const ScatterPoint> points);

double pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace feedrec::eval
