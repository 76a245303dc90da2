#include "feedrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "feedrec/trajectory_io.hpp"

namespace feedrec::eval {
namespace {

void check_propensities(std::span<const Trajectory> test) {
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& t = test[k];
    if (t.propensities.size() != t.interactions.size()) {
      throw std::invalid_argument("trajectory " + std::to_string(k) + " lacks propensities");
    }
    for (double p : t.propensities) {
      if (!(p > 0.0)) throw std::invalid_argument("trajectory " + std::to_string(k) + " has a zero propensity");
    }
  }
}

std::vector<std::vector<double>> capped_ratios(std::span<const Trajectory> test,
                                               std::span<const std::vector<double>> probs, double cap) {
  std::vector<std::vector<double>> out(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& t = test[k];
    if (probs[k].size() != t.interactions.size()) throw std::invalid_argument("one target probability per step");
    double ratio = 1.0;
    out[k].resize(probs[k].size());
    for (std::size_t s = 0; s < probs[k].size(); ++s) {
      ratio *= probs[k][s] / t.propensities[s];
      out[k][s] = std::min(ratio, cap);
    }
  }
  return out;
}

// min(pi/pi_b, cap) of each step on its own, not the running product.
std::vector<std::vector<double>> step_ratios(std::span<const Trajectory> test,
                                             std::span<const std::vector<double>> probs, double cap) {
  std::vector<std::vector<double>> out(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    if (probs[k].size() != test[k].interactions.size()) throw std::invalid_argument("one target probability per step");
    for (std::size_t s = 0; s < probs[k].size(); ++s) {
      out[k].push_back(std::min(probs[k][s] / test[k].propensities[s], cap));
    }
  }
  return out;
}

std::vector<std::vector<double>> target_probabilities(std::span<const Trajectory> test, const Policy& pi,
                                                      const CandidatePool& pool) {
  std::vector<std::vector<double>> probs;
  probs.reserve(test.size());
  for (const auto& t : test) probs.push_back(pi.trajectory_probabilities(t, pool));
  return probs;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

RewardSelector selector(Metric m, double beta) {
  switch (m) {
    case Metric::Clicks:
      return [](const Trajectory& t, std::size_t s) {
        return t.interactions[s].feedback == FeedbackType::Click ? 1.0 : 0.0;
      };
    case Metric::Depth:
      return [](const Trajectory& t, std::size_t s) {
        return t.interactions[s].feedback == FeedbackType::Leave ? 0.0 : 1.0;
      };
    case Metric::ReturnRecip:
      return [beta](const Trajectory& t, std::size_t s) {
        return s + 1 == t.interactions.size() && t.return_gap > 0.0 ? beta / t.return_gap : 0.0;
      };
  }
  throw std::invalid_argument("unknown metric");
}

double step_ncis(std::span<const Trajectory> test, std::span<const std::vector<double>> target_probs, double cap,
                 const RewardSelector& reward) {
  if (test.empty()) throw std::invalid_argument("step-NCIS needs a nonempty test set");
  if (!(cap >= 1.0)) throw std::invalid_argument("importance cap must be at least 1");
  if (target_probs.size() != test.size()) throw std::invalid_argument("one probability row per trajectory");
  check_propensities(test);
  const auto rho = capped_ratios(test, target_probs, cap);
  std::size_t horizon = 0;
  for (const auto& t : test) horizon = std::max(horizon, t.interactions.size());

  double estimate = 0.0;
  for (std::size_t s = 0; s < horizon; ++s) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto& r = rho[k];
      if (r.empty()) {
        den += 1.0;
        continue;
      }
      if (s < r.size()) {
        num += r[s] * reward(test[k], s);
        den += r[s];
      } else {
        den += r.back();
      }
    }
    if (den > 0.0) estimate += num / den;
  }
  return estimate;
}

double step_ncis(std::span<const Trajectory> test, const Policy& pi, const CandidatePool& pool, double cap,
                 const RewardSelector& reward) {
  check_propensities(test);
  const auto probs = target_probabilities(test, pi, pool);
  return step_ncis(test, probs, cap, reward);
}

EvalReport session_metrics(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("session metrics need at least one session");
  EvalReport r;
  for (const auto& t : trajectories) {
    r.avg_clicks += static_cast<double>(t.clicks());
    r.avg_depth += static_cast<double>(t.depth());
    r.avg_return_time += t.return_gap;
    r.steps += t.interactions.size();
  }
  r.sessions = trajectories.size();
  const double n = static_cast<double>(r.sessions);
  r.avg_clicks /= n;
  r.avg_depth /= n;
  r.avg_return_time /= n;
  return r;
}

EvalReport evaluate(std::span<const Trajectory> test, const Policy& pi, const CandidatePool& pool, double cap,
                    double beta) {
  EvalReport r = session_metrics(test);
  check_propensities(test);
  const auto probs = target_probabilities(test, pi, pool);
  r.ncis_clicks = step_ncis(test, probs, cap, selector(Metric::Clicks));
  r.ncis_depth = step_ncis(test, probs, cap, selector(Metric::Depth));
  r.ncis_return_recip = step_ncis(test, probs, cap, selector(Metric::ReturnRecip, beta));
  return r;
}

void write_report(std::ostream& out, const EvalReport& r) {
  out << "metric\tvalue\n"
      << "sessions\t" << r.sessions << '\n'
      << "steps\t" << r.steps << '\n'
      << "avg_clicks_per_session\t" << format_double(r.avg_clicks) << '\n'
      << "avg_depth_per_session\t" << format_double(r.avg_depth) << '\n'
      << "avg_return_time\t" << format_double(r.avg_return_time) << '\n'
      << "ncis_clicks\t" << format_double(r.ncis_clicks) << '\n'
      << "ncis_depth\t" << format_double(r.ncis_depth) << '\n'
      << "ncis_return_recip\t" << format_double(r.ncis_return_recip) << '\n';
}

std::vector<ScatterPoint> diversity_engagement_points(const Policy& pi, std::span<const Trajectory> test,
                                                      const CandidatePool& pool,
                                                      std::span<const sim::TopicVector> item_vectors,
                                                      double threshold, std::size_t n_points, std::uint64_t seed,
                                                      double cap, double eps_kl) {
  check_propensities(test);
  const auto probs = target_probabilities(test, pi, pool);
  const auto rho = step_ratios(test, probs, cap);
  std::vector<std::pair<std::size_t, std::size_t>> eligible;
  for (std::size_t k = 0; k < test.size(); ++k) {
    for (std::size_t s = 0; s < rho[k].size(); ++s) {
      if (rho[k][s] > threshold) eligible.emplace_back(k, s);
    }
  }
  if (eligible.size() > n_points) {
    Rng rng = make_rng(seed, 5);
    for (std::size_t i = 0; i < n_points; ++i) {
      std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
    }
    eligible.resize(n_points);
    std::sort(eligible.begin(), eligible.end());
  }

  std::vector<ScatterPoint> out;
  out.reserve(eligible.size());
  std::size_t current = test.size();
  sim::EntropyAccumulator acc(eps_kl);
  std::size_t filled = 0;
  for (const auto& [k, s] : eligible) {
    if (k != current) {
      current = k;
      acc = sim::EntropyAccumulator(eps_kl);
      filled = 0;
    }
    for (; filled <= s; ++filled) acc.push(item_vectors[test[k].interactions[filled].item]);
    ScatterPoint p;
    p.trajectory = k;
    p.step = s;
    p.weight = rho[k][s];
    p.diversity = acc.value();
    p.depth = static_cast<double>(test[k].depth());
    p.return_gap = test[k].return_gap;
    out.push_back(p);
  }
  return out;
}

void write_points(std::ostream& out, std::span<const ScatterPoint> points) {
  out << "trajectory\tstep\tweight\tdiversity\tdepth\treturn_gap\n";
  for (const auto& p : points) {
    out << p.trajectory << '\t' << p.step << '\t' << format_double(p.weight) << '\t' << format_double(p.diversity)
        << '\t' << format_double(p.depth) << '\t' << format_double(p.return_gap) << '\n';
  }
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation needs two equal-length samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

}  // namespace feedrec::eval
