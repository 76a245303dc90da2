#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/policy.hpp"
#include "feedrec/random.hpp"

// Synthetic feed-streaming users: topic vectors, a cosine click model and
// session-level stay / return laws driven by the diversity of the fed list.
namespace feedrec::sim {

// Positive unit-norm topic vector of a user or an item.
class TopicVector {
 public:
  TopicVector() = default;
  // Normalizes `values`; throws std::domain_error on empty, negative,
  // non-finite or all-zero input.
  explicit TopicVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

 private:
  std::vector<double> values_;
};

// Primary entry 1 - kappa, the others Uniform(0, kappa), then L2-normalized.
// kappa must lie in [0, 1); with kappa = 0 the off-topic entries are exactly
// zero and the vector is one-hot.
TopicVector init_topic_vector(std::size_t primary_topic, double kappa, std::size_t dim, Rng& rng);

// Cosine similarity clamped to [0, 1].
double click_probability(const TopicVector& user, const TopicVector& item);

// sum_k m[k] * log(m[k] / n[k]) with both sides floored at eps_kl.
double divergence(const TopicVector& m, const TopicVector& n, double eps_kl);

// Mean divergence over all ordered pairs of distinct positions; 0 for fewer
// than two items.
double list_entropy(std::span<const TopicVector> items, double eps_kl);

// Running list entropy with O(t * d) appends.
class EntropyAccumulator {
 public:
  explicit EntropyAccumulator(double eps_kl = 1e-6) : eps_kl_(eps_kl) {}

  void push(const TopicVector& v);
  double value() const;
  // Entropy of the list with `v` appended, without appending it.
  double value_with(const TopicVector& v) const;
  std::size_t size() const { return floored_.size(); }

 private:
  struct Floored {
    std::vector<double> value;
    std::vector<double> log;
    double self = 0.0;  // sum_k v log v
  };
  Floored floor(const TopicVector& v) const;
  double pair_terms(const Floored& f) const;

  double eps_kl_;
  std::vector<Floored> floored_;
  double pair_sum_ = 0.0;
};

enum class Style { Linear, Quadratic };

std::string_view to_string(Style s);
Style parse_style(std::string_view text);

struct SimConfig {
  Style style = Style::Linear;
  // Linear: p(stay) = a E + b, v_r = max(V - d_coef E, v_min).
  double a = 0.8;
  double b = 0.2;
  double V = 5.0;
  double d_coef = 1.0;
  // Quadratic: p(stay) = exp(-(E - mu)^2 / sigma), v_r = V (1 - p) + v_min.
  double mu = 1.0;
  double sigma = 0.25;
  double v_min = 0.5;
  double kappa = 0.3;
  std::size_t dim = 10;
  std::size_t max_depth = 50;
  double eps_kl = 1e-6;
  double dwell_base = 2.0;  // seconds
};

// Throws std::domain_error when a constraint of the stay/return laws fails.
void validate(const SimConfig& cfg);

double stay_probability(double entropy, const SimConfig& cfg);
double return_time(double entropy, const SimConfig& cfg);

// Mean list entropy of single-topic lists (low) and of greedily diversified
// lists (high), both of length `list_length`.
struct EntropyRange {
  double low = 0.0;
  double high = 0.0;
};

struct World;

EntropyRange calibrate_entropy_range(const World& world, const SimConfig& cfg, Rng& rng,
                                     std::size_t list_length = 10, std::size_t samples = 20);

// Rescales the default law parameters onto the measured entropy range:
// linear stay spans [0.2, 0.95] and linear return time [5, 1] days from low
// to high entropy; the quadratic peak sits mid-range with width range / 4.
SimConfig calibrated(SimConfig cfg, const EntropyRange& range);

struct World {
  std::vector<TopicVector> users;
  std::vector<TopicVector> items;
  std::vector<std::size_t> user_topics;
  std::vector<std::size_t> item_topics;
  CandidatePool pool;

  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
};

World make_world(std::size_t n_users, std::size_t n_items, const SimConfig& cfg, Rng& rng);

// Tab-separated: id, primary topic, then the vector entries.
void save_topics(const std::filesystem::path& path, std::span<const TopicVector> vectors,
                 std::span<const std::size_t> topics);
void save_world(const std::filesystem::path& dir, const World& world);
World load_world(const std::filesystem::path& dir);

struct StepOutcome {
  FeedbackType feedback = FeedbackType::Skip;
  double dwell = 0.0;  // seconds
  bool leave = false;
  std::optional<double> return_gap;  // days, set when leave
};

class EnvState;

// Feeds `item`: click ~ Bernoulli(cosine), then leave ~ Bernoulli(1 - p(stay))
// with p(stay) computed from the list including `item`. A list of one item
// has no pairwise entropy and the user always stays; reaching max_depth ends
// the session. Throws std::logic_error on a dead state.
StepOutcome env_step(EnvState& st, const TopicVector& item, const SimConfig& cfg, Rng& rng);

class EnvState {
 public:
  EnvState(TopicVector user, double eps_kl);

  const TopicVector& user() const { return user_; }
  std::span<const TopicVector> shown() const { return shown_; }
  bool alive() const { return alive_; }
  double entropy() const { return entropy_.value(); }

 private:
  friend StepOutcome env_step(EnvState&, const TopicVector&, const SimConfig&, Rng&);

  TopicVector user_;
  std::vector<TopicVector> shown_;
  EntropyAccumulator entropy_;
  bool alive_ = true;
};

// Softmax over click probabilities at temperature tau, mixed with a uniform
// share so every candidate has positive probability.
class BehaviorPolicy final : public Policy {
 public:
  BehaviorPolicy(std::shared_ptr<const World> world, double temperature = 1.0,
                 double uniform_mix = 0.1);
  std::unique_ptr<PolicySession> start(const SessionState& initial) const override;

 private:
  std::shared_ptr<const World> world_;
  double temperature_;
  double uniform_mix_;
};

// Scripted policy with a fixed diversity level q in [0, 1]: with probability
// 1 - q a uniformly random candidate sharing the user's primary topic, with
// probability q the candidate that maximizes the list entropy (smallest id on
// ties). q = 0 gives low-entropy lists, q = 1 high-entropy ones.
class ScriptedDiversityPolicy final : public Policy {
 public:
  ScriptedDiversityPolicy(std::shared_ptr<const World> world, double diversity, double eps_kl);
  std::unique_ptr<PolicySession> start(const SessionState& initial) const override;

 private:
  std::shared_ptr<const World> world_;
  double diversity_;
  double eps_kl_;
};

// Plays one session of `policy` for `user` against the simulator.
Trajectory run_episode(const World& world, UserId user, const Policy& policy, const SimConfig& cfg,
                       Rng& rng);

// Logged sessions under a behavior policy. Episode k draws its user and all
// of its randomness from make_rng(seed, stream, k), so the output depends only
// on the arguments. Throws std::runtime_error if a logged action has zero
// propensity.
std::vector<Trajectory> generate_logged_data(const World& world, std::size_t n_episodes,
                                             const Policy& behavior, const SimConfig& cfg,
                                             std::uint64_t seed);

// Ground-truth session statistics of a policy in the simulator.
struct RolloutStats {
  double clicks = 0.0;
  double depth = 0.0;
  double return_gap = 0.0;
  double entropy = 0.0;  // mean list entropy at session end
  std::size_t episodes = 0;
};

RolloutStats rollout_stats(const World& world, const Policy& policy, const SimConfig& cfg,
                           std::size_t n_episodes, std::uint64_t seed);

}  // namespace feedrec::sim
