#include "feedrec/synthetic_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "feedrec/errors.hpp"
#include "feedrec/trajectory_io.hpp"

namespace feedrec::sim {

TopicVector::TopicVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::domain_error("topic vector must not be empty");
  double norm2 = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::domain_error("topic vector entries must be finite and >= 0");
    norm2 += v * v;
  }
  if (norm2 <= 0.0) throw std::domain_error("topic vector must not be zero");
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : values_) v *= inv;
}

TopicVector init_topic_vector(std::size_t primary_topic, double kappa, std::size_t dim, Rng& rng) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::domain_error("kappa must lie in [0, 1)");
  if (primary_topic >= dim) throw std::domain_error("primary topic out of range");
  std::vector<double> raw(dim);
  std::uniform_real_distribution<double> off(0.0, kappa);
  for (std::size_t k = 0; k < dim; ++k) raw[k] = (k == primary_topic) ? 1.0 - kappa : (kappa > 0.0 ? off(rng) : 0.0);
  return TopicVector(std::move(raw));
}

double click_probability(const TopicVector& user, const TopicVector& item) {
  const auto u = user.values();
  const auto i = item.values();
  if (u.size() != i.size()) throw std::invalid_argument("topic dimension mismatch");
  const double cos = std::inner_product(u.begin(), u.end(), i.begin(), 0.0);
  return std::clamp(cos, 0.0, 1.0);
}

double divergence(const TopicVector& m, const TopicVector& n, double eps_kl) {
  double sum = 0.0;
  for (std::size_t k = 0; k < m.dim(); ++k) {
    const double a = std::max(m[k], eps_kl);
    const double b = std::max(n[k], eps_kl);
    sum += a * std::log(a / b);
  }
  return sum;
}

double list_entropy(std::span<const TopicVector> items, double eps_kl) {
  const std::size_t t = items.size();
  if (t < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t m = 0; m < t; ++m) {
    for (std::size_t n = 0; n < t; ++n) {
      if (m != n) sum += divergence(items[m], items[n], eps_kl);
    }
  }
  return sum / static_cast<double>(t * (t - 1));
}

EntropyAccumulator::Floored EntropyAccumulator::floor(const TopicVector& v) const {
  Floored f;
  f.value.resize(v.dim());
  f.log.resize(v.dim());
  for (std::size_t k = 0; k < v.dim(); ++k) {
    f.value[k] = std::max(v[k], eps_kl_);
    f.log[k] = std::log(f.value[k]);
    f.self += f.value[k] * f.log[k];
  }
  return f;
}

// Divergences from f to every listed vector and back.
double EntropyAccumulator::pair_terms(const Floored& f) const {
  double sum = 0.0;
  for (const auto& g : floored_) {
    double cross_fg = 0.0;
    double cross_gf = 0.0;
    for (std::size_t k = 0; k < f.value.size(); ++k) {
      cross_fg += f.value[k] * g.log[k];
      cross_gf += g.value[k] * f.log[k];
    }
    sum += (f.self - cross_fg) + (g.self - cross_gf);
  }
  return sum;
}

void EntropyAccumulator::push(const TopicVector& v) {
  auto f = floor(v);
  pair_sum_ += pair_terms(f);
  floored_.push_back(std::move(f));
}

double EntropyAccumulator::value() const {
  const auto t = floored_.size();
  if (t < 2) return 0.0;
  return pair_sum_ / static_cast<double>(t * (t - 1));
}

double EntropyAccumulator::value_with(const TopicVector& v) const {
  const auto t = floored_.size() + 1;
  if (t < 2) return 0.0;
  return (pair_sum_ + pair_terms(floor(v))) / static_cast<double>(t * (t - 1));
}

std::string_view to_string(Style s) { return s == Style::Linear ? "linear" : "quadratic"; }

Style parse_style(std::string_view text) {
  if (text == "linear") return Style::Linear;
  if (text == "quadratic") return Style::Quadratic;
  throw std::invalid_argument("unknown style '" + std::string(text) + "'");
}

void validate(const SimConfig& cfg) {
  if (cfg.style == Style::Linear) {
    if (!(cfg.a > 0.0)) throw std::domain_error("linear style needs a > 0");
    if (!(cfg.d_coef > 0.0)) throw std::domain_error("linear style needs d > 0");
  }
  if (!(cfg.V > 0.0)) throw std::domain_error("return law needs V > 0");
  if (!(cfg.sigma > 0.0)) throw std::domain_error("quadratic width sigma must be > 0");
  if (!(cfg.v_min > 0.0)) throw std::domain_error("v_min must be > 0");
  if (!(cfg.kappa >= 0.0 && cfg.kappa < 1.0)) throw std::domain_error("kappa must lie in [0, 1)");
  if (cfg.dim == 0 || cfg.max_depth == 0) throw std::domain_error("dim and max_depth must be positive");
  if (!(cfg.eps_kl > 0.0)) throw std::domain_error("eps_kl must be > 0");
  if (!(cfg.dwell_base >= 0.0)) throw std::domain_error("dwell_base must be >= 0");
}

double stay_probability(double entropy, const SimConfig& cfg) {
  if (cfg.style == Style::Linear) return std::clamp(cfg.a * entropy + cfg.b, 0.0, 1.0);
  const double z = entropy - cfg.mu;
  return std::exp(-z * z / cfg.sigma);
}

double return_time(double entropy, const SimConfig& cfg) {
  if (cfg.style == Style::Linear) return std::max(cfg.V - cfg.d_coef * entropy, cfg.v_min);
  const double z = entropy - cfg.mu;
  return cfg.V * (1.0 - std::exp(-z * z / cfg.sigma)) + cfg.v_min;
}

namespace {

// Candidate maximizing the entropy of `acc` + candidate; smallest id on ties.
ItemId most_diverse(const World& world, const SessionState& s, const EntropyAccumulator& acc) {
  ItemId best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  s.for_each_candidate([&](ItemId i) {
    const double v = acc.size() == 0 ? 0.0 : acc.value_with(world.items[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  });
  return best;
}

}  // namespace

EntropyRange calibrate_entropy_range(const World& world, const SimConfig& cfg, Rng& rng,
                                     std::size_t list_length, std::size_t samples) {
  if (world.n_items() < list_length || list_length < 2) {
    throw std::invalid_argument("calibration needs at least list_length >= 2 items");
  }
  EntropyRange range;
  std::vector<std::vector<ItemId>> by_topic(cfg.dim);
  for (ItemId i = 0; i < world.n_items(); ++i) by_topic[world.item_topics[i]].push_back(i);

  double low = 0.0;
  std::size_t low_n = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    auto& topic = by_topic[s % cfg.dim];
    if (topic.size() < list_length) continue;
    std::vector<ItemId> pick = topic;
    std::shuffle(pick.begin(), pick.end(), rng);
    EntropyAccumulator acc(cfg.eps_kl);
    for (std::size_t k = 0; k < list_length; ++k) acc.push(world.items[pick[k]]);
    low += acc.value();
    ++low_n;
  }
  range.low = low_n > 0 ? low / static_cast<double>(low_n) : 0.0;

  double high = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    SessionState state(0, world.pool);
    EntropyAccumulator acc(cfg.eps_kl);
    for (std::size_t k = 0; k < list_length; ++k) {
      const ItemId i = k == 0 ? static_cast<ItemId>(uniform_index(rng, world.n_items()))
                              : most_diverse(world, state, acc);
      state = state.advance({i, FeedbackType::Skip, 0.0});
      acc.push(world.items[i]);
    }
    high += acc.value();
  }
  range.high = high / static_cast<double>(samples);
  return range;
}

SimConfig calibrated(SimConfig cfg, const EntropyRange& range) {
  const double span = range.high - range.low;
  if (!(span > 0.0)) throw std::domain_error("entropy range is empty");
  cfg.a = 0.75 / span;
  cfg.b = 0.2 - cfg.a * range.low;
  cfg.d_coef = 4.0 / span;
  cfg.V = 1.0 + cfg.d_coef * range.high;
  if (cfg.style == Style::Quadratic) {
    cfg.mu = 0.5 * (range.low + range.high);
    cfg.sigma = (span / 4.0) * (span / 4.0);
    cfg.V = 5.0;
  }
  return cfg;
}

World make_world(std::size_t n_users, std::size_t n_items, const SimConfig& cfg, Rng& rng) {
  World w;
  std::uniform_int_distribution<std::size_t> topic(0, cfg.dim - 1);
  for (std::size_t u = 0; u < n_users; ++u) {
    w.user_topics.push_back(topic(rng));
    w.users.push_back(init_topic_vector(w.user_topics.back(), cfg.kappa, cfg.dim, rng));
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    w.item_topics.push_back(topic(rng));
    w.items.push_back(init_topic_vector(w.item_topics.back(), cfg.kappa, cfg.dim, rng));
  }
  w.pool = make_range_pool(n_items);
  return w;
}

void save_topics(const std::filesystem::path& path, std::span<const TopicVector> vectors,
                 std::span<const std::size_t> topics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id\ttopic\tvector\n";
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    out << k << '\t' << topics[k];
    for (double v : vectors[k].values()) out << '\t' << format_double(v);
    out << '\n';
  }
}

namespace {

void load_topics(const std::filesystem::path& path, std::vector<TopicVector>& vectors,
                 std::vector<std::size_t>& topics) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, topic, value;
    std::getline(fields, id, '\t');
    std::getline(fields, topic, '\t');
    std::vector<double> values;
    while (std::getline(fields, value, '\t')) values.push_back(parse_double(value));
    if (std::stoul(id) != vectors.size()) throw std::invalid_argument("topic ids must be dense in " + path.string());
    topics.push_back(std::stoul(topic));
    vectors.emplace_back(std::move(values));
  }
}

}  // namespace

void save_world(const std::filesystem::path& dir, const World& world) {
  save_topics(dir / "users.tsv", world.users, world.user_topics);
  save_topics(dir / "items.tsv", world.items, world.item_topics);
}

World load_world(const std::filesystem::path& dir) {
  World w;
  load_topics(dir / "users.tsv", w.users, w.user_topics);
  load_topics(dir / "items.tsv", w.items, w.item_topics);
  w.pool = make_range_pool(w.items.size());
  return w;
}

EnvState::EnvState(TopicVector user, double eps_kl) : user_(std::move(user)), entropy_(eps_kl) {}

StepOutcome env_step(EnvState& st, const TopicVector& item, const SimConfig& cfg, Rng& rng) {
  if (!st.alive_) throw std::logic_error("cannot step a session after the user left");
  st.shown_.push_back(item);
  st.entropy_.push(item);

  StepOutcome out;
  const double p_click = click_probability(st.user_, item);
  const double u_click = uniform01(rng);
  const double u_leave = uniform01(rng);
  out.feedback = u_click < p_click ? FeedbackType::Click : FeedbackType::Skip;
  out.dwell = cfg.dwell_base * (0.5 + p_click);

  const double entropy = st.entropy_.value();
  const double p_stay = st.shown_.size() < 2 ? 1.0 : stay_probability(entropy, cfg);
  out.leave = u_leave >= p_stay || st.shown_.size() >= cfg.max_depth;
  if (out.leave) {
    out.return_gap = return_time(entropy, cfg);
    st.alive_ = false;
  }
  return out;
}

namespace {

class BehaviorSession final : public PolicySession {
 public:
  BehaviorSession(const World& world, SessionState s, double temperature, double mix)
      : world_(world), state_(std::move(s)), mix_(mix), weights_(world.n_items(), 0.0) {
    const auto& user = world.users.at(state_.user());
    state_.for_each_candidate([&](ItemId i) {
      weights_[i] = std::exp(click_probability(user, world.items[i]) / temperature);
      total_ += weights_[i];
    });
  }

  const SessionState& state() const override { return state_; }

  double probability(ItemId item) override {
    if (!state_.is_candidate(item)) return 0.0;
    const double n = static_cast<double>(state_.candidate_count());
    return (1.0 - mix_) * weights_[item] / total_ + mix_ / n;
  }

  ItemId sample(Rng& rng) override {
    if (state_.candidate_count() == 0) throw std::invalid_argument("no candidates left");
    double target = uniform01(rng);
    ItemId chosen = 0;
    bool found = false;
    state_.for_each_candidate([&](ItemId i) {
      if (found) return;
      chosen = i;
      target -= probability(i);
      if (target < 0.0) found = true;
    });
    return chosen;
  }

  void advance(const Interaction& x) override {
    state_ = state_.advance(x);
    total_ -= weights_[x.item];
    weights_[x.item] = 0.0;
  }

 private:
  const World& world_;
  SessionState state_;
  double mix_;
  std::vector<double> weights_;
  double total_ = 0.0;
};

class ScriptedSession final : public PolicySession {
 public:
  ScriptedSession(const World& world, SessionState s, double diversity, double eps_kl)
      : world_(world), state_(std::move(s)), diversity_(diversity), acc_(eps_kl) {
    for (const auto& x : state_.history()) acc_.push(world_.items[x.item]);
    refresh();
  }

  const SessionState& state() const override { return state_; }

  double probability(ItemId item) override {
    if (!state_.is_candidate(item)) return 0.0;
    double p = item == diverse_ ? diversity_ : 0.0;
    if (home_.empty()) {
      p += (1.0 - diversity_) / static_cast<double>(state_.candidate_count());
    } else if (std::binary_search(home_.begin(), home_.end(), item)) {
      p += (1.0 - diversity_) / static_cast<double>(home_.size());
    }
    return p;
  }

  ItemId sample(Rng& rng) override {
    if (bernoulli(rng, diversity_)) return diverse_;
    if (home_.empty()) {
      auto all = state_.candidates();
      return all[uniform_index(rng, all.size())];
    }
    return home_[uniform_index(rng, home_.size())];
  }

  void advance(const Interaction& x) override {
    state_ = state_.advance(x);
    acc_.push(world_.items[x.item]);
    refresh();
  }

 private:
  void refresh() {
    home_.clear();
    const auto topic = world_.user_topics.at(state_.user());
    state_.for_each_candidate([&](ItemId i) {
      if (world_.item_topics[i] == topic) home_.push_back(i);
    });
    diverse_ = most_diverse(world_, state_, acc_);
  }

  const World& world_;
  SessionState state_;
  double diversity_;
  EntropyAccumulator acc_;
  std::vector<ItemId> home_;
  ItemId diverse_ = 0;
};

}  // namespace

BehaviorPolicy::BehaviorPolicy(std::shared_ptr<const World> world, double temperature,
                               double uniform_mix)
    : world_(std::move(world)), temperature_(temperature), uniform_mix_(uniform_mix) {
  if (!(temperature_ > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(uniform_mix_ > 0.0 && uniform_mix_ <= 1.0)) throw std::invalid_argument("uniform mix must lie in (0, 1]");
}

std::unique_ptr<PolicySession> BehaviorPolicy::start(const SessionState& initial) const {
  return std::make_unique<BehaviorSession>(*world_, initial, temperature_, uniform_mix_);
}

ScriptedDiversityPolicy::ScriptedDiversityPolicy(std::shared_ptr<const World> world, double diversity,
                                                 double eps_kl)
    : world_(std::move(world)), diversity_(diversity), eps_kl_(eps_kl) {
  if (!(diversity_ >= 0.0 && diversity_ <= 1.0)) throw std::invalid_argument("diversity must lie in [0, 1]");
}

std::unique_ptr<PolicySession> ScriptedDiversityPolicy::start(const SessionState& initial) const {
  return std::make_unique<ScriptedSession>(*world_, initial, diversity_, eps_kl_);
}

Trajectory run_episode(const World& world, UserId user, const Policy& policy, const SimConfig& cfg,
                       Rng& rng) {
  Trajectory t;
  t.user = user;
  auto session = policy.start(SessionState(user, world.pool));
  EnvState env(world.users.at(user), cfg.eps_kl);
  while (env.alive()) {
    if (session->state().candidate_count() == 0) {
      t.return_gap = return_time(env.entropy(), cfg);
      break;
    }
    const ItemId item = session->sample(rng);
    const double p = session->probability(item);
    if (!(p > 0.0)) {
      throw std::runtime_error("policy chose item " + std::to_string(item) + " with zero propensity");
    }
    const auto outcome = env_step(env, world.items.at(item), cfg, rng);
    Interaction x{item, outcome.feedback, outcome.dwell};
    t.interactions.push_back(x);
    t.propensities.push_back(std::min(p, 1.0));
    if (outcome.leave) {
      t.return_gap = *outcome.return_gap;
    } else {
      session->advance(x);
    }
  }
  return t;
}

namespace {
constexpr std::uint64_t kLoggedStream = 1;
constexpr std::uint64_t kRolloutStream = 2;
}  // namespace

std::vector<Trajectory> generate_logged_data(const World& world, std::size_t n_episodes,
                                             const Policy& behavior, const SimConfig& cfg,
                                             std::uint64_t seed) {
  validate(cfg);
  std::vector<Trajectory> out;
  out.reserve(n_episodes);
  for (std::size_t k = 0; k < n_episodes; ++k) {
    auto rng = make_rng(seed, kLoggedStream, k);
    const auto user = static_cast<UserId>(uniform_index(rng, world.n_users()));
    out.push_back(run_episode(world, user, behavior, cfg, rng));
  }
  return out;
}

RolloutStats rollout_stats(const World& world, const Policy& policy, const SimConfig& cfg,
                           std::size_t n_episodes, std::uint64_t seed) {
  RolloutStats s;
  for (std::size_t k = 0; k < n_episodes; ++k) {
    auto rng = make_rng(seed, kRolloutStream, k);
    const auto user = static_cast<UserId>(uniform_index(rng, world.n_users()));
    const auto t = run_episode(world, user, policy, cfg, rng);
    std::vector<TopicVector> list;
    for (const auto& x : t.interactions) list.push_back(world.items[x.item]);
    s.clicks += static_cast<double>(t.clicks());
    s.depth += static_cast<double>(t.depth());
    s.return_gap += t.return_gap;
    s.entropy += list_entropy(list, cfg.eps_kl);
  }
  s.episodes = n_episodes;
  if (n_episodes > 0) {
    const double n = static_cast<double>(n_episodes);
    s.clicks /= n;
    s.depth /= n;
    s.return_gap /= n;
    s.entropy /= n;
  }
  return s;
}

}  // namespace feedrec::sim
