#include "feedrec/q_network.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "feedrec/checkpoint.hpp"

namespace feedrec::model {

using nn::Vector;

QNetwork::QNetwork(const QNetConfig& cfg) : cfg_(cfg), stack_(params_, "q", cfg.stack) {
  const auto S = stack_.state_dim();
  const auto I = stack_.item_dim();
  const auto M = cfg.mlp_hidden;
  state_weight_ = params_.add("q.mlp.state_weight", {S, M});
  item_weight_ = params_.add("q.mlp.item_weight", {I, M});
  hidden_bias_ = params_.add("q.mlp.bias", {M});
  out_weight_ = params_.add("q.mlp.out.weight", {M});
  out_bias_ = params_.add("q.mlp.out.bias", {1});
}

void QNetwork::init(Rng& rng, double scale) { params_.init_uniform(-scale, scale, rng); }

Vector QNetwork::embed_history(const SessionState& state) const {
  return stack_.embed(params_, state.user(), state.history());
}

double QNetwork::mlp_forward(const Vector& s, ItemId item, Vector* pre_out) const {
  if (item >= cfg_.stack.n_items) throw std::out_of_range("item " + std::to_string(item) + " has no embedding");
  Vector pre = params_.matrix(state_weight_).transpose() * s;
  pre.noalias() += params_.matrix(item_weight_).transpose() * stack_.item_embedding(params_, item);
  pre += params_.vector(hidden_bias_);
  const double q = params_.vector(out_weight_).dot(pre.cwiseMax(0.0)) + params_.vector(out_bias_)[0];
  if (pre_out) *pre_out = std::move(pre);
  return q;
}

double QNetwork::q_value(const Vector& state_vec, ItemId item) const { return mlp_forward(state_vec, item, nullptr); }

double QNetwork::q_value(const SessionState& state, ItemId item) const {
  return q_value(embed_history(state), item);
}

QNetwork::Scorer::Scorer(const QNetwork& net) : net_(&net) {
  const auto& p = net.params_;
  item_part_ = p.matrix(net.stack_.item_table()) * p.matrix(net.item_weight_);
}

Vector QNetwork::Scorer::state_part(const Vector& state_vec) const {
  const auto& p = net_->params_;
  Vector a = p.matrix(net_->state_weight_).transpose() * state_vec;
  return a + p.vector(net_->hidden_bias_);
}

double QNetwork::Scorer::score(const Vector& state_part, ItemId item) const {
  const auto& p = net_->params_;
  const auto w = p.vector(net_->out_weight_);
  double q = p.vector(net_->out_bias_)[0];
  const auto row = item_part_.row(item);
  for (Eigen::Index j = 0; j < state_part.size(); ++j) {
    const double h = state_part[j] + row[j];
    if (h > 0.0) q += w[j] * h;
  }
  return q;
}

std::pair<ItemId, double> QNetwork::Scorer::best(const Vector& state_vec, const SessionState& state) const {
  const Vector a = state_part(state_vec);
  bool found = false;
  ItemId arg = 0;
  double best_q = 0.0;
  state.for_each_candidate([&](ItemId i) {
    const double q = score(a, i);
    // strict comparison in increasing id order keeps the smallest id on ties
    if (!found || q > best_q) {
      found = true;
      arg = i;
      best_q = q;
    }
  });
  if (!found) throw std::invalid_argument("no candidates to score");
  return {arg, best_q};
}

ItemId QNetwork::select_action(const SessionState& state, double epsilon, Rng& rng) const {
  const auto n = state.candidate_count();
  if (n == 0) throw std::invalid_argument("select_action: empty candidate set");
  if (uniform01(rng) < epsilon) {
    auto target = uniform_index(rng, n);
    ItemId chosen = 0;
    state.for_each_candidate([&](ItemId i) {
      if (target-- == 0) chosen = i;
    });
    return chosen;
  }
  return scorer().best(embed_history(state), state).first;
}

double QNetwork::td_target(const Transition& tr, const RewardWeights& omega, double gamma) const {
  return td_target(tr, omega, gamma, scorer());
}

double QNetwork::td_target(const Transition& tr, const RewardWeights& omega, double gamma,
                           const Scorer& scorer) const {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  const double r = reward(tr.metrics, omega);
  if (tr.terminal || gamma == 0.0) return r;
  if (tr.next_state.candidate_count() == 0) {
    if (empty_next_warnings_++ == 0) {
      std::clog << "feedrec: non-terminal transition without next candidates treated as terminal\n";
    }
    return r;
  }
  return r + gamma * scorer.best(embed_history(tr.next_state), tr.next_state).second;
}

std::vector<double> QNetwork::td_targets(std::span<const Transition* const> batch, const RewardWeights& omega,
                                         double gamma) const {
  const auto sc = scorer();
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto* tr : batch) y.push_back(td_target(*tr, omega, gamma, sc));
  return y;
}

double QNetwork::td_loss(std::span<const Transition* const> batch, std::span<const double> targets) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double d = q_value(batch[b]->state, batch[b]->action) - targets[b];
    loss += d * d;
  }
  return loss / static_cast<double>(batch.size());
}

double QNetwork::accumulate_td_gradients(std::span<const Transition* const> batch, std::span<const double> targets) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (targets.size() != batch.size()) throw std::invalid_argument("one target per transition");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<Vector> d_states;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tr = *batch[b];
    StackTrace trace;
    const Vector s = stack_.embed(params_, tr.state.user(), tr.state.history(), &trace);
    Vector pre;
    const double q = mlp_forward(s, tr.action, &pre);
    const double diff = q - targets[b];
    loss += diff * diff;
    const double dq = 2.0 * diff * inv_b;

    const Vector hidden = pre.cwiseMax(0.0);
    params_.grad_vector(out_weight_) += dq * hidden;
    params_.grad_vector(out_bias_)[0] += dq;
    Vector dpre = dq * params_.vector(out_weight_);
    for (Eigen::Index j = 0; j < dpre.size(); ++j) {
      if (pre[j] <= 0.0) dpre[j] = 0.0;
    }
    const Vector e = stack_.item_embedding(params_, tr.action);
    params_.grad_matrix(state_weight_).noalias() += s * dpre.transpose();
    params_.grad_matrix(item_weight_).noalias() += e * dpre.transpose();
    params_.grad_vector(hidden_bias_) += dpre;

    d_states.assign(trace.steps.size() + 1, Vector());
    d_states.back() = params_.matrix(state_weight_) * dpre;
    stack_.backward(params_, trace, d_states);
    stack_.backward_item(params_, tr.action, params_.matrix(item_weight_) * dpre);
  }
  return loss * inv_b;
}

double QNetwork::q_update(std::span<const Transition* const> batch, const RewardWeights& omega, double gamma,
                          double lr, double* max_abs_q) {
  const auto y = td_targets(batch, omega, gamma);
  params_.zero_grad();
  const double loss = accumulate_td_gradients(batch, y);
  if (max_abs_q) {
    double m = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      m = std::max({m, std::abs(y[b]), std::abs(q_value(batch[b]->state, batch[b]->action))});
    }
    *max_abs_q = m;
  }
  nn::sgd_update(params_, lr);
  return loss;
}

double QNetwork::q_update(std::span<const Transition> batch, const RewardWeights& omega, double gamma, double lr) {
  const auto ptrs = pointers(batch);
  return q_update(ptrs, omega, gamma, lr);
}

void QNetwork::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(dir / "qnet.ckpt", params_);
  nn::save_manifest(dir / "qnet.manifest", layout_manifest(cfg_.stack, cfg_.mlp_hidden));
}

void QNetwork::load(const std::filesystem::path& dir) {
  const auto m = nn::load_manifest(dir / "qnet.manifest");
  if (m != layout_manifest(cfg_.stack, cfg_.mlp_hidden)) {
    throw std::runtime_error("q-network manifest in " + dir.string() + " does not match the model layout");
  }
  nn::load_checkpoint(dir / "qnet.ckpt", params_);
}

std::vector<const Transition*> pointers(std::span<const Transition> batch) {
  std::vector<const Transition*> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(&t);
  return out;
}

namespace {

class QSession final : public PolicySession {
 public:
  QSession(const QNetwork& net, const QNetwork::Scorer& scorer, double eps, const SessionState& initial)
      : net_(net), scorer_(scorer), eps_(eps), state_(initial) {
    StackState st = net.stack().initial();
    for (const auto& x : initial.history()) st = net.stack().step(net.params(), st, x);
    stack_ = std::move(st);
    refresh();
  }

  const SessionState& state() const override { return state_; }

  double probability(ItemId item) override {
    if (!state_.is_candidate(item)) return 0.0;
    const double uniform = eps_ / static_cast<double>(state_.candidate_count());
    return uniform + (item == best_ ? 1.0 - eps_ : 0.0);
  }

  ItemId sample(Rng& rng) override {
    const auto n = state_.candidate_count();
    if (n == 0) throw std::invalid_argument("no candidates left");
    if (uniform01(rng) < eps_) {
      auto target = uniform_index(rng, n);
      ItemId chosen = 0;
      state_.for_each_candidate([&](ItemId i) {
        if (target-- == 0) chosen = i;
      });
      return chosen;
    }
    return best_;
  }

  void advance(const Interaction& x) override {
    state_ = state_.advance(x);
    stack_ = net_.stack().step(net_.params(), stack_, x);
    refresh();
  }

 private:
  void refresh() {
    if (state_.candidate_count() == 0) return;
    best_ = scorer_.best(net_.stack().state_vector(net_.params(), state_.user(), stack_), state_).first;
  }

  const QNetwork& net_;
  const QNetwork::Scorer& scorer_;
  double eps_;
  SessionState state_;
  StackState stack_;
  ItemId best_ = 0;
};

}  // namespace

QPolicy::QPolicy(std::shared_ptr<const QNetwork> net, double epsilon)
    : net_(std::move(net)), scorer_(*net_), epsilon_(epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
}

std::unique_ptr<PolicySession> QPolicy::start(const SessionState& initial) const {
  return std::make_unique<QSession>(*net_, scorer_, epsilon_, initial);
}

std::map<std::string, std::string> layout_manifest(const StackDims& dims, std::size_t head_hidden) {
  return {
      {"n_users", std::to_string(dims.n_users)},
      {"n_items", std::to_string(dims.n_items)},
      {"item_dim", std::to_string(dims.item_dim)},
      {"user_dim", std::to_string(dims.user_dim)},
      {"hidden", std::to_string(dims.hidden)},
      {"head_hidden", std::to_string(head_hidden)},
      {"pipelines", std::to_string(kBehaviorPipelines)},
      {"pipeline.click", "0"},
      {"pipeline.purchase", "1"},
      {"pipeline.skip", "2"},
      {"pipeline.leave", "none"},
  };
}

StackDims dims_from_manifest(const std::map<std::string, std::string>& m) {
  auto get = [&](const char* key) -> std::size_t {
    auto it = m.find(key);
    if (it == m.end()) throw std::runtime_error(std::string("manifest lacks ") + key);
    return std::stoul(it->second);
  };
  StackDims d;
  d.n_users = get("n_users");
  d.n_items = get("n_items");
  d.item_dim = get("item_dim");
  d.user_dim = get("user_dim");
  d.hidden = get("hidden");
  return d;
}

}  // namespace feedrec::model
