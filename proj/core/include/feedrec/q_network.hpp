#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <span>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/embedding_stack.hpp"
#include "feedrec/policy.hpp"
#include "feedrec/random.hpp"
#include "feedrec/tensor.hpp"

namespace feedrec::model {

struct QNetConfig {
  StackDims stack;
  std::size_t mlp_hidden = 50;
};

// Q(s, i) = w_out . relu(W_s^T s + W_i^T e_i + b) + b_out. The first layer is
// split so the item half can be precomputed for every item at once.
class QNetwork {
 public:
  explicit QNetwork(const QNetConfig& cfg);

  const QNetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const EmbeddingStack& stack() const { return stack_; }
  nn::ParamId out_bias() const { return out_bias_; }
  nn::ParamId out_weight() const { return out_weight_; }

  void init(Rng& rng, double scale = 0.1);

  nn::Vector embed_history(const SessionState& state) const;
  double q_value(const SessionState& state, ItemId item) const;
  double q_value(const nn::Vector& state_vec, ItemId item) const;

  // Snapshot of the item half of the first layer for the current parameters.
  // Must be rebuilt after the parameters change.
  class Scorer {
   public:
    Scorer() = default;
    Scorer(const QNetwork& net);
    double score(const nn::Vector& state_part, ItemId item) const;
    // First-layer state half: W_s^T s + b.
    nn::Vector state_part(const nn::Vector& state_vec) const;
    // Greedy candidate of `state` (ties -> smallest id) and its Q value.
    std::pair<ItemId, double> best(const nn::Vector& state_vec, const SessionState& state) const;

   private:
    const QNetwork* net_ = nullptr;
    nn::RowMatrix item_part_;  // n_items x mlp_hidden
  };
  Scorer scorer() const { return Scorer(*this); }

  // epsilon-greedy over state.candidates(); throws std::invalid_argument when
  // there are none.
  ItemId select_action(const SessionState& state, double epsilon, Rng& rng) const;

  double td_target(const Transition& tr, const RewardWeights& omega, double gamma) const;
  double td_target(const Transition& tr, const RewardWeights& omega, double gamma, const Scorer& scorer) const;

  // Semi-gradient squared TD loss. `accumulate_td_gradients` adds the batch
  // gradient against fixed targets without touching the parameters.
  std::vector<double> td_targets(std::span<const Transition* const> batch, const RewardWeights& omega,
                                 double gamma) const;
  double td_loss(std::span<const Transition* const> batch, std::span<const double> targets) const;
  double accumulate_td_gradients(std::span<const Transition* const> batch, std::span<const double> targets);

  // One SGD step; returns the pre-update mean loss. `max_abs_q` (optional)
  // receives the largest |Q| or |y| seen in the batch.
  double q_update(std::span<const Transition* const> batch, const RewardWeights& omega, double gamma,
                  double lr, double* max_abs_q = nullptr);
  double q_update(std::span<const Transition> batch, const RewardWeights& omega, double gamma, double lr);

  std::size_t empty_next_warnings() const { return empty_next_warnings_; }

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

 private:
  double mlp_forward(const nn::Vector& s, ItemId item, nn::Vector* pre) const;

  QNetConfig cfg_;
  nn::ParamStore params_;
  EmbeddingStack stack_;
  nn::ParamId state_weight_, item_weight_, hidden_bias_, out_weight_, out_bias_;
  mutable std::size_t empty_next_warnings_ = 0;
};

std::vector<const Transition*> pointers(std::span<const Transition> batch);

// epsilon-greedy policy over a frozen copy of a Q-network:
// pi(i|s) = eps/|A(s)| + (1 - eps) 1{i = argmax}.
class QPolicy final : public Policy {
 public:
  QPolicy(std::shared_ptr<const QNetwork> net, double epsilon);

  std::unique_ptr<PolicySession> start(const SessionState& initial) const override;
  double epsilon() const { return epsilon_; }
  const QNetwork& network() const { return *net_; }

 private:
  std::shared_ptr<const QNetwork> net_;
  QNetwork::Scorer scorer_;
  double epsilon_;
};

// Manifest entries describing the model layout.
std::map<std::string, std::string> layout_manifest(const StackDims& dims, std::size_t head_hidden);
StackDims dims_from_manifest(const std::map<std::string, std::string>& m);

}  // namespace feedrec::model
