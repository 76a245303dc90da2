#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/layers.hpp"

namespace feedrec::model {

struct StackDims {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t item_dim = 20;
  std::size_t user_dim = 20;
  std::size_t hidden = 50;
  // Dwell enters the time gate in minutes scaled by 1/5.
  double dwell_scale = 1.0 / 300.0;
};

// Behavior pipelines of the hierarchical layer: click, purchase, skip.
// Leave is never routed.
inline constexpr std::size_t kBehaviorPipelines = 3;
std::optional<std::size_t> pipeline_of(FeedbackType f);

struct StackState {
  nn::RecurrentState raw;
  std::array<nn::RecurrentState, kBehaviorPipelines> behavior;
};

struct StepTrace {
  ItemId item = 0;
  FeedbackType feedback = FeedbackType::Skip;
  nn::Vector item_emb;
  nn::TimeLstmCache raw;
  std::optional<std::size_t> pipeline;
  nn::LstmCache behavior;
};

struct StackTrace {
  UserId user = 0;
  std::vector<StepTrace> steps;
};

// Item embeddings projected per feedback type, a Time-LSTM over the raw
// behavior chain, one LSTM per behavior class, and a user embedding. The
// state vector is [h_raw, h_click, h_purchase, h_skip, u].
class EmbeddingStack {
 public:
  EmbeddingStack() = default;
  EmbeddingStack(nn::ParamStore& params, const std::string& prefix, const StackDims& dims);

  const StackDims& dims() const { return dims_; }
  std::size_t state_dim() const { return (kBehaviorPipelines + 1) * dims_.hidden + dims_.user_dim; }
  std::size_t item_dim() const { return dims_.item_dim; }
  nn::ParamId item_table() const { return item_table_; }
  nn::ParamId user_table() const { return user_table_; }

  StackState initial() const;
  // Consumes one interaction. Pipelines other than the routed one carry
  // their state forward unchanged.
  StackState step(const nn::ParamStore& params, const StackState& prev, const Interaction& x,
                  StepTrace* trace = nullptr) const;
  nn::Vector state_vector(const nn::ParamStore& params, UserId user, const StackState& st) const;
  nn::ConstVectorMap item_embedding(const nn::ParamStore& params, ItemId item) const;

  // Runs the whole history; optionally records a trace and the final state.
  nn::Vector embed(const nn::ParamStore& params, UserId user, std::span<const Interaction> history,
                   StackTrace* trace = nullptr, StackState* final_state = nullptr) const;

  // Back-propagates gradients of the state vectors after each prefix:
  // d_states[t] belongs to the state after t interactions (t = 0..T). Empty
  // vectors mean no gradient at that prefix.
  void backward(nn::ParamStore& params, const StackTrace& trace,
                std::span<const nn::Vector> d_states) const;
  void backward_item(nn::ParamStore& params, ItemId item, const nn::Vector& d_item) const;

 private:
  StackDims dims_;
  nn::ParamId item_table_;
  nn::ParamId user_table_;
  std::array<nn::ParamId, kFeedbackTypeCount> projection_{};
  nn::TimeLstmCell raw_;
  std::array<nn::LstmCell, kBehaviorPipelines> behavior_{};
};

}  // namespace feedrec::model
