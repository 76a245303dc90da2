#include "feedrec/embedding_stack.hpp"

#include <stdexcept>

namespace feedrec::model {

using nn::Vector;

std::optional<std::size_t> pipeline_of(FeedbackType f) {
  switch (f) {
    case FeedbackType::Click: return 0;
    case FeedbackType::Purchase: return 1;
    case FeedbackType::Skip: return 2;
    case FeedbackType::Leave: return std::nullopt;
  }
  throw std::invalid_argument("unknown feedback type");
}

EmbeddingStack::EmbeddingStack(nn::ParamStore& params, const std::string& prefix, const StackDims& dims)
    : dims_(dims) {
  if (dims.n_users == 0 || dims.n_items == 0) throw std::invalid_argument("stack needs users and items");
  item_table_ = params.add(prefix + ".item_embedding", {dims.n_items, dims.item_dim});
  user_table_ = params.add(prefix + ".user_embedding", {dims.n_users, dims.user_dim});
  for (auto f : kAllFeedbackTypes) {
    projection_[index_of(f)] =
        params.add(prefix + ".projection." + std::string(to_string(f)), {dims.item_dim, dims.item_dim});
  }
  raw_ = nn::TimeLstmCell::create(params, prefix + ".time_lstm", dims.item_dim, dims.hidden);
  const char* names[kBehaviorPipelines] = {"click", "purchase", "skip"};
  for (std::size_t k = 0; k < kBehaviorPipelines; ++k) {
    behavior_[k] = nn::LstmCell::create(params, prefix + ".behavior." + names[k], dims.hidden, dims.hidden);
  }
}

StackState EmbeddingStack::initial() const {
  StackState st;
  st.raw = nn::RecurrentState::zeros(dims_.hidden);
  for (auto& b : st.behavior) b = nn::RecurrentState::zeros(dims_.hidden);
  return st;
}

nn::ConstVectorMap EmbeddingStack::item_embedding(const nn::ParamStore& params, ItemId item) const {
  return params.row(item_table_, item);
}

StackState EmbeddingStack::step(const nn::ParamStore& params, const StackState& prev, const Interaction& x,
                                StepTrace* trace) const {
  if (x.item >= dims_.n_items) throw std::out_of_range("item " + std::to_string(x.item) + " has no embedding");
  const Vector emb = params.row(item_table_, x.item);
  const Vector projected = params.matrix(projection_[index_of(x.feedback)]) * emb;
  StackState next = prev;
  next.raw = raw_.forward(params, projected, x.dwell * dims_.dwell_scale, prev.raw,
                          trace ? &trace->raw : nullptr);
  const auto k = pipeline_of(x.feedback);
  if (k) {
    next.behavior[*k] = behavior_[*k].forward(params, next.raw.h, prev.behavior[*k],
                                              trace ? &trace->behavior : nullptr);
  }
  if (trace) {
    trace->item = x.item;
    trace->feedback = x.feedback;
    trace->item_emb = emb;
    trace->pipeline = k;
  }
  return next;
}

Vector EmbeddingStack::state_vector(const nn::ParamStore& params, UserId user, const StackState& st) const {
  if (user >= dims_.n_users) throw std::out_of_range("user " + std::to_string(user) + " has no embedding");
  const auto H = static_cast<Eigen::Index>(dims_.hidden);
  Vector s(static_cast<Eigen::Index>(state_dim()));
  s.segment(0, H) = st.raw.h;
  for (std::size_t k = 0; k < kBehaviorPipelines; ++k) {
    s.segment(static_cast<Eigen::Index>(k + 1) * H, H) = st.behavior[k].h;
  }
  s.tail(static_cast<Eigen::Index>(dims_.user_dim)) = params.row(user_table_, user);
  return s;
}

Vector EmbeddingStack::embed(const nn::ParamStore& params, UserId user, std::span<const Interaction> history,
                             StackTrace* trace, StackState* final_state) const {
  StackState st = initial();
  if (trace) {
    trace->user = user;
    trace->steps.assign(history.size(), StepTrace{});
  }
  for (std::size_t t = 0; t < history.size(); ++t) {
    st = step(params, st, history[t], trace ? &trace->steps[t] : nullptr);
  }
  Vector s = state_vector(params, user, st);
  if (final_state) *final_state = std::move(st);
  return s;
}

void EmbeddingStack::backward(nn::ParamStore& params, const StackTrace& trace,
                              std::span<const Vector> d_states) const {
  const std::size_t T = trace.steps.size();
  if (d_states.size() != T + 1) throw std::invalid_argument("need one state gradient slot per prefix");
  const auto H = static_cast<Eigen::Index>(dims_.hidden);
  const auto U = static_cast<Eigen::Index>(dims_.user_dim);

  Vector dh_raw = Vector::Zero(H);
  Vector dc_raw = Vector::Zero(H);
  std::array<Vector, kBehaviorPipelines> dh_b, dc_b;
  for (std::size_t k = 0; k < kBehaviorPipelines; ++k) {
    dh_b[k] = Vector::Zero(H);
    dc_b[k] = Vector::Zero(H);
  }
  Vector d_user = Vector::Zero(U);

  auto absorb = [&](const Vector& d) {
    if (d.size() == 0) return;
    dh_raw += d.segment(0, H);
    for (std::size_t k = 0; k < kBehaviorPipelines; ++k) {
      dh_b[k] += d.segment(static_cast<Eigen::Index>(k + 1) * H, H);
    }
    d_user += d.tail(U);
  };

  for (std::size_t t = T; t-- > 0;) {
    absorb(d_states[t + 1]);
    const auto& st = trace.steps[t];
    if (st.pipeline) {
      const auto k = *st.pipeline;
      auto g = behavior_[k].backward(params, st.behavior, dh_b[k], dc_b[k]);
      dh_b[k] = std::move(g.dh_prev);
      dc_b[k] = std::move(g.dc_prev);
      dh_raw += g.dx;
    }
    auto g = raw_.backward(params, st.raw, dh_raw, dc_raw);
    dh_raw = std::move(g.dh_prev);
    dc_raw = std::move(g.dc_prev);
    // projected = F * emb
    const auto proj = projection_[index_of(st.feedback)];
    params.grad_matrix(proj).noalias() += g.dx * st.item_emb.transpose();
    params.grad_row(item_table_, st.item) += params.matrix(proj).transpose() * g.dx;
  }
  absorb(d_states[0]);
  params.grad_row(user_table_, trace.user) += d_user;
}

void EmbeddingStack::backward_item(nn::ParamStore& params, ItemId item, const Vector& d_item) const {
  params.grad_row(item_table_, item) += d_item;
}

}  // namespace feedrec::model
