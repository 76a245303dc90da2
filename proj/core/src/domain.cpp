#include "feedrec/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace feedrec {

std::string_view to_string(FeedbackType f) {
  switch (f) {
    case FeedbackType::Click: return "click";
    case FeedbackType::Purchase: return "purchase";
    case FeedbackType::Skip: return "skip";
    case FeedbackType::Leave: return "leave";
  }
  throw std::invalid_argument("unknown feedback type");
}

FeedbackType parse_feedback(std::string_view tag) {
  for (auto f : kAllFeedbackTypes) {
    if (to_string(f) == tag) return f;
  }
  throw std::invalid_argument("unknown feedback tag '" + std::string(tag) + "'");
}

void validate(const Interaction& x) {
  if (!std::isfinite(x.dwell) || x.dwell < 0.0) {
    throw std::invalid_argument("dwell must be a nonnegative finite number of seconds");
  }
  if (x.dwell == 0.0 && x.feedback != FeedbackType::Skip && x.feedback != FeedbackType::Leave) {
    throw std::invalid_argument("zero dwell is only allowed for skip or leave");
  }
}

CandidatePool make_pool(std::vector<ItemId> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return std::make_shared<const std::vector<ItemId>>(std::move(items));
}

CandidatePool make_range_pool(std::size_t n_items) {
  std::vector<ItemId> items(n_items);
  std::iota(items.begin(), items.end(), ItemId{0});
  return std::make_shared<const std::vector<ItemId>>(std::move(items));
}

SessionState::SessionState(UserId user, CandidatePool pool) : user_(user), pool_(std::move(pool)) {
  if (!pool_) throw std::invalid_argument("session state needs a candidate pool");
}

std::vector<ItemId> SessionState::sorted_history_items() const {
  std::vector<ItemId> used;
  used.reserve(history_.size());
  for (const auto& x : history_) used.push_back(x.item);
  std::sort(used.begin(), used.end());
  return used;
}

bool SessionState::is_candidate(ItemId item) const {
  if (!pool_ || !std::binary_search(pool_->begin(), pool_->end(), item)) return false;
  return std::none_of(history_.begin(), history_.end(),
                      [item](const Interaction& x) { return x.item == item; });
}

std::size_t SessionState::candidate_count() const {
  if (!pool_) return 0;
  // Every history item came from the pool.
  return pool_->size() - history_.size();
}

std::vector<ItemId> SessionState::candidates() const {
  std::vector<ItemId> out;
  out.reserve(candidate_count());
  for_each_candidate([&](ItemId i) { out.push_back(i); });
  return out;
}

SessionState SessionState::advance(const Interaction& x) const {
  if (!is_candidate(x.item)) {
    throw std::invalid_argument("item " + std::to_string(x.item) + " is not a candidate");
  }
  if (!history_.empty() && history_.back().feedback == FeedbackType::Leave) {
    throw std::invalid_argument("no interaction may follow leave");
  }
  SessionState next = *this;
  next.history_.push_back(x);
  return next;
}

SessionState advance_state(const SessionState& s, const Interaction& x) { return s.advance(x); }

EngagementMetrics compute_metrics(FeedbackType feedback, double scans, double return_gap,
                                  double beta) {
  if (!(scans >= 0.0) || !(return_gap >= 0.0)) {
    throw std::domain_error("scans and return gap must be nonnegative");
  }
  EngagementMetrics m;
  m.clicks = feedback == FeedbackType::Click ? 1.0 : 0.0;
  m.scans = scans;
  m.return_recip = return_gap > 0.0 ? beta / return_gap : 0.0;
  return m;
}

double reward(const EngagementMetrics& m, const RewardWeights& omega) {
  return omega.w[0] * m.clicks + omega.w[1] * m.scans + omega.w[2] * m.return_recip;
}

std::size_t Trajectory::depth() const {
  return static_cast<std::size_t>(
      std::count_if(interactions.begin(), interactions.end(),
                    [](const Interaction& x) { return x.feedback != FeedbackType::Leave; }));
}

std::size_t Trajectory::clicks() const {
  return static_cast<std::size_t>(
      std::count_if(interactions.begin(), interactions.end(),
                    [](const Interaction& x) { return x.feedback == FeedbackType::Click; }));
}

void validate(const Trajectory& t) {
  if (t.interactions.empty()) throw std::invalid_argument("trajectory has no interactions");
  if (t.propensities.size() != t.interactions.size()) {
    throw std::invalid_argument("trajectory propensities and interactions differ in length");
  }
  for (double p : t.propensities) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("propensity outside (0, 1]");
  }
  for (std::size_t k = 0; k < t.interactions.size(); ++k) {
    validate(t.interactions[k]);
    if (t.interactions[k].feedback == FeedbackType::Leave && k + 1 != t.interactions.size()) {
      throw std::invalid_argument("leave must be the final interaction");
    }
  }
  if (!std::isfinite(t.return_gap) || t.return_gap < 0.0) {
    throw std::invalid_argument("return gap must be nonnegative");
  }
}

std::vector<EngagementMetrics> step_metrics(const Trajectory& t, double beta) {
  std::vector<EngagementMetrics> out;
  out.reserve(t.interactions.size());
  for (std::size_t k = 0; k < t.interactions.size(); ++k) {
    const auto& x = t.interactions[k];
    const bool last = k + 1 == t.interactions.size();
    const double scans = x.feedback == FeedbackType::Leave ? 0.0 : 1.0;
    out.push_back(compute_metrics(x.feedback, scans, last ? t.return_gap : 0.0, beta));
  }
  return out;
}

std::vector<Transition> to_transitions(const Trajectory& t, const CandidatePool& pool,
                                       double beta) {
  std::vector<Transition> out;
  out.reserve(t.interactions.size());
  const auto metrics = step_metrics(t, beta);
  SessionState s(t.user, pool);
  for (std::size_t k = 0; k < t.interactions.size(); ++k) {
    SessionState next = s.advance(t.interactions[k]);
    out.push_back(Transition{s, t.interactions[k].item, metrics[k], next,
                             k + 1 == t.interactions.size()});
    s = std::move(next);
  }
  return out;
}

}  // namespace feedrec
