#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace feedrec {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

// Feedback observed on a fed item. Leave is terminal within a session.
enum class FeedbackType : std::uint8_t { Click = 0, Purchase = 1, Skip = 2, Leave = 3 };

inline constexpr std::size_t kFeedbackTypeCount = 4;
inline constexpr std::array<FeedbackType, kFeedbackTypeCount> kAllFeedbackTypes{
    FeedbackType::Click, FeedbackType::Purchase, FeedbackType::Skip, FeedbackType::Leave};

constexpr std::size_t index_of(FeedbackType f) { return static_cast<std::size_t>(f); }

std::string_view to_string(FeedbackType f);
FeedbackType parse_feedback(std::string_view tag);

struct Interaction {
  ItemId item = 0;
  FeedbackType feedback = FeedbackType::Skip;
  double dwell = 0.0;  // seconds

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

void validate(const Interaction& x);

// Sorted, immutable set of recallable items shared by every state of a session.
using CandidatePool = std::shared_ptr<const std::vector<ItemId>>;

CandidatePool make_pool(std::vector<ItemId> items);
CandidatePool make_range_pool(std::size_t n_items);

// Browsing state s_t: the user plus everything fed so far. The available
// action set A(s) is the pool minus the history, so the two never overlap.
class SessionState {
 public:
  SessionState() = default;
  SessionState(UserId user, CandidatePool pool);

  UserId user() const { return user_; }
  std::span<const Interaction> history() const { return history_; }
  const CandidatePool& pool() const { return pool_; }

  bool is_candidate(ItemId item) const;
  std::size_t candidate_count() const;
  std::vector<ItemId> candidates() const;

  // Visits candidates in increasing item-id order.
  template <class Fn>
  void for_each_candidate(Fn&& fn) const;

  // Appends x and removes x.item from the candidates; throws
  // std::invalid_argument when x.item is not a candidate.
  SessionState advance(const Interaction& x) const;

 private:
  std::vector<ItemId> sorted_history_items() const;

  UserId user_ = 0;
  CandidatePool pool_;
  std::vector<Interaction> history_;
};

SessionState advance_state(const SessionState& s, const Interaction& x);

template <class Fn>
void SessionState::for_each_candidate(Fn&& fn) const {
  if (!pool_) return;
  const auto used = sorted_history_items();
  auto u = used.begin();
  for (ItemId item : *pool_) {
    while (u != used.end() && *u < item) ++u;
    if (u != used.end() && *u == item) continue;
    fn(item);
  }
}

// m_t = [clicks, scans, return-time reciprocal].
struct EngagementMetrics {
  double clicks = 0.0;
  double scans = 0.0;
  double return_recip = 0.0;

  EngagementMetrics& operator+=(const EngagementMetrics& o) {
    clicks += o.clicks;
    scans += o.scans;
    return_recip += o.return_recip;
    return *this;
  }
  friend EngagementMetrics operator+(EngagementMetrics a, const EngagementMetrics& b) { return a += b; }
  friend bool operator==(const EngagementMetrics&, const EngagementMetrics&) = default;
};

struct RewardWeights {
  std::array<double, 3> w{1.0, 0.005, 0.005};
};

// `return_gap` is the number of days until the next visit and is only
// supplied on the step that ends the session; pass 0 everywhere else.
EngagementMetrics compute_metrics(FeedbackType feedback, double scans, double return_gap,
                                  double beta = 1.0);

double reward(const EngagementMetrics& m, const RewardWeights& omega);

struct Transition {
  SessionState state;
  ItemId action = 0;
  EngagementMetrics metrics;
  SessionState next_state;
  bool terminal = false;
};

// One logged session together with the behavior policy's propensities.
struct Trajectory {
  UserId user = 0;
  std::vector<Interaction> interactions;
  std::vector<double> propensities;
  double return_gap = 0.0;  // days

  std::size_t depth() const;
  std::size_t clicks() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const Trajectory& t);

// Per-step metrics for a trajectory; the terminal step carries the return gap.
std::vector<EngagementMetrics> step_metrics(const Trajectory& t, double beta = 1.0);

// Replays a trajectory into transitions against `pool`.
std::vector<Transition> to_transitions(const Trajectory& t, const CandidatePool& pool,
                                       double beta = 1.0);

}  // namespace feedrec
