#include "feedrec/policy.hpp"

#include <stdexcept>

namespace feedrec {

double Policy::probability(const SessionState& state, ItemId item) const {
  SessionState root(state.user(), state.pool());
  auto session = start(root);
  for (const auto& x : state.history()) session->advance(x);
  return session->probability(item);
}

std::vector<double> Policy::trajectory_probabilities(const Trajectory& t,
                                                     const CandidatePool& pool) const {
  std::vector<double> out;
  out.reserve(t.interactions.size());
  auto session = start(SessionState(t.user, pool));
  for (const auto& x : t.interactions) {
    out.push_back(session->probability(x.item));
    session->advance(x);
  }
  return out;
}

namespace {

class UniformSession final : public PolicySession {
 public:
  explicit UniformSession(SessionState s) : state_(std::move(s)) {}

  const SessionState& state() const override { return state_; }

  double probability(ItemId item) override {
    if (!state_.is_candidate(item)) return 0.0;
    return 1.0 / static_cast<double>(state_.candidate_count());
  }

  ItemId sample(Rng& rng) override {
    const auto n = state_.candidate_count();
    if (n == 0) throw std::invalid_argument("no candidates left");
    auto target = uniform_index(rng, n);
    ItemId chosen = 0;
    state_.for_each_candidate([&](ItemId i) {
      if (target-- == 0) chosen = i;
    });
    return chosen;
  }

  void advance(const Interaction& x) override { state_ = state_.advance(x); }

 private:
  SessionState state_;
};

}  // namespace

std::unique_ptr<PolicySession> UniformPolicy::start(const SessionState& initial) const {
  return std::make_unique<UniformSession>(initial);
}

}  // namespace feedrec
