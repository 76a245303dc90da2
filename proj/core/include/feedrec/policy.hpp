#pragma once

#include <memory>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/random.hpp"

namespace feedrec {

// A policy evaluated along one session. Sessions cache whatever they need
// (running embeddings, normalizers) so stepping through a session costs one
// update per interaction instead of a replay of the whole history.
class PolicySession {
 public:
  virtual ~PolicySession() = default;

  virtual const SessionState& state() const = 0;
  // pi(item | state()); zero for non-candidates.
  virtual double probability(ItemId item) = 0;
  virtual ItemId sample(Rng& rng) = 0;
  virtual void advance(const Interaction& x) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  // Starts a session at `initial`, which may already carry history.
  virtual std::unique_ptr<PolicySession> start(const SessionState& initial) const = 0;

  double probability(const SessionState& state, ItemId item) const;

  // pi(a_t | s_t) for every logged step of `t`.
  std::vector<double> trajectory_probabilities(const Trajectory& t, const CandidatePool& pool) const;
};

// Uniform over the remaining candidates.
class UniformPolicy final : public Policy {
 public:
  std::unique_ptr<PolicySession> start(const SessionState& initial) const override;
};

}  // namespace feedrec
