#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/random.hpp"

namespace feedrec {

struct ReplayEntry {
  Transition transition;
  // Session the transition came from, kept so the S-network can be trained
  // on whole trajectories with their propensities.
  std::shared_ptr<const Trajectory> source;
  std::size_t step = 0;
};

// Fixed-capacity ring buffer; pushing into a full buffer evicts the oldest
// entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(ReplayEntry e);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  // Oldest first.
  const ReplayEntry& at(std::size_t k) const;

  // min(n, size()) distinct entries drawn uniformly; throws std::logic_error
  // on an empty buffer.
  std::vector<const ReplayEntry*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<ReplayEntry> entries_;
};

}  // namespace feedrec
