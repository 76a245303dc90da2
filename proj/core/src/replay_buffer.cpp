#include "feedrec/replay_buffer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace feedrec {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  entries_.reserve(capacity);
}

void ReplayBuffer::push(ReplayEntry e) {
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(e));
    return;
  }
  entries_[head_] = std::move(e);
  head_ = (head_ + 1) % capacity_;
}

const ReplayEntry& ReplayBuffer::at(std::size_t k) const {
  if (k >= entries_.size()) throw std::out_of_range("replay index out of range");
  return entries_[(head_ + k) % entries_.size()];
}

std::vector<const ReplayEntry*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (entries_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  n = std::min(n, entries_.size());
  // partial Fisher-Yates
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const ReplayEntry*> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = k + uniform_index(rng, idx.size() - k);
    std::swap(idx[k], idx[j]);
    out.push_back(&entries_[idx[k]]);
  }
  return out;
}

}  // namespace feedrec
