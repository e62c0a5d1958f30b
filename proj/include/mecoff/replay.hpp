#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "mecoff/errors.hpp"
#include "mecoff/random.hpp"

namespace mecoff {

/// Bounded experience pool; once full, each push overwrites the oldest entry.
template <typename T>
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be positive");
    items_.reserve(capacity);
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  bool ready(std::size_t batch) const { return items_.size() >= batch; }

  /// i-th oldest stored experience.
  const T& at(std::size_t i) const {
    if (i >= items_.size()) throw ContractViolation("replay index out of range");
    return items_[(head_ + i) % items_.size()];
  }

  /// Uniform sample of `batch` distinct entries; nullopt while the memory
  /// holds fewer than `batch` experiences.
  std::optional<std::vector<const T*>> sample(std::size_t batch, Rng& rng) const {
    if (batch == 0 || !ready(batch)) return std::nullopt;
    scratch_.resize(items_.size());
    std::iota(scratch_.begin(), scratch_.end(), std::size_t{0});
    std::vector<const T*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, scratch_.size() - i));
      std::swap(scratch_[i], scratch_[j]);
      out.push_back(&items_[scratch_[i]]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<T> items_;
  std::size_t head_ = 0;  // oldest entry once full
  std::uint64_t inserted_ = 0;
  mutable std::vector<std::size_t> scratch_;
};

}  // namespace mecoff
