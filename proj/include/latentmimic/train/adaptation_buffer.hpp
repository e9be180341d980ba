#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lm::train {

// Ring buffer of (window, next window, reward) pairs feeding predictor
// fine-tuning. Each insertion batch admits exactly ceil(0.10 * B) entries,
// the highest-reward ones, ties broken by earlier batch index.
class AdaptationBuffer {
 public:
  struct Entry {
    Eigen::VectorXd window;
    Eigen::VectorXd next_window;
    double reward = 0.0;
  };

  explicit AdaptationBuffer(std::size_t capacity = 10000)
      : capacity_(capacity) {}

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

  static std::size_t admission_count(std::size_t batch_size) {
    return static_cast<std::size_t>(
        std::ceil(0.10 * static_cast<double>(batch_size)));
  }

  int insert(std::vector<Entry> batch) {
    if (batch.empty()) return 0;
    const std::size_t k = admission_count(batch.size());
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (batch[a].reward != batch[b].reward)
                          return batch[a].reward > batch[b].reward;
                        return a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) {
      entries_.push_back(std::move(batch[idx[i]]));
      while (entries_.size() > capacity_) entries_.pop_front();
    }
    return static_cast<int>(k);
  }

  // Sampled columns: (windows, next windows).
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sample(std::mt19937_64& rng,
                                                     int batch_size) const {
    if (entries_.empty()) {
      throw std::logic_error("AdaptationBuffer: empty");
    }
    const int dim = static_cast<int>(entries_.front().window.size());
    Eigen::MatrixXd w(dim, batch_size), n(dim, batch_size);
    std::uniform_int_distribution<std::size_t> d(0, entries_.size() - 1);
    for (int j = 0; j < batch_size; ++j) {
      const Entry& e = entries_[d(rng)];
      w.col(j) = e.window;
      n.col(j) = e.next_window;
    }
    return {std::move(w), std::move(n)};
  }

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

}  // namespace lm::train
