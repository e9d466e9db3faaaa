#ifndef RFNLTISO_LAG_WINDOW_HPP
#define RFNLTISO_LAG_WINDOW_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rfnltiso {

// Ring buffer holding the last P samples of all N nodes. After pushing the
// sample for time t-1, lag(n, p) returns y_n[t - p] for p = 1..P.
class LagWindow {
 public:
  LagWindow() = default;
  LagWindow(std::size_t N, std::size_t P) : N_(N), P_(P), buf_(N * P, 0.0) {
    if (N == 0 || P == 0) throw std::invalid_argument("LagWindow: N and P must be >= 1");
  }

  void push(std::span<const double> sample) {
    if (sample.size() != N_) throw std::invalid_argument("LagWindow: sample length != N");
    head_ = (head_ + 1) % P_;
    for (std::size_t n = 0; n < N_; ++n) buf_[head_ * N_ + n] = sample[n];
    if (count_ < P_) ++count_;
  }

  // p is 1-based: lag(n, 1) is the most recent sample of node n.
  double lag(std::size_t n, std::size_t p) const {
    const std::size_t slot = (head_ + P_ - (p - 1)) % P_;
    return buf_[slot * N_ + n];
  }

  bool full() const noexcept { return count_ == P_; }
  std::size_t size() const noexcept { return count_; }
  std::size_t N() const noexcept { return N_; }
  std::size_t P() const noexcept { return P_; }

  // Raw state for checkpointing.
  const std::vector<double>& buffer() const noexcept { return buf_; }
  std::size_t head() const noexcept { return head_; }
  void restore(std::vector<double> buf, std::size_t head, std::size_t count) {
    if (buf.size() != N_ * P_ || head >= P_ || count > P_)
      throw std::invalid_argument("LagWindow: inconsistent restore state");
    buf_ = std::move(buf);
    head_ = head;
    count_ = count;
  }

 private:
  std::size_t N_ = 0;
  std::size_t P_ = 0;
  std::vector<double> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

}  // namespace rfnltiso

#endif  // RFNLTISO_LAG_WINDOW_HPP
