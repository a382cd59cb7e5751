#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace strudel {

/// Packed bit vector over sample indices. Word-parallel AND/OR are the hot
/// path of the flow evaluator; all operations keep the unused tail bits of
/// the last word zeroed so popcounts stay exact.
class BitVector {
public:
  BitVector() = default;
  explicit BitVector(std::size_t num_bits, bool value = false)
      : num_bits_(num_bits), words_((num_bits + 63) / 64, value ? ~0ull : 0ull) {
    clear_tail();
  }

  std::size_t size() const { return num_bits_; }
  std::size_t num_words() const { return words_.size(); }
  std::uint64_t* data() { return words_.data(); }
  const std::uint64_t* data() const { return words_.data(); }

  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { words_[i >> 6] |= 1ull << (i & 63); }
  void reset(std::size_t i) { words_[i >> 6] &= ~(1ull << (i & 63)); }

  void fill(bool value) {
    for (auto& w : words_) w = value ? ~0ull : 0ull;
    clear_tail();
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (std::uint64_t w : words_) c += std::popcount(w);
    return c;
  }

  void and_with(const BitVector& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  }
  void or_with(const BitVector& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  }
  void and_not_with(const BitVector& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~other.words_[i];
  }
  void flip() {
    for (auto& w : words_) w = ~w;
    clear_tail();
  }

  bool any() const {
    for (std::uint64_t w : words_) {
      if (w) return true;
    }
    return false;
  }

  bool operator==(const BitVector& other) const {
    return num_bits_ == other.num_bits_ && words_ == other.words_;
  }

  /// Calls fn(index) for every set bit, in ascending index order.
  template <typename Fn>
  void for_each_set(Fn&& fn) const {
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      std::uint64_t w = words_[wi];
      while (w) {
        unsigned b = std::countr_zero(w);
        fn(wi * 64 + b);
        w &= w - 1;
      }
    }
  }

private:
  void clear_tail() {
    if (num_bits_ & 63) words_.back() &= (1ull << (num_bits_ & 63)) - 1;
  }

  std::size_t num_bits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// popcount(a AND b) without materializing the intersection.
inline std::size_t count_and(const BitVector& a, const BitVector& b) {
  std::size_t c = 0;
  const std::uint64_t* pa = a.data();
  const std::uint64_t* pb = b.data();
  for (std::size_t i = 0; i < a.num_words(); ++i) c += std::popcount(pa[i] & pb[i]);
  return c;
}

/// popcount(a AND b AND c).
inline std::size_t count_and3(const BitVector& a, const BitVector& b, const BitVector& c) {
  std::size_t n = 0;
  const std::uint64_t* pa = a.data();
  const std::uint64_t* pb = b.data();
  const std::uint64_t* pc = c.data();
  for (std::size_t i = 0; i < a.num_words(); ++i) n += std::popcount(pa[i] & pb[i] & pc[i]);
  return n;
}

/// Sum of weights[i] over the set bits of v.
inline double weighted_count(const BitVector& v, const std::vector<double>& weights) {
  double acc = 0.0;
  v.for_each_set([&](std::size_t i) { acc += weights[i]; });
  return acc;
}

}  // namespace strudel
