#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cdjp/error.hpp"

namespace cdjp {

/// Slot i shows original piece mapping()[i].
class Permutation {
 public:
  Permutation() = default;
  /// Throws Errc::InvalidArgument unless `mapping` is a bijection on 0..n-1.
  explicit Permutation(std::vector<std::uint8_t> mapping);
  static Permutation identity(int n);

  int size() const { return static_cast<int>(mapping_.size()); }
  std::uint8_t operator[](int i) const { return mapping_[i]; }
  const std::vector<std::uint8_t>& mapping() const { return mapping_; }
  /// Four bits per slot; used by the Hamming kernels.
  std::uint64_t packed() const;

  auto operator<=>(const Permutation&) const = default;

 private:
  std::vector<std::uint8_t> mapping_;
};

Permutation inverse(const Permutation& p);
/// (p ∘ q)[i] = q[p[i]], so apply(compose(p, q), x) = apply(p, apply(q, x)).
Permutation compose(const Permutation& p, const Permutation& q);
int hamming(const Permutation& p, const Permutation& q);
int hamming_packed(std::uint64_t p, std::uint64_t q);
Permutation random_permutation(int n, std::uint64_t seed);

/// out[i] = items[p[i]].
template <typename T>
std::vector<T> apply(const Permutation& p, std::span<const T> items) {
  if (static_cast<int>(items.size()) != p.size())
    fail(Errc::LengthMismatch, "apply: sequence length does not match permutation size");
  std::vector<T> out;
  out.reserve(items.size());
  for (int i = 0; i < p.size(); ++i) out.push_back(items[p[i]]);
  return out;
}

template <typename T>
std::vector<T> apply(const Permutation& p, const std::vector<T>& items) {
  return apply(p, std::span<const T>(items));
}

class PermutationSet {
 public:
  PermutationSet() = default;
  PermutationSet(int n_pieces, std::vector<Permutation> perms, std::uint64_t seed = 0, std::size_t pool_size = 0);

  int n_pieces() const { return n_pieces_; }
  std::size_t size() const { return perms_.size(); }
  const Permutation& operator[](std::size_t id) const { return perms_[id]; }
  const std::vector<Permutation>& perms() const { return perms_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t pool_size() const { return pool_size_; }

  /// Id of `p`; throws Errc::UnknownId when absent.
  std::uint32_t index(const Permutation& p) const;
  bool contains(const Permutation& p) const { return index_.count(p) != 0; }

  std::string to_json() const;
  static PermutationSet from_json(const std::string& text);
  void save(const std::string& path) const;
  static PermutationSet load(const std::string& path);
  std::uint64_t hash() const;

 private:
  int n_pieces_ = 0;
  std::vector<Permutation> perms_;
  std::map<Permutation, std::uint32_t> index_;
  std::uint64_t seed_ = 0;
  std::size_t pool_size_ = 0;
};

/// All 24 permutations of four pieces in lexicographic order.
PermutationSet full_set(int n_pieces = 4);

struct GreedyOptions {
  std::size_t pool_size = 10000;
  bool parallel = true;
};

/// Greedy max-min Hamming subset: each step draws a fresh candidate pool and
/// keeps the candidate farthest (in min Hamming) from everything chosen so far;
/// ties go to the lexicographically smallest mapping.
PermutationSet greedy_max_hamming_set(int n_pieces, std::size_t k, std::uint64_t seed,
                                      const GreedyOptions& opts = {});

/// Uniformly random k-subset of distinct permutations (Monte-Carlo baseline).
PermutationSet random_subset(int n_pieces, std::size_t k, std::uint64_t seed);

int min_pairwise_hamming(const PermutationSet& set);
int min_pairwise_hamming_serial(const PermutationSet& set);

}  // namespace cdjp
