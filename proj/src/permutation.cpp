#include "cdjp/permutation.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cdjp/hash.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"
#include "json.hpp"

namespace cdjp {

Permutation::Permutation(std::vector<std::uint8_t> mapping) : mapping_(std::move(mapping)) {
  if (mapping_.size() > 15) fail(Errc::InvalidArgument, "Permutation: at most 15 pieces supported");
  std::vector<bool> seen(mapping_.size(), false);
  for (auto v : mapping_) {
    if (v >= mapping_.size() || seen[v]) fail(Errc::InvalidArgument, "Permutation: mapping is not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n));
  std::iota(m.begin(), m.end(), std::uint8_t{0});
  return Permutation(std::move(m));
}

std::uint64_t Permutation::packed() const {
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < mapping_.size(); ++i) x |= static_cast<std::uint64_t>(mapping_[i]) << (4 * i);
  return x;
}

Permutation inverse(const Permutation& p) {
  std::vector<std::uint8_t> inv(static_cast<std::size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<std::uint8_t>(i);
  return Permutation(std::move(inv));
}

Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) fail(Errc::LengthMismatch, "compose: size mismatch");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) m[i] = q[p[i]];
  return Permutation(std::move(m));
}

int hamming(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) fail(Errc::LengthMismatch, "hamming: size mismatch");
  int d = 0;
  for (int i = 0; i < p.size(); ++i) d += p[i] != q[i];
  return d;
}

int hamming_packed(std::uint64_t p, std::uint64_t q) {
  std::uint64_t x = p ^ q;
  x |= x >> 1;
  x |= x >> 2;
  return std::popcount(x & 0x1111111111111111ULL);
}

namespace {

std::vector<std::uint8_t> random_mapping(int n, Rng& rng) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n));
  std::iota(m.begin(), m.end(), std::uint8_t{0});
  rng.shuffle(m.begin(), m.end());
  return m;
}

// Min distance from `cand` to `chosen`, abandoning early once it drops below
// `floor` (such a candidate cannot win).
int min_distance(std::uint64_t cand, const std::vector<std::uint64_t>& chosen, int floor) {
  int best = std::numeric_limits<int>::max();
  for (auto c : chosen) {
    const int d = hamming_packed(cand, c);
    if (d < best) {
      best = d;
      if (best < floor) break;
    }
  }
  return best;
}

struct Pick {
  int dist = -1;
  std::size_t idx = 0;
};

// Higher distance wins; among equal distances the lexicographically smaller mapping.
bool better(const Pick& a, const Pick& b, const std::vector<Permutation>& pool) {
  if (a.dist != b.dist) return a.dist > b.dist;
  return pool[a.idx] < pool[b.idx];
}

}  // namespace

Permutation random_permutation(int n, std::uint64_t seed) {
  Rng rng(seed);
  return Permutation(random_mapping(n, rng));
}

PermutationSet::PermutationSet(int n_pieces, std::vector<Permutation> perms, std::uint64_t seed, std::size_t pool_size)
    : n_pieces_(n_pieces), perms_(std::move(perms)), seed_(seed), pool_size_(pool_size) {
  if (n_pieces != 4 && n_pieces != 9) fail(Errc::Unsupported, "PermutationSet: n_pieces must be 4 or 9");
  for (std::size_t i = 0; i < perms_.size(); ++i) {
    if (perms_[i].size() != n_pieces) fail(Errc::LengthMismatch, "PermutationSet: permutation of wrong size");
    if (!index_.emplace(perms_[i], static_cast<std::uint32_t>(i)).second)
      fail(Errc::InvalidArgument, "PermutationSet: duplicate permutation");
  }
}

std::uint32_t PermutationSet::index(const Permutation& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) fail(Errc::UnknownId, "PermutationSet: permutation not in set");
  return it->second;
}

std::string PermutationSet::to_json() const {
  nlohmann::json j;
  j["n_pieces"] = n_pieces_;
  j["seed"] = seed_;
  j["pool_size"] = pool_size_;
  auto arr = nlohmann::json::array();
  for (const auto& p : perms_) {
    std::vector<int> m(p.mapping().begin(), p.mapping().end());
    arr.push_back(m);
  }
  j["perms"] = std::move(arr);
  return j.dump();
}

PermutationSet PermutationSet::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<Permutation> perms;
    for (const auto& row : j.at("perms")) {
      std::vector<std::uint8_t> m;
      for (const auto& v : row) m.push_back(static_cast<std::uint8_t>(v.get<int>()));
      perms.emplace_back(std::move(m));
    }
    return PermutationSet(j.at("n_pieces").get<int>(), std::move(perms), j.value("seed", std::uint64_t{0}),
                          j.value("pool_size", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Format, std::string("permset JSON: ") + e.what());
  }
}

void PermutationSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out << to_json() << '\n';
}

PermutationSet PermutationSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::uint64_t PermutationSet::hash() const { return fnv1a(to_json()); }

PermutationSet full_set(int n_pieces) {
  if (n_pieces != 4) fail(Errc::Unsupported, "full_set: only n_pieces = 4 is supported");
  std::vector<std::uint8_t> m{0, 1, 2, 3};
  std::vector<Permutation> perms;
  do {
    perms.emplace_back(m);
  } while (std::next_permutation(m.begin(), m.end()));
  return PermutationSet(4, std::move(perms));
}

PermutationSet greedy_max_hamming_set(int n_pieces, std::size_t k, std::uint64_t seed, const GreedyOptions& opts) {
  if (n_pieces != 4 && n_pieces != 9) fail(Errc::Unsupported, "greedy_max_hamming_set: n_pieces must be 4 or 9");
  std::size_t total = 1;
  for (int i = 2; i <= n_pieces; ++i) total *= static_cast<std::size_t>(i);
  if (k == 0 || k > total) fail(Errc::InvalidArgument, "greedy_max_hamming_set: k must be in [1, n!]");
  const std::size_t pool_size = std::max<std::size_t>(1, opts.pool_size);

  Rng rng(seed);
  std::vector<Permutation> chosen{Permutation(random_mapping(n_pieces, rng))};
  std::vector<std::uint64_t> packed{chosen.front().packed()};
  std::map<Permutation, bool> taken{{chosen.front(), true}};

  std::vector<Permutation> pool;
  std::vector<std::uint64_t> pool_packed;
  while (chosen.size() < k) {
    pool.clear();
    pool_packed.clear();
    for (std::size_t i = 0; i < pool_size; ++i) {
      pool.emplace_back(random_mapping(n_pieces, rng));
      pool_packed.push_back(pool.back().packed());
    }

    Pick best;
    if (opts.parallel) {
      const int threads = max_threads();
      std::vector<Pick> local(static_cast<std::size_t>(threads));
      const auto n = static_cast<std::ptrdiff_t>(pool.size());
#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
#endif
      {
#ifdef _OPENMP
        Pick& mine = local[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
#else
        Pick& mine = local[0];
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const Pick cand{min_distance(pool_packed[i], packed, mine.dist), static_cast<std::size_t>(i)};
          if (mine.dist < 0 || better(cand, mine, pool)) mine = cand;
        }
      }
      for (const auto& p : local)
        if (p.dist >= 0 && (best.dist < 0 || better(p, best, pool))) best = p;
    } else {
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const Pick cand{min_distance(pool_packed[i], packed, best.dist), i};
        if (best.dist < 0 || better(cand, best, pool)) best = cand;
      }
    }

    Permutation next = pool[best.idx];
    if (best.dist == 0) {
      // Pool exhausted on duplicates: take the lexicographically first unused permutation.
      std::vector<std::uint8_t> m(static_cast<std::size_t>(n_pieces));
      std::iota(m.begin(), m.end(), std::uint8_t{0});
      do {
        if (!taken.count(Permutation(m))) break;
      } while (std::next_permutation(m.begin(), m.end()));
      next = Permutation(m);
    }
    taken.emplace(next, true);
    packed.push_back(next.packed());
    chosen.push_back(std::move(next));
  }
  return PermutationSet(n_pieces, std::move(chosen), seed, pool_size);
}

PermutationSet random_subset(int n_pieces, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::map<Permutation, bool> taken;
  std::vector<Permutation> perms;
  while (perms.size() < k) {
    Permutation p(random_mapping(n_pieces, rng));
    if (taken.emplace(p, true).second) perms.push_back(std::move(p));
  }
  return PermutationSet(n_pieces, std::move(perms), seed, 0);
}

int min_pairwise_hamming_serial(const PermutationSet& set) {
  int best = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j) best = std::min(best, hamming(set[i], set[j]));
  return best;
}

int min_pairwise_hamming(const PermutationSet& set) {
  std::vector<std::uint64_t> packed;
  for (const auto& p : set.perms()) packed.push_back(p.packed());
  const auto n = static_cast<std::ptrdiff_t>(packed.size());
  int best = std::numeric_limits<int>::max();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) reduction(min : best)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::ptrdiff_t j = i + 1; j < n; ++j) best = std::min(best, hamming_packed(packed[i], packed[j]));
  return best;
}

}  // namespace cdjp
