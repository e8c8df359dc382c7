#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace shtk {

using Field = std::vector<double>;
using CField = std::vector<std::complex<double>>;
using Cplx = std::complex<double>;

inline constexpr double kTol = 1e-10;

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error("shtk: " + msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("shtk: " + msg);
}

inline double binomial(int m, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(m - k + i) / double(i);
  return r;
}

// 0^0 = 1; avoids std::pow domain quirks for integer exponents of signed bases.
inline double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

inline double sup_abs(const Field& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_abs(const CField& f) {
  double m = 0.0;
  for (const auto& v : f) m = std::max(m, std::abs(v));
  return m;
}

// Deterministic RNG wrapper; every stochastic battery in the artifact draws
// from an explicit seed so reports are reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(eng_);
  }
  double gaussian(double mean = 0.0, double sigma = 1.0) {
    return std::normal_distribution<double>(mean, sigma)(eng_);
  }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(eng_); }

  Field gaussian_field(std::size_t n, double sigma = 1.0) {
    Field f(n);
    for (auto& v : f) v = gaussian(0.0, sigma);
    return f;
  }
  // k random +-1 spikes, zero elsewhere.
  Field spike_field(std::size_t n, int k) {
    Field f(n, 0.0);
    for (int i = 0; i < k; ++i) f[index(int(n))] = (uniform() < 0.5 ? -1.0 : 1.0);
    return f;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Fenwick tree over b-ranks carrying (mass, mass*b) so that the weighted
// absolute deviation sum_i m_i |b_i - c| of an incrementally grown ball is
// O(log n) per query.
class DeviationTree {
 public:
  // values: the global b-value per point; ranks follow the sorted order.
  explicit DeviationTree(const Field& values) : n_(values.size()), mass_(n_ + 1, 0.0), massb_(n_ + 1, 0.0) {
    std::vector<int> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    rank_.resize(n_);
    sorted_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      rank_[order[i]] = int(i);
      sorted_[i] = values[order[i]];
    }
  }

  void clear() {
    std::fill(mass_.begin(), mass_.end(), 0.0);
    std::fill(massb_.begin(), massb_.end(), 0.0);
    total_mass_ = 0.0;
    total_massb_ = 0.0;
  }

  void insert(int point, double mass, double bvalue) {
    for (int i = rank_[point] + 1; i <= int(n_); i += i & (-i)) {
      mass_[i] += mass;
      massb_[i] += mass * bvalue;
    }
    total_mass_ += mass;
    total_massb_ += mass * bvalue;
  }

  // sum over inserted points of m_i * |b_i - c|
  double abs_deviation(double c) const {
    // prefix over ranks with sorted value <= c
    int hi = int(std::upper_bound(sorted_.begin(), sorted_.end(), c) - sorted_.begin());
    double pm = 0.0, pb = 0.0;
    for (int i = hi; i > 0; i -= i & (-i)) {
      pm += mass_[i];
      pb += massb_[i];
    }
    double below = c * pm - pb;
    double above = (total_massb_ - pb) - c * (total_mass_ - pm);
    return below + above;
  }

  double total_mass() const { return total_mass_; }
  double total_massb() const { return total_massb_; }

 private:
  std::size_t n_;
  std::vector<int> rank_;
  Field sorted_;
  Field mass_, massb_;
  double total_mass_ = 0.0, total_massb_ = 0.0;
};

inline int thread_count() {
  if (const char* env = std::getenv("SHTK_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

// Row-partitioned loop; bodies must write disjoint state per index.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int nt = thread_count();
  if (nt <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Sorted-int-set helpers used for cube/ball membership arithmetic.
using IdSet = std::vector<int>;

inline bool contains_all(const IdSet& big, const IdSet& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

inline bool disjoint(const IdSet& a, const IdSet& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else return false;
  }
  return true;
}

inline bool contains(const IdSet& s, int x) { return std::binary_search(s.begin(), s.end(), x); }

}  // namespace shtk
