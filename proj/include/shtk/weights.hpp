#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "shtk/space.hpp"

namespace shtk {

// Positive density on the points, with a small cache for constants that are
// expensive over large ball families (keyed by exponent and family shape).
struct Weight {
  Field v;
  explicit Weight(Field values) : v(std::move(values)) {
    for (double x : v) require(x > 0.0 && std::isfinite(x), "weight values must be positive finite");
  }
  double operator[](int i) const { return v[i]; }
  int size() const { return int(v.size()); }

  bool cached(const std::string& key, double* out) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->map.find(key);
    if (it == cache_->map.end()) return false;
    *out = it->second;
    return true;
  }
  void store(const std::string& key, double value) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    cache_->map[key] = value;
  }

 private:
  struct Cache {
    std::mutex mu;
    std::map<std::string, double> map;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

inline Weight constant_weight(int n, double c = 1.0) { return Weight(Field(n, c)); }

// pow:a spec; distance to the model origin raised to a.
inline Weight power_weight(const Space& space, double exponent) {
  Field v(space.size());
  for (int i = 0; i < space.size(); ++i) {
    const Field& p = space.point(i);
    double r2 = 0.0;
    for (double c : p) r2 += c * c;
    v[i] = std::pow(std::sqrt(r2), exponent);
  }
  return Weight(std::move(v));
}

inline double weighted_measure(const Space& space, const Weight& w, const IdSet& set) {
  double s = 0.0;
  for (int i : set) s += w[i] * space.mass(i);
  return s;
}

// All balls realizable on the point cloud, represented as prefixes of each
// center's distance-sorted neighbor order. Centers are subsampled beyond
// max_centers to keep the family affordable; the reported constants are then
// lower bounds for the full supremum.
class BallFamily {
 public:
  struct Entry {
    int center;
    int prefix;     // number of members (first `prefix` entries of the order)
    double radius;  // any radius realizing that member set
  };

  static BallFamily all_balls(const Space& space, int max_centers = 1000) {
    BallFamily fam;
    fam.space_ = &space;
    int n = space.size();
    int stride = n > max_centers ? (n + max_centers - 1) / max_centers : 1;
    for (int c = 0; c < n; c += stride) {
      const auto& nb = space.neighbors(c);
      for (int len = 1; len <= n; ++len) {
        if (len < n && nb.dist[len] == nb.dist[len - 1]) continue;  // same ball
        double rad = len < n ? nb.dist[len] : nb.dist[n - 1] * (1.0 + 1e-9) + 1e-300;
        fam.entries_.push_back({c, len, rad});
      }
    }
    return fam;
  }

  static BallFamily single(const Space& space, const Ball& b) {
    // represent an explicit ball through its center's neighbor order
    BallFamily fam;
    fam.space_ = &space;
    const auto& nb = space.neighbors(b.center);
    int len = 0;
    while (len < space.size() && nb.dist[len] < b.radius) ++len;
    fam.entries_.push_back({b.center, len, b.radius});
    return fam;
  }

  const Space& space() const { return *space_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Shape key for constant caches: ball count plus the extremal radii.
  std::string fingerprint() const {
    if (entries_.empty()) return "empty";
    return std::to_string(entries_.size()) + ":" + std::to_string(entries_.front().radius) + ":" +
           std::to_string(entries_.back().radius);
  }

  IdSet members(const Entry& e) const {
    const auto& nb = space_->neighbors(e.center);
    IdSet out(nb.order.begin(), nb.order.begin() + e.prefix);
    std::sort(out.begin(), out.end());
    return out;
  }

  // Visits each center's balls in increasing prefix order; `grow(point)` is
  // called as points enter, `visit(entry)` at each realized ball.
  template <typename Grow, typename Visit>
  void scan(Grow& grow, Visit&& visit) const {
    int cur_center = -1;
    int added = 0;
    for (const Entry& e : entries_) {
      if (e.center != cur_center) {
        cur_center = e.center;
        added = 0;
        grow.reset(cur_center);
      }
      const auto& nb = space_->neighbors(cur_center);
      while (added < e.prefix) {
        grow.add(nb.order[added]);
        ++added;
      }
      visit(e);
    }
  }

 private:
  const Space* space_ = nullptr;
  std::vector<Entry> entries_;
};

// sup_B (avg_B w) (avg_B w^{-1/(p-1)})^{p-1}
inline double ap_constant(const Space& space, const Weight& w, double p, const BallFamily& fam) {
  require(p > 1.0, "A_p needs p > 1");
  require(fam.size() > 0, "empty ball family");
  std::string key = "ap:" + std::to_string(p) + ":" + fam.fingerprint();
  if (double hit = 0.0; w.cached(key, &hit)) return hit;
  double e = 1.0 / (p - 1.0);
  struct Grow {
    const Space* sp;
    const Weight* w;
    double e;
    double mu = 0, sw = 0, sdual = 0;
    void reset(int) { mu = sw = sdual = 0; }
    void add(int pt) {
      double m = sp->mass(pt);
      mu += m;
      sw += (*w)[pt] * m;
      sdual += std::pow((*w)[pt], -e) * m;
    }
  } grow{&space, &w, e};
  double best = 0.0;
  fam.scan(grow, [&](const BallFamily::Entry&) {
    double val = (grow.sw / grow.mu) * std::pow(grow.sdual / grow.mu, p - 1.0);
    best = std::max(best, val);
  });
  w.store(key, best);
  return best;
}

// sup_B (avg_B w) exp(avg_B log(1/w))
inline double ainfty_constant(const Space& space, const Weight& w, const BallFamily& fam) {
  require(fam.size() > 0, "empty ball family");
  struct Grow {
    const Space* sp;
    const Weight* w;
    double mu = 0, sw = 0, slog = 0;
    void reset(int) { mu = sw = slog = 0; }
    void add(int pt) {
      double m = sp->mass(pt);
      mu += m;
      sw += (*w)[pt] * m;
      slog += std::log(1.0 / (*w)[pt]) * m;
    }
  } grow{&space, &w};
  double best = 0.0;
  fam.scan(grow, [&](const BallFamily::Entry&) {
    best = std::max(best, (grow.sw / grow.mu) * std::exp(grow.slog / grow.mu));
  });
  return best;
}

// nu = lambda1^{1/p} lambda2^{-1/p}, plus its m-th root companion.
struct BloomWeight {
  Weight nu;
  Weight nu_root;  // nu^{1/m}
};

inline BloomWeight bloom_weight(const Weight& lambda1, const Weight& lambda2, double p, int m = 1) {
  require(p > 1.0, "p > 1");
  require(m >= 1, "m >= 1");
  require(lambda1.size() == lambda2.size(), "weight size mismatch");
  Field nu(lambda1.size()), nur(lambda1.size());
  for (int i = 0; i < lambda1.size(); ++i) {
    nu[i] = std::pow(lambda1[i], 1.0 / p) * std::pow(lambda2[i], -1.0 / p);
    nur[i] = std::pow(nu[i], 1.0 / m);
  }
  return {Weight(std::move(nu)), Weight(std::move(nur))};
}

// Minimal C with avg_B w <= C (avg_B w^delta)^{1/delta} over the family.
inline double reverse_holder_check(const Space& space, const Weight& w, double delta,
                                   const BallFamily& fam) {
  require(delta > 0.0 && delta < 1.0, "delta in (0,1)");
  struct Grow {
    const Space* sp;
    const Weight* w;
    double delta;
    double mu = 0, sw = 0, sd = 0;
    void reset(int) { mu = sw = sd = 0; }
    void add(int pt) {
      double m = sp->mass(pt);
      mu += m;
      sw += (*w)[pt] * m;
      sd += std::pow((*w)[pt], delta) * m;
    }
  } grow{&space, &w, delta};
  double best = 0.0;
  fam.scan(grow, [&](const BallFamily::Entry&) {
    best = std::max(best, (grow.sw / grow.mu) / std::pow(grow.sd / grow.mu, 1.0 / delta));
  });
  return best;
}

// Largest gamma with mu{x in B : w(x) >= gamma avg_B w} >= mu(B)/2 for every
// family ball, evaluated on the exact attainable set of gamma values.
inline std::pair<double, double> ainfty_level_set_check(const Space& space, const Weight& w,
                                                        const BallFamily& fam) {
  double gamma = std::numeric_limits<double>::infinity();
  std::size_t checked = 0, pass = 0;
  for (const auto& e : fam.entries()) {
    IdSet mem = fam.members(e);
    double mu = space.measure(mem);
    double avg = weighted_measure(space, w, mem) / mu;
    // sort member weights descending; find largest v with mu{w >= v} >= mu/2
    std::vector<std::pair<double, double>> vals;  // (w, mass)
    for (int p : mem) vals.push_back({w[p], space.mass(p)});
    std::sort(vals.begin(), vals.end(), [](auto& a, auto& b) { return a.first > b.first; });
    double acc = 0.0, vstar = 0.0;
    for (auto& [wv, m] : vals) {
      acc += m;
      if (acc >= mu / 2.0 - 1e-15 * mu) {
        vstar = wv;
        break;
      }
    }
    gamma = std::min(gamma, vstar / avg);
    ++checked;
  }
  // pass fraction at the returned gamma (1.0 by construction, re-verified)
  for (const auto& e : fam.entries()) {
    IdSet mem = fam.members(e);
    double mu = space.measure(mem);
    double avg = weighted_measure(space, w, mem) / mu;
    double hit = 0.0;
    for (int p : mem)
      if (w[p] >= gamma * avg - 1e-12 * avg) hit += space.mass(p);
    if (hit >= mu / 2.0 - 1e-12 * mu) ++pass;
  }
  return {gamma, checked ? double(pass) / double(checked) : 1.0};
}

}  // namespace shtk
