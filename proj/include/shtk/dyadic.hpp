#pragma once

#include "shtk/space.hpp"

namespace shtk {

struct Cube {
  int system = 0;       // which adjacent system this cube belongs to
  int level = 0;        // index into DyadicSystem::generations (0 = coarsest)
  int gen = 0;          // generation k, scale delta^k
  int center = -1;      // point id x^k_alpha
  IdSet members;        // sorted point ids
  int parent = -1;      // cube index at level-1, -1 for roots
  std::vector<int> children;  // cube indices at level+1
  double inner_radius = 0.0;  // largest r with B(center, r) subset of members
  double outer_radius = 0.0;  // max distance from center to a member
};

struct SystemConstants {
  double a1 = 0.0;      // achieved inner sandwich constant (min inner_radius/delta^k)
  double A1 = 0.0;      // achieved outer sandwich constant (max outer_radius/delta^k)
  double c_mu0 = 1.0;   // max mu(parent)/mu(child)
  int max_children = 1;
};

class DyadicSystem {
 public:
  DyadicSystem(const Space& space, double delta, int k_min, int k_max, int seed, int system_tag = 0)
      : space_(&space), delta_(delta), k_min_(k_min), k_max_(k_max), seed_(seed), tag_(system_tag) {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    require(k_min <= k_max, "k_min <= k_max");
    require(seed >= 0 && seed < space.size(), "seed must be a stored point id");
    build();
    verify_or_throw();
  }

  const Space& space() const { return *space_; }
  double delta() const { return delta_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  int seed() const { return seed_; }
  int tag() const { return tag_; }
  int level_count() const { return k_max_ - k_min_ + 1; }
  int gen_of_level(int level) const { return k_min_ + level; }
  int level_of_gen(int k) const { return k - k_min_; }
  double scale(int k) const { return std::pow(delta_, k); }

  const std::vector<Cube>& cubes() const { return cubes_; }
  const Cube& cube(int idx) const { return cubes_[idx]; }
  const std::vector<int>& level_cubes(int level) const { return by_level_[level]; }
  const std::vector<int>& net(int level) const { return nets_[level]; }
  const SystemConstants& constants() const { return consts_; }

  // Unique generation-k cube whose members contain the point.
  int locate_index(int point, int k) const {
    require(point >= 0 && point < space_->size(), "unknown point id");
    int level = level_of_gen(k);
    require(level >= 0 && level < level_count(), "generation out of range");
    return point_cube_[level][point];
  }
  const Cube& locate(int point, int k) const { return cubes_[locate_index(point, k)]; }

  bool cube_contains(int outer, int inner) const {
    // ancestry walk; cubes are a tree so this is O(level difference)
    if (cubes_[inner].level < cubes_[outer].level) return false;
    int c = inner;
    while (cubes_[c].level > cubes_[outer].level) c = cubes_[c].parent;
    return c == outer;
  }

  double cube_measure(int idx) const { return cube_mass_[idx]; }

  struct Report {
    bool partition = true;
    bool nesting = true;
    bool unique_ancestor = true;
    bool sandwich = true;
    bool ball_monotone = true;  // reported only: guaranteed just by the
                                // worst-case construction constants, measured here
    bool net_separated = true;
    bool net_covering = true;
    SystemConstants constants;
    std::string detail;
    bool required() const {
      return partition && nesting && unique_ancestor && sandwich && net_separated && net_covering;
    }
    bool all() const { return required() && ball_monotone; }
  };

  Report verify() const { return verify_cubes(cubes_); }

  // Exposed so tests can verify mutated copies of the cube array.
  Report verify_cubes(const std::vector<Cube>& cubes) const;

 private:
  void build();
  void verify_or_throw() const {
    Report r = verify();
    if (!r.required()) fail("dyadic construction violated an invariant: " + r.detail);
  }

  const Space* space_;
  double delta_;
  int k_min_, k_max_, seed_, tag_;
  std::vector<std::vector<int>> nets_;       // per level: net center point ids
  std::vector<Cube> cubes_;                  // all cubes, coarse levels first
  std::vector<std::vector<int>> by_level_;   // cube indices per level
  std::vector<std::vector<int>> point_cube_; // per level: point id -> cube index
  std::vector<double> cube_mass_;
  SystemConstants consts_;
};

// Greedy maximal separated nets, nested across levels. The candidate order is
// (seed first, then mass descending, rotated id ascending); rotation gives the
// adjacent systems genuinely different cube boundaries.
inline std::vector<std::vector<int>> build_nets(const Space& space, double delta, int k_min,
                                                int k_max, int seed) {
  require(space.size() >= 1, "empty space");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  int n = space.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (space.mass(a) != space.mass(b)) return space.mass(a) > space.mass(b);
    return (a - seed + n) % n < (b - seed + n) % n;
  });
  // seed first regardless of mass so the pinned point is a center at every level
  auto it = std::find(order.begin(), order.end(), seed);
  std::rotate(order.begin(), it, it + 1);

  std::vector<std::vector<int>> nets(k_max - k_min + 1);
  std::vector<int> current;
  for (int level = 0; level < int(nets.size()); ++level) {
    double sep = std::pow(delta, k_min + level);
    for (int cand : order) {
      bool ok = true;
      for (int c : current)
        if (space.distance(cand, c) < sep) {
          ok = false;
          break;
        }
      if (ok) current.push_back(cand);
    }
    nets[level] = current;
  }
  return nets;
}

inline void DyadicSystem::build() {
  const Space& sp = *space_;
  int n = sp.size();
  nets_ = build_nets(sp, delta_, k_min_, k_max_, seed_);
  int levels = level_count();
  by_level_.assign(levels, {});
  point_cube_.assign(levels, std::vector<int>(n, -1));

  // Finest level: every point joins its nearest finest center (ties: smaller id).
  auto nearest = [&](int point, const std::vector<int>& centers) {
    int best = centers[0];
    double bd = sp.distance(point, best);
    for (int c : centers) {
      double d = sp.distance(point, c);
      if (d < bd || (d == bd && c < best)) {
        bd = d;
        best = c;
      }
    }
    return best;
  };

  int fin = levels - 1;
  {
    std::vector<std::vector<int>> groups(nets_[fin].size());
    std::vector<int> center_slot(n, -1);
    for (std::size_t s = 0; s < nets_[fin].size(); ++s) center_slot[nets_[fin][s]] = int(s);
    for (int p = 0; p < n; ++p) {
      int c = nearest(p, nets_[fin]);
      groups[center_slot[c]].push_back(p);
    }
    for (std::size_t s = 0; s < groups.size(); ++s) {
      Cube q;
      q.system = tag_;
      q.level = fin;
      q.gen = gen_of_level(fin);
      q.center = nets_[fin][s];
      q.members = groups[s];
      std::sort(q.members.begin(), q.members.end());
      int idx = int(cubes_.size());
      cubes_.push_back(std::move(q));
      by_level_[fin].push_back(idx);
      for (int p : cubes_[idx].members) point_cube_[fin][p] = idx;
    }
  }

  // Coarser levels: each finer cube's center picks its nearest coarser center.
  for (int level = fin - 1; level >= 0; --level) {
    std::vector<int> center_slot(n, -1);
    for (std::size_t s = 0; s < nets_[level].size(); ++s) center_slot[nets_[level][s]] = int(s);
    std::vector<std::vector<int>> child_cubes(nets_[level].size());
    for (int ci : by_level_[level + 1]) {
      int c = nearest(cubes_[ci].center, nets_[level]);
      child_cubes[center_slot[c]].push_back(ci);
    }
    for (std::size_t s = 0; s < child_cubes.size(); ++s) {
      Cube q;
      q.system = tag_;
      q.level = level;
      q.gen = gen_of_level(level);
      q.center = nets_[level][s];
      for (int ci : child_cubes[s])
        q.members.insert(q.members.end(), cubes_[ci].members.begin(), cubes_[ci].members.end());
      std::sort(q.members.begin(), q.members.end());
      q.children = child_cubes[s];
      int idx = int(cubes_.size());
      cubes_.push_back(std::move(q));
      by_level_[level].push_back(idx);
      for (int ci : cubes_[idx].children) cubes_[ci].parent = idx;
      for (int p : cubes_[idx].members) point_cube_[level][p] = idx;
    }
  }

  // Achieved radii, masses, constants.
  cube_mass_.resize(cubes_.size());
  consts_ = SystemConstants{};
  consts_.a1 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cubes_.size(); ++i) {
    Cube& q = cubes_[i];
    cube_mass_[i] = sp.measure(q.members);
    double out = 0.0;
    for (int p : q.members) out = std::max(out, sp.distance(q.center, p));
    double in = std::numeric_limits<double>::infinity();
    for (int p = 0; p < n; ++p)
      if (!contains(q.members, p)) in = std::min(in, sp.distance(q.center, p));
    if (!std::isfinite(in)) in = std::max(sp.diameter(), 1.0) * 2.0;  // cube is the whole space
    q.outer_radius = out;
    q.inner_radius = in;
    double sc = scale(q.gen);
    consts_.a1 = std::min(consts_.a1, in / sc);
    consts_.A1 = std::max(consts_.A1, out / sc);
    consts_.max_children = std::max(consts_.max_children, int(q.children.size()));
  }
  for (const Cube& q : cubes_)
    for (int ci : q.children)
      consts_.c_mu0 = std::max(consts_.c_mu0, cube_mass_[&q - cubes_.data()] / cube_mass_[ci]);
}

inline DyadicSystem::Report DyadicSystem::verify_cubes(const std::vector<Cube>& cubes) const {
  const Space& sp = *space_;
  int n = sp.size();
  Report rep;
  rep.constants = consts_;
  std::vector<std::vector<int>> lvl(level_count());
  for (std::size_t i = 0; i < cubes.size(); ++i) lvl[cubes[i].level].push_back(int(i));

  // partition: member sets per level are disjoint and exhaust the points
  for (int level = 0; level < level_count(); ++level) {
    std::vector<int> hit(n, 0);
    for (int ci : lvl[level]) {
      if (cubes[ci].members.empty()) {
        rep.partition = false;
        rep.detail += "empty cube;";
      }
      for (int p : cubes[ci].members) hit[p]++;
      if (!contains(cubes[ci].members, cubes[ci].center)) {
        rep.partition = false;
        rep.detail += "center not a member;";
      }
    }
    for (int p = 0; p < n; ++p)
      if (hit[p] != 1) {
        rep.partition = false;
        rep.detail += "partition failure at level " + std::to_string(level) + ";";
        break;
      }
  }

  // nesting: children partition the parent; every non-root has a parent that contains it
  for (std::size_t i = 0; i < cubes.size(); ++i) {
    const Cube& q = cubes[i];
    if (!q.children.empty()) {
      IdSet merged;
      for (int ci : q.children) {
        merged.insert(merged.end(), cubes[ci].members.begin(), cubes[ci].members.end());
        if (cubes[ci].parent != int(i)) rep.nesting = false;
      }
      std::sort(merged.begin(), merged.end());
      if (merged != q.members) {
        rep.nesting = false;
        rep.detail += "children do not partition parent;";
      }
    }
    if (q.level > 0) {
      if (q.parent < 0 || !contains_all(cubes[q.parent].members, q.members)) {
        rep.nesting = false;
        rep.detail += "missing/violating parent;";
      }
      // unique ancestor: exactly one coarser cube contains the members
      int count = 0;
      for (int aj : lvl[q.level - 1])
        if (contains_all(cubes[aj].members, q.members)) count++;
      if (count != 1) {
        rep.unique_ancestor = false;
        rep.detail += "ancestor count " + std::to_string(count) + ";";
      }
    }
  }

  // sandwich with achieved constants: B(center, inner) subset members; members within outer
  for (const Cube& q : cubes) {
    for (int p = 0; p < n; ++p) {
      bool inside = sp.distance(q.center, p) < q.inner_radius;
      if (inside && !contains(q.members, p)) {
        rep.sandwich = false;
        rep.detail += "inner ball escapes cube;";
        break;
      }
    }
    for (int p : q.members)
      if (sp.distance(q.center, p) > q.outer_radius) {
        rep.sandwich = false;
        rep.detail += "member outside outer radius;";
      }
  }

  // sandwich-ball monotonicity: child outer ball stays inside parent outer ball (as point sets)
  for (const Cube& q : cubes) {
    if (q.parent < 0) continue;
    const Cube& par = cubes[q.parent];
    for (int p = 0; p < n; ++p)
      if (sp.distance(q.center, p) <= q.outer_radius &&
          sp.distance(par.center, p) > par.outer_radius) {
        rep.ball_monotone = false;
        break;
      }
    if (!rep.ball_monotone) break;
  }

  // net properties (exact)
  for (int level = 0; level < level_count(); ++level) {
    double sc = scale(gen_of_level(level));
    const auto& net = nets_[level];
    for (std::size_t a = 0; a < net.size(); ++a)
      for (std::size_t b = a + 1; b < net.size(); ++b)
        if (sp.distance(net[a], net[b]) < sc) {
          rep.net_separated = false;
          rep.detail += "net separation at level " + std::to_string(level) + ";";
        }
    for (int p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : net) best = std::min(best, sp.distance(p, c));
      if (!(best < sc)) {
        rep.net_covering = false;
        rep.detail += "net covering at level " + std::to_string(level) + ";";
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Adjacent systems

struct BallCoverage {
  int center = -1;
  double radius = 0.0;
  int gen = 0;
  int system = -1;     // covering system, -1 if uncovered
  int cube_index = -1;
  double enclosing_factor = 0.0;  // max_{y in Q} d(center,y) / radius
};

class AdjacentSystems {
 public:
  AdjacentSystems(const Space& space, double delta, int count, int k_min, int k_max,
                  const std::vector<int>& seeds)
      : space_(&space), delta_(delta) {
    require(count >= 1, "need at least one system");
    require(int(seeds.size()) >= count, "need a seed per system");
    for (int a = 0; a < count; ++a)
      for (int b = a + 1; b < count; ++b)
        require(seeds[a] != seeds[b] || space.size() < count, "seeds must be distinct");
    for (int t = 0; t < count; ++t)
      systems_.push_back(std::make_unique<DyadicSystem>(space, delta, k_min, k_max, seeds[t], t));
  }

  // Auto k-range: coarsest level has a single root; finest resolves single points.
  static AdjacentSystems make(const Space& space, double delta, int count, int seed0) {
    auto [k_min, k_max] = auto_range(space, delta);
    std::vector<int> seeds;
    int stride = std::max(1, space.size() / std::max(1, count));
    for (int t = 0; t < count && int(seeds.size()) < count; ++t) {
      int s = (seed0 + t * stride) % space.size();
      while (std::find(seeds.begin(), seeds.end(), s) != seeds.end() &&
             int(seeds.size()) < space.size())
        s = (s + 1) % space.size();
      seeds.push_back(s);
    }
    return AdjacentSystems(space, delta, count, k_min, k_max, seeds);
  }

  static std::pair<int, int> auto_range(const Space& space, double delta) {
    int k_min = 0;
    while (std::pow(delta, k_min) <= space.diameter() && k_min > -64) --k_min;
    int k_max = k_min;
    // stop once every point is its own center (scale below the minimum gap)
    while (std::pow(delta, k_max) > space.min_gap() && k_max - k_min < 64) ++k_max;
    if (space.size() == 1) k_max = k_min + 2;
    return {k_min, k_max};
  }

  int count() const { return int(systems_.size()); }
  const DyadicSystem& system(int t) const { return *systems_[t]; }
  const Space& space() const { return *space_; }
  double delta() const { return delta_; }

  double c_adj() const { return c_adj_; }
  double coverage() const { return coverage_; }
  const std::vector<BallCoverage>& coverage_records() const { return records_; }

  // Samples balls with delta^{k+3} < r <= delta^{k+2} and looks for a
  // generation-k cube (in any system) containing them.
  void measure_coverage(int max_centers = 64) {
    records_.clear();
    const Space& sp = *space_;
    const DyadicSystem& s0 = *systems_[0];
    int covered = 0, total = 0;
    double cadj = 1.0;
    int stride = std::max(1, sp.size() / max_centers);
    for (int k = s0.k_min(); k + 2 <= s0.k_max(); ++k) {
      double top = std::pow(delta_, k + 2);
      for (double r : {top, top * std::sqrt(delta_)}) {
        for (int x = 0; x < sp.size(); x += stride) {
          BallCoverage rec;
          rec.center = x;
          rec.radius = r;
          rec.gen = k;
          Ball b = sp.ball(x, r);
          for (int t = 0; t < count() && rec.system < 0; ++t) {
            int qi = systems_[t]->locate_index(x, k);
            const Cube& q = systems_[t]->cube(qi);
            if (contains_all(q.members, b.members)) {
              rec.system = t;
              rec.cube_index = qi;
              double far = 0.0;
              for (int p : q.members) far = std::max(far, sp.distance(x, p));
              rec.enclosing_factor = far / r;
            }
          }
          ++total;
          if (rec.system >= 0) {
            ++covered;
            cadj = std::max(cadj, rec.enclosing_factor);
          }
          records_.push_back(rec);
        }
      }
    }
    coverage_ = total > 0 ? double(covered) / total : 1.0;
    c_adj_ = cadj;
  }

  // Finest cube (over all systems) containing every listed point; falls back
  // to a root. Used to realize the "enclosing cube of an enlarged ball" step.
  std::pair<int, int> enclosing_cube(const IdSet& pts) const {
    int best_t = -1, best_q = -1;
    double best_mass = std::numeric_limits<double>::infinity();
    for (int t = 0; t < count(); ++t) {
      const DyadicSystem& s = *systems_[t];
      int anchor = pts.empty() ? 0 : pts[0];
      for (int level = s.level_count() - 1; level >= 0; --level) {
        int qi = s.locate_index(anchor, s.gen_of_level(level));
        if (contains_all(s.cube(qi).members, pts)) {
          if (s.cube_measure(qi) < best_mass) {
            best_mass = s.cube_measure(qi);
            best_t = t;
            best_q = qi;
          }
          break;  // coarser cubes only get bigger
        }
      }
    }
    if (best_t < 0) {  // single root always contains everything
      best_t = 0;
      best_q = systems_[0]->level_cubes(0)[0];
    }
    return {best_t, best_q};
  }

 private:
  const Space* space_;
  double delta_;
  std::vector<std::unique_ptr<DyadicSystem>> systems_;
  std::vector<BallCoverage> records_;
  double c_adj_ = 1.0;
  double coverage_ = 0.0;
};

}  // namespace shtk
