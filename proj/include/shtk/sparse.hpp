#pragma once

#include "shtk/dyadic.hpp"
#include "shtk/operators.hpp"

namespace shtk {

// Cube family inside one dyadic system, optionally carrying disjoint witness
// sets E_Q with mu(E_Q) >= eta mu(Q).
struct SparseFamily {
  const DyadicSystem* system = nullptr;
  std::vector<int> cubes;            // cube indices, deduplicated
  std::vector<IdSet> witnesses;      // aligned with cubes; empty if unset
  double eta = 0.0;                  // recorded sparsity (0 = not set)
  double lambda = 0.0;               // recorded Carleson constant (0 = not set)

  bool has_witnesses() const { return !witnesses.empty(); }

  static SparseFamily of(const DyadicSystem& sys, std::vector<int> cube_indices) {
    SparseFamily f;
    f.system = &sys;
    std::sort(cube_indices.begin(), cube_indices.end());
    cube_indices.erase(std::unique(cube_indices.begin(), cube_indices.end()), cube_indices.end());
    f.cubes = std::move(cube_indices);
    return f;
  }
};

// max over all cubes Q of the system of sum_{P in S, P subset Q} mu(P)/mu(Q),
// aggregated bottom-up along the tree.
inline double carleson_constant(const SparseFamily& fam) {
  if (fam.cubes.empty()) return 0.0;
  const DyadicSystem& sys = *fam.system;
  std::vector<char> in_fam(sys.cubes().size(), 0);
  for (int qi : fam.cubes) in_fam[qi] = 1;
  std::vector<double> packed(sys.cubes().size(), 0.0);
  // cubes_ lists fine levels first, so children are already aggregated
  double best = 0.0;
  for (std::size_t i = 0; i < sys.cubes().size(); ++i) {
    double s = in_fam[i] ? sys.cube_measure(int(i)) : 0.0;
    for (int ci : sys.cubes()[i].children) s += packed[ci];
    packed[i] = s;
    best = std::max(best, s / sys.cube_measure(int(i)));
  }
  return best;
}

// Witness assignment by bottom-layer-first ball growth: E_Q is a prefix of
// Q's members sorted by distance from the center, skipping points already
// claimed by strictly contained witnesses. Atoms are taken while they fit
// inside the target measure Lambda^{-1} mu(Q), never beyond it, so the
// continuum feasibility count survives verbatim and every witness reaches the
// target up to at most one atom of its cube.
struct SparsifyStats {
  double worst_ratio = 1.0;          // min mu(E_Q) / (Lambda^{-1} mu(Q))
  double worst_deficit_atoms = 0.0;  // max (target - mu(E_Q)) / largest atom of Q
};

inline SparsifyStats sparsify(SparseFamily& fam, double lambda) {
  require(lambda >= 1.0, "Carleson constant is >= 1");
  const DyadicSystem& sys = *fam.system;
  double measured = carleson_constant(fam);
  if (measured > lambda * (1.0 + 1e-12)) {
    // name a violating cube
    for (int qi : fam.cubes) {
      double packed = 0.0;
      for (int pj : fam.cubes)
        if (sys.cube_contains(qi, pj)) packed += sys.cube_measure(pj);
      if (packed > lambda * sys.cube_measure(qi) * (1.0 + 1e-12))
        fail("sparsify infeasible: cube centered at point " +
             std::to_string(sys.cube(qi).center) + " at generation " +
             std::to_string(sys.cube(qi).gen) + " packs " + std::to_string(packed) +
             " > Lambda * mu(Q)");
    }
    fail("sparsify infeasible: Carleson constant " + std::to_string(measured) +
         " exceeds Lambda");
  }

  const Space& sp = sys.space();
  std::vector<char> taken(sp.size(), 0);
  // bottom first: sort family cubes by level descending
  std::vector<int> order = fam.cubes;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return sys.cube(a).level > sys.cube(b).level; });
  std::vector<IdSet> witness_of(sys.cubes().size());
  SparsifyStats stats;
  for (int qi : order) {
    const Cube& q = sys.cube(qi);
    double target = sys.cube_measure(qi) / lambda;
    // available points sorted by distance from the center (ball growth)
    std::vector<int> avail;
    for (int p : q.members)
      if (!taken[p]) avail.push_back(p);
    std::sort(avail.begin(), avail.end(), [&](int a, int b) {
      double da = sp.distance(q.center, a), db = sp.distance(q.center, b);
      if (da != db) return da < db;
      return a < b;
    });
    IdSet e;
    double got = 0.0;
    double max_atom = 0.0;
    for (int p : q.members) max_atom = std::max(max_atom, sp.mass(p));
    for (int p : avail) {
      if (got + sp.mass(p) > target * (1.0 + 1e-12)) continue;  // never overshoot
      e.push_back(p);
      taken[p] = 1;
      got += sp.mass(p);
      if (got >= target) break;
    }
    std::sort(e.begin(), e.end());
    witness_of[qi] = std::move(e);
    stats.worst_ratio = std::min(stats.worst_ratio, got / target);
    if (got < target)
      stats.worst_deficit_atoms = std::max(stats.worst_deficit_atoms, (target - got) / max_atom);
  }
  fam.witnesses.clear();
  for (int qi : fam.cubes) fam.witnesses.push_back(std::move(witness_of[qi]));
  fam.lambda = lambda;
  double eta = 1.0;
  for (std::size_t i = 0; i < fam.cubes.size(); ++i)
    eta = std::min(eta, sys.space().measure(fam.witnesses[i]) / sys.cube_measure(fam.cubes[i]));
  fam.eta = eta;
  return stats;
}

struct SparsityCheck {
  double eta = 0.0;
  int max_overlap = 0;
};

inline SparsityCheck sparsity_check(const SparseFamily& fam) {
  require(fam.has_witnesses(), "family carries no witness sets");
  require(!fam.cubes.empty(), "sparsity undefined for an empty family");
  const DyadicSystem& sys = *fam.system;
  SparsityCheck out;
  out.eta = 1.0;
  std::vector<int> overlap(sys.space().size(), 0);
  for (std::size_t i = 0; i < fam.cubes.size(); ++i) {
    require(contains_all(sys.cube(fam.cubes[i]).members, fam.witnesses[i]),
            "witness escapes its cube");
    out.eta = std::min(out.eta, sys.space().measure(fam.witnesses[i]) /
                                    sys.cube_measure(fam.cubes[i]));
    for (int p : fam.witnesses[i]) overlap[p]++;
  }
  for (int c : overlap) out.max_overlap = std::max(out.max_overlap, c);
  return out;
}

// A_S f(x) = sum_{Q in S} (avg_Q f) chi_Q(x)
inline Field sparse_operator_apply(const SparseFamily& fam, const Field& f) {
  const DyadicSystem& sys = *fam.system;
  const Space& sp = sys.space();
  Field out(sp.size(), 0.0);
  for (int qi : fam.cubes) {
    const Cube& q = sys.cube(qi);
    double s = 0.0;
    for (int p : q.members) s += f[p] * sp.mass(p);
    double avg = s / sys.cube_measure(qi);
    for (int p : q.members) out[p] += avg;
  }
  return out;
}

// Local dyadic maximal operator restricted to the subcubes of Q:
// M_Q^d f(x) = max over dyadic R subset Q with x in R of avg_R |f|.
inline Field local_dyadic_maximal(const DyadicSystem& sys, int qi, const Field& f) {
  const Space& sp = sys.space();
  Field out(sp.size(), 0.0);
  // depth-first: carry the best average down the subtree
  struct Item {
    int cube;
    double best;
  };
  std::vector<Item> stack;
  auto avg_of = [&](int ci) {
    double s = 0.0;
    for (int p : sys.cube(ci).members) s += std::abs(f[p]) * sp.mass(p);
    return s / sys.cube_measure(ci);
  };
  stack.push_back({qi, avg_of(qi)});
  while (!stack.empty()) {
    auto [ci, best] = stack.back();
    stack.pop_back();
    const Cube& c = sys.cube(ci);
    if (c.children.empty()) {
      for (int p : c.members) out[p] = best;
    } else {
      for (int child : c.children) stack.push_back({child, std::max(best, avg_of(child))});
    }
  }
  return out;
}

inline double cube_average(const DyadicSystem& sys, int qi, const Field& f) {
  double s = 0.0;
  for (int p : sys.cube(qi).members) s += f[p] * sys.space().mass(p);
  return s / sys.cube_measure(qi);
}

inline double cube_oscillation(const DyadicSystem& sys, int qi, const Field& b) {
  double avg = cube_average(sys, qi, b);
  double s = 0.0;
  for (int p : sys.cube(qi).members) s += std::abs(b[p] - avg) * sys.space().mass(p);
  return s / sys.cube_measure(qi);
}

// ---------------------------------------------------------------------------
// Augmentation: the oscillation-controlling enlargement of a sparse family.

namespace detail {

// Calderon-Zygmund stopping cubes of chi_E inside Q at the given height.
inline void cz_stopping(const DyadicSystem& sys, int qi, const std::vector<char>& in_E,
                        double height, std::vector<int>& out) {
  for (int child : sys.cube(qi).children) {
    double e_mass = 0.0;
    for (int p : sys.cube(child).members)
      if (in_E[p]) e_mass += sys.space().mass(p);
    if (e_mass > height * sys.cube_measure(child)) {
      out.push_back(child);
    } else if (e_mass > 0.0) {
      cz_stopping(sys, child, in_E, height, out);
    }
  }
}

// Exact weak-(1,1) ratio of the local dyadic maximal applied to this probe:
// sup_v v * mu{M >= v} / ||g||_1.
inline double weak11_ratio(const Space& sp, const Field& maximal, const IdSet& members,
                           double l1norm) {
  if (l1norm <= 0.0) return 0.0;
  std::vector<std::pair<double, double>> mv;  // (M value, mass)
  for (int p : members) mv.push_back({maximal[p], sp.mass(p)});
  std::sort(mv.begin(), mv.end(), [](auto& a, auto& b) { return a.first > b.first; });
  double acc = 0.0, best = 0.0;
  for (auto& [v, m] : mv) {
    acc += m;
    best = std::max(best, v * acc);
  }
  return best / l1norm;
}

}  // namespace detail

struct AugmentResult {
  SparseFamily family;       // the augmented family
  double fitted_c = 0.0;     // smallest C making the pointwise bound hold
  bool bound_holds = true;   // false if some point has LHS > 0 with RHS = 0
  double calibration_c = 0.0;
};

inline AugmentResult augment_family(const SparseFamily& fam, const Field& b) {
  const DyadicSystem& sys = *fam.system;
  const Space& sp = sys.space();
  double c_mu0 = sys.constants().c_mu0;

  // calibrate C from the exactly computed weak-(1,1) ratios of the probes
  double c_cal = 1.0;
  std::vector<Field> maximal_cache(fam.cubes.size());
  for (std::size_t i = 0; i < fam.cubes.size(); ++i) {
    int qi = fam.cubes[i];
    double avg = cube_average(sys, qi, b);
    Field g(sp.size(), 0.0);
    double l1 = 0.0;
    for (int p : sys.cube(qi).members) {
      g[p] = b[p] - avg;
      l1 += std::abs(g[p]) * sp.mass(p);
    }
    maximal_cache[i] = local_dyadic_maximal(sys, qi, g);
    c_cal = std::max(c_cal, detail::weak11_ratio(sp, maximal_cache[i], sys.cube(qi).members, l1));
  }

  std::vector<char> in_S(sys.cubes().size(), 0);
  for (int qi : fam.cubes) in_S[qi] = 1;
  std::vector<int> augmented = fam.cubes;

  // iterate the local decomposition from every family cube
  for (std::size_t i = 0; i < fam.cubes.size(); ++i) {
    std::vector<std::pair<int, Field>> work;  // (cube, cached maximal of b - b_Q)
    work.push_back({fam.cubes[i], maximal_cache[i]});
    while (!work.empty()) {
      auto [qi, mx] = std::move(work.back());
      work.pop_back();
      double osc = cube_oscillation(sys, qi, b);
      if (osc <= 0.0) continue;
      double threshold = 4.0 * c_mu0 * c_cal * osc;
      std::vector<char> in_E(sp.size(), 0);
      double e_mass = 0.0;
      for (int p : sys.cube(qi).members)
        if (mx[p] > threshold) {
          in_E[p] = 1;
          e_mass += sp.mass(p);
        }
      if (e_mass <= 0.0) continue;
      std::vector<int> stops;
      detail::cz_stopping(sys, qi, in_E, 1.0 / (2.0 * c_mu0), stops);
      for (int pj : stops) {
        // drop cubes already inside a strictly smaller member of the family
        bool swallowed = false;
        for (int ri : fam.cubes)
          if (ri != fam.cubes[i] && sys.cube_contains(fam.cubes[i], ri) &&
              sys.cube_contains(ri, pj)) {
            swallowed = true;
            break;
          }
        if (!swallowed) augmented.push_back(pj);
        double avg = cube_average(sys, pj, b);
        Field g(sp.size(), 0.0);
        for (int p : sys.cube(pj).members) g[p] = b[p] - avg;
        work.push_back({pj, local_dyadic_maximal(sys, pj, g)});
      }
    }
  }

  AugmentResult out;
  out.family = SparseFamily::of(sys, augmented);
  out.calibration_c = c_cal;

  // smallest C with |b - b_Q| <= C sum_{R in S~, R subset Q} Omega(b,R) chi_R on every Q
  std::vector<double> osc_of(sys.cubes().size(), -1.0);
  std::vector<char> in_aug(sys.cubes().size(), 0);
  for (int qi : out.family.cubes) {
    in_aug[qi] = 1;
    osc_of[qi] = cube_oscillation(sys, qi, b);
  }
  int finest = sys.level_count() - 1;
  double cfit = 0.0;
  for (int qi : out.family.cubes) {
    double avg = cube_average(sys, qi, b);
    for (int p : sys.cube(qi).members) {
      double lhs = std::abs(b[p] - avg);
      if (lhs <= 1e-14) continue;
      double rhs = 0.0;
      int walk = sys.locate_index(p, sys.gen_of_level(finest));
      while (walk >= 0) {
        if (in_aug[walk] && sys.cube(walk).level >= sys.cube(qi).level &&
            sys.cube_contains(qi, walk))
          rhs += osc_of[walk];
        walk = sys.cube(walk).parent;
      }
      if (rhs <= 0.0) {
        out.bound_holds = false;
        continue;
      }
      cfit = std::max(cfit, lhs / rhs);
    }
  }
  out.fitted_c = cfit;
  return out;
}

// A_b^{m,k} f(x) = sum_{Q in S} |b(x)-b_Q|^{m-k} (avg_Q |b-b_Q|^k |f|) chi_Q(x)
inline Field domination_sum(const SparseFamily& fam, const Field& b, int m, int k,
                            const Field& f) {
  require(0 <= k && k <= m, "need 0 <= k <= m");
  const DyadicSystem& sys = *fam.system;
  const Space& sp = sys.space();
  Field out(sp.size(), 0.0);
  for (int qi : fam.cubes) {
    double bq = cube_average(sys, qi, b);
    double s = 0.0;
    for (int p : sys.cube(qi).members)
      s += ipow(std::abs(b[p] - bq), k) * std::abs(f[p]) * sp.mass(p);
    double avg = s / sys.cube_measure(qi);
    for (int p : sys.cube(qi).members) out[p] += ipow(std::abs(b[p] - bq), m - k) * avg;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sparse domination of the iterated commutator.

struct DominationResult {
  std::vector<SparseFamily> families;  // one per adjacent system (possibly empty)
  double c_star = 0.0;                 // max |T_b^m f| / RHS over points with RHS > 0
  bool dominated = true;               // false if LHS > 0 where RHS = 0
  int failure_witness = -1;
  double enlargement = 0.0;            // C_{j0} used
  int recursion_nodes = 0;
  Field lhs, rhs;                      // pointwise certificate material
};

namespace detail {

struct DominateContext {
  const DiscreteOperator* T;
  const AdjacentSystems* adj;
  const Field* b;
  const Field* f;
  int m;
  double enlargement;
  int t0;
  const DyadicSystem* tree;
  std::vector<std::vector<int>> families;  // per system: R-cube indices
  int nodes = 0;
};

// recursive estimate: select stopping cubes inside P and recurse
inline void dominate_recurse(DominateContext& ctx, int pi, const Ball& ball) {
  const Space& sp = ctx.T->space();
  const DyadicSystem& tree = *ctx.tree;
  ctx.nodes++;
  if (ctx.nodes > 8 * sp.size()) fail("sparse domination recursion exploded");

  // enlarged ball and its enclosing cube R_P (any system)
  Ball enlarged = sp.ball(ball.center, ctx.enlargement * ball.radius);
  auto [rt, rq] = ctx.adj->enclosing_cube(enlarged.members);
  ctx.families[rt].push_back(rq);
  double b_r = cube_average(ctx.adj->system(rt), rq, *ctx.b);

  // localized data and threshold statistics
  double mu_enl = sp.measure(enlarged.members);
  const Cube& p_cube = tree.cube(pi);
  double c_mu0 = tree.constants().c_mu0;
  std::vector<Field> stats;  // per k: pointwise + surrogate grand-maximal statistic
  Field avgs;
  for (int k = 0; k <= ctx.m; ++k) {
    Field hk(sp.size(), 0.0);
    double sum = 0.0;
    for (int z : enlarged.members) {
      hk[z] = ipow(std::abs((*ctx.b)[z] - b_r), k) * std::abs((*ctx.f)[z]);
      sum += hk[z] * sp.mass(z);
    }
    avgs.push_back(mu_enl > 0 ? sum / mu_enl : 0.0);
    Field mh = maximal_function(sp, hk);
    Field th = truncated_maximal(*ctx.T, hk);
    Field stat(sp.size(), 0.0);
    for (int x = 0; x < sp.size(); ++x) stat[x] = std::max(hk[x], mh[x] + th[x]);
    stats.push_back(std::move(stat));
  }

  // calibrate alpha: smallest power of two with mu(E) <= mu(P)/(4 C_mu0)
  double bound = tree.cube_measure(pi) / (4.0 * c_mu0);
  double alpha = 1.0;
  std::vector<char> in_E(sp.size(), 0);
  for (int iter = 0; iter < 60; ++iter) {
    double e_mass = 0.0;
    std::fill(in_E.begin(), in_E.end(), 0);
    for (int x : p_cube.members) {
      bool in = false;
      for (int k = 0; k <= ctx.m && !in; ++k)
        if (avgs[k] > 0 && stats[k][x] > alpha * avgs[k]) in = true;
      if (in) {
        in_E[x] = 1;
        e_mass += sp.mass(x);
      }
    }
    if (e_mass <= bound) break;
    alpha *= 2.0;
  }

  std::vector<int> stops;
  cz_stopping(tree, pi, in_E, 1.0 / (2.0 * c_mu0), stops);
  for (int pj : stops) {
    const Cube& q = tree.cube(pj);
    Ball child_ball;
    child_ball.center = q.center;
    child_ball.radius = q.outer_radius * (1.0 + 1e-9) + 1e-300;
    child_ball.members = sp.ball(q.center, child_ball.radius).members;
    dominate_recurse(ctx, pj, child_ball);
  }
}

}  // namespace detail

inline DominationResult dominate_commutator(const DiscreteOperator& T, const Field& b, int m,
                                            const Field& f, const AdjacentSystems& adj) {
  require(m >= 0, "m >= 0");
  const Space& sp = T.space();

  detail::DominateContext ctx;
  ctx.T = &T;
  ctx.adj = &adj;
  ctx.b = &b;
  ctx.f = &f;
  ctx.m = m;
  double c_adj = adj.c_adj() > 0.0 ? adj.c_adj() : 2.0;
  ctx.enlargement = enlargement_constant(sp.quasi_triangle_constant(), c_adj);
  ctx.families.assign(adj.count(), {});

  // B0 is centered on the dominant support point and blown up to cover the
  // whole finite space: the annuli covering of X = union 2^j B0 then
  // collapses to the single root recursion (every annulus is empty).
  int x0 = 0;
  double fmax = 0.0;
  for (int i = 0; i < sp.size(); ++i)
    if (std::abs(f[i]) > fmax) {
      fmax = std::abs(f[i]);
      x0 = i;
    }
  double r0 = 0.0;
  for (int i = 0; i < sp.size(); ++i) r0 = std::max(r0, sp.distance(x0, i));
  Ball b0 = sp.ball(x0, r0 * (1.0 + 1e-9) + 1e-12);

  auto [t0, q0] = adj.enclosing_cube(b0.members);
  ctx.t0 = t0;
  ctx.tree = &adj.system(t0);
  detail::dominate_recurse(ctx, q0, b0);

  DominationResult out;
  out.enlargement = ctx.enlargement;
  out.recursion_nodes = ctx.nodes;
  for (int t = 0; t < adj.count(); ++t)
    out.families.push_back(SparseFamily::of(adj.system(t), ctx.families[t]));

  // RHS of the domination inequality with constant 1
  Field rhs(sp.size(), 0.0);
  for (const SparseFamily& fam : out.families) {
    if (fam.cubes.empty()) continue;
    for (int k = 0; k <= m; ++k) {
      Field a = domination_sum(fam, b, m, k, f);
      double c = binomial(m, k);
      for (int i = 0; i < sp.size(); ++i) rhs[i] += c * a[i];
    }
  }
  CField lhs_c = (m == 0) ? T.apply(f) : commutator(T, b, m, f);
  Field lhs(sp.size());
  for (int i = 0; i < sp.size(); ++i) lhs[i] = std::abs(lhs_c[i]);

  double scale = sup_abs(lhs);
  for (int i = 0; i < sp.size(); ++i) {
    if (rhs[i] > 0.0) {
      out.c_star = std::max(out.c_star, lhs[i] / rhs[i]);
    } else if (lhs[i] > 1e-12 * std::max(scale, 1.0)) {
      out.dominated = false;
      if (out.failure_witness < 0) out.failure_witness = i;
    }
  }
  out.lhs = std::move(lhs);
  out.rhs = std::move(rhs);
  return out;
}

}  // namespace shtk
