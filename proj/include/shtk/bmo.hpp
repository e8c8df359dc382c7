#pragma once

#include "shtk/operators.hpp"
#include "shtk/weights.hpp"

namespace shtk {

// Mean oscillation over a ball: avg_B |b - b_B|.
inline double oscillation(const Space& sp, const Field& b, const Ball& ball) {
  if (ball.members.empty()) return 0.0;
  double mu = sp.measure(ball.members);
  double avg = 0.0;
  for (int p : ball.members) avg += b[p] * sp.mass(p);
  avg /= mu;
  double s = 0.0;
  for (int p : ball.members) s += std::abs(b[p] - avg) * sp.mass(p);
  return s / mu;
}

inline double ball_average(const Space& sp, const Field& b, const Ball& ball) {
  double mu = sp.measure(ball.members);
  double avg = 0.0;
  for (int p : ball.members) avg += b[p] * sp.mass(p);
  return avg / mu;
}

// Weighted BMO norm: sup over the family of (1/w(B)) int_B |b - b_B| dmu.
// The incremental scan uses a rank tree so the all-balls family stays cheap.
inline double bmo_norm(const Space& sp, const Field& b, const Weight& w, const BallFamily& fam) {
  require(fam.size() > 0, "empty ball family");
  DeviationTree tree(b);
  struct Grow {
    const Space* sp;
    const Weight* w;
    const Field* b;
    DeviationTree* tree;
    double mu = 0, wmass = 0, bint = 0;
    void reset(int) {
      mu = wmass = bint = 0;
      tree->clear();
    }
    void add(int p) {
      double m = sp->mass(p);
      mu += m;
      wmass += (*w)[p] * m;
      bint += (*b)[p] * m;
      tree->insert(p, m, (*b)[p]);
    }
  } grow{&sp, &w, &b, &tree};
  double best = 0.0;
  fam.scan(grow, [&](const BallFamily::Entry&) {
    double dev = tree.abs_deviation(grow.bint / grow.mu);
    best = std::max(best, dev / grow.wmass);
  });
  return best;
}

// Median with the smallest-admissible tie-break: least value v with
// mu{b > v} <= mu(B)/2 and mu{b < v} <= mu(B)/2.
inline double median(const Space& sp, const Field& b, const Ball& ball) {
  require(!ball.members.empty(), "median of an empty ball");
  std::vector<std::pair<double, double>> vals;  // (b, mass)
  double mu = 0.0;
  for (int p : ball.members) {
    vals.push_back({b[p], sp.mass(p)});
    mu += sp.mass(p);
  }
  std::sort(vals.begin(), vals.end());
  double below = 0.0;
  for (std::size_t i = 0; i < vals.size();) {
    std::size_t j = i;
    double at = 0.0;
    while (j < vals.size() && vals[j].first == vals[i].first) at += vals[j++].second;
    double above = mu - below - at;
    if (below <= mu / 2.0 && above <= mu / 2.0) return vals[i].first;
    below += at;
    i = j;
  }
  fail("median search failed");  // unreachable: the last value is always admissible
}

// Sign-constant test sets built from the median of b on the companion ball.
struct TestSets {
  IdSet e1, e2;  // partition of B
  IdSet f1, f2;  // cover of B~, each carrying at least half the mass
  double alpha = 0.0;
  double half_mass_slack = 0.0;  // max(0, mu(B~)/2 - min mu(F_i))
  bool sign_property = true;     // b(x)-b(y) sign-constant on E_i x F_i
  bool dominance = true;         // |b(x)-alpha| <= |b(x)-b(y)| on E_i x F_i
};

inline TestSets testsets(const Space& sp, const Field& b, const Ball& B, const Ball& Bt) {
  TestSets out;
  out.alpha = median(sp, b, Bt);
  // F1 = {b <= alpha}, F2 = {b >= alpha} on B~; E1 = {b >= alpha}, E2 = {b <= alpha} on B
  for (int y : Bt.members) {
    if (b[y] <= out.alpha) out.f1.push_back(y);
    if (b[y] >= out.alpha) out.f2.push_back(y);
  }
  for (int x : B.members) {
    if (b[x] >= out.alpha) out.e1.push_back(x);
    if (b[x] <= out.alpha) out.e2.push_back(x);
  }

  double muBt = sp.measure(Bt.members);
  double slack1 = muBt / 2.0 - sp.measure(out.f1);
  double slack2 = muBt / 2.0 - sp.measure(out.f2);
  out.half_mass_slack = std::max(0.0, std::max(slack1, slack2));

  auto check_pair = [&](const IdSet& E, const IdSet& F) {
    int sign = 0;
    for (int x : E)
      for (int y : F) {
        double d = b[x] - b[y];
        if (d != 0.0) {
          int s = d > 0 ? 1 : -1;
          if (sign == 0) sign = s;
          if (s != sign) out.sign_property = false;
        }
        if (std::abs(b[x] - out.alpha) > std::abs(b[x] - b[y]) + 1e-12)
          out.dominance = false;
      }
  };
  check_pair(out.e1, out.f1);
  check_pair(out.e2, out.f2);
  return out;
}

// ---------------------------------------------------------------------------
// Lower-bound machinery for the two-weight commutator.

struct LowerBoundRecord {
  Ball ball;
  Ball companion;
  bool found_companion = false;
  double kernel_floor = 0.0;   // min |K_comp| over B x B~
  double osc_m = 0.0;          // Omega(b,B)^m
  double action = 0.0;         // (1/mu(B)) sum_i int_B |T_b^m chi_{F_i}|
  double weight_bound = 0.0;   // mu(B)^{-1} lambda1(B)^{1/p} (int_B lambda2^{-1/(p-1)})^{1/p'}
  double bloom_ratio = 0.0;    // nu^{1/m}(B)/mu(B)
};

// Searches the annulus a1 r <= d(x_B, y0) <= a2 r for the companion ball
// maximizing the kernel floor, then evaluates both sides of the
// oscillation-versus-commutator-action inequality.
inline LowerBoundRecord lower_bound_ratio(const DiscreteOperator& T, const Field& b, int m,
                                          double p, const Weight& lambda1, const Weight& lambda2,
                                          const Ball& ball, double a1 = 3.0, double a2 = 24.0,
                                          bool use_imag = false) {
  const Space& sp = T.space();
  LowerBoundRecord rec;
  rec.ball = ball;
  require(m >= 1, "m >= 1");
  require(p > 1.0, "p > 1");

  double best_floor = 0.0;
  for (int y0 = 0; y0 < sp.size(); ++y0) {
    double d = sp.distance(ball.center, y0);
    if (d < a1 * ball.radius || d > a2 * ball.radius) continue;
    Ball cand = sp.ball(y0, ball.radius);
    if (cand.members.empty()) continue;
    double floor = std::numeric_limits<double>::infinity();
    for (int x : ball.members) {
      for (int y : cand.members) {
        if (x == y) {
          floor = 0.0;
          break;
        }
        Cplx k = T.kernel_entry(x, y);
        floor = std::min(floor, std::abs(use_imag ? k.imag() : k.real()));
      }
      if (floor == 0.0) break;
    }
    if (floor > best_floor) {
      best_floor = floor;
      rec.companion = cand;
      rec.found_companion = true;
    }
  }
  rec.kernel_floor = best_floor;
  if (!rec.found_companion) return rec;

  rec.osc_m = ipow(oscillation(sp, b, ball), m);

  DiscreteOperator Tc = T.is_real() ? T : T.component(use_imag);
  double mu = sp.measure(ball.members);
  TestSets ts = testsets(sp, b, ball, rec.companion);
  for (const IdSet* F : {&ts.f1, &ts.f2}) {
    Field chi(sp.size(), 0.0);
    for (int y : *F) chi[y] = 1.0;
    CField tb = commutator(Tc, b, m, chi);
    double s = 0.0;
    for (int x : ball.members) s += std::abs(tb[x]) * sp.mass(x);
    rec.action += s / mu;
  }

  double l1B = weighted_measure(sp, lambda1, ball.members);
  double dual = 0.0;
  for (int x : ball.members) dual += std::pow(lambda2[x], -1.0 / (p - 1.0)) * sp.mass(x);
  double pprime = p / (p - 1.0);
  rec.weight_bound = std::pow(l1B, 1.0 / p) * std::pow(dual, 1.0 / pprime) / mu;

  BloomWeight nu = bloom_weight(lambda1, lambda2, p, m);
  rec.bloom_ratio = weighted_measure(sp, nu.nu_root, ball.members) / mu;
  return rec;
}

// ---------------------------------------------------------------------------
// Weighted atoms, duality pairing, and the factorization bilinear form.

struct Atom {
  Ball ball;
  Field values;  // supported on the ball
};

inline bool atom_check(const Space& sp, const Atom& a, const Weight& w) {
  double integral = 0.0, norm2 = 0.0;
  for (int p = 0; p < sp.size(); ++p) {
    if (a.values[p] != 0.0 && !contains(a.ball.members, p)) return false;
    integral += a.values[p] * sp.mass(p);
    norm2 += a.values[p] * a.values[p] * w[p] * sp.mass(p);
  }
  double wB = weighted_measure(sp, w, a.ball.members);
  return std::abs(integral) <= 1e-12 && norm2 <= (1.0 / wB) * (1.0 + 1e-10);
}

// Centers and rescales raw data into an atom with equality in the size
// normalization ||a||_{L^2_w} = w(B)^{-1/2}.
inline Atom make_atom(const Space& sp, const Ball& ball, const Field& raw, const Weight& w) {
  require(!ball.members.empty(), "atom ball is empty");
  for (int p = 0; p < sp.size(); ++p)
    if (raw[p] != 0.0) require(contains(ball.members, p), "raw data escapes the ball");
  double mu = sp.measure(ball.members);
  double avg = 0.0;
  for (int p : ball.members) avg += raw[p] * sp.mass(p);
  avg /= mu;
  Atom a;
  a.ball = ball;
  a.values.assign(sp.size(), 0.0);
  double norm2 = 0.0;
  for (int p : ball.members) {
    a.values[p] = raw[p] - avg;
    norm2 += a.values[p] * a.values[p] * w[p] * sp.mass(p);
  }
  if (norm2 <= 0.0) fail("degenerate atom: raw data is constant on the ball");
  double wB = weighted_measure(sp, w, ball.members);
  double scale = 1.0 / std::sqrt(norm2 * wB);
  for (int p : ball.members) a.values[p] *= scale;
  return a;
}

inline double duality_pairing(const Space& sp, const Field& g, const Atom& a) {
  double s = 0.0;
  for (int p : a.ball.members) s += a.values[p] * g[p] * sp.mass(p);
  return s;
}

// Pi(g,h) = g T h - h T* g; its integral vanishes by the transpose identity.
inline CField pi_product(const DiscreteOperator& T, const Field& g, const Field& h) {
  CField th = T.apply(h);
  CField tsg = T.adjoint_apply(g);
  CField out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * th[i] - h[i] * tsg[i];
  return out;
}

inline Cplx integral(const Space& sp, const CField& f) {
  Cplx s(0.0, 0.0);
  for (int i = 0; i < sp.size(); ++i) s += f[i] * sp.mass(i);
  return s;
}

inline double integral(const Space& sp, const Field& f) {
  double s = 0.0;
  for (int i = 0; i < sp.size(); ++i) s += f[i] * sp.mass(i);
  return s;
}

}  // namespace shtk
