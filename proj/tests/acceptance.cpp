// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
//
// Every tolerance is pinned in code; the suite is deterministic (fixed seeds).

#include <chrono>
#include <cstdio>
#include <vector>

#include "shtk/harness.hpp"

using namespace shtk;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Space model_space(const std::string& name, int n) {
  if (name == "grid1d") return make_grid1d(n);
  if (name == "grid2d") return make_grid2d(int(std::round(std::sqrt(double(n)))));
  if (name == "halfline") return make_halfline(n, 1.0);
  if (name == "heisenberg") {
    if (n <= 64) return make_heisenberg_lattice(4, 4);
    if (n <= 256) return make_heisenberg_lattice(8, 4);
    return make_heisenberg_lattice(8, 16);
  }
  fail("unknown acceptance model " + name);
}

// --- 1: dyadic structure ----------------------------------------------------
void criterion1() {
  bool pass = true;
  std::string detail;
  double worst_time = 0.0;
  for (const char* model : {"grid1d", "grid2d", "halfline", "heisenberg"}) {
    for (int n : {64, 256, 1024}) {
      auto t0 = std::chrono::steady_clock::now();
      Space sp = model_space(model, n);
      auto [k_min, k_max] = AdjacentSystems::auto_range(sp, 0.5);
      DyadicSystem sys(sp, 0.5, k_min, k_max, 0);
      auto rep = sys.verify();
      double dt = seconds_since(t0);
      if (n == 1024) worst_time = std::max(worst_time, dt);
      bool ok = rep.partition && rep.nesting && rep.unique_ancestor && rep.sandwich;
      if (!ok) detail += std::string(" ") + model + "@" + std::to_string(n) + " failed:" + rep.detail;
      pass = pass && ok;
    }
  }
  pass = pass && worst_time < 60.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "dyadic structure on 4 models, n in {64,256,1024}: partition/nesting/"
                "ancestor/sandwich exact, %.1fs at n=1024%s",
                worst_time, detail.c_str());
  report(1, pass, buf);
}

// --- 2: adjacent coverage -----------------------------------------------------
void criterion2() {
  bool pass = true;
  std::string lines;
  for (const char* model : {"grid1d", "grid2d", "halfline", "heisenberg"}) {
    Space sp = model_space(model, 256);
    AdjacentSystems adj = AdjacentSystems::make(sp, 0.25, 3, 0);
    adj.measure_coverage();
    int failures = 0;
    for (const auto& rec : adj.coverage_records())
      if (rec.system < 0) ++failures;
    bool ok = adj.coverage() >= 0.95;
    pass = pass && ok;
    char buf[128];
    std::snprintf(buf, sizeof buf, " %s: coverage %.3f C_adj %.1f (%d uncovered)", model,
                  adj.coverage(), adj.c_adj(), failures);
    lines += buf;
    if (!ok) {
      for (const auto& rec : adj.coverage_records()) {
        if (rec.system >= 0) continue;
        std::printf("        witness: model %s ball(center=%d, r=%.5g) gen %d uncovered\n",
                    model, rec.center, rec.radius, rec.gen);
      }
    }
  }
  report(2, pass, "adjacent systems (T=3, delta=1/4) cover >= 95% of sampled balls:" + lines);
}

// --- 3: haar suite ----------------------------------------------------------
void criterion3() {
  bool pass = true;
  std::string lines;
  struct Case {
    Space sp;
    std::string name;
  };
  std::vector<Case> cases;
  cases.push_back({make_grid1d(512), "grid1d@512"});
  cases.push_back({make_halfline(256, 1.0), "halfline@256"});
  for (auto& c : cases) {
    const Space& sp = c.sp;
    auto [k_min, k_max] = AdjacentSystems::auto_range(sp, 0.5);
    DyadicSystem sys(sp, 0.5, k_min, k_max, 0);
    HaarBasis basis(sys);
    // Gram identity
    std::vector<Field> rows;
    for (int qi : sys.level_cubes(0)) rows.push_back(basis.values_h0(qi));
    for (const auto& h : basis.functions()) rows.push_back(basis.values(h));
    double gram = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = i; j < rows.size(); ++j) {
        double ip = 0.0;
        for (int p = 0; p < sp.size(); ++p) ip += rows[i][p] * rows[j][p] * sp.mass(p);
        gram = std::max(gram, std::abs(ip - (i == j ? 1.0 : 0.0)));
      }
    // cancellation
    double canc = 0.0;
    for (const auto& h : basis.functions()) {
      Field v = basis.values(h);
      double integral = 0.0;
      for (int p = 0; p < sp.size(); ++p) integral += v[p] * sp.mass(p);
      canc = std::max(canc, std::abs(integral) / std::sqrt(sys.cube_measure(h.cube)));
    }
    // round trip
    Rng rng(31);
    Field f = rng.gaussian_field(sp.size());
    Field back = basis.reconstruct(basis.expand(f));
    double rt = 0.0;
    for (int p = 0; p < sp.size(); ++p) rt = std::max(rt, std::abs(back[p] - f[p]));
    // Parseval defect for the square function
    Field s = basis.square_function(f);
    auto [e0, d0] = basis.martingale(f, sys.k_min());
    double lhs = 0.0, rhs = 0.0;
    for (int p = 0; p < sp.size(); ++p) {
      lhs += s[p] * s[p] * sp.mass(p);
      rhs += (f[p] * f[p] - e0[p] * e0[p]) * sp.mass(p);
    }
    double parseval = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
    // weighted Haar decomposition identity
    Field wv(sp.size());
    for (int p = 0; p < sp.size(); ++p) wv[p] = std::exp(0.4 * std::log(0.1 + sp.point(p)[0]));
    auto wsys = weighted_haar(basis, wv);
    double wh = 0.0;
    for (std::size_t i = 0; i < wsys.functions.size(); ++i) {
      const auto& whf = wsys.functions[i];
      Field hv = basis.values(basis.functions()[i]);
      double muE = 0.0;
      for (int p : whf.support_E) muE += sp.mass(p);
      double w0 = 0.0, w2 = 0.0;
      for (int p = 0; p < sp.size(); ++p) {
        double chiE = contains(whf.support_E, p) ? 1.0 / muE : 0.0;
        wh = std::max(wh, std::abs(hv[p] - (whf.C * whf.values[p] + whf.D * chiE)));
      }
      for (int p = 0; p < sp.size(); ++p) {
        w0 += whf.values[p] * wv[p] * sp.mass(p);
        w2 += whf.values[p] * whf.values[p] * wv[p] * sp.mass(p);
      }
      wh = std::max(wh, std::abs(w0));
      wh = std::max(wh, std::abs(w2 - 1.0));
    }
    bool ok = gram <= 1e-10 && canc <= 1e-12 && rt <= 1e-10 && parseval <= 1e-10 && wh <= 1e-10;
    pass = pass && ok;
    char buf[192];
    std::snprintf(buf, sizeof buf, " %s: gram %.1e canc %.1e rt %.1e parseval %.1e weighted %.1e",
                  c.name.c_str(), gram, canc, rt, parseval, wh);
    lines += buf;
  }
  report(3, pass, "haar suite (identity/cancellation/round-trip/Parseval/weighted):" + lines);
}

// --- 4: sparse suite ----------------------------------------------------------
void criterion4() {
  bool pass = true;
  std::string lines;
  struct Case {
    Space sp;
    std::string name;
  };
  std::vector<Case> cases;
  cases.push_back({make_grid1d(128), "grid1d@128"});
  cases.push_back({make_halfline(128, 0.7), "halfline@128"});
  for (auto& c : cases) {
    const Space& sp = c.sp;
    auto [k_min, k_max] = AdjacentSystems::auto_range(sp, 0.5);
    DyadicSystem sys(sp, 0.5, k_min, k_max, 0);
    Rng rng(17);
    int sparsify_ok = 0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> cubes;
      for (int qi = 0; qi < int(sys.cubes().size()); ++qi)
        if (rng.uniform() < 0.35) cubes.push_back(qi);
      if (cubes.empty()) cubes.push_back(0);
      SparseFamily fam = SparseFamily::of(sys, cubes);
      double lam = std::max(1.0, carleson_constant(fam));
      sparsify(fam, lam);
      auto check = sparsity_check(fam);
      bool ok = check.max_overlap <= 1;
      for (std::size_t i = 0; i < fam.cubes.size() && ok; ++i) {
        double target = sys.cube_measure(fam.cubes[i]) / lam;
        double atom = 0.0;
        for (int p : sys.cube(fam.cubes[i]).members) atom = std::max(atom, sp.mass(p));
        ok = sp.measure(fam.witnesses[i]) >= target - atom - 1e-12;
      }
      if (ok) ++sparsify_ok;
    }
    // self-adjointness of the sparse operator
    std::vector<int> all(sys.cubes().size());
    std::iota(all.begin(), all.end(), 0);
    SparseFamily fam = SparseFamily::of(sys, all);
    Field u = rng.gaussian_field(sp.size()), v = rng.gaussian_field(sp.size());
    Field au = sparse_operator_apply(fam, u), av = sparse_operator_apply(fam, v);
    double lhs = 0.0, rhs = 0.0, scale = 0.0;
    for (int p = 0; p < sp.size(); ++p) {
      lhs += au[p] * v[p] * sp.mass(p);
      rhs += u[p] * av[p] * sp.mass(p);
      scale += std::abs(au[p] * v[p]) * sp.mass(p);
    }
    bool selfadj = std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, scale);
    // augmentation bound on 20 random b
    int augment_ok = 0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> cubes;
      for (int qi = 0; qi < int(sys.cubes().size()); ++qi)
        if (rng.uniform() < 0.3) cubes.push_back(qi);
      if (cubes.empty()) cubes.push_back(0);
      SparseFamily f2 = SparseFamily::of(sys, cubes);
      sparsify(f2, std::max(1.0, carleson_constant(f2)));
      auto res = augment_family(f2, rng.gaussian_field(sp.size()));
      if (res.bound_holds && std::isfinite(res.fitted_c)) ++augment_ok;
    }
    bool ok = sparsify_ok == 50 && selfadj && augment_ok == 20;
    pass = pass && ok;
    char buf[160];
    std::snprintf(buf, sizeof buf, " %s: sparsify %d/50 selfadjoint %d augment %d/20",
                  c.name.c_str(), sparsify_ok, int(selfadj), augment_ok);
    lines += buf;
  }
  report(4, pass, "sparse suite (witnesses/self-adjointness/augmentation):" + lines);
}

// --- 5: domination certificate --------------------------------------------------
void criterion5() {
  bool pass = true;
  std::string lines;
  struct Case {
    std::string name;
    Kernel kernel;
    bool halfline;
  };
  std::vector<Case> cases = {
      {"hilbert", Kernel::hilbert(), false},
      {"cauchy", Kernel::cauchy(LipschitzProfile::sawtooth(1.0)), false},
      {"bessel1d", Kernel::bessel1d(0.7), true},
  };
  for (const auto& c : cases) {
    Space sp = c.halfline ? make_halfline(256, 0.7) : make_grid1d(256);
    AdjacentSystems adj = AdjacentSystems::make(sp, 0.25, 3, 0);
    adj.measure_coverage();
    DiscreteOperator T(c.kernel, sp);
    Rng rng(5);
    for (int m : {1, 2}) {
      double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
      bool dominated = true;
      for (int t = 0; t < 20; ++t) {
        Field b = rng.gaussian_field(sp.size());
        Field f = rng.gaussian_field(sp.size());
        auto res = dominate_commutator(T, b, m, f, adj);
        dominated = dominated && res.dominated;
        cmin = std::min(cmin, res.c_star);
        cmax = std::max(cmax, res.c_star);
      }
      bool ok = dominated && std::isfinite(cmax) && cmax > 0.0 && cmax / cmin <= 10.0;
      pass = pass && ok;
      char buf[128];
      std::snprintf(buf, sizeof buf, " %s m=%d: C* [%.2f,%.2f] x%.1f", c.name.c_str(), m, cmin,
                    cmax, cmax / cmin);
      lines += buf;
    }
  }
  report(5, pass, "sparse domination certificates finite and stable (<= x10):" + lines);
}

// --- 6: non-degeneracy -----------------------------------------------------------
void criterion6() {
  bool pass = true;
  std::string lines;
  struct Case {
    std::string name;
    Kernel kernel;
    Space sp;
  };
  std::vector<Case> cases;
  cases.push_back({"hilbert", Kernel::hilbert(), make_grid1d(256)});
  cases.push_back({"cauchy", Kernel::cauchy(LipschitzProfile::sawtooth(1.0)), make_grid1d(256)});
  cases.push_back({"cauchy-szego", Kernel::cauchy_szego(1), make_heisenberg_lattice(5, 10)});
  cases.push_back({"szego-k1", Kernel::szego(1), make_omegak_boundary(6, 6, 1)});
  cases.push_back({"szego-k2", Kernel::szego(2), make_omegak_boundary(6, 6, 2)});
  for (double lam : {-0.3, 0.7, 1.5}) {
    char nm[32];
    std::snprintf(nm, sizeof nm, "bessel1d(%.1f)", lam);
    cases.push_back({nm, Kernel::bessel1d(lam), make_halfline(256, lam)});
  }
  for (int j : {1, 2}) {
    char nm[32];
    std::snprintf(nm, sizeof nm, "bessel-hd(j=%d)", j);
    cases.push_back({nm, Kernel::bessel_hd(1, 1.0, j), make_halfspace(16, 2, 1.0)});
  }
  for (const auto& c : cases) {
    DiscreteOperator T(c.kernel, c.sp);
    auto nd = nondegeneracy_check(T);
    bool ok = nd.pass_fraction >= 0.95 && nd.c0 > 0.0 && std::isfinite(nd.c0);
    pass = pass && ok;
    char buf[96];
    std::snprintf(buf, sizeof buf, " %s: %.0f%% c0=%.3g", c.name.c_str(),
                  100.0 * nd.pass_fraction, nd.c0);
    lines += buf;
  }
  report(6, pass, "non-degeneracy (>=95% of sampled (x,r), uniform fitted c0):" + lines);
}

// --- 7: kernel analytics ------------------------------------------------------------
void criterion7() {
  // Bessel branch agreement
  double band = 0.0;
  for (double nu : {-0.4, 0.0, 0.5, 1.5, 3.0}) {
    BesselEval be(nu);
    for (double z = 15.0; z <= 25.0; z += 0.5) {
      auto [series, asym] = be.branches(z);
      band = std::max(band, std::abs(series - asym) / std::abs(series));
    }
  }
  bool branch_ok = band <= 1e-8;
  // small-argument limit
  double z = 1e-4, nu = 0.5;
  double limit = bessel_i(nu, z) / std::pow(z, nu);
  double target = 1.0 / (std::pow(2.0, nu) * std::tgamma(nu + 1.0));
  bool limit_ok = std::abs(limit - target) <= 1e-6 * target;
  // near-diagonal asymptotic of the 1-d Riesz kernel
  double r = bessel_riesz_kernel_1d(1.0, 1.0, 1.01);
  double diag = r * M_PI * 1.0 * 1.01 * 0.01;
  bool diag_ok = std::abs(diag - 1.0) <= 0.10;
  // principal-term check of the half-space kernel on 20 sampled pairs
  int n = 1;
  double cn = std::tgamma((n + 2) / 2.0) / std::pow(M_PI, (n + 2) / 2.0);
  bool principal_ok = true;
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    double lam = t % 2 == 0 ? 0.5 : 1.0;
    double h = 0.4 + rng.uniform();
    double dx = (0.05 + 0.15 * rng.uniform()) * h;
    Field x{0.3, h}, y{0.3 + dx, h};
    double rk = bessel_riesz_kernel_hd(n, lam, 1, x, y);
    double principal = cn * dx / (std::pow(h, 2 * lam) * ipow(dx, n + 2));
    double budget = dx / (std::pow(h, 2 * lam + 2) * ipow(dx, n));
    if (std::abs(rk - principal) > 10.0 * budget) principal_ok = false;
  }
  bool pass = branch_ok && limit_ok && diag_ok && principal_ok;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "kernel analytics: branch band %.1e (<=1e-8), limit err %.1e (<=1e-6), "
                "diagonal ratio %.3f (10%%), principal-term %s",
                band, std::abs(limit - target) / target, diag, principal_ok ? "ok" : "FAIL");
  report(7, pass, buf);
}

// --- 8: two-weight equivalence band ---------------------------------------------------
void criterion8() {
  auto t0 = std::chrono::steady_clock::now();
  Space sp = make_grid1d(1024);
  DiscreteOperator T(Kernel::hilbert(), sp);
  Weight one = constant_weight(1024);
  Weight l1 = power_weight(sp, 0.4), l2 = power_weight(sp, -0.4);
  bool pass = true;
  std::string lines;
  for (int m : {1, 2}) {
    for (int wcase : {0, 1}) {
      const Weight& a = wcase ? l1 : one;
      const Weight& b = wcase ? l2 : one;
      auto sec = equivalence_experiment(sp, T, 2.0, m, a, b, 10, 42);
      bool ok = sec.constant_zero_ok && sec.band_ratio <= 50.0 && std::isfinite(sec.lower_c_fit);
      pass = pass && ok;
      char buf[96];
      std::snprintf(buf, sizeof buf, " m=%d %s: band x%.2f const->0:%d", m,
                    wcase ? "two-weight" : "unweighted", sec.band_ratio,
                    int(sec.constant_zero_ok));
      lines += buf;
    }
  }
  double dt = seconds_since(t0);
  pass = pass && dt < 600.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.0fs < 600s)", dt);
  report(8, pass, "two-weight equivalence band <= 50 on n=1024, zero iff constant:" + lines + buf);
}

// --- 9: duality and the bilinear form --------------------------------------------------
void criterion9() {
  Space sp = make_grid1d(128);
  Weight w = power_weight(sp, 0.4);
  BallFamily fam = BallFamily::all_balls(sp);
  Rng rng(91);
  // battery: 50 atoms x 10 g
  std::vector<Atom> atoms;
  while (int(atoms.size()) < 50) {
    Ball ball = sp.ball(rng.index(sp.size()), 0.03 + 0.4 * rng.uniform());
    if (ball.members.size() < 2) continue;
    Field raw(sp.size(), 0.0);
    for (int p : ball.members) raw[p] = rng.gaussian();
    try {
      atoms.push_back(make_atom(sp, ball, raw, w));
    } catch (...) {
    }
  }
  std::vector<Field> gs;
  for (int i = 0; i < 10; ++i) gs.push_back(rng.gaussian_field(sp.size()));
  double c_fit = 0.0;
  bool finite = true;
  for (const Field& g : gs) {
    double norm = bmo_norm(sp, g, w, fam);
    for (const Atom& a : atoms) {
      double pairing = std::abs(duality_pairing(sp, g, a));
      if (norm <= 0.0) {
        finite = finite && pairing <= 1e-12;
        continue;
      }
      c_fit = std::max(c_fit, pairing / norm);
    }
  }
  bool duality_ok = finite && std::isfinite(c_fit) && c_fit > 0.0;

  // bilinear form integral identity for every kernel model
  bool pi_ok = true;
  struct Case {
    Kernel kernel;
    Space sp;
  };
  std::vector<Case> cases;
  cases.push_back({Kernel::hilbert(), make_grid1d(64)});
  cases.push_back({Kernel::cauchy(LipschitzProfile::sawtooth(1.0)), make_grid1d(64)});
  cases.push_back({Kernel::bessel1d(0.7), make_halfline(64, 0.7)});
  cases.push_back({Kernel::cauchy_szego(1), make_heisenberg_lattice(4, 4)});
  cases.push_back({Kernel::szego(1), make_omegak_boundary(4, 4, 1)});
  cases.push_back({Kernel::bessel_hd(1, 1.0, 1), make_halfspace(8, 2, 1.0)});
  for (const auto& c : cases) {
    DiscreteOperator T(c.kernel, c.sp);
    Rng prng(7);
    Field g = prng.gaussian_field(c.sp.size()), h = prng.gaussian_field(c.sp.size());
    double l2g = 0.0, l2h = 0.0;
    for (int i = 0; i < c.sp.size(); ++i) {
      l2g += g[i] * g[i] * c.sp.mass(i);
      l2h += h[i] * h[i] * c.sp.mass(i);
    }
    Cplx total = integral(c.sp, pi_product(T, g, h));
    if (std::abs(total) > 1e-10 * std::sqrt(l2g * l2h)) pi_ok = false;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "duality pairing uniform C_fit = %.3f over 50x10 battery; "
                "int Pi(g,h) = 0 within 1e-10 on all kernels: %s",
                c_fit, pi_ok ? "yes" : "NO");
  report(9, duality_ok && pi_ok, buf);
}

// --- 10: median / test-set machinery ------------------------------------------------------
void criterion10() {
  bool pass = true;
  std::string lines;
  for (const char* model : {"grid1d", "grid2d", "halfline", "heisenberg"}) {
    Space sp = model_space(model, 64);
    Rng rng(13);
    int ok_count = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Field b = rng.gaussian_field(sp.size());
      Ball B = sp.ball(rng.index(sp.size()), sp.diameter() * (0.05 + 0.3 * rng.uniform()));
      Ball Bt = sp.ball(rng.index(sp.size()), sp.diameter() * (0.05 + 0.3 * rng.uniform()));
      if (B.members.empty() || Bt.members.empty()) {
        ++ok_count;  // vacuous
        continue;
      }
      double atom = 0.0;
      for (int p : Bt.members) atom = std::max(atom, sp.mass(p));
      TestSets ts = testsets(sp, b, B, Bt);
      double muBt = sp.measure(Bt.members);
      bool half = sp.measure(ts.f1) >= muBt / 2.0 - atom - 1e-12 &&
                  sp.measure(ts.f2) >= muBt / 2.0 - atom - 1e-12;
      // covers
      IdSet eu = ts.e1;
      eu.insert(eu.end(), ts.e2.begin(), ts.e2.end());
      std::sort(eu.begin(), eu.end());
      eu.erase(std::unique(eu.begin(), eu.end()), eu.end());
      bool covers = (eu == B.members);
      if (half && covers && ts.sign_property && ts.dominance) ++ok_count;
    }
    pass = pass && ok_count == 100;
    lines += std::string(" ") + model + ":" + std::to_string(ok_count) + "/100";
  }
  report(10, pass, "median/test-set properties hold exhaustively:" + lines);
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  std::printf("%d/10 criteria passed (%.0fs total)\n", 10 - g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
