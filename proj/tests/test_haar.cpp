#include <catch2/catch_amalgamated.hpp>

#include "shtk/haar.hpp"

using namespace shtk;

namespace {

double inner(const Space& sp, const Field& f, const Field& g) {
  double s = 0.0;
  for (int i = 0; i < sp.size(); ++i) s += f[i] * g[i] * sp.mass(i);
  return s;
}

double l2(const Space& sp, const Field& f) { return std::sqrt(inner(sp, f, f)); }

// All basis elements as explicit point-value rows (dense oracle).
std::vector<Field> dense_rows(const HaarBasis& basis) {
  std::vector<Field> rows;
  for (int qi : basis.system().level_cubes(0)) rows.push_back(basis.values_h0(qi));
  for (const auto& h : basis.functions()) rows.push_back(basis.values(h));
  return rows;
}

}  // namespace

TEST_CASE("haar coefficients on hand-built cubes") {
  SECTION("2 equal-mass children: +-1") {
    Space sp({{0.1}, {0.9}}, {0.5, 0.5}, MetricKind::Euclidean);
    DyadicSystem sys(sp, 0.25, 0, 1, 0);
    HaarBasis basis(sys);
    REQUIRE(basis.functions().size() == 1);
    Field v = basis.values(basis.functions()[0]);
    CHECK(std::abs(v[0]) == Catch::Approx(1.0));
    CHECK(std::abs(v[1]) == Catch::Approx(1.0));
    CHECK(v[0] * v[1] == Catch::Approx(-1.0));
  }
  SECTION("children masses (1/4,1/4,1/2): two orthonormal functions") {
    Space sp({{0.05}, {0.4}, {0.8}}, {0.25, 0.25, 0.5}, MetricKind::Euclidean);
    DyadicSystem sys(sp, 0.26, 0, 1, 0);
    HaarBasis basis(sys);
    REQUIRE(basis.functions().size() == 2);
    // plug the masses into the coefficient formulas by hand
    const auto& h1 = basis.functions()[0];
    CHECK(h1.a == Catch::Approx(std::sqrt(0.75 / 0.25)));
    CHECK(h1.b == Catch::Approx(std::sqrt(0.25 / 0.75)));
    // 3x3 Gram by direct summation
    auto rows = dense_rows(basis);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows.size(); ++j)
        CHECK(inner(sp, rows[i], rows[j]) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-12));
  }
  SECTION("single-child cubes emit no cancellative function") {
    Space sp({{0.5}}, {1.0}, MetricKind::Euclidean);
    DyadicSystem sys(sp, 0.5, 0, 2, 0);
    CHECK(HaarBasis(sys).functions().empty());
  }
}

TEST_CASE("haar basis invariants on a 64-point system") {
  Space sp = make_grid1d(64);
  DyadicSystem sys(sp, 0.5, -1, 6, 0);  // finest cubes are singletons
  HaarBasis basis(sys);

  SECTION("orthonormality: full Gram is the identity") {
    auto rows = dense_rows(basis);
    REQUIRE(rows.size() == 64);  // complete basis
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = i; j < rows.size(); ++j)
        CHECK(inner(sp, rows[i], rows[j]) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-10));
  }
  SECTION("cancellation and unit norm") {
    for (const auto& h : basis.functions()) {
      Field v = basis.values(h);
      double integral = 0.0;
      for (int i = 0; i < sp.size(); ++i) integral += v[i] * sp.mass(i);
      double muQ = sys.cube_measure(h.cube);
      CHECK(std::abs(integral) <= 1e-12 * std::sqrt(muQ));
      CHECK(l2(sp, v) == Catch::Approx(1.0).margin(1e-12));
    }
  }
  SECTION("support and constancy on children") {
    for (const auto& h : basis.functions()) {
      Field v = basis.values(h);
      const Cube& q = sys.cube(h.cube);
      for (int p = 0; p < sp.size(); ++p)
        if (!contains(q.members, p)) CHECK(v[p] == 0.0);
      for (int ci : q.children) {
        const auto& mem = sys.cube(ci).members;
        for (int p : mem) CHECK(v[p] == v[mem[0]]);
      }
    }
  }
  SECTION("norm scaling bands") {
    // ||h||_p ~ mu(Q_eps)^{1/p-1/2} with lattice-dependent constants: the
    // per-exponent ratio bands stay bounded and ||h||_1 ||h||_inf ~ 1
    Field band_lo(4, std::numeric_limits<double>::infinity()), band_hi(4, 0.0);
    for (const auto& h : basis.functions()) {
      Field v = basis.values(h);
      const auto& ord = basis.child_order(h.cube);
      double muQeps = sys.cube_measure(sys.cube(h.cube).children[ord[h.epsilon - 1]]);
      double ps[4] = {1.0, 2.0, 4.0, 0.0};  // 0 marks infinity
      for (int pi = 0; pi < 4; ++pi) {
        double norm = 0.0;
        if (ps[pi] == 0.0) {
          for (int i = 0; i < sp.size(); ++i) norm = std::max(norm, std::abs(v[i]));
        } else {
          for (int i = 0; i < sp.size(); ++i)
            norm += std::pow(std::abs(v[i]), ps[pi]) * sp.mass(i);
          norm = std::pow(norm, 1.0 / ps[pi]);
        }
        double expo = (ps[pi] == 0.0 ? 0.0 : 1.0 / ps[pi]) - 0.5;
        double ratio = norm / std::pow(muQeps, expo);
        band_lo[pi] = std::min(band_lo[pi], ratio);
        band_hi[pi] = std::max(band_hi[pi], ratio);
      }
      double l1 = 0.0, linf = 0.0;
      for (int i = 0; i < sp.size(); ++i) {
        l1 += std::abs(v[i]) * sp.mass(i);
        linf = std::max(linf, std::abs(v[i]));
      }
      double prod = l1 * linf;  // should be ~ 1
      CHECK(prod >= 1.0 / 16.0);
      CHECK(prod <= 16.0);
    }
    for (int pi = 0; pi < 4; ++pi) {
      CHECK(band_lo[pi] > 0.0);
      CHECK(band_hi[pi] / band_lo[pi] <= 64.0);
    }
  }
}

TEST_CASE("expand and reconstruct") {
  Space sp = make_grid1d(64);
  DyadicSystem sys(sp, 0.5, -1, 6, 0);
  HaarBasis basis(sys);
  Rng rng(11);

  SECTION("constant function has zero cancellative coefficients") {
    auto co = basis.expand(Field(64, 3.7));
    for (const auto& h : basis.functions())
      CHECK(std::abs(co.get(h.cube, h.epsilon)) < 1e-12);
  }
  SECTION("a Haar function expands to a unit coefficient") {
    const auto& h = basis.functions()[basis.functions().size() / 2];
    auto co = basis.expand(basis.values(h));
    for (const auto& g : basis.functions()) {
      double expect = (g.cube == h.cube && g.epsilon == h.epsilon) ? 1.0 : 0.0;
      CHECK(co.get(g.cube, g.epsilon) == Catch::Approx(expect).margin(1e-10));
    }
  }
  SECTION("coefficients match the dense Gram-matrix product") {
    Field f = rng.gaussian_field(64);
    auto co = basis.expand(f);
    for (const auto& h : basis.functions()) {
      double direct = inner(sp, f, basis.values(h));
      CHECK(co.get(h.cube, h.epsilon) == Catch::Approx(direct).margin(1e-12));
    }
  }
  SECTION("round trip within 1e-10") {
    Field f = rng.gaussian_field(64);
    Field back = basis.reconstruct(basis.expand(f));
    for (int i = 0; i < 64; ++i) CHECK(back[i] == Catch::Approx(f[i]).margin(1e-10));
  }
  SECTION("all-zero coefficients reconstruct to zero, missing ones throw") {
    HaarCoefficients zero;
    for (int qi : sys.level_cubes(0)) zero.at(qi, 0) = 0.0;
    for (const auto& h : basis.functions()) zero.at(h.cube, h.epsilon) = 0.0;
    Field z = basis.reconstruct(zero);
    for (double v : z) CHECK(v == 0.0);
    HaarCoefficients missing;
    CHECK_THROWS(basis.reconstruct(missing));
  }
  SECTION("indicator of a root reconstructs itself") {
    int root = sys.level_cubes(0)[0];
    Field chi(64, 0.0);
    for (int p : sys.cube(root).members) chi[p] = 1.0;
    Field back = basis.reconstruct(basis.expand(chi));
    for (int i = 0; i < 64; ++i) CHECK(back[i] == Catch::Approx(chi[i]).margin(1e-10));
  }
}

TEST_CASE("martingales") {
  Space sp = make_halfline(48, 0.7);
  DyadicSystem sys(sp, 0.5, -1, 6, 0);
  HaarBasis basis(sys);
  Rng rng(5);
  Field f = rng.gaussian_field(48);

  SECTION("constant function has vanishing differences") {
    auto [ek, dk] = basis.martingale(Field(48, 2.0), sys.k_min());
    for (double v : dk) CHECK(std::abs(v) < 1e-12);
  }
  SECTION("E at the finest singleton level is the identity") {
    auto [ek, dk] = basis.martingale(f, sys.k_max() - 1);
    for (int i = 0; i < 48; ++i) CHECK(ek[i] + dk[i] == Catch::Approx(f[i]).margin(1e-12));
  }
  SECTION("difference formula equals the Haar-sum formula") {
    for (int k = sys.k_min(); k < sys.k_max(); ++k) {
      auto [ek, dk] = basis.martingale(f, k);
      // independent route: sum of <f,h> h over generation-k cubes
      Field viaHaar(48, 0.0);
      for (const auto& h : basis.functions()) {
        if (sys.cube(h.cube).gen != k) continue;
        double c = inner(sp, f, basis.values(h));
        Field v = basis.values(h);
        for (int i = 0; i < 48; ++i) viaHaar[i] += c * v[i];
      }
      for (int i = 0; i < 48; ++i) CHECK(dk[i] == Catch::Approx(viaHaar[i]).margin(1e-10));
    }
  }
  SECTION("telescoping against a fine-level Haar function") {
    // sum_{Q strictly containing R} D_Q f, averaged against h_R, equals <E_R f, h_R>
    const HaarFunction* hr = nullptr;
    for (const auto& h : basis.functions())
      if (sys.cube(h.cube).level == sys.level_count() - 2) hr = &h;
    REQUIRE(hr != nullptr);
    Field hv = basis.values(*hr);
    double lhs = 0.0;
    for (int k = sys.k_min(); k < sys.cube(hr->cube).gen; ++k) {
      auto [ek, dk] = basis.martingale(f, k);
      lhs += inner(sp, dk, hv);
    }
    auto [er, dr] = basis.martingale(f, sys.cube(hr->cube).gen);
    double rhs = inner(sp, er, hv);
    // both equal <f,h^0_R> h^0_R paired with h_R; compare the two routes
    double coarse_gen = sys.k_min();
    auto [e0, d0] = basis.martingale(f, coarse_gen);
    CHECK(lhs + inner(sp, e0, hv) == Catch::Approx(rhs).margin(1e-10));
  }
}

TEST_CASE("square function") {
  Space sp = make_grid1d(64);
  DyadicSystem sys(sp, 0.5, -1, 6, 0);
  HaarBasis basis(sys);
  Rng rng(17);

  SECTION("constants vanish") {
    Field s = basis.square_function(Field(64, 1.0));
    for (double v : s) CHECK(v == 0.0);
  }
  SECTION("single Haar function gives chi_Q/sqrt(mu(Q))") {
    const auto& h = basis.functions()[2];
    Field s = basis.square_function(basis.values(h));
    const Cube& q = basis.system().cube(h.cube);
    double expect = 1.0 / std::sqrt(basis.system().cube_measure(h.cube));
    for (int p = 0; p < sp.size(); ++p) {
      double want = contains(q.members, p) ? expect : 0.0;
      CHECK(s[p] == Catch::Approx(want).margin(1e-10));
    }
  }
  SECTION("unweighted Parseval identity") {
    Field f = rng.gaussian_field(64);
    Field s = basis.square_function(f);
    auto [e0, d0] = basis.martingale(f, sys.k_min());
    double lhs = inner(sp, s, s);
    double rhs = inner(sp, f, f) - inner(sp, e0, e0);
    CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
  }
}

TEST_CASE("weighted haar decomposition") {
  Space sp = make_grid1d(32);
  DyadicSystem sys(sp, 0.5, -1, 5, 0);
  HaarBasis basis(sys);

  SECTION("w = 1 reduces to the unweighted basis") {
    auto wsys = weighted_haar(basis, Field(32, 1.0));
    for (std::size_t i = 0; i < wsys.functions.size(); ++i) {
      const auto& wh = wsys.functions[i];
      CHECK(wh.C == Catch::Approx(1.0).margin(1e-12));
      CHECK(wh.D == Catch::Approx(0.0).margin(1e-12));
      Field hv = basis.values(basis.functions()[i]);
      for (int p = 0; p < 32; ++p) CHECK(wh.values[p] == Catch::Approx(hv[p]).margin(1e-12));
    }
  }
  SECTION("two-child cube with w=(2,1): identity verified by hand") {
    Space sp2({{0.2}, {0.8}}, {0.5, 0.5}, MetricKind::Euclidean);
    DyadicSystem sys2(sp2, 0.3, 0, 1, 0);
    HaarBasis basis2(sys2);
    Field w{2.0, 1.0};
    auto wsys = weighted_haar(basis2, w);
    REQUIRE(wsys.functions.size() == 1);
    const auto& wh = wsys.functions[0];
    Field hv = basis2.values(basis2.functions()[0]);
    // pointwise identity h = C h^w + D chi_E/mu(E)
    for (int p = 0; p < 2; ++p)
      CHECK(hv[p] == Catch::Approx(wh.C * wh.values[p] + wh.D / 1.0).margin(1e-12));
    // w-orthogonality of h^w: mean zero, unit w-norm
    double m0 = 0.0, m2 = 0.0;
    for (int p = 0; p < 2; ++p) {
      m0 += wh.values[p] * w[p] * sp2.mass(p);
      m2 += wh.values[p] * wh.values[p] * w[p] * sp2.mass(p);
    }
    CHECK(m0 == Catch::Approx(0.0).margin(1e-12));
    CHECK(m2 == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("random weight: decomposition identity and normalization within 1e-10") {
    Rng rng(23);
    Field w(32);
    for (auto& v : w) v = std::exp(rng.gaussian(0.0, 0.5));
    auto wsys = weighted_haar(basis, w);
    for (std::size_t i = 0; i < wsys.functions.size(); ++i) {
      const auto& wh = wsys.functions[i];
      const auto& h = basis.functions()[i];
      Field hv = basis.values(h);
      double muE = 0.0;
      for (int p : wh.support_E) muE += sp.mass(p);
      for (int p = 0; p < 32; ++p) {
        double chiE = contains(wh.support_E, p) ? 1.0 / muE : 0.0;
        CHECK(hv[p] == Catch::Approx(wh.C * wh.values[p] + wh.D * chiE).margin(1e-10));
      }
      double m0 = 0.0, m2 = 0.0;
      for (int p = 0; p < 32; ++p) {
        m0 += wh.values[p] * w[p] * sp.mass(p);
        m2 += wh.values[p] * wh.values[p] * w[p] * sp.mass(p);
      }
      CHECK(m0 == Catch::Approx(0.0).margin(1e-10));
      CHECK(m2 == Catch::Approx(1.0).margin(1e-10));
      // D formula from the weighted system: <w, h> / <w>_E
      double wh_inner = 0.0, wE = 0.0;
      for (int p = 0; p < 32; ++p) wh_inner += w[p] * hv[p] * sp.mass(p);
      for (int p : wh.support_E) wE += w[p] * sp.mass(p);
      CHECK(wh.D == Catch::Approx(wh_inner / (wE / muE)).margin(1e-10));
    }
    CHECK(wsys.c_bound < 64.0);  // C^2 <~ <w>_Q with a mild fitted constant
  }
  SECTION("D vanishes when w is constant on the cube") {
    Field w(32, 1.0);
    for (int p = 16; p < 32; ++p) w[p] = 5.0;  // constant on the left half cubes
    auto wsys = weighted_haar(basis, w);
    for (const auto& wh : wsys.functions) {
      bool const_on_E = true;
      for (int p : wh.support_E) const_on_E &= (w[p] == w[wh.support_E[0]]);
      if (const_on_E) CHECK(wh.D == Catch::Approx(0.0).margin(1e-12));
    }
  }
}
