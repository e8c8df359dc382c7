#pragma once

#include "shtk/bessel.hpp"
#include "shtk/space.hpp"

namespace shtk {

// ---------------------------------------------------------------------------
// Pointwise kernel evaluators for the application operators.

// Closed set of Lipschitz profiles for the Cauchy integral curve.
struct LipschitzProfile {
  enum class Kind { Zero, Sawtooth, Sine } kind = Kind::Zero;
  double param = 0.0;  // slope (sawtooth) or amplitude (sine)

  double operator()(double x) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Sawtooth: {
        double m = x - 2.0 * std::floor(x / 2.0);  // in [0,2)
        return param * (1.0 - std::abs(m - 1.0));
      }
      case Kind::Sine: return param * std::sin(x);
    }
    return 0.0;
  }
  double lip_norm() const { return kind == Kind::Zero ? 0.0 : std::abs(param); }
  static LipschitzProfile zero() { return {}; }
  static LipschitzProfile sawtooth(double slope) { return {Kind::Sawtooth, slope}; }
  static LipschitzProfile sine(double amp) { return {Kind::Sine, amp}; }
};

inline Cplx cauchy_kernel(const LipschitzProfile& A, double x, double y) {
  return (1.0 / M_PI) / Cplx(x - y, A(x) - A(y));
}

inline double hilbert_kernel(double x, double y) { return 1.0 / (M_PI * (x - y)); }

// Heisenberg group product/inverse on coordinate vectors (x_1..x_n,y_1..y_n,t).
inline Field heisenberg_left_quotient(const Field& x, const Field& y) {
  int n = (int(x.size()) - 1) / 2;
  Field g(x.size());
  double twist = 0.0;
  for (int j = 0; j < n; ++j) {
    g[j] = x[j] - y[j];
    g[n + j] = x[n + j] - y[n + j];
    twist += y[n + j] * x[j] - y[j] * x[n + j];  // Im(z_y conj(z_x))
  }
  g[2 * n] = x[2 * n] - y[2 * n] - 2.0 * twist;
  return g;
}

// K([zeta,t]) = c (t + i |zeta|^2)^{-n-1}, c = 2^{n-1} i^{n+1} n! / pi^{n+1}.
inline Cplx cauchy_szego_kernel_at(int n, const Field& g) {
  double z2 = 0.0;
  for (int j = 0; j < n; ++j) z2 += g[j] * g[j] + g[n + j] * g[n + j];
  Cplx w(g[2 * n], z2);
  Cplx ipow_n1 = std::pow(Cplx(0.0, 1.0), n + 1);
  double fact = std::tgamma(double(n) + 1.0);
  Cplx c = std::pow(2.0, n - 1) * ipow_n1 * fact / std::pow(M_PI, n + 1);
  Cplx wp = 1.0;
  for (int i = 0; i < n + 1; ++i) wp *= w;
  return c / wp;
}

inline Cplx cauchy_szego_kernel(int n, const Field& x, const Field& y) {
  require(int(x.size()) == 2 * n + 1 && x.size() == y.size(), "bad Heisenberg coords");
  return cauchy_szego_kernel_at(n, heisenberg_left_quotient(x, y));
}

// Szego kernel on the boundary of Omega_k, points (Re z, Im z, t).
struct SzegoValue {
  Cplx value;
  bool branch_flag = false;  // inner argument touched the branch cut
};

inline SzegoValue szego_kernel(int k, const Field& zeta, const Field& omega) {
  Cplx z(zeta[0], zeta[1]), w(omega[0], omega[1]);
  double t = zeta[2], s = omega[2];
  double zk = std::pow(std::abs(z), 2 * k);
  double wk = std::pow(std::abs(w), 2 * k);
  Cplx inner(0.5 * (zk + wk), 0.5 * (s - t));
  SzegoValue out;
  out.branch_flag = (inner.real() <= 0.0 && std::abs(inner.imag()) < 1e-300 * std::abs(inner.real()));
  Cplx root = (k == 1) ? inner : std::pow(inner, 1.0 / double(k));
  Cplx base = root - z * std::conj(w);
  Cplx tail = (k == 1) ? Cplx(1.0, 0.0) : std::pow(inner, double(k - 1) / double(k));
  out.value = (1.0 / (4.0 * M_PI * M_PI)) / (base * base * tail);
  return out;
}

inline double szego_pseudometric(int k, const Field& zeta, const Field& omega) {
  return detail::omegak_dist(zeta.data(), omega.data(), k);
}

// Volume of the pseudometric ball B_zeta(delta) on the boundary of Omega_k.
inline double szego_ball_volume(int k, const Field& zeta, double delta) {
  double zmod = std::hypot(zeta[0], zeta[1]);
  double s = (k == 1) ? 1.0 : std::pow(std::sin(M_PI / k), 2 * k - 2);
  return 4.0 * M_PI * delta * delta *
         (0.25 * s * std::pow(zmod, 2 * k - 2) * delta * delta + 0.5 * std::pow(delta, 2 * k));
}

// ---------------------------------------------------------------------------
// Bessel heat kernel and Riesz kernels (log-substituted adaptive Simpson).

// W_t^lambda(x,y) = ((xy)^{-lambda+1/2}/2t) e^{-(x^2+y^2)/4t} I_{lambda-1/2}(xy/2t)
inline double bessel_heat_kernel(double lambda, double t, double x, double y) {
  require(t > 0.0 && x > 0.0 && y > 0.0, "heat kernel needs t,x,y > 0");
  double z = x * y / (2.0 * t);
  double scaled = bessel_i_scaled(lambda - 0.5, z);
  // e^{-(x^2+y^2)/4t} e^{z} = e^{-(x-y)^2/4t}
  return std::pow(x * y, 0.5 - lambda) / (2.0 * t) * std::exp(-(x - y) * (x - y) / (4.0 * t)) *
         scaled;
}

// d/dx W_t^lambda(x,y), expressed through I_{lambda +- 1/2}.
inline double bessel_heat_kernel_dx(double lambda, double t, double x, double y) {
  double z = x * y / (2.0 * t);
  double ip = bessel_i_scaled(lambda + 0.5, z);
  double im = bessel_i_scaled(lambda - 0.5, z);
  return std::pow(x * y, 0.5 - lambda) / (4.0 * t * t) *
         std::exp(-(x - y) * (x - y) / (4.0 * t)) * (y * ip - x * im);
}

namespace detail {

struct QuadOptions {
  double rel_tol = 1e-8;
  int max_depth = 32;
};

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Integrates f over [a,b] split into ~unit-width panels; tolerance is set
// relative to a coarse estimate of the total variation.
template <typename F>
double panel_integrate(const F& f, double a, double b, const QuadOptions& opt) {
  int panels = std::max(8, int(std::ceil((b - a) / 1.5)));
  double coarse = 0.0;
  Field fa(panels + 1);
  for (int i = 0; i <= panels; ++i) fa[i] = f(a + (b - a) * i / panels);
  for (int i = 0; i < panels; ++i)
    coarse += 0.5 * (std::abs(fa[i]) + std::abs(fa[i + 1])) * (b - a) / panels;
  double tol = std::max(coarse, 1e-300) * opt.rel_tol;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    double pa = a + (b - a) * i / panels;
    double pb = a + (b - a) * (i + 1) / panels;
    double pm = 0.5 * (pa + pb);
    double fm = f(pm);
    double whole = (pb - pa) / 6.0 * (fa[i] + 4.0 * fm + fa[i + 1]);
    total += adaptive_simpson(f, pa, pb, fa[i], fm, fa[i + 1], whole, tol / panels, opt.max_depth);
  }
  if (!std::isfinite(total)) fail("quadrature did not converge (non-finite result)");
  return total;
}

}  // namespace detail

// R_lambda(x,y) = (1/sqrt(pi)) int_0^inf d/dx W_t^lambda(x,y) dt/sqrt(t)
inline double bessel_riesz_kernel_1d(double lambda, double x, double y,
                                     const detail::QuadOptions& opt = {}) {
  require(x > 0.0 && y > 0.0, "half-line points must be positive");
  require(x != y, "kernel undefined on the diagonal");
  double d2 = (x - y) * (x - y);
  double scale = std::max({x * x, y * y, d2, 1e-30});
  double u_lo = std::log(d2 / 3000.0);
  double u_hi = std::log(scale) + 12.0 * std::log(10.0) / (lambda + 1.0);
  auto g = [&](double u) {
    double t = std::exp(u);
    return bessel_heat_kernel_dx(lambda, t, x, y) * std::sqrt(t);  // dt/sqrt(t) = sqrt(t) du
  };
  return detail::panel_integrate(g, u_lo, u_hi, opt) / std::sqrt(M_PI);
}

// Riesz kernels for the half-space Bessel operator; j in 1..n+1 (1-based),
// points (x_1..x_n, x_{n+1}) with x_{n+1} > 0.
inline double bessel_riesz_kernel_hd(int n, double lambda, int j, const Field& x, const Field& y,
                                     const detail::QuadOptions& opt = {}) {
  require(int(x.size()) == n + 1 && x.size() == y.size(), "coordinate dimension mismatch");
  require(j >= 1 && j <= n + 1, "component out of range");
  require(x.back() > 0.0 && y.back() > 0.0, "x_{n+1} must be positive");
  double dist2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dist2 += (x[i] - y[i]) * (x[i] - y[i]);
  require(dist2 > 0.0, "kernel undefined on the diagonal");
  double prime2 = 0.0;  // |x' - y'|^2
  for (int i = 0; i < n; ++i) prime2 += (x[i] - y[i]) * (x[i] - y[i]);
  double a = x[n], b = y[n];
  double q = 0.5 * n + lambda + 1.0;  // tail decay exponent in t
  double scale = std::max({a * a, b * b, dist2, 1e-30});
  double u_lo = std::log(dist2 / 3000.0);
  double u_hi = std::log(scale) + 12.0 * std::log(10.0) / q;
  auto g = [&](double u) {
    double t = std::exp(u);
    double gauss = std::pow(4.0 * M_PI * t, -0.5 * n) * std::exp(-prime2 / (4.0 * t));
    double core;
    if (j <= n) {
      core = (y[j - 1] - x[j - 1]) / (2.0 * t) * bessel_heat_kernel(lambda, t, a, b);
    } else {
      core = bessel_heat_kernel_dx(lambda, t, a, b);
    }
    return gauss * core * std::sqrt(t);
  };
  return detail::panel_integrate(g, u_lo, u_hi, opt) / std::sqrt(M_PI);
}

// ---------------------------------------------------------------------------
// Kernels bound to a Space: matrix realization, apply, adjoint, commutators.

enum class KernelKind { Hilbert, Cauchy, CauchySzego, SzegoOmega, Bessel1d, BesselHd };

inline const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::Hilbert: return "hilbert";
    case KernelKind::Cauchy: return "cauchy";
    case KernelKind::CauchySzego: return "cauchy-szego";
    case KernelKind::SzegoOmega: return "szego-omega";
    case KernelKind::Bessel1d: return "bessel1d";
    case KernelKind::BesselHd: return "bessel-hd";
  }
  return "?";
}

struct Kernel {
  KernelKind kind = KernelKind::Hilbert;
  LipschitzProfile profile;  // cauchy
  double lambda = 0.0;       // bessel
  int heis_n = 1;            // cauchy-szego
  int omega_k = 1;           // szego
  int component = 1;         // bessel-hd direction, 1-based
  int hd_n = 1;              // bessel-hd: space dim = hd_n + 1

  static Kernel hilbert() { return {}; }
  static Kernel cauchy(LipschitzProfile a) {
    Kernel k;
    k.kind = KernelKind::Cauchy;
    k.profile = a;
    return k;
  }
  static Kernel cauchy_szego(int n) {
    Kernel k;
    k.kind = KernelKind::CauchySzego;
    k.heis_n = n;
    return k;
  }
  static Kernel szego(int omega_k) {
    Kernel k;
    k.kind = KernelKind::SzegoOmega;
    k.omega_k = omega_k;
    return k;
  }
  static Kernel bessel1d(double lambda) {
    Kernel k;
    k.kind = KernelKind::Bessel1d;
    k.lambda = lambda;
    return k;
  }
  static Kernel bessel_hd(int n, double lambda, int j) {
    Kernel k;
    k.kind = KernelKind::BesselHd;
    k.hd_n = n;
    k.lambda = lambda;
    k.component = j;
    return k;
  }

  bool is_real() const {
    return kind == KernelKind::Hilbert || kind == KernelKind::Bessel1d ||
           kind == KernelKind::BesselHd;
  }

  // Smoothness modulus omega(t) = t^delta; all models carry delta = 1.
  double smoothness_delta() const { return 1.0; }

  void check_model(const Space& sp) const {
    switch (kind) {
      case KernelKind::Hilbert:
      case KernelKind::Cauchy:
        require(sp.dim() == 1, "1-d kernel on a non-1-d space");
        break;
      case KernelKind::CauchySzego:
        require(sp.metric() == MetricKind::Heisenberg && sp.dim() == 2 * heis_n + 1,
                "cauchy-szego kernel needs the matching Heisenberg space");
        break;
      case KernelKind::SzegoOmega:
        require(sp.metric() == MetricKind::OmegaK && sp.omega_k() == omega_k,
                "szego kernel needs the matching omega-k space");
        break;
      case KernelKind::Bessel1d:
        require(sp.dim() == 1 && sp.metric() == MetricKind::HalfLine,
                "bessel1d kernel needs a half-line space");
        break;
      case KernelKind::BesselHd:
        require(sp.metric() == MetricKind::HalfSpace && sp.dim() == hd_n + 1,
                "bessel-hd kernel needs the matching half-space");
        break;
    }
  }

  Cplx eval(const Space& sp, int i, int j) const {
    require(i != j, "kernel undefined on the diagonal");
    const Field& x = sp.point(i);
    const Field& y = sp.point(j);
    switch (kind) {
      case KernelKind::Hilbert: return hilbert_kernel(x[0], y[0]);
      case KernelKind::Cauchy: return cauchy_kernel(profile, x[0], y[0]);
      case KernelKind::CauchySzego: return cauchy_szego_kernel(heis_n, x, y);
      case KernelKind::SzegoOmega: return szego_kernel(omega_k, x, y).value;
      case KernelKind::Bessel1d: return bessel_riesz_kernel_1d(lambda, x[0], y[0]);
      case KernelKind::BesselHd: return bessel_riesz_kernel_hd(hd_n, lambda, component, x, y);
    }
    return 0.0;
  }
};

// Dense discrete operator T f(x) = sum_{y != x} K(x,y) f(y) mu_y (diagonal
// omitted: discrete principal value). The adjoint is the exact transpose.
class DiscreteOperator {
 public:
  DiscreteOperator(const Kernel& kernel, const Space& space) : space_(&space), kernel_(kernel) {
    kernel.check_model(space);
    int n = space.size();
    re_.assign(std::size_t(n) * n, 0.0);
    real_ = kernel.is_real();
    if (!real_) im_.assign(std::size_t(n) * n, 0.0);
    parallel_for(std::size_t(n), [&](std::size_t i) {
      for (int j = 0; j < n; ++j) {
        if (int(i) == j) continue;
        Cplx k = kernel.eval(space, int(i), j) * space.mass(j);
        re_[i * n + j] = k.real();
        if (!real_) im_[i * n + j] = k.imag();
      }
    });
  }

  // Zero operator (K = 0) and custom matrices for tests/derived operators.
  DiscreteOperator(const Space& space, Field re, Field im)
      : space_(&space), re_(std::move(re)), im_(std::move(im)), real_(im_.empty()) {}

  const Space& space() const { return *space_; }
  const Kernel& kernel() const { return kernel_; }
  bool is_real() const { return real_; }
  int size() const { return space_->size(); }
  Cplx entry(int i, int j) const {
    std::size_t idx = std::size_t(i) * size() + j;
    return Cplx(re_[idx], real_ ? 0.0 : im_[idx]);
  }
  // Kernel value (matrix entry without the mass factor).
  Cplx kernel_entry(int i, int j) const { return entry(i, j) / space_->mass(j); }

  CField apply(const Field& f) const { return mul(f, false); }
  CField apply(const CField& f) const { return mul(f, false); }
  // T* f with the transposed kernel K(y,x), so that the mu-weighted bilinear
  // pairing satisfies <Tf, g> = <f, T*g>: (T*f)_j = sum_i K(i,j) f_i mu_i.
  CField adjoint_apply(const Field& f) const { return mul(f, true); }
  CField adjoint_apply(const CField& f) const { return mul(f, true); }
  // Plain matrix transpose y_j = sum_i M_ij f_i (no mass factors); used by
  // the operator-norm power iteration.
  CField transpose_apply(const CField& f) const { return raw_mul(f, true); }

  // Real part / imaginary part as real operators (lower-bound machinery).
  DiscreteOperator component(bool imaginary) const {
    if (!imaginary) return DiscreteOperator(*space_, re_, {});
    require(!real_, "real kernel has no imaginary component");
    return DiscreteOperator(*space_, im_, {});
  }

  // Matrix of the iterated commutator: entries (b_i - b_j)^m K(i,j) mu_j.
  // Exactly zero when b is constant.
  DiscreteOperator commutator_matrix(const Field& b, int m) const {
    int n = size();
    Field re(std::size_t(n) * n, 0.0), im;
    if (!real_) im.assign(std::size_t(n) * n, 0.0);
    parallel_for(std::size_t(n), [&](std::size_t i) {
      for (int j = 0; j < n; ++j) {
        double w = ipow(b[i] - b[j], m);
        re[i * n + j] = w * re_[i * n + j];
        if (!real_) im[i * n + j] = w * im_[i * n + j];
      }
    });
    return DiscreteOperator(*space_, std::move(re), std::move(im));
  }

 private:
  template <typename FieldT>
  CField raw_mul(const FieldT& f, bool transpose) const {
    int n = size();
    require(int(f.size()) == n, "field size mismatch");
    CField out(n, Cplx(0.0, 0.0));
    for (int i = 0; i < n; ++i) {
      Cplx acc(0.0, 0.0);
      for (int j = 0; j < n; ++j) {
        std::size_t idx = transpose ? std::size_t(j) * n + i : std::size_t(i) * n + j;
        Cplx k(re_[idx], real_ ? 0.0 : im_[idx]);
        acc += k * f[j];
      }
      out[i] = acc;
    }
    return out;
  }

  template <typename FieldT>
  CField mul(const FieldT& f, bool adjoint) const {
    int n = size();
    require(int(f.size()) == n, "field size mismatch");
    if (!adjoint) return raw_mul(f, false);
    // matrix entries bundle mu_j into column j; the bilinear adjoint needs
    // (T*f)_j = sum_i M_ij (mu_i/mu_j) f_i
    CField scaled(n);
    for (int i = 0; i < n; ++i) scaled[i] = f[i] * space_->mass(i);
    CField out = raw_mul(scaled, true);
    for (int j = 0; j < n; ++j) out[j] /= space_->mass(j);
    return out;
  }

  const Space* space_;
  Kernel kernel_;
  Field re_, im_;
  bool real_ = true;
};

// T_b^m f via the unrolled kernel form sum_y (b(x)-b(y))^m K(x,y) f(y) mu_y.
inline CField commutator(const DiscreteOperator& T, const Field& b, int m, const Field& f) {
  require(m >= 1, "commutator order m >= 1");
  int n = T.size();
  CField out(n, Cplx(0.0, 0.0));
  for (int i = 0; i < n; ++i) {
    Cplx acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      acc += ipow(b[i] - b[j], m) * T.entry(i, j) * f[j];
    }
    out[i] = acc;
  }
  return out;
}

// Inductive form [b, T_b^{m-1}] for cross-checking.
inline CField commutator_recursive(const DiscreteOperator& T, const Field& b, int m,
                                   const Field& f) {
  CField cur(f.begin(), f.end());
  // represent T_b^k f by keeping the full linear action: iterate on fields
  std::function<CField(int, const CField&)> tb = [&](int order, const CField& g) -> CField {
    if (order == 0) return T.apply(g);
    CField bg(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) bg[i] = b[i] * g[i];
    CField left = tb(order - 1, g);
    CField right = tb(order - 1, bg);
    CField out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = b[i] * left[i] - right[i];
    return out;
  };
  return tb(m, cur);
}

// Binomial form sum_k (-1)^k C(m,k) T(b^k f) b^{m-k}.
inline CField commutator_binomial(const DiscreteOperator& T, const Field& b, int m,
                                  const Field& f) {
  int n = T.size();
  CField out(n, Cplx(0.0, 0.0));
  for (int k = 0; k <= m; ++k) {
    Field bk(n);
    for (int i = 0; i < n; ++i) bk[i] = ipow(b[i], k) * f[i];
    CField t = T.apply(bk);
    double c = binomial(m, k) * (k % 2 == 0 ? 1.0 : -1.0);
    for (int i = 0; i < n; ++i) out[i] += c * t[i] * ipow(b[i], m - k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Maximal operators.

// Hardy-Littlewood maximal function over all realizable balls (exact).
inline Field maximal_function(const Space& sp, const Field& f) {
  int n = sp.size();
  // per center: running prefix averages of |f|, then suffix maxima
  std::vector<Field> suffix_max(n);
  for (int c = 0; c < n; ++c) {
    const auto& nb = sp.neighbors(c);
    Field avg(n);
    double ms = 0.0, fs = 0.0;
    for (int i = 0; i < n; ++i) {
      ms += sp.mass(nb.order[i]);
      fs += std::abs(f[nb.order[i]]) * sp.mass(nb.order[i]);
      avg[i] = fs / ms;
    }
    suffix_max[c].assign(n, 0.0);
    double run = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      run = std::max(run, avg[i]);
      suffix_max[c][i] = run;
    }
  }
  Field out(n, 0.0);
  for (int x = 0; x < n; ++x) {
    double best = 0.0;
    for (int c = 0; c < n; ++c) best = std::max(best, suffix_max[c][sp.neighbors(c).rank[x]]);
    out[x] = best;
  }
  return out;
}

// Maximal truncated singular integral T* f(x) = sup_eps |sum_{d>eps} K f mu|.
inline Field truncated_maximal(const DiscreteOperator& T, const Field& f) {
  const Space& sp = T.space();
  int n = sp.size();
  Field out(n, 0.0);
  for (int x = 0; x < n; ++x) {
    const auto& nb = sp.neighbors(x);
    Cplx acc(0.0, 0.0);
    double best = 0.0;
    // add terms from farthest inward; every cut between distinct distances is a valid eps
    for (int i = n - 1; i >= 1; --i) {
      int y = nb.order[i];
      acc += T.entry(x, y) * f[y];
      if (i == 1 || nb.dist[i - 1] < nb.dist[i]) best = std::max(best, std::abs(acc));
    }
    out[x] = best;
  }
  return out;
}

// Enlargement constant C_{j0} from the measured geometry: smallest j with
// 2^j > max{3 A0, 2 A0 C_adj}, then C = 2^{j+2} A0.
inline double enlargement_constant(double a0, double c_adj) {
  int j = 0;
  while (std::pow(2.0, j) <= std::max(3.0 * a0, 2.0 * a0 * c_adj)) ++j;
  return std::pow(2.0, j + 2) * a0;
}

// Grand maximal truncated operator over centered balls:
// sup_{r} max_{xi in B(x,r)} |T(f chi_{X \ C B(x,r)})(xi)|.
inline Field grand_maximal(const DiscreteOperator& T, const Field& f, double enlargement,
                           int radius_grid = 12) {
  const Space& sp = T.space();
  int n = sp.size();
  CField tf = T.apply(f);
  Field out(n, 0.0);
  for (int x = 0; x < n; ++x) {
    const auto& nb = sp.neighbors(x);
    double rmin = (n > 1) ? nb.dist[1] : 1.0;
    double rmax = sp.diameter() * 1.01 + 1e-300;
    double best = 0.0;
    for (int g = 0; g < radius_grid; ++g) {
      double r = rmin * std::pow(rmax / std::max(rmin, 1e-300), (g + 0.5) / radius_grid);
      // masked = T(f chi_{C B}) evaluated at members of B
      IdSet inner, outer;
      for (int i = 0; i < n; ++i) {
        if (sp.distance(x, i) < r) inner.push_back(i);
        if (sp.distance(x, i) < enlargement * r) outer.push_back(i);
      }
      for (int xi : inner) {
        Cplx masked(0.0, 0.0);
        for (int y : outer)
          if (y != xi) masked += T.entry(xi, y) * f[y];
        best = std::max(best, std::abs(tf[xi] - masked));
      }
    }
    out[x] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel certificates.

struct NondegeneracySample {
  int center = -1;
  double radius = 0.0;
  int witness = -1;  // best annulus point, -1 if none
  double c0 = 0.0;   // 1/(|K| mu(B)) at the witness
  bool pass = false;
};

struct BallPairCertificate {
  int center = -1;
  double radius = 0.0;
  int companion = -1;       // center of the companion ball
  bool imaginary = false;   // which component carries the floor
  int sign = 0;             // constant sign of that component on B x B~
  double floor_c = 0.0;     // 1/(min|K_comp| mu(B))
  bool pass = false;
};

struct NondegeneracyReport {
  double c0 = 0.0;    // minimal uniform constant over passing samples
  double c_bar = 0.0; // smallest annulus factor that worked
  double pass_fraction = 0.0;
  std::vector<NondegeneracySample> samples;
  std::vector<BallPairCertificate> certificates;
  double certificate_fraction = 0.0;
};

// Searches annuli B(x, Cr) \ B(x, r) for kernel mass, then upgrades to the
// sign-constant companion-ball certificate on a subsample.
inline NondegeneracyReport nondegeneracy_check(const DiscreteOperator& T, int max_centers = 24,
                                               int radii_per_center = 4,
                                               const Field& cbar_grid = {2, 4, 8, 16, 32}) {
  const Space& sp = T.space();
  int n = sp.size();
  NondegeneracyReport rep;
  struct Probe {
    int x;
    double r;
  };
  std::vector<Probe> probes;
  int stride = std::max(1, n / max_centers);
  for (int x = 0; x < n; x += stride) {
    const auto& nb = sp.neighbors(x);
    for (int g = 0; g < radii_per_center; ++g) {
      // radii spanning small to mid scales; annulus must stay inside the space
      double q = 0.02 + 0.4 * g / std::max(1, radii_per_center - 1);
      int pos = std::max(1, int(q * (n - 1)));
      probes.push_back({x, nb.dist[pos] * 1.0001});
    }
  }

  double best_cbar = cbar_grid.empty() ? 2.0 : cbar_grid.back();
  std::vector<NondegeneracySample> best_samples;
  double best_fraction = -1.0;
  for (double cbar : cbar_grid) {
    std::vector<NondegeneracySample> samples;
    int pass = 0;
    for (const auto& pr : probes) {
      NondegeneracySample s;
      s.center = pr.x;
      s.radius = pr.r;
      double muB = sp.ball_measure(pr.x, pr.r);
      double best_k = 0.0;
      for (int y = 0; y < n; ++y) {
        if (y == pr.x) continue;
        double d = sp.distance(pr.x, y);
        if (d >= pr.r && d < cbar * pr.r) {
          double a = std::abs(T.kernel_entry(pr.x, y));
          if (a > best_k) {
            best_k = a;
            s.witness = y;
          }
        }
      }
      if (s.witness >= 0 && best_k > 0.0 && muB > 0.0) {
        s.c0 = 1.0 / (best_k * muB);
        s.pass = true;
        ++pass;
      }
      samples.push_back(s);
    }
    double frac = probes.empty() ? 0.0 : double(pass) / probes.size();
    if (frac > best_fraction + 1e-12) {
      best_fraction = frac;
      best_cbar = cbar;
      best_samples = samples;
    }
    if (frac >= 0.95) {  // smallest workable annulus factor
      best_fraction = frac;
      best_cbar = cbar;
      best_samples = samples;
      break;
    }
  }
  rep.samples = std::move(best_samples);
  rep.c_bar = best_cbar;
  rep.pass_fraction = best_fraction < 0 ? 0.0 : best_fraction;
  for (const auto& s : rep.samples)
    if (s.pass) rep.c0 = std::max(rep.c0, s.c0);

  // Companion-ball certificates (annulus search maximizing the kernel floor).
  int done = 0, ok = 0;
  for (std::size_t i = 0; i < rep.samples.size() && done < 12; i += 2, ++done) {
    const auto& s = rep.samples[i];
    BallPairCertificate cert;
    cert.center = s.center;
    cert.radius = s.radius;
    Ball B = sp.ball(s.center, s.radius);
    double muB = sp.measure(B.members);
    double a1 = 3.0, a2 = 3.0 * std::max(2.0, rep.c_bar);
    double best_floor = 0.0;
    for (int y0 = 0; y0 < n; ++y0) {
      double d = sp.distance(s.center, y0);
      if (d < a1 * s.radius || d > a2 * s.radius) continue;
      Ball Bt = sp.ball(y0, s.radius);
      if (Bt.members.empty()) continue;
      for (int comp = 0; comp < (T.is_real() ? 1 : 2); ++comp) {
        double floor = std::numeric_limits<double>::infinity();
        int sign = 0;
        bool constant = true;
        for (int xb : B.members) {
          for (int yb : Bt.members) {
            if (xb == yb) { constant = false; break; }
            Cplx k = T.kernel_entry(xb, yb);
            double v = comp == 0 ? k.real() : k.imag();
            int sg = v > 0 ? 1 : (v < 0 ? -1 : 0);
            if (sg == 0) { constant = false; break; }
            if (sign == 0) sign = sg;
            if (sg != sign) { constant = false; break; }
            floor = std::min(floor, std::abs(v));
          }
          if (!constant) break;
        }
        if (constant && std::isfinite(floor) && floor > best_floor) {
          best_floor = floor;
          cert.companion = y0;
          cert.imaginary = comp == 1;
          cert.sign = sign;
          cert.floor_c = 1.0 / (floor * muB);
          cert.pass = true;
        }
      }
    }
    if (cert.pass) ++ok;
    rep.certificates.push_back(cert);
  }
  rep.certificate_fraction = done ? double(ok) / done : 0.0;
  return rep;
}

struct SmoothnessFit {
  double delta = 1.0;
  double worst_c = 0.0;    // max |K(x,y)-K(x',y)| V(x,y) / omega(d(x,x')/d(x,y))
  int triples = 0;
};

inline SmoothnessFit kernel_smoothness_check(const DiscreteOperator& T, int max_triples = 4000,
                                             unsigned seed = 1234) {
  const Space& sp = T.space();
  int n = sp.size();
  SmoothnessFit fit;
  fit.delta = T.kernel().smoothness_delta();
  double a0 = n <= 512 ? sp.quasi_triangle_constant() : 2.0;
  Rng rng(seed);
  for (int it = 0; it < max_triples * 10 && fit.triples < max_triples; ++it) {
    int x = rng.index(n), y = rng.index(n);
    if (x == y) continue;
    const auto& nb = sp.neighbors(x);
    int xp = nb.order[1 + rng.index(std::max(1, n / 8))];
    if (xp == y || xp == x) continue;
    double dxy = sp.distance(x, y), dxxp = sp.distance(x, xp);
    if (dxxp > dxy / (2.0 * a0)) continue;
    double v = sp.ball_measure(x, dxy);
    double diff = std::abs(T.kernel_entry(x, y) - T.kernel_entry(xp, y)) +
                  std::abs(T.kernel_entry(y, x) - T.kernel_entry(y, xp));
    double omega = std::pow(dxxp / dxy, fit.delta);
    if (omega <= 0.0) continue;
    fit.worst_c = std::max(fit.worst_c, diff * v / omega);
    fit.triples++;
  }
  return fit;
}

// Size certificate sup |K(x,y)| mu(B(x,d(x,y))) over sampled pairs.
inline double kernel_size_certificate(const DiscreteOperator& T, int max_pairs = 4000,
                                      unsigned seed = 99) {
  const Space& sp = T.space();
  int n = sp.size();
  Rng rng(seed);
  double worst = 0.0;
  for (int it = 0; it < max_pairs; ++it) {
    int x = rng.index(n), y = rng.index(n);
    if (x == y) continue;
    double v = sp.ball_measure(x, sp.distance(x, y));
    worst = std::max(worst, std::abs(T.kernel_entry(x, y)) * v);
  }
  return worst;
}

}  // namespace shtk
