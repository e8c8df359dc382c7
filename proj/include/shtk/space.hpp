#pragma once

#include <memory>
#include <mutex>

#include "shtk/common.hpp"

namespace shtk {

// Closed set of model geometries. Kernels and metrics must agree on the
// coordinate layout, so user-supplied metrics are deliberately not supported.
enum class MetricKind {
  Euclidean,   // R^d
  Heisenberg,  // H^n = C^n x R, coords (x_1..x_n, y_1..y_n, t)
  OmegaK,      // boundary parameter space C x R, coords (Re z, Im z, t)
  HalfLine,    // R_+, coords (x)
  HalfSpace,   // R_+^{d}, coords (x_1..x_{d-1}, x_d > 0)
};

inline const char* metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::Euclidean: return "euclidean";
    case MetricKind::Heisenberg: return "heisenberg";
    case MetricKind::OmegaK: return "omega-k";
    case MetricKind::HalfLine: return "halfline";
    case MetricKind::HalfSpace: return "halfspace";
  }
  return "?";
}

struct Ball {
  int center = -1;
  double radius = 0.0;
  IdSet members;  // { y : d(center,y) < radius }, sorted
};

namespace detail {

inline double euclidean_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}

// rho(g) = max{|zeta|, |t|^{1/2}} on H^n; d(a,b) = rho(b^{-1} o a).
inline double heisenberg_dist(const double* a, const double* b, int dim) {
  int n = (dim - 1) / 2;
  double z2 = 0.0;
  double im = 0.0;  // Im sum_j z_{b,j}~conj * ... computed as the group law twist
  for (int j = 0; j < n; ++j) {
    double xr = a[j] - b[j];
    double xi = a[n + j] - b[n + j];
    z2 += xr * xr + xi * xi;
    // Im( -z_b * conj(z_a) ) summed: t-coordinate of b^{-1} o a is
    // t_a - t_b - 2 Im sum_j z_{b,j} conj(z_{a,j})
    im += b[n + j] * a[j] - b[j] * a[n + j];
  }
  double tau = a[dim - 1] - b[dim - 1] - 2.0 * im;
  return std::max(std::sqrt(z2), std::sqrt(std::abs(tau)));
}

// Pseudometric on the boundary of Omega_k, principal branch of the k-th root.
inline double omegak_dist(const double* a, const double* b, int k) {
  Cplx z(a[0], a[1]), w(b[0], b[1]);
  double t = a[2], s = b[2];
  double zk = std::pow(std::abs(z), 2 * k);
  double wk = std::pow(std::abs(w), 2 * k);
  Cplx inner(0.5 * (zk + wk), 0.5 * (s - t));
  Cplx root = (k == 1) ? inner : std::pow(inner, 1.0 / double(k));
  return std::sqrt(std::abs(root - z * std::conj(w)));
}

}  // namespace detail

// Finite weighted point cloud with one of the model quasi-metrics. Immutable
// after construction; all pairwise distances are cached.
class Space {
 public:
  Space(std::vector<Field> points, Field masses, MetricKind metric, int omega_k = 1,
        std::string model = "", double model_param = 0.0)
      : pts_(std::move(points)), mass_(std::move(masses)), metric_(metric), omega_k_(omega_k),
        model_(std::move(model)), model_param_(model_param) {
    require(!pts_.empty(), "space needs at least one point");
    require(pts_.size() == mass_.size(), "points/masses size mismatch");
    dim_ = int(pts_[0].size());
    for (const auto& p : pts_) require(int(p.size()) == dim_, "inconsistent coordinate dimension");
    for (double m : mass_) require(m > 0.0 && std::isfinite(m), "masses must be strictly positive");
    if (metric_ == MetricKind::OmegaK) require(dim_ == 3, "omega-k expects coords (Re z, Im z, t)");
    if (metric_ == MetricKind::Heisenberg)
      require(dim_ >= 3 && dim_ % 2 == 1, "heisenberg expects coords (x,y,t) with dim 2n+1");
    build_distance_table();
  }

  int size() const { return int(pts_.size()); }
  int dim() const { return dim_; }
  MetricKind metric() const { return metric_; }
  int omega_k() const { return omega_k_; }
  const std::string& model() const { return model_; }
  double model_param() const { return model_param_; }
  const Field& point(int i) const { return pts_[i]; }
  double mass(int i) const { return mass_[i]; }
  const Field& masses() const { return mass_; }
  double total_mass() const { return total_mass_; }
  double diameter() const { return diameter_; }
  double min_gap() const { return min_gap_; }

  double distance(int i, int j) const { return dist_[std::size_t(i) * pts_.size() + j]; }

  double measure(const IdSet& set) const {
    double s = 0.0;
    for (int i : set) s += mass_[i];
    return s;
  }

  Ball ball(int center, double r) const {
    require(center >= 0 && center < size(), "unknown point id");
    require(r >= 0.0, "radius must be nonnegative");
    Ball b;
    b.center = center;
    b.radius = r;
    for (int j = 0; j < size(); ++j)
      if (distance(center, j) < r) b.members.push_back(j);
    return b;
  }

  double ball_measure(int center, double r) const {
    double s = 0.0;
    for (int j = 0; j < size(); ++j)
      if (distance(center, j) < r) s += mass_[j];
    return s;
  }

  // Point ids sorted by distance from `center` (self first), with distances
  // and the inverse permutation (rank of each point in the order).
  struct NeighborOrder {
    std::vector<int> order;
    Field dist;
    std::vector<int> rank;
  };
  const NeighborOrder& neighbors(int center) const {
    std::lock_guard<std::mutex> lock(lazy_->mu);
    if (!lazy_->nbr_done) {
      lazy_->nbr.resize(size());
      parallel_for(std::size_t(size()), [this](std::size_t c) {
        auto& nb = lazy_->nbr[c];
        nb.order.resize(size());
        std::iota(nb.order.begin(), nb.order.end(), 0);
        std::stable_sort(nb.order.begin(), nb.order.end(),
                         [&](int a, int b) { return distance(int(c), a) < distance(int(c), b); });
        nb.dist.resize(size());
        nb.rank.resize(size());
        for (int i = 0; i < size(); ++i) {
          nb.dist[i] = distance(int(c), nb.order[i]);
          nb.rank[nb.order[i]] = i;
        }
      });
      lazy_->nbr_done = true;
    }
    return lazy_->nbr[center];
  }

  // Tightest quasi-triangle constant on the stored points (exhaustive scan).
  double quasi_triangle_constant() const {
    require(size() >= 2, "quasi-triangle constant needs >= 2 points");
    std::lock_guard<std::mutex> lock(lazy_->mu);
    if (!lazy_->a0_done) {
      double a0 = 1.0;
      int n = size();
      for (int x = 0; x < n; ++x) {
        const double* dx = &dist_[std::size_t(x) * n];
        for (int y = x + 1; y < n; ++y) {
          double dxy = dx[y];
          const double* dy = &dist_[std::size_t(y) * n];
          for (int z = 0; z < n; ++z) {
            double denom = dx[z] + dy[z];
            if (denom > 0.0) a0 = std::max(a0, dxy / denom);
          }
        }
      }
      lazy_->a0 = a0;
      lazy_->a0_done = true;
    }
    return lazy_->a0;
  }

  // max over centers and grid radii of mu(B(x,2r))/mu(B(x,r)).
  double doubling_constant(const Field& radii) const {
    require(!radii.empty(), "doubling constant needs a radius grid");
    double best = 1.0;
    for (int x = 0; x < size(); ++x) {
      for (double r : radii) {
        require(r > 0.0, "radii must be positive");
        double small = ball_measure(x, r);
        if (small <= 0.0) continue;
        best = std::max(best, ball_measure(x, 2.0 * r) / small);
      }
    }
    return best;
  }

  // Least-squares fit (through the origin in log-log) of the growth exponent n
  // in mu(B(x, lambda r)) <= C lambda^n mu(B(x, r)); returns {n, C_max}.
  struct DimensionFit {
    double n = 0.0;
    double c = 1.0;
  };
  DimensionFit upper_dimension(const Field& lambdas, const Field& radii) const {
    for (double l : lambdas) require(l >= 1.0, "lambda grid values must be >= 1");
    double sxx = 0.0, sxy = 0.0;
    std::vector<std::pair<double, double>> samples;  // (log lambda, log ratio)
    int stride = std::max(1, size() / 128);
    for (int x = 0; x < size(); x += stride) {
      for (double r : radii) {
        double small = ball_measure(x, r);
        if (small <= 0.0) continue;
        for (double l : lambdas) {
          if (l <= 1.0) continue;
          double ratio = ball_measure(x, l * r) / small;
          double lx = std::log(l), ly = std::log(ratio);
          sxx += lx * lx;
          sxy += lx * ly;
          samples.emplace_back(lx, ly);
        }
      }
    }
    DimensionFit fit;
    if (sxx == 0.0 || sxy <= 0.0) return fit;  // degenerate: all ratios 1
    fit.n = sxy / sxx;
    for (auto& [lx, ly] : samples) fit.c = std::max(fit.c, std::exp(ly - fit.n * lx));
    return fit;
  }

  // Geometric grid of useful radii between the minimal gap and the diameter.
  Field default_radii(int count = 8) const {
    Field out;
    if (diameter_ <= 0.0 || min_gap_ <= 0.0) return {1.0};
    double lo = std::log(min_gap_ * 1.01), hi = std::log(diameter_ * 0.75);
    if (hi <= lo) return {min_gap_ * 1.01};
    for (int i = 0; i < count; ++i) out.push_back(std::exp(lo + (hi - lo) * (i + 0.5) / count));
    return out;
  }

 private:
  void build_distance_table() {
    int n = size();
    dist_.assign(std::size_t(n) * n, 0.0);
    parallel_for(std::size_t(n), [this, n](std::size_t i) {
      for (int j = 0; j < n; ++j) {
        if (int(i) == j) continue;
        dist_[i * n + j] = pair_distance(int(i), j);
      }
    });
    // enforce exact symmetry of the cache
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double d = dist_[std::size_t(i) * n + j];
        dist_[std::size_t(j) * n + i] = d;
        if (d <= 0.0) fail("distinct points at zero distance: ids " + std::to_string(i) + "," +
                           std::to_string(j));
        if (!std::isfinite(d)) fail("non-finite distance in table");
      }
    total_mass_ = std::accumulate(mass_.begin(), mass_.end(), 0.0);
    diameter_ = *std::max_element(dist_.begin(), dist_.end());
    min_gap_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) min_gap_ = std::min(min_gap_, dist_[std::size_t(i) * n + j]);
    if (n == 1) {
      diameter_ = 0.0;
      min_gap_ = 0.0;
    }
  }

  double pair_distance(int i, int j) const {
    const double* a = pts_[i].data();
    const double* b = pts_[j].data();
    switch (metric_) {
      case MetricKind::Euclidean:
      case MetricKind::HalfLine:
      case MetricKind::HalfSpace:
        return detail::euclidean_dist(a, b, dim_);
      case MetricKind::Heisenberg:
        return detail::heisenberg_dist(a, b, dim_);
      case MetricKind::OmegaK:
        return detail::omegak_dist(a, b, omega_k_);
    }
    return 0.0;
  }

  struct LazyState {
    std::mutex mu;
    bool a0_done = false;
    double a0 = 1.0;
    bool nbr_done = false;
    std::vector<NeighborOrder> nbr;
  };

  std::vector<Field> pts_;
  Field mass_;
  MetricKind metric_;
  int omega_k_;
  std::string model_;
  double model_param_ = 0.0;
  int dim_ = 0;
  Field dist_;
  double total_mass_ = 0.0, diameter_ = 0.0, min_gap_ = 0.0;
  mutable std::unique_ptr<LazyState> lazy_ = std::make_unique<LazyState>();
};

// ---------------------------------------------------------------------------
// Built-in model generators.

// Midpoint grid on [0,1]; avoids the origin so power weights stay positive.
inline Space make_grid1d(int n, bool unit_total_mass = true) {
  require(n >= 1, "n >= 1");
  std::vector<Field> pts(n);
  Field mass(n, unit_total_mass ? 1.0 / n : 1.0);
  for (int i = 0; i < n; ++i) pts[i] = {(i + 0.5) / n};
  return Space(std::move(pts), std::move(mass), MetricKind::Euclidean, 1, "grid1d");
}

inline Space make_grid2d(int side, bool unit_total_mass = true) {
  require(side >= 1, "side >= 1");
  int n = side * side;
  std::vector<Field> pts;
  pts.reserve(n);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) pts.push_back({(i + 0.5) / side, (j + 0.5) / side});
  Field mass(n, unit_total_mass ? 1.0 / n : 1.0);
  return Space(std::move(pts), std::move(mass), MetricKind::Euclidean, 1, "grid2d");
}

// Half-line (0,1] with the Bessel measure x^{2 lambda} dx.
inline Space make_halfline(int n, double lambda) {
  require(n >= 1, "n >= 1");
  std::vector<Field> pts(n);
  Field mass(n);
  double dx = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    double x = (i + 0.5) / n;
    pts[i] = {x};
    mass[i] = std::pow(x, 2.0 * lambda) * dx;
  }
  return Space(std::move(pts), std::move(mass), MetricKind::HalfLine, 1, "halfline", lambda);
}

// H^1 lattice: xy-grid on [0,1]^2, t-grid on [-1,1] with parabolic spacing.
inline Space make_heisenberg_lattice(int side_xy, int side_t) {
  require(side_xy >= 1 && side_t >= 1, "lattice sides >= 1");
  std::vector<Field> pts;
  pts.reserve(std::size_t(side_xy) * side_xy * side_t);
  for (int i = 0; i < side_xy; ++i)
    for (int j = 0; j < side_xy; ++j)
      for (int k = 0; k < side_t; ++k) {
        double x = (i + 0.5) / side_xy;
        double y = (j + 0.5) / side_xy;
        double t = -1.0 + 2.0 * (k + 0.5) / side_t;
        pts.push_back({x, y, t});
      }
  Field mass(pts.size(), 1.0 / double(pts.size()));
  return Space(std::move(pts), std::move(mass), MetricKind::Heisenberg, 1, "heisenberg1");
}

// Boundary of Omega_k parameterized by (z,t) in C x R; Lebesgue cell masses.
inline Space make_omegak_boundary(int side_z, int side_t, int k) {
  require(k >= 1, "k >= 1");
  std::vector<Field> pts;
  for (int i = 0; i < side_z; ++i)
    for (int j = 0; j < side_z; ++j)
      for (int l = 0; l < side_t; ++l) {
        double x = -1.0 + 2.0 * (i + 0.5) / side_z;
        double y = -1.0 + 2.0 * (j + 0.5) / side_z;
        double t = -1.0 + 2.0 * (l + 0.5) / side_t;
        pts.push_back({x, y, t});
      }
  double cell = (2.0 / side_z) * (2.0 / side_z) * (2.0 / side_t);
  Field mass(pts.size(), cell);
  return Space(std::move(pts), std::move(mass), MetricKind::OmegaK, k, "omegak");
}

// R_+^{d} grid on [0,1]^{d-1} x (0,1] with measure x_d^{2 lambda} dvol.
inline Space make_halfspace(int side, int dim, double lambda) {
  require(dim >= 2, "halfspace dim >= 2");
  std::vector<int> idx(dim, 0);
  std::vector<Field> pts;
  Field mass;
  double cell = std::pow(1.0 / side, dim);
  while (true) {
    Field p(dim);
    for (int d = 0; d < dim; ++d) p[d] = (idx[d] + 0.5) / side;
    pts.push_back(p);
    mass.push_back(std::pow(p[dim - 1], 2.0 * lambda) * cell);
    int d = 0;
    while (d < dim && ++idx[d] == side) idx[d++] = 0;
    if (d == dim) break;
  }
  return Space(std::move(pts), std::move(mass), MetricKind::HalfSpace, 1, "halfspace", lambda);
}

}  // namespace shtk
