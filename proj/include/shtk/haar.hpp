#pragma once

#include <map>

#include "shtk/dyadic.hpp"

namespace shtk {

// Cancellative Haar function on a cube: h = a * chi_{child_eps} - b * chi_{tail},
// where tail is the suffix union of the ordered children after child_eps.
struct HaarFunction {
  int cube = -1;
  int epsilon = 0;             // 1..M_Q-1
  double a = 0.0, b = 0.0;     // scaling coefficients
  std::vector<double> child_values;  // value on each child, aligned with cube children order
};

// Coefficient key: (cube index, epsilon); epsilon = 0 marks the coarse-level
// averaging functions kept so reconstruction is exact on finite spaces.
struct HaarCoefficients {
  std::map<std::pair<int, int>, double> c;
  double& at(int cube, int eps) { return c[{cube, eps}]; }
  double get(int cube, int eps) const {
    auto it = c.find({cube, eps});
    return it == c.end() ? 0.0 : it->second;
  }
};

class HaarBasis {
 public:
  explicit HaarBasis(const DyadicSystem& system) : sys_(&system) {
    const auto& cubes = system.cubes();
    child_order_.resize(cubes.size());
    for (std::size_t qi = 0; qi < cubes.size(); ++qi) {
      const Cube& q = cubes[qi];
      if (q.children.size() < 2) continue;
      // deterministic child order: ascending center id
      std::vector<int> ord(q.children.size());
      std::iota(ord.begin(), ord.end(), 0);
      std::sort(ord.begin(), ord.end(), [&](int a, int b) {
        return cubes[q.children[a]].center < cubes[q.children[b]].center;
      });
      child_order_[qi] = ord;
      int m = int(q.children.size());
      Field cmass(m);
      for (int j = 0; j < m; ++j) cmass[j] = system.cube_measure(q.children[ord[j]]);
      Field tail(m + 1, 0.0);  // tail[j] = mass of children j..m-1 in haar order
      for (int j = m - 1; j >= 0; --j) tail[j] = tail[j + 1] + cmass[j];
      for (int eps = 1; eps <= m - 1; ++eps) {
        // E_eps = children eps-1 .. m-1 (mass tail[eps-1]); Q_eps = child eps-1.
        double mQ = cmass[eps - 1];
        double mE = tail[eps - 1];
        double mE1 = tail[eps];
        HaarFunction h;
        h.cube = int(qi);
        h.epsilon = eps;
        h.a = std::sqrt(mE1 / (mQ * mE));
        h.b = std::sqrt(mQ / (mE * mE1));
        h.child_values.assign(m, 0.0);
        h.child_values[ord[eps - 1]] = h.a;
        for (int j = eps; j < m; ++j) h.child_values[ord[j]] = -h.b;
        index_.emplace(std::make_pair(int(qi), eps), int(functions_.size()));
        functions_.push_back(std::move(h));
      }
    }
  }

  const DyadicSystem& system() const { return *sys_; }
  const std::vector<HaarFunction>& functions() const { return functions_; }

  const HaarFunction* function(int cube, int eps) const {
    auto it = index_.find({cube, eps});
    return it == index_.end() ? nullptr : &functions_[it->second];
  }

  // Child indices of a cube in haar (center-ascending) order.
  const std::vector<int>& child_order(int cube) const { return child_order_[cube]; }

  // Pointwise values of a cancellative function.
  Field values(const HaarFunction& h) const {
    Field v(sys_->space().size(), 0.0);
    const Cube& q = sys_->cube(h.cube);
    for (std::size_t j = 0; j < q.children.size(); ++j) {
      double val = h.child_values[j];
      if (val == 0.0) continue;
      for (int p : sys_->cube(q.children[j]).members) v[p] = val;
    }
    return v;
  }

  // Non-cancellative h^0 = mu(Q)^{-1/2} chi_Q.
  Field values_h0(int cube) const {
    Field v(sys_->space().size(), 0.0);
    double c = 1.0 / std::sqrt(sys_->cube_measure(cube));
    for (int p : sys_->cube(cube).members) v[p] = c;
    return v;
  }

  // Integral of f over every cube (bottom-up pass).
  Field cube_integrals(const Field& f) const {
    const auto& cubes = sys_->cubes();
    Field integ(cubes.size(), 0.0);
    const Space& sp = sys_->space();
    // cubes_ stores finest level first; children precede parents
    for (std::size_t i = 0; i < cubes.size(); ++i) {
      const Cube& q = cubes[i];
      if (q.children.empty()) {
        double s = 0.0;
        for (int p : q.members) s += f[p] * sp.mass(p);
        integ[i] = s;
      } else {
        double s = 0.0;
        for (int ci : q.children) s += integ[ci];
        integ[i] = s;
      }
    }
    return integ;
  }

  // All coefficients <f, h_Q^eps>, plus the epsilon=0 coefficients at the
  // coarsest generation.
  HaarCoefficients expand(const Field& f) const {
    require(int(f.size()) == sys_->space().size(), "field size mismatch");
    Field integ = cube_integrals(f);
    HaarCoefficients out;
    for (const HaarFunction& h : functions_) {
      const Cube& q = sys_->cube(h.cube);
      double s = 0.0;
      for (std::size_t j = 0; j < q.children.size(); ++j)
        s += h.child_values[j] * integ[q.children[j]];
      out.at(h.cube, h.epsilon) = s;
    }
    for (int qi : sys_->level_cubes(0))
      out.at(qi, 0) = integ[qi] / std::sqrt(sys_->cube_measure(qi));
    return out;
  }

  // f = sum_{roots} <f,h^0> h^0 + sum of cancellative terms. Recovers the
  // finest conditional expectation; exact when the finest cubes are singletons.
  Field reconstruct(const HaarCoefficients& coefs) const {
    const auto& cubes = sys_->cubes();
    for (int qi : sys_->level_cubes(0))
      require(coefs.c.count({qi, 0}) == 1, "missing coarse-level coefficient");
    for (const HaarFunction& h : functions_)
      require(coefs.c.count({h.cube, h.epsilon}) == 1, "missing coefficient");
    // accumulate a constant per cube, then push down the tree
    Field addend(cubes.size(), 0.0);
    for (int qi : sys_->level_cubes(0))
      addend[qi] = coefs.get(qi, 0) / std::sqrt(sys_->cube_measure(qi));
    for (const HaarFunction& h : functions_) {
      const Cube& q = sys_->cube(h.cube);
      double c = coefs.get(h.cube, h.epsilon);
      for (std::size_t j = 0; j < q.children.size(); ++j)
        addend[q.children[j]] += c * h.child_values[j];
    }
    // parents come after children in cubes_; walk coarse-to-fine
    for (int level = 1; level < sys_->level_count(); ++level)
      for (int qi : sys_->level_cubes(level)) addend[qi] += addend[cubes[qi].parent];
    Field f(sys_->space().size(), 0.0);
    for (int qi : sys_->level_cubes(sys_->level_count() - 1))
      for (int p : cubes[qi].members) f[p] = addend[qi];
    return f;
  }

  // Conditional expectation over generation-k cubes and the martingale
  // difference D_k f = E_{k+1} f - E_k f.
  std::pair<Field, Field> martingale(const Field& f, int k) const {
    int level = sys_->level_of_gen(k);
    require(level >= 0 && level + 1 < sys_->level_count(), "generation out of range");
    Field integ = cube_integrals(f);
    auto expectation = [&](int lv) {
      Field e(sys_->space().size(), 0.0);
      for (int qi : sys_->level_cubes(lv)) {
        double avg = integ[qi] / sys_->cube_measure(qi);
        for (int p : sys_->cube(qi).members) e[p] = avg;
      }
      return e;
    };
    Field ek = expectation(level);
    Field ek1 = expectation(level + 1);
    Field dk(ek.size());
    for (std::size_t i = 0; i < dk.size(); ++i) dk[i] = ek1[i] - ek[i];
    return {ek, dk};
  }

  // S f(x) = [ sum_Q sum_eps |<f,h>|^2 chi_Q(x)/mu(Q) ]^{1/2}
  Field square_function(const Field& f) const {
    const auto& cubes = sys_->cubes();
    Field integ = cube_integrals(f);
    Field percube(cubes.size(), 0.0);
    for (const HaarFunction& h : functions_) {
      const Cube& q = sys_->cube(h.cube);
      double s = 0.0;
      for (std::size_t j = 0; j < q.children.size(); ++j)
        s += h.child_values[j] * integ[q.children[j]];
      percube[h.cube] += s * s / sys_->cube_measure(h.cube);
    }
    // accumulate down the ancestor chain
    for (int level = 1; level < sys_->level_count(); ++level)
      for (int qi : sys_->level_cubes(level)) percube[qi] += percube[cubes[qi].parent];
    Field out(sys_->space().size(), 0.0);
    for (int qi : sys_->level_cubes(sys_->level_count() - 1))
      for (int p : cubes[qi].members) out[p] = std::sqrt(percube[qi]);
    return out;
  }

  const Space& space() const { return sys_->space(); }

 private:
  const DyadicSystem* sys_;
  std::vector<HaarFunction> functions_;
  std::map<std::pair<int, int>, int> index_;
  std::vector<std::vector<int>> child_order_;
};

// Weighted Haar function h^w and the decomposition
// h = C(w,eps) h^w + D(w,eps) chi_E/mu(E).
struct WeightedHaar {
  int cube = -1;
  int epsilon = 0;
  double C = 0.0, D = 0.0;
  Field values;        // pointwise values of h^w
  IdSet support_E;     // the tail set E_eps (point ids)
};

struct WeightedHaarSystem {
  std::vector<WeightedHaar> functions;
  double c_bound = 0.0;  // max over functions of C^2 / <w>_Q
};

inline WeightedHaarSystem weighted_haar(const HaarBasis& basis, const Field& w) {
  const DyadicSystem& sys = basis.system();
  const Space& sp = sys.space();
  for (double v : w) require(v > 0.0, "weight must be strictly positive");
  require(int(w.size()) == sp.size(), "weight size mismatch");
  Field wint = basis.cube_integrals(w);  // w-measure of every cube
  WeightedHaarSystem out;
  for (const HaarFunction& h : basis.functions()) {
    const Cube& q = sys.cube(h.cube);
    const auto& ord = basis.child_order(h.cube);
    int m = int(q.children.size());
    int eps = h.epsilon;
    auto child_at = [&](int pos) { return q.children[ord[pos]]; };
    double wQ = wint[child_at(eps - 1)];
    double wE = 0.0, wE1 = 0.0;
    for (int j = eps - 1; j < m; ++j) wE += wint[child_at(j)];
    for (int j = eps; j < m; ++j) wE1 += wint[child_at(j)];
    double muE = 0.0;
    IdSet esupp;
    for (int j = eps - 1; j < m; ++j) {
      muE += sys.cube_measure(child_at(j));
      const auto& mem = sys.cube(child_at(j)).members;
      esupp.insert(esupp.end(), mem.begin(), mem.end());
    }
    std::sort(esupp.begin(), esupp.end());

    WeightedHaar wh;
    wh.cube = h.cube;
    wh.epsilon = eps;
    wh.support_E = std::move(esupp);
    wh.values.assign(sp.size(), 0.0);
    double alpha = std::sqrt(wE1 / (wQ * wE));   // value on Q_eps
    double beta = std::sqrt(wQ / (wE1 * wE));    // minus value on E_{eps+1}
    for (int p : sys.cube(child_at(eps - 1)).members) wh.values[p] = alpha;
    for (int j = eps; j < m; ++j)
      for (int p : sys.cube(child_at(j)).members) wh.values[p] = -beta;
    // match coefficients of h = C h^w + D chi_E/mu(E) on the two blocks
    wh.C = (h.a + h.b) / (alpha + beta);
    wh.D = (h.a - wh.C * alpha) * muE;
    double avg_wQ = wint[h.cube] / sys.cube_measure(h.cube);
    out.c_bound = std::max(out.c_bound, wh.C * wh.C / avg_wQ);
    out.functions.push_back(std::move(wh));
  }
  return out;
}

}  // namespace shtk
