#pragma once

#include "shtk/bmo.hpp"
#include "shtk/haar.hpp"
#include "shtk/io.hpp"
#include "shtk/sparse.hpp"

namespace shtk {

inline double lp_norm(const Space& sp, const CField& f, double p, const Weight& w) {
  double s = 0.0;
  for (int i = 0; i < sp.size(); ++i) s += std::pow(std::abs(f[i]), p) * w[i] * sp.mass(i);
  return std::pow(s, 1.0 / p);
}

inline double lp_norm(const Space& sp, const Field& f, double p, const Weight& w) {
  double s = 0.0;
  for (int i = 0; i < sp.size(); ++i) s += std::pow(std::abs(f[i]), p) * w[i] * sp.mass(i);
  return std::pow(s, 1.0 / p);
}

struct NormEstimate {
  double value = 0.0;        // reported lower bound on the operator norm
  double power_iteration = 0.0;
  double probe_max = 0.0;
  int iterations = 0;
};

// Probe-based norm estimate, refined by power iteration on the weighted
// normal map when p = 2. Always a lower bound for the true norm.
inline NormEstimate operator_norm(const DiscreteOperator& op, double p, const Weight& lambda_in,
                                  const Weight& lambda_out, int trials, std::uint64_t seed) {
  const Space& sp = op.space();
  int n = sp.size();
  NormEstimate est;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    Field f = (t % 2 == 0) ? rng.gaussian_field(n) : rng.spike_field(n, std::max(1, n / 16));
    double denom = lp_norm(sp, f, p, lambda_in);
    if (denom <= 0.0) continue;
    est.probe_max = std::max(est.probe_max, lp_norm(sp, op.apply(f), p, lambda_out) / denom);
  }
  if (p == 2.0) {
    // singular value of A = D_out M D_in^{-1} with D = diag(sqrt(w mu))
    Field din(n), dout(n);
    for (int i = 0; i < n; ++i) {
      din[i] = std::sqrt(lambda_in[i] * sp.mass(i));
      dout[i] = std::sqrt(lambda_out[i] * sp.mass(i));
    }
    auto a_apply = [&](const CField& v) {
      CField t(n);
      for (int i = 0; i < n; ++i) t[i] = v[i] / din[i];
      CField u = op.apply(t);
      for (int i = 0; i < n; ++i) u[i] *= dout[i];
      return u;
    };
    auto ah_apply = [&](const CField& v) {
      CField t(n);
      for (int i = 0; i < n; ++i) t[i] = std::conj(v[i] * dout[i]);
      CField u = op.transpose_apply(t);
      for (int i = 0; i < n; ++i) u[i] = std::conj(u[i]) / din[i];
      return u;
    };
    CField v(n);
    for (int i = 0; i < n; ++i) v[i] = Cplx(rng.gaussian(), rng.gaussian());
    double sigma = 0.0, prev = -1.0;
    for (int it = 0; it < 80; ++it) {
      CField av = a_apply(v);
      sigma = 0.0;
      for (const auto& x : av) sigma += std::norm(x);
      sigma = std::sqrt(sigma);
      if (sigma <= 0.0) break;
      CField w = ah_apply(av);
      double wn = 0.0;
      for (const auto& x : w) wn += std::norm(x);
      wn = std::sqrt(wn);
      if (wn <= 0.0) break;
      for (int i = 0; i < n; ++i) v[i] = w[i] / wn;
      est.iterations = it + 1;
      if (prev > 0.0 && std::abs(sigma - prev) <= 1e-7 * sigma) break;
      prev = sigma;
    }
    est.power_iteration = sigma;
  }
  est.value = std::max(est.probe_max, est.power_iteration);
  return est;
}

// ---------------------------------------------------------------------------
// b-function batteries.

// Deterministic battery: one constant, two steps, the rest rough Gaussians.
inline std::vector<Field> b_battery(const Space& sp, int count, std::uint64_t seed) {
  int n = sp.size();
  std::vector<Field> out;
  out.push_back(Field(n, 1.0));  // constant; callers treat it separately
  Field step(n, 0.0);
  for (int i = 0; i < n; ++i) step[i] = sp.point(i)[0] > sp.point(n / 2)[0] ? 1.0 : 0.0;
  out.push_back(step);
  Field step2(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = sp.point(i)[0];
    step2[i] = (x > sp.point(n / 4)[0]) + (x > sp.point(3 * n / 4)[0]);
  }
  out.push_back(step2);
  Rng rng(seed);
  while (int(out.size()) < count) out.push_back(rng.gaussian_field(n));
  out.resize(count);
  return out;
}

// ---------------------------------------------------------------------------
// Experiments.

struct EquivalenceRecord {
  std::string b_name;
  double bmo_norm_raw = 0.0;   // ||b||_{BMO_{nu^{1/m}}} before normalization
  double norm_estimate = 0.0;  // ||T_b^m : L^p_{l1} -> L^p_{l2}|| for normalized b
  bool constant = false;
};

struct EquivalenceSection {
  std::vector<EquivalenceRecord> records;
  double band_min = 0.0, band_max = 0.0;
  double band_ratio = 0.0;
  bool constant_zero_ok = true;
  double lower_c_fit = 0.0;  // per-run fit of Omega^m <= C * commutator action
  int lower_balls = 0;
  bool pass = false;
  double band_limit = 50.0;
};

inline EquivalenceSection equivalence_experiment(const Space& sp, const DiscreteOperator& T,
                                                 double p, int m, const Weight& lambda1,
                                                 const Weight& lambda2, int b_count,
                                                 std::uint64_t seed, double band_limit = 50.0,
                                                 int probe_trials = 12) {
  EquivalenceSection sec;
  sec.band_limit = band_limit;
  BloomWeight nu = bloom_weight(lambda1, lambda2, p, m);
  BallFamily fam = BallFamily::all_balls(sp, sp.size() > 1000 ? 128 : 1000);

  auto battery = b_battery(sp, b_count + 1, seed);  // +1: the constant entry
  sec.band_min = std::numeric_limits<double>::infinity();
  int named = 0;
  for (const Field& b : battery) {
    EquivalenceRecord rec;
    rec.b_name = named == 0 ? "constant" : (named <= 2 ? "step" + std::to_string(named) : "random" + std::to_string(named - 2));
    ++named;
    double norm = bmo_norm(sp, b, nu.nu_root, fam);
    rec.bmo_norm_raw = norm;
    if (norm <= 1e-14) {
      rec.constant = true;
      DiscreteOperator tb = T.commutator_matrix(b, m);
      NormEstimate est = operator_norm(tb, p, lambda1, lambda2, probe_trials, seed + named);
      rec.norm_estimate = est.value;
      sec.constant_zero_ok = sec.constant_zero_ok && (est.value == 0.0);
      sec.records.push_back(rec);
      continue;
    }
    Field bn(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) bn[i] = b[i] / norm;
    DiscreteOperator tb = T.commutator_matrix(bn, m);
    NormEstimate est = operator_norm(tb, p, lambda1, lambda2, probe_trials, seed + named);
    rec.norm_estimate = est.value;  // the BMO norm of bn is exactly 1
    sec.band_min = std::min(sec.band_min, est.value);
    sec.band_max = std::max(sec.band_max, est.value);
    sec.records.push_back(rec);
  }
  sec.band_ratio = sec.band_min > 0.0 ? sec.band_max / sec.band_min
                                      : std::numeric_limits<double>::infinity();

  // lower-bound leg: Omega(b,B)^m <= C_fit * commutator action on test sets
  Rng rng(seed + 999);
  const Field& b = battery.back();
  int checked = 0;
  for (int trial = 0; trial < 64 && checked < 6; ++trial) {
    int c = rng.index(sp.size());
    double r = sp.neighbors(c).dist[std::max(1, sp.size() / 24)];
    Ball ball = sp.ball(c, r * 1.0001);
    if (int(ball.members.size()) < 2) continue;
    auto rec = lower_bound_ratio(T, b, m, p, lambda1, lambda2, ball);
    if (!rec.found_companion || rec.action <= 0.0) continue;
    sec.lower_c_fit = std::max(sec.lower_c_fit, rec.osc_m / rec.action);
    ++checked;
  }
  sec.lower_balls = checked;
  sec.pass = sec.constant_zero_ok && std::isfinite(sec.band_ratio) &&
             sec.band_ratio <= band_limit && std::isfinite(sec.lower_c_fit);
  return sec;
}

struct SquareFunctionRecord {
  double exponent = 0.0;
  double ap = 0.0;
  double max_ratio = 0.0;
};

struct SquareFunctionSection {
  std::vector<SquareFunctionRecord> records;
  bool unweighted_parseval_ok = true;  // ratio <= 1 for w = 1, p = 2
  bool trend_ok = true;                // larger A_p never shrinks the ratio by > 2x
  bool pass = false;
};

inline SquareFunctionSection square_function_experiment(const HaarBasis& basis, double p,
                                                        const Field& exponents, int probes,
                                                        std::uint64_t seed) {
  const Space& sp = basis.space();
  SquareFunctionSection sec;
  BallFamily fam = BallFamily::all_balls(sp, 256);
  Rng rng(seed);
  std::vector<Field> fs;
  for (int t = 0; t < probes; ++t) fs.push_back(rng.gaussian_field(sp.size()));
  for (double a : exponents) {
    SquareFunctionRecord rec;
    rec.exponent = a;
    Weight w = a == 0.0 ? constant_weight(sp.size()) : power_weight(sp, a);
    rec.ap = ap_constant(sp, w, p, fam);
    for (const Field& f : fs) {
      double denom = lp_norm(sp, f, p, w);
      if (denom <= 0.0) continue;
      Field s = basis.square_function(f);
      rec.max_ratio = std::max(rec.max_ratio, lp_norm(sp, s, p, w) / denom);
    }
    if (a == 0.0 && p == 2.0)
      sec.unweighted_parseval_ok = rec.max_ratio <= 1.0 + 1e-12;
    sec.records.push_back(rec);
  }
  std::sort(sec.records.begin(), sec.records.end(),
            [](const auto& a, const auto& b) { return a.ap < b.ap; });
  for (std::size_t i = 0; i + 1 < sec.records.size(); ++i)
    if (sec.records[i + 1].max_ratio < sec.records[i].max_ratio / 2.0) sec.trend_ok = false;
  sec.pass = sec.unweighted_parseval_ok && sec.trend_ok;
  return sec;
}

// ---------------------------------------------------------------------------
// Config-driven runner.

struct RunResult {
  json report;
  std::vector<std::pair<std::string, std::string>> tables;  // (name, csv text)
  bool pass = true;
};

inline Kernel kernel_from_spec(const json& spec) {
  std::string op = spec.value("op", "hilbert");
  if (op == "hilbert") return Kernel::hilbert();
  if (op == "cauchy") {
    std::string prof = spec.value("profile", "sawtooth");
    double param = spec.value("param", 1.0);
    if (prof == "zero") return Kernel::cauchy(LipschitzProfile::zero());
    if (prof == "sawtooth") return Kernel::cauchy(LipschitzProfile::sawtooth(param));
    if (prof == "sine") return Kernel::cauchy(LipschitzProfile::sine(param));
    fail("unknown cauchy profile: " + prof);
  }
  if (op == "cauchy-szego") return Kernel::cauchy_szego(spec.value("n", 1));
  if (op == "szego") return Kernel::szego(spec.value("k", 1));
  if (op == "bessel1d") return Kernel::bessel1d(spec.value("lambda", 1.0));
  if (op == "bessel-hd")
    return Kernel::bessel_hd(spec.value("n", 1), spec.value("lambda", 1.0), spec.value("j", 1));
  fail("unknown operator: " + op);
}

inline RunResult run_experiments(const json& config) {
  RunResult out;
  std::uint64_t seed = config.value("seed", 42);
  out.report["seed"] = seed;
  out.report["schema"] = "shtk-report-v1";
  json env;
#ifdef __VERSION__
  env["compiler"] = __VERSION__;
#endif
  env["threads"] = thread_count();
  out.report["environment"] = env;
  out.report["experiments"] = json::array();

  if (!config.contains("experiments")) return out;
  for (const auto& exp : config.at("experiments")) {
    std::string type = exp.value("type", "");
    std::string model = exp.value("model", "grid1d");
    int n = exp.value("n", 256);
    Space sp = space_from_model(model, n, exp.value("lambda", 1.0), exp.value("k", 1));
    json section;
    section["type"] = type;
    section["model"] = model;
    section["n"] = sp.size();

    if (type == "equivalence") {
      Kernel ker = kernel_from_spec(exp);
      DiscreteOperator T(ker, sp);
      Weight l1 = weight_from_spec(sp, exp.value("weight1", "const:1"));
      Weight l2 = weight_from_spec(sp, exp.value("weight2", "const:1"));
      auto sec = equivalence_experiment(sp, T, exp.value("p", 2.0), exp.value("m", 1), l1, l2,
                                        exp.value("b_count", 10), seed,
                                        exp.value("band_limit", 50.0));
      section["band_min"] = sec.band_min;
      section["band_max"] = sec.band_max;
      section["band_ratio"] = sec.band_ratio;
      section["constant_zero_ok"] = sec.constant_zero_ok;
      section["lower_c_fit"] = sec.lower_c_fit;
      section["pass"] = sec.pass;
      out.pass = out.pass && sec.pass;
      std::string csv = "b,bmo_norm_raw,norm_estimate,constant\n";
      for (const auto& r : sec.records)
        csv += r.b_name + "," + std::to_string(r.bmo_norm_raw) + "," +
               std::to_string(r.norm_estimate) + "," + (r.constant ? "1" : "0") + "\n";
      out.tables.push_back({"equivalence_" + model, csv});
    } else if (type == "square-function") {
      AdjacentSystems adj = AdjacentSystems::make(sp, exp.value("delta", 0.5), 1, 0);
      HaarBasis basis(adj.system(0));
      Field exponents = exp.value("exponents", Field{0.0, 0.3, 0.6, 0.9});
      auto sec = square_function_experiment(basis, exp.value("p", 2.0), exponents,
                                            exp.value("probes", 16), seed);
      section["unweighted_parseval_ok"] = sec.unweighted_parseval_ok;
      section["trend_ok"] = sec.trend_ok;
      section["pass"] = sec.pass;
      out.pass = out.pass && sec.pass;
      std::string csv = "exponent,ap,max_ratio\n";
      for (const auto& r : sec.records)
        csv += std::to_string(r.exponent) + "," + std::to_string(r.ap) + "," +
               std::to_string(r.max_ratio) + "\n";
      out.tables.push_back({"square_function_" + model, csv});
    } else if (type == "domination") {
      Kernel ker = kernel_from_spec(exp);
      DiscreteOperator T(ker, sp);
      AdjacentSystems adj = AdjacentSystems::make(sp, exp.value("delta", 0.25),
                                                  exp.value("adjacent", 3), 0);
      adj.measure_coverage();
      Rng rng(seed);
      int m = exp.value("m", 1);
      int pairs = exp.value("pairs", 5);
      double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
      bool dominated = true;
      for (int t = 0; t < pairs; ++t) {
        Field b = rng.gaussian_field(sp.size());
        Field f = rng.gaussian_field(sp.size());
        auto res = dominate_commutator(T, b, m, f, adj);
        dominated = dominated && res.dominated;
        cmin = std::min(cmin, res.c_star);
        cmax = std::max(cmax, res.c_star);
      }
      section["c_star_min"] = cmin;
      section["c_star_max"] = cmax;
      section["dominated"] = dominated;
      bool pass = dominated && cmax < std::numeric_limits<double>::infinity() &&
                  (cmin <= 0.0 || cmax / cmin <= exp.value("stability_factor", 10.0));
      section["pass"] = pass;
      out.pass = out.pass && pass;
    } else {
      fail("unknown experiment type: " + type);
    }
    out.report["experiments"].push_back(section);
  }
  return out;
}

}  // namespace shtk
