// shtk: spaces of homogeneous type toolkit.
//
// Subcommands: gen, dyadic, haar, weights, bmo, sparse, op, run.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "shtk/harness.hpp"

using namespace shtk;
namespace fs = std::filesystem;

namespace {

Space load_space_arg(const std::string& path) {
  json j = read_json(path);
  if (j.contains("space")) return space_from_json(j.at("space"));
  return space_from_json(j);
}

struct LoadedSystems {
  std::unique_ptr<Space> space;
  std::unique_ptr<AdjacentSystems> adj;
};

LoadedSystems load_systems(const std::string& path) {
  json j = read_json(path);
  require(j.contains("systems"), path + " holds no dyadic systems; run `shtk dyadic build`");
  SystemsFile params = systems_params_from_json(j);
  LoadedSystems out;
  out.space = std::make_unique<Space>(std::move(params.space));
  out.adj = std::make_unique<AdjacentSystems>(*out.space, params.delta, int(params.seeds.size()),
                                              params.k_min, params.k_max, params.seeds);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spaces-of-homogeneous-type toolkit"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate or import a point-cloud space");
  std::string gen_model = "grid1d", gen_out = "space.json", gen_csv, gen_metric = "euclidean";
  int gen_n = 256, gen_k = 1;
  double gen_lambda = 1.0;
  bool gen_nomass = false;
  gen->add_option("--model", gen_model, "grid1d|grid2d|halfline|heisenberg|omegak|halfspace");
  gen->add_option("--n", gen_n, "approximate point count");
  gen->add_option("--lambda", gen_lambda, "measure exponent for halfline/halfspace");
  gen->add_option("--k", gen_k, "omega-k parameter");
  gen->add_option("--csv", gen_csv, "import id,x1,...,xd,mass rows instead of generating");
  gen->add_option("--metric", gen_metric, "metric for --csv input");
  gen->add_flag("--no-mass", gen_nomass, "csv rows carry no mass column (default 1/n)");
  gen->add_option("--out", gen_out, "output JSON path");
  gen->callback([&] {
    Space sp = gen_csv.empty()
                   ? space_from_model(gen_model, gen_n, gen_lambda, gen_k)
                   : space_from_csv(gen_csv, metric_from_name(gen_metric), gen_k, !gen_nomass);
    write_text(gen_out, space_to_json(sp).dump(2));
    std::cout << "wrote " << gen_out << " (" << sp.size() << " points, metric "
              << metric_name(sp.metric()) << ")\n";
  });

  // --- dyadic build --------------------------------------------------------
  auto* dyadic = app.add_subcommand("dyadic", "dyadic systems");
  auto* dbuild = dyadic->add_subcommand("build", "build adjacent dyadic systems");
  std::string db_space = "space.json", db_out = "sys.json";
  double db_delta = 0.25;
  int db_levels = 6, db_adjacent = 3, db_seed = 7;
  dbuild->add_option("--space", db_space, "input space JSON");
  dbuild->add_option("--delta", db_delta, "scale ratio in (0,1)");
  dbuild->add_option("--levels", db_levels, "number of generations (auto range trims)");
  dbuild->add_option("--adjacent", db_adjacent, "number of adjacent systems");
  dbuild->add_option("--seed", db_seed, "seed point id for the first system");
  dbuild->add_option("--out", db_out, "output JSON path");
  dbuild->callback([&] {
    Space sp = load_space_arg(db_space);
    auto [k_min, k_max_auto] = AdjacentSystems::auto_range(sp, db_delta);
    int k_max = std::min(k_max_auto, k_min + std::max(1, db_levels));
    std::vector<int> seeds;
    for (int t = 0; t < db_adjacent; ++t)
      seeds.push_back((db_seed + t * (sp.size() / std::max(1, db_adjacent))) % sp.size());
    AdjacentSystems adj(sp, db_delta, db_adjacent, k_min, k_max, seeds);
    adj.measure_coverage();
    write_text(db_out, systems_to_json(adj).dump(2));
    std::cout << "built " << db_adjacent << " systems, generations " << k_min << ".." << k_max
              << ", coverage " << adj.coverage() << ", C_adj " << adj.c_adj() << "\n";
    for (int t = 0; t < adj.count(); ++t) {
      auto rep = adj.system(t).verify();
      std::cout << "  system " << t << ": invariants " << (rep.required() ? "true" : "FALSE")
                << ", ball monotonicity (reported) " << (rep.ball_monotone ? "true" : "false")
                << " (a1 " << adj.system(t).constants().a1 << ", A1 "
                << adj.system(t).constants().A1 << ")\n";
    }
  });

  // --- haar verify ---------------------------------------------------------
  auto* haar = app.add_subcommand("haar", "Haar basis checks");
  auto* hverify = haar->add_subcommand("verify", "verify orthonormality and reconstruction");
  std::string hv_sys;
  std::string hv_dump;
  hverify->add_option("sys", hv_sys, "systems JSON from `dyadic build`")->required();
  hverify->add_option("--dump", hv_dump, "write coefficients of a probe as CSV");
  hverify->callback([&] {
    LoadedSystems loaded = load_systems(hv_sys);
    const AdjacentSystems& adj = *loaded.adj;
    const DyadicSystem& sys = adj.system(0);
    HaarBasis basis(sys);
    const Space& sp = adj.space();
    // Gram residual
    double worst = 0.0;
    std::vector<Field> rows;
    for (int qi : sys.level_cubes(0)) rows.push_back(basis.values_h0(qi));
    for (const auto& h : basis.functions()) rows.push_back(basis.values(h));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = i; j < rows.size(); ++j) {
        double ip = 0.0;
        for (int p = 0; p < sp.size(); ++p) ip += rows[i][p] * rows[j][p] * sp.mass(p);
        worst = std::max(worst, std::abs(ip - (i == j ? 1.0 : 0.0)));
      }
    Rng rng(7);
    Field f = rng.gaussian_field(sp.size());
    Field back = basis.reconstruct(basis.expand(f));
    double rt = 0.0;
    for (int i = 0; i < sp.size(); ++i) rt = std::max(rt, std::abs(back[i] - f[i]));
    std::cout << "haar functions: " << basis.functions().size() << "\n"
              << "gram residual:  " << worst << "\n"
              << "round trip:     " << rt << "\n";
    if (!hv_dump.empty()) {
      auto co = basis.expand(f);
      std::string csv = "cube_center,generation,epsilon,value\n";
      for (const auto& [key, val] : co.c) {
        const Cube& q = sys.cube(key.first);
        csv += std::to_string(q.center) + "," + std::to_string(q.gen) + "," +
               std::to_string(key.second) + "," + std::to_string(val) + "\n";
      }
      write_text(hv_dump, csv);
    }
    if (worst > 1e-10 || rt > 1e-10) throw CLI::RuntimeError(1);
  });

  // --- weights ap ------------------------------------------------------------
  auto* weights = app.add_subcommand("weights", "Muckenhoupt weights");
  auto* wap = weights->add_subcommand("ap", "A_p constant over the realizable balls");
  std::string wa_sys, wa_weight = "pow:0.4";
  double wa_p = 2.0;
  wap->add_option("sys", wa_sys, "space or systems JSON")->required();
  wap->add_option("--p", wa_p, "exponent p > 1");
  wap->add_option("--weight", wa_weight, "weight spec const:c | pow:a | file:csv");
  wap->callback([&] {
    Space sp = load_space_arg(wa_sys);
    Weight w = weight_from_spec(sp, wa_weight);
    BallFamily fam = BallFamily::all_balls(sp);
    std::cout << "[w]_{A_p} = " << ap_constant(sp, w, wa_p, fam) << "\n"
              << "[w]_{A_inf} = " << ainfty_constant(sp, w, fam) << "\n";
  });

  // --- bmo norm -------------------------------------------------------------
  auto* bmo = app.add_subcommand("bmo", "weighted BMO");
  auto* bnorm = bmo->add_subcommand("norm", "weighted BMO norm of b");
  std::string bn_sys, bn_weight = "const:1", bn_b = "";
  bnorm->add_option("sys", bn_sys, "space or systems JSON")->required();
  bnorm->add_option("--weight", bn_weight, "weight spec");
  bnorm->add_option("--b", bn_b, "b spec: file:<csv> (default: first coordinate)");
  bnorm->callback([&] {
    Space sp = load_space_arg(bn_sys);
    Weight w = weight_from_spec(sp, bn_weight);
    Field b(sp.size());
    if (bn_b.rfind("file:", 0) == 0) {
      b = field_from_csv(bn_b.substr(5), sp.size());
    } else {
      for (int i = 0; i < sp.size(); ++i) b[i] = sp.point(i)[0];
    }
    BallFamily fam = BallFamily::all_balls(sp);
    std::cout << "||b||_{BMO_w} = " << bmo_norm(sp, b, w, fam) << "\n";
  });

  // --- sparse dominate --------------------------------------------------------
  auto* sparse = app.add_subcommand("sparse", "sparse families and domination");
  auto* sdom = sparse->add_subcommand("dominate", "sparse domination certificate for T_b^m");
  std::string sd_sys, sd_op = "hilbert", sd_b = "", sd_out = "report.json";
  int sd_m = 1;
  double sd_lambda = 0.7;
  sdom->add_option("sys", sd_sys, "systems JSON from `dyadic build`")->required();
  sdom->add_option("--op", sd_op, "hilbert|cauchy|bessel1d");
  sdom->add_option("--m", sd_m, "commutator order");
  sdom->add_option("--lambda", sd_lambda, "bessel lambda");
  sdom->add_option("--b", sd_b, "b spec: file:<csv> (default: random)");
  sdom->add_option("--out", sd_out, "report path");
  sdom->callback([&] {
    LoadedSystems loaded = load_systems(sd_sys);
    AdjacentSystems& adj = *loaded.adj;
    adj.measure_coverage();
    const Space& sp = adj.space();
    json kspec;
    kspec["op"] = sd_op;
    kspec["lambda"] = sd_lambda;
    DiscreteOperator T(kernel_from_spec(kspec), sp);
    Rng rng(11);
    Field b = rng.gaussian_field(sp.size());
    if (sd_b.rfind("file:", 0) == 0) b = field_from_csv(sd_b.substr(5), sp.size());
    Field f = rng.gaussian_field(sp.size());
    auto res = dominate_commutator(T, b, sd_m, f, adj);
    json rep;
    rep["c_star"] = res.c_star;
    rep["dominated"] = res.dominated;
    rep["enlargement"] = res.enlargement;
    rep["recursion_nodes"] = res.recursion_nodes;
    json fams = json::array();
    for (const auto& fam : res.families) {
      if (fam.cubes.empty()) continue;
      SparseFamily copy = fam;
      double lam = carleson_constant(copy);
      auto stats = sparsify(copy, std::max(1.0, lam));
      auto check = sparsity_check(copy);
      fams.push_back(json{{"cubes", copy.cubes.size()},
                          {"carleson", lam},
                          {"eta", check.eta},
                          {"max_overlap", check.max_overlap},
                          {"worst_witness_ratio", stats.worst_ratio}});
    }
    rep["families"] = fams;
    write_text(sd_out, rep.dump(2));
    std::cout << "C* = " << res.c_star << " (dominated: " << (res.dominated ? "yes" : "NO")
              << "), report in " << sd_out << "\n";
    if (!res.dominated) throw CLI::RuntimeError(1);
  });

  // --- op check ----------------------------------------------------------------
  auto* opcmd = app.add_subcommand("op", "kernel checks");
  auto* ocheck = opcmd->add_subcommand("check", "size/smoothness/non-degeneracy certificates");
  std::string oc_sys, oc_op = "hilbert", oc_table = "";
  double oc_lambda = 0.7;
  int oc_n = 1, oc_k = 1, oc_j = 1;
  ocheck->add_option("sys", oc_sys, "space or systems JSON")->required();
  ocheck->add_option("--op", oc_op, "kernel model");
  ocheck->add_option("--lambda", oc_lambda, "bessel lambda");
  ocheck->add_option("--n", oc_n, "heisenberg/bessel-hd n");
  ocheck->add_option("--k", oc_k, "szego k");
  ocheck->add_option("--j", oc_j, "bessel-hd component");
  ocheck->add_option("--table", oc_table, "dump the kernel matrix as CSV");
  ocheck->callback([&] {
    Space sp = load_space_arg(oc_sys);
    json kspec;
    kspec["op"] = oc_op;
    kspec["lambda"] = oc_lambda;
    kspec["n"] = oc_n;
    kspec["k"] = oc_k;
    kspec["j"] = oc_j;
    DiscreteOperator T(kernel_from_spec(kspec), sp);
    auto nd = nondegeneracy_check(T);
    auto sm = kernel_smoothness_check(T);
    std::cout << "size certificate sup|K|V: " << kernel_size_certificate(T) << "\n"
              << "smoothness fit (delta=" << sm.delta << "): C = " << sm.worst_c << " on "
              << sm.triples << " triples\n"
              << "non-degeneracy: c0 = " << nd.c0 << ", C_bar = " << nd.c_bar
              << ", pass fraction = " << nd.pass_fraction << "\n"
              << "companion certificates: " << nd.certificate_fraction << "\n";
    if (!oc_table.empty()) {
      std::string csv;
      for (int i = 0; i < sp.size(); ++i) {
        for (int j2 = 0; j2 < sp.size(); ++j2) {
          Cplx k = i == j2 ? Cplx(0, 0) : T.kernel_entry(i, j2);
          csv += std::to_string(k.real());
          if (!T.is_real()) csv += "+" + std::to_string(k.imag()) + "i";
          csv += (j2 + 1 == sp.size()) ? "\n" : ",";
        }
      }
      write_text(oc_table, csv);
    }
  });

  // --- run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run a config-driven experiment suite");
  std::string run_config, run_out = "report";
  run->add_option("config", run_config, "config JSON")->required();
  run->add_option("--out", run_out, "output directory");
  run->callback([&] {
    json config = read_json(run_config);
    RunResult res = run_experiments(config);
    fs::create_directories(run_out);
    fs::create_directories(fs::path(run_out) / "tables");
    write_text((fs::path(run_out) / "report.json").string(), res.report.dump(2));
    for (const auto& [name, csv] : res.tables)
      write_text((fs::path(run_out) / "tables" / (name + ".csv")).string(), csv);
    std::cout << "report in " << run_out << "/report.json; "
              << (res.pass ? "all experiments passed" : "SOME EXPERIMENTS FAILED") << "\n";
    if (!res.pass) throw CLI::RuntimeError(1);
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
