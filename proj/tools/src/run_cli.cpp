#include "nlca_cli/run_cli.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "nlca/allocators.hpp"
#include "nlca/dataset.hpp"
#include "nlca/effectiveness.hpp"
#include "nlca/error.hpp"
#include "nlca/metrics.hpp"
#include "nlca/network.hpp"
#include "nlca/rng.hpp"
#include "nlca/stability.hpp"
#include "nlca/training.hpp"
#include "nlca/types.hpp"

namespace nlca::cli {
namespace {

struct CommonOpts {
  std::string out = ".";
  std::string params;
  std::string config;
  std::uint64_t seed = 7;
};

struct GenOpts {
  CommonOpts c;
  std::uint64_t n = 100000;
  bool faults = false;
};

struct TrainOpts {
  CommonOpts c;
  std::string data;
  std::string arch = "5.16.8.5";
  TrainConfig tc;
};

struct EvalOpts {
  CommonOpts c;
  std::string net;
  std::string data;
  int starts = 64;
  int samples_per_sigma = 400;
  double eps_cov = 1e-3;
  int sigma_grid = 9;
  bool oracle = false;
};

struct CompareOpts {
  CommonOpts c;
  std::string net;
  double duration = 1.0;
  double dt = 1e-3;
  double radius = 0.003;
  std::string axis = "cn";
  int calls = 10000;
};

struct StabilityOpts {
  CommonOpts c;
  std::string net;
  double theta = 0.5;
  double r = 0.05;
  double horizon = 25.0;
  double dt = 1e-3;
  bool corrupt = false;
  bool oracle = false;
  bool full_domain = false;
  std::optional<double> delta;
};

SyntheticModel load_model(const std::string& params_path) {
  if (params_path.empty()) return SyntheticModel{};
  const ModelFile mf = load_model_file(params_path);
  return SyntheticModel{mf.params, mf.box, mf.envelope};
}

void ensure_out(const CommonOpts& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) {
    fail(ErrorCode::io_error, "cannot create output directory " + c.out);
  }
}

std::string out_path(const CommonOpts& c, const std::string& name) {
  return (std::filesystem::path(c.out) / name).string();
}

std::string default_path(const std::string& explicit_path, const CommonOpts& c,
                         const char* name) {
  return explicit_path.empty() ? out_path(c, name) : explicit_path;
}

int axis_index(const std::string& axis) {
  if (axis == "cl" || axis == "0") return 0;
  if (axis == "cm" || axis == "1") return 1;
  if (axis == "cn" || axis == "2") return 2;
  fail(ErrorCode::invalid_argument, "axis must be cl, cm, or cn");
}

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--params", c.params,
                  "model coefficient file (defaults built in)");
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--config", c.config,
                  "flat key = value configuration; flags override");
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      fail(ErrorCode::invalid_argument, where + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail(ErrorCode::invalid_argument, where + ": empty key");
    if (key == "config") {
      fail(ErrorCode::invalid_argument, where + ": config files cannot nest");
    }
    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (op == nullptr) {
      fail(ErrorCode::invalid_argument,
           "unknown config key '" + key + "' for " + sub->get_name());
    }
    if (op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

void print_metrics_row(const std::string& arch, std::size_t params,
                       const EvalMetrics& em) {
  std::printf("%-12s %10s %14s %14s %10s\n", "arch", "params", "mse", "rmse",
              "r2");
  std::printf("%-12s %10zu %14.6e %14.6e %10.6f\n", arch.c_str(), params,
              em.mse, em.rmse, em.r2);
}

void cmd_gen(const GenOpts& o) {
  const SyntheticModel model = load_model(o.c.params);
  const FaultOptions faults =
      o.faults ? FaultOptions::single_surface_default() : FaultOptions{};
  const Dataset ds = generate(model, o.n, o.c.seed, faults);
  ensure_out(o.c);
  const std::string path = out_path(o.c, "dataset.csv");
  write_csv(ds, path);
  std::printf("wrote %zu samples (seed %llu) to %s\n", ds.samples.size(),
              static_cast<unsigned long long>(o.c.seed), path.c_str());
}

void cmd_train(const TrainOpts& o) {
  const SyntheticModel model = load_model(o.c.params);
  const MlpArch arch = MlpArch::parse(o.arch);
  arch.validate();
  const Dataset ds = read_csv(default_path(o.data, o.c, "dataset.csv"));
  const SplitIndices idx = split(ds);
  const NormStats norm = norm_stats(ds, idx.train);

  TrainConfig tc = o.tc;
  tc.seed = o.c.seed;
  Network net = init_network(arch, norm, model.box(), tc.seed);
  std::printf("arch %s, %zu parameters, training on %zu samples\n",
              arch.str().c_str(), parameter_count(arch), idx.train.size());

  auto [trained, hist] = train(std::move(net), ds, model, tc);

  ensure_out(o.c);
  save_network(trained, out_path(o.c, "net.json"), tc.seed);
  write_history_csv(hist, out_path(o.c, "history.csv"), tc.seed);
  const EvalMetrics em{hist.test_mse, hist.test_rmse, hist.test_r2};
  print_metrics_row(arch.str(), parameter_count(arch), em);
}

void cmd_eval(const EvalOpts& o) {
  ensure_out(o.c);
  std::unique_ptr<EffectivenessModel> model;
  std::unique_ptr<Allocator> alloc;
  std::string arch_label;
  std::size_t params = 0;
  EvalMetrics em{};

  if (o.oracle) {
    auto affine = std::make_unique<LinearEffectivenessModel>(
        make_axis_affine_model(1e-3, 3.0));
    alloc = std::make_unique<PinvOracleAllocator>(*affine);
    arch_label = alloc->name();
    model = std::move(affine);
  } else {
    model = std::make_unique<SyntheticModel>(load_model(o.c.params));
    Network net = load_network(default_path(o.net, o.c, "net.json"));
    arch_label = net.arch.str();
    params = parameter_count(net.arch);
    const Dataset ds = read_csv(default_path(o.data, o.c, "dataset.csv"));
    const SplitIndices idx = split(ds);
    em = evaluate_network(net, ds, idx.test, *model, WeightMatrix::identity());
    alloc = std::make_unique<AnnAllocator>(std::move(net));
    print_metrics_row(arch_label, params, em);
  }

  const MaeReport mr = mae(*alloc, *model, o.starts, o.c.seed);
  write_mae_json(mr, out_path(o.c, "mae.json"));
  std::printf(
      "mae %.6e at tau = (%.6e, %.6e, %.6e), sigma = (%.4f, %.4f), "
      "%d starts\n",
      mr.mae, mr.tau_arg.cl, mr.tau_arg.cm, mr.tau_arg.cn, mr.sigma_arg.alpha,
      mr.sigma_arg.beta, mr.starts);

  const std::vector<StateVector> grid =
      make_sigma_grid(model->state_box(), o.sigma_grid);
  const CoverageReport cr = coverage_ratio(*alloc, *model, grid,
                                           o.samples_per_sigma, o.eps_cov,
                                           o.c.seed);
  write_coverage_json(cr, out_path(o.c, "coverage.json"));
  std::printf("coverage min ratio %.4f over %zu conditions (eps %.3e)\n",
              cr.min_ratio, cr.cells.size(), cr.eps_cov);
}

void cmd_compare(const CompareOpts& o) {
  ensure_out(o.c);
  const SyntheticModel model = load_model(o.c.params);
  Network net = load_network(default_path(o.net, o.c, "net.json"));
  AnnAllocator ann(std::move(net));
  QpBaselineAllocator qp(model, WeightMatrix::identity());

  HelixSpec helix;
  helix.radius = o.radius;
  helix.axis = axis_index(o.axis);

  const TrajectoryResult tr_ann =
      run_trajectory(ann, model, o.duration, o.dt, helix);
  qp.reset();
  const TrajectoryResult tr_qp =
      run_trajectory(qp, model, o.duration, o.dt, helix);
  write_trajectory_csv(tr_ann, out_path(o.c, "traj_" + ann.name() + ".csv"),
                       o.c.seed);
  write_trajectory_csv(tr_qp, out_path(o.c, "traj_" + qp.name() + ".csv"),
                       o.c.seed);

  ann.reset();
  qp.reset();
  const std::array<Allocator*, 2> list{&ann, &qp};
  const std::vector<TimingRow> timing =
      bench_timing(list, o.calls, o.c.seed, 0.003, model.state_box());
  const double speedup = timing[1].mean_us / timing[0].mean_us;

  const std::string path = out_path(o.c, "compare.csv");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path + " for writing");
  out << "# seed = " << o.c.seed << "\n";
  out << "allocator,mean_err,max_err,traj_mean_call_us,bench_mean_us,"
         "speedup_vs_qp\n";
  char buf[256];
  const TrajectoryResult* trs[2] = {&tr_ann, &tr_qp};
  for (int i = 0; i < 2; ++i) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  timing[i].name.c_str(), trs[i]->mean_error,
                  trs[i]->max_error, trs[i]->mean_call_us, timing[i].mean_us,
                  timing[1].mean_us / timing[i].mean_us);
    out << buf;
  }
  if (!out) fail(ErrorCode::io_error, "failed writing " + path);

  std::printf("%-16s mean err %.6e  max err %.6e  mean call %.3f us\n",
              timing[0].name.c_str(), tr_ann.mean_error, tr_ann.max_error,
              timing[0].mean_us);
  std::printf("%-16s mean err %.6e  max err %.6e  mean call %.3f us\n",
              timing[1].name.c_str(), tr_qp.mean_error, tr_qp.max_error,
              timing[1].mean_us);
  std::printf("speedup factor %.2f over %d calls\n", speedup,
              timing[0].calls);
}

void corrupt_network(Network& net, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC0BB1E));
  for (Layer& l : net.layers) {
    for (double& w : l.theta) w = rng.uniform(-30.0, 30.0);
    for (double& b : l.b) b = rng.uniform(-30.0, 30.0);
  }
}

void cmd_stability(const StabilityOpts& o) {
  ensure_out(o.c);
  const SyntheticModel model = load_model(o.c.params);
  const ClosedLoopSystem sys = make_toy_system();
  const ClassKSpec spec = toy_classk_spec(o.theta, o.r);

  std::unique_ptr<Allocator> alloc;
  if (o.oracle) {
    alloc = std::make_unique<GaussNewtonAllocator>(model,
                                                   WeightMatrix::identity());
  } else {
    Network net = load_network(default_path(o.net, o.c, "net.json"));
    if (o.corrupt) corrupt_network(net, o.c.seed);
    alloc = std::make_unique<AnnAllocator>(std::move(net));
  }

  const double basin = spec.a2.inv(spec.a1(spec.r));
  const double d = basin / std::sqrt(3.0);
  const std::vector<std::vector<double>> x0s{
      {basin, 0.0, 0.0}, {0.0, basin, 0.0}, {0.0, 0.0, basin}, {d, d, d}};

  UltimateBoundOptions opts;
  opts.horizon = o.horizon;
  opts.dt = o.dt;
  opts.delta_override = o.delta;
  opts.full_domain_mae = o.full_domain;
  opts.seed = o.c.seed;
  const BoundReport rep =
      check_ultimate_bound(sys, *alloc, model, spec, x0s, opts);
  write_bound_json(rep, out_path(o.c, "bound.json"), o.c.seed);

  alloc->reset();
  const SimResult sim = simulate(sys, *alloc, model, x0s[0], o.horizon, o.dt);
  write_sim_csv(sim, out_path(o.c, "sim.csv"), o.c.seed);

  std::printf("delta %.6e (%s), admissible limit %.6e\n", rep.delta,
              rep.delta_source.c_str(), rep.admissible_delta);
  if (!rep.admissible) {
    std::printf("result INADMISSIBLE: bound formula not applicable\n");
    return;
  }
  double sup = 0.0;
  bool all_settled = true;
  for (const BoundTrajectory& bt : rep.trajectories) {
    sup = std::max(sup, bt.settled_sup);
    all_settled = all_settled && bt.settled;
  }
  std::printf("rho %.6e, settled sup-norm %.6e over %zu trajectories\n",
              rep.rho, sup, rep.trajectories.size());
  std::printf("result %s\n", rep.pass ? "PASS" : "FAIL");
  (void)all_settled;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"allocation pipeline: data generation, training, evaluation, "
               "comparison, and closed-loop bound checks"};
  app.require_subcommand(1);

  GenOpts gen_o;
  CLI::App* gen = app.add_subcommand("gen", "generate a training dataset");
  add_common(gen, gen_o.c);
  gen->add_option("--n", gen_o.n, "sample count (>= 10)")
      ->capture_default_str();
  gen->add_flag("--faults", gen_o.faults,
                "include single-surface failure scenarios");

  TrainOpts train_o;
  CLI::App* train = app.add_subcommand("train", "train an allocator network");
  add_common(train, train_o.c);
  train->add_option("--data", train_o.data,
                    "dataset CSV (default <out>/dataset.csv)");
  train->add_option("--arch", train_o.arch, "layer widths, e.g. 5.16.8.5")
      ->capture_default_str();
  train->add_option("--epochs", train_o.tc.epochs, "training epochs")
      ->capture_default_str();
  train->add_option("--batch", train_o.tc.batch, "mini-batch size")
      ->capture_default_str();
  train->add_option("--lr", train_o.tc.lr0, "initial learning rate")
      ->capture_default_str();
  train->add_option("--patience", train_o.tc.plateau_patience,
                    "epochs of stalled validation before a rate cut")
      ->capture_default_str();

  EvalOpts eval_o;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained network");
  add_common(eval, eval_o.c);
  eval->add_option("--net", eval_o.net, "network file (default <out>/net.json)");
  eval->add_option("--data", eval_o.data,
                   "dataset CSV (default <out>/dataset.csv)");
  eval->add_option("--starts", eval_o.starts, "search starts for the error bound")
      ->capture_default_str();
  eval->add_option("--samples-per-sigma", eval_o.samples_per_sigma,
                   "coverage draws per flight condition")
      ->capture_default_str();
  eval->add_option("--eps-cov", eval_o.eps_cov, "coverage error tolerance")
      ->capture_default_str();
  eval->add_option("--sigma-grid", eval_o.sigma_grid,
                   "flight-condition grid points per axis")
      ->capture_default_str();
  eval->add_flag("--oracle", eval_o.oracle,
                 "evaluate the exact pseudo-inverse on an affine model");

  CompareOpts cmp_o;
  CLI::App* cmp = app.add_subcommand(
      "compare", "network vs QP baseline on a helix trajectory");
  add_common(cmp, cmp_o.c);
  cmp->add_option("--net", cmp_o.net, "network file (default <out>/net.json)");
  cmp->add_option("--duration", cmp_o.duration, "trajectory length, seconds")
      ->capture_default_str();
  cmp->add_option("--dt", cmp_o.dt, "sample period, seconds")
      ->capture_default_str();
  cmp->add_option("--radius", cmp_o.radius, "helix circle radius")
      ->capture_default_str();
  cmp->add_option("--axis", cmp_o.axis, "ramped moment: cl, cm, or cn")
      ->capture_default_str();
  cmp->add_option("--calls", cmp_o.calls, "timing workload size (>= 1000)")
      ->capture_default_str();

  StabilityOpts stab_o;
  CLI::App* stab = app.add_subcommand(
      "stability", "ultimate-bound check on the toy closed loop");
  add_common(stab, stab_o.c);
  stab->add_option("--net", stab_o.net, "network file (default <out>/net.json)");
  stab->add_option("--theta", stab_o.theta, "margin split in (0, 1)")
      ->capture_default_str();
  stab->add_option("--r", stab_o.r, "certificate domain radius")
      ->capture_default_str();
  stab->add_option("--horizon", stab_o.horizon, "simulation length, seconds")
      ->capture_default_str();
  stab->add_option("--dt", stab_o.dt, "integration step, seconds")
      ->capture_default_str();
  stab->add_flag("--corrupt", stab_o.corrupt,
                 "randomize the network weights before the check");
  stab->add_flag("--oracle", stab_o.oracle,
                 "use the iterated exact allocator instead of a network");
  stab->add_flag("--full-domain", stab_o.full_domain,
                 "measure delta over the whole domain, not visited commands");
  stab->add_option("--delta", stab_o.delta,
                   "externally supplied allocation error bound");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      apply_config(gen, gen_o.c.config);
      cmd_gen(gen_o);
    }
    if (train->parsed()) {
      apply_config(train, train_o.c.config);
      cmd_train(train_o);
    }
    if (eval->parsed()) {
      apply_config(eval, eval_o.c.config);
      cmd_eval(eval_o);
    }
    if (cmp->parsed()) {
      apply_config(cmp, cmp_o.c.config);
      cmd_compare(cmp_o);
    }
    if (stab->parsed()) {
      apply_config(stab, stab_o.c.config);
      cmd_stability(stab_o);
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case ErrorCode::invalid_argument:
      case ErrorCode::empty_box:
      case ErrorCode::shape_mismatch:
      case ErrorCode::insufficient_samples:
        return 2;
      case ErrorCode::io_error:
      case ErrorCode::format_error:
        return 3;
      default:
        return 4;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}

}  // namespace nlca::cli
