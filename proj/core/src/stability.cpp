#include "nlca/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include <nlohmann/json.hpp>

#include "nlca/error.hpp"
#include "nlca/metrics.hpp"

namespace nlca {
namespace {

// dx = deriv(x, err_out) with err_out the allocation error at x's command.
using DerivFn =
    std::function<std::vector<double>(const std::vector<double>&, double&)>;

bool all_finite(const std::vector<double>& v) {
  for (double d : v) {
    if (!std::isfinite(d)) return false;
  }
  return true;
}

double norm2_vec(const std::vector<double>& v) {
  double s = 0.0;
  for (double d : v) s += d * d;
  return std::sqrt(s);
}

SimResult integrate_rk4(int k, const DerivFn& deriv,
                        const std::vector<double>& x0, double t_end,
                        double dt) {
  if (k < 1) fail(ErrorCode::invalid_argument, "state dimension must be >= 1");
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "dt must be positive");
  if (!(t_end >= 0.0)) {
    fail(ErrorCode::invalid_argument, "t_end must be nonnegative");
  }
  if (static_cast<int>(x0.size()) != k) {
    fail(ErrorCode::shape_mismatch, "x0 has dimension " +
                                        std::to_string(x0.size()) +
                                        ", expected " + std::to_string(k));
  }
  if (!all_finite(x0)) {
    fail(ErrorCode::invalid_argument, "x0 must be finite");
  }

  const long steps = std::lround(t_end / dt);
  SimResult out;
  out.points.reserve(static_cast<std::size_t>(steps) + 1);

  std::vector<double> x = x0;
  std::vector<double> stage(static_cast<std::size_t>(k));
  std::vector<double> xn(static_cast<std::size_t>(k));
  for (long s = 0; s <= steps; ++s) {
    double err = 0.0;
    const std::vector<double> k1 = deriv(x, err);
    out.max_err = std::max(out.max_err, err);
    out.points.push_back({static_cast<double>(s) * dt, x, norm2_vec(x), err});
    if (s == steps) break;

    auto blend = [&](const std::vector<double>& dx, double h) {
      for (int i = 0; i < k; ++i) {
        stage[static_cast<std::size_t>(i)] =
            x[static_cast<std::size_t>(i)] + h * dx[static_cast<std::size_t>(i)];
      }
      return all_finite(stage);
    };

    double e2 = 0.0;
    double e3 = 0.0;
    double e4 = 0.0;
    if (!blend(k1, 0.5 * dt)) {
      out.nonfinite_abort = true;
      break;
    }
    const std::vector<double> k2 = deriv(stage, e2);
    if (!blend(k2, 0.5 * dt)) {
      out.nonfinite_abort = true;
      break;
    }
    const std::vector<double> k3 = deriv(stage, e3);
    if (!blend(k3, dt)) {
      out.nonfinite_abort = true;
      break;
    }
    const std::vector<double> k4 = deriv(stage, e4);
    out.max_err = std::max({out.max_err, e2, e3, e4});

    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(i);
      xn[j] = x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    if (!all_finite(xn)) {
      out.nonfinite_abort = true;
      break;
    }
    x = xn;
  }
  return out;
}

void validate_system(const ClosedLoopSystem& sys) {
  if (sys.k < 1) fail(ErrorCode::invalid_argument, "state dimension must be >= 1");
  if (!sys.f || !sys.b || !sys.k_ctrl || !sys.sigma_of_x) {
    fail(ErrorCode::invalid_argument, "closed-loop system has unset functions");
  }
}

std::vector<double> plant_rhs(const ClosedLoopSystem& sys,
                              const std::vector<double>& x,
                              const MomentVector& moments) {
  std::vector<double> dx = sys.f(x);
  if (static_cast<int>(dx.size()) != sys.k) {
    fail(ErrorCode::shape_mismatch, "f(x) has wrong dimension");
  }
  const std::vector<double> bm = sys.b(x);
  if (static_cast<int>(bm.size()) != 3 * sys.k) {
    fail(ErrorCode::shape_mismatch, "B(x) is not k x 3");
  }
  for (int i = 0; i < sys.k; ++i) {
    const auto j = static_cast<std::size_t>(i);
    dx[j] += bm[3 * j] * moments.cl + bm[3 * j + 1] * moments.cm +
             bm[3 * j + 2] * moments.cn;
  }
  return dx;
}

}  // namespace

void ClassKFn::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) {
    fail(ErrorCode::invalid_argument, "comparison function needs c > 0");
  }
  if (!(p >= 1.0) || !std::isfinite(p)) {
    fail(ErrorCode::invalid_argument, "comparison function needs p >= 1");
  }
}

double ClassKFn::operator()(double s) const {
  if (!(s >= 0.0)) {
    fail(ErrorCode::invalid_argument, "comparison function domain is s >= 0");
  }
  return c * std::pow(s, p);
}

double ClassKFn::inv(double y) const {
  if (!(y >= 0.0)) {
    fail(ErrorCode::invalid_argument, "comparison function inverse domain is y >= 0");
  }
  return std::pow(y / c, 1.0 / p);
}

void ClassKSpec::validate() const {
  a1.validate();
  a2.validate();
  a3.validate();
  a4.validate();
  if (!(theta > 0.0) || !(theta < 1.0)) {
    fail(ErrorCode::invalid_argument, "theta must lie in (0, 1)");
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    fail(ErrorCode::invalid_argument, "r must be positive");
  }
}

double admissible_delta(const ClassKSpec& spec) {
  spec.validate();
  return spec.theta * spec.a3(spec.a2.inv(spec.a1(spec.r))) / spec.a4(spec.r);
}

double rho_bound(const ClassKSpec& spec, double delta) {
  spec.validate();
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    fail(ErrorCode::invalid_argument, "delta must be finite and nonnegative");
  }
  const double limit = admissible_delta(spec);
  if (delta > limit) {
    fail(ErrorCode::inadmissible,
         "delta " + std::to_string(delta) + " exceeds the admissible bound " +
             std::to_string(limit));
  }
  return spec.a1.inv(spec.a2(spec.a3.inv(delta * spec.a4(spec.r) / spec.theta)));
}

SimResult simulate(const ClosedLoopSystem& sys, Allocator& alloc,
                   const EffectivenessModel& model,
                   const std::vector<double>& x0, double t_end, double dt) {
  validate_system(sys);
  const BoxSet box = model.box();
  const DerivFn deriv = [&](const std::vector<double>& x, double& err) {
    const StateVector sig = sys.sigma_of_x(x);
    const MomentVector cmd = sys.k_ctrl(x);
    const ControlVector u = project_box(alloc.allocate(cmd, sig), box);
    const MomentVector got = model.evaluate(u, sig);
    err = norm1(got - cmd);
    return plant_rhs(sys, x, got);
  };
  return integrate_rk4(sys.k, deriv, x0, t_end, dt);
}

SimResult simulate_ideal(const ClosedLoopSystem& sys,
                         const std::vector<double>& x0, double t_end,
                         double dt) {
  validate_system(sys);
  const DerivFn deriv = [&](const std::vector<double>& x, double& err) {
    err = 0.0;
    return plant_rhs(sys, x, sys.k_ctrl(x));
  };
  return integrate_rk4(sys.k, deriv, x0, t_end, dt);
}

BoundReport check_ultimate_bound(const ClosedLoopSystem& sys, Allocator& alloc,
                                 const EffectivenessModel& model,
                                 const ClassKSpec& spec,
                                 const std::vector<std::vector<double>>& x0s,
                                 const UltimateBoundOptions& opts) {
  validate_system(sys);
  spec.validate();
  if (x0s.empty()) {
    fail(ErrorCode::invalid_argument, "need at least one initial state");
  }
  const double basin = spec.a2.inv(spec.a1(spec.r));
  for (const auto& x0 : x0s) {
    if (norm2_vec(x0) > basin * (1.0 + 1e-12)) {
      fail(ErrorCode::invalid_argument,
           "initial state norm " + std::to_string(norm2_vec(x0)) +
               " outside the certified basin " + std::to_string(basin));
    }
  }

  BoundReport rep;
  rep.theta = spec.theta;
  rep.r = spec.r;
  rep.horizon = opts.horizon;
  rep.dt = opts.dt;

  std::vector<SimResult> sims;
  sims.reserve(x0s.size());
  double visited = 0.0;
  for (const auto& x0 : x0s) {
    alloc.reset();
    sims.push_back(simulate(sys, alloc, model, x0, opts.horizon, opts.dt));
    visited = std::max(visited, sims.back().max_err);
  }

  if (opts.delta_override) {
    rep.delta = *opts.delta_override;
    rep.delta_source = "override";
  } else if (opts.full_domain_mae) {
    rep.delta = mae(alloc, model, opts.mae_starts, opts.seed).mae;
    rep.delta_source = "full-domain-search";
  } else {
    rep.delta = visited;
    rep.delta_source = "visited-commands";
  }

  rep.admissible_delta = admissible_delta(spec);
  rep.admissible = rep.delta <= rep.admissible_delta;
  rep.rho = rep.admissible ? rho_bound(spec, rep.delta)
                           : std::numeric_limits<double>::quiet_NaN();

  bool all_settled = true;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const SimResult& sim = sims[i];
    BoundTrajectory bt;
    bt.x0 = x0s[i];
    bt.nonfinite = sim.nonfinite_abort;
    bt.settling_time = std::numeric_limits<double>::infinity();

    std::size_t first_inside = sim.points.size();
    if (rep.admissible && !sim.nonfinite_abort) {
      // Last exit from the rho-ball decides settling; everything after stays.
      for (std::size_t j = sim.points.size(); j-- > 0;) {
        if (sim.points[j].norm > rep.rho) {
          first_inside = j + 1;
          break;
        }
        first_inside = j;
      }
    }
    if (first_inside < sim.points.size()) {
      bt.settled = true;
      bt.settling_time = sim.points[first_inside].t;
      double sup = 0.0;
      for (std::size_t j = first_inside; j < sim.points.size(); ++j) {
        sup = std::max(sup, sim.points[j].norm);
      }
      bt.settled_sup = sup;
    } else {
      double sup = 0.0;
      for (const SimPoint& p : sim.points) sup = std::max(sup, p.norm);
      bt.settled_sup = sup;
    }
    all_settled = all_settled && bt.settled && !bt.nonfinite;
    rep.trajectories.push_back(std::move(bt));
  }
  rep.pass = rep.admissible && all_settled;
  return rep;
}

ClosedLoopSystem make_toy_system() {
  ClosedLoopSystem sys;
  sys.k = 3;
  sys.f = [](const std::vector<double>& x) {
    return std::vector<double>{-x[0], -x[1], -x[2]};
  };
  sys.b = [](const std::vector<double>&) {
    return std::vector<double>{1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  };
  sys.k_ctrl = [](const std::vector<double>& x) {
    constexpr double kGain = -0.02;
    constexpr double kBall = 0.003;
    MomentVector m{kGain * x[0], kGain * x[1], kGain * x[2]};
    const double n = norm2(m);
    if (n > kBall) m = (kBall / n) * m;
    return m;
  };
  sys.sigma_of_x = [](const std::vector<double>&) {
    return StateVector{4.0, 0.0};
  };
  return sys;
}

ClassKSpec toy_classk_spec(double theta, double r) {
  ClassKSpec spec;
  spec.a1 = {0.5, 2.0};
  spec.a2 = {0.5, 2.0};
  spec.a3 = {1.0, 2.0};
  spec.a4 = {1.0, 1.0};
  spec.theta = theta;
  spec.r = r;
  spec.validate();
  return spec;
}

void write_bound_json(const BoundReport& report, const std::string& path,
                      std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["delta"] = report.delta;
  j["delta_source"] = report.delta_source;
  j["admissible_delta"] = report.admissible_delta;
  j["admissible"] = report.admissible;
  j["rho"] = report.admissible ? nlohmann::json(report.rho)
                               : nlohmann::json(nullptr);
  j["theta"] = report.theta;
  j["r"] = report.r;
  j["horizon"] = report.horizon;
  j["dt"] = report.dt;
  j["pass"] = report.pass;
  nlohmann::json trajs = nlohmann::json::array();
  for (const BoundTrajectory& bt : report.trajectories) {
    nlohmann::json t;
    t["x0"] = bt.x0;
    t["settled"] = bt.settled;
    t["settling_time"] = bt.settled ? nlohmann::json(bt.settling_time)
                                    : nlohmann::json(nullptr);
    t["settled_sup"] = bt.settled_sup;
    t["nonfinite"] = bt.nonfinite;
    trajs.push_back(std::move(t));
  }
  j["trajectories"] = std::move(trajs);

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::io_error, "failed writing " + path);
}

void write_sim_csv(const SimResult& result, const std::string& path,
                   std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path + " for writing");
  const std::size_t k = result.points.empty() ? 0 : result.points[0].x.size();
  out << "# seed = " << seed << "\n";
  out << "t";
  for (std::size_t i = 0; i < k; ++i) out << ",x" << i;
  out << ",norm,err\n";
  char buf[64];
  for (const SimPoint& p : result.points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.t);
    out << buf;
    for (double xi : p.x) {
      std::snprintf(buf, sizeof buf, "%.17g", xi);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", p.norm);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", p.err);
    out << ',' << buf << '\n';
  }
  if (!out) fail(ErrorCode::io_error, "failed writing " + path);
}

}  // namespace nlca
