#include "nlca/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "nlca/dataset.hpp"
#include "nlca/error.hpp"
#include "nlca/qp.hpp"
#include "nlca/rng.hpp"

namespace nlca {

namespace {

constexpr std::uint64_t kStreamMaeStart = 0x3AE000;
constexpr std::uint64_t kStreamCoverageBox = 0xC0B000;
constexpr std::uint64_t kStreamCoverageDraw = 0xCD0000;
constexpr std::uint64_t kStreamTiming = 0xBE7C00;
constexpr std::uint64_t kAttainStartSeed = 0xA77A1;

volatile double g_timing_sink = 0.0;

double elapsed_us(std::chrono::steady_clock::time_point t0,
                  std::chrono::steady_clock::time_point t1) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
             .count() /
         1000.0;
}

// The maximum-error search runs over the 7 generating coordinates
// [u0..u4, alpha, beta].
struct SearchSpace {
  std::array<double, 7> lo{};
  std::array<double, 7> hi{};
};

SearchSpace search_space(const EffectivenessModel& model) {
  const BoxSet ub = model.box();
  const StateBox sb = model.state_box();
  SearchSpace s;
  for (std::size_t i = 0; i < kNumSurfaces; ++i) {
    s.lo[i] = ub.lower[i];
    s.hi[i] = ub.upper[i];
  }
  s.lo[5] = sb.lower.alpha;
  s.hi[5] = sb.upper.alpha;
  s.lo[6] = sb.lower.beta;
  s.hi[6] = sb.upper.beta;
  return s;
}

double eval_generating(Allocator& alloc, const EffectivenessModel& model,
                       const std::array<double, 7>& p, MomentVector* tau_out) {
  const ControlVector u{{p[0], p[1], p[2], p[3], p[4]}};
  const StateVector sigma{p[5], p[6]};
  const MomentVector tau = model.evaluate(u, sigma);
  if (tau_out) *tau_out = tau;
  return allocation_error(alloc, model, tau, sigma);
}

MaeStart ascend_from(Allocator& alloc, const EffectivenessModel& model,
                     const SearchSpace& s, std::array<double, 7> x) {
  constexpr double kStepTol = 1e-6;
  std::array<double, 7> step;
  for (int j = 0; j < 7; ++j) step[j] = 0.25 * (s.hi[j] - s.lo[j]);
  double f = eval_generating(alloc, model, x, nullptr);
  while (*std::max_element(step.begin(), step.end()) > kStepTol) {
    bool improved = false;
    for (int j = 0; j < 7; ++j) {
      if (step[j] <= 0.0) continue;
      for (const double dir : {1.0, -1.0}) {
        std::array<double, 7> cand = x;
        cand[j] = std::clamp(x[j] + dir * step[j], s.lo[j], s.hi[j]);
        if (cand[j] == x[j]) continue;
        const double fc = eval_generating(alloc, model, cand, nullptr);
        if (fc > f) {
          f = fc;
          x = cand;
          improved = true;
        }
      }
    }
    if (!improved) {
      for (double& h : step) h *= 0.5;
    }
  }
  MaeStart out;
  out.value = eval_generating(alloc, model, x, &out.tau);
  out.u = ControlVector{{x[0], x[1], x[2], x[3], x[4]}};
  out.sigma = StateVector{x[5], x[6]};
  return out;
}

}  // namespace

double allocation_error(Allocator& alloc, const EffectivenessModel& model,
                        const MomentVector& tau_d, const StateVector& sigma) {
  const ControlVector u = project_box(alloc.allocate(tau_d, sigma), model.box());
  return norm1(model.evaluate(u, sigma) - tau_d);
}

MaeReport mae(Allocator& alloc, const EffectivenessModel& model, int starts,
              std::uint64_t seed) {
  if (starts < 1) {
    fail(ErrorCode::invalid_argument, "starts must be >= 1");
  }
  const SearchSpace s = search_space(model);
  MaeReport rep;
  rep.starts = starts;
  rep.seed = seed;
  rep.per_start.reserve(static_cast<std::size_t>(starts));
  for (int k = 0; k < starts; ++k) {
    const std::vector<double> p0 =
        lhs_sample(1, std::span<const double>(s.lo.data(), 7),
                   std::span<const double>(s.hi.data(), 7),
                   mix_seed(seed, kStreamMaeStart + static_cast<std::uint64_t>(k)));
    std::array<double, 7> x;
    std::copy(p0.begin(), p0.end(), x.begin());
    MaeStart st = ascend_from(alloc, model, s, x);
    if (k == 0 || st.value > rep.mae) {
      rep.mae = st.value;
      rep.tau_arg = st.tau;
      rep.sigma_arg = st.sigma;
    }
    rep.per_start.push_back(std::move(st));
  }
  return rep;
}

Attainability is_attainable(const EffectivenessModel& model,
                            const MomentVector& tau, const StateVector& sigma,
                            double tol_feas) {
  if (!(tol_feas > 0.0)) {
    fail(ErrorCode::invalid_argument, "tol_feas must be positive");
  }
  const BoxSet box = model.box();
  constexpr int kLhsStarts = 16;
  std::array<ControlVector, kLhsStarts + 2> starts;
  const std::vector<double> pts = lhs_sample(
      kLhsStarts, std::span<const double>(box.lower.v.data(), kNumSurfaces),
      std::span<const double>(box.upper.v.data(), kNumSurfaces),
      kAttainStartSeed);
  for (int k = 0; k < kLhsStarts; ++k) {
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      starts[k][i] = pts[kNumSurfaces * static_cast<std::size_t>(k) + i];
    }
  }
  starts[kLhsStarts] = project_box(ControlVector{}, box);
  starts[kLhsStarts + 1] = box.center();

  const WeightMatrix w;
  Attainability best;
  best.residual = std::numeric_limits<double>::infinity();
  for (const ControlVector& s0 : starts) {
    ControlVector u = s0;
    for (int it = 0; it < 25; ++it) {
      const double res = norm1(model.evaluate(u, sigma) - tau);
      if (res < best.residual) {
        best.residual = res;
        best.witness = u;
      }
      if (res <= tol_feas) {
        best.attainable = true;
        return best;
      }
      const AffineLocalModel local = linearize_off_kink(model, u, sigma);
      const ControlVector next = solve_box_qp(local, tau, w, box).u;
      double move = 0.0;
      for (std::size_t i = 0; i < kNumSurfaces; ++i) {
        move = std::max(move, std::abs(next[i] - u[i]));
      }
      u = next;
      if (move < 1e-14) break;
    }
    const double res = norm1(model.evaluate(u, sigma) - tau);
    if (res < best.residual) {
      best.residual = res;
      best.witness = u;
    }
    if (res <= tol_feas) {
      best.attainable = true;
      return best;
    }
  }
  best.attainable = best.residual <= tol_feas;
  return best;
}

std::vector<StateVector> make_sigma_grid(const StateBox& box, int per_axis) {
  if (per_axis < 1) {
    fail(ErrorCode::invalid_argument, "per_axis must be >= 1");
  }
  box.validate();
  std::vector<double> alphas, betas;
  if (per_axis == 1) {
    alphas.push_back(box.center().alpha);
    betas.push_back(box.center().beta);
  } else {
    for (int i = 0; i < per_axis; ++i) {
      const double frac = static_cast<double>(i) / (per_axis - 1);
      alphas.push_back(box.lower.alpha +
                       (box.upper.alpha - box.lower.alpha) * frac);
      betas.push_back(box.lower.beta + (box.upper.beta - box.lower.beta) * frac);
    }
  }
  std::vector<StateVector> grid;
  grid.reserve(alphas.size() * betas.size());
  for (double a : alphas) {
    for (double b : betas) grid.push_back(StateVector{a, b});
  }
  return grid;
}

CoverageReport coverage_ratio(Allocator& alloc, const EffectivenessModel& model,
                              const std::vector<StateVector>& sigma_grid,
                              int samples_per_sigma, double eps_cov,
                              std::uint64_t seed) {
  if (sigma_grid.empty()) {
    fail(ErrorCode::invalid_argument, "sigma grid must be nonempty");
  }
  if (samples_per_sigma < 100) {
    fail(ErrorCode::invalid_argument, "samples_per_sigma must be >= 100");
  }
  if (!(eps_cov > 0.0)) {
    fail(ErrorCode::invalid_argument, "eps_cov must be positive");
  }
  const BoxSet box = model.box();
  constexpr int kBoundingSamples = 2048;
  constexpr double kTolFeas = 1e-6;

  CoverageReport rep;
  rep.eps_cov = eps_cov;
  rep.tol_feas = kTolFeas;
  rep.samples_per_sigma = samples_per_sigma;
  rep.seed = seed;
  rep.definition =
      "fraction of attainable targets served within eps_cov; targets drawn "
      "uniformly from the bounding box of 2048 mapped deflection samples per "
      "condition, attainability decided at tol_feas; approximates the "
      "attainable-volume coverage as eps_cov -> 0";
  rep.min_ratio = std::numeric_limits<double>::infinity();

  for (std::size_t ci = 0; ci < sigma_grid.size(); ++ci) {
    const StateVector sigma = sigma_grid[ci];
    const std::vector<double> us = lhs_sample(
        kBoundingSamples,
        std::span<const double>(box.lower.v.data(), kNumSurfaces),
        std::span<const double>(box.upper.v.data(), kNumSurfaces),
        mix_seed(seed, kStreamCoverageBox + ci));
    Vec3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-lo[0], -lo[1], -lo[2]};
    for (int k = 0; k < kBoundingSamples; ++k) {
      ControlVector u;
      for (std::size_t i = 0; i < kNumSurfaces; ++i) {
        u[i] = us[kNumSurfaces * static_cast<std::size_t>(k) + i];
      }
      const MomentVector tau = model.evaluate(u, sigma);
      for (std::size_t m = 0; m < kNumMoments; ++m) {
        lo[m] = std::min(lo[m], tau[m]);
        hi[m] = std::max(hi[m], tau[m]);
      }
    }

    Rng rng(mix_seed(seed, kStreamCoverageDraw + ci));
    CoverageCell cell;
    cell.sigma = sigma;
    for (int k = 0; k < samples_per_sigma; ++k) {
      const MomentVector tau{rng.uniform(lo[0], hi[0]),
                             rng.uniform(lo[1], hi[1]),
                             rng.uniform(lo[2], hi[2])};
      if (!is_attainable(model, tau, sigma, kTolFeas).attainable) continue;
      ++cell.attainable;
      if (allocation_error(alloc, model, tau, sigma) <= eps_cov) {
        ++cell.covered;
      }
    }
    if (cell.attainable < 30) {
      fail(ErrorCode::insufficient_samples,
           "only " + std::to_string(cell.attainable) +
               " attainable targets at alpha=" + std::to_string(sigma.alpha) +
               ", beta=" + std::to_string(sigma.beta));
    }
    cell.ratio = static_cast<double>(cell.covered) / cell.attainable;
    rep.min_ratio = std::min(rep.min_ratio, cell.ratio);
    rep.cells.push_back(cell);
  }
  return rep;
}

MomentVector helix_target(double t, double duration, const HelixSpec& spec) {
  if (!(duration > 0.0)) {
    fail(ErrorCode::invalid_argument, "duration must be positive");
  }
  if (spec.axis < 0 || spec.axis > 2) {
    fail(ErrorCode::invalid_argument, "helix axis must be 0, 1, or 2");
  }
  const double phase = 2.0 * std::numbers::pi * t;
  const std::array<double, 2> circ{spec.radius * std::cos(phase),
                                   spec.radius * std::sin(phase)};
  MomentVector tau;
  std::size_t ci = 0;
  for (std::size_t m = 0; m < kNumMoments; ++m) {
    tau[m] = (static_cast<int>(m) == spec.axis)
                 ? spec.axial_end * (t / duration)
                 : circ[ci++];
  }
  return tau;
}

TrajectoryResult run_trajectory(Allocator& alloc,
                                const EffectivenessModel& model,
                                double duration, double dt,
                                const HelixSpec& helix) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "dt must be positive");
  if (!(duration > 0.0)) {
    fail(ErrorCode::invalid_argument, "duration must be positive");
  }
  const long n = std::lround(duration / dt);
  if (n < 1) {
    fail(ErrorCode::invalid_argument, "duration shorter than one step");
  }
  const StateBox sb = model.state_box();
  const BoxSet box = model.box();

  TrajectoryResult out;
  out.points.reserve(static_cast<std::size_t>(n));
  double sum_err = 0.0;
  double sum_us = 0.0;
  for (long k = 0; k < n; ++k) {
    TrajectoryPoint p;
    p.t = static_cast<double>(k) * dt;
    const double frac = p.t / duration;
    p.tau_d = helix_target(p.t, duration, helix);
    const StateVector sigma{
        sb.lower.alpha + (sb.upper.alpha - sb.lower.alpha) * frac,
        sb.lower.beta + (sb.upper.beta - sb.lower.beta) * frac};

    const auto t0 = std::chrono::steady_clock::now();
    const ControlVector u = alloc.allocate(p.tau_d, sigma);
    const auto t1 = std::chrono::steady_clock::now();

    p.call_us = elapsed_us(t0, t1);
    p.u = project_box(u, box);
    p.tau_achieved = model.evaluate(p.u, sigma);
    p.err = norm1(p.tau_achieved - p.tau_d);
    sum_err += p.err;
    sum_us += p.call_us;
    out.max_error = std::max(out.max_error, p.err);
    out.points.push_back(p);
  }
  out.mean_error = sum_err / static_cast<double>(n);
  out.mean_call_us = sum_us / static_cast<double>(n);
  return out;
}

std::vector<TimingRow> bench_timing(std::span<Allocator* const> allocators,
                                    int n_calls, std::uint64_t seed,
                                    double tau_halfwidth,
                                    const StateBox& sigma_box) {
  if (n_calls < 1000) {
    fail(ErrorCode::invalid_argument, "n_calls must be >= 1000");
  }
  if (!(tau_halfwidth >= 0.0)) {
    fail(ErrorCode::invalid_argument, "tau_halfwidth must be nonnegative");
  }
  sigma_box.validate();

  struct Item {
    MomentVector tau;
    StateVector sigma;
  };
  std::vector<Item> work(static_cast<std::size_t>(n_calls));
  Rng rng(mix_seed(seed, kStreamTiming));
  for (Item& it : work) {
    it.tau = MomentVector{rng.uniform(-tau_halfwidth, tau_halfwidth),
                          rng.uniform(-tau_halfwidth, tau_halfwidth),
                          rng.uniform(-tau_halfwidth, tau_halfwidth)};
    it.sigma = StateVector{
        rng.uniform(sigma_box.lower.alpha, sigma_box.upper.alpha),
        rng.uniform(sigma_box.lower.beta, sigma_box.upper.beta)};
  }
  const int warmup = std::min(n_calls / 10, 1000);

  std::vector<TimingRow> rows;
  rows.reserve(allocators.size());
  for (Allocator* a : allocators) {
    a->reset();
    double sink = 0.0;
    for (int k = 0; k < warmup; ++k) {
      sink += a->allocate(work[static_cast<std::size_t>(k)].tau,
                          work[static_cast<std::size_t>(k)].sigma)[0];
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (const Item& it : work) {
      sink += a->allocate(it.tau, it.sigma)[0];
    }
    const auto t1 = std::chrono::steady_clock::now();
    g_timing_sink = sink;
    rows.push_back(TimingRow{a->name(), elapsed_us(t0, t1) / n_calls, n_calls});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

using nlohmann::json;

namespace {

json moment_json(const MomentVector& m) {
  return json::array({m.cl, m.cm, m.cn});
}

void dump_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write report: " + path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

}  // namespace

void write_mae_json(const MaeReport& report, const std::string& path) {
  json j;
  j["seed"] = report.seed;
  j["starts"] = report.starts;
  j["mae"] = report.mae;
  j["argmax"]["tau"] = moment_json(report.tau_arg);
  j["argmax"]["sigma"]["alpha"] = report.sigma_arg.alpha;
  j["argmax"]["sigma"]["beta"] = report.sigma_arg.beta;
  j["per_start"] = json::array();
  for (const MaeStart& st : report.per_start) {
    json js;
    js["value"] = st.value;
    js["u"] = st.u.v;
    js["sigma"]["alpha"] = st.sigma.alpha;
    js["sigma"]["beta"] = st.sigma.beta;
    js["tau"] = moment_json(st.tau);
    j["per_start"].push_back(std::move(js));
  }
  dump_json(j, path);
}

void write_coverage_json(const CoverageReport& report,
                         const std::string& path) {
  json j;
  j["seed"] = report.seed;
  j["eps_cov"] = report.eps_cov;
  j["tol_feas"] = report.tol_feas;
  j["samples_per_sigma"] = report.samples_per_sigma;
  j["min_ratio"] = report.min_ratio;
  j["definition"] = report.definition;
  j["cells"] = json::array();
  for (const CoverageCell& c : report.cells) {
    json jc;
    jc["alpha"] = c.sigma.alpha;
    jc["beta"] = c.sigma.beta;
    jc["attainable"] = c.attainable;
    jc["covered"] = c.covered;
    jc["ratio"] = c.ratio;
    j["cells"].push_back(std::move(jc));
  }
  dump_json(j, path);
}

void write_trajectory_csv(const TrajectoryResult& result,
                          const std::string& path, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write trajectory csv: " + path);
  out << "# seed = " << seed << "\n";
  out << "t,cl_d,cm_d,cn_d,cl_a,cm_a,cn_a,u0,u1,u2,u3,u4,err,call_us\n";
  char buf[640];
  for (const TrajectoryPoint& p : result.points) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  p.t, p.tau_d.cl, p.tau_d.cm, p.tau_d.cn, p.tau_achieved.cl,
                  p.tau_achieved.cm, p.tau_achieved.cn, p.u[0], p.u[1], p.u[2],
                  p.u[3], p.u[4], p.err, p.call_us);
    out << buf;
  }
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

}  // namespace nlca
