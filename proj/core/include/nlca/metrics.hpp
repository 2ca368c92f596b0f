#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlca/allocators.hpp"
#include "nlca/effectiveness.hpp"
#include "nlca/types.hpp"

namespace nlca {

// 1-norm moment error of an allocation after projection onto the model box:
// |G(project_box(alloc(tau_d, sigma)), sigma) - tau_d|_1.
double allocation_error(Allocator& alloc, const EffectivenessModel& model,
                        const MomentVector& tau_d, const StateVector& sigma);

struct MaeStart {
  double value = 0.0;
  // Terminal point of this start's ascent, in generating coordinates.
  ControlVector u{};
  StateVector sigma{};
  MomentVector tau{};  // model response at (u, sigma)
};

struct MaeReport {
  double mae = 0.0;
  MomentVector tau_arg{};
  StateVector sigma_arg{};
  int starts = 0;
  std::uint64_t seed = 0;
  std::vector<MaeStart> per_start;
};

// Maximum allocation error by multi-start local ascent. The search runs over
// generating pairs (u', sigma) in U x S with tau = G(u', sigma), so every
// candidate target is attainable by construction. Each start is an
// independent sub-seeded draw ascended by projected coordinate pattern
// search with step halving down to 1e-6; the report is the best maximum
// found, a lower bound on the true worst case. Start k depends only on
// (seed, k), so growing `starts` extends the candidate set and the reported
// value is monotone in it.
MaeReport mae(Allocator& alloc, const EffectivenessModel& model, int starts,
              std::uint64_t seed);

struct Attainability {
  bool attainable = false;
  ControlVector witness{};
  double residual = 0.0;  // 1-norm moment error at the witness
};

// Multi-start feasibility probe: 16 Latin-hypercube starts plus zero and the
// box center, each refined by iterated linearize-and-solve steps, accepted
// when the 1-norm residual reaches tol_feas. Deterministic.
Attainability is_attainable(const EffectivenessModel& model,
                            const MomentVector& tau, const StateVector& sigma,
                            double tol_feas = 1e-6);

// Uniform per_axis x per_axis grid over the flight envelope, endpoints
// included (per_axis 1 gives the center).
std::vector<StateVector> make_sigma_grid(const StateBox& box, int per_axis);

struct CoverageCell {
  StateVector sigma{};
  int attainable = 0;
  int covered = 0;
  double ratio = 0.0;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;
  double min_ratio = 0.0;
  double eps_cov = 0.0;
  double tol_feas = 0.0;
  int samples_per_sigma = 0;
  std::uint64_t seed = 0;
  // How the numbers were obtained, carried into every serialized report.
  std::string definition;
};

// Monte-Carlo coverage of the attainable moment set, per flight condition:
// sample targets uniformly from the bounding box of 2048 mapped deflection
// samples, keep the attainable ones, and count those the allocator serves
// within eps_cov. The ratio approximates the attainable-volume fraction the
// allocator covers; min_ratio takes the worst grid cell. Throws
// ErrorCode::insufficient_samples when fewer than 30 attainable targets turn
// up at some condition.
CoverageReport coverage_ratio(Allocator& alloc, const EffectivenessModel& model,
                              const std::vector<StateVector>& sigma_grid,
                              int samples_per_sigma, double eps_cov,
                              std::uint64_t seed);

// Reference command: a helix in moment space. Two moments trace a circle of
// the given radius at 1 Hz; the `axis` moment (cl 0, cm 1, cn 2) ramps
// linearly from 0 to axial_end over the run.
struct HelixSpec {
  double radius = 0.003;
  double axial_end = 0.003;
  int axis = 2;
};

MomentVector helix_target(double t, double duration, const HelixSpec& spec);

struct TrajectoryPoint {
  double t = 0.0;
  MomentVector tau_d{};
  MomentVector tau_achieved{};
  ControlVector u{};
  double err = 0.0;      // 1-norm allocation error
  double call_us = 0.0;  // allocator wall clock, microseconds
};

struct TrajectoryResult {
  std::vector<TrajectoryPoint> points;
  double mean_error = 0.0;
  double max_error = 0.0;
  double mean_call_us = 0.0;
};

// Replays the helix through the allocator at fixed step dt. Samples sit at
// t = k dt for k = 0 .. round(duration/dt)-1; alpha and beta ramp linearly
// across the model's flight envelope over the duration.
TrajectoryResult run_trajectory(Allocator& alloc,
                                const EffectivenessModel& model,
                                double duration = 1.0, double dt = 1e-3,
                                const HelixSpec& helix = {});

struct TimingRow {
  std::string name;
  double mean_us = 0.0;
  int calls = 0;
};

// Mean per-call wall clock on an identical random workload per allocator,
// warm-up excluded. Targets are drawn uniformly from +-tau_halfwidth per
// moment, conditions uniformly from sigma_box. n_calls >= 1000.
std::vector<TimingRow> bench_timing(std::span<Allocator* const> allocators,
                                    int n_calls, std::uint64_t seed,
                                    double tau_halfwidth = 0.003,
                                    const StateBox& sigma_box = {});

void write_mae_json(const MaeReport& report, const std::string& path);
void write_coverage_json(const CoverageReport& report, const std::string& path);

// Time series as CSV: a `# seed = N` provenance line, a header
// t,cl_d,cm_d,cn_d,cl_a,cm_a,cn_a,u0,u1,u2,u3,u4,err,call_us, then one row
// per sample with 17 significant digits.
void write_trajectory_csv(const TrajectoryResult& result,
                          const std::string& path, std::uint64_t seed);

}  // namespace nlca
