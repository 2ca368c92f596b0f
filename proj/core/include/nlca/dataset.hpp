#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlca/effectiveness.hpp"
#include "nlca/types.hpp"

namespace nlca {

// One training point: a desired moment, the flight condition it was sampled
// at, and the surface health mask (1 = healthy, 0 = failed at zero
// deflection). The generating deflections are deliberately not stored; the
// dataset records only what an allocator would see.
struct Sample {
  MomentVector tau;
  StateVector sigma;
  std::array<std::uint8_t, kNumSurfaces> fault_mask{1, 1, 1, 1, 1};
};

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;

  void validate() const {
    if (std::abs(train + val + test - 1.0) > 1e-12) {
      fail(ErrorCode::invalid_argument, "split fractions must sum to 1");
    }
    if (train < 0.0 || val < 0.0 || test < 0.0) {
      fail(ErrorCode::invalid_argument, "split fractions must be nonnegative");
    }
  }
};

struct Dataset {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
  SplitFractions split;
};

// Failure scenarios sampled during generation. Each scenario fixes the listed
// surfaces at zero deflection and flags them in the sample mask.
struct FaultOptions {
  bool enabled = false;
  std::vector<std::array<std::uint8_t, kNumSurfaces>> scenarios;

  // All-healthy plus the five single-surface failures.
  static FaultOptions single_surface_default();
};

// Latin hypercube sample of n points in the axis-aligned box given by
// lower/upper (equal lengths d >= 1). Returns a row-major n x d array. Each
// dimension is split into n equal bins; every bin holds exactly one point,
// placed uniformly inside the bin. Deterministic per seed, dimensions use
// independent derived substreams.
std::vector<double> lhs_sample(std::size_t n, std::span<const double> lower,
                               std::span<const double> upper,
                               std::uint64_t seed);

// Draws deflections by LHS over the surface box and conditions by LHS over
// the flight envelope, applies sampled fault masks, and evaluates the model
// to label each point with its attainable moment. n >= 10.
Dataset generate(const EffectivenessModel& model, std::size_t n,
                 std::uint64_t seed, const FaultOptions& faults = {});

// Regenerates the deflections (after masking) that produced each sample of
// generate() with the same arguments. Test hook for the reproducibility
// contract; training code has no business calling this.
std::vector<ControlVector> generating_controls(const EffectivenessModel& model,
                                               std::size_t n,
                                               std::uint64_t seed,
                                               const FaultOptions& faults = {});

// Disjoint index sets covering 0..n-1, shuffled by the dataset seed, with
// sizes floor(train*n) / floor(val*n) / remainder.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

SplitIndices split(const Dataset& ds);

// Affine input normalization fitted on the training split: for each of the
// five allocator inputs [Cl, Cm, Cn, alpha, beta],
//   scale = 2 / (max - min),  offset = (max + min) / 2,
// so scale * (x - offset) maps the observed range onto [-1, 1].
struct NormStats {
  std::array<double, 5> scale{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<double, 5> offset{0.0, 0.0, 0.0, 0.0, 0.0};
};

NormStats norm_stats(const Dataset& ds, std::span<const std::size_t> train_idx);

// CSV round-trip. Header row is cl,cm,cn,alpha,beta,m0,m1,m2,m3,m4; values
// are written with 17 significant digits so doubles survive exactly. Lines
// starting with '#' are provenance comments and are skipped on read.
void write_csv(const Dataset& ds, const std::string& path);
Dataset read_csv(const std::string& path);

}  // namespace nlca
