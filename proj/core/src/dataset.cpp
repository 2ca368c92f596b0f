#include "nlca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>

#include "nlca/rng.hpp"

namespace nlca {

namespace {

// Substream tags for seed derivation; arbitrary but frozen.
constexpr std::uint64_t kStreamLhsBase = 0x11;
constexpr std::uint64_t kStreamControls = 0x22;
constexpr std::uint64_t kStreamConditions = 0x33;
constexpr std::uint64_t kStreamFaults = 0x44;
constexpr std::uint64_t kStreamSplit = 0x55;

}  // namespace

FaultOptions FaultOptions::single_surface_default() {
  FaultOptions fo;
  fo.enabled = true;
  fo.scenarios.push_back({1, 1, 1, 1, 1});
  for (std::size_t i = 0; i < kNumSurfaces; ++i) {
    std::array<std::uint8_t, kNumSurfaces> mask{1, 1, 1, 1, 1};
    mask[i] = 0;
    fo.scenarios.push_back(mask);
  }
  return fo;
}

std::vector<double> lhs_sample(std::size_t n, std::span<const double> lower,
                               std::span<const double> upper,
                               std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::invalid_argument, "lhs_sample needs n >= 1");
  if (lower.size() != upper.size() || lower.empty()) {
    fail(ErrorCode::invalid_argument, "lhs_sample bounds length mismatch");
  }
  const std::size_t d = lower.size();
  for (std::size_t k = 0; k < d; ++k) {
    if (!(lower[k] <= upper[k])) {
      fail(ErrorCode::empty_box,
           "lhs_sample box has lower > upper in dimension " + std::to_string(k));
    }
  }

  std::vector<double> pts(n * d);
  std::vector<std::size_t> bins(n);
  for (std::size_t k = 0; k < d; ++k) {
    Rng rng(mix_seed(seed, kStreamLhsBase + k));
    std::iota(bins.begin(), bins.end(), std::size_t{0});
    shuffle_in_place(bins, rng);
    const double width = (upper[k] - lower[k]) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double jitter = rng.uniform01();
      pts[i * d + k] =
          lower[k] + (static_cast<double>(bins[i]) + jitter) * width;
    }
  }
  return pts;
}

namespace {

// Shared by generate() and generating_controls() so the reproducibility
// contract is a fact of the code path, not a promise.
void draw_points(const EffectivenessModel& model, std::size_t n,
                 std::uint64_t seed, const FaultOptions& faults,
                 std::vector<ControlVector>& controls,
                 std::vector<StateVector>& conditions,
                 std::vector<std::array<std::uint8_t, kNumSurfaces>>& masks) {
  const BoxSet box = model.box();
  const StateBox env = model.state_box();

  const std::array<double, kNumSurfaces> ulo = box.lower.v;
  const std::array<double, kNumSurfaces> uhi = box.upper.v;
  const std::vector<double> upts =
      lhs_sample(n, ulo, uhi, mix_seed(seed, kStreamControls));

  const std::array<double, 2> slo{env.lower.alpha, env.lower.beta};
  const std::array<double, 2> shi{env.upper.alpha, env.upper.beta};
  const std::vector<double> spts =
      lhs_sample(n, slo, shi, mix_seed(seed, kStreamConditions));

  Rng fault_rng(mix_seed(seed, kStreamFaults));

  controls.resize(n);
  conditions.resize(n);
  masks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::uint8_t, kNumSurfaces> mask{1, 1, 1, 1, 1};
    if (faults.enabled && !faults.scenarios.empty()) {
      mask = faults.scenarios[fault_rng.below(faults.scenarios.size())];
    }
    ControlVector u;
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      u[k] = mask[k] ? upts[i * kNumSurfaces + k] : 0.0;
    }
    controls[i] = u;
    conditions[i] = StateVector{spts[i * 2], spts[i * 2 + 1]};
    masks[i] = mask;
  }
}

}  // namespace

Dataset generate(const EffectivenessModel& model, std::size_t n,
                 std::uint64_t seed, const FaultOptions& faults) {
  if (n < 10) fail(ErrorCode::invalid_argument, "n must be >= 10");

  std::vector<ControlVector> controls;
  std::vector<StateVector> conditions;
  std::vector<std::array<std::uint8_t, kNumSurfaces>> masks;
  draw_points(model, n, seed, faults, controls, conditions, masks);

  Dataset ds;
  ds.seed = seed;
  ds.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.samples[i].tau = model.evaluate(controls[i], conditions[i]);
    ds.samples[i].sigma = conditions[i];
    ds.samples[i].fault_mask = masks[i];
  }
  return ds;
}

std::vector<ControlVector> generating_controls(const EffectivenessModel& model,
                                               std::size_t n,
                                               std::uint64_t seed,
                                               const FaultOptions& faults) {
  std::vector<ControlVector> controls;
  std::vector<StateVector> conditions;
  std::vector<std::array<std::uint8_t, kNumSurfaces>> masks;
  draw_points(model, n, seed, faults, controls, conditions, masks);
  return controls;
}

SplitIndices split(const Dataset& ds) {
  ds.split.validate();
  const std::size_t n = ds.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(ds.seed, kStreamSplit));
  shuffle_in_place(order, rng);

  const auto n_train = static_cast<std::size_t>(
      std::floor(ds.split.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(
      std::floor(ds.split.val * static_cast<double>(n)));

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

NormStats norm_stats(const Dataset& ds,
                     std::span<const std::size_t> train_idx) {
  if (train_idx.empty()) {
    fail(ErrorCode::invalid_argument, "norm_stats needs a nonempty split");
  }
  std::array<double, 5> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const std::size_t idx : train_idx) {
    const Sample& s = ds.samples.at(idx);
    const std::array<double, 5> x{s.tau.cl, s.tau.cm, s.tau.cn, s.sigma.alpha,
                                  s.sigma.beta};
    for (std::size_t k = 0; k < 5; ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  }
  NormStats st;
  static const char* const names[5] = {"cl", "cm", "cn", "alpha", "beta"};
  for (std::size_t k = 0; k < 5; ++k) {
    if (hi[k] == lo[k]) {
      fail(ErrorCode::degenerate_input,
           std::string("input '") + names[k] + "' is constant on the training split");
    }
    st.scale[k] = 2.0 / (hi[k] - lo[k]);
    st.offset[k] = 0.5 * (hi[k] + lo[k]);
  }
  return st;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write dataset csv: " + path);
  out << "# seed = " << ds.seed << "\n";
  out << "cl,cm,cn,alpha,beta,m0,m1,m2,m3,m4\n";
  char buf[512];
  for (const Sample& s : ds.samples) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d,%d\n", s.tau.cl,
                  s.tau.cm, s.tau.cn, s.sigma.alpha, s.sigma.beta,
                  static_cast<int>(s.fault_mask[0]),
                  static_cast<int>(s.fault_mask[1]),
                  static_cast<int>(s.fault_mask[2]),
                  static_cast<int>(s.fault_mask[3]),
                  static_cast<int>(s.fault_mask[4]));
    out << buf;
  }
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open dataset csv: " + path);

  Dataset ds;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (line.find("seed") != std::string::npos && eq != std::string::npos) {
        ds.seed = std::strtoull(line.c_str() + eq + 1, nullptr, 10);
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("cl,cm,cn,alpha,beta", 0) != 0) {
        fail(ErrorCode::format_error,
             "dataset csv missing expected header at line " +
                 std::to_string(lineno));
      }
      header_seen = true;
      continue;
    }
    Sample s;
    double vals[10];
    const char* p = line.c_str();
    for (int k = 0; k < 10; ++k) {
      char* end = nullptr;
      vals[k] = std::strtod(p, &end);
      if (end == p) {
        fail(ErrorCode::format_error,
             "bad dataset row at line " + std::to_string(lineno));
      }
      p = end;
      if (k < 9) {
        if (*p != ',') {
          fail(ErrorCode::format_error,
               "bad dataset row at line " + std::to_string(lineno));
        }
        ++p;
      }
    }
    s.tau = MomentVector{vals[0], vals[1], vals[2]};
    s.sigma = StateVector{vals[3], vals[4]};
    for (int k = 0; k < 5; ++k) {
      s.fault_mask[k] = vals[5 + k] != 0.0 ? 1 : 0;
    }
    ds.samples.push_back(s);
  }
  if (!header_seen) {
    fail(ErrorCode::format_error, "dataset csv has no header: " + path);
  }
  return ds;
}

}  // namespace nlca
