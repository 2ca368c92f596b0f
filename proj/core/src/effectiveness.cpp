#include "nlca/effectiveness.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace nlca {

namespace {

constexpr double kPwlKnee = 10.0;

double pwl(double x) {
  const double ax = std::abs(x);
  if (ax <= kPwlKnee) return x;
  return std::copysign(kPwlKnee + 0.5 * (ax - kPwlKnee), x);
}

// Slope of the ramp; undefined exactly at the knee.
double pwl_slope(double x, const char* where) {
  const double ax = std::abs(x);
  if (ax == kPwlKnee) {
    fail(ErrorCode::pwl_breakpoint,
         std::string("jacobian requested exactly at a ramp breakpoint (") +
             where + ")");
  }
  return ax < kPwlKnee ? 1.0 : 0.5;
}

}  // namespace

ControlVector project_box(const ControlVector& u, const BoxSet& box) {
  ControlVector p;
  for (std::size_t i = 0; i < kNumSurfaces; ++i) {
    p[i] = std::min(std::max(u[i], box.lower[i]), box.upper[i]);
  }
  return p;
}

MomentVector eval_synthetic(const ControlVector& u, const StateVector& sigma,
                            const SyntheticModelParams& p) {
  const double e = u[kElevator];
  const double sl = u[kClam7U] + u[kClam7L];
  const double sr = u[kClam8U] + u[kClam8L];
  const double fl = u[kClam7U] - u[kClam7L];
  const double fr = u[kClam8U] - u[kClam8L];
  const double ga = 1.0 + 0.01 * sigma.alpha;
  const double gm = 1.0 + 0.02 * sigma.alpha;

  MomentVector m;
  if (!p.pwl_variant) {
    m.cl = p.c_le * (sl - sr) * ga + p.c_lb * e * sigma.beta;
    m.cm = p.c_me * e * gm + p.c_ms * (sl + sr) + p.c_m2 * e * std::abs(e) +
           p.c_ma * (sl + sr) * sigma.alpha;
    m.cn = p.c_nf * (fl - fr) * ga + p.c_na * (sl - sr) * sigma.alpha;
  } else {
    const double pe = pwl(e);
    const double pga = pwl(ga);
    const double pgm = pwl(gm);
    m.cl = p.c_le * (sl - sr) * pga + p.c_lb * pe * sigma.beta;
    m.cm = p.c_me * pe * pgm + p.c_ms * (sl + sr) +
           p.c_ma * (sl + sr) * sigma.alpha;
    m.cn = p.c_nf * (fl - fr) * pga + p.c_na * (sl - sr) * sigma.alpha;
  }
  return m;
}

Mat35 jacobian_synthetic(const ControlVector& u, const StateVector& sigma,
                         const SyntheticModelParams& p) {
  const double e = u[kElevator];
  const double ga = 1.0 + 0.01 * sigma.alpha;
  const double gm = 1.0 + 0.02 * sigma.alpha;
  const double a = sigma.alpha;
  const double b = sigma.beta;

  Mat35 j{};
  if (!p.pwl_variant) {
    // Cl row
    j[0] = p.c_lb * b;
    j[1] = p.c_le * ga;
    j[2] = p.c_le * ga;
    j[3] = -p.c_le * ga;
    j[4] = -p.c_le * ga;
    // Cm row; d(e|e|)/de = 2|e|
    j[5] = p.c_me * gm + 2.0 * p.c_m2 * std::abs(e);
    j[6] = p.c_ms + p.c_ma * a;
    j[7] = p.c_ms + p.c_ma * a;
    j[8] = p.c_ms + p.c_ma * a;
    j[9] = p.c_ms + p.c_ma * a;
    // Cn row; clamshell columns combine spread and differential terms
    j[10] = 0.0;
    j[11] = p.c_nf * ga + p.c_na * a;
    j[12] = -p.c_nf * ga + p.c_na * a;
    j[13] = -p.c_nf * ga - p.c_na * a;
    j[14] = p.c_nf * ga - p.c_na * a;
  } else {
    const double de = pwl_slope(e, "elevator");
    const double pga = pwl(ga);
    const double pgm = pwl(gm);
    j[0] = p.c_lb * de * b;
    j[1] = p.c_le * pga;
    j[2] = p.c_le * pga;
    j[3] = -p.c_le * pga;
    j[4] = -p.c_le * pga;
    j[5] = p.c_me * de * pgm;
    j[6] = p.c_ms + p.c_ma * a;
    j[7] = p.c_ms + p.c_ma * a;
    j[8] = p.c_ms + p.c_ma * a;
    j[9] = p.c_ms + p.c_ma * a;
    j[10] = 0.0;
    j[11] = p.c_nf * pga + p.c_na * a;
    j[12] = -p.c_nf * pga + p.c_na * a;
    j[13] = -p.c_nf * pga - p.c_na * a;
    j[14] = p.c_nf * pga - p.c_na * a;
  }
  return j;
}

LinearEffectivenessModel make_axis_affine_model(double gain,
                                                double halfwidth) {
  Mat35 g{};
  g[0] = gain;
  g[5 + 1] = gain;
  g[10 + 2] = gain;
  return LinearEffectivenessModel(g, MomentVector{}, BoxSet::symmetric(halfwidth),
                                  StateBox{});
}

// ---------------------------------------------------------------------------
// Flat key-value model files
// ---------------------------------------------------------------------------

namespace {

const char* const kSurfaceKeys[kNumSurfaces] = {
    "delta_e", "delta_7u", "delta_7l", "delta_8u", "delta_8l"};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(value, &pos);
    while (pos < value.size() && std::isspace(static_cast<unsigned char>(value[pos]))) ++pos;
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    fail(ErrorCode::format_error, "bad numeric value for '" + key + "': " + value);
  }
}

}  // namespace

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open model file: " + path);

  ModelFile mf;
  ControlVector lo = mf.box.lower, hi = mf.box.upper;
  StateVector slo = mf.envelope.lower, shi = mf.envelope.upper;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::format_error, "model file line " + std::to_string(lineno) +
                                        " is not 'name = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));

    bool known = true;
    if (key == "c_le") mf.params.c_le = parse_double(key, value);
    else if (key == "c_lb") mf.params.c_lb = parse_double(key, value);
    else if (key == "c_me") mf.params.c_me = parse_double(key, value);
    else if (key == "c_ma") mf.params.c_ma = parse_double(key, value);
    else if (key == "c_m2") mf.params.c_m2 = parse_double(key, value);
    else if (key == "c_ms") mf.params.c_ms = parse_double(key, value);
    else if (key == "c_nf") mf.params.c_nf = parse_double(key, value);
    else if (key == "c_na") mf.params.c_na = parse_double(key, value);
    else if (key == "pwl_variant") mf.params.pwl_variant = parse_double(key, value) != 0.0;
    else if (key == "alpha_min") slo.alpha = parse_double(key, value);
    else if (key == "alpha_max") shi.alpha = parse_double(key, value);
    else if (key == "beta_min") slo.beta = parse_double(key, value);
    else if (key == "beta_max") shi.beta = parse_double(key, value);
    else known = false;

    if (!known) {
      bool surface = false;
      for (std::size_t i = 0; i < kNumSurfaces; ++i) {
        if (key == std::string(kSurfaceKeys[i]) + "_min") {
          lo[i] = parse_double(key, value);
          surface = true;
        } else if (key == std::string(kSurfaceKeys[i]) + "_max") {
          hi[i] = parse_double(key, value);
          surface = true;
        }
      }
      if (!surface) {
        fail(ErrorCode::format_error, "unknown model file key: " + key);
      }
    }
  }

  mf.box = BoxSet(lo, hi);
  mf.envelope = StateBox(slo, shi);
  return mf;
}

void save_model_file(const ModelFile& mf, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write model file: " + path);

  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  out << "# synthetic moment model coefficients\n";
  put("c_le", mf.params.c_le);
  put("c_lb", mf.params.c_lb);
  put("c_me", mf.params.c_me);
  put("c_ma", mf.params.c_ma);
  put("c_m2", mf.params.c_m2);
  put("c_ms", mf.params.c_ms);
  put("c_nf", mf.params.c_nf);
  put("c_na", mf.params.c_na);
  out << "pwl_variant = " << (mf.params.pwl_variant ? 1 : 0) << "\n";
  out << "# deflection limits, degrees\n";
  for (std::size_t i = 0; i < kNumSurfaces; ++i) {
    put((std::string(kSurfaceKeys[i]) + "_min").c_str(), mf.box.lower[i]);
    put((std::string(kSurfaceKeys[i]) + "_max").c_str(), mf.box.upper[i]);
  }
  out << "# flight envelope, degrees\n";
  put("alpha_min", mf.envelope.lower.alpha);
  put("alpha_max", mf.envelope.upper.alpha);
  put("beta_min", mf.envelope.lower.beta);
  put("beta_max", mf.envelope.upper.beta);
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

}  // namespace nlca
