#include "nlca/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nlca/rng.hpp"

namespace nlca {

using nlohmann::json;

MlpArch MlpArch::parse(const std::string& text) {
  MlpArch arch;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dot = text.find('.', pos);
    const std::string tok =
        text.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
      fail(ErrorCode::invalid_argument, "bad architecture token in '" + text + "'");
    }
    arch.layers.push_back(std::stoi(tok));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  arch.validate();
  return arch;
}

std::string MlpArch::str() const {
  std::string s;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(layers[i]);
  }
  return s;
}

void MlpArch::validate() const {
  if (layers.size() < 3) {
    fail(ErrorCode::invalid_argument,
         "architecture needs at least 3 layers (one hidden): " + str());
  }
  if (layers.front() != 5 && layers.front() != 10) {
    fail(ErrorCode::invalid_argument,
         "architecture input width must be 5, or 10 when fault-conditioned: " +
             str());
  }
  if (layers.back() != static_cast<int>(kNumSurfaces)) {
    fail(ErrorCode::invalid_argument,
         "architecture output width must be 5: " + str());
  }
  for (int w : layers) {
    if (w < 1) fail(ErrorCode::invalid_argument, "layer width must be >= 1");
  }
}

std::size_t parameter_count(const MlpArch& arch) {
  arch.validate();
  std::size_t count = 10;  // normalization scales and offsets
  for (std::size_t i = 1; i < arch.layers.size(); ++i) {
    count += static_cast<std::size_t>(arch.layers[i - 1] + 1) *
             static_cast<std::size_t>(arch.layers[i]);
  }
  return count;
}

std::size_t Network::trainable_count() const {
  std::size_t count = 0;
  for (const Layer& l : layers) count += l.theta.size() + l.b.size();
  return count;
}

void Network::validate() const {
  arch.validate();
  if (layers.size() + 1 != arch.layers.size()) {
    fail(ErrorCode::shape_mismatch, "layer count does not match architecture");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto rows = static_cast<std::size_t>(arch.layers[i + 1]);
    const auto cols = static_cast<std::size_t>(arch.layers[i]);
    if (layers[i].theta.size() != rows * cols || layers[i].b.size() != rows) {
      fail(ErrorCode::shape_mismatch,
           "layer " + std::to_string(i) + " has wrong shape");
    }
  }
}

Network init_network(const MlpArch& arch, const NormStats& norm,
                     const BoxSet& output_box, std::uint64_t seed) {
  arch.validate();
  Network net;
  net.arch = arch;
  net.norm = norm;
  net.output_box = output_box;
  Rng rng(mix_seed(seed, 0x1A17));
  for (std::size_t i = 1; i < arch.layers.size(); ++i) {
    const auto rows = static_cast<std::size_t>(arch.layers[i]);
    const auto cols = static_cast<std::size_t>(arch.layers[i - 1]);
    Layer l;
    l.theta.resize(rows * cols);
    l.b.assign(rows, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(cols));
    for (double& w : l.theta) w = rng.uniform(-limit, limit);
    net.layers.push_back(std::move(l));
  }
  // The clamshell ranges are one-sided, so zero-centered raw outputs start
  // half outside the box where the projection subgradient vanishes; placing
  // the output biases at the box center keeps every surface trainable from
  // the first step.
  const ControlVector center = output_box.center();
  for (std::size_t k = 0; k < kNumSurfaces; ++k) {
    net.layers.back().b[k] = center[k];
  }
  return net;
}

std::vector<double> mlp_forward_raw(std::span<const Layer> layers,
                                    std::span<const double> input) {
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> z;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    const std::size_t rows = l.b.size();
    if (rows == 0 || l.theta.size() % rows != 0) {
      fail(ErrorCode::shape_mismatch, "malformed layer");
    }
    const std::size_t cols = l.theta.size() / rows;
    if (cols != a.size()) {
      fail(ErrorCode::shape_mismatch,
           "layer " + std::to_string(li) + " expects input width " +
               std::to_string(cols) + ", got " + std::to_string(a.size()));
    }
    z.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = l.b[r];
      const double* w = &l.theta[r * cols];
      for (std::size_t c = 0; c < cols; ++c) acc += w[c] * a[c];
      z[r] = acc;
    }
    if (li + 1 < layers.size()) {
      for (double& x : z) x = x > 0.0 ? x : 0.0;
    }
    a.swap(z);
  }
  return a;
}

ControlVector forward(const Network& net, const MomentVector& tau,
                      const StateVector& sigma,
                      const std::array<std::uint8_t, kNumSurfaces>* mask) {
  const std::size_t in_width = static_cast<std::size_t>(net.arch.layers.front());
  std::array<double, 10> input{};
  const std::array<double, 5> raw{tau.cl, tau.cm, tau.cn, sigma.alpha,
                                  sigma.beta};
  for (std::size_t k = 0; k < 5; ++k) {
    input[k] = net.norm.scale[k] * (raw[k] - net.norm.offset[k]);
  }
  if (in_width == 10) {
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      input[5 + k] = mask ? static_cast<double>((*mask)[k]) : 1.0;
    }
  } else if (in_width != 5) {
    fail(ErrorCode::shape_mismatch, "network input width must be 5 or 10");
  }

  const std::vector<double> out = mlp_forward_raw(
      net.layers, std::span<const double>(input.data(), in_width));
  if (out.size() != kNumSurfaces) {
    fail(ErrorCode::shape_mismatch, "network output width must be 5");
  }
  ControlVector u;
  for (std::size_t k = 0; k < kNumSurfaces; ++k) u[k] = out[k];
  return u;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {
constexpr int kNetFormatVersion = 1;
}

void save_network(const Network& net, const std::string& path,
                  std::uint64_t seed) {
  net.validate();
  json j;
  j["version"] = kNetFormatVersion;
  j["seed"] = seed;
  j["arch"] = net.arch.layers;
  j["norm"]["scale"] = net.norm.scale;
  j["norm"]["offset"] = net.norm.offset;
  j["layers"] = json::array();
  for (const Layer& l : net.layers) {
    json jl;
    jl["theta"] = l.theta;
    jl["b"] = l.b;
    j["layers"].push_back(std::move(jl));
  }
  j["output_box"]["lower"] = net.output_box.lower.v;
  j["output_box"]["upper"] = net.output_box.upper.v;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write network file: " + path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open network file: " + path);

  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::format_error,
         "network file is not valid JSON: " + std::string(e.what()));
  }

  Network net;
  try {
    if (j.at("version").get<int>() != kNetFormatVersion) {
      fail(ErrorCode::format_error,
           "unsupported network file version " +
               std::to_string(j.at("version").get<int>()));
    }
    net.arch.layers = j.at("arch").get<std::vector<int>>();
    const auto scale = j.at("norm").at("scale").get<std::vector<double>>();
    const auto offset = j.at("norm").at("offset").get<std::vector<double>>();
    if (scale.size() != 5 || offset.size() != 5) {
      fail(ErrorCode::format_error, "norm block must hold 5 scales/offsets");
    }
    std::copy(scale.begin(), scale.end(), net.norm.scale.begin());
    std::copy(offset.begin(), offset.end(), net.norm.offset.begin());
    for (const auto& jl : j.at("layers")) {
      Layer l;
      l.theta = jl.at("theta").get<std::vector<double>>();
      l.b = jl.at("b").get<std::vector<double>>();
      net.layers.push_back(std::move(l));
    }
    const auto lo = j.at("output_box").at("lower").get<std::vector<double>>();
    const auto hi = j.at("output_box").at("upper").get<std::vector<double>>();
    if (lo.size() != kNumSurfaces || hi.size() != kNumSurfaces) {
      fail(ErrorCode::format_error, "output_box must hold 5 bounds per side");
    }
    ControlVector clo, chi;
    std::copy(lo.begin(), lo.end(), clo.v.begin());
    std::copy(hi.begin(), hi.end(), chi.v.begin());
    net.output_box = BoxSet(clo, chi);
  } catch (const json::exception& e) {
    fail(ErrorCode::format_error,
         "network file is missing fields: " + std::string(e.what()));
  }

  try {
    net.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::shape_mismatch ||
        e.code() == ErrorCode::invalid_argument) {
      fail(ErrorCode::format_error,
           std::string("network file is inconsistent: ") + e.what());
    }
    throw;
  }
  return net;
}

}  // namespace nlca
