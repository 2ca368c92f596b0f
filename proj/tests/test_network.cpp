#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "nlca/error.hpp"
#include "nlca/network.hpp"

using namespace nlca;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Network small_net(std::uint64_t seed) {
  const MlpArch arch = MlpArch::parse("5.8.5");
  NormStats norm;
  for (int k = 0; k < 5; ++k) {
    norm.scale[k] = 0.5 + 0.1 * k;
    norm.offset[k] = -0.2 * k;
  }
  return init_network(arch, norm, BoxSet{}, seed);
}

}  // namespace

TEST_CASE("parameter counts for the benchmark architectures") {
  const struct {
    const char* arch;
    std::size_t count;
  } rows[] = {
      {"5.4.5", 59},           {"5.8.5", 103},
      {"5.16.8.5", 287},       {"5.16.8.4.5", 303},
      {"5.16.8.8.5", 359},     {"5.8.16.8.5", 383},
      {"5.16.16.8.5", 559},    {"5.32.16.5", 815},
      {"5.32.16.8.5", 911},    {"5.16.32.16.5", 1263},
  };
  for (const auto& row : rows) {
    const MlpArch arch = MlpArch::parse(row.arch);
    CHECK_MESSAGE(parameter_count(arch) == row.count, row.arch);
  }
}

TEST_CASE("trainable count excludes the frozen normalization") {
  const MlpArch arch = MlpArch::parse("5.16.8.5");
  const Network net = init_network(arch, NormStats{}, BoxSet{}, 1);
  CHECK(net.trainable_count() == parameter_count(arch) - 10);
}

TEST_CASE("fault-conditioned input widens to ten") {
  const MlpArch arch = MlpArch::parse("10.8.5");
  CHECK(arch.fault_conditioned());
  CHECK(parameter_count(arch) == 10 + (10 + 1) * 8 + (8 + 1) * 5);
  CHECK_FALSE(MlpArch::parse("5.8.5").fault_conditioned());
}

TEST_CASE("architecture strings round-trip") {
  for (const char* text : {"5.4.5", "5.16.8.5", "10.32.16.5"}) {
    CHECK(MlpArch::parse(text).str() == text);
  }
}

TEST_CASE("architecture validation rejects malformed shapes") {
  CHECK_THROWS_AS(MlpArch::parse("5.4"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5"), Error);
  CHECK_THROWS_AS(MlpArch::parse(""), Error);
  CHECK_THROWS_AS(MlpArch::parse("4.8.5"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5.8.4"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5.0.5"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5.-3.5"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5.a.5"), Error);
  CHECK_THROWS_AS(MlpArch::parse("5..5"), Error);
  CHECK_NOTHROW(MlpArch::parse("5.1.5"));
}

TEST_CASE("raw forward pass on a hand-built two-layer net") {
  // Hidden layer: 2 units on 1 input. theta = [[2], [-3]], b = [1, 1].
  // Output layer: 1 unit. theta = [[1, 1]], b = [0.5].
  std::vector<Layer> layers(2);
  layers[0].theta = {2.0, -3.0};
  layers[0].b = {1.0, 1.0};
  layers[1].theta = {1.0, 1.0};
  layers[1].b = {0.5};

  // x = 1: hidden pre-act [3, -2] -> ReLU [3, 0] -> output 3.5.
  std::vector<double> y = mlp_forward_raw(layers, std::vector<double>{1.0});
  REQUIRE(y.size() == 1);
  CHECK(y[0] == doctest::Approx(3.5).epsilon(1e-15));

  // x = -1: hidden pre-act [-1, 4] -> ReLU [0, 4] -> output 4.5.
  y = mlp_forward_raw(layers, std::vector<double>{-1.0});
  CHECK(y[0] == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("full forward applies normalization before the layers") {
  // Identity-ish single hidden layer wide enough to pass values through:
  // with ReLU(x) - ReLU(-x) = x the net computes the normalized inputs.
  MlpArch arch;
  arch.layers = {5, 10, 5};
  NormStats norm;
  norm.scale = {2.0, 1.0, 1.0, 0.5, 1.0};
  norm.offset = {0.1, 0.0, 0.0, 4.0, 0.0};
  Network net;
  net.arch = arch;
  net.norm = norm;
  net.output_box = BoxSet{};
  net.layers.resize(2);
  net.layers[0].theta.assign(10 * 5, 0.0);
  net.layers[0].b.assign(10, 0.0);
  net.layers[1].theta.assign(5 * 10, 0.0);
  net.layers[1].b.assign(5, 0.0);
  for (int k = 0; k < 5; ++k) {
    net.layers[0].theta[(2 * k) * 5 + k] = 1.0;
    net.layers[0].theta[(2 * k + 1) * 5 + k] = -1.0;
    net.layers[1].theta[k * 10 + 2 * k] = 1.0;
    net.layers[1].theta[k * 10 + 2 * k + 1] = -1.0;
  }
  net.validate();

  const MomentVector tau{0.3, -0.7, 0.2};
  const StateVector sigma{6.0, -3.0};
  const ControlVector u = forward(net, tau, sigma);
  CHECK(u[0] == doctest::Approx(2.0 * (0.3 - 0.1)).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(-0.7).epsilon(1e-15));
  CHECK(u[2] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(u[3] == doctest::Approx(0.5 * (6.0 - 4.0)).epsilon(1e-15));
  CHECK(u[4] == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("fault-conditioned forward consumes the mask") {
  const MlpArch arch = MlpArch::parse("10.4.5");
  const Network net = init_network(arch, NormStats{}, BoxSet{}, 7);
  const MomentVector tau{0.01, 0.0, 0.0};
  const StateVector sigma{4.0, 0.0};
  const std::array<std::uint8_t, kNumSurfaces> healthy{1, 1, 1, 1, 1};
  const std::array<std::uint8_t, kNumSurfaces> faulty{1, 0, 1, 1, 1};
  const ControlVector a = forward(net, tau, sigma, &healthy);
  const ControlVector b = forward(net, tau, sigma, &faulty);
  const ControlVector c = forward(net, tau, sigma);
  double diff = 0.0;
  for (int i = 0; i < 5; ++i) {
    diff += std::abs(a[i] - b[i]);
    CHECK(a[i] == c[i]);
  }
  CHECK(diff > 0.0);
}

TEST_CASE("initialization is deterministic and seed-sensitive") {
  const Network a = small_net(21);
  const Network b = small_net(21);
  const Network c = small_net(22);
  REQUIRE(a.layers.size() == b.layers.size());
  bool same = true;
  bool differs = false;
  for (std::size_t l = 0; l + 1 < a.layers.size(); ++l) {
    same = same && a.layers[l].theta == b.layers[l].theta;
    differs = differs || a.layers[l].theta != c.layers[l].theta;
    for (double bias : a.layers[l].b) CHECK(bias == 0.0);
  }
  same = same && a.layers.back().theta == b.layers.back().theta;
  const ControlVector center = BoxSet{}.center();
  for (std::size_t k = 0; k < kNumSurfaces; ++k) {
    CHECK(a.layers.back().b[k] == center[k]);
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("initial weights respect the fan-in bound") {
  const MlpArch arch = MlpArch::parse("5.16.8.5");
  const Network net = init_network(arch, NormStats{}, BoxSet{}, 3);
  const int fan_in[] = {5, 16, 8};
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const double bound = std::sqrt(6.0 / fan_in[l]);
    for (double w : net.layers[l].theta) {
      CHECK(std::abs(w) <= bound);
    }
  }
}

TEST_CASE("network json round-trips bit-exactly") {
  const Network net = small_net(5);
  const std::string path = temp_file("nlca_net_roundtrip.json");
  save_network(net, path, 5);
  const Network back = load_network(path);
  CHECK(back.arch.str() == net.arch.str());
  for (int k = 0; k < 5; ++k) {
    CHECK(back.norm.scale[k] == net.norm.scale[k]);
    CHECK(back.norm.offset[k] == net.norm.offset[k]);
  }
  REQUIRE(back.layers.size() == net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(back.layers[l].theta == net.layers[l].theta);
    CHECK(back.layers[l].b == net.layers[l].b);
  }
  for (int i = 0; i < 5; ++i) {
    CHECK(back.output_box.lower[i] == net.output_box.lower[i]);
    CHECK(back.output_box.upper[i] == net.output_box.upper[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("network loader rejects mismatched shapes") {
  const Network net = small_net(9);
  const std::string path = temp_file("nlca_net_bad.json");
  save_network(net, path, 9);

  {
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    j["arch"] = std::vector<int>{5, 4, 5};
    std::ofstream out(path);
    out << j.dump(2) << "\n";
  }
  CHECK_THROWS_AS(load_network(path), Error);

  {
    std::ofstream out(path);
    out << "not json at all\n";
  }
  CHECK_THROWS_AS(load_network(path), Error);

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_network("/nonexistent/nlca/net.json"), Error);
}

TEST_CASE("validate catches layer size drift") {
  Network net = small_net(4);
  CHECK_NOTHROW(net.validate());
  net.layers[0].b.push_back(0.0);
  CHECK_THROWS_AS(net.validate(), Error);
}
