#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlca/dataset.hpp"
#include "nlca/types.hpp"

namespace nlca {

// Layer widths in "5.16.8.5" dot notation. The input is the normalized
// [Cl, Cm, Cn, alpha, beta] vector, optionally extended by the five health
// flags (input width 10); the output is always the five deflections. At
// least one hidden layer.
struct MlpArch {
  std::vector<int> layers;

  static MlpArch parse(const std::string& text);
  std::string str() const;
  void validate() const;

  bool fault_conditioned() const {
    return !layers.empty() && layers.front() == 10;
  }
};

// Untrained normalization parameters (5 scales + 5 offsets) plus each
// layer's weights and biases.
std::size_t parameter_count(const MlpArch& arch);

struct Layer {
  std::vector<double> theta;  // rows x cols, row-major (out x in)
  std::vector<double> b;
};

struct Network {
  MlpArch arch;
  NormStats norm;
  std::vector<Layer> layers;
  BoxSet output_box;

  std::size_t trainable_count() const;
  void validate() const;
};

// He-style uniform init (fan-in scaled), deterministic in seed. Hidden
// biases start at zero; the output biases start at the box center so every
// surface's raw command begins inside its admissible range.
Network init_network(const MlpArch& arch, const NormStats& norm,
                     const BoxSet& output_box, std::uint64_t seed);

// Raw multilayer perceptron evaluation: hidden layers ReLU, final layer
// affine. No normalization, no projection. Sizes are taken from the layers.
std::vector<double> mlp_forward_raw(std::span<const Layer> layers,
                                    std::span<const double> input);

// Full allocator-facing forward pass: normalize the inputs, append health
// flags when the net is fault-conditioned, run the layers. The output is the
// raw deflection request; projection onto the box is the caller's move.
ControlVector forward(const Network& net, const MomentVector& tau,
                      const StateVector& sigma,
                      const std::array<std::uint8_t, kNumSurfaces>* mask = nullptr);

// Versioned JSON serialization. Round-trips bit-exactly.
void save_network(const Network& net, const std::string& path,
                  std::uint64_t seed = 0);
Network load_network(const std::string& path);

}  // namespace nlca
