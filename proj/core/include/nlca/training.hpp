#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlca/dataset.hpp"
#include "nlca/effectiveness.hpp"
#include "nlca/network.hpp"

namespace nlca {

struct TrainConfig {
  double lr0 = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 50;
  int batch = 128;
  int plateau_patience = 5;
  double plateau_factor = 0.1;
  WeightMatrix weight;  // moment-space residual weighting, defaults identity
  std::uint64_t seed = 7;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // running mean over the epoch's batches
  std::vector<double> val_loss;    // full validation pass after each epoch
  std::vector<double> lr;          // rate in effect during each epoch
  double test_mse = 0.0;
  double test_rmse = 0.0;
  double test_r2 = 0.0;
  // Loss and MSE are reported in weighted raw moment units: the mean over
  // samples of (achieved - desired)^T W (achieved - desired).
  std::string loss_units = "weighted raw moment units";
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Mean over the batch of the weighted squared moment error of the projected
// network command:
//   loss = mean_i (G(P(u_hat_i), sigma_i) - tau_i)^T W ( ... )
// Each sample's health mask zeroes failed surfaces before the model is
// evaluated (for all-healthy batches this is exactly the plain projected
// command). When grad is non-null it receives d loss / d parameters in
// flattened layer order (theta row-major, then b, per layer), computed by
// backpropagation through the model Jacobian, the projection subgradient
// (1 inside or on the boundary, 0 strictly outside), and the layers.
double allocation_loss(const Network& net, std::span<const Sample> batch,
                       const EffectivenessModel& model, const WeightMatrix& w,
                       std::vector<double>* grad = nullptr);

// Mini-batch Adam on the allocation loss over the dataset's training split,
// with a reduce-on-plateau learning rate schedule driven by the validation
// split. Deterministic per config seed: fixed shuffles, fixed batch order.
// Final test metrics are computed on the held-out split. Throws diverged if
// the loss leaves the reals.
std::pair<Network, TrainHistory> train(Network net, const Dataset& ds,
                                       const EffectivenessModel& model,
                                       const TrainConfig& cfg);

// Weighted mean squared moment error, RMSE, and pooled R^2 of the projected
// network commands over the given samples.
struct EvalMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

EvalMetrics evaluate_network(const Network& net, const Dataset& ds,
                             std::span<const std::size_t> idx,
                             const EffectivenessModel& model,
                             const WeightMatrix& w);

void write_history_csv(const TrainHistory& hist, const std::string& path,
                       std::uint64_t seed);

}  // namespace nlca
