#include "nlca/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "nlca/rng.hpp"

namespace nlca {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) fail(ErrorCode::invalid_argument, "lr0 must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    fail(ErrorCode::invalid_argument, "adam betas must lie in [0, 1)");
  }
  if (epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (batch < 1) fail(ErrorCode::invalid_argument, "batch must be >= 1");
  if (plateau_patience < 1) {
    fail(ErrorCode::invalid_argument, "plateau_patience must be >= 1");
  }
  if (!(plateau_factor > 0.0) || plateau_factor >= 1.0) {
    fail(ErrorCode::invalid_argument, "plateau_factor must be in (0, 1)");
  }
}

namespace {

// Scratch shared across samples of a batch: activations and pre-activation
// signs for backprop, plus the delta buffers.
struct BackpropScratch {
  std::vector<std::vector<double>> acts;   // acts[0] = input, acts[L] = output
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

// Forward + backward for one sample; accumulates d loss_sample / d params
// into grad (flattened layer order). Returns the sample's weighted squared
// residual. batch_scale multiplies the gradient contribution (1/batch).
double sample_loss_grad(const Network& net, const Sample& sample,
                        const EffectivenessModel& model, const WeightMatrix& w,
                        const BoxSet& box, double batch_scale,
                        std::vector<double>* grad, BackpropScratch& scratch) {
  const std::size_t n_layers = net.layers.size();
  const std::size_t in_width =
      static_cast<std::size_t>(net.arch.layers.front());

  scratch.acts.resize(n_layers + 1);
  std::vector<double>& input = scratch.acts[0];
  input.resize(in_width);
  const std::array<double, 5> raw{sample.tau.cl, sample.tau.cm, sample.tau.cn,
                                  sample.sigma.alpha, sample.sigma.beta};
  for (std::size_t k = 0; k < 5; ++k) {
    input[k] = net.norm.scale[k] * (raw[k] - net.norm.offset[k]);
  }
  if (in_width == 10) {
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      input[5 + k] = static_cast<double>(sample.fault_mask[k]);
    }
  }

  // Forward, keeping every activation.
  for (std::size_t li = 0; li < n_layers; ++li) {
    const Layer& l = net.layers[li];
    const std::size_t rows = l.b.size();
    const std::size_t cols = scratch.acts[li].size();
    std::vector<double>& out = scratch.acts[li + 1];
    out.assign(rows, 0.0);
    const std::vector<double>& a = scratch.acts[li];
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = l.b[r];
      const double* wt = &l.theta[r * cols];
      for (std::size_t c = 0; c < cols; ++c) acc += wt[c] * a[c];
      out[r] = (li + 1 < n_layers && acc < 0.0) ? 0.0 : acc;
    }
  }

  // Projection, masking, model evaluation.
  const std::vector<double>& u_raw = scratch.acts[n_layers];
  ControlVector u_hat;
  for (std::size_t k = 0; k < kNumSurfaces; ++k) u_hat[k] = u_raw[k];
  ControlVector u_proj = project_box(u_hat, box);
  ControlVector u_eff = u_proj;
  for (std::size_t k = 0; k < kNumSurfaces; ++k) {
    if (!sample.fault_mask[k]) u_eff[k] = 0.0;
  }
  const MomentVector achieved = model.evaluate(u_eff, sample.sigma);
  const MomentVector r = achieved - sample.tau;
  const Vec3 wr = w.apply(r.array());
  const double loss =
      r.cl * wr[0] + r.cm * wr[1] + r.cn * wr[2];

  if (grad == nullptr) return loss;

  // d loss / d achieved = 2 W r, then back through the model Jacobian at the
  // effective (masked, projected) command.
  const Mat35 jac = model.jacobian_u(u_eff, sample.sigma);
  const Vec3 two_wr{2.0 * wr[0] * batch_scale, 2.0 * wr[1] * batch_scale,
                    2.0 * wr[2] * batch_scale};
  Vec5 dl_du = mat35_tvec(jac, two_wr);

  // Mask and projection subgradients: a failed surface contributes nothing;
  // a strictly out-of-box request contributes nothing; on-boundary requests
  // pass gradient through so saturated-at-zero surfaces keep learning.
  std::vector<double>& delta = scratch.delta;
  delta.assign(kNumSurfaces, 0.0);
  for (std::size_t k = 0; k < kNumSurfaces; ++k) {
    if (!sample.fault_mask[k]) continue;
    if (u_hat[k] < box.lower[k] || u_hat[k] > box.upper[k]) continue;
    delta[k] = dl_du[k];
  }

  // Standard layer backprop. grad layout: per layer, theta row-major then b.
  std::size_t offset_end = grad->size();
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& l = net.layers[li];
    const std::size_t rows = l.b.size();
    const std::size_t cols = scratch.acts[li].size();
    offset_end -= rows * cols + rows;
    double* gtheta = grad->data() + offset_end;
    double* gb = gtheta + rows * cols;
    const std::vector<double>& a = scratch.acts[li];

    if (li > 0) {
      scratch.delta_prev.assign(cols, 0.0);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d != 0.0) {
        double* gt = gtheta + r * cols;
        const double* wt = &l.theta[r * cols];
        for (std::size_t c = 0; c < cols; ++c) {
          gt[c] += d * a[c];
          if (li > 0) scratch.delta_prev[c] += d * wt[c];
        }
        gb[r] += d;
      }
    }
    if (li > 0) {
      // ReLU subgradient: active where the forward value was positive.
      const std::vector<double>& act = scratch.acts[li];
      for (std::size_t c = 0; c < cols; ++c) {
        if (act[c] <= 0.0) scratch.delta_prev[c] = 0.0;
      }
      delta.swap(scratch.delta_prev);
    }
  }
  return loss;
}

}  // namespace

double allocation_loss(const Network& net, std::span<const Sample> batch,
                       const EffectivenessModel& model, const WeightMatrix& w,
                       std::vector<double>* grad) {
  if (batch.empty()) {
    fail(ErrorCode::invalid_argument, "allocation_loss needs a nonempty batch");
  }
  const BoxSet box = model.box();
  if (grad != nullptr) {
    grad->assign(net.trainable_count(), 0.0);
  }
  BackpropScratch scratch;
  const double batch_scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Sample& s : batch) {
    total += sample_loss_grad(net, s, model, w, box, batch_scale, grad, scratch);
  }
  return total * batch_scale;
}

namespace {

// Applies one Adam update in place over the flattened parameters.
void adam_step(Network& net, const std::vector<double>& grad, AdamState& st,
               const TrainConfig& cfg, double lr) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  std::size_t k = 0;
  for (Layer& l : net.layers) {
    auto update = [&](double& p) {
      const double g = grad[k];
      st.m[k] = cfg.beta1 * st.m[k] + (1.0 - cfg.beta1) * g;
      st.v[k] = cfg.beta2 * st.v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = st.m[k] / bc1;
      const double vhat = st.v[k] / bc2;
      p -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      ++k;
    };
    for (double& p : l.theta) update(p);
    for (double& p : l.b) update(p);
  }
}

std::vector<Sample> gather(const Dataset& ds,
                           std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(ds.samples[i]);
  return out;
}

}  // namespace

EvalMetrics evaluate_network(const Network& net, const Dataset& ds,
                             std::span<const std::size_t> idx,
                             const EffectivenessModel& model,
                             const WeightMatrix& w) {
  if (idx.empty()) {
    fail(ErrorCode::invalid_argument, "evaluate_network needs samples");
  }
  const BoxSet box = model.box();

  MomentVector mean{};
  for (std::size_t i : idx) {
    mean = mean + ds.samples[i].tau;
  }
  mean = (1.0 / static_cast<double>(idx.size())) * mean;

  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i : idx) {
    const Sample& s = ds.samples[i];
    ControlVector u = project_box(forward(net, s.tau, s.sigma, &s.fault_mask), box);
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      if (!s.fault_mask[k]) u[k] = 0.0;
    }
    const MomentVector r = model.evaluate(u, s.sigma) - s.tau;
    ss_res += w.quad(r);
    ss_tot += w.quad(s.tau - mean);
  }
  EvalMetrics em;
  em.mse = ss_res / static_cast<double>(idx.size());
  em.rmse = std::sqrt(em.mse);
  em.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return em;
}

std::pair<Network, TrainHistory> train(Network net, const Dataset& ds,
                                       const EffectivenessModel& model,
                                       const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  const SplitIndices idx = split(ds);
  if (idx.train.empty() || idx.val.empty() || idx.test.empty()) {
    fail(ErrorCode::invalid_argument, "dataset too small to split");
  }

  const std::vector<Sample> val_samples = gather(ds, idx.val);
  AdamState st;
  st.m.assign(net.trainable_count(), 0.0);
  st.v.assign(net.trainable_count(), 0.0);

  TrainHistory hist;
  double lr = cfg.lr0;
  double best_val = std::numeric_limits<double>::infinity();
  int wait = 0;

  std::vector<std::size_t> order = idx.train;
  std::vector<double> grad;
  std::vector<Sample> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Per-epoch shuffle stream derived from (seed, epoch) so shorter runs
    // are exact prefixes of longer ones.
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5E0F00 + static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(order, shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(ds.samples[order[i]]);
      }
      const double loss = allocation_loss(net, batch, model, cfg.weight, &grad);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::diverged, "training loss became non-finite at epoch " +
                                      std::to_string(epoch + 1));
      }
      adam_step(net, grad, st, cfg, lr);
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    const double val_loss =
        allocation_loss(net, val_samples, model, cfg.weight, nullptr);
    if (!std::isfinite(val_loss)) {
      fail(ErrorCode::diverged, "validation loss became non-finite");
    }

    hist.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    hist.val_loss.push_back(val_loss);
    hist.lr.push_back(lr);

    // Reduce-on-plateau: decay after `patience` epochs without improvement.
    if (val_loss < best_val) {
      best_val = val_loss;
      wait = 0;
    } else {
      ++wait;
      if (wait >= cfg.plateau_patience) {
        lr *= cfg.plateau_factor;
        wait = 0;
      }
    }
  }

  const EvalMetrics em = evaluate_network(net, ds, idx.test, model, cfg.weight);
  hist.test_mse = em.mse;
  hist.test_rmse = em.rmse;
  hist.test_r2 = em.r2;
  return {std::move(net), std::move(hist)};
}

void write_history_csv(const TrainHistory& hist, const std::string& path,
                       std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write history csv: " + path);
  out << "# seed = " << seed << "\n";
  out << "epoch,train_loss,val_loss,lr\n";
  char buf[160];
  for (std::size_t e = 0; e < hist.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e + 1,
                  hist.train_loss[e], hist.val_loss[e], hist.lr[e]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "# test_mse = %.17g\n", hist.test_mse);
  out << buf;
  std::snprintf(buf, sizeof(buf), "# test_rmse = %.17g\n", hist.test_rmse);
  out << buf;
  std::snprintf(buf, sizeof(buf), "# test_r2 = %.17g\n", hist.test_r2);
  out << buf;
  out << "# loss_units = " << hist.loss_units << "\n";
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

}  // namespace nlca
