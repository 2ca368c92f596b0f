#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "nlca/allocators.hpp"
#include "nlca/dataset.hpp"
#include "nlca/effectiveness.hpp"
#include "nlca/network.hpp"
#include "nlca/qp.hpp"
#include "nlca/rng.hpp"
#include "nlca/types.hpp"

namespace {

constexpr std::uint64_t kSeed = 7;

struct Workload {
  std::vector<nlca::MomentVector> tau;
  std::vector<nlca::StateVector> sigma;
};

Workload make_workload(std::size_t n) {
  nlca::Rng rng(nlca::mix_seed(kSeed, 0xB0));
  const nlca::StateBox env;
  Workload w;
  w.tau.reserve(n);
  w.sigma.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.tau.push_back({rng.uniform(-0.003, 0.003), rng.uniform(-0.003, 0.003),
                     rng.uniform(-0.003, 0.003)});
    w.sigma.push_back({rng.uniform(env.lower.alpha, env.upper.alpha),
                       rng.uniform(env.lower.beta, env.upper.beta)});
  }
  return w;
}

nlca::Network make_net(const char* arch_text) {
  const nlca::MlpArch arch = nlca::MlpArch::parse(arch_text);
  const nlca::SyntheticModel model;
  const nlca::Dataset ds = nlca::generate(model, 512, kSeed);
  const nlca::SplitIndices idx = nlca::split(ds);
  const nlca::NormStats norm = nlca::norm_stats(ds, idx.train);
  return nlca::init_network(arch, norm, model.box(), kSeed);
}

void BM_AnnAllocate(benchmark::State& state) {
  nlca::AnnAllocator alloc(make_net("5.16.8.5"));
  const Workload w = make_workload(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const nlca::ControlVector u = alloc.allocate(w.tau[i], w.sigma[i]);
    benchmark::DoNotOptimize(u);
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_AnnAllocate);

void BM_QpAllocate(benchmark::State& state) {
  const nlca::SyntheticModel model;
  nlca::QpBaselineAllocator alloc(model, nlca::WeightMatrix::identity());
  const Workload w = make_workload(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const nlca::ControlVector u = alloc.allocate(w.tau[i], w.sigma[i]);
    benchmark::DoNotOptimize(u);
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_QpAllocate);

void BM_GaussNewtonAllocate(benchmark::State& state) {
  const nlca::SyntheticModel model;
  nlca::GaussNewtonAllocator alloc(model, nlca::WeightMatrix::identity());
  const Workload w = make_workload(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const nlca::ControlVector u = alloc.allocate(w.tau[i], w.sigma[i]);
    benchmark::DoNotOptimize(u);
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_GaussNewtonAllocate);

void BM_ModelEvaluate(benchmark::State& state) {
  const nlca::SyntheticModel model;
  const nlca::ControlVector u{3.0, 12.0, -5.0, 8.0, -9.0};
  const nlca::StateVector sigma{4.0, -3.0};
  for (auto _ : state) {
    const nlca::MomentVector m = model.evaluate(u, sigma);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_ModelEvaluate);

void BM_ModelJacobian(benchmark::State& state) {
  const nlca::SyntheticModel model;
  const nlca::ControlVector u{3.0, 12.0, -5.0, 8.0, -9.0};
  const nlca::StateVector sigma{4.0, -3.0};
  for (auto _ : state) {
    const nlca::Mat35 g = model.jacobian_u(u, sigma);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_ModelJacobian);

void BM_ProjectBox(benchmark::State& state) {
  const nlca::BoxSet box;
  const nlca::ControlVector u{25.0, 12.0, -55.0, 8.0, 3.0};
  for (auto _ : state) {
    const nlca::ControlVector p = nlca::project_box(u, box);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_ProjectBox);

void BM_LhsSample(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::array<double, 5> lo{-20.0, 0.0, -40.0, 0.0, -40.0};
  const std::array<double, 5> hi{20.0, 40.0, 0.0, 40.0, 0.0};
  for (auto _ : state) {
    const std::vector<double> pts = nlca::lhs_sample(n, lo, hi, kSeed);
    benchmark::DoNotOptimize(pts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_LhsSample)->Arg(128)->Arg(4096);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
