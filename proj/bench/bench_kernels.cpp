// Parallel kernels against their serial references, and the state-dimension
// gain against the observation-dimension form.

#include "dmloc/gain.hpp"
#include "dmloc/kernels.hpp"
#include "dmloc/lidar_meas.hpp"
#include "dmloc/map.hpp"
#include "dmloc/sim.hpp"
#include "dmloc/so3.hpp"

#include <Eigen/Cholesky>
#include <benchmark/benchmark.h>

#include <random>

using namespace dmloc;

namespace {

struct Problem {
  JacobianMatrix h;
  Eigen::VectorXd r, w;
  Covariance p;
};

Problem make_problem(Eigen::Index m) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Problem pr;
  pr.h.resize(m, kStateDim);
  for (Eigen::Index i = 0; i < pr.h.size(); ++i) pr.h.data()[i] = n(gen);
  pr.r.resize(m);
  pr.w.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    pr.r[i] = n(gen);
    pr.w[i] = u(gen);
  }
  pr.p = Covariance::Identity() * 0.5;
  return pr;
}

void BM_NormalEquations(benchmark::State& st) {
  const auto pr = make_problem(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::normal_equations(pr.h, pr.r, pr.w));
}

void BM_NormalEquationsSerial(benchmark::State& st) {
  const auto pr = make_problem(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::normal_equations_serial(pr.h, pr.r, pr.w));
}

void BM_GainStateDim(benchmark::State& st) {
  const auto pr = make_problem(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(compute_gain(pr.h, pr.w, pr.p));
}

void BM_GainObservationDim(benchmark::State& st) {
  const auto pr = make_problem(st.range(0));
  for (auto _ : st) {
    const Eigen::MatrixXd hm = pr.h;
    const Eigen::MatrixXd hp = hm * pr.p;
    Eigen::MatrixXd s = hp * hm.transpose();
    s.diagonal() += pr.w.cwiseInverse();
    Eigen::MatrixXd k = Eigen::LLT<Eigen::MatrixXd>(s).solve(hp).transpose();
    benchmark::DoNotOptimize(k.data());
  }
}

struct RayProblem {
  sim::World world;
  std::vector<Vec3> origins, dirs;
};

const RayProblem& ray_problem() {
  static const RayProblem rp = [] {
    RayProblem p;
    p.world = sim::gen_world(sim::WorldKind::kPortLike, 1);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 16 * 900; ++i) {
      p.origins.emplace_back(40.0, 20.0, 1.8);
      p.dirs.push_back(Vec3(u(gen), u(gen), 0.3 * u(gen)).normalized());
    }
    return p;
  }();
  return rp;
}

void BM_Raycast(benchmark::State& st) {
  const auto& rp = ray_problem();
  for (auto _ : st) benchmark::DoNotOptimize(sim::raycast(rp.world.planes, rp.origins, rp.dirs, 0.5, 100.0));
}

void BM_RaycastSerial(benchmark::State& st) {
  const auto& rp = ray_problem();
  for (auto _ : st) benchmark::DoNotOptimize(sim::raycast_serial(rp.world.planes, rp.origins, rp.dirs, 0.5, 100.0));
}

struct AssocProblem {
  PriorMap map;
  std::vector<Vec3> points;
  NavState pose;
};

const AssocProblem& assoc_problem() {
  static const AssocProblem ap = [] {
    AssocProblem a;
    const auto world = sim::gen_world(sim::WorldKind::kPortLike, 1);
    a.map = PriorMap(sim::sample_surfaces(world, 0.4));
    a.pose.pos_wi = Vec3(40.0, 20.0, 1.8);
    const auto& rp = ray_problem();
    const auto ranges = sim::raycast(world.planes, rp.origins, rp.dirs, 0.5, 100.0);
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (!std::isnan(ranges[i])) a.points.push_back(ranges[i] * rp.dirs[i] + Vec3(0.02, -0.01, 0.0));
    }
    return a;
  }();
  return ap;
}

void BM_Associate(benchmark::State& st) {
  const auto& ap = assoc_problem();
  const AssociationConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(associate(ap.points, ap.pose, &ap.map.index(), nullptr, cfg));
}

void BM_AssociateSerial(benchmark::State& st) {
  const auto& ap = assoc_problem();
  const AssociationConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(associate_serial(ap.points, ap.pose, &ap.map.index(), nullptr, cfg));
}

}  // namespace

BENCHMARK(BM_NormalEquations)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NormalEquationsSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GainStateDim)->Arg(200)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GainObservationDim)->Arg(200)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Raycast)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RaycastSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Associate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssociateSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
