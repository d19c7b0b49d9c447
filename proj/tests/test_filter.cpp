#include "oracles.hpp"
#include "scenes.hpp"

#include "dmloc/estimator.hpp"
#include "dmloc/gain.hpp"
#include "dmloc/kernels.hpp"
#include "dmloc/process_model.hpp"
#include "dmloc/sim.hpp"
#include "dmloc/so3.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <numbers>

using namespace dmloc;
using oracle::Rng;

namespace {

const Vec3 kG(0, 0, -9.81);

NavState level_rest() {
  NavState x;
  x.gravity_w = kG;
  x.acc = -kG;
  return x;
}

bool symmetric_psd(const Covariance& p) {
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
    return false;
  }
  return Eigen::SelfAdjointEigenSolver<Covariance>(p).eigenvalues().minCoeff() >= -1e-10;
}

// Independent transcription of the forward process f(x, 0).
ErrorVector derivative_oracle(const NavState& x, double dt) {
  ErrorVector f = ErrorVector::Zero();
  const Vec3 a_w = x.rot_wi * x.acc - x.rot_wi * x.bias_acc + x.gravity_w;
  f.segment<3>(0) = x.omega - x.bias_gyro;
  f.segment<3>(3) = x.vel_wi + a_w * (dt / 2.0);
  f.segment<3>(6) = a_w;
  return f;
}

Estimator make_estimator(const NavState& x0, FilterConfig cfg = {}, double t0 = 0.0) {
  return Estimator(cfg, x0, InitialUncertainty{}.matrix(), t0);
}

JacobianMatrix random_h(Rng& rng, Eigen::Index m) {
  JacobianMatrix h(m, kStateDim);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  return h;
}

Eigen::VectorXd random_r_inv(Rng& rng, Eigen::Index m) {
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) w[i] = rng.uniform(0.5, 2.0);
  return w;
}

}  // namespace

TEST_SUITE("filter") {

TEST_CASE("process_derivative at a level equilibrium") {
  NavState x = level_rest();
  x.vel_wi = Vec3(0.3, -0.1, 0.0);
  x.bias_gyro = Vec3(0.01, 0.02, -0.01);
  x.omega = x.bias_gyro;
  x.bias_acc = Vec3(0.1, 0, 0.05);
  x.acc = -kG + x.bias_acc;
  const ErrorVector f = process_derivative(x, 0.01);
  ErrorVector expect = ErrorVector::Zero();
  expect.segment<3>(blk::kPos) = x.vel_wi;
  CHECK((f - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("process_derivative with velocity only") {
  NavState x;
  x.vel_wi = Vec3(1, 0, 0);
  ErrorVector expect = ErrorVector::Zero();
  expect.segment<3>(blk::kPos) = Vec3(1, 0, 0);
  CHECK(process_derivative(x, 0.01) == expect);
}

TEST_CASE("process_derivative matches an independent transcription") {
  Rng rng(20);
  for (int i = 0; i < 100; ++i) {
    const NavState x = oracle::random_state(rng);
    const double dt = rng.uniform(0.001, 0.1);
    CHECK((process_derivative(x, dt) - derivative_oracle(x, dt)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("noise enters only the rate and bias rows") {
  Rng rng(21);
  const NavState x = oracle::random_state(rng);
  NoiseVector w;
  for (int i = 0; i < kNoiseDim; ++i) w[i] = rng.normal();
  const ErrorVector d = process_derivative(x, 0.01, w) - process_derivative(x, 0.01);
  CHECK(d.segment<3>(blk::kOmega) == w.segment<3>(0));
  CHECK(d.segment<3>(blk::kAcc) == w.segment<3>(3));
  CHECK(d.segment<3>(blk::kBiasGyro) == w.segment<3>(6));
  CHECK(d.segment<3>(blk::kBiasAcc) == w.segment<3>(9));
  CHECK(d.head<9>().isZero(0));
  CHECK(d.tail<9>().isZero(0));
}

TEST_CASE("transition Jacobians match central finite differences") {
  Rng rng(22);
  double worst_fx = 0.0;
  double worst_fw = 0.0;
  for (int i = 0; i < 100; ++i) {
    const NavState x = oracle::random_state(rng);
    const double dt = rng.uniform(0.005, 0.1);
    const auto j = transition_jacobians(x, dt);
    const NavState x1 = transition(x, dt);
    const double h = 1e-6;

    Covariance fx;
    for (int c = 0; c < kStateDim; ++c) {
      ErrorVector d = ErrorVector::Zero();
      d[c] = h;
      fx.col(c) = (boxminus(transition(boxplus(x, d), dt), x1) -
                   boxminus(transition(boxplus(x, -d), dt), x1)) / (2 * h);
    }
    NoiseJacobian fw;
    for (int c = 0; c < kNoiseDim; ++c) {
      NoiseVector w = NoiseVector::Zero();
      w[c] = h;
      fw.col(c) = (boxminus(transition(x, dt, w), x1) - boxminus(transition(x, dt, -w), x1)) / (2 * h);
    }
    worst_fx = std::max(worst_fx, (fx - j.fx).cwiseAbs().maxCoeff());
    worst_fw = std::max(worst_fw, (fw - j.fw).cwiseAbs().maxCoeff());
  }
  CHECK(worst_fx < 1e-5);
  CHECK(worst_fw < 1e-5);
}

TEST_CASE("propagate_imu keeps a resting vehicle at rest") {
  auto est = make_estimator(level_rest());
  for (int k = 1; k <= 100; ++k) est.process_imu({k * 0.01, Vec3::Zero(), -kG});
  CHECK(est.current().state.pos_wi.norm() < 1e-6);
  CHECK(est.mode() == Mode::kImuDriven);
  CHECK(symmetric_psd(est.current().cov));
}

TEST_CASE("constant yaw rate integrates to the closed form") {
  NavState x = level_rest();
  x.omega = Vec3(0, 0, 0.1);
  auto est = make_estimator(x);
  for (int k = 1; k <= 1000; ++k) est.process_imu({k * 0.01, Vec3(0, 0, 0.1), -kG});
  CHECK(std::abs(so3::yaw_of(est.current().state.rot_wi) - 1.0) < 1e-4);
}

TEST_CASE("propagate_imu rejects stale and non-finite samples") {
  auto est = make_estimator(level_rest(), {}, 1.0);
  CHECK_THROWS_AS(est.propagate_imu({0.5, Vec3::Zero(), -kG}), StaleSampleError);
  CHECK_THROWS_AS(est.propagate_imu({1.1, Vec3(NAN, 0, 0), -kG}), ValidationError);
  CHECK(est.current().t == 1.0);
}

TEST_CASE("propagate_cv examples") {
  NavState x = level_rest();
  x.vel_wi = Vec3(1, 2, 0);
  auto est = make_estimator(x);
  const double trace0 = est.current().cov.trace();
  est.propagate_cv(0.01);
  CHECK((est.current().state.pos_wi - Vec3(0.01, 0.02, 0)).norm() < 1e-15);
  CHECK(est.current().state.rot_wi == Mat3::Identity());
  CHECK(est.current().cov.trace() >= trace0);
  CHECK(est.mode() == Mode::kCvFallback);

  NavState y = level_rest();
  y.omega = Vec3(0, 0, 0.2);
  auto spin = make_estimator(y);
  double trace = spin.current().cov.trace();
  for (int i = 0; i < 100; ++i) {
    spin.propagate_cv(0.01);
    CHECK(spin.current().cov.trace() >= trace);
    trace = spin.current().cov.trace();
  }
  CHECK(std::abs(so3::yaw_of(spin.current().state.rot_wi) - 0.2) < 1e-4);
  CHECK(spin.current().state.omega == Vec3(0, 0, 0.2));
  CHECK_THROWS_AS(spin.propagate_cv(0.0), ValidationError);
}

TEST_CASE("cv_tick is a no-op while the IMU is alive") {
  auto est = make_estimator(level_rest());
  est.process_imu({0.01, Vec3::Zero(), -kG});
  CHECK(est.cv_tick(0.02) == 0);
  CHECK(est.mode() == Mode::kImuDriven);
}

TEST_CASE("cv_tick covers a silent IMU") {
  auto est = make_estimator(level_rest());
  est.process_imu({0.01, Vec3::Zero(), -kG});
  int steps = 0;
  for (int k = 2; k <= 51; ++k) steps += est.cv_tick(k * 0.01);
  CHECK(steps >= 49);
  CHECK(est.mode() == Mode::kCvFallback);
  CHECK(std::abs(est.current().t - 0.51) < 1e-9);

  // Output gap property: consecutive history stamps never exceed two periods.
  const auto& h = est.history().entries();
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i].t - h[i - 1].t <= 0.02 + 1e-12);

  est.process_imu({0.52, Vec3::Zero(), -kG});
  CHECK(est.mode() == Mode::kImuDriven);
}

TEST_CASE("CV fallback drift over a one second dropout on a constant-velocity segment") {
  auto motion = std::make_shared<sim::ConstantRateMotion>(Vec3(0, 0, 1), Vec3(2, 0.5, 0), 0.3, 0.0);
  const sim::GroundTruth gt(motion, 3.0);
  sim::SensorSpec spec;
  spec.gyro_noise_std = 0.005;
  spec.acc_noise_std = 0.05;
  spec.dropout_windows = {{1.0, 2.0}};
  const auto imu = sim::sim_imu(gt, spec, 5);

  const auto s0 = gt.at(0.0);
  NavState x;
  x.rot_wi = s0.rot;
  x.pos_wi = s0.pos;
  x.vel_wi = s0.vel;
  x.acc = -(s0.rot.transpose() * kG);
  x.gravity_w = kG;
  auto est = make_estimator(x);
  std::size_t next = 1;
  double err_at_loss = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double t = k * 0.01;
    while (next < imu.size() && imu[next].t <= t + 1e-12) est.process_imu(imu[next++]);
    est.cv_tick(t);
    if (k == 100) err_at_loss = (est.current().state.pos_wi - gt.at(t).pos).norm();
  }
  CHECK(est.mode() == Mode::kCvFallback);
  const double err = (est.query_state_at(2.0).pos_wi - gt.at(2.0).pos).norm();
  CHECK(err - err_at_loss < 0.05);
}

TEST_CASE("imu update with a consistent sample leaves the state unchanged") {
  Rng rng(23);
  const NavState x = oracle::random_state(rng);
  auto est = make_estimator(x);
  est.imu_measurement_update({0.0, x.omega + x.bias_gyro, x.acc + x.bias_acc});
  CHECK(oracle::max_abs(boxminus(est.current().state, x)) < 1e-12);
}

TEST_CASE("imu update moves the rate toward the measurement") {
  NavState x = level_rest();
  FilterConfig cfg;
  cfg.imu_meas_gyro_std = 1e-3;
  auto est = make_estimator(x, cfg);
  const ImuSample u{0.0, Vec3(0.1, 0, 0), -kG};
  const double before = (u.gyro - x.omega - x.bias_gyro).norm();
  est.imu_measurement_update(u);
  const NavState& y = est.current().state;
  CHECK(y.omega.x() > 0.0);
  CHECK((u.gyro - y.omega - y.bias_gyro).norm() < before);
  CHECK(symmetric_psd(est.current().cov));
}

TEST_CASE("imu update equals a textbook EKF update") {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const NavState x = oracle::random_state(rng);
    const Covariance p = oracle::random_spd(rng, 0.01, 1.0);
    FilterConfig cfg;
    Estimator est(cfg, x, p, 0.0);
    const ImuSample u{0.0, rng.vec(0.5), rng.vec(10.0)};
    est.imu_measurement_update(u);

    JacobianMatrix h = JacobianMatrix::Zero(6, kStateDim);
    Eigen::VectorXd r(6), w(6);
    for (int i = 0; i < 3; ++i) {
      h(i, 9 + i) = h(i, 15 + i) = 1.0;
      h(3 + i, 12 + i) = h(3 + i, 18 + i) = 1.0;
      r[i] = x.omega[i] + x.bias_gyro[i] - u.gyro[i];
      r[3 + i] = x.acc[i] + x.bias_acc[i] - u.acc[i];
      w[i] = 1.0 / (cfg.imu_meas_gyro_std * cfg.imu_meas_gyro_std);
      w[3 + i] = 1.0 / (cfg.imu_meas_acc_std * cfg.imu_meas_acc_std);
    }
    const auto ref = oracle::ekf_update(h, r, w, p);
    CHECK(oracle::max_abs(boxminus(est.current().state, boxplus(x, ref.delta))) < 1e-9);
    CHECK((est.current().cov - ref.cov).cwiseAbs().maxCoeff() < 1e-9);

    // Contraction: the weighted linearized residual shrinks.
    const Eigen::VectorXd after = r + h * ref.delta;
    CHECK(after.cwiseProduct(w).dot(after) < r.cwiseProduct(w).dot(r));
  }
}

TEST_CASE("zero-residual propagate + update is a fixed point") {
  NavState x = level_rest();
  x.vel_wi = Vec3::Zero();
  auto est = make_estimator(x);
  for (int k = 1; k <= 200; ++k) {
    est.process_imu({k * 0.01, Vec3::Zero(), -kG});
    CHECK(symmetric_psd(est.current().cov));
  }
  CHECK(est.current().state == x);
}

TEST_CASE("compute_gain scalar example") {
  JacobianMatrix h = JacobianMatrix::Zero(1, kStateDim);
  h(0, 0) = 1.0;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  const GainMatrix k = compute_gain(h, w, Covariance::Identity());
  GainMatrix expect = GainMatrix::Zero(kStateDim, 1);
  expect(0, 0) = 0.5;
  CHECK((k - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compute_gain with no rows is empty") {
  const GainMatrix k = compute_gain(JacobianMatrix(0, kStateDim), Eigen::VectorXd(0), Covariance::Identity());
  CHECK(k.rows() == kStateDim);
  CHECK(k.cols() == 0);
}

TEST_CASE("compute_gain equals the observation-dimension gain") {
  Rng rng(25);
  for (const Eigen::Index m : {1, 10, 200}) {
    const JacobianMatrix h = random_h(rng, m);
    const Eigen::VectorXd w = random_r_inv(rng, m);
    const Covariance p = oracle::random_spd(rng);
    const Eigen::MatrixXd ref = oracle::gain_observation_form(h, w, p);
    const GainMatrix k = compute_gain(h, w, p);
    CHECK((k - ref).norm() / ref.norm() < 1e-8);
  }
}

TEST_CASE("normal equations: parallel equals serial and a per-row accumulation") {
  Rng rng(26);
  const Eigen::Index m = 1000;
  const JacobianMatrix h = random_h(rng, m);
  const Eigen::VectorXd w = random_r_inv(rng, m);
  Eigen::VectorXd r(m);
  for (Eigen::Index i = 0; i < m; ++i) r[i] = rng.normal();
  const auto par = kernels::normal_equations(h, r, w);
  const auto ser = kernels::normal_equations_serial(h, r, w);
  CHECK(par.hth == ser.hth);
  CHECK(par.htr == ser.htr);
  Covariance hth = Covariance::Zero();
  ErrorVector htr = ErrorVector::Zero();
  for (Eigen::Index i = 0; i < m; ++i) {
    hth += w[i] * h.row(i).transpose() * h.row(i);
    htr += w[i] * r[i] * h.row(i).transpose();
  }
  CHECK((par.hth - hth).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((par.htr - htr).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("information_matrix regularizes a singular covariance") {
  Covariance p = Covariance::Identity();
  p(3, 3) = 0.0;
  p(4, 4) = -1e-14;
  const Covariance info = information_matrix(p);
  CHECK(info.allFinite());
}

TEST_CASE("iterated update: scan synthesized at the prior pose") {
  const scene::BoxScene s;
  const NavState x = s.pose(Vec3(1.0, -0.5, 1.5), 0.4);
  auto est = make_estimator(x);
  // Keep returns whose fitted plane is exact (away from edges and corners).
  AssociationConfig cfg;
  cfg.downsample_stride = 1;
  const auto all = s.scan(x);
  std::vector<Vec3> pts;
  for (const auto& c : associate(all, x, &s.map->index(), nullptr, cfg)) {
    if (std::abs(residual_p2plane(x, c)) < 1e-10) pts.push_back(c.point_l);
  }
  REQUIRE(pts.size() > 500);
  const auto rep = est.iterated_lidar_update(s.provider(pts));
  CHECK(rep.applied);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.last_step_norm < 1e-9);
}

TEST_CASE("iterated update recovers a perturbed pose in the box world") {
  const scene::BoxScene s;
  const NavState truth = s.pose(Vec3(2.0, 1.0, 1.2), -0.7);
  const auto pts = s.scan(truth);
  NavState prior = truth;
  prior.pos_wi += Vec3(0.2, 0.0, 0.0).normalized() * 0.2;
  prior.rot_wi = truth.rot_wi * so3::exp(Vec3(0, 0, 2.0 * std::numbers::pi / 180.0));
  FilterConfig cfg;
  cfg.max_iterations = 4;
  auto est = make_estimator(prior, cfg);
  const auto rep = est.iterated_lidar_update(s.provider(pts));
  CHECK(rep.applied);
  CHECK(rep.iterations <= 4);
  const NavState& post = est.current().state;
  CHECK((post.pos_wi - truth.pos_wi).norm() < 1e-3);
  CHECK(oracle::rotation_angle(post.rot_wi, truth.rot_wi) < 0.01 * std::numbers::pi / 180.0);
  CHECK(symmetric_psd(est.current().cov));
}

TEST_CASE("single-iteration update equals a textbook EKF update") {
  const scene::BoxScene s(0.5);
  const NavState truth = s.pose(Vec3(-1.0, 0.5, 2.0), 1.2);
  const auto pts = s.scan(truth, 12, 24);
  NavState prior = truth;
  prior.pos_wi += Vec3(0.05, -0.03, 0.02);
  prior.rot_wi = truth.rot_wi * so3::exp(Vec3(0.004, -0.003, 0.01));
  const Covariance p = InitialUncertainty{}.matrix();
  FilterConfig cfg;
  cfg.max_iterations = 1;
  Estimator est(cfg, prior, p, 0.0);
  const auto provider = s.provider(pts);
  MeasurementSystem sys = provider(prior);
  REQUIRE(sys.rows() > 30);
  sys.h.rightCols<6>().setZero();
  const auto ref = oracle::ekf_update(sys.h, sys.r, sys.r_inv, p);
  est.iterated_lidar_update(provider);
  CHECK(oracle::max_abs(boxminus(est.current().state, boxplus(prior, ref.delta))) < 1e-9);
  CHECK((est.current().cov - ref.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("iterated update flags an empty measurement set") {
  auto est = make_estimator(level_rest());
  const NavState before = est.current().state;
  const auto rep = est.iterated_lidar_update([](const NavState&) { return MeasurementSystem{}; });
  CHECK(rep.degraded);
  CHECK_FALSE(rep.applied);
  CHECK(est.current().state == before);
}

TEST_CASE("iterated update aborts on growing steps and keeps the prior") {
  FilterConfig cfg;
  cfg.max_iterations = 10;
  auto est = make_estimator(level_rest(), cfg);
  const NavState before = est.current().state;
  const Covariance p_before = est.current().cov;
  double scale = 1.0;
  const auto rep = est.iterated_lidar_update([&scale](const NavState&) {
    MeasurementSystem sys;
    sys.h = JacobianMatrix::Zero(3, kStateDim);
    sys.h.block<3, 3>(0, blk::kPos).setIdentity();
    sys.r = Vec3(1, 1, 1) * scale;
    sys.r_inv = Eigen::VectorXd::Ones(3);
    scale *= 10.0;
    return sys;
  });
  CHECK(rep.diverged);
  CHECK_FALSE(rep.applied);
  CHECK(rep.iterations == 4);
  CHECK(est.current().state == before);
  CHECK(est.current().cov == p_before);
}

TEST_CASE("state history lookup") {
  StateHistory h(10.0, 0.01);
  StampedState a;
  a.t = 1.0;
  a.state.pos_wi = Vec3(0, 0, 0);
  a.state.rot_wi = so3::rot_z(0.1);
  StampedState b = a;
  b.t = 2.0;
  b.state.pos_wi = Vec3(1, 0, 0);
  b.state.rot_wi = so3::rot_z(0.3);
  h.push(a);
  h.push(b);
  CHECK(h.query(1.0) == a.state);
  CHECK(h.query(2.0) == b.state);
  const NavState mid = h.query(1.5);
  CHECK(std::abs(mid.pos_wi.x() - 0.5) < 1e-15);
  CHECK(std::abs(so3::yaw_of(mid.rot_wi) - 0.2) < 1e-9);
  CHECK_THROWS_AS(h.query(0.99), OutOfRangeError);
  CHECK_NOTHROW(h.query(2.005));
  CHECK_THROWS_AS(h.query(2.02), OutOfRangeError);

  StampedState c = b;
  c.state.pos_wi = Vec3(5, 5, 5);
  h.push(c);
  CHECK(h.size() == 2);
  CHECK(h.back().state.pos_wi == Vec3(5, 5, 5));
}

TEST_CASE("state history keeps at least the horizon") {
  StateHistory h(0.5, 0.01);
  for (int k = 0; k <= 200; ++k) {
    StampedState s;
    s.t = k * 0.01;
    h.push(s);
    CHECK(h.front().t <= std::max(0.0, s.t - 0.5) + 1e-12);
  }
  CHECK(h.back().t - h.front().t < 0.6);
}

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.cv_timer_period = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.std_n_gyro = -1.0;
  CHECK_THROWS_AS(make_estimator(level_rest(), cfg), ValidationError);
}

}  // TEST_SUITE
