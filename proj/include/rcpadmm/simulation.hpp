#pragma once

// Benchmark data: a second-order-plus-delay plant under a digital relay with
// hysteresis, integrated with fixed-step RK4, sampled and corrupted by
// Gaussian output noise.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"
#include "rcpadmm/problem.hpp"

namespace rcpadmm {

/// G(s) = (b1 s + b0) / (a2 s^2 + a1 s + a0) * exp(-delay s).
struct SotdPlant {
  double b1 = 0.2;
  double b0 = 1.0;
  double a2 = 1.5;
  double a1 = 0.6;
  double a0 = 1.0;
  double delay = 3.0;

  void validate() const {
    detail::require(a2 > 0.0, "plant: leading denominator coefficient must be positive");
    detail::require(a1 > 0.0 && a0 > 0.0, "plant: denominator must be stable");
    detail::require(delay >= 0.0, "plant: delay must be non-negative");
  }

  // Controllable canonical realization of the delay-free part.
  Eigen::Matrix2d A() const { return (Eigen::Matrix2d() << 0.0, 1.0, -a0 / a2, -a1 / a2).finished(); }
  Eigen::Vector2d B() const { return {0.0, 1.0 / a2}; }
  Eigen::RowVector2d C() const { return {b0, b1}; }
};

struct BenchmarkScenario {
  SotdPlant plant;
  double duration = 50.0;
  double dt = 0.5;
  double noise_variance = 0.01;
  double relay_amplitude = 1.0;
  double relay_hysteresis = 0.01;
  double fine_step = 0.01;
  std::uint64_t seed = 1;

  Index samples() const { return static_cast<Index>(std::llround(duration / dt)); }
  Index fine_steps_per_sample() const { return static_cast<Index>(std::llround(dt / fine_step)); }

  void validate() const {
    plant.validate();
    detail::require(dt > 0.0 && duration >= dt, "scenario: need duration >= dt > 0");
    detail::require(std::abs(duration / dt - static_cast<double>(samples())) < 1e-9,
                    "scenario: duration must be a whole number of sampling periods");
    detail::require(fine_step > 0.0 && fine_step <= dt / 10.0 + 1e-15,
                    "scenario: fine step must not exceed dt / 10");
    detail::require(
        std::abs(dt / fine_step - static_cast<double>(fine_steps_per_sample())) < 1e-9,
        "scenario: dt must be a whole number of fine steps");
    detail::require(noise_variance >= 0.0, "scenario: noise variance must be non-negative");
    detail::require(relay_amplitude > 0.0, "scenario: relay amplitude must be positive");
    detail::require(relay_hysteresis >= 0.0, "scenario: relay hysteresis must be non-negative");
  }
};

struct RelayRecord {
  Vector t;        // sample instants 0, dt, ..., (N-1) dt
  Vector u;        // relay output held over [t_i, t_i + dt)
  Vector y_clean;  // plant output at t_i
  Vector y;        // y_clean plus measurement noise
};

/// Relay switches on the noise-free output at the sampling instants, with
/// setpoint 0 and initial output +d; noise is added to the recorded y only.
inline RelayRecord simulate_relay(const BenchmarkScenario& scn) {
  scn.validate();
  const Index N = scn.samples();
  const Index sub = scn.fine_steps_per_sample();
  const double h = scn.fine_step;
  const auto delay_steps = static_cast<std::size_t>(std::llround(scn.plant.delay / h));
  const Eigen::Matrix2d A = scn.plant.A();
  const Eigen::Vector2d B = scn.plant.B();
  const Eigen::RowVector2d C = scn.plant.C();

  // Inputs applied on the last `delay_steps` fine steps, oldest first.
  std::vector<double> pending(delay_steps, 0.0);
  std::size_t head = 0;

  RelayRecord rec;
  rec.t.resize(N);
  rec.u.resize(N);
  rec.y_clean.resize(N);
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  double u = scn.relay_amplitude;

  for (Index i = 0; i < N; ++i) {
    const double y_now = C * x;
    const double err = -y_now;
    if (err > scn.relay_hysteresis)
      u = scn.relay_amplitude;
    else if (err < -scn.relay_hysteresis)
      u = -scn.relay_amplitude;
    rec.t(i) = static_cast<double>(i) * scn.dt;
    rec.u(i) = u;
    rec.y_clean(i) = y_now;

    for (Index s = 0; s < sub; ++s) {
      double applied = u;
      if (delay_steps > 0) {
        applied = pending[head];
        pending[head] = u;
        head = (head + 1) % delay_steps;
      }
      const Eigen::Vector2d Bu = B * applied;
      const Eigen::Vector2d k1 = A * x + Bu;
      const Eigen::Vector2d k2 = A * (x + 0.5 * h * k1) + Bu;
      const Eigen::Vector2d k3 = A * (x + 0.5 * h * k2) + Bu;
      const Eigen::Vector2d k4 = A * (x + h * k3) + Bu;
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite() || x.norm() > 1e12) throw NumericFailure("relay simulation diverged");
  }

  rec.y = rec.y_clean;
  if (scn.noise_variance > 0.0) {
    std::mt19937_64 gen(scn.seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(scn.noise_variance));
    for (Index i = 0; i < N; ++i) rec.y(i) += noise(gen);
  }
  return rec;
}

inline RegressionData to_regression_data(const RelayRecord& rec, Index fir_length, double dt) {
  RegressionData data{rec.u, rec.y, fir_length, dt};
  data.validate();
  return data;
}

/// Unit step response of the delayed plant from rest at time t (exact).
inline double step_response(const SotdPlant& plant, double t) {
  if (t <= plant.delay) return 0.0;
  Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
  aug.topLeftCorner<2, 2>() = plant.A();
  aug.topRightCorner<2, 1>() = plant.B();
  const Eigen::Matrix3d E = (aug * (t - plant.delay)).exp();
  return plant.C() * E.topRightCorner<2, 1>();
}

/// FIR coefficients of the zero-order-hold discretization, lags 1..l.
inline Vector true_impulse_response(const SotdPlant& plant, double dt, Index fir_length) {
  plant.validate();
  detail::require(dt > 0.0 && fir_length >= 1, "true_impulse_response: invalid arguments");
  Vector g(fir_length);
  double prev = step_response(plant, 0.0);
  for (Index k = 1; k <= fir_length; ++k) {
    const double cur = step_response(plant, static_cast<double>(k) * dt);
    g(k - 1) = cur - prev;
    prev = cur;
  }
  return g;
}

}  // namespace rcpadmm
