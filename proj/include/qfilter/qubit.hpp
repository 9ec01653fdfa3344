// Copyright 2026 The qfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qfilter/operators.hpp"
#include "qfilter/rng.hpp"
#include "qfilter/sme.hpp"

namespace qfilter {

// Qubit magnetometer model: H = b * sigma_y, L = sqrt(kappa) * sigma_z.
// A state that starts pure on the x-z great circle of the Bloch sphere stays
// there, so the filter reduces to a single angle theta with
//
//   rho(theta) = (1 + cos(theta) sigma_x + sin(theta) sigma_z) / 2.
//
// The angle obeys the scalar filtering SDE
//
//   dtheta = -2 b dt + kappa sin(2 theta) dt + 2 sqrt(kappa) cos(theta) dW,
//   dW = dM - 2 sqrt(kappa) sin(theta) dt.

// Map into (-pi, pi] for reporting; integration itself never wraps, so the
// angle trajectory stays continuous.
inline double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline DensityMatrix theta_to_rho(double theta) {
  if (!std::isfinite(theta))
    throw std::invalid_argument("theta_to_rho: non-finite angle");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  DensityMatrix rho(2, 2);
  rho << Complex(0.5 * (1.0 + s), 0.0), Complex(0.5 * c, 0.0),
      Complex(0.5 * c, 0.0), Complex(0.5 * (1.0 - s), 0.0);
  return rho;
}

struct BlochXZ {
  double sx = 0.0;
  double sz = 0.0;
};

inline BlochXZ bloch_xz(const DensityMatrix& rho) {
  detail::require_square(rho, "bloch_xz");
  if (rho.rows() != 2)
    throw std::invalid_argument("bloch_xz: expected a qubit state");
  BlochXZ b;
  b.sx = 2.0 * rho(0, 1).real();
  b.sz = (rho(0, 0) - rho(1, 1)).real();
  return b;
}

// Angle of a state on (or near) the x-z great circle.
inline double rho_to_theta(const DensityMatrix& rho) {
  const BlochXZ b = bloch_xz(rho);
  if (b.sx == 0.0 && b.sz == 0.0)
    throw std::invalid_argument("rho_to_theta: state has no x-z component");
  return std::atan2(b.sz, b.sx);
}

namespace detail {

// Shared arithmetic core of the angle update. Callers supply sin(theta) and
// cos(theta) so that batch loops can evaluate the trigonometry once per
// member; the single-member wrapper below is bit-identical by construction.
inline double angle_step_core(double theta, double s, double c, double b,
                              double kappa, double dM, double dt) {
  const double sk = std::sqrt(kappa);
  const double dw = dM - 2.0 * sk * s * dt;
  return theta + (-2.0 * b + 2.0 * kappa * s * c) * dt + 2.0 * sk * c * dw;
}

}  // namespace detail

// One Euler-Maruyama step of the known-field angle filter.
inline double angle_filter_step(double theta, double b, double kappa,
                                double dM, double dt) {
  if (!std::isfinite(theta) || !std::isfinite(b) || !std::isfinite(dM))
    throw std::invalid_argument("angle_filter_step: non-finite input");
  if (!(kappa > 0.0))
    throw std::invalid_argument("angle_filter_step: kappa must be > 0");
  if (!(dt > 0.0))
    throw std::invalid_argument("angle_filter_step: dt must be > 0");
  return detail::angle_step_core(theta, std::sin(theta), std::cos(theta), b,
                                 kappa, dM, dt);
}

// One member of the qubit parameter ensemble: hypothesis field b, posterior
// weight, and the conditional state angle.
struct QubitMember {
  double theta = 0.0;
  double b = 0.0;  // field value, same units as kappa
  double weight = 0.0;
};

// Angle-representation counterpart of ensemble_step: every member angle is
// advanced by the known-field filter for its own hypothesis (its own
// innovation), while the weights use the ensemble innovation
// dW = dM - 2 sqrt(kappa) <sin theta> dt:
//
//   p_i' = p_i + 2 sqrt(kappa) (sin theta_i - <sin theta>) p_i dW.
inline std::vector<QubitMember> qubit_ensemble_step(
    std::vector<QubitMember> members, double kappa, double dM, double dt) {
  if (members.empty())
    throw std::invalid_argument("qubit_ensemble_step: empty ensemble");
  if (!(kappa > 0.0))
    throw std::invalid_argument("qubit_ensemble_step: kappa must be > 0");
  if (!(dt > 0.0))
    throw std::invalid_argument("qubit_ensemble_step: dt must be > 0");

  const std::size_t n = members.size();
  const double sk = std::sqrt(kappa);
  std::vector<double> s(n), c(n);
  double s_bar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::sin(members[i].theta);
    c[i] = std::cos(members[i].theta);
    s_bar += members[i].weight * s[i];
  }
  const double dw_ens = dM - 2.0 * sk * s_bar * dt;

  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    QubitMember& m = members[i];
    m.theta = detail::angle_step_core(m.theta, s[i], c[i], m.b, kappa, dM, dt);
    double w = m.weight + 2.0 * sk * (s[i] - s_bar) * m.weight * dw_ens;
    if (w < 0.0) w = 0.0;
    m.weight = w;
    wsum += w;
  }
  if (!(wsum > 0.0))
    throw integration_error(
        "qubit_ensemble_step: all posterior weights collapsed to zero "
        "(reduce dt)");
  for (QubitMember& m : members) m.weight /= wsum;
  return members;
}

inline double qubit_posterior_mean_b(const std::vector<QubitMember>& members) {
  double mean = 0.0;
  for (const QubitMember& m : members) mean += m.weight * m.b;
  return mean;
}

inline double qubit_posterior_sd_b(const std::vector<QubitMember>& members) {
  const double mean = qubit_posterior_mean_b(members);
  double var = 0.0;
  for (const QubitMember& m : members)
    var += m.weight * (m.b - mean) * (m.b - mean);
  return std::sqrt(std::max(var, 0.0));
}

}  // namespace qfilter
