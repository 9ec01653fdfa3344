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
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfilter/csv.hpp"
#include "qfilter/operators.hpp"
#include "qfilter/rng.hpp"

namespace qfilter {

using DensityMatrix = Operator;

// Raised when a trajectory leaves the physical state set or produces
// non-finite values; the usual cure is a smaller time step.
class integration_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration controls shared by every SDE loop in the library.
struct SdeConfig {
  double dt = 1e-4;
  std::uint64_t seed = 0;
  // Symmetrize and renormalize the state after every Euler-Maruyama step.
  // The scheme is trace-preserving only to O(dt) per step, so this is on by
  // default; switch off only for scheme-order studies.
  bool renormalize = true;
  // Retract the state onto the pure manifold (nearest pure state) after each
  // step. Valid only when the exact filter state is known to stay pure
  // (pure initial state, unit-efficiency measurement, no extra decoherence).
  // Without it the Euler purity error random-walks at O(sqrt(dt)) over long
  // runs, which swamps the scheme's O(dt) weak error.
  bool project_pure = false;
};

// A state is declared unphysical when Tr(rho^2) exceeds 1 by more than this.
inline constexpr double kPurityTol = 1e-3;

// Homodyne-style measurement record: increments dM over uniform steps dt.
struct MeasurementRecord {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> increments;

  double duration() const {
    return static_cast<double>(increments.size()) * dt;
  }

  // CSV with header "t,dM"; t is the start time of each increment interval.
  void to_csv(std::ostream& out) const {
    out << "t,dM\n";
    for (std::size_t k = 0; k < increments.size(); ++k) {
      out << format_double(t0 + static_cast<double>(k) * dt) << ','
          << format_double(increments[k]) << '\n';
    }
  }

  static MeasurementRecord from_csv(std::istream& in) {
    MeasurementRecord rec;
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,dM", 0) != 0)
      throw std::runtime_error("measurement record: missing 't,dM' header");
    std::vector<double> times;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      const std::vector<double> row = parse_csv_row(line);
      if (row.size() != 2)
        throw std::runtime_error("measurement record: expected 2 columns");
      times.push_back(row[0]);
      rec.increments.push_back(row[1]);
    }
    if (!times.empty()) rec.t0 = times.front();
    if (times.size() > 1) rec.dt = times[1] - times[0];
    return rec;
  }
};

// Innovation dW = dM - Tr((l + l^dag) rho) dt of a candidate state against a
// record increment.
inline double innovation(const DensityMatrix& rho, const Operator& l,
                         double dM, double dt) {
  detail::require_same_dim(rho, l, "innovation");
  const Operator x = l + l.adjoint();
  return dM - trace_of_product(x, rho).real() * dt;
}

namespace detail {

// Precomputed generator pieces for repeated stepping with fixed (h, l).
struct SmeModel {
  Operator h;    // Hamiltonian
  Operator l;    // measurement/coupling operator
  Operator x;    // l + l^dag
  Operator ldl;  // l^dag l

  SmeModel(Operator h_in, Operator l_in)
      : h(std::move(h_in)), l(std::move(l_in)) {
    require_square(h, "sme");
    require_same_dim(h, l, "sme");
    x = l + l.adjoint();
    ldl = l.adjoint() * l;
  }

  double expectation(const DensityMatrix& rho) const {
    return trace_of_product(x, rho).real();
  }

  // One Euler-Maruyama step of the filtering equation, conditioning on the
  // record increment dM. The innovation is computed from this state's own
  // expectation, so the same routine serves the truth simulator, the known-
  // parameter filter and every ensemble member.
  DensityMatrix step(const DensityMatrix& rho, double dM,
                     const SdeConfig& cfg) const {
    const double e = expectation(rho);
    const double dw = dM - e * cfg.dt;
    const Operator lrho = l * rho;
    const Operator rhold = rho * l.adjoint();
    DensityMatrix next = rho;
    // Drift: -i[h, rho] + l rho l^dag - (l^dag l rho + rho l^dag l)/2.
    next.noalias() += (Complex(0, -1) * cfg.dt) * (h * rho);
    next.noalias() -= (Complex(0, -1) * cfg.dt) * (rho * h);
    next.noalias() += cfg.dt * (lrho * l.adjoint());
    next.noalias() -= (0.5 * cfg.dt) * (ldl * rho);
    next.noalias() -= (0.5 * cfg.dt) * (rho * ldl);
    // Diffusion: (l rho + rho l^dag - Tr(x rho) rho) dW.
    next += dw * (lrho + rhold);
    next -= (dw * e) * rho;
    if (!next.allFinite())
      throw integration_error("sme_step: non-finite state (reduce dt)");
    if (cfg.renormalize) {
      next = 0.5 * (next + next.adjoint()).eval();
      const double tr = next.trace().real();
      if (!(tr > 0.0))
        throw integration_error("sme_step: state trace is not positive");
      next /= tr;
    }
    if (cfg.project_pure) project_to_pure(next);
    // Tr(rho^2) = squared Frobenius norm for Hermitian rho; a violation well
    // beyond rounding means the step size cannot resolve the noise.
    if (next.squaredNorm() > 1.0 + kPurityTol)
      throw integration_error("sme_step: purity exceeds 1 (reduce dt)");
    return next;
  }

  // Replace rho by the nearest pure state (rank-one projector onto the top
  // eigenvector). A maximally mixed state has no preferred direction and is
  // left unchanged.
  static void project_to_pure(DensityMatrix& rho) {
    if (rho.rows() == 2) {
      // Closed form on the Bloch ball: rescale the Bloch vector to length 1.
      const double sx = 2.0 * rho(0, 1).real();
      const double sy = -2.0 * rho(0, 1).imag();
      const double sz = (rho(0, 0) - rho(1, 1)).real();
      const double r = std::sqrt(sx * sx + sy * sy + sz * sz);
      if (!(r > 0.0)) return;
      const double ux = sx / r, uy = sy / r, uz = sz / r;
      rho(0, 0) = Complex(0.5 * (1.0 + uz), 0.0);
      rho(1, 1) = Complex(0.5 * (1.0 - uz), 0.0);
      rho(0, 1) = Complex(0.5 * ux, -0.5 * uy);
      rho(1, 0) = Complex(0.5 * ux, 0.5 * uy);
      return;
    }
    Eigen::SelfAdjointEigenSolver<Operator> es(rho);
    if (es.info() != Eigen::Success)
      throw integration_error("sme_step: eigensolver failed in projection");
    const auto top = es.eigenvectors().col(rho.rows() - 1);
    rho.noalias() = top * top.adjoint();
  }
};

}  // namespace detail

// Single conditioning step of the stochastic master equation.
inline DensityMatrix sme_step(const DensityMatrix& rho, const Operator& h,
                              const Operator& l, double dM,
                              const SdeConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("sme_step: dt must be > 0");
  detail::require_same_dim(rho, h, "sme_step");
  return detail::SmeModel(h, l).step(rho, dM, cfg);
}

// Truth trajectory: the state path of the system under its actual parameter
// values together with the measurement record it emitted.
struct TruthTrajectory {
  MeasurementRecord record;
  // States sampled every path_stride steps, beginning with the initial state
  // and always including the final one.
  std::vector<DensityMatrix> states;
  double path_dt = 0.0;  // time between consecutive sampled states
};

// Simulate the closed-loop truth: draw dW ~ N(0, dt), emit
// dM = Tr((l + l^dag) rho) dt + dW, and condition the state on it.
inline TruthTrajectory simulate_truth(const DensityMatrix& rho0,
                                      const Operator& h_true,
                                      const Operator& l, double duration,
                                      const SdeConfig& cfg,
                                      std::int64_t path_stride = 1) {
  if (!(cfg.dt > 0.0))
    throw std::invalid_argument("simulate_truth: dt must be > 0");
  if (!(duration > 0.0))
    throw std::invalid_argument("simulate_truth: duration must be > 0");
  if (path_stride < 1)
    throw std::invalid_argument("simulate_truth: path_stride must be >= 1");
  detail::require_same_dim(rho0, h_true, "simulate_truth");

  const auto n = static_cast<std::int64_t>(std::llround(duration / cfg.dt));
  if (n < 1)
    throw std::invalid_argument("simulate_truth: duration shorter than dt");

  detail::SmeModel model(h_true, l);
  Rng rng(cfg.seed);
  const double sqrt_dt = std::sqrt(cfg.dt);

  TruthTrajectory traj;
  traj.record.dt = cfg.dt;
  traj.record.increments.reserve(static_cast<std::size_t>(n));
  traj.path_dt = cfg.dt * static_cast<double>(path_stride);
  traj.states.reserve(static_cast<std::size_t>(n / path_stride) + 2);
  traj.states.push_back(rho0);

  DensityMatrix rho = rho0;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double e = model.expectation(rho);
    const double dw = sqrt_dt * rng.normal();
    const double dM = e * cfg.dt + dw;
    rho = model.step(rho, dM, cfg);
    traj.record.increments.push_back(dM);
    if (k % path_stride == 0 || k == n) traj.states.push_back(rho);
  }
  return traj;
}

}  // namespace qfilter
