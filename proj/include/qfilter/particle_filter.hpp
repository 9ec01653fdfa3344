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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qfilter/ensemble.hpp"
#include "qfilter/qubit.hpp"
#include "qfilter/rng.hpp"

namespace qfilter {

// Liu-West shrinkage kernel controls. With link_a_h set, the bandwidth is
// tied to the shrinkage so the kernel leaves the posterior mean and variance
// unchanged (h^2 = 1 - a^2); otherwise a and h are independent knobs.
struct ResampleConfig {
  double a = 0.98;
  double h = 1e-3;
  double threshold = 2.0 / 3.0;  // resample when n_eff / N drops below this
  bool link_a_h = false;
};

inline double effective_bandwidth(const ResampleConfig& cfg) {
  if (cfg.link_a_h) return std::sqrt(std::max(0.0, 1.0 - cfg.a * cfg.a));
  return cfg.h;
}

// Closed parameter support; redrawn kernel samples falling outside are
// retried and finally clamped.
struct Support {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return std::min(std::max(v, lo), hi); }
};

// Effective sample size 1 / sum(w^2) of a normalized weight vector.
inline double n_eff(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("n_eff: empty weights");
  double s2 = 0.0;
  for (double w : weights) s2 += w * w;
  if (!(s2 > 0.0)) throw std::invalid_argument("n_eff: all weights are zero");
  return 1.0 / s2;
}

inline std::vector<double> weights_of(const EnsembleState& ens) {
  std::vector<double> w;
  w.reserve(ens.members.size());
  for (const EnsembleMember& m : ens.members) w.push_back(m.weight);
  return w;
}

// Particle approximation of a continuous parameter prior: an EnsembleState
// whose members are delta masses at sampled parameter values, plus the
// resampling bookkeeping.
struct ParticleSet {
  EnsembleState ensemble;
  int resample_count = 0;
  Rng rng{0};
  Support support;
};

namespace detail {

// Multinomial parent draw by inverting the weight CDF.
inline std::size_t draw_parent(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto idx = static_cast<std::size_t>(it - cdf.begin());
  return std::min(idx, cdf.size() - 1);
}

inline std::vector<double> weight_cdf(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  if (!(cdf.back() > 0.0))
    throw std::invalid_argument("resample: all weights are zero");
  return cdf;
}

// Sample mu + sd * z within the support: up to 100 redraws, then clamp.
inline double kernel_draw(double mu, double sd, const Support& support,
                          Rng& rng) {
  if (sd == 0.0)  // degenerate kernel: redraws cannot move the sample
    return support.contains(mu) ? mu : support.clamp(mu);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double v = mu + sd * rng.normal();
    if (support.contains(v)) return v;
  }
  return support.clamp(mu + sd * rng.normal());
}

}  // namespace detail

// Initialize n particles: parameter values drawn from prior_sampler(rng),
// all states at rho0, uniform weights. The sampler is any callable
// double(Rng&).
template <typename PriorSampler>
ParticleSet init_particles(PriorSampler&& prior_sampler, int n,
                           const DensityMatrix& rho0, Operator h0, Operator l,
                           std::uint64_t seed, Support support = {}) {
  if (n < 1) throw std::invalid_argument("init_particles: need n >= 1");
  ParticleSet ps;
  ps.rng = Rng(seed);
  ps.support = support;
  ps.ensemble.h0 = std::move(h0);
  ps.ensemble.l = std::move(l);
  ps.ensemble.members.reserve(static_cast<std::size_t>(n));
  const double w = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    EnsembleMember m;
    m.xi = prior_sampler(ps.rng);
    if (!ps.support.contains(m.xi))
      throw std::invalid_argument(
          "init_particles: prior sample outside the declared support");
    m.weight = w;
    m.state = rho0;
    ps.ensemble.members.push_back(std::move(m));
  }
  return ps;
}

// Uniform prior on [lo, hi].
struct UniformPrior {
  double lo = 0.0;
  double hi = 1.0;
  double operator()(Rng& rng) const { return lo + (hi - lo) * rng.uniform(); }
};

// Liu-West resampling: multinomial parent selection, then each child takes
// the shrunk parameter a*xi_parent + (1-a)*xi_bar plus Gaussian jitter of
// scale h * sqrt(posterior variance), and a copy of the parent's conditional
// state. Weights reset to 1/N. With a = 1, h = 0 the children are exact
// copies of their sampled parents.
inline ParticleSet liu_west_resample(ParticleSet ps,
                                     const ResampleConfig& cfg) {
  auto& members = ps.ensemble.members;
  if (members.empty())
    throw std::invalid_argument("liu_west_resample: empty particle set");
  const std::size_t n = members.size();

  double xi_bar = 0.0;
  for (const EnsembleMember& m : members) xi_bar += m.weight * m.xi;
  double var = 0.0;
  for (const EnsembleMember& m : members)
    var += m.weight * (m.xi - xi_bar) * (m.xi - xi_bar);
  const double sd = effective_bandwidth(cfg) * std::sqrt(std::max(var, 0.0));

  const std::vector<double> cdf = detail::weight_cdf(weights_of(ps.ensemble));
  std::vector<EnsembleMember> children;
  children.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = detail::draw_parent(cdf, ps.rng);
    EnsembleMember child;
    const double mu = cfg.a * members[p].xi + (1.0 - cfg.a) * xi_bar;
    child.xi = detail::kernel_draw(mu, sd, ps.support, ps.rng);
    child.weight = w;
    child.state = members[p].state;
    children.push_back(std::move(child));
  }
  members = std::move(children);
  ps.resample_count += 1;
  return ps;
}

// One particle-filter step: condition every particle on the record increment,
// then resample if the effective sample size has degenerated. A threshold of
// zero disables resampling entirely, reducing pf_step to ensemble_step.
inline ParticleSet pf_step(ParticleSet ps, double dM, const SdeConfig& sde,
                           const ResampleConfig& cfg) {
  ps.ensemble = ensemble_step(std::move(ps.ensemble), dM, sde);
  if (cfg.threshold > 0.0) {
    const std::vector<double> w = weights_of(ps.ensemble);
    const double ratio =
        n_eff(w) / static_cast<double>(ps.ensemble.members.size());
    if (ratio < cfg.threshold) ps = liu_west_resample(std::move(ps), cfg);
  }
  return ps;
}

// ---------------------------------------------------------------------------
// qubit specialization: particles carry (theta, b) and resampling uses a
// joint Gaussian kernel over both coordinates so the parameter jitter stays
// consistent with each particle's conditional state.
// ---------------------------------------------------------------------------

struct QubitParticleSet {
  std::vector<QubitMember> members;
  double kappa = 1.0;
  int resample_count = 0;
  Rng rng{0};
  Support b_support;
};

inline QubitParticleSet init_qubit_particles(int n, double prior_lo,
                                             double prior_hi, double theta0,
                                             double kappa,
                                             std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("init_qubit_particles: need n >= 1");
  if (!(prior_hi > prior_lo))
    throw std::invalid_argument("init_qubit_particles: empty prior interval");
  if (!(kappa > 0.0))
    throw std::invalid_argument("init_qubit_particles: kappa must be > 0");
  QubitParticleSet ps;
  ps.kappa = kappa;
  ps.rng = Rng(seed);
  ps.b_support = Support{prior_lo, prior_hi};
  ps.members.reserve(static_cast<std::size_t>(n));
  const double w = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    QubitMember m;
    m.theta = theta0;
    m.b = prior_lo + (prior_hi - prior_lo) * ps.rng.uniform();
    m.weight = w;
    ps.members.push_back(m);
  }
  return ps;
}

// Joint Liu-West resampling in (b, theta): both coordinates are shrunk
// toward the posterior mean and jittered with the (scaled) posterior
// covariance, drawn through its Cholesky factor. If the covariance is
// numerically degenerate (or there is a single particle), fall back to the
// parameter-only kernel and copy theta from the parent.
inline std::vector<QubitMember> joint_resample(std::vector<QubitMember> members,
                                               const ResampleConfig& cfg,
                                               Rng& rng,
                                               const Support& b_support = {}) {
  if (members.empty())
    throw std::invalid_argument("joint_resample: empty particle set");
  const std::size_t n = members.size();

  double b_bar = 0.0, th_bar = 0.0;
  for (const QubitMember& m : members) {
    b_bar += m.weight * m.b;
    th_bar += m.weight * m.theta;
  }
  double cbb = 0.0, cbt = 0.0, ctt = 0.0;
  for (const QubitMember& m : members) {
    const double db = m.b - b_bar;
    const double dth = m.theta - th_bar;
    cbb += m.weight * db * db;
    cbt += m.weight * db * dth;
    ctt += m.weight * dth * dth;
  }
  const double h = effective_bandwidth(cfg);

  // Cholesky factor of [[cbb, cbt], [cbt, ctt]]; weighted covariances are
  // positive semidefinite up to rounding, so clamp the Schur complement.
  const bool joint_ok = n >= 2 && cbb > 0.0;
  double l11 = 0.0, l21 = 0.0, l22 = 0.0;
  if (joint_ok) {
    l11 = std::sqrt(cbb);
    l21 = cbt / l11;
    l22 = std::sqrt(std::max(ctt - l21 * l21, 0.0));
  }

  std::vector<double> weights;
  weights.reserve(n);
  for (const QubitMember& m : members) weights.push_back(m.weight);
  const std::vector<double> cdf = detail::weight_cdf(weights);

  std::vector<QubitMember> children;
  children.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = detail::draw_parent(cdf, rng);
    QubitMember child;
    child.weight = w;
    const double mu_b = cfg.a * members[p].b + (1.0 - cfg.a) * b_bar;
    if (joint_ok) {
      const double mu_th = cfg.a * members[p].theta + (1.0 - cfg.a) * th_bar;
      double b_new = 0.0, th_new = 0.0;
      bool accepted = false;
      for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        b_new = mu_b + h * l11 * z1;
        th_new = mu_th + h * (l21 * z1 + l22 * z2);
        accepted = b_support.contains(b_new) || h * l11 == 0.0;
      }
      child.b = b_support.clamp(b_new);
      child.theta = th_new;
    } else {
      child.b = detail::kernel_draw(mu_b, h * std::sqrt(std::max(cbb, 0.0)),
                                    b_support, rng);
      child.theta = members[p].theta;
    }
    children.push_back(child);
  }
  return children;
}

inline QubitParticleSet qubit_pf_step(QubitParticleSet ps, double dM,
                                      double dt, const ResampleConfig& cfg) {
  ps.members = qubit_ensemble_step(std::move(ps.members), ps.kappa, dM, dt);
  if (cfg.threshold > 0.0) {
    double s2 = 0.0;
    for (const QubitMember& m : ps.members) s2 += m.weight * m.weight;
    const double ratio =
        (1.0 / s2) / static_cast<double>(ps.members.size());
    if (ratio < cfg.threshold) {
      ps.members =
          joint_resample(std::move(ps.members), cfg, ps.rng, ps.b_support);
      ps.resample_count += 1;
    }
  }
  return ps;
}

}  // namespace qfilter
