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

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qfilter/operators.hpp"
#include "qfilter/sme.hpp"

namespace qfilter {

// One hypothesis of the Bayesian parameter ensemble: a candidate parameter
// value xi, its posterior weight, and the conditional state given xi.
struct EnsembleMember {
  double xi = 0.0;
  double weight = 0.0;
  DensityMatrix state;
};

// Ensemble filter state for the model family H = xi * h0 with a common
// coupling operator l. Weights are kept normalized to sum 1.
struct EnsembleState {
  std::vector<EnsembleMember> members;
  Operator h0;
  Operator l;
};

// Advance the whole ensemble by one record increment dM.
//
// Each member state is conditioned by the quantum filter for its own
// hypothesis, i.e. with its own innovation dW_i = dM - e_i dt where
// e_i = Tr((l + l^dag) rho_i); this is the exact single-step decomposition
// of the extended-space filtering equation. The weights evolve with the
// ensemble innovation dW = dM - (sum_j p_j e_j) dt:
//
//   p_i' = p_i + (e_i - e_bar) p_i dW.
//
// Weights are clipped at zero (the Euler scheme can momentarily overshoot)
// and renormalized.
inline EnsembleState ensemble_step(EnsembleState ens, double dM,
                                   const SdeConfig& cfg) {
  if (ens.members.empty())
    throw std::invalid_argument("ensemble_step: empty ensemble");
  if (!(cfg.dt > 0.0))
    throw std::invalid_argument("ensemble_step: dt must be > 0");

  const std::size_t n = ens.members.size();
  const Operator x = ens.l + ens.l.adjoint();

  std::vector<double> e(n);
  double e_bar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    detail::require_same_dim(ens.members[i].state, ens.l, "ensemble_step");
    e[i] = trace_of_product(x, ens.members[i].state).real();
    e_bar += ens.members[i].weight * e[i];
  }
  const double dw_ens = dM - e_bar * cfg.dt;

  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    EnsembleMember& m = ens.members[i];
    const detail::SmeModel model(m.xi * ens.h0, ens.l);
    m.state = model.step(m.state, dM, cfg);
    double w = m.weight + (e[i] - e_bar) * m.weight * dw_ens;
    if (w < 0.0) w = 0.0;
    m.weight = w;
    wsum += w;
  }
  if (!(wsum > 0.0))
    throw integration_error(
        "ensemble_step: all posterior weights collapsed to zero (reduce dt)");
  for (EnsembleMember& m : ens.members) m.weight /= wsum;
  return ens;
}

// Posterior distribution over parameter values. Members sharing the same xi
// (possible after resampling) have their weights accumulated.
inline std::map<double, double> posterior(const EnsembleState& ens) {
  std::map<double, double> post;
  for (const EnsembleMember& m : ens.members) post[m.xi] += m.weight;
  return post;
}

struct EnsembleEstimates {
  double map_value = 0.0;  // highest-weight xi; ties go to the smaller value
  double mean = 0.0;
  double variance = 0.0;
};

inline EnsembleEstimates estimates(const EnsembleState& ens) {
  if (ens.members.empty())
    throw std::invalid_argument("estimates: empty ensemble");
  EnsembleEstimates est;
  double best_w = -1.0;
  for (const auto& [xi, w] : posterior(ens)) {
    // std::map iterates xi in increasing order, so '>' keeps the smaller xi
    // on ties.
    if (w > best_w) {
      best_w = w;
      est.map_value = xi;
    }
    est.mean += w * xi;
  }
  for (const EnsembleMember& m : ens.members)
    est.variance += m.weight * (m.xi - est.mean) * (m.xi - est.mean);
  return est;
}

}  // namespace qfilter
