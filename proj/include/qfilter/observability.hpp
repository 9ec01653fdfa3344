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
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfilter/operators.hpp"

namespace qfilter {

// Result of the observable-space iteration.
struct ObservabilityReport {
  OperatorBasis basis;    // orthonormal basis of the observable space
  int dim_observable = 0;
  int dim_ambient = 0;
  bool observable = false;  // observable space = whole ambient space
  int iterations = 0;       // rounds until the chain stalled
};

// Smallest subspace of span(ambient) that contains the identity and is
// invariant under the Heisenberg generator G and the coupling map K:
//
//   Z_0 = span{1},  Z_n = span(Z_{n-1} + G[Z_{n-1}] + K[Z_{n-1}]),
//
// iterated until Z_n stalls. The model is observable on the ambient algebra
// exactly when the chain fills it: every ambient expectation value is then
// determined by the measurement record alone, independent of the prior state.
//
// `ambient` must be a linearly independent family whose span contains the
// identity and is invariant under G and K; violations throw
// std::invalid_argument.
inline ObservabilityReport observable_space(const Operator& h,
                                            const Operator& l,
                                            const std::vector<Operator>& ambient,
                                            double tol = kRankTol) {
  detail::require_square(h, "observable_space");
  detail::require_same_dim(h, l, "observable_space");
  if (ambient.empty())
    throw std::invalid_argument("observable_space: empty ambient family");
  for (const Operator& a : ambient)
    detail::require_same_dim(a, h, "observable_space");

  const OperatorBasis amb = gram_schmidt(ambient, tol);
  if (amb.dim() != static_cast<int>(ambient.size()))
    throw std::invalid_argument(
        "observable_space: ambient family is linearly dependent");

  const Operator id = identity(h.rows());
  if (!amb.contains(id, tol))
    throw std::invalid_argument(
        "observable_space: ambient span does not contain the identity");

  ObservabilityReport report;
  report.dim_ambient = amb.dim();
  report.basis.members.push_back(id / hs_norm(id));

  // Each round can only add dimensions, so a chain that has not stalled
  // within dim(ambient) + 1 rounds indicates a broken invariance check.
  const int max_rounds = amb.dim() + 1;
  for (int round = 1;; ++round) {
    if (round > max_rounds)
      throw std::logic_error(
          "observable_space: iteration failed to terminate");
    const std::size_t frontier = report.basis.members.size();
    bool grew = false;
    for (std::size_t i = 0; i < frontier; ++i) {
      const Operator& m = report.basis.members[i];
      for (const Operator& cand : {lindblad_map(h, l, m), k_map(l, m)}) {
        const Operator r = report.basis.residual(cand);
        const double scale = std::max(hs_norm(cand), 1.0);
        const double rn = hs_norm(r);
        if (rn <= tol * scale) continue;
        const Operator unit = r / rn;
        if (!amb.contains(unit, std::max(tol, 1e-8)))
          throw std::invalid_argument(
              "observable_space: ambient span is not invariant under the "
              "generators");
        report.basis.members.push_back(unit);
        grew = true;
      }
    }
    if (!grew) {
      report.iterations = round - 1;
      break;
    }
  }
  report.dim_observable = report.basis.dim();
  report.observable = (report.dim_observable == report.dim_ambient);
  return report;
}

// The parameter-estimation model on the extended space C^N (x) C^d:
// block-diagonal Hamiltonian Xi (x) h0 with Xi = diag(values), coupling
// 1 (x) l, and ambient family {P_i (x) A_j} built from the parameter
// projectors and the atomic ambient family of the base model.
struct ExtendedModel {
  Operator h_ext;
  Operator l_ext;
  std::vector<Operator> ambient;
  std::vector<double> values;
};

inline ExtendedModel extend_model(const Operator& h0, const Operator& l,
                                  const std::vector<double>& values,
                                  const std::vector<Operator>& atomic) {
  detail::require_square(h0, "extend_model");
  detail::require_same_dim(h0, l, "extend_model");
  if (values.empty())
    throw std::invalid_argument("extend_model: empty value set");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("extend_model: values must be finite");
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (values[i] == values[j])
        throw std::invalid_argument(
            "extend_model: parameter values must be pairwise distinct");
  }
  if (atomic.empty())
    throw std::invalid_argument("extend_model: empty atomic family");
  for (const Operator& a : atomic)
    detail::require_same_dim(a, h0, "extend_model");

  const auto n = static_cast<Eigen::Index>(values.size());
  ExtendedModel ext;
  ext.values = values;
  ext.h_ext = tensor(diag_op(values), h0);
  ext.l_ext = tensor(identity(n), l);
  ext.ambient.reserve(values.size() * atomic.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (const Operator& a : atomic)
      ext.ambient.push_back(tensor(projector(n, i), a));
  return ext;
}

enum class CorollaryVerdict { kObservable, kInconclusive };

inline const char* to_string(CorollaryVerdict v) {
  return v == CorollaryVerdict::kObservable ? "observable" : "inconclusive";
}

// Sufficient condition for observability of the extended model: the base
// filter with known parameter is observable, and the candidate values are
// strictly positive and pairwise distinct. Anything else is inconclusive
// (not a proof of unobservability).
inline CorollaryVerdict corollary_check(const std::vector<double>& values,
                                        bool base_observable) {
  if (values.empty())
    throw std::invalid_argument("corollary_check: empty value set");
  if (!base_observable) return CorollaryVerdict::kInconclusive;
  for (double v : values)
    if (!(v > 0.0)) return CorollaryVerdict::kInconclusive;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (values[i] == values[j]) return CorollaryVerdict::kInconclusive;
  return CorollaryVerdict::kObservable;
}

// The single-shot posterior can concentrate on the true value only if the
// prior does not exclude it a priori: every candidate needs strictly
// positive initial weight. Callers must pass weights normalized to sum 1.
inline bool absolute_continuity_check(const std::vector<double>& weights) {
  if (weights.empty())
    throw std::invalid_argument("absolute_continuity_check: empty weights");
  for (double w : weights)
    if (!(w > 0.0)) return false;
  return true;
}

}  // namespace qfilter
