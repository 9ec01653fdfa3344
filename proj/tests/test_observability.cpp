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

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qfilter/observability.hpp"
#include "qfilter/operators.hpp"
#include "qfilter/rng.hpp"

namespace qfilter {
namespace {

std::vector<Operator> xz_atomic() { return {identity(2), pauli_x(), pauli_z()}; }

std::vector<Operator> full_atomic() {
  return {identity(2), pauli_x(), pauli_y(), pauli_z()};
}

// ---------------------------------------------------------------------------
// Base model: magnetometer qubit with known field.
// ---------------------------------------------------------------------------

TEST(Observability, KnownFieldQubitIsObservable) {
  const double b = 1.0, kappa = 1.0;
  const ObservabilityReport rep = observable_space(
      b * pauli_y(), std::sqrt(kappa) * pauli_z(), xz_atomic());
  EXPECT_EQ(rep.dim_ambient, 3);
  EXPECT_EQ(rep.dim_observable, 3);
  EXPECT_TRUE(rep.observable);
  // The chain grows twice: the coupling exposes sigma_z, then the precession
  // rotates it into sigma_x.
  EXPECT_EQ(rep.iterations, 2);
}

TEST(Observability, ZeroFieldQubitIsNotObservable) {
  // Without precession nothing maps the measured axis onto sigma_x, so the
  // observable space stalls at {1, sigma_z}.
  const ObservabilityReport rep =
      observable_space(0.0 * pauli_y(), pauli_z(), xz_atomic());
  EXPECT_EQ(rep.dim_ambient, 3);
  EXPECT_EQ(rep.dim_observable, 2);
  EXPECT_FALSE(rep.observable);
  EXPECT_EQ(rep.iterations, 1);
}

TEST(Observability, SigmaYStaysInvisibleToTheChain) {
  // The generators never produce sigma_y from {1, sigma_x, sigma_z}, so
  // against the full operator ambient the model is (correctly) reported
  // unobservable; the xz family is the right ambient for states confined to
  // that plane.
  const ObservabilityReport rep =
      observable_space(pauli_y(), pauli_z(), full_atomic());
  EXPECT_EQ(rep.dim_ambient, 4);
  EXPECT_EQ(rep.dim_observable, 3);
  EXPECT_FALSE(rep.observable);
}

// ---------------------------------------------------------------------------
// Extended model over a finite parameter set.
// ---------------------------------------------------------------------------

TEST(Observability, SymmetricPairCollapsesTheExtendedSpace) {
  const ExtendedModel ext =
      extend_model(pauli_y(), pauli_z(), {-1.0, 1.0}, xz_atomic());
  const ObservabilityReport rep =
      observable_space(ext.h_ext, ext.l_ext, ext.ambient);
  EXPECT_EQ(rep.dim_ambient, 6);
  EXPECT_EQ(rep.dim_observable, 3);
  EXPECT_FALSE(rep.observable);
}

TEST(Observability, DistinctPositiveQuadrupleIsFullyObservable) {
  const ExtendedModel ext =
      extend_model(pauli_y(), pauli_z(), {2.0, 5.0, 8.0, 12.0}, xz_atomic());
  const ObservabilityReport rep =
      observable_space(ext.h_ext, ext.l_ext, ext.ambient);
  EXPECT_EQ(rep.dim_ambient, 12);
  EXPECT_EQ(rep.dim_observable, 12);
  EXPECT_TRUE(rep.observable);
}

TEST(Observability, ExtendModelBuildsBlockStructure) {
  const std::vector<double> values{2.0, 5.0};
  const ExtendedModel ext =
      extend_model(pauli_y(), pauli_z(), values, xz_atomic());

  ASSERT_EQ(ext.h_ext.rows(), 4);
  // Block-diagonal Hamiltonian: value_i times the base generator per block.
  EXPECT_LT((ext.h_ext.topLeftCorner(2, 2) - 2.0 * pauli_y()).norm(), 1e-15);
  EXPECT_LT((ext.h_ext.bottomRightCorner(2, 2) - 5.0 * pauli_y()).norm(),
            1e-15);
  EXPECT_LT(ext.h_ext.topRightCorner(2, 2).norm(), 1e-15);
  // Coupling acts identically on every block.
  EXPECT_LT((ext.l_ext - tensor(identity(2), pauli_z())).norm(), 1e-15);
  // Ambient family: one copy of the atomic family per parameter block.
  ASSERT_EQ(ext.ambient.size(), 6u);
  EXPECT_LT((ext.ambient[0] - tensor(projector(2, 0), identity(2))).norm(),
            1e-15);
  EXPECT_LT((ext.ambient[5] - tensor(projector(2, 1), pauli_z())).norm(),
            1e-15);
  EXPECT_EQ(ext.values, values);
}

TEST(Observability, ExtendModelValidatesInput) {
  EXPECT_THROW(extend_model(pauli_y(), pauli_z(), {}, xz_atomic()),
               std::invalid_argument);
  EXPECT_THROW(extend_model(pauli_y(), pauli_z(), {2.0, 2.0}, xz_atomic()),
               std::invalid_argument);
  EXPECT_THROW(extend_model(pauli_y(), pauli_z(), {2.0, std::nan("")},
                            xz_atomic()),
               std::invalid_argument);
  EXPECT_THROW(extend_model(pauli_y(), pauli_z(), {2.0, 5.0}, {}),
               std::invalid_argument);
  EXPECT_THROW(
      extend_model(pauli_y(), pauli_z(), {2.0, 5.0}, {identity(3)}),
      std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Input validation of the chain itself.
// ---------------------------------------------------------------------------

TEST(Observability, AmbientFamilyMustBeIndependentInvariantAndContainId) {
  const Operator h = pauli_y();
  const Operator l = pauli_z();

  // Linearly dependent family.
  EXPECT_THROW(observable_space(
                   h, l, {identity(2), pauli_z(), identity(2) + pauli_z()}),
               std::invalid_argument);
  // Family without the identity in its span.
  EXPECT_THROW(observable_space(h, l, {pauli_x(), pauli_z()}),
               std::invalid_argument);
  // Family whose span the generators leave: sigma_z rotates into sigma_x,
  // which {1, sigma_z} cannot represent.
  EXPECT_THROW(observable_space(h, l, {identity(2), pauli_z()}),
               std::invalid_argument);
  // Empty family and dimension mismatches.
  EXPECT_THROW(observable_space(h, l, {}), std::invalid_argument);
  EXPECT_THROW(observable_space(h, l, {identity(3)}), std::invalid_argument);
  EXPECT_THROW(observable_space(identity(3), l, xz_atomic()),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Sufficient condition and prior support checks.
// ---------------------------------------------------------------------------

TEST(Observability, CorollaryAcceptsOnlyPositiveDistinctValues) {
  EXPECT_EQ(corollary_check({2.0, 5.0, 8.0, 12.0}, true),
            CorollaryVerdict::kObservable);
  EXPECT_EQ(corollary_check({0.5}, true), CorollaryVerdict::kObservable);
  // Zero, negative, or repeated values are not covered by the condition.
  EXPECT_EQ(corollary_check({0.0, 1.0}, true),
            CorollaryVerdict::kInconclusive);
  EXPECT_EQ(corollary_check({-1.0, 1.0}, true),
            CorollaryVerdict::kInconclusive);
  EXPECT_EQ(corollary_check({2.0, 2.0}, true),
            CorollaryVerdict::kInconclusive);
  // Without base observability the condition says nothing.
  EXPECT_EQ(corollary_check({2.0, 5.0}, false),
            CorollaryVerdict::kInconclusive);
  EXPECT_THROW(corollary_check({}, true), std::invalid_argument);

  EXPECT_STREQ(to_string(CorollaryVerdict::kObservable), "observable");
  EXPECT_STREQ(to_string(CorollaryVerdict::kInconclusive), "inconclusive");
}

TEST(Observability, CorollaryAgreesWithDirectComputation) {
  // Whenever the sufficient condition fires, the constructive chain on the
  // extended space must confirm full observability.
  const Operator h0 = pauli_y();
  const Operator l = pauli_z();
  const bool base_ok = observable_space(h0, l, xz_atomic()).observable;
  ASSERT_TRUE(base_ok);

  Rng rng(909);
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial);
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i)
      values.push_back(0.5 + 11.5 * rng.uniform());
    ASSERT_EQ(corollary_check(values, base_ok),
              CorollaryVerdict::kObservable);
    const ExtendedModel ext = extend_model(h0, l, values, xz_atomic());
    const ObservabilityReport rep =
        observable_space(ext.h_ext, ext.l_ext, ext.ambient);
    EXPECT_TRUE(rep.observable)
        << "trial " << trial << ": chain found " << rep.dim_observable
        << " of " << rep.dim_ambient;
  }
}

TEST(Observability, AbsoluteContinuityRequiresFullSupport) {
  EXPECT_TRUE(absolute_continuity_check({0.25, 0.25, 0.25, 0.25}));
  EXPECT_TRUE(absolute_continuity_check({1e-12, 1.0 - 1e-12}));
  EXPECT_FALSE(absolute_continuity_check({0.0, 1.0}));
  EXPECT_FALSE(absolute_continuity_check({0.5, -0.5, 1.0}));
  EXPECT_THROW(absolute_continuity_check({}), std::invalid_argument);
}

}  // namespace
}  // namespace qfilter
