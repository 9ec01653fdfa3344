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

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

namespace qfilter {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Default relative tolerance for rank / linear-independence decisions.
inline constexpr double kRankTol = 1e-9;

// -----------------------------------------------------------------------------
// constructors
// -----------------------------------------------------------------------------

inline Operator identity(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("identity: dimension must be >= 1");
  return Operator::Identity(n, n);
}

inline Operator pauli_x() {
  Operator s(2, 2);
  s << Complex(0, 0), Complex(1, 0), Complex(1, 0), Complex(0, 0);
  return s;
}

inline Operator pauli_y() {
  Operator s(2, 2);
  s << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return s;
}

inline Operator pauli_z() {
  Operator s(2, 2);
  s << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(-1, 0);
  return s;
}

// Diagonal operator with the given real entries.
inline Operator diag_op(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("diag_op: empty diagonal");
  Operator d = Operator::Zero(static_cast<Eigen::Index>(values.size()),
                              static_cast<Eigen::Index>(values.size()));
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    d(i, i) = Complex(values[static_cast<std::size_t>(i)], 0.0);
  return d;
}

// Rank-one projector |i><i| in an n-dimensional space.
inline Operator projector(Eigen::Index n, Eigen::Index i) {
  if (n < 1 || i < 0 || i >= n)
    throw std::invalid_argument("projector: index out of range");
  Operator p = Operator::Zero(n, n);
  p(i, i) = Complex(1, 0);
  return p;
}

// -----------------------------------------------------------------------------
// predicates and inner products
// -----------------------------------------------------------------------------

namespace detail {
inline void require_square(const Operator& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw std::invalid_argument(std::string(who) + ": operator must be square");
}
inline void require_same_dim(const Operator& a, const Operator& b,
                             const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}
}  // namespace detail

inline bool is_hermitian(const Operator& a, double tol = 1e-12) {
  detail::require_square(a, "is_hermitian");
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_diagonal(const Operator& a, double tol = 1e-12) {
  detail::require_square(a, "is_diagonal");
  double off = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) off = std::max(off, std::abs(a(i, j)));
  return off <= tol;
}

// Hilbert-Schmidt inner product <a, b> = Tr(a^dag b).
inline Complex hs_inner(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "hs_inner");
  return a.conjugate().cwiseProduct(b).sum();
}

inline double hs_norm(const Operator& a) { return a.norm(); }

// Tr(a b) without forming the product.
inline Complex trace_of_product(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "trace_of_product");
  return a.cwiseProduct(b.transpose()).sum();
}

// -----------------------------------------------------------------------------
// composition
// -----------------------------------------------------------------------------

inline Operator tensor(const Operator& a, const Operator& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

inline Operator commutator(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "commutator");
  detail::require_square(a, "commutator");
  return a * b - b * a;
}

// Lindblad generator in the Heisenberg picture,
//   G[x] = i [h, x] + l^dag x l - (l^dag l x + x l^dag l) / 2.
// Applied to observables; maps Hermitian x to Hermitian output.
inline Operator lindblad_map(const Operator& h, const Operator& l,
                             const Operator& x) {
  detail::require_square(x, "lindblad_map");
  detail::require_same_dim(h, x, "lindblad_map");
  detail::require_same_dim(l, x, "lindblad_map");
  const Operator ldl = l.adjoint() * l;
  return Complex(0, 1) * (h * x - x * h) + l.adjoint() * x * l -
         0.5 * (ldl * x + x * ldl);
}

// Measurement coupling map K[x] = l^dag x + x l.
inline Operator k_map(const Operator& l, const Operator& x) {
  detail::require_square(x, "k_map");
  detail::require_same_dim(l, x, "k_map");
  return l.adjoint() * x + x * l;
}

// -----------------------------------------------------------------------------
// orthonormal bases of operator subspaces
// -----------------------------------------------------------------------------

// An orthonormal (Hilbert-Schmidt) family spanning an operator subspace.
struct OperatorBasis {
  std::vector<Operator> members;

  int dim() const { return static_cast<int>(members.size()); }

  // Squared norm of the component of x orthogonal to the span.
  // Two projection passes keep the residual orthogonal to working precision
  // even for nearly dependent inputs.
  Operator residual(const Operator& x) const {
    Operator r = x;
    for (int pass = 0; pass < 2; ++pass)
      for (const Operator& b : members) r -= hs_inner(b, r) * b;
    return r;
  }

  bool contains(const Operator& x, double tol = kRankTol) const {
    const double scale = std::max(hs_norm(x), 1.0);
    return hs_norm(residual(x)) <= tol * scale;
  }
};

// Modified Gram-Schmidt with reorthogonalization. Inputs whose residual
// against the running basis falls below tol * max input norm are discarded,
// so the result has full numerical rank.
inline OperatorBasis gram_schmidt(const std::vector<Operator>& ops,
                                  double tol = kRankTol) {
  OperatorBasis basis;
  if (ops.empty()) return basis;
  const Eigen::Index d = ops.front().rows();
  double max_norm = 0.0;
  for (const Operator& op : ops) {
    detail::require_square(op, "gram_schmidt");
    if (op.rows() != d)
      throw std::invalid_argument("gram_schmidt: mixed operator dimensions");
    max_norm = std::max(max_norm, hs_norm(op));
  }
  if (max_norm == 0.0) return basis;  // all inputs are zero
  const double cutoff = tol * max_norm;
  for (const Operator& op : ops) {
    Operator r = basis.residual(op);
    const double n = hs_norm(r);
    if (n > cutoff) basis.members.push_back(r / n);
  }
  return basis;
}

}  // namespace qfilter
