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

// Test-only oracle: exact single-qubit operator algebra over the coefficient
// representation a = a0*1 + ax*sx + ay*sy + az*sz. Products use the Pauli
// multiplication table directly, giving an implementation of the generator
// maps that shares no code with the library under test.

#pragma once

#include <array>
#include <complex>

#include "qfilter/operators.hpp"

namespace qfilter::testing {

struct PauliPoly {
  // Coefficients of {1, sigma_x, sigma_y, sigma_z}.
  std::array<Complex, 4> c{};

  static PauliPoly unit(int index) {
    PauliPoly p;
    p.c[static_cast<std::size_t>(index)] = Complex(1);
    return p;
  }
  static PauliPoly one() { return unit(0); }
  static PauliPoly sx() { return unit(1); }
  static PauliPoly sy() { return unit(2); }
  static PauliPoly sz() { return unit(3); }

  PauliPoly operator+(const PauliPoly& o) const {
    PauliPoly r;
    for (int i = 0; i < 4; ++i) r.c[i] = c[i] + o.c[i];
    return r;
  }
  PauliPoly operator-(const PauliPoly& o) const {
    PauliPoly r;
    for (int i = 0; i < 4; ++i) r.c[i] = c[i] - o.c[i];
    return r;
  }
  friend PauliPoly operator*(Complex s, const PauliPoly& p) {
    PauliPoly r;
    for (int i = 0; i < 4; ++i) r.c[i] = s * p.c[i];
    return r;
  }

  // sigma_a sigma_b = delta_ab 1 + i eps_abc sigma_c.
  PauliPoly operator*(const PauliPoly& o) const {
    static constexpr int eps[3][3] = {{0, 3, -2}, {-3, 0, 1}, {2, -1, 0}};
    PauliPoly r;
    r.c[0] = c[0] * o.c[0];
    for (int a = 1; a < 4; ++a) {
      r.c[0] += c[a] * o.c[a];
      r.c[a] += c[0] * o.c[a] + c[a] * o.c[0];
    }
    for (int a = 1; a < 4; ++a)
      for (int b = 1; b < 4; ++b) {
        const int e = eps[a - 1][b - 1];
        if (e == 0) continue;
        const int sign = e > 0 ? 1 : -1;
        r.c[e > 0 ? e : -e] +=
            Complex(0, 1) * static_cast<double>(sign) * c[a] * o.c[b];
      }
    return r;
  }

  // The basis matrices are Hermitian, so the adjoint conjugates coefficients.
  PauliPoly adjoint() const {
    PauliPoly r;
    for (int i = 0; i < 4; ++i) r.c[i] = std::conj(c[i]);
    return r;
  }

  Operator to_matrix() const {
    return c[0] * identity(2) + c[1] * pauli_x() + c[2] * pauli_y() +
           c[3] * pauli_z();
  }
};

// Heisenberg generator G[x] = i[h, x] + l^dag x l - (l^dag l x + x l^dag l)/2
// computed entirely in the coefficient algebra.
inline PauliPoly oracle_lindblad(const PauliPoly& h, const PauliPoly& l,
                                 const PauliPoly& x) {
  const PauliPoly ld = l.adjoint();
  const PauliPoly ldl = ld * l;
  return Complex(0, 1) * (h * x - x * h) + ld * x * l -
         Complex(0.5) * (ldl * x + x * ldl);
}

// Coupling map K[x] = l^dag x + x l.
inline PauliPoly oracle_k(const PauliPoly& l, const PauliPoly& x) {
  return l.adjoint() * x + x * l;
}

}  // namespace qfilter::testing
