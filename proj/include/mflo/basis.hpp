// Copyright 2026 The MFLO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Contracted Cartesian Gaussian orbitals, the simulation cell, and the
 * grid-sampled target statevector.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "mflo/detail/parallel.hpp"
#include "mflo/error.hpp"

namespace mflo {

using Vec3 = std::array<double, 3>;

inline constexpr int kNumAxes = 3;

/// Default cap on qubits per axis for anything that materializes N^3
/// amplitudes (2^24 doubles at 8).
inline constexpr int kDefaultMaxQubitsPerAxis = 8;

inline void check_axis(int axis) {
    if (axis < 0 || axis >= kNumAxes) {
        throw ArgumentError("axis must be 0, 1 or 2, got " +
                            std::to_string(axis));
    }
}

/// xi^m exp(-gamma xi^2), with 0^0 = 1.
inline double gaussian_factor(double xi, double gamma, int power) noexcept {
    double poly = 1.0;
    for (int i = 0; i < power; ++i) {
        poly *= xi;
    }
    return poly * std::exp(-gamma * xi * xi);
}

/// One contracted Cartesian Gaussian basis function
///   chi(r) = sum_s b_s prod_nu (r_nu - tau_nu)^{m_nu} exp(-gamma_s |r - tau|^2).
/// The coefficients multiply raw (unnormalized) primitives.
struct ContractedGaussianAO {
    std::vector<double> exponents;
    std::vector<double> coefficients;
    std::array<int, 3> powers{0, 0, 0};
    Vec3 center{0.0, 0.0, 0.0};

    [[nodiscard]] std::size_t num_primitives() const noexcept {
        return exponents.size();
    }

    void validate() const {
        if (exponents.empty()) {
            throw ArgumentError("contracted Gaussian needs at least one "
                                "primitive");
        }
        if (coefficients.size() != exponents.size()) {
            throw ArgumentError("contracted Gaussian: exponent and "
                                "coefficient counts differ");
        }
        for (double g : exponents) {
            if (!(g > 0.0) || !std::isfinite(g)) {
                throw ArgumentError("Gaussian exponents must be positive");
            }
        }
        for (int m : powers) {
            if (m < 0) {
                throw ArgumentError("Cartesian powers must be non-negative");
            }
        }
    }
};

namespace detail {
// Integral of x^{2m} exp(-p x^2) over the real line.
inline double even_moment(int m, double p) {
    return std::tgamma(m + 0.5) / std::pow(p, m + 0.5);
}
} // namespace detail

/// Continuous-space squared norm of an AO, from closed-form Gaussian
/// moments.
inline double ao_norm_squared(const ContractedGaussianAO &ao) {
    ao.validate();
    double total = 0.0;
    for (std::size_t s = 0; s < ao.num_primitives(); ++s) {
        for (std::size_t t = 0; t < ao.num_primitives(); ++t) {
            const double p = ao.exponents[s] + ao.exponents[t];
            double term = ao.coefficients[s] * ao.coefficients[t];
            for (int m : ao.powers) {
                term *= detail::even_moment(m, p);
            }
            total += term;
        }
    }
    return total;
}

struct AoNormCheck {
    double norm_squared = 0.0;
    bool within_tolerance = false;
};

/// Basis-set files disagree on primitive normalization conventions, so a
/// mismatch here is reported rather than thrown.
inline AoNormCheck check_ao_norm(const ContractedGaussianAO &ao,
                                 double tolerance = 1e-8) {
    const double n2 = ao_norm_squared(ao);
    return {n2, std::abs(n2 - 1.0) <= tolerance};
}

/// Copy of `ao` with coefficients rescaled to unit continuous norm.
inline ContractedGaussianAO renormalized(ContractedGaussianAO ao) {
    const double n2 = ao_norm_squared(ao);
    if (!(n2 > 0.0)) {
        throw DegenerateInputError("AO has zero norm");
    }
    const double scale = 1.0 / std::sqrt(n2);
    for (double &b : ao.coefficients) {
        b *= scale;
    }
    return ao;
}

/// Evaluates chi at a point in space.
inline double evaluate_ao(const ContractedGaussianAO &ao, const Vec3 &r) {
    double value = 0.0;
    for (std::size_t s = 0; s < ao.num_primitives(); ++s) {
        double term = ao.coefficients[s];
        for (int nu = 0; nu < kNumAxes; ++nu) {
            term *= gaussian_factor(r[nu] - ao.center[nu], ao.exponents[s],
                                    ao.powers[nu]);
        }
        value += term;
    }
    return value;
}

struct MolecularOrbital {
    std::vector<ContractedGaussianAO> aos;
    std::vector<double> coefficients;

    void validate() const {
        if (aos.empty()) {
            throw ArgumentError("molecular orbital needs at least one AO");
        }
        if (aos.size() != coefficients.size()) {
            throw ArgumentError("molecular orbital: AO and coefficient "
                                "counts differ");
        }
        for (const auto &ao : aos) {
            ao.validate();
        }
    }
};

inline double evaluate_mo(const MolecularOrbital &mo, const Vec3 &r) {
    double value = 0.0;
    for (std::size_t mu = 0; mu < mo.aos.size(); ++mu) {
        value += mo.coefficients[mu] * evaluate_ao(mo.aos[mu], r);
    }
    return value;
}

/// Box [origin, origin + L) sampled with 2^n points per axis; point k sits at
/// origin + k * L / 2^n (no half-cell offset).
struct SimulationCell {
    Vec3 origin{0.0, 0.0, 0.0};
    Vec3 edge_lengths{1.0, 1.0, 1.0};
    int qubits_per_axis = 1;

    [[nodiscard]] std::size_t points_per_axis() const noexcept {
        return std::size_t{1} << qubits_per_axis;
    }
    [[nodiscard]] double spacing(int axis) const {
        check_axis(axis);
        return edge_lengths[axis] / static_cast<double>(points_per_axis());
    }
    [[nodiscard]] double volume_element() const {
        return spacing(0) * spacing(1) * spacing(2);
    }
    [[nodiscard]] double point(int axis, std::size_t k) const {
        return origin[axis] + static_cast<double>(k) * spacing(axis);
    }

    void validate() const {
        if (qubits_per_axis < 1 || qubits_per_axis > 30) {
            throw ArgumentError("qubits_per_axis must be in [1, 30]");
        }
        for (double len : edge_lengths) {
            if (!(len > 0.0) || !std::isfinite(len)) {
                throw ArgumentError("cell edge lengths must be positive");
            }
        }
    }
};

/// Real amplitudes on the N^3 grid, k_z fastest.
struct GridState {
    int qubits_per_axis = 0;
    std::vector<double> amplitudes;

    [[nodiscard]] std::size_t points_per_axis() const noexcept {
        return std::size_t{1} << qubits_per_axis;
    }
    [[nodiscard]] std::size_t index(std::size_t kx, std::size_t ky,
                                    std::size_t kz) const noexcept {
        const std::size_t n = points_per_axis();
        return (kx * n + ky) * n + kz;
    }
    [[nodiscard]] double norm_squared() const noexcept {
        double acc = 0.0;
        for (double v : amplitudes) {
            acc += v * v;
        }
        return acc;
    }
};

inline double dot(const GridState &lhs, const GridState &rhs) {
    if (lhs.amplitudes.size() != rhs.amplitudes.size()) {
        throw ArgumentError("grid states have different sizes");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < lhs.amplitudes.size(); ++i) {
        acc += lhs.amplitudes[i] * rhs.amplitudes[i];
    }
    return acc;
}

inline void check_grid_budget(const SimulationCell &cell,
                              int max_qubits_per_axis) {
    if (cell.qubits_per_axis > max_qubits_per_axis) {
        throw ResourceError(
            "grid of " + std::to_string(cell.qubits_per_axis) +
            " qubits per axis exceeds the limit of " +
            std::to_string(max_qubits_per_axis));
    }
}

/// Primitive s of `ao` sampled along one axis:
/// entry k = h(k dx - (tau - origin); gamma_s, m_axis).
inline std::vector<double> sample_ao_1d(const ContractedGaussianAO &ao,
                                        int axis, std::size_t primitive,
                                        const SimulationCell &cell) {
    check_axis(axis);
    if (primitive >= ao.num_primitives()) {
        throw ArgumentError("primitive index out of range");
    }
    const std::size_t n = cell.points_per_axis();
    const double dx = cell.spacing(axis);
    const double shift = ao.center[axis] - cell.origin[axis];
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = gaussian_factor(static_cast<double>(k) * dx - shift,
                                 ao.exponents[primitive], ao.powers[axis]);
    }
    return out;
}

namespace detail {

/// One separable term c_mu b_mus hx (x) hy (x) hz of an MO on the grid.
struct SeparableTerm {
    double weight = 0.0;
    std::array<std::vector<double>, 3> factors;
};

inline std::vector<SeparableTerm> separable_terms(const MolecularOrbital &mo,
                                                  const SimulationCell &cell) {
    std::vector<SeparableTerm> terms;
    for (std::size_t mu = 0; mu < mo.aos.size(); ++mu) {
        const auto &ao = mo.aos[mu];
        for (std::size_t s = 0; s < ao.num_primitives(); ++s) {
            SeparableTerm t;
            t.weight = mo.coefficients[mu] * ao.coefficients[s];
            for (int nu = 0; nu < kNumAxes; ++nu) {
                t.factors[nu] = sample_ao_1d(ao, nu, s, cell);
            }
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

} // namespace detail

/// Grid normalization constant (Delta V sum_k |phi(r_k)|^2)^{-1/2}, computed
/// from 1D factor overlaps without touching the N^3 grid.
inline double grid_normalization(const MolecularOrbital &mo,
                                 const SimulationCell &cell) {
    mo.validate();
    cell.validate();
    const auto terms = detail::separable_terms(mo, cell);
    double sum = 0.0;
    for (const auto &a : terms) {
        for (const auto &b : terms) {
            double prod = a.weight * b.weight;
            for (int nu = 0; nu < kNumAxes; ++nu) {
                double d = 0.0;
                for (std::size_t k = 0; k < a.factors[nu].size(); ++k) {
                    d += a.factors[nu][k] * b.factors[nu][k];
                }
                prod *= d;
            }
            sum += prod;
        }
    }
    const double norm2 = sum * cell.volume_element();
    if (!(norm2 > 0.0)) {
        throw DegenerateInputError("molecular orbital vanishes on the grid");
    }
    return 1.0 / std::sqrt(norm2);
}

struct GridOptions {
    int max_qubits_per_axis = kDefaultMaxQubitsPerAxis;
    unsigned threads = 1;
};

struct IdealState {
    GridState state;
    /// Dimensionless factor restoring unit norm on the grid; close to 1 when
    /// the cell and resolution capture the orbital.
    double normalization = 0.0;
};

/// Samples the MO on every grid point and normalizes it to a unit vector.
inline IdealState build_ideal_state(const MolecularOrbital &mo,
                                    const SimulationCell &cell,
                                    const GridOptions &options = {}) {
    mo.validate();
    cell.validate();
    check_grid_budget(cell, options.max_qubits_per_axis);

    const auto terms = detail::separable_terms(mo, cell);
    const std::size_t n = cell.points_per_axis();

    IdealState out;
    out.state.qubits_per_axis = cell.qubits_per_axis;
    out.state.amplitudes.assign(n * n * n, 0.0);
    auto &amp = out.state.amplitudes;

    detail::parallel_for(n, options.threads, [&](std::size_t kx) {
        for (const auto &t : terms) {
            const double wx = t.weight * t.factors[0][kx];
            if (wx == 0.0) {
                continue;
            }
            for (std::size_t ky = 0; ky < n; ++ky) {
                const double wxy = wx * t.factors[1][ky];
                double *row = amp.data() + (kx * n + ky) * n;
                for (std::size_t kz = 0; kz < n; ++kz) {
                    row[kz] += wxy * t.factors[2][kz];
                }
            }
        }
    });

    const double dv = cell.volume_element();
    const double norm2 = out.state.norm_squared() * dv;
    if (!(norm2 > 0.0)) {
        throw DegenerateInputError("molecular orbital vanishes on the grid");
    }
    out.normalization = 1.0 / std::sqrt(norm2);
    const double scale = out.normalization * std::sqrt(dv);
    for (double &v : amp) {
        v *= scale;
    }
    return out;
}

} // namespace mflo
