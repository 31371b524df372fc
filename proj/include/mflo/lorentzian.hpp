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
 * Discrete Lorentzian functions on a 2^n-point periodic grid.
 *
 * The profile centred at the origin is
 *
 *   L_k(n, a) = C_S(n, a) / sqrt(N) * (1 - e^{-2a}) (1 - (-1)^k e^{-aN/2})
 *               / (1 - 2 e^{-a} cos(2 pi k / N) + e^{-2a}),
 *
 * with C_S fixed by unit 2-norm. Small widths approach a grid delta; large
 * widths approach the flat vector. Shifted states wrap modulo N.
 */

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mflo/basis.hpp"
#include "mflo/error.hpp"

namespace mflo {

struct LorentzianProfile {
    std::vector<double> values;
    double norm_const = 0.0;
};

namespace detail {

inline void check_lf_args(int n, double a) {
    if (n < 1 || n > 30) {
        throw ArgumentError("Lorentzian qubit count must be in [1, 30]");
    }
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw ArgumentError("Lorentzian width must be positive and finite");
    }
}

// Unnormalized profile ell_k and, optionally, d ell_k / da. Written with
// expm1 and the half-angle form of the denominator so that small widths
// keep full relative precision.
inline void raw_profile(int n, double a, std::vector<double> &ell,
                        std::vector<double> *dell) {
    const std::size_t big_n = std::size_t{1} << n;
    const double q = std::exp(-a);
    const double one_minus_q = -std::expm1(-a);
    const double numer_a = -std::expm1(-2.0 * a);
    const double half = 0.5 * static_cast<double>(big_n);
    const double q_half = std::exp(-a * half);
    const double even_b = -std::expm1(-a * half);

    ell.resize(big_n);
    if (dell != nullptr) {
        dell->resize(big_n);
    }
    for (std::size_t k = 0; k < big_n; ++k) {
        const bool even = (k % 2) == 0;
        const double b = even ? even_b : 1.0 + q_half;
        const double s =
            std::sin(std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(big_n));
        const double sin2 = s * s;
        const double denom = one_minus_q * one_minus_q + 4.0 * q * sin2;
        ell[k] = numer_a * b / denom;
        if (dell != nullptr) {
            const double d_numer_a = 2.0 * q * q;
            const double d_b = (even ? 1.0 : -1.0) * half * q_half;
            const double d_denom = 2.0 * q * (one_minus_q - 2.0 * sin2);
            (*dell)[k] =
                (d_numer_a * b + numer_a * d_b) / denom - ell[k] * d_denom / denom;
        }
    }
}

inline double norm2(const std::vector<double> &v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

} // namespace detail

/// Normalized LF centred at k = 0, with its normalization constant C_S.
inline LorentzianProfile lf_profile(int n, double a) {
    detail::check_lf_args(n, a);
    std::vector<double> ell;
    detail::raw_profile(n, a, ell, nullptr);
    const double len = detail::norm2(ell);
    LorentzianProfile out;
    out.norm_const = std::sqrt(static_cast<double>(ell.size())) / len;
    out.values.resize(ell.size());
    for (std::size_t k = 0; k < ell.size(); ++k) {
        out.values[k] = ell[k] / len;
    }
    return out;
}

/// d L_k / d a, including the dependence of C_S on a.
inline std::vector<double> lf_profile_da(int n, double a) {
    detail::check_lf_args(n, a);
    std::vector<double> ell;
    std::vector<double> dell;
    detail::raw_profile(n, a, ell, &dell);
    const double len = detail::norm2(ell);
    double proj = 0.0;
    for (std::size_t k = 0; k < ell.size(); ++k) {
        proj += ell[k] * dell[k];
    }
    const double len3 = len * len * len;
    std::vector<double> out(ell.size());
    for (std::size_t k = 0; k < ell.size(); ++k) {
        out[k] = dell[k] / len - ell[k] * proj / len3;
    }
    return out;
}

/// out[k] = in[(k - shift) mod N].
inline std::vector<double> cyclic_shift(std::span<const double> in,
                                        std::int64_t shift) {
    const auto big_n = static_cast<std::int64_t>(in.size());
    std::vector<double> out(in.size());
    if (big_n == 0) {
        return out;
    }
    const std::int64_t s = ((shift % big_n) + big_n) % big_n;
    for (std::int64_t k = 0; k < big_n; ++k) {
        out[static_cast<std::size_t>(k)] =
            in[static_cast<std::size_t>((k - s + big_n) % big_n)];
    }
    return out;
}

inline void check_center(int n, std::int64_t center) {
    const auto big_n = std::int64_t{1} << n;
    if (center < 0 || center >= big_n) {
        throw ArgumentError("Lorentzian center " + std::to_string(center) +
                            " outside [0, " + std::to_string(big_n) + ")");
    }
}

/// |L; a, k_c>: the profile shifted to k_c.
inline std::vector<double> lf_state(int n, double a, std::int64_t center) {
    check_center(n, center);
    return cyclic_shift(lf_profile(n, a).values, center);
}

inline std::vector<double> lf_state_da(int n, double a, std::int64_t center) {
    check_center(n, center);
    return cyclic_shift(lf_profile_da(n, a), center);
}

/// Widths and integer centres of the 1D LFs along one axis.
struct DirectionBasis {
    std::vector<double> widths;
    std::vector<std::int64_t> centers;

    [[nodiscard]] std::size_t size() const noexcept { return centers.size(); }
};

/// Product basis of Lorentzians: one DirectionBasis per axis. Product index
/// l = (l_x * n_Ly + l_y) * n_Lz + l_z.
struct LorentzianBasisSpec {
    std::array<DirectionBasis, 3> directions;

    [[nodiscard]] std::array<std::size_t, 3> dims() const noexcept {
        return {directions[0].size(), directions[1].size(),
                directions[2].size()};
    }
    [[nodiscard]] std::size_t num_products() const noexcept {
        return directions[0].size() * directions[1].size() *
               directions[2].size();
    }
    [[nodiscard]] std::size_t num_widths() const noexcept {
        return directions[0].size() + directions[1].size() +
               directions[2].size();
    }

    /// All widths, x then y then z.
    [[nodiscard]] std::vector<double> flat_widths() const {
        std::vector<double> out;
        out.reserve(num_widths());
        for (const auto &d : directions) {
            out.insert(out.end(), d.widths.begin(), d.widths.end());
        }
        return out;
    }

    void set_flat_widths(std::span<const double> widths) {
        if (widths.size() != num_widths()) {
            throw ArgumentError("width vector has the wrong length");
        }
        std::size_t pos = 0;
        for (auto &d : directions) {
            for (auto &w : d.widths) {
                w = widths[pos++];
            }
        }
    }

    void validate(int qubits_per_axis) const {
        for (int nu = 0; nu < kNumAxes; ++nu) {
            const auto &d = directions[nu];
            const std::string axis_name(1, static_cast<char>('x' + nu));
            if (d.centers.empty()) {
                throw ArgumentError("direction " + axis_name +
                                    " needs at least one Lorentzian");
            }
            if (d.widths.size() != d.centers.size()) {
                throw ArgumentError("direction " + axis_name +
                                    ": widths and centers differ in length");
            }
            std::set<std::pair<double, std::int64_t>> seen;
            for (std::size_t l = 0; l < d.size(); ++l) {
                detail::check_lf_args(qubits_per_axis, d.widths[l]);
                check_center(qubits_per_axis, d.centers[l]);
                if (!seen.emplace(d.widths[l], d.centers[l]).second) {
                    throw ArgumentError("direction " + axis_name +
                                        ": duplicate (width, center) pair");
                }
            }
        }
    }
};

/// The n_L states of one direction as matrix columns (N x n_L), together
/// with their width derivatives.
struct DirectionStates {
    Eigen::MatrixXd states;
    Eigen::MatrixXd derivatives;
};

inline DirectionStates direction_states(const DirectionBasis &basis, int n,
                                        bool with_derivatives = true) {
    const std::size_t big_n = std::size_t{1} << n;
    DirectionStates out;
    out.states.resize(static_cast<Eigen::Index>(big_n),
                      static_cast<Eigen::Index>(basis.size()));
    if (with_derivatives) {
        out.derivatives.resizeLike(out.states);
    }
    for (std::size_t l = 0; l < basis.size(); ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        const auto v = lf_state(n, basis.widths[l], basis.centers[l]);
        out.states.col(col) =
            Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        if (with_derivatives) {
            const auto dv = lf_state_da(n, basis.widths[l], basis.centers[l]);
            out.derivatives.col(col) =
                Eigen::Map<const Eigen::VectorXd>(dv.data(), dv.size());
        }
    }
    return out;
}

/// S_{ll'} = <L_l | L_l'> along one direction.
inline Eigen::MatrixXd overlap_1d(const DirectionBasis &basis, int n) {
    const auto st = direction_states(basis, n, false);
    Eigen::MatrixXd s = st.states.transpose() * st.states;
    // Exact symmetry and unit diagonal; both hold analytically.
    s = 0.5 * (s + s.transpose()).eval();
    s.diagonal().setOnes();
    return s;
}

/// Squared weight of a state within `margin` points of either grid edge.
/// Large values mean the periodic wrap is visibly shaping the function.
inline double boundary_mass(std::span<const double> state,
                            std::size_t margin = 3) {
    double acc = 0.0;
    const std::size_t n = state.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (k < margin || k + margin >= n) {
            acc += state[k] * state[k];
        }
    }
    return acc;
}

/// Centres placed regularly in a box: point i sits at
/// box_min + (i + 1/2) * box_edge / count, rounded to the nearest grid index.
/// Collisions after rounding are an error.
inline std::vector<std::int64_t> box_centers(double box_min, double box_edge,
                                             std::size_t count,
                                             const SimulationCell &cell,
                                             int axis) {
    check_axis(axis);
    if (count == 0) {
        throw ArgumentError("box generator needs at least one point");
    }
    if (!(box_edge > 0.0)) {
        throw ArgumentError("box edge must be positive");
    }
    const double dx = cell.spacing(axis);
    std::vector<std::int64_t> out;
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < count; ++i) {
        const double pos = box_min + (static_cast<double>(i) + 0.5) *
                                         box_edge / static_cast<double>(count);
        const auto k = static_cast<std::int64_t>(
            std::llround((pos - cell.origin[axis]) / dx));
        check_center(cell.qubits_per_axis, k);
        if (!seen.insert(k).second) {
            throw ArgumentError("box generator: two centers round to grid "
                                "index " +
                                std::to_string(k));
        }
        out.push_back(k);
    }
    return out;
}

} // namespace mflo
