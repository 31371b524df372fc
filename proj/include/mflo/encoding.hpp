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
 * Circuit-cost and post-selection analytics for probabilistic
 * (LCU-style) preparation of Tucker- and canonical-form Lorentzian states.
 *
 * CNOT counts follow the uniformly-controlled-rotation construction and
 * exclude the QFT on the data register. Success probabilities are the
 * squared norm of the all-zero-ancilla branch.
 */

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mflo/cpd.hpp"
#include "mflo/error.hpp"
#include "mflo/fitting.hpp"
#include "mflo/lorentzian.hpp"
#include "mflo/tensor.hpp"

namespace mflo {

/// ceil(log2(count)) for count >= 1.
inline int ceil_log2(std::size_t count) {
    if (count == 0) {
        throw ArgumentError("ceil_log2 of zero");
    }
    int bits = 0;
    while ((std::size_t{1} << bits) < count) {
        ++bits;
    }
    return bits;
}

struct AncillaCounts {
    std::array<int, 3> per_direction{0, 0, 0};
    int lorentzian = 0;
    std::optional<int> canonical;
};

inline AncillaCounts ancilla_counts(const std::array<std::size_t, 3> &dims,
                                    std::optional<std::size_t> rank = {}) {
    AncillaCounts out;
    for (int nu = 0; nu < 3; ++nu) {
        out.per_direction[nu] = ceil_log2(dims[nu]);
        out.lorentzian += out.per_direction[nu];
    }
    if (rank) {
        out.canonical = ceil_log2(*rank);
    }
    return out;
}

/// Per-gadget CNOT costs of the construction.
namespace cnot {

inline std::int64_t pow2(int e) { return std::int64_t{1} << e; }

/// Uniformly controlled rotation with `controls` control qubits.
inline std::int64_t ucr(int controls) { return pow2(controls); }

/// Generic n-qubit relative-amplitude encoding: sum_{k=1}^{n-1} 2^k =
/// 2^n - 2. Zero qubits need no gates, where 2^n - 2 would give -1.
inline std::int64_t amplitude_encoding(int qubits) {
    return qubits == 0 ? 0 : pow2(qubits) - 2;
}

/// Diagonal phase unitary on the (n_A + 1)-qubit system.
inline std::int64_t shift(int ancillae) { return pow2(ancillae + 1) - 2; }

/// Consecutive CNOT ladder over the data qubits of one axis.
inline std::int64_t ladder(int data_qubits) { return 2 * data_qubits - 3; }

/// Slater-function generation plus phases along one axis: one UCR and one
/// shift per data qubit, plus the ladder.
inline std::int64_t slater_phase_direction(int ancillae, int data_qubits) {
    return data_qubits * ucr(ancillae) + data_qubits * shift(ancillae) +
           ladder(data_qubits);
}

/// Canonical-tensor encoding along one axis: UCRs with n_Ac + k controls,
/// k = 0 .. n_A(nu) - 1.
inline std::int64_t canonical_direction(int canonical_ancillae,
                                        int ancillae) {
    std::int64_t total = 0;
    for (int k = 0; k < ancillae; ++k) {
        total += ucr(canonical_ancillae + k);
    }
    return total;
}

/// Textbook QFT on n qubits with each controlled phase as two CNOTs and the
/// final swaps omitted. Informational only; never part of the totals.
inline std::int64_t qft(int qubits) {
    return static_cast<std::int64_t>(qubits) * (qubits - 1);
}

} // namespace cnot

enum class StateForm { Tucker, Canonical };

inline const char *to_string(StateForm form) {
    return form == StateForm::Tucker ? "tucker" : "canonical";
}

struct CircuitCostReport {
    StateForm form = StateForm::Tucker;
    AncillaCounts ancillae;
    std::optional<std::size_t> rank;
    std::int64_t total_cnots = 0;
    /// Slater functions and their phase factors (shared by both forms).
    std::int64_t slater_phase_cnots = 0;
    /// Amplitude encoding: of the core tensor (Tucker) or of the canonical
    /// coefficients and tensors (canonical).
    std::int64_t amplitude_cnots = 0;
    /// Standard QFT cost on all three data registers. Not included in
    /// total_cnots.
    std::int64_t qft_cnots_informational = 0;
    std::optional<double> success_probability;
};

/// Closed-form totals. These assume at least one Lorentzian ancilla (and,
/// for the canonical form, R >= 2); below that they undercount by one
/// against the component sums.
inline std::int64_t tucker_total_cnots(const std::array<std::size_t, 3> &dims,
                                       int data_qubits) {
    const auto anc = ancilla_counts(dims);
    std::int64_t sum = 0;
    for (int a : anc.per_direction) {
        sum += cnot::pow2(a);
    }
    return cnot::pow2(anc.lorentzian) - 11 + 3 * data_qubits * sum;
}

inline std::int64_t canonical_total_cnots(
    const std::array<std::size_t, 3> &dims, int data_qubits,
    std::size_t rank) {
    const auto anc = ancilla_counts(dims, rank);
    std::int64_t sum = 0;
    for (int a : anc.per_direction) {
        sum += cnot::pow2(a);
    }
    const int nc = *anc.canonical;
    return -cnot::pow2(nc + 1) - 11 +
           (3 * data_qubits + cnot::pow2(nc)) * sum;
}

inline std::int64_t slater_phase_cnots(const std::array<std::size_t, 3> &dims,
                                       int data_qubits) {
    const auto anc = ancilla_counts(dims);
    std::int64_t total = 0;
    for (int a : anc.per_direction) {
        total += cnot::slater_phase_direction(a, data_qubits);
    }
    return total;
}

inline void check_data_qubits(int data_qubits) {
    if (data_qubits < 1) {
        throw ArgumentError("data register needs at least one qubit per "
                            "axis");
    }
}

inline void check_dims(const std::array<std::size_t, 3> &dims) {
    for (auto d : dims) {
        if (d < 1) {
            throw ArgumentError("every direction needs at least one LF");
        }
    }
}

/// Component-wise CNOT count for the Tucker-form circuit.
inline CircuitCostReport cnot_count_tucker(
    const std::array<std::size_t, 3> &dims, int data_qubits) {
    check_dims(dims);
    check_data_qubits(data_qubits);
    CircuitCostReport out;
    out.form = StateForm::Tucker;
    out.ancillae = ancilla_counts(dims);
    out.slater_phase_cnots = slater_phase_cnots(dims, data_qubits);
    out.amplitude_cnots = cnot::amplitude_encoding(out.ancillae.lorentzian);
    out.total_cnots = out.slater_phase_cnots + out.amplitude_cnots;
    out.qft_cnots_informational = 3 * cnot::qft(data_qubits);
    return out;
}

/// Component-wise CNOT count for the canonical-form circuit of rank R.
inline CircuitCostReport cnot_count_canonical(
    const std::array<std::size_t, 3> &dims, int data_qubits,
    std::size_t rank) {
    check_dims(dims);
    check_data_qubits(data_qubits);
    if (rank < 1) {
        throw ArgumentError("rank must be >= 1");
    }
    CircuitCostReport out;
    out.form = StateForm::Canonical;
    out.rank = rank;
    out.ancillae = ancilla_counts(dims, rank);
    const int nc = *out.ancillae.canonical;
    out.slater_phase_cnots = slater_phase_cnots(dims, data_qubits);
    out.amplitude_cnots = cnot::amplitude_encoding(nc);
    for (int a : out.ancillae.per_direction) {
        out.amplitude_cnots += cnot::canonical_direction(nc, a);
    }
    out.total_cnots = out.slater_phase_cnots + out.amplitude_cnots;
    out.qft_cnots_informational = 3 * cnot::qft(data_qubits);
    return out;
}

/// d.S d / (n_prod |d|^2).
inline double success_prob_tucker(const Eigen::VectorXd &d,
                                  const Eigen::MatrixXd &s) {
    const double dd = d.squaredNorm();
    if (!(dd > 0.0)) {
        throw ArgumentError("core tensor is zero");
    }
    return d.dot(s * d) / (static_cast<double>(d.size()) * dd);
}

/// Same, assuming the core is S-normalized: 1 / (n_prod |d|^2).
inline double success_prob_tucker_normalized(std::span<const double> d) {
    double dd = 0.0;
    for (double x : d) {
        dd += x * x;
    }
    if (!(dd > 0.0)) {
        throw ArgumentError("core tensor is zero");
    }
    return 1.0 / (static_cast<double>(d.size()) * dd);
}

inline double success_prob_tucker(const TuckerState &tucker, int n) {
    return success_prob_tucker(tucker.core.data,
                               overlap_3d(tucker.spec, n));
}

/// |phi_canon|^2 / (R n_prod sum_r lambda~_r^2) with
/// lambda~_r = lambda_r prod_nu |u_r^(nu)|_2.
inline double success_prob_canonical(const CanonicalState &canon) {
    const auto dims = canon.spec.dims();
    const double n_prod = static_cast<double>(dims[0] * dims[1] * dims[2]);
    double sum = 0.0;
    for (Eigen::Index r = 0; r < canon.lambda.size(); ++r) {
        double lt = canon.lambda[r];
        for (int nu = 0; nu < 3; ++nu) {
            lt *= canon.u[nu].row(r).norm();
        }
        sum += lt * lt;
    }
    if (!(sum > 0.0)) {
        throw ArgumentError("canonical coefficients are zero");
    }
    return canon.norm_squared /
           (static_cast<double>(canon.lambda.size()) * n_prod * sum);
}

/// One branch of a linear combination of state-preparation unitaries.
struct LcuBranch {
    double weight = 0.0;
    /// Either a full statevector (identity metric) or LF coefficients.
    Eigen::VectorXd state;
};

/// Linear-algebra simulation of post-selected LCU: ancilla in the uniform
/// superposition over J branches, branch j prepares its normalized state,
/// then an ancilla unitary whose first row is w / |w| is applied and the
/// all-zero outcome is kept. Returns the probability of that outcome.
/// `metric` is the Gram matrix of the basis the states are expressed in;
/// pass an empty matrix for the identity.
inline double lcu_postselect_oracle(std::span<const LcuBranch> branches,
                                    const Eigen::MatrixXd &metric = {}) {
    if (branches.empty()) {
        throw ArgumentError("LCU needs at least one branch");
    }
    const auto j_count = static_cast<Eigen::Index>(branches.size());
    const Eigen::Index dim = branches.front().state.size();
    const bool identity = metric.size() == 0;
    if (!identity && (metric.rows() != dim || metric.cols() != dim)) {
        throw ArgumentError("metric does not match the branch states");
    }

    Eigen::VectorXd w(j_count);
    for (Eigen::Index j = 0; j < j_count; ++j) {
        w[j] = branches[static_cast<std::size_t>(j)].weight;
    }
    const double wn = w.norm();
    if (!(wn > 0.0)) {
        throw ArgumentError("LCU weights sum to zero norm");
    }

    // Joint state: row j holds the data part entangled with ancilla |j>.
    Eigen::MatrixXd joint(j_count, dim);
    for (Eigen::Index j = 0; j < j_count; ++j) {
        const auto &psi = branches[static_cast<std::size_t>(j)].state;
        if (psi.size() != dim) {
            throw ArgumentError("LCU branch states differ in dimension");
        }
        const double n2 = identity ? psi.squaredNorm() : psi.dot(metric * psi);
        if (!(n2 > 0.0)) {
            throw ArgumentError("LCU branch state has zero norm");
        }
        joint.row(j) = psi.transpose() / std::sqrt(n2 * static_cast<double>(j_count));
    }

    // Householder reflection H = I - 2 v v^T / v.v with H e_0 = w / |w|;
    // H is symmetric, so its first row is w / |w| as well.
    Eigen::VectorXd target = w / wn;
    Eigen::VectorXd v = -target;
    v[0] += 1.0;
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(j_count, j_count);
    const double vv = v.squaredNorm();
    if (vv > 0.0) {
        h -= 2.0 * v * v.transpose() / vv;
    }
    const Eigen::MatrixXd after = h * joint;
    const Eigen::VectorXd flagged = after.row(0).transpose();
    return identity ? flagged.squaredNorm() : flagged.dot(metric * flagged);
}

/// Branches of the Tucker-form circuit: one per product LF, weighted by d.
inline std::vector<LcuBranch> tucker_branches(const Eigen::VectorXd &d) {
    std::vector<LcuBranch> out;
    for (Eigen::Index l = 0; l < d.size(); ++l) {
        LcuBranch b;
        b.weight = d[l];
        b.state = Eigen::VectorXd::Unit(d.size(), l);
        out.push_back(std::move(b));
    }
    return out;
}

/// Branches of the canonical-form circuit: one per (r, l) pair, weighted by
/// lambda_r u_r,lx u_r,ly u_r,lz.
inline std::vector<LcuBranch> canonical_branches(const CanonicalState &canon) {
    const auto dims = canon.spec.dims();
    const auto n_prod = static_cast<Eigen::Index>(dims[0] * dims[1] * dims[2]);
    std::vector<LcuBranch> out;
    for (Eigen::Index r = 0; r < canon.lambda.size(); ++r) {
        for (Eigen::Index l = 0; l < n_prod; ++l) {
            const auto i = static_cast<Eigen::Index>(
                static_cast<std::size_t>(l) / (dims[1] * dims[2]));
            const auto j = static_cast<Eigen::Index>(
                (static_cast<std::size_t>(l) / dims[2]) % dims[1]);
            const auto k =
                static_cast<Eigen::Index>(static_cast<std::size_t>(l) % dims[2]);
            LcuBranch b;
            b.weight = canon.lambda[r] * canon.u[0](r, i) * canon.u[1](r, j) *
                       canon.u[2](r, k);
            b.state = Eigen::VectorXd::Unit(n_prod, l);
            out.push_back(std::move(b));
        }
    }
    return out;
}

/// P(theta) = 1/2 + sin(2 theta) <L_A|L_B> / 2.
inline double two_center_probability(double theta, double overlap) {
    return 0.5 + 0.5 * std::sin(2.0 * theta) * overlap;
}

struct TwoCenterRow {
    double theta = 0.0;
    double probability = 0.0;
    /// 1 - Delta/2 - delta^2 (1 - Delta), delta = theta - pi/4.
    double bonding_approx = 0.0;
    /// Delta/2 + delta^2 (1 - Delta), delta = theta + pi/4.
    double antibonding_approx = 0.0;
};

struct TwoCenterTable {
    double overlap = 0.0;
    std::vector<TwoCenterRow> rows;
};

/// Post-selection probability of cos(theta) L_A + sin(theta) L_B for two LFs
/// of equal width, tabulated over `thetas`.
inline TwoCenterTable two_center_analysis(int n, double width,
                                          std::int64_t center_a,
                                          std::int64_t center_b,
                                          std::span<const double> thetas) {
    const auto la = lf_state(n, width, center_a);
    const auto lb = lf_state(n, width, center_b);
    TwoCenterTable out;
    for (std::size_t k = 0; k < la.size(); ++k) {
        out.overlap += la[k] * lb[k];
    }
    const double delta_gap = 1.0 - out.overlap;
    constexpr double quarter = std::numbers::pi / 4.0;
    for (double theta : thetas) {
        TwoCenterRow row;
        row.theta = theta;
        row.probability = two_center_probability(theta, out.overlap);
        const double db = theta - quarter;
        const double da = theta + quarter;
        row.bonding_approx =
            1.0 - delta_gap / 2.0 - db * db * (1.0 - delta_gap);
        row.antibonding_approx =
            delta_gap / 2.0 + da * da * (1.0 - delta_gap);
        out.rows.push_back(row);
    }
    return out;
}

/// Evenly spaced angles over [lo, hi], endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out;
    if (count == 1) {
        out.push_back(lo);
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(count - 1));
    }
    return out;
}

inline void write_two_center_csv(std::ostream &os,
                                 const TwoCenterTable &table) {
    const auto old_precision = os.precision(17);
    os << "theta,probability,bonding_approx,antibonding_approx\n";
    for (const auto &r : table.rows) {
        os << r.theta << ',' << r.probability << ',' << r.bonding_approx
           << ',' << r.antibonding_approx << '\n';
    }
    os.precision(old_precision);
}

} // namespace mflo
