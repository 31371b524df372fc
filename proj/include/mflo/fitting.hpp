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
 * Fidelity maximization of a Tucker-form Lorentzian expansion of a molecular
 * orbital.
 *
 * For fixed widths the best core tensor maximizes (t.d)^2 subject to
 * d.S d = 1, where t holds the overlaps of the target with each product LF
 * and S is the product-LF overlap matrix. G = t t^T has rank one, so the top
 * generalized eigenvector is S^{-1} t up to scale and kappa_max = t.S^{-1} t.
 * The reduced fidelity F(a) = kappa_max - P(a) is then climbed with
 * projected gradient ascent over the widths; centres stay fixed.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mflo/basis.hpp"
#include "mflo/detail/parallel.hpp"
#include "mflo/error.hpp"
#include "mflo/lorentzian.hpp"
#include "mflo/tensor.hpp"

namespace mflo {

/// (L / sqrt(N)) sum_k h(k dx - tau~; gamma_s, m) L_{k - k_c}(n, a): the 1D
/// grid integral of one Gaussian primitive factor against one LF.
inline double m_integral(const ContractedGaussianAO &ao, int axis,
                         std::size_t primitive, double width,
                         std::int64_t center, const SimulationCell &cell) {
    const auto h = sample_ao_1d(ao, axis, primitive, cell);
    const auto lf = lf_state(cell.qubits_per_axis, width, center);
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        acc += h[k] * lf[k];
    }
    return cell.edge_lengths[axis] /
           std::sqrt(static_cast<double>(cell.points_per_axis())) * acc;
}

struct FitProblem {
    std::string name;
    MolecularOrbital mo;
    SimulationCell cell;
    LorentzianBasisSpec spec;
    double alpha_pen = 0.0;
    /// Grid normalization constant of the target.
    double normalization = 1.0;

    /// Builds a problem and computes the target's grid normalization.
    static FitProblem create(MolecularOrbital mo, SimulationCell cell,
                             LorentzianBasisSpec spec, double alpha_pen,
                             std::string name = {}) {
        FitProblem p;
        p.name = std::move(name);
        p.mo = std::move(mo);
        p.cell = cell;
        p.spec = std::move(spec);
        p.alpha_pen = alpha_pen;
        p.validate_inputs();
        p.normalization = grid_normalization(p.mo, p.cell);
        return p;
    }

    void validate_inputs() const {
        mo.validate();
        cell.validate();
        spec.validate(cell.qubits_per_axis);
        if (!(alpha_pen >= 0.0) || !std::isfinite(alpha_pen)) {
            throw ArgumentError("penalty strength must be >= 0");
        }
    }
};

namespace detail {

inline std::uint64_t fnv1a(const void *data, std::size_t bytes,
                           std::uint64_t h = 1469598103934665603ULL) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace detail

inline std::uint64_t spec_hash(const LorentzianBasisSpec &spec) {
    std::uint64_t h = detail::fnv1a(nullptr, 0);
    for (const auto &d : spec.directions) {
        const std::uint64_t n = d.size();
        h = detail::fnv1a(&n, sizeof n, h);
        h = detail::fnv1a(d.widths.data(), d.widths.size() * sizeof(double),
                          h);
        h = detail::fnv1a(d.centers.data(),
                          d.centers.size() * sizeof(std::int64_t), h);
    }
    return h;
}

inline std::uint64_t cell_hash(const SimulationCell &cell) {
    std::uint64_t h = detail::fnv1a(cell.origin.data(), sizeof(Vec3));
    h = detail::fnv1a(cell.edge_lengths.data(), sizeof(Vec3), h);
    return detail::fnv1a(&cell.qubits_per_axis, sizeof(int), h);
}

struct TTensor {
    Tensor3 values;
    std::string mo_name;
    std::uint64_t cell_id = 0;
    std::uint64_t spec_id = 0;
};

namespace detail {

// M integrals for every separable (mu, s) term against every LF, per axis.
// Rows index terms, columns index LFs.
struct MTables {
    std::array<Eigen::MatrixXd, 3> m;
    std::array<Eigen::MatrixXd, 3> dm;
    Eigen::VectorXd weights;
    double prefactor = 0.0;
};

inline MTables m_tables(const FitProblem &problem,
                        const std::array<DirectionStates, 3> &states,
                        bool with_derivatives, unsigned threads) {
    const auto terms = separable_terms(problem.mo, problem.cell);
    const auto n_terms = static_cast<Eigen::Index>(terms.size());
    const double sqrt_n =
        std::sqrt(static_cast<double>(problem.cell.points_per_axis()));
    const auto &len = problem.cell.edge_lengths;

    MTables out;
    out.weights.resize(n_terms);
    for (Eigen::Index t = 0; t < n_terms; ++t) {
        out.weights[t] = terms[static_cast<std::size_t>(t)].weight;
    }
    out.prefactor = problem.normalization / std::sqrt(len[0] * len[1] * len[2]);

    for (int nu = 0; nu < kNumAxes; ++nu) {
        const auto n_l = states[nu].states.cols();
        out.m[nu].resize(n_terms, n_l);
        if (with_derivatives) {
            out.dm[nu].resize(n_terms, n_l);
        }
        const double scale = len[nu] / sqrt_n;
        parallel_for(terms.size(), threads, [&](std::size_t ti) {
            const auto &h = terms[ti].factors[nu];
            const Eigen::Map<const Eigen::VectorXd> hv(
                h.data(), static_cast<Eigen::Index>(h.size()));
            const auto row = static_cast<Eigen::Index>(ti);
            out.m[nu].row(row) =
                scale * (hv.transpose() * states[nu].states);
            if (with_derivatives) {
                out.dm[nu].row(row) =
                    scale * (hv.transpose() * states[nu].derivatives);
            }
        });
    }
    return out;
}

// Flat T tensor from M tables.
inline Eigen::VectorXd t_from_tables(const MTables &tab,
                                     const std::array<std::size_t, 3> &dims) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(dims[0] * dims[1] * dims[2]));
    for (Eigen::Index term = 0; term < tab.weights.size(); ++term) {
        const double w = tab.weights[term] * tab.prefactor;
        Eigen::Index l = 0;
        for (std::size_t i = 0; i < dims[0]; ++i) {
            const double wx = w * tab.m[0](term, static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < dims[1]; ++j) {
                const double wxy =
                    wx * tab.m[1](term, static_cast<Eigen::Index>(j));
                for (std::size_t k = 0; k < dims[2]; ++k) {
                    t[l++] += wxy * tab.m[2](term, static_cast<Eigen::Index>(k));
                }
            }
        }
    }
    return t;
}

inline std::array<DirectionStates, 3>
all_direction_states(const LorentzianBasisSpec &spec, int n,
                     bool with_derivatives) {
    return {direction_states(spec.directions[0], n, with_derivatives),
            direction_states(spec.directions[1], n, with_derivatives),
            direction_states(spec.directions[2], n, with_derivatives)};
}

} // namespace detail

/// T_l = <phi_ideal | L_lx L_ly L_lz>, assembled from 1D integrals.
inline TTensor t_tensor(const FitProblem &problem, unsigned threads = 1) {
    problem.validate_inputs();
    const auto states = detail::all_direction_states(
        problem.spec, problem.cell.qubits_per_axis, false);
    const auto tables = detail::m_tables(problem, states, false, threads);
    const auto dims = problem.spec.dims();
    TTensor out;
    out.values = Tensor3(dims, detail::t_from_tables(tables, dims));
    out.mo_name = problem.name;
    out.cell_id = cell_hash(problem.cell);
    out.spec_id = spec_hash(problem.spec);
    return out;
}

/// Kronecker product of per-direction matrices in the product-index order.
inline Eigen::MatrixXd kron3(const std::array<Eigen::MatrixXd, 3> &m) {
    const Eigen::Index nx = m[0].rows();
    const Eigen::Index ny = m[1].rows();
    const Eigen::Index nz = m[2].rows();
    const Eigen::Index n = nx * ny * nz;
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < nx; ++i) {
        for (Eigen::Index j = 0; j < ny; ++j) {
            for (Eigen::Index k = 0; k < nz; ++k) {
                const Eigen::Index row = (i * ny + j) * nz + k;
                for (Eigen::Index ip = 0; ip < nx; ++ip) {
                    for (Eigen::Index jp = 0; jp < ny; ++jp) {
                        const double sxy = m[0](i, ip) * m[1](j, jp);
                        for (Eigen::Index kp = 0; kp < nz; ++kp) {
                            out(row, (ip * ny + jp) * nz + kp) =
                                sxy * m[2](k, kp);
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline std::array<Eigen::MatrixXd, 3>
overlaps_1d(const LorentzianBasisSpec &spec, int n) {
    return {overlap_1d(spec.directions[0], n),
            overlap_1d(spec.directions[1], n),
            overlap_1d(spec.directions[2], n)};
}

/// Overlap matrix of the product LFs, S_{ll'} = prod_nu S^(nu)_{l_nu l'_nu}.
inline Eigen::MatrixXd overlap_3d(const LorentzianBasisSpec &spec, int n) {
    spec.validate(n);
    return kron3(overlaps_1d(spec, n));
}

/// (alpha / n_prod) Tr((S - I)^2).
inline double penalty(const Eigen::MatrixXd &s, double alpha_pen) {
    if (!(alpha_pen >= 0.0)) {
        throw ArgumentError("penalty strength must be >= 0");
    }
    if (alpha_pen == 0.0) {
        return 0.0;
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            if (i != j) {
                acc += s(i, j) * s(i, j);
            }
        }
    }
    return alpha_pen / static_cast<double>(s.rows()) * acc;
}

inline double penalty(const LorentzianBasisSpec &spec, int n,
                      double alpha_pen) {
    return penalty(overlap_3d(spec, n), alpha_pen);
}

struct CoreSolveOptions {
    /// Overlap eigenvalues below this fraction of the largest are dropped.
    double relative_cutoff = 1e-10;
    /// When false, any dropped direction raises ConditioningError.
    bool allow_discard = true;
};

struct CoreSolution {
    Eigen::VectorXd d;
    double kappa_max = 0.0;
    double fidelity = 0.0;
    double penalty = 0.0;
    std::size_t discarded = 0;
    /// Set when t vanishes in the retained subspace; every normalized d is
    /// then optimal.
    bool degenerate = false;
};

/// Largest-eigenvalue solution of (t t^T) d = kappa S d, normalized so that
/// d.S d = 1 and t.d >= 0.
inline CoreSolution solve_core(const Eigen::VectorXd &t,
                               const Eigen::MatrixXd &s, double alpha_pen,
                               const CoreSolveOptions &options = {}) {
    const Eigen::Index n = t.size();
    if (n == 0 || s.rows() != n || s.cols() != n) {
        throw ArgumentError("solve_core: T and S dimensions disagree");
    }
    if (!t.allFinite() || !s.allFinite()) {
        throw ArgumentError("solve_core: non-finite input");
    }

    // Canonical orthogonalization: X = V_kept diag(lambda_kept^{-1/2}).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) {
        throw ConditioningError("overlap eigendecomposition failed",
                                static_cast<std::size_t>(n));
    }
    const Eigen::VectorXd &lambda = eig.eigenvalues();
    const double largest = lambda[n - 1];
    if (!(largest > 0.0)) {
        throw ConditioningError("overlap matrix has no positive eigenvalue",
                                static_cast<std::size_t>(n));
    }
    const double cutoff = options.relative_cutoff * largest;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        if (lambda[i] >= cutoff) {
            kept.push_back(i);
        }
    }
    CoreSolution out;
    out.discarded = static_cast<std::size_t>(n) - kept.size();
    if (out.discarded > 0 && !options.allow_discard) {
        throw ConditioningError(
            "overlap matrix is numerically singular: " +
                std::to_string(out.discarded) + " direction(s) below cutoff",
            out.discarded);
    }
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        x.col(static_cast<Eigen::Index>(c)) =
            eig.eigenvectors().col(kept[c]) / std::sqrt(lambda[kept[c]]);
    }

    const Eigen::VectorXd tp = x.transpose() * t;
    const double kappa = tp.squaredNorm();
    out.penalty = penalty(s, alpha_pen);
    if (kappa > 0.0) {
        // Renormalize in the full metric; X^T S X = I only holds to about
        // eps / (smallest kept eigenvalue).
        out.d = x * tp;
        out.d /= std::sqrt(out.d.dot(s * out.d));
        const double f = t.dot(out.d);
        out.kappa_max = f * f;
    } else {
        // Every direction is an eigenvector with eigenvalue zero. Pick the
        // S-normalized one with the largest leading magnitude.
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < x.cols(); ++c) {
            if (std::abs(x(0, c)) > std::abs(x(0, best))) {
                best = c;
            }
        }
        out.d = x.col(best);
        out.d /= std::sqrt(out.d.dot(s * out.d));
        if (out.d[0] < 0.0) {
            out.d = -out.d;
        }
        out.kappa_max = 0.0;
        out.degenerate = true;
    }
    out.fidelity = out.kappa_max - out.penalty;
    return out;
}

struct FitEvaluation {
    Eigen::VectorXd t;
    std::array<Eigen::MatrixXd, 3> s1d;
    Eigen::MatrixXd s;
    CoreSolution core;
    /// |<phi_ideal | phi_Tucker>|^2 = (t.d)^2.
    double squared_overlap = 0.0;
    /// dF/da over all widths, x then y then z. Empty unless requested.
    Eigen::VectorXd gradient;
};

namespace detail {

// sum_{l,l'} X_{ll'} dS_{ll'}/da for the width of LF m along axis nu, with X
// symmetric. dS^(nu)_{ij}/da_m = delta_im D_mj + delta_jm D_mi where
// D_mj = <dL_m | L_j>.
inline double contract_overlap_derivative(
    const Eigen::MatrixXd &x, const std::array<Eigen::MatrixXd, 3> &s1d,
    const Eigen::MatrixXd &d_nu, int nu, Eigen::Index m,
    const std::array<std::size_t, 3> &dims) {
    const std::size_t n_prod = dims[0] * dims[1] * dims[2];
    const auto idx = [&](std::size_t l) {
        return std::array<std::size_t, 3>{l / (dims[1] * dims[2]),
                                          (l / dims[2]) % dims[1],
                                          l % dims[2]};
    };
    double acc = 0.0;
    for (std::size_t l = 0; l < n_prod; ++l) {
        const auto a = idx(l);
        if (static_cast<Eigen::Index>(a[nu]) != m) {
            continue;
        }
        for (std::size_t lp = 0; lp < n_prod; ++lp) {
            const auto b = idx(lp);
            double term = d_nu(m, static_cast<Eigen::Index>(b[nu]));
            for (int mu = 0; mu < kNumAxes; ++mu) {
                if (mu != nu) {
                    term *= s1d[mu](static_cast<Eigen::Index>(a[mu]),
                                    static_cast<Eigen::Index>(b[mu]));
                }
            }
            acc += x(static_cast<Eigen::Index>(l),
                     static_cast<Eigen::Index>(lp)) *
                   term;
        }
    }
    return 2.0 * acc;
}

inline Eigen::VectorXd
fidelity_gradient_impl(const FitProblem &problem,
                       const std::array<DirectionStates, 3> &states,
                       const MTables &tab,
                       const std::array<Eigen::MatrixXd, 3> &s1d,
                       const Eigen::MatrixXd &s, const Eigen::VectorXd &t,
                       const Eigen::VectorXd &d, double kappa) {
    const auto dims = problem.spec.dims();
    const auto n_prod = static_cast<Eigen::Index>(problem.spec.num_products());
    const double f = t.dot(d);
    const Eigen::MatrixXd ddt = d * d.transpose();
    Eigen::MatrixXd s_minus_i = s;
    s_minus_i.diagonal().array() -= 1.0;
    const double pen_scale =
        2.0 * problem.alpha_pen / static_cast<double>(n_prod);

    Eigen::VectorXd grad(static_cast<Eigen::Index>(problem.spec.num_widths()));
    Eigen::Index p = 0;
    for (int nu = 0; nu < kNumAxes; ++nu) {
        const Eigen::MatrixXd d_nu =
            states[nu].derivatives.transpose() * states[nu].states;
        for (Eigen::Index m = 0; m < states[nu].states.cols(); ++m, ++p) {
            // g = sum_l dT_l/da d_l; only entries with l_nu == m move.
            double g = 0.0;
            for (Eigen::Index term = 0; term < tab.weights.size(); ++term) {
                const double w = tab.weights[term] * tab.prefactor;
                for (std::size_t i = 0; i < dims[0]; ++i) {
                    for (std::size_t j = 0; j < dims[1]; ++j) {
                        for (std::size_t k = 0; k < dims[2]; ++k) {
                            const std::array<std::size_t, 3> l{i, j, k};
                            if (static_cast<Eigen::Index>(l[nu]) != m) {
                                continue;
                            }
                            double v = w;
                            for (int mu = 0; mu < kNumAxes; ++mu) {
                                const auto col =
                                    static_cast<Eigen::Index>(l[mu]);
                                v *= (mu == nu) ? tab.dm[mu](term, col)
                                                : tab.m[mu](term, col);
                            }
                            g += v * d[static_cast<Eigen::Index>(
                                         (i * dims[1] + j) * dims[2] + k)];
                        }
                    }
                }
            }
            const double dsd =
                contract_overlap_derivative(ddt, s1d, d_nu, nu, m, dims);
            // dP/da = (2 alpha / n_prod) sum (S - I) dS/da.
            double dp = 0.0;
            if (problem.alpha_pen > 0.0) {
                dp = pen_scale * contract_overlap_derivative(
                                     s_minus_i, s1d, d_nu, nu, m, dims);
            }
            grad[p] = 2.0 * f * g - kappa * dsd - dp;
        }
    }
    return grad;
}

} // namespace detail

/// Evaluates T, S, the optimal core tensor and (optionally) the width
/// gradient of the reduced fidelity at the given widths.
inline FitEvaluation evaluate_fit(const FitProblem &problem,
                                  std::span<const double> widths,
                                  bool with_gradient,
                                  const CoreSolveOptions &solve_options = {},
                                  unsigned threads = 1) {
    FitProblem local = problem;
    local.spec.set_flat_widths(widths);
    local.spec.validate(local.cell.qubits_per_axis);
    const int n = local.cell.qubits_per_axis;

    const auto states = detail::all_direction_states(local.spec, n, with_gradient);
    const auto tab = detail::m_tables(local, states, with_gradient, threads);

    FitEvaluation out;
    out.t = detail::t_from_tables(tab, local.spec.dims());
    for (int nu = 0; nu < kNumAxes; ++nu) {
        Eigen::MatrixXd s = states[nu].states.transpose() * states[nu].states;
        s = 0.5 * (s + s.transpose()).eval();
        s.diagonal().setOnes();
        out.s1d[nu] = std::move(s);
    }
    out.s = kron3(out.s1d);
    out.core = solve_core(out.t, out.s, local.alpha_pen, solve_options);
    const double f = out.t.dot(out.core.d);
    out.squared_overlap = f * f;
    if (with_gradient) {
        out.gradient = detail::fidelity_gradient_impl(
            local, states, tab, out.s1d, out.s, out.t, out.core.d,
            out.core.kappa_max);
    }
    return out;
}

/// dF/da at the problem's current widths for a given optimal core tensor
/// and its eigenvalue.
inline Eigen::VectorXd fidelity_gradient(const FitProblem &problem,
                                         const Eigen::VectorXd &d,
                                         double kappa_max) {
    problem.validate_inputs();
    const int n = problem.cell.qubits_per_axis;
    const auto states = detail::all_direction_states(problem.spec, n, true);
    const auto tab = detail::m_tables(problem, states, true, 1);
    const auto t = detail::t_from_tables(tab, problem.spec.dims());
    const auto s1d = overlaps_1d(problem.spec, n);
    const auto s = kron3(s1d);
    if (d.size() != t.size()) {
        throw ArgumentError("core tensor size does not match the basis");
    }
    return detail::fidelity_gradient_impl(problem, states, tab, s1d, s, t, d,
                                          kappa_max);
}

struct OptimizeOptions {
    double min_width = 1e-3;
    double max_width = 50.0;
    double gradient_tolerance = 1e-7;
    double improvement_tolerance = 1e-12;
    int max_iterations = 2000;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 60;
    /// Extra starts from randomly rescaled initial widths.
    int restarts = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    CoreSolveOptions solve;
};

struct OptimizeDiagnostics {
    int iterations = 0;
    double final_gradient_norm = 0.0;
    bool converged = false;
    std::string stop_reason;
    /// Fidelity after each accepted step, starting with the initial point.
    std::vector<double> fidelity_history;
    /// Largest |(t.d)^2 - kappa| and |d.S d - 1| seen over all iterates.
    double max_kappa_residual = 0.0;
    double max_normalization_residual = 0.0;
    /// Best fidelity reached from each start (index 0 is the given widths).
    std::vector<double> restart_fidelities;
};

/// Optimized Tucker-form expansion.
struct TuckerState {
    LorentzianBasisSpec spec;
    Tensor3 core;
    double fidelity = 0.0;
    double squared_overlap = 0.0;
    double penalty = 0.0;
    double kappa_max = 0.0;
    std::size_t discarded_directions = 0;
    bool degenerate = false;
    /// Largest LF weight within three points of a grid edge.
    double max_boundary_mass = 0.0;
    std::vector<std::string> flags;
    OptimizeDiagnostics diagnostics;
};

namespace detail {

inline double projected_gradient_norm(std::span<const double> a,
                                      const Eigen::VectorXd &g,
                                      const OptimizeOptions &opt) {
    double norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double gi = g[static_cast<Eigen::Index>(i)];
        if ((a[i] <= opt.min_width && gi < 0.0) ||
            (a[i] >= opt.max_width && gi > 0.0)) {
            continue;
        }
        norm = std::max(norm, std::abs(gi));
    }
    return norm;
}

inline TuckerState optimize_from(const FitProblem &problem,
                                 std::vector<double> widths,
                                 const OptimizeOptions &opt) {
    const auto clamp_all = [&](std::vector<double> &w) {
        for (double &x : w) {
            x = std::clamp(x, opt.min_width, opt.max_width);
        }
    };
    clamp_all(widths);

    OptimizeDiagnostics diag;
    auto track = [&](const FitEvaluation &ev) {
        diag.max_kappa_residual = std::max(
            diag.max_kappa_residual,
            std::abs(ev.squared_overlap - ev.core.kappa_max));
        diag.max_normalization_residual =
            std::max(diag.max_normalization_residual,
                     std::abs(ev.core.d.dot(ev.s * ev.core.d) - 1.0));
    };

    FitEvaluation cur =
        evaluate_fit(problem, widths, true, opt.solve, opt.threads);
    track(cur);
    diag.fidelity_history.push_back(cur.core.fidelity);

    // Steps are taken in b = log(a), which evens out the very different
    // curvature of narrow and broad LFs. dF/db = a dF/da.
    const double lo = std::log(opt.min_width);
    const double hi = std::log(opt.max_width);
    const auto log_gradient = [&](const std::vector<double> &w,
                                  const Eigen::VectorXd &g) {
        Eigen::VectorXd out(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            out[i] = w[static_cast<std::size_t>(i)] * g[i];
        }
        return out;
    };
    Eigen::VectorXd gb = log_gradient(widths, cur.gradient);
    double step = 0.0;
    {
        const double gmax = gb.cwiseAbs().maxCoeff();
        step = gmax > 0.0 ? 0.1 / gmax : 1.0;
    }
    std::vector<double> prev_b;
    Eigen::VectorXd prev_gb;

    diag.stop_reason = "max_iterations";
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        diag.final_gradient_norm =
            projected_gradient_norm(widths, cur.gradient, opt);
        if (diag.final_gradient_norm < opt.gradient_tolerance) {
            diag.converged = true;
            diag.stop_reason = "gradient";
            break;
        }
        std::vector<double> b(widths.size());
        for (std::size_t i = 0; i < widths.size(); ++i) {
            b[i] = std::log(widths[i]);
        }
        // Barzilai-Borwein trial step once curvature information exists.
        if (!prev_b.empty()) {
            double sy = 0.0;
            double ss = 0.0;
            for (std::size_t i = 0; i < b.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double si = b[i] - prev_b[i];
                const double yi = gb[ii] - prev_gb[ii];
                sy += si * yi;
                ss += si * si;
            }
            if (sy < 0.0 && ss > 0.0) {
                step = ss / -sy;
            } else {
                step *= 2.0;
            }
            step = std::clamp(step, 1e-12, 1e6);
        }

        bool accepted = false;
        double trial_step = step;
        std::vector<double> trial_b(b.size());
        std::vector<double> trial(b.size());
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            double ascent = 0.0;
            for (std::size_t i = 0; i < b.size(); ++i) {
                const double gi = gb[static_cast<Eigen::Index>(i)];
                trial_b[i] = std::clamp(b[i] + trial_step * gi, lo, hi);
                trial[i] = trial_b[i] == lo   ? opt.min_width
                           : trial_b[i] == hi ? opt.max_width
                                              : std::exp(trial_b[i]);
                ascent += gi * (trial_b[i] - b[i]);
            }
            if (ascent <= 0.0) {
                break;
            }
            FitEvaluation next =
                evaluate_fit(problem, trial, true, opt.solve, opt.threads);
            track(next);
            if (next.core.fidelity >=
                cur.core.fidelity + opt.armijo_c * ascent) {
                const double improvement =
                    next.core.fidelity - cur.core.fidelity;
                prev_b = b;
                prev_gb = gb;
                widths = trial;
                cur = std::move(next);
                gb = log_gradient(widths, cur.gradient);
                diag.fidelity_history.push_back(cur.core.fidelity);
                step = trial_step;
                accepted = true;
                if (improvement < opt.improvement_tolerance) {
                    diag.converged = true;
                    diag.stop_reason = "improvement";
                }
                break;
            }
            trial_step *= opt.backtrack_factor;
        }
        diag.iterations = iter + 1;
        if (!accepted) {
            diag.stop_reason = "line_search";
            break;
        }
        if (diag.converged) {
            break;
        }
    }
    diag.final_gradient_norm =
        projected_gradient_norm(widths, cur.gradient, opt);
    if (!diag.converged && diag.final_gradient_norm < opt.gradient_tolerance) {
        diag.converged = true;
        diag.stop_reason = "gradient";
    }

    TuckerState out;
    out.spec = problem.spec;
    out.spec.set_flat_widths(widths);
    out.core = Tensor3(out.spec.dims(), cur.core.d);
    out.fidelity = cur.core.fidelity;
    out.squared_overlap = cur.squared_overlap;
    out.penalty = cur.core.penalty;
    out.kappa_max = cur.core.kappa_max;
    out.discarded_directions = cur.core.discarded;
    out.degenerate = cur.core.degenerate;
    out.diagnostics = std::move(diag);
    return out;
}

} // namespace detail

/// Maximizes the reduced fidelity over LF widths with centres held fixed.
/// Returns the best result over the initial widths and `restarts` randomly
/// rescaled starts. Never throws on non-convergence; inspect `flags`.
inline TuckerState optimize_widths(const FitProblem &problem,
                                   const OptimizeOptions &options = {}) {
    problem.validate_inputs();
    if (!(options.min_width > 0.0) || !(options.max_width > options.min_width)) {
        throw ArgumentError("invalid width bounds");
    }
    if (options.max_iterations < 0 || options.restarts < 0) {
        throw ArgumentError("iteration and restart counts must be >= 0");
    }
    const auto init = problem.spec.flat_widths();

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> log_scale(-std::log(2.0),
                                                     std::log(2.0));
    std::vector<std::vector<double>> starts{init};
    for (int r = 0; r < options.restarts; ++r) {
        auto w = init;
        for (double &x : w) {
            x *= std::exp(log_scale(rng));
        }
        starts.push_back(std::move(w));
    }

    std::vector<TuckerState> results(starts.size());
    for (std::size_t r = 0; r < starts.size(); ++r) {
        results[r] = detail::optimize_from(problem, starts[r], options);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r) {
        if (results[r].fidelity > results[best].fidelity) {
            best = r;
        }
    }
    TuckerState out = std::move(results[best]);
    out.diagnostics.restart_fidelities.clear();
    for (const auto &r : results) {
        out.diagnostics.restart_fidelities.push_back(r.fidelity);
    }

    const int n = problem.cell.qubits_per_axis;
    for (const auto &dir : out.spec.directions) {
        for (std::size_t l = 0; l < dir.size(); ++l) {
            const auto v = lf_state(n, dir.widths[l], dir.centers[l]);
            out.max_boundary_mass =
                std::max(out.max_boundary_mass, boundary_mass(v));
        }
    }
    if (!out.diagnostics.converged) {
        out.flags.emplace_back("unconverged");
    }
    if (out.degenerate) {
        out.flags.emplace_back("degenerate");
    }
    if (out.discarded_directions > 0) {
        out.flags.emplace_back("overlap_regularized");
    }
    if (out.max_boundary_mass > 1e-3) {
        out.flags.emplace_back("boundary_mass");
    }
    return out;
}

/// Full N^3 statevector sum_l c_l L_lx (x) L_ly (x) L_lz for a coefficient
/// tensor over the product basis.
inline GridState tucker_statevector(const LorentzianBasisSpec &spec, int n,
                                    const Tensor3 &coefficients,
                                    const GridOptions &options = {}) {
    spec.validate(n);
    if (coefficients.dims != spec.dims()) {
        throw ArgumentError("coefficient tensor does not match the basis");
    }
    if (n > options.max_qubits_per_axis) {
        throw ResourceError("statevector of " + std::to_string(n) +
                            " qubits per axis exceeds the limit");
    }
    const auto states = detail::all_direction_states(spec, n, false);
    const auto big_n = static_cast<Eigen::Index>(std::size_t{1} << n);
    const auto dims = spec.dims();

    // Contract z, then y, then x: B(l_x, l_y, k_z), C(l_x, k_y, k_z).
    GridState out;
    out.qubits_per_axis = n;
    out.amplitudes.assign(static_cast<std::size_t>(big_n * big_n * big_n), 0.0);
    const Eigen::MatrixXd &lx = states[0].states;
    const Eigen::MatrixXd &ly = states[1].states;
    const Eigen::MatrixXd &lz = states[2].states;

    // yz planes per l_x: P_{lx}(k_y, k_z) = sum_{ly,lz} c(lx,ly,lz) Ly Lz.
    std::vector<Eigen::MatrixXd> planes(dims[0]);
    for (std::size_t i = 0; i < dims[0]; ++i) {
        Eigen::MatrixXd c(static_cast<Eigen::Index>(dims[1]),
                          static_cast<Eigen::Index>(dims[2]));
        for (std::size_t j = 0; j < dims[1]; ++j) {
            for (std::size_t k = 0; k < dims[2]; ++k) {
                c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                    coefficients(i, j, k);
            }
        }
        planes[i] = ly * c * lz.transpose();
    }
    detail::parallel_for(static_cast<std::size_t>(big_n), options.threads,
                         [&](std::size_t kx) {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            const double w = lx(static_cast<Eigen::Index>(kx),
                                static_cast<Eigen::Index>(i));
            double *slab = out.amplitudes.data() +
                           kx * static_cast<std::size_t>(big_n * big_n);
            for (Eigen::Index ky = 0; ky < big_n; ++ky) {
                for (Eigen::Index kz = 0; kz < big_n; ++kz) {
                    slab[ky * big_n + kz] += w * planes[i](ky, kz);
                }
            }
        }
    });
    return out;
}

} // namespace mflo
