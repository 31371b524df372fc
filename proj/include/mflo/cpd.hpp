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
 * Canonical (CP) decomposition of a Tucker core tensor and the resulting
 * canonical-form Lorentzian state.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mflo/detail/parallel.hpp"
#include "mflo/error.hpp"
#include "mflo/fitting.hpp"
#include "mflo/lorentzian.hpp"
#include "mflo/tensor.hpp"

namespace mflo {

/// Raw CP factors: factors[nu] is R x n_L(nu), one row per component, so
/// that d ~ sum_r v_r^x (x) v_r^y (x) v_r^z.
struct CpFactors {
    std::array<Eigen::MatrixXd, 3> factors;
    double relative_error = 0.0;
    int sweeps = 0;
    bool converged = false;
    /// A mode Gram matrix of the returned run needed ridge regularization.
    bool ridge_used = false;
    /// Relative reconstruction error after every sweep of the returned run.
    std::vector<double> error_history;

    [[nodiscard]] std::size_t rank() const noexcept {
        return static_cast<std::size_t>(factors[0].rows());
    }
};

struct CpOptions {
    int max_sweeps = 500;
    double tolerance = 1e-12;
    int restarts = 8;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Optional extra run started from these factors (rank must match).
    std::optional<CpFactors> warm_start;
};

/// sum_r v_r^x (x) v_r^y (x) v_r^z for row-wise factors.
inline Tensor3 cp_reconstruct(const std::array<Eigen::MatrixXd, 3> &factors) {
    const std::array<std::size_t, 3> dims{
        static_cast<std::size_t>(factors[0].cols()),
        static_cast<std::size_t>(factors[1].cols()),
        static_cast<std::size_t>(factors[2].cols())};
    Tensor3 out(dims);
    for (Eigen::Index r = 0; r < factors[0].rows(); ++r) {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            const double a = factors[0](r, static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < dims[1]; ++j) {
                const double ab = a * factors[1](r, static_cast<Eigen::Index>(j));
                for (std::size_t k = 0; k < dims[2]; ++k) {
                    out(i, j, k) +=
                        ab * factors[2](r, static_cast<Eigen::Index>(k));
                }
            }
        }
    }
    return out;
}

namespace detail {

// Column-wise factors (n_L x R) for the ALS sweeps.
using Factors = std::array<Eigen::MatrixXd, 3>;

inline double relative_error(const Tensor3 &x, const Factors &cols) {
    const Tensor3 rec =
        cp_reconstruct({cols[0].transpose(), cols[1].transpose(),
                        cols[2].transpose()});
    const double xn = x.data.norm();
    const double diff = (x.data - rec.data).norm();
    return xn > 0.0 ? diff / xn : diff;
}

// M(i, r) = sum over the other two indices of X times the other two
// factor columns.
inline Eigen::MatrixXd mttkrp(const Tensor3 &x, const Factors &f, int mode) {
    const auto rank = f[0].cols();
    Eigen::MatrixXd m =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.dims[mode]), rank);
    for (std::size_t i = 0; i < x.dims[0]; ++i) {
        for (std::size_t j = 0; j < x.dims[1]; ++j) {
            for (std::size_t k = 0; k < x.dims[2]; ++k) {
                const double v = x(i, j, k);
                if (v == 0.0) {
                    continue;
                }
                const std::array<Eigen::Index, 3> idx{
                    static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                    static_cast<Eigen::Index>(k)};
                const int o1 = (mode + 1) % 3;
                const int o2 = (mode + 2) % 3;
                m.row(idx[mode]) += v * f[o1].row(idx[o1]).cwiseProduct(
                                            f[o2].row(idx[o2]));
            }
        }
    }
    return m;
}

struct AlsRun {
    Factors cols;
    double error = 0.0;
    int sweeps = 0;
    bool converged = false;
    bool ridge_used = false;
    std::vector<double> history;
};

inline AlsRun als(const Tensor3 &x, Factors cols, const CpOptions &opt) {
    AlsRun run;
    double prev = relative_error(x, cols);
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        for (int mode = 0; mode < 3; ++mode) {
            const int o1 = (mode + 1) % 3;
            const int o2 = (mode + 2) % 3;
            Eigen::MatrixXd gram = (cols[o1].transpose() * cols[o1])
                                       .cwiseProduct(cols[o2].transpose() *
                                                     cols[o2]);
            const Eigen::MatrixXd m = mttkrp(x, cols, mode);
            const double trace = gram.trace();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
            if (trace > 0.0 && eig.eigenvalues()[0] <= 1e-12 * trace) {
                gram.diagonal().array() += 1e-12 * trace;
                run.ridge_used = true;
            }
            cols[mode] = gram.ldlt().solve(m.transpose()).transpose();
            if (mode < 2) {
                // Scale is absorbed by the next mode's solve.
                for (Eigen::Index r = 0; r < cols[mode].cols(); ++r) {
                    const double nrm = cols[mode].col(r).norm();
                    if (nrm > 0.0) {
                        cols[mode].col(r) /= nrm;
                    }
                }
            }
        }
        const double err = relative_error(x, cols);
        run.history.push_back(err);
        run.sweeps = sweep + 1;
        if (std::abs(prev - err) < opt.tolerance || err < 1e-15) {
            run.converged = true;
            prev = err;
            break;
        }
        prev = err;
    }
    run.error = prev;
    run.cols = std::move(cols);
    return run;
}

inline Factors random_factors(const Tensor3 &x, std::size_t rank,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Factors f;
    for (int nu = 0; nu < 3; ++nu) {
        f[nu].resize(static_cast<Eigen::Index>(x.dims[nu]),
                     static_cast<Eigen::Index>(rank));
        for (Eigen::Index r = 0; r < f[nu].cols(); ++r) {
            for (Eigen::Index i = 0; i < f[nu].rows(); ++i) {
                f[nu](i, r) = normal(rng);
            }
        }
    }
    return f;
}

// Leading left singular vectors of each unfolding; columns beyond the mode
// dimension stay random.
inline Factors svd_factors(const Tensor3 &x, std::size_t rank,
                           std::uint64_t seed) {
    Factors f = random_factors(x, rank, seed);
    for (int mode = 0; mode < 3; ++mode) {
        const auto rows = static_cast<Eigen::Index>(x.dims[mode]);
        const auto cols = static_cast<Eigen::Index>(x.size() / x.dims[mode]);
        Eigen::MatrixXd unf(rows, cols);
        std::vector<Eigen::Index> next(static_cast<std::size_t>(rows), 0);
        for (std::size_t l = 0; l < x.size(); ++l) {
            const auto idx = x.unravel(l);
            const auto r = static_cast<Eigen::Index>(idx[mode]);
            unf(r, next[static_cast<std::size_t>(r)]++) =
                x.data[static_cast<Eigen::Index>(l)];
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(unf, Eigen::ComputeThinU);
        const Eigen::Index keep =
            std::min<Eigen::Index>(svd.matrixU().cols(),
                                   static_cast<Eigen::Index>(rank));
        f[mode].leftCols(keep) = svd.matrixU().leftCols(keep);
    }
    return f;
}

} // namespace detail

/// Rank-R CP decomposition by alternating least squares; best of
/// `restarts` seeded starts (the first is SVD-initialized) plus the optional
/// warm start.
inline CpFactors cp_decompose(const Tensor3 &d, std::size_t rank,
                              const CpOptions &options = {}) {
    if (rank < 1 || rank > d.size()) {
        throw ArgumentError("CP rank must be in [1, " +
                            std::to_string(d.size()) + "]");
    }
    if (!d.data.allFinite()) {
        throw ArgumentError("core tensor has non-finite entries");
    }
    if (options.restarts < 1 && !options.warm_start) {
        throw ArgumentError("CP decomposition needs at least one start");
    }

    std::vector<detail::Factors> starts;
    std::mt19937_64 seeder(options.seed);
    for (int r = 0; r < options.restarts; ++r) {
        const std::uint64_t s = seeder();
        starts.push_back(r == 0 ? detail::svd_factors(d, rank, s)
                                : detail::random_factors(d, rank, s));
    }
    if (options.warm_start) {
        const auto &w = options.warm_start->factors;
        if (static_cast<std::size_t>(w[0].rows()) != rank) {
            throw ArgumentError("warm start has the wrong rank");
        }
        starts.push_back({w[0].transpose(), w[1].transpose(),
                          w[2].transpose()});
    }

    std::vector<detail::AlsRun> runs(starts.size());
    detail::parallel_for(starts.size(), options.threads, [&](std::size_t i) {
        runs[i] = detail::als(d, starts[i], options);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i].error < runs[best].error) {
            best = i;
        }
    }

    CpFactors out;
    for (int nu = 0; nu < 3; ++nu) {
        out.factors[nu] = runs[best].cols[nu].transpose();
    }
    out.relative_error = runs[best].error;
    out.sweeps = runs[best].sweeps;
    out.converged = runs[best].converged;
    out.error_history = std::move(runs[best].history);
    out.ridge_used = runs[best].ridge_used;
    return out;
}

struct NormalizedFactors {
    /// u[nu] is R x n_L(nu); each row has unit S-norm.
    std::array<Eigen::MatrixXd, 3> u;
    /// Descending, positive.
    Eigen::VectorXd lambda;
    /// Components removed because a factor had vanishing norm.
    std::size_t dropped = 0;
};

/// N_r = (v_r . S v_r)^{1/2} per direction, u = v / N, lambda_r = prod N_r.
/// Signs are canonicalized so each u_r^x and u_r^y has a positive
/// largest-magnitude entry; rows are sorted by descending lambda.
inline NormalizedFactors
normalize_factors(const std::array<Eigen::MatrixXd, 3> &v,
                  const std::array<Eigen::MatrixXd, 3> &s1d) {
    const Eigen::Index rank = v[0].rows();
    for (int nu = 0; nu < 3; ++nu) {
        if (v[nu].rows() != rank || v[nu].cols() != s1d[nu].rows()) {
            throw ArgumentError("factor shapes do not match the basis");
        }
        if (!v[nu].allFinite()) {
            throw ArgumentError("factors have non-finite entries");
        }
    }

    struct Component {
        double lambda;
        std::array<Eigen::RowVectorXd, 3> rows;
    };
    std::vector<Component> comps;
    std::size_t dropped = 0;
    for (Eigen::Index r = 0; r < rank; ++r) {
        Component c{1.0, {}};
        bool vanished = false;
        for (int nu = 0; nu < 3; ++nu) {
            const Eigen::RowVectorXd row = v[nu].row(r);
            const double n2 = row * s1d[nu] * row.transpose();
            const double nrm = std::sqrt(std::max(n2, 0.0));
            if (!(nrm > 1e-14)) {
                vanished = true;
                break;
            }
            c.rows[nu] = row / nrm;
            c.lambda *= nrm;
        }
        if (vanished) {
            ++dropped;
            continue;
        }
        for (int nu = 0; nu < 2; ++nu) {
            Eigen::Index at = 0;
            c.rows[nu].cwiseAbs().maxCoeff(&at);
            if (c.rows[nu][at] < 0.0) {
                c.rows[nu] = -c.rows[nu];
                c.rows[2] = -c.rows[2];
            }
        }
        comps.push_back(std::move(c));
    }
    if (comps.empty()) {
        throw DegenerateInputError("every CP component vanished");
    }
    std::stable_sort(comps.begin(), comps.end(),
                     [](const Component &a, const Component &b) {
                         return a.lambda > b.lambda;
                     });

    NormalizedFactors out;
    out.dropped = dropped;
    const auto kept = static_cast<Eigen::Index>(comps.size());
    out.lambda.resize(kept);
    for (int nu = 0; nu < 3; ++nu) {
        out.u[nu].resize(kept, v[nu].cols());
    }
    for (Eigen::Index r = 0; r < kept; ++r) {
        const auto &c = comps[static_cast<std::size_t>(r)];
        out.lambda[r] = c.lambda;
        for (int nu = 0; nu < 3; ++nu) {
            out.u[nu].row(r) = c.rows[nu];
        }
    }
    return out;
}

/// sum_r lambda_r u_r^x (x) u_r^y (x) u_r^z.
inline Tensor3 canonical_core(const Eigen::VectorXd &lambda,
                              const std::array<Eigen::MatrixXd, 3> &u) {
    std::array<Eigen::MatrixXd, 3> scaled = u;
    for (Eigen::Index r = 0; r < lambda.size(); ++r) {
        scaled[0].row(r) *= lambda[r];
    }
    return cp_reconstruct(scaled);
}

/// Canonical-form Lorentzian state of rank R.
struct CanonicalState {
    std::size_t rank = 0;
    LorentzianBasisSpec spec;
    std::array<Eigen::MatrixXd, 3> raw_factors;
    std::array<Eigen::MatrixXd, 3> u;
    Eigen::VectorXd lambda;
    /// 1 - |<T|C>|^2 / (<T|T><C|C>).
    double deviation = 0.0;
    /// <C|C>; not renormalized.
    double norm_squared = 0.0;
    double cp_relative_error = 0.0;
    int cp_sweeps = 0;
    std::vector<std::string> flags;

    [[nodiscard]] Tensor3 core() const { return canonical_core(lambda, u); }
};

struct TuckerCanonOverlap {
    double overlap = 0.0;
    double canon_norm_squared = 0.0;
    double tucker_norm_squared = 0.0;
    double deviation = 0.0;
};

inline bool same_basis(const LorentzianBasisSpec &a,
                       const LorentzianBasisSpec &b) {
    for (int nu = 0; nu < 3; ++nu) {
        if (a.directions[nu].widths != b.directions[nu].widths ||
            a.directions[nu].centers != b.directions[nu].centers) {
            return false;
        }
    }
    return true;
}

/// Overlap, norms and deviation computed in LF-coefficient space with the
/// product overlap metric.
inline TuckerCanonOverlap
tucker_canon_overlap(const Tensor3 &tucker_core,
                     const LorentzianBasisSpec &tucker_spec,
                     const Tensor3 &canon_core,
                     const LorentzianBasisSpec &canon_spec, int n) {
    if (!same_basis(tucker_spec, canon_spec) ||
        tucker_core.dims != canon_core.dims ||
        tucker_core.dims != tucker_spec.dims()) {
        throw ArgumentError("Tucker and canonical states use different "
                            "Lorentzian bases");
    }
    const Eigen::MatrixXd s = overlap_3d(tucker_spec, n);
    TuckerCanonOverlap out;
    out.overlap = tucker_core.data.dot(s * canon_core.data);
    out.canon_norm_squared = canon_core.data.dot(s * canon_core.data);
    out.tucker_norm_squared = tucker_core.data.dot(s * tucker_core.data);
    const double denom = out.canon_norm_squared * out.tucker_norm_squared;
    out.deviation =
        denom > 0.0 ? 1.0 - out.overlap * out.overlap / denom : 1.0;
    out.deviation = std::clamp(out.deviation, 0.0, 1.0);
    return out;
}

inline TuckerCanonOverlap tucker_canon_overlap(const TuckerState &tucker,
                                               const CanonicalState &canon,
                                               int n) {
    return tucker_canon_overlap(tucker.core, tucker.spec, canon.core(),
                                canon.spec, n);
}

namespace detail {

inline CanonicalState finish_canonical(const TuckerState &tucker, int n,
                                       CpFactors cp) {
    const auto s1d = overlaps_1d(tucker.spec, n);
    auto nf = normalize_factors(cp.factors, s1d);
    CanonicalState out;
    out.rank = static_cast<std::size_t>(nf.lambda.size());
    out.spec = tucker.spec;
    out.raw_factors = std::move(cp.factors);
    out.u = std::move(nf.u);
    out.lambda = std::move(nf.lambda);
    out.cp_relative_error = cp.relative_error;
    out.cp_sweeps = cp.sweeps;
    if (nf.dropped > 0) {
        out.flags.emplace_back("dropped_components");
    }
    if (cp.ridge_used) {
        out.flags.emplace_back("ridge_regularized");
    }
    if (!cp.converged) {
        out.flags.emplace_back("unconverged");
    }
    const auto ov = tucker_canon_overlap(tucker, out, n);
    out.deviation = ov.deviation;
    out.norm_squared = ov.canon_norm_squared;
    return out;
}

} // namespace detail

/// Rank-R canonical form of a Tucker state.
inline CanonicalState decompose(const TuckerState &tucker, std::size_t rank,
                                int n, const CpOptions &options = {}) {
    return detail::finish_canonical(tucker, n,
                                    cp_decompose(tucker.core, rank, options));
}

/// Canonical forms for each requested rank (ascending). Each rank after the
/// first also starts once from the previous rank's factors plus a rank-1 fit
/// of their residual, so reconstruction error cannot grow with rank.
inline std::vector<CanonicalState>
rank_sweep(const TuckerState &tucker, std::vector<std::size_t> ranks, int n,
           const CpOptions &options = {}) {
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    std::vector<CanonicalState> out;
    std::optional<CpFactors> previous;
    for (std::size_t rank : ranks) {
        CpOptions opt = options;
        opt.warm_start.reset();
        if (previous && previous->rank() < rank) {
            CpFactors warm = *previous;
            Tensor3 residual = tucker.core;
            residual.data -= cp_reconstruct(previous->factors).data;
            std::optional<CpFactors> extra;
            if (residual.data.norm() > 0.0) {
                CpOptions one = options;
                one.warm_start.reset();
                extra = cp_decompose(residual, 1, one);
            }
            const auto old_rank = static_cast<Eigen::Index>(previous->rank());
            for (int nu = 0; nu < 3; ++nu) {
                Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(
                    static_cast<Eigen::Index>(rank), warm.factors[nu].cols());
                grown.topRows(old_rank) = warm.factors[nu];
                if (extra) {
                    grown.row(old_rank) = extra->factors[nu].row(0);
                }
                warm.factors[nu] = std::move(grown);
            }
            opt.warm_start = std::move(warm);
        }
        auto cp = cp_decompose(tucker.core, rank, opt);
        previous = cp;
        out.push_back(detail::finish_canonical(tucker, n, std::move(cp)));
    }
    return out;
}

} // namespace mflo
