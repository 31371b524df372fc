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

#include "mflo/fitting.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"

#include "oracles.hpp"

namespace mflo {
namespace {

using testing::cube;
using testing::two_center_s;
using testing::two_center_spec;

FitProblem two_center_problem(double alpha = 0.0) {
    return FitProblem::create(two_center_s(), cube(8.0, 4, -4.0),
                              two_center_spec(), alpha, "bonding");
}

FitProblem single_gaussian_problem(double width) {
    MolecularOrbital mo;
    mo.aos = {testing::normalized_s(16.0, {0.0, 0.0, 0.0})};
    mo.coefficients = {1.0};
    return FitProblem::create(mo, cube(8.0, 5, -4.0),
                              testing::uniform_spec({width}, {16}), 0.0);
}

Tensor3 unit_tensor(std::array<std::size_t, 3> dims, std::size_t l) {
    Tensor3 e(dims);
    e.data[static_cast<Eigen::Index>(l)] = 1.0;
    return e;
}

TEST(MIntegral, MatchesGridSum) {
    const auto cell = cube(8.0, 4, -4.0);
    const auto ao = testing::normalized_s(1.3, {0.2, 0.0, 0.0});
    const auto lf = testing::naive_lf(4, 0.6, 9);
    double acc = 0.0;
    for (std::size_t k = 0; k < lf.size(); ++k) {
        acc += gaussian_factor(cell.point(0, k) - 0.2, 1.3, 0) * lf[k];
    }
    EXPECT_NEAR(m_integral(ao, 0, 0, 0.6, 9, cell), 8.0 / 4.0 * acc, 1e-14);
}

TEST(TTensor, MatchesStatevectorOverlaps) {
    const auto problem = two_center_problem();
    const auto t = t_tensor(problem, 2);
    const auto ideal = build_ideal_state(problem.mo, problem.cell).state;
    const auto dims = problem.spec.dims();
    for (std::size_t l = 0; l < problem.spec.num_products(); ++l) {
        const auto product = testing::naive_product_state(
            problem.spec, 4, unit_tensor(dims, l));
        EXPECT_NEAR(t.values.data[static_cast<Eigen::Index>(l)],
                    dot(ideal, product), 1e-12);
    }
    EXPECT_EQ(t.mo_name, "bonding");
    EXPECT_EQ(t.spec_id, spec_hash(problem.spec));
}

TEST(Overlap3d, MatchesProductStateGram) {
    const auto spec = two_center_spec();
    const auto s = overlap_3d(spec, 4);
    const auto dims = spec.dims();
    const auto n_prod = spec.num_products();
    for (std::size_t l = 0; l < n_prod; ++l) {
        const auto u = testing::naive_product_state(spec, 4, unit_tensor(dims, l));
        for (std::size_t m = 0; m < n_prod; ++m) {
            const auto v =
                testing::naive_product_state(spec, 4, unit_tensor(dims, m));
            EXPECT_NEAR(s(static_cast<Eigen::Index>(l),
                          static_cast<Eigen::Index>(m)),
                        dot(u, v), 1e-13);
        }
    }
}

TEST(Penalty, OffDiagonalSum) {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.3, 0.3, 1.0;
    EXPECT_NEAR(penalty(s, 0.5), 0.5 / 2.0 * 2.0 * 0.09, 1e-15);
    EXPECT_EQ(penalty(s, 0.0), 0.0);
    EXPECT_THROW(penalty(s, -1.0), ArgumentError);
}

TEST(SolveCore, MatchesDenseGeneralizedEigensolver) {
    const auto problem = two_center_problem(0.1);
    const auto ev = evaluate_fit(problem, problem.spec.flat_widths(), false);
    const Eigen::MatrixXd g = ev.t * ev.t.transpose();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
        g, ev.s, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    ASSERT_EQ(ges.info(), Eigen::Success);
    const Eigen::Index last = ev.t.size() - 1;
    const double kappa = ges.eigenvalues()[last];
    Eigen::VectorXd d = ges.eigenvectors().col(last);
    d /= std::sqrt(d.dot(ev.s * d));
    if (ev.t.dot(d) < 0.0) {
        d = -d;
    }
    EXPECT_NEAR(ev.core.kappa_max, kappa, 1e-10 * kappa);
    EXPECT_LT((ev.core.d - d).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(ev.core.d.dot(ev.s * ev.core.d), 1.0, 1e-10);
    EXPECT_NEAR(ev.squared_overlap, ev.core.kappa_max, 1e-12);
    EXPECT_NEAR(ev.core.penalty, penalty(ev.s, 0.1), 1e-15);
    EXPECT_NEAR(ev.core.fidelity, ev.core.kappa_max - ev.core.penalty, 1e-15);
    EXPECT_EQ(ev.core.discarded, 0u);
    EXPECT_LE(ev.core.kappa_max, 1.0 + 1e-12);
}

TEST(SolveCore, SquaredOverlapMatchesStatevector) {
    const auto problem = two_center_problem();
    const auto ev = evaluate_fit(problem, problem.spec.flat_widths(), false);
    const Tensor3 core(problem.spec.dims(), ev.core.d);
    const auto fitted = tucker_statevector(problem.spec, 4, core);
    const auto ideal = build_ideal_state(problem.mo, problem.cell).state;
    EXPECT_NEAR(fitted.norm_squared(), 1.0, 1e-10);
    const double ov = dot(ideal, fitted);
    EXPECT_NEAR(ov * ov, ev.squared_overlap, 1e-10);
}

TEST(SolveCore, ZeroTargetIsDegenerate) {
    const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
    const auto sol = solve_core(Eigen::VectorXd::Zero(3), s, 0.0);
    EXPECT_TRUE(sol.degenerate);
    EXPECT_EQ(sol.kappa_max, 0.0);
    EXPECT_NEAR(sol.d.dot(s * sol.d), 1.0, 1e-14);
}

TEST(SolveCore, NearSingularOverlap) {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 1.0 - 1e-13, 1.0 - 1e-13, 1.0;
    Eigen::VectorXd t(2);
    t << 0.5, 0.5;
    const auto sol = solve_core(t, s, 0.0);
    EXPECT_EQ(sol.discarded, 1u);
    EXPECT_NEAR(sol.kappa_max, 0.25, 1e-10);
    EXPECT_THROW(solve_core(t, s, 0.0, {1e-10, false}), ConditioningError);
    try {
        solve_core(t, s, 0.0, {1e-10, false});
    } catch (const ConditioningError &e) {
        EXPECT_EQ(e.discarded_dimension(), 1u);
    }
}

TEST(SolveCore, RejectsBadInput) {
    EXPECT_THROW(solve_core(Eigen::VectorXd::Zero(2),
                            Eigen::MatrixXd::Identity(3, 3), 0.0),
                 ArgumentError);
    Eigen::VectorXd t = Eigen::VectorXd::Ones(2);
    t[1] = std::nan("");
    EXPECT_THROW(solve_core(t, Eigen::MatrixXd::Identity(2, 2), 0.0),
                 ArgumentError);
}

struct GradientCase {
    double alpha;
    std::vector<double> widths;
};

TEST(FidelityGradient, MatchesCentralDifferences) {
    const std::vector<GradientCase> cases{
        {0.0, {0.5, 0.8, 0.3, 0.6, 1.2, 0.7}},
        {0.1, {0.5, 0.8, 0.3, 0.6, 1.2, 0.7}},
        {0.1, {1.5, 0.2, 2.5, 0.9, 0.4, 3.0}},
        {0.0, {0.05, 4.0, 0.7, 0.3, 2.0, 0.15}},
    };
    const double h = 1e-6;
    for (const auto &c : cases) {
        const auto problem = two_center_problem(c.alpha);
        const auto ev = evaluate_fit(problem, c.widths, true);
        for (std::size_t i = 0; i < c.widths.size(); ++i) {
            auto up = c.widths;
            auto dn = c.widths;
            up[i] += h;
            dn[i] -= h;
            const double fd =
                (evaluate_fit(problem, up, false).core.fidelity -
                 evaluate_fit(problem, dn, false).core.fidelity) /
                (2 * h);
            const double an = ev.gradient[static_cast<Eigen::Index>(i)];
            EXPECT_LE(std::abs(an - fd),
                      1e-5 * std::max(std::abs(fd), 1e-3))
                << "alpha=" << c.alpha << " i=" << i;
        }
    }
}

TEST(FidelityGradient, StandaloneMatchesEvaluation) {
    const auto problem = two_center_problem(0.1);
    const auto ev = evaluate_fit(problem, problem.spec.flat_widths(), true);
    const auto g = fidelity_gradient(problem, ev.core.d, ev.core.kappa_max);
    EXPECT_LT((g - ev.gradient).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OptimizeWidths, AscendsAndConverges) {
    const auto problem = two_center_problem(0.1);
    const auto initial =
        evaluate_fit(problem, problem.spec.flat_widths(), false);
    const auto result = optimize_widths(problem);
    const auto &hist = result.diagnostics.fidelity_history;
    ASSERT_FALSE(hist.empty());
    EXPECT_NEAR(hist.front(), initial.core.fidelity, 1e-14);
    for (std::size_t i = 1; i < hist.size(); ++i) {
        EXPECT_GE(hist[i], hist[i - 1]);
    }
    EXPECT_TRUE(result.diagnostics.converged)
        << result.diagnostics.stop_reason;
    EXPECT_GT(result.fidelity, initial.core.fidelity);
    EXPECT_LE(result.squared_overlap, 1.0 + 1e-12);
    EXPECT_LT(result.diagnostics.max_kappa_residual, 1e-10);
    EXPECT_LT(result.diagnostics.max_normalization_residual, 1e-10);
    EXPECT_TRUE(std::find(result.flags.begin(), result.flags.end(),
                          "unconverged") == result.flags.end());
    for (double w : result.spec.flat_widths()) {
        EXPECT_GE(w, 1e-3);
        EXPECT_LE(w, 50.0);
    }
    // The reported state reproduces its own figures.
    const auto again =
        evaluate_fit(problem, result.spec.flat_widths(), false);
    EXPECT_NEAR(again.core.fidelity, result.fidelity, 1e-14);
}

TEST(OptimizeWidths, UnpenalizedFitStaysConsistent) {
    // Without a penalty same-centre LFs may drift together and S becomes
    // ill-conditioned; the iterates must still ascend and stay normalized
    // relative to the size of d.
    const auto problem = two_center_problem(0.0);
    const auto result = optimize_widths(problem);
    const auto &hist = result.diagnostics.fidelity_history;
    for (std::size_t i = 1; i < hist.size(); ++i) {
        EXPECT_GE(hist[i], hist[i - 1]);
    }
    const auto ev = evaluate_fit(problem, result.spec.flat_widths(), false);
    const double scale = ev.core.d.squaredNorm() * ev.s.norm();
    EXPECT_LT(std::abs(ev.core.d.dot(ev.s * ev.core.d) - 1.0),
              1e-12 * scale);
    EXPECT_LE(result.squared_overlap, 1.0 + 1e-9);
}

TEST(OptimizeWidths, SingleGaussianMatchesWidthScan) {
    double best = 0.0;
    for (int i = 1; i <= 400; ++i) {
        const double a = 0.01 * i;
        const auto problem = single_gaussian_problem(a);
        best = std::max(best,
                        evaluate_fit(problem, std::vector<double>(3, a), false)
                            .squared_overlap);
    }
    const auto result = optimize_widths(single_gaussian_problem(1.0));
    EXPECT_GT(result.squared_overlap, 0.95);
    EXPECT_GE(result.squared_overlap, best - 1e-8);
    const auto w = result.spec.flat_widths();
    EXPECT_NEAR(w[0], w[1], 1e-4);
    EXPECT_NEAR(w[1], w[2], 1e-4);
}

TEST(OptimizeWidths, RestartsAreSeededAndKeepTheBest) {
    auto opts = OptimizeOptions{};
    opts.restarts = 3;
    opts.seed = 42;
    const auto problem = two_center_problem(0.1);
    const auto a = optimize_widths(problem, opts);
    const auto b = optimize_widths(problem, opts);
    EXPECT_EQ(a.spec.flat_widths(), b.spec.flat_widths());
    EXPECT_EQ(a.fidelity, b.fidelity);
    ASSERT_EQ(a.diagnostics.restart_fidelities.size(), 4u);
    EXPECT_EQ(a.fidelity, *std::max_element(
                              a.diagnostics.restart_fidelities.begin(),
                              a.diagnostics.restart_fidelities.end()));
}

TEST(OptimizeWidths, LargerPenaltyReducesOverlapSpread) {
    const auto low = optimize_widths(two_center_problem(0.05));
    const auto high = optimize_widths(two_center_problem(0.1));
    // P / alpha is the mean squared off-diagonal overlap.
    EXPECT_LE(high.penalty / 0.1, low.penalty / 0.05 + 1e-6);
}

TEST(OptimizeWidths, FlagsBoundaryMass) {
    MolecularOrbital mo;
    mo.aos = {testing::normalized_s(1.0, {-3.9, 0.0, 0.0})};
    mo.coefficients = {1.0};
    LorentzianBasisSpec spec = testing::uniform_spec({0.5}, {8});
    spec.directions[0].centers = {0};
    const auto problem =
        FitProblem::create(mo, cube(8.0, 4, -4.0), spec, 0.0);
    OptimizeOptions opts;
    opts.max_iterations = 5;
    const auto result = optimize_widths(problem, opts);
    EXPECT_TRUE(std::find(result.flags.begin(), result.flags.end(),
                          "boundary_mass") != result.flags.end());
    EXPECT_GT(result.max_boundary_mass, 1e-3);
}

TEST(OptimizeWidths, RejectsBadOptions) {
    const auto problem = two_center_problem();
    OptimizeOptions opts;
    opts.min_width = 0.0;
    EXPECT_THROW(optimize_widths(problem, opts), ArgumentError);
    opts = {};
    opts.restarts = -1;
    EXPECT_THROW(optimize_widths(problem, opts), ArgumentError);
}

TEST(TuckerStatevector, MatchesNaiveConstruction) {
    const auto spec = two_center_spec();
    Tensor3 c(spec.dims());
    for (Eigen::Index i = 0; i < c.data.size(); ++i) {
        c.data[i] = std::sin(1.0 + static_cast<double>(i));
    }
    const auto fast = tucker_statevector(spec, 4, c, {8, 3});
    const auto ref = testing::naive_product_state(spec, 4, c);
    for (std::size_t i = 0; i < ref.amplitudes.size(); ++i) {
        EXPECT_NEAR(fast.amplitudes[i], ref.amplitudes[i], 1e-13);
    }
    EXPECT_THROW(tucker_statevector(spec, 4, c, {3, 1}), ResourceError);
    EXPECT_THROW(tucker_statevector(spec, 4, Tensor3({1, 1, 1})),
                 ArgumentError);
}

} // namespace
} // namespace mflo
