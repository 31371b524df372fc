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

#include "mflo/cpd.hpp"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

#include "oracles.hpp"

namespace mflo {
namespace {

using testing::random_tensor;
using testing::tucker_from;

// Cayley hyperdeterminant; positive means real rank 2 is attained.
double hyperdeterminant(const Tensor3 &t) {
    const auto a = [&](int i, int j, int k) {
        return t(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                 static_cast<std::size_t>(k));
    };
    const double p = a(0, 0, 0) * a(1, 1, 1);
    const double q = a(0, 0, 1) * a(1, 1, 0);
    const double r = a(0, 1, 0) * a(1, 0, 1);
    const double s = a(1, 0, 0) * a(0, 1, 1);
    return p * p + q * q + r * r + s * s -
           2 * (p * q + p * r + p * s + q * r + q * s + r * s) +
           4 * (a(0, 0, 0) * a(0, 1, 1) * a(1, 0, 1) * a(1, 1, 0) +
                a(0, 0, 1) * a(0, 1, 0) * a(1, 0, 0) * a(1, 1, 1));
}

// Best rank-1 relative error of a 2x2x2 tensor by a grid over the x and y
// unit vectors; the z vector is optimal in closed form.
double grid_rank1_error(const Tensor3 &t, int steps) {
    double best = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double th = std::numbers::pi * i / steps;
        const double a0 = std::cos(th);
        const double a1 = std::sin(th);
        for (int j = 0; j < steps; ++j) {
            const double ph = std::numbers::pi * j / steps;
            const double b0 = std::cos(ph);
            const double b1 = std::sin(ph);
            double sigma2 = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double c = a0 * b0 * t(0, 0, k) + a0 * b1 * t(0, 1, k) +
                                 a1 * b0 * t(1, 0, k) + a1 * b1 * t(1, 1, k);
                sigma2 += c * c;
            }
            best = std::max(best, sigma2);
        }
    }
    const double n2 = t.data.squaredNorm();
    return std::sqrt(std::max(n2 - best, 0.0) / n2);
}

LorentzianBasisSpec cube_spec() {
    return testing::uniform_spec({0.5, 0.9, 0.4}, {6, 8, 10});
}

TEST(CpReconstruct, SumOfOuterProducts) {
    std::array<Eigen::MatrixXd, 3> f{Eigen::MatrixXd(2, 2),
                                     Eigen::MatrixXd(2, 1),
                                     Eigen::MatrixXd(2, 3)};
    f[0] << 1, 2, 3, 4;
    f[1] << 5, 6;
    f[2] << 1, 0, -1, 2, 1, 0;
    const auto t = cp_reconstruct(f);
    EXPECT_EQ(t.dims, (std::array<std::size_t, 3>{2, 1, 3}));
    EXPECT_DOUBLE_EQ(t(1, 0, 2), 2 * 5 * -1 + 4 * 6 * 0);
    EXPECT_DOUBLE_EQ(t(0, 0, 0), 1 * 5 * 1 + 3 * 6 * 2);
}

TEST(CpDecompose, ExactRankOne) {
    Eigen::VectorXd x(3), y(2), z(4);
    x << 1.0, -2.0, 0.5;
    y << 0.3, 0.7;
    z << 1.0, 2.0, 3.0, -1.0;
    const auto cp = cp_decompose(outer(x, y, z), 1);
    EXPECT_LT(cp.relative_error, 1e-10);
    EXPECT_EQ(cp.rank(), 1u);
}

TEST(CpDecompose, FullRankIsExact) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto d = random_tensor({3, 3, 3}, seed);
        const auto cp = cp_decompose(d, 27);
        EXPECT_LT(cp.relative_error, 1e-10) << seed;
        const auto rec = cp_reconstruct(cp.factors);
        EXPECT_LT((rec.data - d.data).norm() / d.data.norm(), 1e-10);
    }
}

TEST(CpDecompose, RankOneMatchesGridOracle) {
    const int steps = 2000;
    const double resolution = std::numbers::pi / steps;
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        const auto d = random_tensor({2, 2, 2}, seed);
        const double als = cp_decompose(d, 1).relative_error;
        const double grid = grid_rank1_error(d, steps);
        // The grid can only overestimate the optimum.
        EXPECT_LE(als, grid + 1e-12);
        EXPECT_NEAR(als, grid, 4 * resolution) << seed;
    }
}

TEST(CpDecompose, RankTwoWhereAttainable) {
    int tested = 0;
    for (std::uint64_t seed = 20; tested < 4; ++seed) {
        const auto d = random_tensor({2, 2, 2}, seed);
        if (hyperdeterminant(d) <= 0.05) {
            continue;
        }
        ++tested;
        // Near-degenerate pairs converge slowly; allow a longer budget.
        CpOptions opt;
        opt.max_sweeps = 5000;
        EXPECT_LT(cp_decompose(d, 2, opt).relative_error, 1e-8) << seed;
    }
}

TEST(CpDecompose, SweepsDoNotIncreaseError) {
    const auto d = random_tensor({3, 4, 2}, 5);
    for (std::size_t rank : {2u, 3u, 5u}) {
        CpOptions opt;
        opt.restarts = 3;
        const auto cp = cp_decompose(d, rank, opt);
        const auto &h = cp.error_history;
        ASSERT_FALSE(h.empty());
        for (std::size_t i = 1; i < h.size(); ++i) {
            EXPECT_LE(h[i], h[i - 1] + 1e-12) << rank << " " << i;
        }
        EXPECT_EQ(h.back(), cp.relative_error);
    }
}

TEST(CpDecompose, SeededAndThreadIndependent) {
    const auto d = random_tensor({3, 3, 2}, 7);
    CpOptions a;
    a.seed = 9;
    CpOptions b = a;
    b.threads = 4;
    const auto x = cp_decompose(d, 3, a);
    const auto y = cp_decompose(d, 3, b);
    for (int nu = 0; nu < 3; ++nu) {
        EXPECT_EQ(x.factors[nu], y.factors[nu]);
    }
}

TEST(CpDecompose, RejectsBadArguments) {
    const auto d = random_tensor({2, 2, 2}, 1);
    EXPECT_THROW(cp_decompose(d, 0), ArgumentError);
    EXPECT_THROW(cp_decompose(d, 9), ArgumentError);
    CpOptions opt;
    opt.restarts = 0;
    EXPECT_THROW(cp_decompose(d, 1, opt), ArgumentError);
    auto bad = d;
    bad.data[0] = std::nan("");
    EXPECT_THROW(cp_decompose(bad, 1), ArgumentError);
}

TEST(NormalizeFactors, IdentityMetricUsesEuclideanNorms) {
    std::array<Eigen::MatrixXd, 3> v{Eigen::MatrixXd(1, 2),
                                     Eigen::MatrixXd(1, 2),
                                     Eigen::MatrixXd(1, 1)};
    v[0] << 3.0, 4.0;
    v[1] << 0.0, -2.0;
    v[2] << 0.5;
    const std::array<Eigen::MatrixXd, 3> id{Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::MatrixXd::Identity(1, 1)};
    const auto nf = normalize_factors(v, id);
    EXPECT_NEAR(nf.lambda[0], 5.0 * 2.0 * 0.5, 1e-15);
    EXPECT_NEAR(nf.u[1](0, 1), 1.0, 1e-15);
    EXPECT_NEAR(nf.u[2](0, 0), -1.0, 1e-15);
}

TEST(NormalizeFactors, PreservesTensorAndOrdersCoefficients) {
    const auto spec = cube_spec();
    const auto s1d = overlaps_1d(spec, 4);
    const auto d = random_tensor({3, 3, 3}, 11);
    const auto cp = cp_decompose(d, 4);
    const auto nf = normalize_factors(cp.factors, s1d);
    const auto before = cp_reconstruct(cp.factors);
    const auto after = canonical_core(nf.lambda, nf.u);
    EXPECT_LT((before.data - after.data).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index r = 0; r < nf.lambda.size(); ++r) {
        EXPECT_GT(nf.lambda[r], 0.0);
        if (r > 0) {
            EXPECT_LE(nf.lambda[r], nf.lambda[r - 1]);
        }
        for (int nu = 0; nu < 3; ++nu) {
            const Eigen::RowVectorXd row = nf.u[nu].row(r);
            EXPECT_NEAR(row * s1d[nu] * row.transpose(), 1.0, 1e-10);
        }
        for (int nu = 0; nu < 2; ++nu) {
            Eigen::Index at = 0;
            nf.u[nu].row(r).cwiseAbs().maxCoeff(&at);
            EXPECT_GT(nf.u[nu](r, at), 0.0);
        }
    }
}

TEST(NormalizeFactors, DropsVanishingComponents) {
    const std::array<Eigen::MatrixXd, 3> id{Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::MatrixXd::Identity(2, 2)};
    std::array<Eigen::MatrixXd, 3> v{Eigen::MatrixXd::Ones(2, 2),
                                     Eigen::MatrixXd::Ones(2, 2),
                                     Eigen::MatrixXd::Ones(2, 2)};
    v[1].row(1).setZero();
    const auto nf = normalize_factors(v, id);
    EXPECT_EQ(nf.dropped, 1u);
    EXPECT_EQ(nf.lambda.size(), 1);
    v[1].row(0).setZero();
    EXPECT_THROW(normalize_factors(v, id), DegenerateInputError);
}

TEST(Canonical, FullRankHasNoDeviation) {
    const auto tucker = tucker_from(cube_spec(), random_tensor({3, 3, 3}, 4), 4);
    const auto canon = decompose(tucker, 27, 4);
    EXPECT_LT(canon.deviation, 1e-10);
    EXPECT_NEAR(canon.norm_squared, 1.0, 1e-9);
}

TEST(Canonical, CoefficientOverlapMatchesStatevectors) {
    const auto spec = cube_spec();
    const int n = 4;
    const auto tucker = tucker_from(spec, random_tensor({3, 3, 3}, 8), n);
    for (std::size_t rank : {1u, 2u, 5u}) {
        const auto canon = decompose(tucker, rank, n);
        const auto ov = tucker_canon_overlap(tucker, canon, n);
        const auto t_vec = tucker_statevector(spec, n, tucker.core);
        const auto c_vec = tucker_statevector(spec, n, canon.core());
        EXPECT_NEAR(ov.overlap, dot(t_vec, c_vec), 1e-9);
        EXPECT_NEAR(ov.canon_norm_squared, c_vec.norm_squared(), 1e-9);
        EXPECT_NEAR(ov.tucker_norm_squared, 1.0, 1e-10);
        EXPECT_EQ(ov.deviation, canon.deviation);
        EXPECT_GE(canon.deviation, 0.0);
        EXPECT_LE(canon.deviation, 1.0);
    }
}

TEST(Canonical, RankSweepIsMonotone) {
    const auto spec = cube_spec();
    const auto tucker = tucker_from(spec, random_tensor({3, 3, 3}, 15), 4);
    const auto sweep = rank_sweep(tucker, {4, 1, 2, 3, 5, 6}, 4);
    ASSERT_EQ(sweep.size(), 6u);
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        EXPECT_EQ(sweep[i].rank, i + 1);
        EXPECT_LE(sweep[i].cp_relative_error,
                  sweep[i - 1].cp_relative_error + 1e-12);
    }
}

TEST(Canonical, RejectsMismatchedBasis) {
    const auto tucker = tucker_from(cube_spec(), random_tensor({3, 3, 3}, 4), 4);
    auto canon = decompose(tucker, 2, 4);
    canon.spec.directions[0].widths[0] = 0.51;
    EXPECT_THROW(tucker_canon_overlap(tucker, canon, 4), ArgumentError);
}

} // namespace
} // namespace mflo
