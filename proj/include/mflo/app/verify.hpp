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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "mflo/mflo.hpp"
#include "mflo/app/job.hpp"
#include "mflo/app/pipeline.hpp"
#include "mflo/app/report.hpp"

namespace mflo::app {

struct GateTableRow {
    std::array<std::size_t, 3> dims;
    int data_qubits = 7;
    std::size_t rank = 1;
    std::int64_t tucker = 0;
    std::int64_t slater_phase = 0;
    std::int64_t canonical = 0;
};

/// Published gate counts the built-in checks compare against.
struct Expectations {
    std::vector<GateTableRow> water{
        {{3, 3, 3}, 7, 3, 305, 243, 281},
        {{3, 4, 2}, 7, 2, 231, 201, 215},
        {{3, 3, 2}, 7, 3, 231, 201, 231},
        {{4, 2, 2}, 7, 2, 173, 159, 169},
    };
    std::array<std::size_t, 3> h2_dims{2, 1, 1};
    int h2_data_qubits = 6;
    std::int64_t h2_tucker = 63;
    /// Printed H2 core tensors and the probabilities quoted for them.
    std::array<double, 2> homo_core{0.523, 0.581};
    std::array<double, 2> lumo_core{1.56, -1.55};
    double homo_probability = 0.82;
    double lumo_probability = 0.10;
    double probability_tolerance = 0.005;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyResult {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const CheckResult &c) { return c.passed; });
    }
};

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace detail

inline CheckResult check_gate_table(const Expectations &e) {
    CheckResult c{"gate counts (water table, H2)", true, ""};
    int mismatches = 0;
    auto expect = [&](std::int64_t got, std::int64_t want,
                      const std::string &what) {
        if (got != want) {
            ++mismatches;
            if (c.detail.empty()) {
                c.detail = what + ": got " + std::to_string(got) +
                           ", expected " + std::to_string(want);
            }
        }
    };
    for (const auto &row : e.water) {
        const std::string tag = std::to_string(row.dims[0]) + "x" +
                                std::to_string(row.dims[1]) + "x" +
                                std::to_string(row.dims[2]);
        const auto t = cnot_count_tucker(row.dims, row.data_qubits);
        const auto k = cnot_count_canonical(row.dims, row.data_qubits, row.rank);
        expect(t.total_cnots, row.tucker, tag + " tucker");
        expect(tucker_total_cnots(row.dims, row.data_qubits), row.tucker,
               tag + " tucker closed form");
        expect(t.slater_phase_cnots, row.slater_phase, tag + " slater/phase");
        expect(k.total_cnots, row.canonical, tag + " canonical");
        expect(canonical_total_cnots(row.dims, row.data_qubits, row.rank),
               row.canonical, tag + " canonical closed form");
    }
    expect(cnot_count_tucker(e.h2_dims, e.h2_data_qubits).total_cnots,
           e.h2_tucker, "H2 tucker");
    c.passed = mismatches == 0;
    if (c.passed) {
        c.detail = std::to_string(e.water.size() * 5 + 1) + " integers exact";
    }
    return c;
}

inline CheckResult check_h2_probabilities(const Expectations &e) {
    CheckResult c{"H2 success probabilities", true, ""};
    const double homo = success_prob_tucker_normalized(e.homo_core);
    const double lumo = success_prob_tucker_normalized(e.lumo_core);
    c.passed = std::abs(homo - e.homo_probability) <= e.probability_tolerance &&
               std::abs(lumo - e.lumo_probability) <= e.probability_tolerance;
    c.detail = "HOMO " + detail::fixed(homo, 4) + ", LUMO " +
               detail::fixed(lumo, 4);
    return c;
}

/// LCU oracle against the closed-form two-centre probability.
inline CheckResult check_two_center_curve() {
    CheckResult c{"two-centre probability curve", true, ""};
    constexpr int n = 5;
    double worst = 0.0;
    for (double a : {0.5, 2.0}) {
        const auto la = lf_state(n, a, 10);
        const auto lb = lf_state(n, a, 14);
        const Eigen::Map<const Eigen::VectorXd> va(
            la.data(), static_cast<Eigen::Index>(la.size()));
        const Eigen::Map<const Eigen::VectorXd> vb(
            lb.data(), static_cast<Eigen::Index>(lb.size()));
        const double overlap = va.dot(vb);
        for (double theta :
             linspace(-std::numbers::pi / 2, std::numbers::pi / 2, 21)) {
            const std::vector<LcuBranch> br{{std::cos(theta), va},
                                            {std::sin(theta), vb}};
            worst = std::max(worst,
                             std::abs(lcu_postselect_oracle(br) -
                                      two_center_probability(theta, overlap)));
        }
    }
    c.passed = worst <= 1e-12;
    c.detail = "max error " + detail::sci(worst);
    return c;
}

inline std::vector<CheckResult> builtin_checks(const Expectations &e = {}) {
    return {check_gate_table(e), check_h2_probabilities(e),
            check_two_center_curve()};
}

/// Analytic width gradient against central differences at the job's
/// initial widths.
inline CheckResult check_gradient(const Job &job, const std::string &label) {
    CheckResult c{label + ": width gradient", true, ""};
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < job.mos.size(); ++i) {
        const auto problem =
            FitProblem::create(job.molecular_orbital(i), job.cell, job.spec,
                               job.alpha_pen, job.mos[i].name);
        const auto w = problem.spec.flat_widths();
        const auto ev = evaluate_fit(problem, w, true);
        for (std::size_t k = 0; k < w.size(); ++k) {
            auto up = w;
            auto dn = w;
            up[k] += h;
            dn[k] -= h;
            const double fd = (evaluate_fit(problem, up, false).core.fidelity -
                               evaluate_fit(problem, dn, false).core.fidelity) /
                              (2 * h);
            const double an = ev.gradient[static_cast<Eigen::Index>(k)];
            worst = std::max(worst, std::abs(an - fd) /
                                        std::max(std::abs(fd), 1e-3));
        }
    }
    c.passed = worst <= 1e-5;
    c.detail = "max relative error " + detail::sci(worst);
    return c;
}

/// T.d and the squared overlap against full statevectors.
inline CheckResult check_statevector_overlap(const Job &job,
                                             const FitReport &report,
                                             const RunOptions &opt,
                                             const std::string &label) {
    CheckResult c{label + ": statevector overlap", true, ""};
    if (job.cell.qubits_per_axis > opt.max_qubits) {
        c.detail = "skipped: grid exceeds --max-qubits";
        return c;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < job.mos.size(); ++i) {
        const MoReport &m = report.mos[i];
        const auto problem =
            FitProblem::create(job.molecular_orbital(i), job.cell, m.spec,
                               job.alpha_pen, m.name);
        const auto t = t_tensor(problem, opt.threads);
        const Eigen::Map<const Eigen::VectorXd> d(
            m.core.data(), static_cast<Eigen::Index>(m.core.size()));
        const double coeff = t.values.data.dot(d);
        const auto ideal =
            state_from_report(report, m.name, StateTag::Ideal, {}, opt);
        const auto fitted =
            state_from_report(report, m.name, StateTag::Tucker, {}, opt);
        const double sv = dot(ideal, fitted);
        worst = std::max({worst, std::abs(coeff - sv),
                          std::abs(sv * sv - m.squared_overlap)});
    }
    c.passed = worst <= 1e-8;
    c.detail = "max error " + detail::sci(worst);
    return c;
}

inline CheckResult check_identities(const FitReport &report,
                                    const std::string &label) {
    CheckResult c{label + ": report identities", true, ""};
    const Job job = parse_job(report.job);
    double norm = 0.0;
    double overlap = 0.0;
    double kappa = 0.0;
    double prob = 0.0;
    for (const auto &m : report.mos) {
        const auto chk = recheck_identities(m, report.qubits_per_axis, job);
        c.passed = c.passed && chk.passed;
        norm = std::max(norm, chk.normalization_residual);
        overlap = std::max(overlap, chk.overlap_residual);
        kappa = std::max(kappa, chk.kappa_residual);
        prob = std::max(prob, chk.probability_oracle_residual);
        for (const auto &r : m.ranks) {
            prob = std::max(prob, r.probability_oracle_residual);
        }
    }
    c.detail = "norm " + detail::sci(norm) + ", overlap " +
               detail::sci(overlap) + ", kappa " + detail::sci(kappa) +
               ", probability " + detail::sci(prob);
    return c;
}

inline CheckResult check_monotone(const FitReport &report,
                                  const std::string &label) {
    CheckResult c{label + ": fidelity non-decreasing", true, ""};
    std::size_t steps = 0;
    for (const auto &m : report.mos) {
        const auto &h = m.optimizer.fidelity_history;
        for (std::size_t i = 1; i < h.size(); ++i) {
            ++steps;
            if (h[i] < h[i - 1]) {
                c.passed = false;
                c.detail = m.name + " drops at step " + std::to_string(i);
            }
        }
    }
    if (c.passed) {
        c.detail = std::to_string(steps) + " accepted steps";
    }
    return c;
}

inline std::vector<CheckResult> job_checks(const Job &job,
                                           const RunOptions &opt) {
    const std::string &label = job.name;
    std::vector<CheckResult> out;
    out.push_back(check_gradient(job, label));
    FitReport first = fit_job(job, opt);
    FitReport second = fit_job(job, opt);
    out.push_back(check_statevector_overlap(job, first, opt, label));
    out.push_back(check_identities(first, label));
    out.push_back(check_monotone(first, label));
    CheckResult det{label + ": deterministic report", true, ""};
    det.passed = serialize_report(first) == serialize_report(second);
    det.detail = det.passed ? "two runs identical" : "runs differ";
    out.push_back(det);
    return out;
}

inline VerifyResult verify(const std::vector<Job> &jobs,
                           const RunOptions &opt = {},
                           const Expectations &e = {}) {
    VerifyResult r;
    r.checks = builtin_checks(e);
    for (const auto &job : jobs) {
        auto c = job_checks(job, opt);
        r.checks.insert(r.checks.end(), c.begin(), c.end());
    }
    return r;
}

inline void print_checks(std::ostream &os, const VerifyResult &r) {
    std::size_t width = 5;
    for (const auto &c : r.checks) {
        width = std::max(width, c.name.size());
    }
    os << "check" << std::string(width - 5 + 2, ' ') << "result  detail\n";
    for (const auto &c : r.checks) {
        os << c.name << std::string(width - c.name.size() + 2, ' ')
           << (c.passed ? "PASS" : "FAIL") << "    " << c.detail << '\n';
    }
    std::size_t failed = 0;
    for (const auto &c : r.checks) {
        failed += c.passed ? 0 : 1;
    }
    os << (failed == 0 ? "all " + std::to_string(r.checks.size()) +
                             " checks passed"
                       : std::to_string(failed) + " of " +
                             std::to_string(r.checks.size()) +
                             " checks failed")
       << '\n';
}

} // namespace mflo::app
