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

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mflo/cpd.hpp"
#include "mflo/encoding.hpp"
#include "mflo/fitting.hpp"
#include "mflo/app/job.hpp"

namespace mflo::app {

inline constexpr int kReportSchemaVersion = 1;
/// Tolerance for the identities re-checked when a report is written.
inline constexpr double kIdentityTolerance = 1e-10;
/// Largest branch count simulated by the LCU oracle (its cost is J^2).
inline constexpr std::size_t kOracleMaxBranches = 2048;

struct CostSummary {
    std::array<int, 3> ancillae_per_direction{0, 0, 0};
    int lorentzian_ancillae = 0;
    std::optional<int> canonical_ancillae;
    std::int64_t total = 0;
    std::int64_t slater_phase = 0;
    std::int64_t amplitude = 0;
    std::int64_t qft_informational = 0;

    static CostSummary from(const CircuitCostReport &r) {
        CostSummary c;
        c.ancillae_per_direction = r.ancillae.per_direction;
        c.lorentzian_ancillae = r.ancillae.lorentzian;
        c.canonical_ancillae = r.ancillae.canonical;
        c.total = r.total_cnots;
        c.slater_phase = r.slater_phase_cnots;
        c.amplitude = r.amplitude_cnots;
        c.qft_informational = r.qft_cnots_informational;
        return c;
    }
};

/// Identity residuals recomputed from the stored numbers.
struct IdentityChecks {
    /// |d.S d - 1|.
    double normalization_residual = 0.0;
    /// |(T.d)^2 - squared overlap| with T recomputed.
    double overlap_residual = 0.0;
    /// Largest of |kappa - (T.d)^2| and |kappa - (F + P)|.
    double kappa_residual = 0.0;
    /// |success probability - LCU oracle|.
    double probability_oracle_residual = 0.0;
    bool passed = false;
};

struct RankReport {
    /// Requested rank.
    std::size_t rank = 0;
    /// Components left after vanishing ones are dropped; costs and
    /// probabilities use this count.
    std::size_t components = 0;
    double deviation = 0.0;
    double canon_norm_squared = 0.0;
    double cp_relative_error = 0.0;
    int cp_sweeps = 0;
    std::vector<double> lambda;
    /// u[nu][r] is the S-normalized factor of component r along axis nu.
    std::array<std::vector<std::vector<double>>, 3> u;
    double success_probability = 0.0;
    double probability_oracle_residual = 0.0;
    CostSummary cnots;
    std::vector<std::string> flags;
};

struct OptimizerSummary {
    int iterations = 0;
    double final_gradient_norm = 0.0;
    bool converged = false;
    std::string stop_reason;
    std::vector<double> restart_fidelities;
    std::vector<double> fidelity_history;
};

struct MoReport {
    std::string name;
    double normalization = 0.0;
    LorentzianBasisSpec spec;
    std::vector<double> core;
    double squared_overlap = 0.0;
    double fidelity = 0.0;
    double penalty = 0.0;
    double kappa_max = 0.0;
    double success_probability = 0.0;
    double max_boundary_mass = 0.0;
    std::size_t discarded_directions = 0;
    CostSummary cnots;
    OptimizerSummary optimizer;
    std::vector<std::string> flags;
    IdentityChecks checks;
    std::vector<RankReport> ranks;

    [[nodiscard]] TuckerState tucker() const {
        TuckerState t;
        t.spec = spec;
        t.core = Tensor3(spec.dims(),
                         Eigen::Map<const Eigen::VectorXd>(
                             core.data(), static_cast<Eigen::Index>(core.size())));
        t.fidelity = fidelity;
        t.squared_overlap = squared_overlap;
        t.penalty = penalty;
        t.kappa_max = kappa_max;
        return t;
    }
};

struct FitReport {
    int schema = kReportSchemaVersion;
    std::string job_name;
    int qubits_per_axis = 0;
    double alpha_pen = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    std::vector<MoReport> mos;
    /// Job document the report was produced from.
    json job;

    [[nodiscard]] const MoReport &mo(const std::string &name) const {
        for (const auto &m : mos) {
            if (m.name == name) {
                return m;
            }
        }
        throw ArgumentError("report has no MO named \"" + name + "\"");
    }
};

/// Canonical state rebuilt from a rank entry.
inline CanonicalState canonical_from(const MoReport &mo, const RankReport &r) {
    CanonicalState c;
    c.rank = r.components;
    c.spec = mo.spec;
    c.lambda = Eigen::Map<const Eigen::VectorXd>(
        r.lambda.data(), static_cast<Eigen::Index>(r.lambda.size()));
    for (int nu = 0; nu < 3; ++nu) {
        const auto u = static_cast<std::size_t>(nu);
        c.u[u].resize(static_cast<Eigen::Index>(c.rank),
                      static_cast<Eigen::Index>(mo.spec.directions[u].size()));
        for (std::size_t row = 0; row < c.rank; ++row) {
            for (std::size_t col = 0; col < r.u[u][row].size(); ++col) {
                c.u[u](static_cast<Eigen::Index>(row),
                       static_cast<Eigen::Index>(col)) = r.u[u][row][col];
            }
        }
    }
    c.deviation = r.deviation;
    c.norm_squared = r.canon_norm_squared;
    c.cp_relative_error = r.cp_relative_error;
    c.cp_sweeps = r.cp_sweeps;
    c.flags = r.flags;
    return c;
}

/// Recomputes the report identities for one MO from the stored widths and
/// core. T is rebuilt from the embedded job and the penalty from the
/// overlap matrix, so none of the stored scalars is trusted.
inline IdentityChecks recheck_identities(const MoReport &mo, int n,
                                         const Job &job) {
    IdentityChecks c;
    const Eigen::MatrixXd s = overlap_3d(mo.spec, n);
    const Eigen::Map<const Eigen::VectorXd> d(
        mo.core.data(), static_cast<Eigen::Index>(mo.core.size()));
    c.normalization_residual = std::abs(d.dot(s * d) - 1.0);

    std::size_t index = job.mos.size();
    for (std::size_t i = 0; i < job.mos.size(); ++i) {
        if (job.mos[i].name == mo.name) {
            index = i;
        }
    }
    if (index == job.mos.size()) {
        throw ArgumentError("embedded job has no MO named \"" + mo.name +
                            "\"");
    }
    const auto problem = FitProblem::create(
        job.molecular_orbital(index), job.cell, mo.spec, job.alpha_pen, mo.name);
    const double td = t_tensor(problem).values.data.dot(d);
    c.overlap_residual = std::abs(td * td - mo.squared_overlap);
    const double p = penalty(s, job.alpha_pen);
    c.kappa_residual = std::max(std::abs(mo.kappa_max - td * td),
                                std::abs(mo.kappa_max - (mo.fidelity + p)));

    if (mo.core.size() <= kOracleMaxBranches) {
        const auto branches = tucker_branches(d);
        c.probability_oracle_residual = std::abs(
            mo.success_probability - lcu_postselect_oracle(branches, s));
    }
    // d grows like 1 / sqrt(smallest kept overlap eigenvalue); the
    // normalization residual is measured relative to that scale.
    const double scale = std::max(1.0, d.squaredNorm());
    bool ranks_ok = true;
    for (const auto &r : mo.ranks) {
        ranks_ok = ranks_ok &&
                   r.probability_oracle_residual <= kIdentityTolerance;
    }
    c.passed = ranks_ok &&
               c.normalization_residual <= kIdentityTolerance * scale &&
               c.overlap_residual <= kIdentityTolerance &&
               c.kappa_residual <= kIdentityTolerance &&
               c.probability_oracle_residual <= kIdentityTolerance;
    return c;
}

inline bool all_checks_passed(const FitReport &r) {
    for (const auto &m : r.mos) {
        if (!m.checks.passed) {
            return false;
        }
    }
    return true;
}

// JSON mapping. Doubles are written in shortest round-trip form, so a
// parse / dump cycle reproduces the document byte for byte.

inline void to_json(json &j, const CostSummary &c) {
    j = json{{"ancillae_per_direction", c.ancillae_per_direction},
             {"lorentzian_ancillae", c.lorentzian_ancillae},
             {"total", c.total},
             {"slater_phase", c.slater_phase},
             {"amplitude", c.amplitude},
             {"qft_informational", c.qft_informational}};
    if (c.canonical_ancillae) {
        j["canonical_ancillae"] = *c.canonical_ancillae;
    }
}

inline void from_json(const json &j, CostSummary &c) {
    j.at("ancillae_per_direction").get_to(c.ancillae_per_direction);
    j.at("lorentzian_ancillae").get_to(c.lorentzian_ancillae);
    if (j.contains("canonical_ancillae")) {
        c.canonical_ancillae = j.at("canonical_ancillae").get<int>();
    }
    j.at("total").get_to(c.total);
    j.at("slater_phase").get_to(c.slater_phase);
    j.at("amplitude").get_to(c.amplitude);
    j.at("qft_informational").get_to(c.qft_informational);
}

inline void to_json(json &j, const IdentityChecks &c) {
    j = json{{"normalization_residual", c.normalization_residual},
             {"overlap_residual", c.overlap_residual},
             {"kappa_residual", c.kappa_residual},
             {"probability_oracle_residual", c.probability_oracle_residual},
             {"passed", c.passed}};
}

inline void from_json(const json &j, IdentityChecks &c) {
    j.at("normalization_residual").get_to(c.normalization_residual);
    j.at("overlap_residual").get_to(c.overlap_residual);
    j.at("kappa_residual").get_to(c.kappa_residual);
    j.at("probability_oracle_residual").get_to(c.probability_oracle_residual);
    j.at("passed").get_to(c.passed);
}

inline void to_json(json &j, const RankReport &r) {
    j = json{{"rank", r.rank},
             {"components", r.components},
             {"deviation", r.deviation},
             {"canon_norm_squared", r.canon_norm_squared},
             {"cp_relative_error", r.cp_relative_error},
             {"cp_sweeps", r.cp_sweeps},
             {"lambda", r.lambda},
             {"u", {{"x", r.u[0]}, {"y", r.u[1]}, {"z", r.u[2]}}},
             {"success_probability", r.success_probability},
             {"probability_oracle_residual", r.probability_oracle_residual},
             {"cnots", r.cnots},
             {"flags", r.flags}};
}

inline void from_json(const json &j, RankReport &r) {
    j.at("rank").get_to(r.rank);
    j.at("components").get_to(r.components);
    j.at("deviation").get_to(r.deviation);
    j.at("canon_norm_squared").get_to(r.canon_norm_squared);
    j.at("cp_relative_error").get_to(r.cp_relative_error);
    j.at("cp_sweeps").get_to(r.cp_sweeps);
    j.at("lambda").get_to(r.lambda);
    j.at("u").at("x").get_to(r.u[0]);
    j.at("u").at("y").get_to(r.u[1]);
    j.at("u").at("z").get_to(r.u[2]);
    j.at("success_probability").get_to(r.success_probability);
    j.at("probability_oracle_residual").get_to(r.probability_oracle_residual);
    j.at("cnots").get_to(r.cnots);
    j.at("flags").get_to(r.flags);
}

inline void to_json(json &j, const OptimizerSummary &o) {
    j = json{{"iterations", o.iterations},
             {"final_gradient_norm", o.final_gradient_norm},
             {"converged", o.converged},
             {"stop_reason", o.stop_reason},
             {"restart_fidelities", o.restart_fidelities},
             {"fidelity_history", o.fidelity_history}};
}

inline void from_json(const json &j, OptimizerSummary &o) {
    j.at("iterations").get_to(o.iterations);
    j.at("final_gradient_norm").get_to(o.final_gradient_norm);
    j.at("converged").get_to(o.converged);
    j.at("stop_reason").get_to(o.stop_reason);
    j.at("restart_fidelities").get_to(o.restart_fidelities);
    j.at("fidelity_history").get_to(o.fidelity_history);
}

inline json spec_to_json(const LorentzianBasisSpec &spec) {
    json j;
    for (int nu = 0; nu < 3; ++nu) {
        const auto &d = spec.directions[static_cast<std::size_t>(nu)];
        j[detail::kAxisNames[static_cast<std::size_t>(nu)]] =
            json{{"widths", d.widths}, {"centers", d.centers}};
    }
    return j;
}

inline LorentzianBasisSpec spec_from_json(const json &j) {
    LorentzianBasisSpec spec;
    for (int nu = 0; nu < 3; ++nu) {
        const auto u = static_cast<std::size_t>(nu);
        const auto &a = j.at(detail::kAxisNames[u]);
        a.at("widths").get_to(spec.directions[u].widths);
        a.at("centers").get_to(spec.directions[u].centers);
    }
    return spec;
}

inline void to_json(json &j, const MoReport &m) {
    j = json{{"name", m.name},
             {"normalization", m.normalization},
             {"basis", spec_to_json(m.spec)},
             {"dims", m.spec.dims()},
             {"core", m.core},
             {"squared_overlap", m.squared_overlap},
             {"fidelity", m.fidelity},
             {"penalty", m.penalty},
             {"kappa_max", m.kappa_max},
             {"success_probability", m.success_probability},
             {"max_boundary_mass", m.max_boundary_mass},
             {"discarded_directions", m.discarded_directions},
             {"cnots", m.cnots},
             {"optimizer", m.optimizer},
             {"flags", m.flags},
             {"checks", m.checks},
             {"ranks", m.ranks}};
}

inline void from_json(const json &j, MoReport &m) {
    j.at("name").get_to(m.name);
    j.at("normalization").get_to(m.normalization);
    m.spec = spec_from_json(j.at("basis"));
    j.at("core").get_to(m.core);
    if (m.core.size() != m.spec.num_products()) {
        throw ArgumentError("report: core size does not match the basis");
    }
    j.at("squared_overlap").get_to(m.squared_overlap);
    j.at("fidelity").get_to(m.fidelity);
    j.at("penalty").get_to(m.penalty);
    j.at("kappa_max").get_to(m.kappa_max);
    j.at("success_probability").get_to(m.success_probability);
    j.at("max_boundary_mass").get_to(m.max_boundary_mass);
    j.at("discarded_directions").get_to(m.discarded_directions);
    j.at("cnots").get_to(m.cnots);
    j.at("optimizer").get_to(m.optimizer);
    j.at("flags").get_to(m.flags);
    j.at("checks").get_to(m.checks);
    j.at("ranks").get_to(m.ranks);
}

inline void to_json(json &j, const FitReport &r) {
    j = json{{"schema", r.schema},
             {"job_name", r.job_name},
             {"n_qe", r.qubits_per_axis},
             {"alpha_pen", r.alpha_pen},
             {"seed", r.seed},
             {"warnings", r.warnings},
             {"all_checks_passed", all_checks_passed(r)},
             {"mos", r.mos},
             {"job", r.job}};
}

inline void from_json(const json &j, FitReport &r) {
    j.at("schema").get_to(r.schema);
    if (r.schema != kReportSchemaVersion) {
        throw ArgumentError("unsupported report schema " +
                            std::to_string(r.schema));
    }
    j.at("job_name").get_to(r.job_name);
    j.at("n_qe").get_to(r.qubits_per_axis);
    j.at("alpha_pen").get_to(r.alpha_pen);
    j.at("seed").get_to(r.seed);
    j.at("warnings").get_to(r.warnings);
    j.at("mos").get_to(r.mos);
    r.job = j.at("job");
}

/// Re-checks every MO's identities and serializes the report.
inline std::string serialize_report(FitReport &report) {
    const Job job = parse_job(report.job);
    for (auto &m : report.mos) {
        m.checks = recheck_identities(m, report.qubits_per_axis, job);
    }
    return json(report).dump(2) + "\n";
}

inline FitReport parse_report(const std::string &text) {
    try {
        return json::parse(text).get<FitReport>();
    } catch (const json::exception &e) {
        throw ArgumentError(std::string("malformed report: ") + e.what());
    }
}

} // namespace mflo::app
