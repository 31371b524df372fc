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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mflo/mflo.hpp"
#include "mflo/app/job.hpp"
#include "mflo/app/report.hpp"
#include "mflo/app/state_io.hpp"

namespace mflo::app {

/// Largest product basis accepted; the overlap matrix is n_prod^2 doubles.
inline constexpr std::size_t kMaxProducts = 4096;

struct RunOptions {
    unsigned threads = 1;
    int max_qubits = kDefaultMaxQubitsPerAxis;
    /// Overrides the job's seed when set.
    std::optional<std::uint64_t> seed;
    /// Report path; the job's outputs.report when empty.
    std::filesystem::path report_path;
};

inline std::uint64_t effective_seed(const Job &job, const RunOptions &opt) {
    return opt.seed ? *opt.seed : job.cpd.seed;
}

inline void check_product_budget(const LorentzianBasisSpec &spec) {
    if (spec.num_products() > kMaxProducts) {
        throw ResourceError("product basis of " +
                            std::to_string(spec.num_products()) +
                            " functions exceeds the limit of " +
                            std::to_string(kMaxProducts));
    }
}

inline RankReport rank_report(const MoReport &mo, const CanonicalState &c,
                              std::size_t requested, int n) {
    RankReport r;
    r.rank = requested;
    r.components = static_cast<std::size_t>(c.lambda.size());
    r.deviation = c.deviation;
    r.canon_norm_squared = c.norm_squared;
    r.cp_relative_error = c.cp_relative_error;
    r.cp_sweeps = c.cp_sweeps;
    r.lambda.assign(c.lambda.data(), c.lambda.data() + c.lambda.size());
    for (int nu = 0; nu < 3; ++nu) {
        const auto u = static_cast<std::size_t>(nu);
        for (Eigen::Index row = 0; row < c.u[u].rows(); ++row) {
            std::vector<double> v(static_cast<std::size_t>(c.u[u].cols()));
            for (Eigen::Index col = 0; col < c.u[u].cols(); ++col) {
                v[static_cast<std::size_t>(col)] = c.u[u](row, col);
            }
            r.u[u].push_back(std::move(v));
        }
    }
    r.flags = c.flags;
    if (r.components == 0) {
        r.flags.emplace_back("empty");
        return r;
    }
    r.success_probability = success_prob_canonical(c);
    if (r.components * mo.core.size() <= kOracleMaxBranches) {
        const auto branches = canonical_branches(c);
        r.probability_oracle_residual =
            std::abs(r.success_probability -
                     lcu_postselect_oracle(branches, overlap_3d(c.spec, n)));
    } else {
        r.flags.emplace_back("oracle_skipped");
    }
    r.cnots = CostSummary::from(cnot_count_canonical(c.spec.dims(), n, r.components));
    return r;
}

/// Canonical decompositions of an MO's Tucker core for every rank.
inline std::vector<RankReport> sweep_ranks(const MoReport &mo,
                                           const std::vector<std::size_t> &ranks,
                                           int n, int restarts,
                                           std::uint64_t seed,
                                           unsigned threads) {
    std::vector<RankReport> out;
    if (ranks.empty()) {
        return out;
    }
    auto sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    CpOptions cp;
    cp.restarts = restarts;
    cp.seed = seed;
    cp.threads = threads;
    const auto states = rank_sweep(mo.tucker(), sorted, n, cp);
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.push_back(rank_report(mo, states[i], sorted[i], n));
    }
    return out;
}

inline MoReport fit_mo(const Job &job, std::size_t index,
                       const RunOptions &opt) {
    const int n = job.cell.qubits_per_axis;
    auto problem = FitProblem::create(job.molecular_orbital(index), job.cell,
                                      job.spec, job.alpha_pen,
                                      job.mos[index].name);
    OptimizeOptions oo;
    oo.max_iterations = job.optimizer.max_iterations;
    oo.restarts = job.optimizer.restarts;
    oo.gradient_tolerance = job.optimizer.gradient_tolerance;
    oo.min_width = job.optimizer.min_width;
    oo.max_width = job.optimizer.max_width;
    oo.seed = effective_seed(job, opt);
    oo.threads = opt.threads;
    const TuckerState t = optimize_widths(problem, oo);

    MoReport m;
    m.name = job.mos[index].name;
    m.normalization = problem.normalization;
    m.spec = t.spec;
    m.core.assign(t.core.data.data(), t.core.data.data() + t.core.data.size());
    m.squared_overlap = t.squared_overlap;
    m.fidelity = t.fidelity;
    m.penalty = t.penalty;
    m.kappa_max = t.kappa_max;
    m.success_probability = success_prob_tucker(t, n);
    m.max_boundary_mass = t.max_boundary_mass;
    m.discarded_directions = t.discarded_directions;
    m.cnots = CostSummary::from(cnot_count_tucker(t.spec.dims(), n));
    m.optimizer.iterations = t.diagnostics.iterations;
    m.optimizer.final_gradient_norm = t.diagnostics.final_gradient_norm;
    m.optimizer.converged = t.diagnostics.converged;
    m.optimizer.stop_reason = t.diagnostics.stop_reason;
    m.optimizer.restart_fidelities = t.diagnostics.restart_fidelities;
    m.optimizer.fidelity_history = t.diagnostics.fidelity_history;
    m.flags = t.flags;
    m.ranks = sweep_ranks(m, job.cpd.ranks, n, job.cpd.restarts,
                          effective_seed(job, opt), opt.threads);
    return m;
}

/// Fits every MO of the job. Does no file I/O.
inline FitReport fit_job(const Job &job, const RunOptions &opt = {}) {
    check_product_budget(job.spec);
    FitReport r;
    r.job_name = job.name;
    r.qubits_per_axis = job.cell.qubits_per_axis;
    r.alpha_pen = job.alpha_pen;
    r.seed = effective_seed(job, opt);
    r.job = job.source;
    for (std::size_t i = 0; i < job.aos.size(); ++i) {
        const auto chk = check_ao_norm(job.aos[i]);
        if (!chk.within_tolerance && !job.normalize_aos) {
            r.warnings.push_back("AO " + std::to_string(i) +
                                 " has squared norm " +
                                 std::to_string(chk.norm_squared));
        }
    }
    for (std::size_t i = 0; i < job.mos.size(); ++i) {
        r.mos.push_back(fit_mo(job, i, opt));
    }
    for (auto &m : r.mos) {
        m.checks = recheck_identities(m, r.qubits_per_axis, job);
    }
    return r;
}

inline void write_text(const std::filesystem::path &path,
                       const std::string &text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArgumentError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw ArgumentError("write failed for " + path.string());
    }
}

inline std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

/// Report path with the ".report.json" or ".json" suffix removed.
inline std::string output_stem(const std::filesystem::path &report) {
    std::string s = report.string();
    for (const std::string suffix : {".report.json", ".json"}) {
        if (s.size() > suffix.size() &&
            s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return s.substr(0, s.size() - suffix.size());
        }
    }
    return s;
}

inline Job job_from_report(const FitReport &report) {
    return parse_job(report.job);
}

/// Builds the requested grid state for one MO of a report. Canonical states
/// use `rank` (the largest available when omitted) and are normalized.
inline GridState state_from_report(const FitReport &report,
                                   const std::string &mo_name, StateTag which,
                                   std::optional<std::size_t> rank,
                                   const RunOptions &opt = {}) {
    const int n = report.qubits_per_axis;
    if (n > opt.max_qubits) {
        throw ResourceError("statevector of " + std::to_string(n) +
                            " qubits per axis exceeds the limit of " +
                            std::to_string(opt.max_qubits));
    }
    GridOptions go;
    go.max_qubits_per_axis = opt.max_qubits;
    go.threads = opt.threads;
    const MoReport &mo = report.mo(mo_name);
    switch (which) {
    case StateTag::Ideal: {
        const Job job = job_from_report(report);
        for (std::size_t i = 0; i < job.mos.size(); ++i) {
            if (job.mos[i].name == mo_name) {
                return build_ideal_state(job.molecular_orbital(i), job.cell, go)
                    .state;
            }
        }
        throw ArgumentError("job has no MO named \"" + mo_name + "\"");
    }
    case StateTag::Tucker: {
        const auto t = mo.tucker();
        return tucker_statevector(t.spec, n, t.core, go);
    }
    case StateTag::Canonical: {
        if (mo.ranks.empty()) {
            throw ArgumentError("report has no canonical decomposition for \"" +
                                mo_name + "\"");
        }
        const RankReport *pick = &mo.ranks.back();
        if (rank) {
            pick = nullptr;
            for (const auto &r : mo.ranks) {
                if (r.rank == *rank) {
                    pick = &r;
                }
            }
            if (pick == nullptr) {
                throw ArgumentError("report has no rank " +
                                    std::to_string(*rank) + " entry");
            }
        }
        const auto c = canonical_from(mo, *pick);
        auto g = tucker_statevector(c.spec, n, c.core(), go);
        const double norm = std::sqrt(g.norm_squared());
        if (norm > 0.0) {
            for (double &v : g.amplitudes) {
                v /= norm;
            }
        }
        return g;
    }
    }
    throw ArgumentError("unknown state form");
}

inline void write_state_file(const std::filesystem::path &path,
                             const GridState &state, StateTag tag,
                             const std::string &format) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArgumentError("cannot write " + path.string());
    }
    if (format == "binary") {
        write_state_binary(out, state, tag);
    } else if (format == "csv") {
        write_state_csv(out, state);
    } else {
        throw ArgumentError("unknown state format \"" + format + "\"");
    }
}

inline void write_convergence_csv(std::ostream &os, const FitReport &report) {
    const auto old = os.precision(17);
    os << "mo,iteration,fidelity\n";
    for (const auto &m : report.mos) {
        for (std::size_t i = 0; i < m.optimizer.fidelity_history.size(); ++i) {
            os << m.name << ',' << i << ',' << m.optimizer.fidelity_history[i]
               << '\n';
        }
    }
    os.precision(old);
}

struct FitOutputs {
    std::filesystem::path report;
    std::vector<std::filesystem::path> files;
};

/// Runs the job and writes the report plus any requested side files. The
/// report is written before state exports, so a resource error there
/// leaves it in place.
inline FitOutputs run_fit(const Job &job, const RunOptions &opt,
                          FitReport *result = nullptr) {
    FitReport report = fit_job(job, opt);
    FitOutputs out;
    out.report = opt.report_path.empty()
                     ? std::filesystem::path(job.outputs.report)
                     : opt.report_path;
    write_text(out.report, serialize_report(report));
    const std::string stem = output_stem(out.report);
    if (job.outputs.convergence_csv) {
        std::ostringstream os;
        write_convergence_csv(os, report);
        const std::filesystem::path p = stem + ".convergence.csv";
        write_text(p, os.str());
        out.files.push_back(p);
    }
    if (job.outputs.export_states) {
        const std::string ext =
            job.outputs.state_format == "binary" ? ".bin" : ".csv";
        for (const auto &m : report.mos) {
            std::vector<StateTag> tags{StateTag::Ideal, StateTag::Tucker};
            if (!m.ranks.empty()) {
                tags.push_back(StateTag::Canonical);
            }
            for (StateTag tag : tags) {
                const auto g = state_from_report(report, m.name, tag, {}, opt);
                const std::filesystem::path p =
                    stem + "." + m.name + "." + to_string(tag) + ext;
                write_state_file(p, g, tag, job.outputs.state_format);
                out.files.push_back(p);
            }
        }
    }
    if (result != nullptr) {
        *result = std::move(report);
    }
    return out;
}

/// Replaces every MO's rank sweep in a report.
inline void decompose_report(FitReport &report,
                             const std::vector<std::size_t> &ranks,
                             int restarts, std::uint64_t seed,
                             unsigned threads) {
    for (auto &m : report.mos) {
        for (std::size_t r : ranks) {
            if (r < 1 || r > m.core.size()) {
                throw ArgumentError("rank " + std::to_string(r) +
                                    " outside [1, " +
                                    std::to_string(m.core.size()) + "] for " +
                                    m.name);
            }
        }
        m.ranks = sweep_ranks(m, ranks, report.qubits_per_axis, restarts, seed,
                              threads);
    }
}

} // namespace mflo::app
