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

// mflo command-line front-end.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mflo/mflo.hpp"
#include "mflo/app/job.hpp"
#include "mflo/app/pipeline.hpp"
#include "mflo/app/report.hpp"
#include "mflo/app/state_io.hpp"
#include "mflo/app/verify.hpp"

namespace {

using mflo::app::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kSchema = 2, kResource = 3 };

struct CommonFlags {
    std::string job;
    std::string out;
    std::optional<std::uint64_t> seed;
    int max_qubits = mflo::kDefaultMaxQubitsPerAxis;
    unsigned threads = 1;

    [[nodiscard]] mflo::app::RunOptions run_options() const {
        mflo::app::RunOptions o;
        o.threads = threads;
        o.max_qubits = max_qubits;
        o.seed = seed;
        o.report_path = out;
        return o;
    }
};

void add_common(CLI::App *cmd, CommonFlags &f, bool job_required) {
    auto *job = cmd->add_option("--job", f.job, "job file (JSON)");
    if (job_required) {
        job->required();
    }
    cmd->add_option("--out", f.out, "output path");
    cmd->add_option("--seed", f.seed, "overrides the job's seed");
    cmd->add_option("--max-qubits", f.max_qubits,
                    "largest qubits per axis for full statevectors")
        ->check(CLI::Range(1, 30));
    cmd->add_option("--threads", f.threads, "worker threads")
        ->check(CLI::Range(1u, 1024u));
}

void emit(const std::string &out, const std::string &text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        mflo::app::write_text(out, text);
    }
}

void print_error(const char *kind, const std::string &message,
                 const std::string *pointer = nullptr) {
    json e{{"error", kind}, {"message", message}};
    if (pointer != nullptr) {
        e["pointer"] = *pointer;
    }
    std::cerr << e.dump() << '\n';
}

std::string components_note(const mflo::app::RankReport &r) {
    return r.components == r.rank
               ? std::string()
               : " (" + std::to_string(r.components) + " components)";
}

int cmd_fit(const CommonFlags &f) {
    const auto job = mflo::app::load_job(f.job);
    mflo::app::FitReport report;
    const auto out = mflo::app::run_fit(job, f.run_options(), &report);
    for (const auto &w : report.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    for (const auto &m : report.mos) {
        std::cout << m.name << ": squared_overlap "
                  << mflo::app::detail::fixed(m.squared_overlap, 6)
                  << ", P_tucker "
                  << mflo::app::detail::fixed(m.success_probability, 6)
                  << ", cnots " << m.cnots.total;
        for (const auto &flag : m.flags) {
            std::cout << " [" << flag << ']';
        }
        std::cout << '\n';
        for (const auto &r : m.ranks) {
            std::cout << "  R=" << r.rank << components_note(r) << ": deviation "
                      << mflo::app::detail::sci(r.deviation) << ", P_canon "
                      << mflo::app::detail::fixed(r.success_probability, 6)
                      << ", cnots " << r.cnots.total << '\n';
        }
    }
    std::cout << "report: " << out.report.string() << '\n';
    for (const auto &p : out.files) {
        std::cout << "wrote: " << p.string() << '\n';
    }
    if (!mflo::app::all_checks_passed(report)) {
        print_error("identity_check", "report identities failed; see checks");
        return kFailure;
    }
    return kOk;
}

int cmd_decompose(const CommonFlags &f, const std::string &report_path,
                  const std::vector<std::size_t> &ranks, int restarts) {
    auto report = mflo::app::parse_report(mflo::app::read_text(report_path));
    const auto job = mflo::app::job_from_report(report);
    const auto use_ranks = ranks.empty() ? job.cpd.ranks : ranks;
    if (use_ranks.empty()) {
        throw mflo::ArgumentError("no ranks given and the job lists none");
    }
    const std::uint64_t seed = f.seed ? *f.seed : report.seed;
    mflo::app::decompose_report(report, use_ranks,
                                restarts > 0 ? restarts : job.cpd.restarts,
                                seed, f.threads);
    const std::string text = mflo::app::serialize_report(report);
    emit(f.out.empty() ? report_path : f.out, text);
    for (const auto &m : report.mos) {
        for (const auto &r : m.ranks) {
            std::cout << m.name << " R=" << r.rank << components_note(r) << ": deviation "
                      << mflo::app::detail::sci(r.deviation) << ", P_canon "
                      << mflo::app::detail::fixed(r.success_probability, 6)
                      << ", cnots " << r.cnots.total << '\n';
        }
    }
    return mflo::app::all_checks_passed(report) ? kOk : kFailure;
}

json cost_json(const mflo::CircuitCostReport &c) {
    json j = mflo::app::CostSummary::from(c);
    j["form"] = mflo::to_string(c.form);
    if (c.rank) {
        j["rank"] = *c.rank;
    }
    return j;
}

json gate_entry(const std::array<std::size_t, 3> &dims, int n,
                std::optional<std::size_t> rank) {
    json j{{"dims", dims}, {"n_qe", n},
           {"tucker", cost_json(mflo::cnot_count_tucker(dims, n))}};
    if (rank) {
        j["canonical"] = cost_json(mflo::cnot_count_canonical(dims, n, *rank));
    }
    return j;
}

int cmd_gate_count(const CommonFlags &f, const std::vector<std::size_t> &dims,
                   int n, std::optional<std::size_t> rank) {
    json out;
    if (!f.job.empty()) {
        const auto job = mflo::app::load_job(f.job);
        std::optional<std::size_t> r = rank;
        if (!r && !job.cpd.ranks.empty()) {
            r = job.cpd.ranks.back();
        }
        out = gate_entry(job.spec.dims(), job.cell.qubits_per_axis, r);
    } else if (!dims.empty()) {
        if (dims.size() != 3) {
            throw mflo::ArgumentError("--dims needs three values");
        }
        out = gate_entry({dims[0], dims[1], dims[2]}, n, rank);
    } else {
        // Published reference configurations.
        const mflo::app::Expectations e;
        out = json::array();
        for (const auto &row : e.water) {
            out.push_back(gate_entry(row.dims, row.data_qubits, row.rank));
        }
        out.push_back(gate_entry(e.h2_dims, e.h2_data_qubits, std::nullopt));
    }
    emit(f.out, out.dump(2) + "\n");
    return kOk;
}

int cmd_export(const CommonFlags &f, const std::string &report_path,
               const std::string &mo, const std::string &which,
               std::optional<std::size_t> rank, const std::string &format) {
    if (f.out.empty()) {
        throw mflo::ArgumentError("export-state needs --out");
    }
    const auto report = mflo::app::parse_report(mflo::app::read_text(report_path));
    const std::string name = mo.empty() ? report.mos.at(0).name : mo;
    const auto tag = mflo::app::state_tag_from_string(which);
    const auto state = mflo::app::state_from_report(report, name, tag, rank,
                                                    f.run_options());
    mflo::app::write_state_file(f.out, state, tag, format);
    return kOk;
}

int cmd_two_center(const CommonFlags &f, int n, double width, std::int64_t a,
                   std::int64_t b, std::size_t points) {
    const auto thetas =
        mflo::linspace(-std::numbers::pi / 2, std::numbers::pi / 2, points);
    const auto table = mflo::two_center_analysis(n, width, a, b, thetas);
    std::ostringstream os;
    mflo::write_two_center_csv(os, table);
    emit(f.out, os.str());
    std::cerr << "overlap <L_A|L_B> = " << mflo::app::detail::sci(table.overlap)
              << '\n';
    return kOk;
}

int cmd_verify(const CommonFlags &f, const std::vector<std::string> &jobs) {
    std::vector<mflo::app::Job> loaded;
    for (const auto &p : jobs) {
        loaded.push_back(mflo::app::load_job(p));
    }
    const auto result = mflo::app::verify(loaded, f.run_options());
    std::ostringstream os;
    mflo::app::print_checks(os, result);
    emit(f.out, os.str());
    if (!f.out.empty() && f.out != "-") {
        std::cout << os.str();
    }
    return result.passed() ? kOk : kFailure;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Lorentzian-basis molecular orbital fitting and state "
                 "preparation costs"};
    app.require_subcommand(1);

    CommonFlags fit_f;
    auto *fit = app.add_subcommand("fit", "fit every MO of a job and write a "
                                          "report");
    add_common(fit, fit_f, true);

    CommonFlags dec_f;
    std::string dec_report;
    std::vector<std::size_t> dec_ranks;
    int dec_restarts = 0;
    auto *dec = app.add_subcommand("decompose",
                                   "rank sweep on an existing report");
    add_common(dec, dec_f, false);
    dec->add_option("--report", dec_report, "report file")->required();
    dec->add_option("--ranks", dec_ranks, "ranks to sweep")->delimiter(',');
    dec->add_option("--restarts", dec_restarts, "ALS restarts per rank")
        ->check(CLI::Range(1, 1000));

    CommonFlags gc_f;
    std::vector<std::size_t> gc_dims;
    int gc_n = 7;
    std::optional<std::size_t> gc_rank;
    auto *gc = app.add_subcommand(
        "gate-count", "CNOT counts; the published configurations by default");
    add_common(gc, gc_f, false);
    gc->add_option("--dims", gc_dims, "LFs per direction, e.g. 3,3,3")
        ->delimiter(',');
    gc->add_option("--n-qe", gc_n, "data qubits per axis")
        ->check(CLI::Range(1, 30));
    gc->add_option("--rank", gc_rank, "canonical rank")
        ->check(CLI::PositiveNumber);

    CommonFlags ex_f;
    std::string ex_report;
    std::string ex_mo;
    std::string ex_which = "tucker";
    std::optional<std::size_t> ex_rank;
    std::string ex_format = "csv";
    auto *ex = app.add_subcommand("export-state",
                                  "write a grid statevector from a report");
    add_common(ex, ex_f, false);
    ex->add_option("--report", ex_report, "report file")->required();
    ex->add_option("--mo", ex_mo, "MO name (first MO by default)");
    ex->add_option("--which", ex_which, "ideal, tucker or canonical")
        ->check(CLI::IsMember({"ideal", "tucker", "canonical"}));
    ex->add_option("--rank", ex_rank, "canonical rank (largest by default)");
    ex->add_option("--format", ex_format, "csv or binary")
        ->check(CLI::IsMember({"csv", "binary"}));

    CommonFlags tc_f;
    int tc_n = 5;
    double tc_width = 2.0;
    std::int64_t tc_a = 10;
    std::int64_t tc_b = 14;
    std::size_t tc_points = 21;
    auto *tc = app.add_subcommand(
        "two-center", "post-selection probability of two combined LFs");
    add_common(tc, tc_f, false);
    tc->add_option("--n", tc_n, "qubits")->check(CLI::Range(1, 24));
    tc->add_option("--width", tc_width, "LF width")
        ->check(CLI::PositiveNumber);
    tc->add_option("--center-a", tc_a, "centre of L_A");
    tc->add_option("--center-b", tc_b, "centre of L_B");
    tc->add_option("--points", tc_points, "number of angles")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));

    CommonFlags v_f;
    std::vector<std::string> v_jobs;
    auto *ver = app.add_subcommand("verify", "run the invariant battery");
    ver->add_option("--job", v_jobs, "job files to check (repeatable)");
    ver->add_option("--out", v_f.out, "also write the table here");
    ver->add_option("--max-qubits", v_f.max_qubits,
                    "largest qubits per axis for full statevectors")
        ->check(CLI::Range(1, 30));
    ver->add_option("--threads", v_f.threads, "worker threads")
        ->check(CLI::Range(1u, 1024u));
    ver->add_option("--seed", v_f.seed, "overrides the jobs' seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kFailure;
    }

    try {
        if (*fit) {
            return cmd_fit(fit_f);
        }
        if (*dec) {
            return cmd_decompose(dec_f, dec_report, dec_ranks, dec_restarts);
        }
        if (*gc) {
            return cmd_gate_count(gc_f, gc_dims, gc_n, gc_rank);
        }
        if (*ex) {
            return cmd_export(ex_f, ex_report, ex_mo, ex_which, ex_rank,
                              ex_format);
        }
        if (*tc) {
            return cmd_two_center(tc_f, tc_n, tc_width, tc_a, tc_b, tc_points);
        }
        if (*ver) {
            return cmd_verify(v_f, v_jobs);
        }
    } catch (const mflo::app::SchemaError &e) {
        const std::string ptr = e.pointer();
        print_error("schema", e.what(), &ptr);
        return kSchema;
    } catch (const mflo::ResourceError &e) {
        print_error("resource", e.what());
        return kResource;
    } catch (const std::exception &e) {
        print_error("failure", e.what());
        return kFailure;
    }
    return kFailure;
}
