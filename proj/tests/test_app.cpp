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


#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

#include "mflo/app/job.hpp"
#include "mflo/app/pipeline.hpp"
#include "mflo/app/report.hpp"
#include "mflo/app/state_io.hpp"
#include "mflo/app/verify.hpp"

namespace mflo::app {
namespace {

const std::filesystem::path kJobs = MFLO_JOBS_DIR;

json small_job() {
    return json::parse(R"({
      "schema": 1,
      "name": "pair",
      "molecule": {
        "atoms": [{"label": "A", "position": [-0.8, 0.0, 0.0]},
                  {"label": "B", "position": [0.8, 0.0, 0.0]}],
        "aos": [{"atom": "A", "exponents": [1.1], "coefficients": [1.0]},
                {"atom": "B", "exponents": [0.9], "coefficients": [1.0]}],
        "normalize_aos": true,
        "mos": [{"name": "bond", "coefficients": [1.0, 1.0]}]
      },
      "cell": {"origin": [-4.0, -4.0, -4.0], "edge_lengths": 8.0, "n_qe": 4},
      "lorentzian": {
        "centers": {"x": [6, 10], "y": [8], "z": [8]},
        "widths": 0.7,
        "alpha_pen": 0.05
      },
      "cpd": {"ranks": [1, 2], "seed": 3}
    })");
}

std::string pointer_of(const json &doc) {
    try {
        parse_job(doc);
    } catch (const SchemaError &e) {
        return e.pointer();
    }
    return "<accepted>";
}

TEST(JobSchema, ParsesShippedJobs) {
    for (const char *name : {"h2_like.json", "h2_lumo_outward.json",
                             "single_gaussian.json", "two_gaussians_box.json"}) {
        SCOPED_TRACE(name);
        const Job job = load_job(kJobs / name);
        EXPECT_FALSE(job.mos.empty());
        EXPECT_NO_THROW(job.spec.validate(job.cell.qubits_per_axis));
    }
    const Job h2 = load_job(kJobs / "h2_like.json");
    EXPECT_EQ(h2.spec.dims(), (std::array<std::size_t, 3>{2, 1, 1}));
    EXPECT_EQ(h2.cell.qubits_per_axis, 6);
    EXPECT_DOUBLE_EQ(h2.aos[1].center[0], 0.7);
    EXPECT_EQ(h2.outputs.report, "h2_like.report.json");
}

TEST(JobSchema, ReportsPointerToOffendingField) {
    auto doc = small_job();
    doc["cell"]["extra"] = 1;
    EXPECT_EQ(pointer_of(doc), "/cell/extra");

    doc = small_job();
    doc["lorentzian"]["centers"]["x"][1] = 16;
    EXPECT_EQ(pointer_of(doc), "/lorentzian/centers/x/1");

    doc = small_job();
    doc["molecule"]["mos"][0]["coefficients"] = {1.0};
    EXPECT_EQ(pointer_of(doc), "/molecule/mos/0/coefficients");

    doc = small_job();
    doc["molecule"]["aos"][1]["atom"] = "C";
    EXPECT_EQ(pointer_of(doc), "/molecule/aos/1/atom");

    doc = small_job();
    doc.erase("cell");
    EXPECT_EQ(pointer_of(doc), "/cell");

    doc = small_job();
    doc["schema"] = 2;
    EXPECT_EQ(pointer_of(doc), "/schema");

    doc = small_job();
    doc["lorentzian"]["widths"] = json{{"x", {0.5}}, {"y", 1.0}, {"z", 1.0}};
    EXPECT_EQ(pointer_of(doc), "/lorentzian/widths/x");

    doc = small_job();
    doc["lorentzian"]["centers"]["x"] = {6, 6};
    EXPECT_EQ(pointer_of(doc), "/lorentzian/centers/x/1");

    doc = small_job();
    doc["cpd"]["ranks"] = {1, 3};
    EXPECT_EQ(pointer_of(doc), "/cpd/ranks/1");

    doc = small_job();
    doc["lorentzian"]["box"] = json{
        {"box_min", {0, 0, 0}}, {"box_edges", 1.0}, {"counts", {1, 1, 1}}};
    EXPECT_EQ(pointer_of(doc), "/lorentzian");

    doc = small_job();
    doc["optimizer"] = json{{"min_width", -1.0}};
    EXPECT_EQ(pointer_of(doc), "/optimizer/min_width");
}

TEST(JobSchema, RejectsMalformedJson) {
    const auto path =
        std::filesystem::temp_directory_path() / "mflo_bad_job.json";
    std::ofstream(path) << "{\"schema\": 1,";
    try {
        load_job(path);
        FAIL() << "accepted malformed JSON";
    } catch (const SchemaError &e) {
        EXPECT_EQ(e.pointer(), "");
    }
    std::filesystem::remove(path);
}

TEST(JobSchema, BoxGeneratorPlacesCentres) {
    auto doc = small_job();
    doc["lorentzian"].erase("centers");
    doc["lorentzian"]["box"] = json{{"box_min", {-1.0, -1.0, -1.0}},
                                    {"box_edges", {2.0, 2.0, 2.0}},
                                    {"counts", {3, 2, 1}}};
    const Job job = parse_job(doc);
    EXPECT_EQ(job.spec.dims(), (std::array<std::size_t, 3>{3, 2, 1}));
    EXPECT_EQ(job.spec.directions[2].centers,
              (std::vector<std::int64_t>{8}));
    EXPECT_EQ(job.spec.directions[0].widths.size(), 3u);
}

TEST(Report, RoundTripIsLossless) {
    const Job job = parse_job(small_job());
    FitReport report = fit_job(job);
    const std::string first = serialize_report(report);
    FitReport back = parse_report(first);
    EXPECT_EQ(serialize_report(back), first);
    ASSERT_EQ(back.mos.size(), 1u);
    const auto &a = report.mos[0];
    const auto &b = back.mos[0];
    EXPECT_EQ(a.core, b.core);
    EXPECT_EQ(a.spec.flat_widths(), b.spec.flat_widths());
    EXPECT_EQ(a.squared_overlap, b.squared_overlap);
    EXPECT_EQ(a.ranks.size(), b.ranks.size());
    EXPECT_EQ(a.ranks[1].lambda, b.ranks[1].lambda);
    EXPECT_EQ(a.ranks[1].u[2], b.ranks[1].u[2]);
    EXPECT_EQ(back.job, job.source);
}

TEST(Report, IdentitiesAreRecheckedOnWrite) {
    const Job job = parse_job(small_job());
    FitReport report = fit_job(job);
    serialize_report(report);
    const auto &c = report.mos[0].checks;
    EXPECT_TRUE(c.passed);
    EXPECT_LE(c.overlap_residual, 1e-10);
    EXPECT_LE(c.kappa_residual, 1e-10);
    EXPECT_LE(c.probability_oracle_residual, 1e-10);

    // A tampered number is caught by the next write.
    report.mos[0].squared_overlap += 1e-6;
    const auto doc = json::parse(serialize_report(report));
    EXPECT_FALSE(doc["all_checks_passed"].get<bool>());
    EXPECT_FALSE(report.mos[0].checks.passed);
}

TEST(Report, ProbabilitiesInRange) {
    const Job job = load_job(kJobs / "h2_like.json");
    const FitReport report = fit_job(job);
    for (const auto &m : report.mos) {
        EXPECT_GT(m.success_probability, 0.0);
        EXPECT_LE(m.success_probability, 1.0);
        EXPECT_TRUE(m.checks.passed);
        EXPECT_EQ(m.cnots.total, 63);
    }
}

TEST(Report, SingleProductBasis) {
    const Job job = load_job(kJobs / "single_gaussian.json");
    const FitReport report = fit_job(job);
    const auto &m = report.mos[0];
    ASSERT_EQ(m.core.size(), 1u);
    EXPECT_NEAR(std::abs(m.core[0]), 1.0, 1e-14);
    EXPECT_NEAR(m.success_probability, 1.0, 1e-14);
    EXPECT_EQ(m.cnots.lorentzian_ancillae, 0);
    // The component sum is one above the closed form when n_A^L = 0.
    EXPECT_EQ(m.cnots.total,
              tucker_total_cnots({1, 1, 1}, job.cell.qubits_per_axis) + 1);
    EXPECT_EQ(m.cnots.amplitude, 0);
}

TEST(Report, DeterministicAcrossRunsAndThreads) {
    const Job job = load_job(kJobs / "two_gaussians_box.json");
    RunOptions one;
    RunOptions three;
    three.threads = 3;
    FitReport a = fit_job(job, one);
    FitReport b = fit_job(job, one);
    FitReport c = fit_job(job, three);
    const auto sa = serialize_report(a);
    EXPECT_EQ(sa, serialize_report(b));
    EXPECT_EQ(sa, serialize_report(c));
}

TEST(Report, SeedOverrideIsRecorded) {
    const Job job = parse_job(small_job());
    RunOptions opt;
    opt.seed = 99;
    EXPECT_EQ(fit_job(job, opt).seed, 99u);
    EXPECT_EQ(fit_job(job).seed, 3u);
}

TEST(Decompose, RewritesRankSweep) {
    const Job job = parse_job(small_job());
    FitReport report = fit_job(job);
    decompose_report(report, {2, 1}, 4, 5, 1);
    ASSERT_EQ(report.mos[0].ranks.size(), 2u);
    EXPECT_EQ(report.mos[0].ranks[0].rank, 1u);
    EXPECT_EQ(report.mos[0].ranks[1].rank, 2u);
    EXPECT_LE(report.mos[0].ranks[1].deviation,
              report.mos[0].ranks[0].deviation + 1e-12);
    EXPECT_THROW(decompose_report(report, {3}, 4, 5, 1), ArgumentError);
}

GridState sample_state() {
    GridState g;
    g.qubits_per_axis = 2;
    for (int i = 0; i < 64; ++i) {
        g.amplitudes.push_back(std::sin(0.37 * i) / (1.0 + i));
    }
    return g;
}

TEST(StateIo, CsvRoundTrip) {
    const auto g = sample_state();
    std::stringstream ss;
    write_state_csv(ss, g);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "k_x,k_y,k_z,amplitude");
    std::string row;
    std::getline(ss, row);
    EXPECT_EQ(row.substr(0, 6), "0,0,0,");
    std::getline(ss, row);
    EXPECT_EQ(row.substr(0, 6), "0,0,1,");
    ss.seekg(0);
    const auto back = read_state_csv(ss);
    EXPECT_EQ(back.qubits_per_axis, 2);
    EXPECT_EQ(back.amplitudes, g.amplitudes);
}

TEST(StateIo, BinaryLayout) {
    const auto g = sample_state();
    std::stringstream ss;
    write_state_binary(ss, g, StateTag::Tucker);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 32u + 64u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "MFLO");
    auto u32 = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (int b = 3; b >= 0; --b) {
            v = (v << 8) | static_cast<unsigned char>(bytes[off + b]);
        }
        return v;
    };
    EXPECT_EQ(u32(4), 1u);
    EXPECT_EQ(u32(8), 2u);
    EXPECT_EQ(u32(12), 1u);
    const auto back = read_state_binary(ss);
    EXPECT_EQ(back.tag, StateTag::Tucker);
    EXPECT_EQ(back.state.amplitudes, g.amplitudes);
}

TEST(StateIo, RejectsCorruptFiles) {
    std::stringstream bad("XXXX0000");
    EXPECT_THROW(read_state_binary(bad), ArgumentError);
    const auto g = sample_state();
    std::stringstream ss;
    write_state_binary(ss, g, StateTag::Ideal);
    std::stringstream truncated(ss.str().substr(0, 100));
    EXPECT_THROW(read_state_binary(truncated), ArgumentError);
    std::stringstream csv("k_x,k_y,k_z,amplitude\n0,0,0,1\n0,0,1,2\n");
    EXPECT_THROW(read_state_csv(csv), ArgumentError);
}

class Exports : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() / "mflo_exports";
        std::filesystem::remove_all(dir_);
        const Job job = parse_job(small_job());
        report_ = fit_job(job);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path dir_;
    FitReport report_;
};

TEST_F(Exports, IdealExportHasUnitNorm) {
    const auto p = dir_ / "ideal.csv";
    write_state_file(p, state_from_report(report_, "bond", StateTag::Ideal, {}),
                     StateTag::Ideal, "csv");
    std::ifstream in(p);
    const auto g = read_state_csv(in);
    EXPECT_NEAR(g.norm_squared(), 1.0, 1e-12);
}

TEST_F(Exports, TuckerOverlapMatchesReport) {
    const auto ideal = state_from_report(report_, "bond", StateTag::Ideal, {});
    const auto fit = state_from_report(report_, "bond", StateTag::Tucker, {});
    const double ov = dot(ideal, fit);
    EXPECT_NEAR(ov * ov, report_.mos[0].squared_overlap, 1e-8);
}

TEST_F(Exports, BinaryAndCsvAgree) {
    for (StateTag tag :
         {StateTag::Ideal, StateTag::Tucker, StateTag::Canonical}) {
        const auto g = state_from_report(report_, "bond", tag, {});
        write_state_file(dir_ / "s.csv", g, tag, "csv");
        write_state_file(dir_ / "s.bin", g, tag, "binary");
        std::ifstream c(dir_ / "s.csv");
        std::ifstream b(dir_ / "s.bin", std::ios::binary);
        const auto from_csv = read_state_csv(c);
        const auto from_bin = read_state_binary(b);
        EXPECT_EQ(from_bin.tag, tag);
        EXPECT_EQ(from_csv.amplitudes, from_bin.state.amplitudes);
    }
}

TEST_F(Exports, CanonicalExportIsNormalized) {
    const auto g =
        state_from_report(report_, "bond", StateTag::Canonical, std::size_t{1});
    EXPECT_NEAR(g.norm_squared(), 1.0, 1e-12);
    EXPECT_THROW(
        state_from_report(report_, "bond", StateTag::Canonical, std::size_t{5}),
        ArgumentError);
}

TEST_F(Exports, GuardRaisesResourceError) {
    RunOptions opt;
    opt.max_qubits = 3;
    EXPECT_THROW(state_from_report(report_, "bond", StateTag::Tucker, {}, opt),
                 ResourceError);
}

TEST_F(Exports, RunFitWritesReportAndSideFiles) {
    auto doc = small_job();
    doc["outputs"] = json{{"export_states", true},
                          {"state_format", "binary"},
                          {"convergence_csv", true}};
    const Job job = parse_job(doc);
    RunOptions opt;
    opt.report_path = dir_ / "pair.report.json";
    const auto out = run_fit(job, opt);
    EXPECT_TRUE(std::filesystem::exists(out.report));
    EXPECT_EQ(out.files.size(), 4u);
    for (const auto &f : out.files) {
        EXPECT_TRUE(std::filesystem::exists(f)) << f;
    }
    EXPECT_TRUE(std::filesystem::exists(dir_ / "pair.bond.tucker.bin"));
    std::ifstream conv(dir_ / "pair.convergence.csv");
    std::string header;
    std::getline(conv, header);
    EXPECT_EQ(header, "mo,iteration,fidelity");
}

TEST_F(Exports, ReportSurvivesExportGuard) {
    auto doc = small_job();
    doc["outputs"] = json{{"export_states", true}};
    const Job job = parse_job(doc);
    RunOptions opt;
    opt.report_path = dir_ / "guarded.report.json";
    opt.max_qubits = 2;
    EXPECT_THROW(run_fit(job, opt), ResourceError);
    EXPECT_TRUE(std::filesystem::exists(opt.report_path));
}

TEST(Verify, BuiltinChecksPass) {
    for (const auto &c : builtin_checks()) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
}

TEST(Verify, CorruptedGateConstantFails) {
    Expectations e;
    e.water[2].canonical += 1;
    const auto checks = builtin_checks(e);
    EXPECT_FALSE(checks[0].passed);
    EXPECT_NE(checks[0].detail.find("3x3x2 canonical"), std::string::npos);
    EXPECT_TRUE(checks[1].passed);

    Expectations h2;
    h2.h2_tucker = 64;
    EXPECT_FALSE(check_gate_table(h2).passed);
}

TEST(Verify, JobChecksPass) {
    const Job job = parse_job(small_job());
    const auto result = verify({job});
    EXPECT_TRUE(result.passed());
    EXPECT_EQ(result.checks.size(), 8u);
    std::ostringstream os;
    print_checks(os, result);
    EXPECT_NE(os.str().find("all 8 checks passed"), std::string::npos);
}

} // namespace
} // namespace mflo::app
