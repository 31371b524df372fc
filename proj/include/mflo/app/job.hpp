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
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mflo/basis.hpp"
#include "mflo/error.hpp"
#include "mflo/lorentzian.hpp"

namespace mflo::app {

using json = nlohmann::json;

inline constexpr int kJobSchemaVersion = 1;

/// Job file violates the schema. `pointer()` is a JSON pointer (RFC 6901)
/// to the offending field; empty for whole-document errors.
class SchemaError : public std::runtime_error {
  public:
    SchemaError(std::string pointer, const std::string &message)
        : std::runtime_error((pointer.empty() ? std::string("/") : pointer) +
                             ": " + message),
          pointer_(std::move(pointer)) {}

    [[nodiscard]] const std::string &pointer() const noexcept {
        return pointer_;
    }

  private:
    std::string pointer_;
};

struct AtomSpec {
    std::string label;
    Vec3 position{0.0, 0.0, 0.0};
};

struct MoSpec {
    std::string name;
    std::vector<double> coefficients;
};

struct OptimizerJob {
    int max_iterations = 2000;
    int restarts = 0;
    double gradient_tolerance = 1e-7;
    double min_width = 1e-3;
    double max_width = 50.0;
};

struct CpdJob {
    std::vector<std::size_t> ranks;
    int restarts = 8;
    std::uint64_t seed = 0;
};

struct OutputJob {
    std::string report;
    bool export_states = false;
    std::string state_format = "csv";
    bool convergence_csv = false;
};

struct Job {
    std::string name;
    std::vector<AtomSpec> atoms;
    /// AO centres already resolved from atom labels.
    std::vector<ContractedGaussianAO> aos;
    bool normalize_aos = false;
    std::vector<MoSpec> mos;
    SimulationCell cell;
    /// Resolved centres and initial widths.
    LorentzianBasisSpec spec;
    double alpha_pen = 0.0;
    OptimizerJob optimizer;
    CpdJob cpd;
    OutputJob outputs;
    /// The document as parsed, for embedding in reports.
    json source;

    [[nodiscard]] MolecularOrbital molecular_orbital(std::size_t i) const {
        MolecularOrbital mo;
        for (const auto &ao : aos) {
            mo.aos.push_back(normalize_aos ? renormalized(ao) : ao);
        }
        mo.coefficients = mos.at(i).coefficients;
        return mo;
    }
};

namespace detail {

inline std::string escape_token(const std::string &key) {
    std::string out;
    for (char c : key) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

inline std::string child(const std::string &ptr, const std::string &key) {
    return ptr + "/" + escape_token(key);
}

inline std::string child(const std::string &ptr, std::size_t index) {
    return ptr + "/" + std::to_string(index);
}

inline void expect_object(const json &j, const std::string &ptr) {
    if (!j.is_object()) {
        throw SchemaError(ptr, "expected an object");
    }
}

inline void check_keys(const json &obj, const std::string &ptr,
                       std::initializer_list<const char *> allowed) {
    expect_object(obj, ptr);
    for (const auto &item : obj.items()) {
        bool ok = false;
        for (const char *a : allowed) {
            ok = ok || item.key() == a;
        }
        if (!ok) {
            throw SchemaError(child(ptr, item.key()), "unknown field");
        }
    }
}

inline const json &require(const json &obj, const std::string &ptr,
                           const char *key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(child(ptr, key), "missing required field");
    }
    return *it;
}

inline double number(const json &j, const std::string &ptr) {
    if (!j.is_number()) {
        throw SchemaError(ptr, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw SchemaError(ptr, "expected a finite number");
    }
    return v;
}

inline double positive(const json &j, const std::string &ptr) {
    const double v = number(j, ptr);
    if (!(v > 0.0)) {
        throw SchemaError(ptr, "must be positive");
    }
    return v;
}

inline std::int64_t integer(const json &j, const std::string &ptr) {
    if (!j.is_number_integer()) {
        throw SchemaError(ptr, "expected an integer");
    }
    return j.get<std::int64_t>();
}

inline std::int64_t integer_in(const json &j, const std::string &ptr,
                               std::int64_t lo, std::int64_t hi) {
    const auto v = integer(j, ptr);
    if (v < lo || v > hi) {
        throw SchemaError(ptr, "must be in [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]");
    }
    return v;
}

inline bool boolean(const json &j, const std::string &ptr) {
    if (!j.is_boolean()) {
        throw SchemaError(ptr, "expected true or false");
    }
    return j.get<bool>();
}

inline std::string string(const json &j, const std::string &ptr) {
    if (!j.is_string()) {
        throw SchemaError(ptr, "expected a string");
    }
    return j.get<std::string>();
}

inline const json &array(const json &j, const std::string &ptr,
                         std::size_t min_size = 0) {
    if (!j.is_array()) {
        throw SchemaError(ptr, "expected an array");
    }
    if (j.size() < min_size) {
        throw SchemaError(ptr, "needs at least " + std::to_string(min_size) +
                                   " entries");
    }
    return j;
}

inline std::vector<double> numbers(const json &j, const std::string &ptr,
                                   std::size_t min_size = 0) {
    array(j, ptr, min_size);
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], child(ptr, i)));
    }
    return out;
}

inline Vec3 vec3(const json &j, const std::string &ptr) {
    array(j, ptr);
    if (j.size() != 3) {
        throw SchemaError(ptr, "expected exactly 3 numbers");
    }
    return {number(j[0], child(ptr, 0)), number(j[1], child(ptr, 1)),
            number(j[2], child(ptr, 2))};
}

/// A number applies to every axis; an array gives one value per axis.
inline Vec3 scalar_or_vec3(const json &j, const std::string &ptr) {
    if (j.is_number()) {
        const double v = number(j, ptr);
        return {v, v, v};
    }
    return vec3(j, ptr);
}

inline constexpr std::array<const char *, 3> kAxisNames{"x", "y", "z"};

inline ContractedGaussianAO parse_ao(const json &j, const std::string &ptr,
                                     const std::map<std::string, Vec3> &atoms) {
    check_keys(j, ptr, {"atom", "center", "exponents", "coefficients",
                        "powers"});
    ContractedGaussianAO ao;
    const auto eptr = child(ptr, "exponents");
    const json &ej = array(require(j, ptr, "exponents"), eptr, 1);
    for (std::size_t s = 0; s < ej.size(); ++s) {
        ao.exponents.push_back(positive(ej[s], child(eptr, s)));
    }
    const auto cptr = child(ptr, "coefficients");
    ao.coefficients = numbers(require(j, ptr, "coefficients"), cptr, 1);
    if (ao.coefficients.size() != ao.exponents.size()) {
        throw SchemaError(cptr, "needs one coefficient per exponent");
    }
    if (j.contains("powers")) {
        const auto pptr = child(ptr, "powers");
        const json &pj = array(j["powers"], pptr);
        if (pj.size() != 3) {
            throw SchemaError(pptr, "expected exactly 3 integers");
        }
        for (int nu = 0; nu < 3; ++nu) {
            ao.powers[static_cast<std::size_t>(nu)] = static_cast<int>(
                integer_in(pj[static_cast<std::size_t>(nu)],
                           child(pptr, static_cast<std::size_t>(nu)), 0, 16));
        }
    }
    const bool has_atom = j.contains("atom");
    const bool has_center = j.contains("center");
    if (has_atom == has_center) {
        throw SchemaError(ptr, "give exactly one of \"atom\" or \"center\"");
    }
    if (has_atom) {
        const auto aptr = child(ptr, "atom");
        const auto label = string(j["atom"], aptr);
        const auto it = atoms.find(label);
        if (it == atoms.end()) {
            throw SchemaError(aptr, "unknown atom label \"" + label + "\"");
        }
        ao.center = it->second;
    } else {
        ao.center = vec3(j["center"], child(ptr, "center"));
    }
    return ao;
}

inline void parse_molecule(const json &j, Job &job) {
    const std::string ptr = "/molecule";
    check_keys(j, ptr, {"atoms", "aos", "mos", "normalize_aos"});

    std::map<std::string, Vec3> atom_map;
    if (j.contains("atoms")) {
        const auto aptr = child(ptr, "atoms");
        const json &aj = array(j["atoms"], aptr);
        for (std::size_t i = 0; i < aj.size(); ++i) {
            const auto p = child(aptr, i);
            check_keys(aj[i], p, {"label", "position"});
            AtomSpec atom;
            atom.label = string(require(aj[i], p, "label"), child(p, "label"));
            atom.position =
                vec3(require(aj[i], p, "position"), child(p, "position"));
            if (!atom_map.emplace(atom.label, atom.position).second) {
                throw SchemaError(child(p, "label"), "duplicate atom label");
            }
            job.atoms.push_back(atom);
        }
    }

    const auto optr = child(ptr, "aos");
    const json &oj = array(require(j, ptr, "aos"), optr, 1);
    for (std::size_t i = 0; i < oj.size(); ++i) {
        job.aos.push_back(parse_ao(oj[i], child(optr, i), atom_map));
    }
    if (j.contains("normalize_aos")) {
        job.normalize_aos =
            boolean(j["normalize_aos"], child(ptr, "normalize_aos"));
    }

    const auto mptr = child(ptr, "mos");
    const json &mj = array(require(j, ptr, "mos"), mptr, 1);
    std::set<std::string> names;
    for (std::size_t i = 0; i < mj.size(); ++i) {
        const auto p = child(mptr, i);
        check_keys(mj[i], p, {"name", "coefficients"});
        MoSpec mo;
        mo.name = string(require(mj[i], p, "name"), child(p, "name"));
        if (mo.name.empty() || !names.insert(mo.name).second) {
            throw SchemaError(child(p, "name"),
                              "MO names must be non-empty and unique");
        }
        const auto cptr = child(p, "coefficients");
        mo.coefficients = numbers(require(mj[i], p, "coefficients"), cptr);
        if (mo.coefficients.size() != job.aos.size()) {
            throw SchemaError(cptr, "needs one coefficient per AO (" +
                                        std::to_string(job.aos.size()) + ")");
        }
        bool nonzero = false;
        for (double c : mo.coefficients) {
            nonzero = nonzero || c != 0.0;
        }
        if (!nonzero) {
            throw SchemaError(cptr, "all coefficients are zero");
        }
        job.mos.push_back(std::move(mo));
    }
}

inline void parse_cell(const json &j, Job &job) {
    const std::string ptr = "/cell";
    check_keys(j, ptr, {"origin", "edge_lengths", "n_qe"});
    job.cell.origin = vec3(require(j, ptr, "origin"), child(ptr, "origin"));
    const auto eptr = child(ptr, "edge_lengths");
    job.cell.edge_lengths = scalar_or_vec3(require(j, ptr, "edge_lengths"), eptr);
    for (double len : job.cell.edge_lengths) {
        if (!(len > 0.0)) {
            throw SchemaError(eptr, "edge lengths must be positive");
        }
    }
    job.cell.qubits_per_axis = static_cast<int>(
        integer_in(require(j, ptr, "n_qe"), child(ptr, "n_qe"), 1, 30));
}

inline void parse_lorentzian(const json &j, Job &job) {
    const std::string ptr = "/lorentzian";
    check_keys(j, ptr, {"centers", "box", "widths", "alpha_pen"});
    const int n = job.cell.qubits_per_axis;
    const auto big_n = std::int64_t{1} << n;

    const bool has_centers = j.contains("centers");
    const bool has_box = j.contains("box");
    if (has_centers == has_box) {
        throw SchemaError(ptr, "give exactly one of \"centers\" or \"box\"");
    }
    if (has_centers) {
        const auto cptr = child(ptr, "centers");
        check_keys(j["centers"], cptr, {"x", "y", "z"});
        for (int nu = 0; nu < 3; ++nu) {
            const auto axis = kAxisNames[static_cast<std::size_t>(nu)];
            const auto aptr = child(cptr, axis);
            const json &aj = array(require(j["centers"], cptr, axis), aptr, 1);
            for (std::size_t l = 0; l < aj.size(); ++l) {
                job.spec.directions[static_cast<std::size_t>(nu)]
                    .centers.push_back(
                        integer_in(aj[l], child(aptr, l), 0, big_n - 1));
            }
        }
    } else {
        const auto bptr = child(ptr, "box");
        const json &bj = j["box"];
        check_keys(bj, bptr, {"box_min", "box_edges", "counts"});
        const Vec3 lo = vec3(require(bj, bptr, "box_min"), child(bptr, "box_min"));
        const auto eptr = child(bptr, "box_edges");
        const Vec3 edges = scalar_or_vec3(require(bj, bptr, "box_edges"), eptr);
        const auto nptr = child(bptr, "counts");
        const json &cj = array(require(bj, bptr, "counts"), nptr);
        if (cj.size() != 3) {
            throw SchemaError(nptr, "expected exactly 3 integers");
        }
        for (int nu = 0; nu < 3; ++nu) {
            const auto u = static_cast<std::size_t>(nu);
            const auto count = static_cast<std::size_t>(
                integer_in(cj[u], child(nptr, u), 1, 1024));
            if (!(edges[u] > 0.0)) {
                throw SchemaError(eptr, "box edges must be positive");
            }
            try {
                job.spec.directions[u].centers =
                    box_centers(lo[u], edges[u], count, job.cell, nu);
            } catch (const ArgumentError &e) {
                throw SchemaError(bptr, e.what());
            }
        }
    }

    const auto wptr = child(ptr, "widths");
    const json &wj = require(j, ptr, "widths");
    for (int nu = 0; nu < 3; ++nu) {
        const auto u = static_cast<std::size_t>(nu);
        auto &dir = job.spec.directions[u];
        const json *axis_j = &wj;
        std::string axis_ptr = wptr;
        if (wj.is_object()) {
            check_keys(wj, wptr, {"x", "y", "z"});
            axis_ptr = child(wptr, kAxisNames[u]);
            axis_j = &require(wj, wptr, kAxisNames[u]);
        } else if (!wj.is_number()) {
            throw SchemaError(wptr, "expected a number or an object with "
                                    "x, y and z entries");
        }
        if (axis_j->is_number()) {
            dir.widths.assign(dir.centers.size(), positive(*axis_j, axis_ptr));
        } else {
            const json &aj = array(*axis_j, axis_ptr);
            if (aj.size() != dir.centers.size()) {
                throw SchemaError(axis_ptr, "needs one width per center (" +
                                                std::to_string(
                                                    dir.centers.size()) +
                                                ")");
            }
            for (std::size_t l = 0; l < aj.size(); ++l) {
                dir.widths.push_back(positive(aj[l], child(axis_ptr, l)));
            }
        }
        std::set<std::pair<double, std::int64_t>> seen;
        for (std::size_t l = 0; l < dir.size(); ++l) {
            if (!seen.emplace(dir.widths[l], dir.centers[l]).second) {
                throw SchemaError(
                    has_centers
                        ? child(child(child(ptr, "centers"), kAxisNames[u]), l)
                        : child(ptr, "box"),
                    "duplicate (width, center) pair along " +
                        std::string(kAxisNames[u]));
            }
        }
    }

    if (j.contains("alpha_pen")) {
        const auto aptr = child(ptr, "alpha_pen");
        job.alpha_pen = number(j["alpha_pen"], aptr);
        if (job.alpha_pen < 0.0) {
            throw SchemaError(aptr, "must be >= 0");
        }
    }
}

inline void parse_optimizer(const json &j, Job &job) {
    const std::string ptr = "/optimizer";
    check_keys(j, ptr, {"max_iterations", "restarts", "gradient_tolerance",
                        "min_width", "max_width"});
    auto &o = job.optimizer;
    if (j.contains("max_iterations")) {
        o.max_iterations = static_cast<int>(integer_in(
            j["max_iterations"], child(ptr, "max_iterations"), 0, 1000000));
    }
    if (j.contains("restarts")) {
        o.restarts = static_cast<int>(
            integer_in(j["restarts"], child(ptr, "restarts"), 0, 1000));
    }
    if (j.contains("gradient_tolerance")) {
        o.gradient_tolerance = positive(j["gradient_tolerance"],
                                        child(ptr, "gradient_tolerance"));
    }
    if (j.contains("min_width")) {
        o.min_width = positive(j["min_width"], child(ptr, "min_width"));
    }
    if (j.contains("max_width")) {
        o.max_width = positive(j["max_width"], child(ptr, "max_width"));
    }
    if (!(o.max_width > o.min_width)) {
        throw SchemaError(child(ptr, "max_width"),
                          "must exceed min_width");
    }
}

inline void parse_cpd(const json &j, Job &job) {
    const std::string ptr = "/cpd";
    check_keys(j, ptr, {"ranks", "restarts", "seed"});
    const auto n_prod = static_cast<std::int64_t>(job.spec.num_products());
    if (j.contains("ranks")) {
        const auto rptr = child(ptr, "ranks");
        const json &rj = array(j["ranks"], rptr);
        for (std::size_t i = 0; i < rj.size(); ++i) {
            job.cpd.ranks.push_back(static_cast<std::size_t>(
                integer_in(rj[i], child(rptr, i), 1, n_prod)));
        }
    }
    if (j.contains("restarts")) {
        job.cpd.restarts = static_cast<int>(
            integer_in(j["restarts"], child(ptr, "restarts"), 1, 1000));
    }
    if (j.contains("seed")) {
        const auto sptr = child(ptr, "seed");
        if (!j["seed"].is_number_unsigned()) {
            throw SchemaError(sptr, "expected a non-negative integer");
        }
        job.cpd.seed = j["seed"].get<std::uint64_t>();
    }
}

inline void parse_outputs(const json &j, Job &job) {
    const std::string ptr = "/outputs";
    check_keys(j, ptr, {"report", "export_states", "state_format",
                        "convergence_csv"});
    if (j.contains("report")) {
        job.outputs.report = string(j["report"], child(ptr, "report"));
        if (job.outputs.report.empty()) {
            throw SchemaError(child(ptr, "report"), "must not be empty");
        }
    }
    if (j.contains("export_states")) {
        job.outputs.export_states =
            boolean(j["export_states"], child(ptr, "export_states"));
    }
    if (j.contains("state_format")) {
        const auto fptr = child(ptr, "state_format");
        job.outputs.state_format = string(j["state_format"], fptr);
        if (job.outputs.state_format != "csv" &&
            job.outputs.state_format != "binary") {
            throw SchemaError(fptr, "must be \"csv\" or \"binary\"");
        }
    }
    if (j.contains("convergence_csv")) {
        job.outputs.convergence_csv =
            boolean(j["convergence_csv"], child(ptr, "convergence_csv"));
    }
}

} // namespace detail

/// Validates and resolves a job document.
inline Job parse_job(const json &doc) {
    detail::check_keys(doc, "", {"schema", "name", "molecule", "cell",
                                 "lorentzian", "optimizer", "cpd", "outputs"});
    const auto version = detail::integer(detail::require(doc, "", "schema"),
                                         "/schema");
    if (version != kJobSchemaVersion) {
        throw SchemaError("/schema", "unsupported schema version " +
                                         std::to_string(version));
    }
    Job job;
    job.source = doc;
    job.name = detail::string(detail::require(doc, "", "name"), "/name");
    if (job.name.empty()) {
        throw SchemaError("/name", "must not be empty");
    }
    detail::parse_molecule(detail::require(doc, "", "molecule"), job);
    detail::parse_cell(detail::require(doc, "", "cell"), job);
    detail::parse_lorentzian(detail::require(doc, "", "lorentzian"), job);
    if (doc.contains("optimizer")) {
        detail::parse_optimizer(doc["optimizer"], job);
    }
    if (doc.contains("cpd")) {
        detail::parse_cpd(doc["cpd"], job);
    }
    if (doc.contains("outputs")) {
        detail::parse_outputs(doc["outputs"], job);
    }
    if (job.outputs.report.empty()) {
        job.outputs.report = job.name + ".report.json";
    }
    return job;
}

inline json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ArgumentError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw SchemaError("", std::string("not valid JSON: ") + e.what());
    }
}

inline Job load_job(const std::filesystem::path &path) {
    return parse_job(read_json_file(path));
}

} // namespace mflo::app
