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
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mflo/basis.hpp"
#include "mflo/error.hpp"

namespace mflo::app {

/// Which state an exported file holds.
enum class StateTag : std::uint32_t { Ideal = 0, Tucker = 1, Canonical = 2 };

inline const char *to_string(StateTag tag) {
    switch (tag) {
    case StateTag::Ideal:
        return "ideal";
    case StateTag::Tucker:
        return "tucker";
    case StateTag::Canonical:
        return "canonical";
    }
    return "unknown";
}

inline StateTag state_tag_from_string(const std::string &s) {
    if (s == "ideal") {
        return StateTag::Ideal;
    }
    if (s == "tucker") {
        return StateTag::Tucker;
    }
    if (s == "canonical") {
        return StateTag::Canonical;
    }
    throw ArgumentError("unknown state \"" + s +
                        "\" (expected ideal, tucker or canonical)");
}

inline constexpr std::array<char, 4> kStateMagic{'M', 'F', 'L', 'O'};
inline constexpr std::uint32_t kStateFormatVersion = 1;
inline constexpr std::size_t kStateHeaderBytes = 32;

/// k_x,k_y,k_z,amplitude with k_z fastest.
inline void write_state_csv(std::ostream &os, const GridState &state) {
    const auto old_precision = os.precision(17);
    const std::size_t n = std::size_t{1} << state.qubits_per_axis;
    os << "k_x,k_y,k_z,amplitude\n";
    for (std::size_t kx = 0; kx < n; ++kx) {
        for (std::size_t ky = 0; ky < n; ++ky) {
            for (std::size_t kz = 0; kz < n; ++kz) {
                os << kx << ',' << ky << ',' << kz << ','
                   << state.amplitudes[state.index(kx, ky, kz)] << '\n';
            }
        }
    }
    os.precision(old_precision);
}

inline GridState read_state_csv(std::istream &is) {
    std::string line;
    if (!std::getline(is, line) || line != "k_x,k_y,k_z,amplitude") {
        throw ArgumentError("state CSV: missing header");
    }
    std::vector<double> amps;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto last = line.rfind(',');
        if (last == std::string::npos) {
            throw ArgumentError("state CSV: malformed row");
        }
        amps.push_back(std::stod(line.substr(last + 1)));
    }
    int n = 0;
    while ((std::size_t{1} << (3 * n)) < amps.size()) {
        ++n;
    }
    if ((std::size_t{1} << (3 * n)) != amps.size()) {
        throw ArgumentError("state CSV: row count is not N^3");
    }
    return GridState{n, std::move(amps)};
}

namespace detail {

template <typename T> void put_le(std::ostream &os, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    os.write(reinterpret_cast<const char *>(bytes.data()), sizeof(T));
}

template <typename T> T get_le(std::istream &is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    is.read(reinterpret_cast<char *>(bytes.data()), sizeof(T));
    if (!is) {
        throw ArgumentError("state file is truncated");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

} // namespace detail

/// 32-byte header: magic "MFLO", u32 version, u32 n_qe, u32 state tag,
/// u64 amplitude count, 8 zero bytes. Then little-endian doubles.
inline void write_state_binary(std::ostream &os, const GridState &state,
                               StateTag tag) {
    os.write(kStateMagic.data(), kStateMagic.size());
    detail::put_le<std::uint32_t>(os, kStateFormatVersion);
    detail::put_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(state.qubits_per_axis));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tag));
    detail::put_le<std::uint64_t>(os, state.amplitudes.size());
    detail::put_le<std::uint64_t>(os, 0);
    for (double a : state.amplitudes) {
        detail::put_le<double>(os, a);
    }
}

struct LoadedState {
    GridState state;
    StateTag tag = StateTag::Ideal;
};

inline LoadedState read_state_binary(std::istream &is) {
    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kStateMagic) {
        throw ArgumentError("not an MFLO state file");
    }
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kStateFormatVersion) {
        throw ArgumentError("unsupported state file version " +
                            std::to_string(version));
    }
    LoadedState out;
    out.state.qubits_per_axis =
        static_cast<int>(detail::get_le<std::uint32_t>(is));
    const auto tag = detail::get_le<std::uint32_t>(is);
    if (tag > 2) {
        throw ArgumentError("unknown state tag " + std::to_string(tag));
    }
    out.tag = static_cast<StateTag>(tag);
    const auto count = detail::get_le<std::uint64_t>(is);
    detail::get_le<std::uint64_t>(is);
    const int n = out.state.qubits_per_axis;
    if (n < 1 || n > 20 || count != (std::uint64_t{1} << (3 * n))) {
        throw ArgumentError("state file header is inconsistent");
    }
    out.state.amplitudes.resize(count);
    for (auto &a : out.state.amplitudes) {
        a = detail::get_le<double>(is);
    }
    return out;
}

} // namespace mflo::app
