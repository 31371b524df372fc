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

#include <array>
#include <cstddef>
#include <utility>

#include "mflo/error.hpp"

namespace mflo {

/// Dense real 3-way tensor, last index fastest.
struct Tensor3 {
    std::array<std::size_t, 3> dims{0, 0, 0};
    Eigen::VectorXd data;

    Tensor3() = default;
    explicit Tensor3(std::array<std::size_t, 3> d)
        : dims(d), data(Eigen::VectorXd::Zero(
                       static_cast<Eigen::Index>(d[0] * d[1] * d[2]))) {}
    Tensor3(std::array<std::size_t, 3> d, Eigen::VectorXd values)
        : dims(d), data(std::move(values)) {
        if (static_cast<std::size_t>(data.size()) != d[0] * d[1] * d[2]) {
            throw ArgumentError("tensor data does not match its dimensions");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept {
        return dims[0] * dims[1] * dims[2];
    }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j,
                                    std::size_t k) const noexcept {
        return (i * dims[1] + j) * dims[2] + k;
    }
    double &operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[static_cast<Eigen::Index>(index(i, j, k))];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[static_cast<Eigen::Index>(index(i, j, k))];
    }
    /// Multi-index of flat position l.
    [[nodiscard]] std::array<std::size_t, 3>
    unravel(std::size_t l) const noexcept {
        return {l / (dims[1] * dims[2]), (l / dims[2]) % dims[1],
                l % dims[2]};
    }
};

/// Outer product x (x) y (x) z.
inline Tensor3 outer(const Eigen::VectorXd &x, const Eigen::VectorXd &y,
                     const Eigen::VectorXd &z) {
    Tensor3 t({static_cast<std::size_t>(x.size()),
               static_cast<std::size_t>(y.size()),
               static_cast<std::size_t>(z.size())});
    for (std::size_t i = 0; i < t.dims[0]; ++i) {
        for (std::size_t j = 0; j < t.dims[1]; ++j) {
            for (std::size_t k = 0; k < t.dims[2]; ++k) {
                t(i, j, k) = x[static_cast<Eigen::Index>(i)] *
                             y[static_cast<Eigen::Index>(j)] *
                             z[static_cast<Eigen::Index>(k)];
            }
        }
    }
    return t;
}

} // namespace mflo
