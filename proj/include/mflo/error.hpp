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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mflo {

/// Invalid argument or precondition violation.
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A memory or size guard was exceeded.
class ResourceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The input is well-formed but numerically degenerate (e.g. a function that
/// vanishes on every grid point).
class DegenerateInputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The overlap matrix could not be regularized. Carries the number of
/// eigen-directions that were discarded.
class ConditioningError : public std::runtime_error {
  public:
    ConditioningError(const std::string &what, std::size_t discarded)
        : std::runtime_error(what), discarded_(discarded) {}

    [[nodiscard]] std::size_t discarded_dimension() const noexcept {
        return discarded_;
    }

  private:
    std::size_t discarded_;
};

} // namespace mflo
