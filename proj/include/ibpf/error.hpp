// Copyright 2026 The ibpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ibpf {

/// Coarse failure classes. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
    usage,      // bad command line or configuration
    input,      // malformed or inconsistent input data
    numerical,  // NaN densities, hazard accounting failures
    internal,
};

std::string_view to_string(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorCategory::usage, msg); }
[[noreturn]] inline void fail_input(const std::string& msg) { throw Error(ErrorCategory::input, msg); }
[[noreturn]] inline void fail_numerical(const std::string& msg) { throw Error(ErrorCategory::numerical, msg); }

}  // namespace ibpf
