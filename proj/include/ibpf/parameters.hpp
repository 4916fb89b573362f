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

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ibpf {

enum class ParamKind { shared, unit_specific };
enum class Transform { identity, log, logit };

std::string_view to_string(ParamKind k) noexcept;
std::string_view to_string(Transform t) noexcept;
ParamKind parse_param_kind(std::string_view s);
Transform parse_transform(std::string_view s);

struct ParameterEntry {
    std::string name;
    ParamKind kind = ParamKind::shared;
    Transform transform = Transform::identity;
    bool ivp = false;  // initial value parameter: only affects the state at t0
};

/// Declares which parameters are shared between units and which are
/// unit-specific. Column d of every ParameterMatrix corresponds to entry d.
class ParameterLayout {
public:
    ParameterLayout(std::vector<ParameterEntry> entries, std::size_t units);

    std::size_t units() const noexcept { return units_; }
    std::size_t dim() const noexcept { return entries_.size(); }
    const ParameterEntry& entry(std::size_t d) const { return entries_.at(d); }
    std::span<const ParameterEntry> entries() const noexcept { return entries_; }

    std::optional<std::size_t> find(std::string_view name) const noexcept;
    std::size_t index(std::string_view name) const;  // throws on unknown name

    std::span<const std::size_t> shared_columns() const noexcept { return shared_; }
    std::span<const std::size_t> unit_specific_columns() const noexcept { return specific_; }

    /// Length of the flat vector (phi, psi_1, ..., psi_U).
    std::size_t flat_size() const noexcept { return shared_.size() + units_ * specific_.size(); }

    bool operator==(const ParameterLayout& other) const noexcept;

private:
    std::vector<ParameterEntry> entries_;
    std::size_t units_;
    std::vector<std::size_t> shared_;
    std::vector<std::size_t> specific_;
};

using LayoutPtr = std::shared_ptr<const ParameterLayout>;

/// U x D parameter values on the natural scale. Shared parameters occupy a
/// column like any other; in the extended model each unit holds its own copy.
class ParameterMatrix {
public:
    explicit ParameterMatrix(LayoutPtr layout);
    ParameterMatrix(LayoutPtr layout, std::vector<double> values);

    std::size_t units() const noexcept { return layout_->units(); }
    std::size_t dim() const noexcept { return layout_->dim(); }
    const ParameterLayout& layout() const noexcept { return *layout_; }
    const LayoutPtr& layout_ptr() const noexcept { return layout_; }

    double operator()(std::size_t u, std::size_t d) const noexcept { return values_[u * dim() + d]; }
    double& operator()(std::size_t u, std::size_t d) noexcept { return values_[u * dim() + d]; }

    std::span<const double> row(std::size_t u) const noexcept {
        return std::span<const double>(values_).subspan(u * dim(), dim());
    }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double get(std::string_view name, std::size_t u = 0) const { return (*this)(u, layout_->index(name)); }
    void set(std::string_view name, double value);  // all units
    void set(std::string_view name, std::size_t u, double value) { (*this)(u, layout_->index(name)) = value; }

    /// Throws if any entry lies outside the closed domain of its transform.
    void validate() const;

private:
    LayoutPtr layout_;
    std::vector<double> values_;
};

/// Builds the extended-model matrix from (phi, psi_1, ..., psi_U).
ParameterMatrix expand_shared(std::span<const double> theta, LayoutPtr layout);

/// Inverse of expand_shared. Shared columns are averaged across units on the
/// estimation scale and back-transformed.
std::vector<double> collapse(const ParameterMatrix& pm);

/// Scalar transforms. Boundary values map to infinities (log 0 = -inf,
/// logit 0 = -inf, logit 1 = +inf); values outside the closed domain throw.
double to_estimation_scale(double x, Transform t);
double from_estimation_scale(double y, Transform t) noexcept;

void to_estimation_scale(std::span<const double> natural, const ParameterLayout& layout, std::span<double> out);
void from_estimation_scale(std::span<const double> est, const ParameterLayout& layout, std::span<double> out) noexcept;

std::vector<double> to_estimation_scale(const ParameterMatrix& pm);
ParameterMatrix from_estimation_scale(std::span<const double> est, LayoutPtr layout);

// Parameter documents:
// {"units": U, "parameters": [{"name", "kind", "transform", "ivp", "value" | "values"}]}
nlohmann::json to_json(const ParameterMatrix& pm);
ParameterLayout layout_from_json(const nlohmann::json& doc);
/// Reads values into `layout` by name. Entries may appear in any order; every
/// layout entry must be present and kinds must agree.
ParameterMatrix parameter_matrix_from_json(const nlohmann::json& doc, LayoutPtr layout);
/// Reads a document that carries its own layout.
ParameterMatrix parameter_matrix_from_json(const nlohmann::json& doc);

}  // namespace ibpf
