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

#include "ibpf/parameters.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "ibpf/error.hpp"

namespace ibpf {

std::string_view to_string(ParamKind k) noexcept {
    return k == ParamKind::shared ? "shared" : "unit_specific";
}

std::string_view to_string(Transform t) noexcept {
    switch (t) {
        case Transform::identity: return "identity";
        case Transform::log: return "log";
        case Transform::logit: return "logit";
    }
    return "identity";
}

ParamKind parse_param_kind(std::string_view s) {
    if (s == "shared") return ParamKind::shared;
    if (s == "unit_specific") return ParamKind::unit_specific;
    fail_input("unknown parameter kind '" + std::string(s) + "'");
}

Transform parse_transform(std::string_view s) {
    if (s == "identity") return Transform::identity;
    if (s == "log") return Transform::log;
    if (s == "logit") return Transform::logit;
    fail_input("unknown transform '" + std::string(s) + "'");
}

ParameterLayout::ParameterLayout(std::vector<ParameterEntry> entries, std::size_t units)
    : entries_(std::move(entries)), units_(units) {
    if (units_ == 0) fail_input("parameter layout needs at least one unit");
    std::set<std::string> seen;
    for (std::size_t d = 0; d < entries_.size(); ++d) {
        const auto& e = entries_[d];
        if (e.name.empty()) fail_input("parameter entry with empty name");
        if (!seen.insert(e.name).second) fail_input("duplicate parameter name '" + e.name + "'");
        (e.kind == ParamKind::shared ? shared_ : specific_).push_back(d);
    }
}

std::optional<std::size_t> ParameterLayout::find(std::string_view name) const noexcept {
    for (std::size_t d = 0; d < entries_.size(); ++d)
        if (entries_[d].name == name) return d;
    return std::nullopt;
}

std::size_t ParameterLayout::index(std::string_view name) const {
    if (auto d = find(name)) return *d;
    fail_input("unknown parameter '" + std::string(name) + "'");
}

bool ParameterLayout::operator==(const ParameterLayout& o) const noexcept {
    if (units_ != o.units_ || entries_.size() != o.entries_.size()) return false;
    for (std::size_t d = 0; d < entries_.size(); ++d) {
        const auto &a = entries_[d], &b = o.entries_[d];
        if (a.name != b.name || a.kind != b.kind || a.transform != b.transform || a.ivp != b.ivp) return false;
    }
    return true;
}

ParameterMatrix::ParameterMatrix(LayoutPtr layout) : layout_(std::move(layout)) {
    if (!layout_) fail_input("parameter matrix without layout");
    values_.assign(layout_->units() * layout_->dim(), 0.0);
}

ParameterMatrix::ParameterMatrix(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_) fail_input("parameter matrix without layout");
    if (values_.size() != layout_->units() * layout_->dim()) {
        std::ostringstream os;
        os << "parameter matrix has " << values_.size() << " values, layout expects "
           << layout_->units() << "x" << layout_->dim();
        fail_input(os.str());
    }
}

void ParameterMatrix::set(std::string_view name, double value) {
    const auto d = layout_->index(name);
    for (std::size_t u = 0; u < units(); ++u) (*this)(u, d) = value;
}

void ParameterMatrix::validate() const {
    for (std::size_t u = 0; u < units(); ++u)
        for (std::size_t d = 0; d < dim(); ++d) (void)to_estimation_scale((*this)(u, d), layout_->entry(d).transform);
}

double to_estimation_scale(double x, Transform t) {
    switch (t) {
        case Transform::identity:
            if (std::isnan(x)) fail_input("NaN parameter value");
            return x;
        case Transform::log:
            if (!(x >= 0.0)) fail_input("log transform of out-of-domain value " + std::to_string(x));
            return std::log(x);
        case Transform::logit:
            if (!(x >= 0.0 && x <= 1.0)) fail_input("logit transform of out-of-domain value " + std::to_string(x));
            return std::log(x) - std::log1p(-x);
    }
    return x;
}

double from_estimation_scale(double y, Transform t) noexcept {
    switch (t) {
        case Transform::identity: return y;
        case Transform::log: return std::exp(y);
        case Transform::logit: return y >= 0.0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y));
    }
    return y;
}

void to_estimation_scale(std::span<const double> natural, const ParameterLayout& layout, std::span<double> out) {
    const std::size_t D = layout.dim();
    for (std::size_t i = 0; i < natural.size(); ++i) out[i] = to_estimation_scale(natural[i], layout.entry(i % D).transform);
}

void from_estimation_scale(std::span<const double> est, const ParameterLayout& layout, std::span<double> out) noexcept {
    const std::size_t D = layout.dim();
    const auto entries = layout.entries();
    for (std::size_t i = 0; i < est.size(); ++i) out[i] = from_estimation_scale(est[i], entries[i % D].transform);
}

std::vector<double> to_estimation_scale(const ParameterMatrix& pm) {
    std::vector<double> out(pm.values().size());
    to_estimation_scale(pm.values(), pm.layout(), out);
    return out;
}

ParameterMatrix from_estimation_scale(std::span<const double> est, LayoutPtr layout) {
    std::vector<double> out(est.size());
    from_estimation_scale(est, *layout, out);
    return ParameterMatrix(std::move(layout), std::move(out));
}

ParameterMatrix expand_shared(std::span<const double> theta, LayoutPtr layout) {
    if (!layout) fail_input("expand_shared without layout");
    if (theta.size() != layout->flat_size()) {
        std::ostringstream os;
        os << "parameter vector has length " << theta.size() << " but layout with "
           << layout->shared_columns().size() << " shared and " << layout->unit_specific_columns().size()
           << " unit-specific entries over " << layout->units() << " units needs " << layout->flat_size();
        fail_input(os.str());
    }
    ParameterMatrix pm(layout);
    std::size_t k = 0;
    for (auto d : layout->shared_columns()) {
        for (std::size_t u = 0; u < layout->units(); ++u) pm(u, d) = theta[k];
        ++k;
    }
    for (std::size_t u = 0; u < layout->units(); ++u)
        for (auto d : layout->unit_specific_columns()) pm(u, d) = theta[k++];
    return pm;
}

std::vector<double> collapse(const ParameterMatrix& pm) {
    const auto& layout = pm.layout();
    std::vector<double> theta;
    theta.reserve(layout.flat_size());
    for (auto d : layout.shared_columns()) {
        const auto tr = layout.entry(d).transform;
        bool constant = true;
        for (std::size_t u = 1; u < pm.units(); ++u) constant = constant && pm(u, d) == pm(0, d);
        if (constant) {
            theta.push_back(pm(0, d));
            continue;
        }
        double sum = 0.0;
        for (std::size_t u = 0; u < pm.units(); ++u) sum += to_estimation_scale(pm(u, d), tr);
        theta.push_back(from_estimation_scale(sum / static_cast<double>(pm.units()), tr));
    }
    for (std::size_t u = 0; u < pm.units(); ++u)
        for (auto d : layout.unit_specific_columns()) theta.push_back(pm(u, d));
    return theta;
}

nlohmann::json to_json(const ParameterMatrix& pm) {
    const auto& layout = pm.layout();
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t d = 0; d < layout.dim(); ++d) {
        const auto& e = layout.entry(d);
        nlohmann::json j{{"name", e.name},
                         {"kind", std::string(to_string(e.kind))},
                         {"transform", std::string(to_string(e.transform))},
                         {"ivp", e.ivp}};
        bool constant = true;
        for (std::size_t u = 1; u < pm.units(); ++u) constant = constant && pm(u, d) == pm(0, d);
        if (e.kind == ParamKind::shared && constant) {
            j["value"] = pm(0, d);
        } else {
            std::vector<double> v(pm.units());
            for (std::size_t u = 0; u < pm.units(); ++u) v[u] = pm(u, d);
            j["values"] = v;
        }
        params.push_back(std::move(j));
    }
    return {{"units", layout.units()}, {"parameters", params}};
}

namespace {

std::size_t doc_units(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("units") || !doc.contains("parameters"))
        fail_input("parameter document needs 'units' and 'parameters'");
    return doc.at("units").get<std::size_t>();
}

std::vector<double> entry_values(const nlohmann::json& j, std::size_t units) {
    if (j.contains("values")) {
        auto v = j.at("values").get<std::vector<double>>();
        if (v.size() != units)
            fail_input("parameter '" + j.value("name", std::string("?")) + "' has " + std::to_string(v.size()) +
                       " values, expected " + std::to_string(units));
        return v;
    }
    if (j.contains("value")) return std::vector<double>(units, j.at("value").get<double>());
    fail_input("parameter '" + j.value("name", std::string("?")) + "' has neither 'value' nor 'values'");
}

}  // namespace

ParameterLayout layout_from_json(const nlohmann::json& doc) {
    const auto units = doc_units(doc);
    std::vector<ParameterEntry> entries;
    try {
        for (const auto& j : doc.at("parameters")) {
            entries.push_back({j.at("name").get<std::string>(), parse_param_kind(j.at("kind").get<std::string>()),
                               parse_transform(j.value("transform", std::string("identity"))),
                               j.value("ivp", false)});
        }
    } catch (const nlohmann::json::exception& e) {
        fail_input(std::string("malformed parameter document: ") + e.what());
    }
    return ParameterLayout(std::move(entries), units);
}

ParameterMatrix parameter_matrix_from_json(const nlohmann::json& doc, LayoutPtr layout) {
    const auto units = doc_units(doc);
    if (units != layout->units())
        fail_input("parameter document has " + std::to_string(units) + " units, model has " +
                   std::to_string(layout->units()));
    ParameterMatrix pm(layout);
    std::vector<bool> seen(layout->dim(), false);
    try {
        for (const auto& j : doc.at("parameters")) {
            const auto name = j.at("name").get<std::string>();
            const auto d = layout->find(name);
            if (!d) fail_input("parameter '" + name + "' is not part of this model");
            if (j.contains("kind") && parse_param_kind(j.at("kind").get<std::string>()) != layout->entry(*d).kind)
                fail_input("parameter '" + name + "' has kind " + j.at("kind").get<std::string>() +
                           ", model expects " + std::string(to_string(layout->entry(*d).kind)));
            const auto v = entry_values(j, units);
            for (std::size_t u = 0; u < units; ++u) pm(u, *d) = v[u];
            seen[*d] = true;
        }
    } catch (const nlohmann::json::exception& e) {
        fail_input(std::string("malformed parameter document: ") + e.what());
    }
    for (std::size_t d = 0; d < layout->dim(); ++d)
        if (!seen[d]) fail_input("parameter document is missing '" + layout->entry(d).name + "'");
    pm.validate();
    return pm;
}

ParameterMatrix parameter_matrix_from_json(const nlohmann::json& doc) {
    return parameter_matrix_from_json(doc, std::make_shared<const ParameterLayout>(layout_from_json(doc)));
}

}  // namespace ibpf
