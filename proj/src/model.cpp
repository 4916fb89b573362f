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

#include "ibpf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ibpf/error.hpp"

namespace ibpf {

std::size_t TimeGrid::substeps(std::size_t n) const noexcept {
    const double gap = time(n) - time(n - 1);
    const auto k = static_cast<std::size_t>(std::ceil(gap / dt - 1e-9));
    return std::max<std::size_t>(k, 1);
}

void TimeGrid::validate() const {
    if (obs_times.empty()) fail_input("time grid has no observation times");
    if (!(dt > 0.0)) fail_input("process step size must be positive");
    if (!(t0 < obs_times.front())) fail_input("time origin must precede the first observation");
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n <= obs_times.size(); ++n) {
        const double gap = time(n) - time(n - 1);
        if (!(gap > 0.0)) fail_input("observation times must be strictly increasing");
        if (n > 1) min_gap = std::min(min_gap, gap);
    }
    if (dt > min_gap * (1.0 + 1e-9)) fail_input("process step exceeds the smallest observation gap");
}

void propagate(const SpatPompModel& model, std::span<double> x, ParamsView theta, std::size_t n, Rng& rng) {
    const auto& grid = model.time_grid();
    const double t_from = grid.time(n - 1);
    const std::size_t k = grid.substeps(n);
    const double h = (grid.time(n) - t_from) / static_cast<double>(k);
    model.reset_accumulators(x);
    for (std::size_t i = 0; i < k; ++i) model.step(x, theta, t_from + static_cast<double>(i) * h, h, rng);
}

BlockPartition::BlockPartition(std::vector<std::vector<std::size_t>> blocks, std::size_t units)
    : blocks_(std::move(blocks)), block_of_(units, std::numeric_limits<std::size_t>::max()) {
    if (units == 0) fail_input("block partition needs at least one unit");
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        if (blocks_[b].empty()) fail_input("empty block " + std::to_string(b + 1));
        for (auto u : blocks_[b]) {
            if (u >= units) fail_input("block refers to unit " + std::to_string(u + 1) + " beyond U=" + std::to_string(units));
            if (block_of_[u] != std::numeric_limits<std::size_t>::max())
                fail_input("unit " + std::to_string(u + 1) + " appears in more than one block");
            block_of_[u] = b;
        }
    }
    for (std::size_t u = 0; u < units; ++u)
        if (block_of_[u] == std::numeric_limits<std::size_t>::max())
            fail_input("unit " + std::to_string(u + 1) + " is not assigned to any block");
}

BlockPartition BlockPartition::singletons(std::size_t units) { return contiguous(units, 1); }

BlockPartition BlockPartition::contiguous(std::size_t units, std::size_t block_size) {
    if (block_size == 0) fail_input("block size must be positive");
    std::vector<std::vector<std::size_t>> blocks;
    for (std::size_t u = 0; u < units; ++u) {
        if (u % block_size == 0) blocks.emplace_back();
        blocks.back().push_back(u);
    }
    return BlockPartition(std::move(blocks), units);
}

BlockPartition BlockPartition::from_blocks(std::size_t units, std::vector<std::vector<std::size_t>> blocks) {
    return BlockPartition(std::move(blocks), units);
}

nlohmann::json BlockPartition::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : blocks_) {
        nlohmann::json blk = nlohmann::json::array();
        for (auto u : b) blk.push_back(u + 1);
        out.push_back(blk);
    }
    return out;
}

BlockPartition BlockPartition::from_json(std::size_t units, const nlohmann::json& j) {
    if (j.is_number_integer()) return contiguous(units, j.get<std::size_t>());
    std::vector<std::vector<std::size_t>> blocks;
    for (const auto& blk : j) {
        auto& b = blocks.emplace_back();
        for (const auto& u : blk) {
            const auto one_based = u.get<long long>();
            if (one_based < 1) fail_input("block unit numbers are 1-based");
            b.push_back(static_cast<std::size_t>(one_based - 1));
        }
    }
    return from_blocks(units, std::move(blocks));
}

PanelData::PanelData(std::size_t units, std::size_t times)
    : units_(units), times_(times), values_(units * times, std::numeric_limits<double>::quiet_NaN()) {}

PanelData::PanelData(std::size_t units, std::size_t times, std::vector<double> values)
    : units_(units), times_(times), values_(std::move(values)) {
    if (values_.size() != units * times) fail_input("panel data size does not match U x N");
}

}  // namespace ibpf
