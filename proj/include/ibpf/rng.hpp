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

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace ibpf {

/// One Philox4x32-10 block: encrypts a 128-bit counter under a 64-bit key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hashes an ordered tuple of tags into a 64-bit stream identifier.
std::uint64_t stream_id(std::initializer_list<std::uint64_t> tags) noexcept;

/// Replicate r of a run seeded with `master` uses seed derive_seed(master, r).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

/// Draw purposes. Together with (iteration, time index, particle or block)
/// they key every random stream so results do not depend on scheduling.
enum class Purpose : std::uint64_t {
    init = 1,
    step = 2,
    perturb = 3,
    resample = 4,
    measure = 5,
    jitter = 6,
    misc = 7,
};

/// Counter-based generator. Each (seed, stream) pair is an independent
/// sequence; there is no shared state between instances.
class Rng {
public:
    using result_type = std::uint64_t;

    Rng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (next_ >= 2) refill();
        return buffer_[next_++];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int next_ = 2;
};

inline Rng make_rng(std::uint64_t seed, Purpose purpose, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t s = stream_id({static_cast<std::uint64_t>(purpose)});
    for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
    return Rng(seed, s);
}

}  // namespace ibpf
