// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace fedmas {

// splitmix64 step; the basis for all derived seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent, reproducible seed streams derived from one master seed.
// Every random draw in a run traces back to (master_seed, tag[, a[, b]]),
// which makes results independent of thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    return splitmix64(splitmix64(master) ^ splitmix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a) {
    return splitmix64(derive_seed(master, tag) ^ splitmix64(a ^ 0x5bf03635ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a,
                                 std::uint64_t b) {
    return splitmix64(derive_seed(master, tag, a) ^ splitmix64(b ^ 0x9d2c5680ULL));
}

namespace seed_tag {
inline constexpr std::uint64_t data_gen = 1;
inline constexpr std::uint64_t train_test_split = 2;
inline constexpr std::uint64_t partition = 3;
inline constexpr std::uint64_t prior = 4;
inline constexpr std::uint64_t model_init = 5;
inline constexpr std::uint64_t client_round = 6;
}  // namespace seed_tag

}  // namespace fedmas
