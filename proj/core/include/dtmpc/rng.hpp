// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seed splitting for reproducible campaigns. Trial i always sees the same
// stream no matter which worker runs it or in what order.
#pragma once

#include <cstdint>
#include <random>

namespace dtmpc {

std::uint64_t splitmix64(std::uint64_t x);

// Seed of trial `index` under campaign seed `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index);

// Uniform on [0, 1) from the top 53 bits. Written out rather than using
// std::uniform_real_distribution, whose output is implementation-defined.
double uniform01(std::mt19937_64& gen);
double uniform(std::mt19937_64& gen, double lo, double hi);

}  // namespace dtmpc
