#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "sketchinpaint/grid.hpp"

namespace sketchinpaint {

using Rng = std::mt19937_64;

// FNV-1a, used for deterministic seeds derived from strings.
std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Mixes two seeds (splitmix64 finalizer over the combination).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

double standard_normal(Rng& rng);
double uniform01(Rng& rng);
// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);

Grid normal_grid(const Grid::Shape& shape, Rng& rng);

}  // namespace sketchinpaint
