#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace pldist {

using Rng = std::mt19937_64;

// Named sub-streams: every random draw in the toolkit is keyed by
// (master seed, stream name, replicate indices).
namespace stream {
inline constexpr std::string_view kModel = "model";
inline constexpr std::string_view kData = "data";
inline constexpr std::string_view kExperiment = "experiment";
inline constexpr std::string_view kGraph = "graph";
}  // namespace stream

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name,
                          std::initializer_list<std::uint64_t> indices = {});

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

}  // namespace pldist
