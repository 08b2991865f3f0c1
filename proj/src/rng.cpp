#include "pldist/rng.hpp"

namespace pldist {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name,
                          std::initializer_list<std::uint64_t> indices) {
  // FNV-1a over the stream name, folded into the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream_name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = splitmix64(master ^ h);
  for (std::uint64_t idx : indices) s = splitmix64(s ^ (idx + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace pldist
