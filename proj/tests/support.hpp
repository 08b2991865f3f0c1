#pragma once

#include <cstdint>
#include <vector>

#include "oracle.hpp"
#include "pldist/model.hpp"
#include "pldist/rng.hpp"

namespace testsupport {

inline oracle::Ising to_oracle(const pldist::ModelSpec& m) {
  oracle::Ising o;
  o.p = m.node_count();
  for (const auto& e : m.graph().edges()) o.edges.emplace_back(e.u, e.v);
  for (int i = 0; i < o.p; ++i) o.node.push_back(m.theta()[i]);
  for (std::size_t k = 0; k < o.edges.size(); ++k) o.edge.push_back(m.theta()[o.p + static_cast<int>(k)]);
  return o;
}

// Erdős–Rényi style graph that is kept only if connected.
inline pldist::MarkovGraph random_connected_graph(int p, double prob, std::uint64_t seed) {
  auto rng = pldist::make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if (u(rng) < prob) e.emplace_back(i, j);
    pldist::MarkovGraph g(p, e);
    if (g.is_connected()) return g;
  }
}

inline pldist::ModelSpec random_spec(int p, double prob, double sp, double ss, std::uint64_t seed,
                                     pldist::FreePolicy policy = pldist::FreePolicy::EdgesAndSingletons) {
  auto g = random_connected_graph(p, prob, pldist::derive_seed(seed, pldist::stream::kGraph));
  return pldist::random_model(g, sp, ss, pldist::derive_seed(seed, pldist::stream::kModel)).with_policy(policy);
}

inline Eigen::MatrixXd random_spd(int d, std::uint64_t seed, double ridge = 0.1) {
  auto rng = pldist::make_rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) a(r, c) = n(rng);
  return a * a.transpose() + ridge * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace testsupport
