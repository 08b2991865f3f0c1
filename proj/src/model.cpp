#include "pldist/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "pldist/rng.hpp"

namespace pldist {

EnumerationLimitError::EnumerationLimitError(int p, int limit)
    : std::invalid_argument("model has " + std::to_string(p) + " nodes; exact enumeration limited to " +
                            std::to_string(limit)) {}

// ---------------------------------------------------------------------------
// MarkovGraph

MarkovGraph::MarkovGraph(int node_count, const std::vector<std::pair<int, int>>& edge_list)
    : node_count_(node_count), adjacency_(static_cast<std::size_t>(std::max(node_count, 0))) {
  if (node_count < 1) throw std::invalid_argument("graph needs at least one node");
  std::set<Edge> unique;
  for (auto [a, b] : edge_list) {
    check_node(a);
    check_node(b);
    if (a == b) throw std::invalid_argument("self-loop on node " + std::to_string(a));
    Edge e{std::min(a, b), std::max(a, b)};
    if (!unique.insert(e).second) {
      throw std::invalid_argument("duplicate edge " + std::to_string(e.u) + "-" + std::to_string(e.v));
    }
  }
  edges_.assign(unique.begin(), unique.end());
  for (const Edge& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

void MarkovGraph::check_node(int i) const {
  if (i < 0 || i >= node_count_) throw std::out_of_range("node " + std::to_string(i) + " out of range");
}

std::span<const int> MarkovGraph::neighbors(int i) const {
  check_node(i);
  return adjacency_[static_cast<std::size_t>(i)];
}

std::vector<int> MarkovGraph::closed_neighborhood(int i) const {
  auto nbrs = neighbors(i);
  std::vector<int> out(nbrs.begin(), nbrs.end());
  out.insert(std::lower_bound(out.begin(), out.end(), i), i);
  return out;
}

int MarkovGraph::edge_index(int i, int j) const {
  if (i == j) return -1;
  Edge key{std::min(i, j), std::max(i, j)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return -1;
  return static_cast<int>(it - edges_.begin());
}

bool MarkovGraph::is_connected() const {
  std::vector<char> seen(static_cast<std::size_t>(node_count_), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adjacency_[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == node_count_;
}

// ---------------------------------------------------------------------------
// Terms

IndexTerm IndexTerm::edge(int a, int b) {
  if (a == b) throw std::invalid_argument("edge term needs two distinct nodes");
  return {TermKind::Edge, std::min(a, b), std::max(a, b)};
}

std::string to_string(const IndexTerm& t) {
  if (t.kind == TermKind::Node) return "node" + std::to_string(t.i);
  return "edge" + std::to_string(t.i) + "-" + std::to_string(t.j);
}

int term_count(const MarkovGraph& g) { return g.node_count() + g.edge_count(); }

IndexTerm term_at(const MarkovGraph& g, int index) {
  if (index < 0 || index >= term_count(g)) throw std::out_of_range("term index out of range");
  if (index < g.node_count()) return IndexTerm::node(index);
  const Edge& e = g.edges()[static_cast<std::size_t>(index - g.node_count())];
  return IndexTerm::edge(e.u, e.v);
}

int term_index(const MarkovGraph& g, const IndexTerm& t) {
  if (t.kind == TermKind::Node) {
    if (t.i < 0 || t.i >= g.node_count()) throw std::out_of_range("node term out of range");
    return t.i;
  }
  int k = g.edge_index(t.i, t.j);
  if (k < 0) throw std::out_of_range("edge term " + to_string(t) + " not in graph");
  return g.node_count() + k;
}

std::vector<int> scope_terms(const MarkovGraph& g, int i) {
  std::vector<int> out{i};
  for (int j : g.neighbors(i)) out.push_back(g.node_count() + g.edge_index(i, j));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> term_owners(const MarkovGraph& g, int index) {
  IndexTerm t = term_at(g, index);
  if (t.kind == TermKind::Node) return {t.i};
  return {t.i, t.j};
}

void check_param_vector(const MarkovGraph& g, const ParamVector& theta) {
  if (theta.size() != term_count(g)) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) + " entries, graph has " +
                                std::to_string(term_count(g)) + " terms");
  }
  if (!theta.allFinite()) throw std::invalid_argument("parameter vector has non-finite entries");
}

// ---------------------------------------------------------------------------
// SampleMatrix

SampleMatrix::SampleMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), values_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 1) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative sample matrix shape");
}

SampleMatrix::SampleMatrix(int rows, int cols, std::vector<std::int8_t> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative sample matrix shape");
  if (values_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("sample matrix size mismatch");
  }
  for (auto v : values_) {
    if (v != 1 && v != -1) throw std::invalid_argument("sample entries must be -1 or +1");
  }
}

void SampleMatrix::set(int k, int i, int value) {
  if (value != 1 && value != -1) throw std::invalid_argument("sample entries must be -1 or +1");
  values_[index(k, i)] = static_cast<std::int8_t>(value);
}

SampleMatrix SampleMatrix::select_columns(std::span<const int> columns) const {
  for (int c : columns) {
    if (c < 0 || c >= cols_) throw std::out_of_range("column out of range");
  }
  const int width = static_cast<int>(columns.size());
  std::vector<std::int8_t> out(static_cast<std::size_t>(rows_) * columns.size());
  for (int k = 0; k < rows_; ++k) {
    for (int c = 0; c < width; ++c) {
      out[static_cast<std::size_t>(k) * columns.size() + static_cast<std::size_t>(c)] = (*this)(k, columns[c]);
    }
  }
  return SampleMatrix(rows_, width, std::move(out));
}

SampleMatrix SampleMatrix::head(int m) const {
  if (m < 0 || m > rows_) throw std::out_of_range("head: row count out of range");
  return SampleMatrix(m, cols_,
                      std::vector<std::int8_t>(values_.begin(),
                                               values_.begin() + static_cast<std::ptrdiff_t>(m) * cols_));
}

// ---------------------------------------------------------------------------
// ModelSpec

std::vector<int> free_terms_for(const MarkovGraph& g, FreePolicy policy) {
  std::vector<int> out;
  const int first = policy == FreePolicy::EdgesOnly ? g.node_count() : 0;
  for (int t = first; t < term_count(g); ++t) out.push_back(t);
  return out;
}

ModelSpec::ModelSpec(MarkovGraph graph, ParamVector theta)
    : ModelSpec(graph, std::move(theta), free_terms_for(graph, FreePolicy::EdgesAndSingletons)) {}

ModelSpec::ModelSpec(MarkovGraph graph, ParamVector theta, std::vector<int> free_terms)
    : graph_(std::move(graph)), theta_(std::move(theta)), free_terms_(std::move(free_terms)) {
  check_param_vector(graph_, theta_);
  std::sort(free_terms_.begin(), free_terms_.end());
  if (std::adjacent_find(free_terms_.begin(), free_terms_.end()) != free_terms_.end()) {
    throw std::invalid_argument("duplicate free term");
  }
  free_position_.assign(static_cast<std::size_t>(term_count(graph_)), -1);
  for (std::size_t k = 0; k < free_terms_.size(); ++k) {
    int t = free_terms_[k];
    if (t < 0 || t >= term_count(graph_)) throw std::out_of_range("free term outside the graph's index set");
    free_position_[static_cast<std::size_t>(t)] = static_cast<int>(k);
  }
}

Vec ModelSpec::free_values(const ParamVector& full) const {
  Vec out(free_count());
  for (int k = 0; k < free_count(); ++k) out(k) = full(free_terms_[static_cast<std::size_t>(k)]);
  return out;
}

ParamVector ModelSpec::with_free_values(const Vec& free_values) const {
  if (free_values.size() != free_count()) throw std::invalid_argument("free value vector has wrong size");
  ParamVector out = theta_;
  for (int k = 0; k < free_count(); ++k) out(free_terms_[static_cast<std::size_t>(k)]) = free_values(k);
  return out;
}

ModelSpec ModelSpec::with_policy(FreePolicy policy) const {
  return ModelSpec(graph_, theta_, free_terms_for(graph_, policy));
}

ModelSpec ModelSpec::with_theta(ParamVector theta) const { return ModelSpec(graph_, std::move(theta), free_terms_); }

// ---------------------------------------------------------------------------
// Enumeration

Vec sufficient_statistics(std::span<const std::int8_t> x, const MarkovGraph& g) {
  if (static_cast<int>(x.size()) != g.node_count()) {
    throw std::invalid_argument("configuration has " + std::to_string(x.size()) + " entries, graph has " +
                                std::to_string(g.node_count()) + " nodes");
  }
  Vec u(term_count(g));
  for (int i = 0; i < g.node_count(); ++i) u(i) = x[static_cast<std::size_t>(i)];
  int k = g.node_count();
  for (const Edge& e : g.edges()) u(k++) = x[static_cast<std::size_t>(e.u)] * x[static_cast<std::size_t>(e.v)];
  return u;
}

double energy(const MarkovGraph& g, const ParamVector& theta, std::span<const std::int8_t> x) {
  double s = 0.0;
  for (int i = 0; i < g.node_count(); ++i) s += theta(i) * x[static_cast<std::size_t>(i)];
  int k = g.node_count();
  for (const Edge& e : g.edges()) {
    s += theta(k++) * (x[static_cast<std::size_t>(e.u)] * x[static_cast<std::size_t>(e.v)]);
  }
  return s;
}

ExactDistribution::ExactDistribution(const MarkovGraph& g, const ParamVector& theta, int enum_limit)
    : node_count_(g.node_count()) {
  if (node_count_ > enum_limit || node_count_ > 30) throw EnumerationLimitError(node_count_, enum_limit);
  check_param_vector(g, theta);
  const std::uint64_t states = state_count();
  prob_.resize(states);
  std::vector<std::int8_t> x(static_cast<std::size_t>(node_count_));
  double max_e = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < states; ++s) {
    for (int i = 0; i < node_count_; ++i) x[static_cast<std::size_t>(i)] = spin_of(s, i);
    prob_[s] = energy(g, theta, x);
    max_e = std::max(max_e, prob_[s]);
  }
  double total = 0.0;
  for (double& e : prob_) {
    e = std::exp(e - max_e);
    total += e;
  }
  for (double& e : prob_) e /= total;
  log_z_ = max_e + std::log(total);
}

std::vector<std::int8_t> ExactDistribution::configuration(std::uint64_t state) const {
  std::vector<std::int8_t> x(static_cast<std::size_t>(node_count_));
  for (int i = 0; i < node_count_; ++i) x[static_cast<std::size_t>(i)] = spin_of(state, i);
  return x;
}

double log_partition_exact(const ModelSpec& model, int enum_limit) {
  return ExactDistribution(model.graph(), model.theta(), enum_limit).log_partition();
}

Vec exact_moments(const MarkovGraph& g, const ExactDistribution& dist) {
  Vec m = Vec::Zero(term_count(g));
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    m += dist.probabilities()[s] * sufficient_statistics(dist.configuration(s), g);
  }
  return m;
}

Vec exact_moments(const ModelSpec& model, int enum_limit) {
  return exact_moments(model.graph(), ExactDistribution(model.graph(), model.theta(), enum_limit));
}

Mat exact_statistic_covariance(const MarkovGraph& g, const ExactDistribution& dist) {
  const int d = term_count(g);
  Vec mean = Vec::Zero(d);
  Mat second = Mat::Zero(d, d);
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    Vec u = sufficient_statistics(dist.configuration(s), g);
    const double p = dist.probabilities()[s];
    mean += p * u;
    second.noalias() += p * u * u.transpose();
  }
  return symmetrize(second - mean * mean.transpose());
}

SampleMatrix sample_exact(const ModelSpec& model, int n, std::uint64_t seed, int enum_limit) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  ExactDistribution dist(model.graph(), model.theta(), enum_limit);
  std::vector<double> cdf(dist.probabilities().size());
  std::partial_sum(dist.probabilities().begin(), dist.probabilities().end(), cdf.begin());
  cdf.back() = 1.0;

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int p = model.node_count();
  SampleMatrix out(n, p);
  for (int k = 0; k < n; ++k) {
    const double r = unif(rng);
    auto state = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    state = std::min<std::uint64_t>(state, cdf.size() - 1);
    for (int i = 0; i < p; ++i) out.set(k, i, spin_of(state, i));
  }
  return out;
}

SampleMatrix sample_gibbs(const ModelSpec& model, int n, std::uint64_t seed, GibbsOptions options) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  if (options.burn_in < 0 || options.thin < 0) throw std::invalid_argument("burn-in and thinning must be >= 0");
  const MarkovGraph& g = model.graph();
  const int p = g.node_count();

  // Per node: (neighbor, θ_ij) pairs.
  std::vector<std::vector<std::pair<int, double>>> couplings(static_cast<std::size_t>(p));
  for (int k = 0; k < g.edge_count(); ++k) {
    const Edge& e = g.edges()[static_cast<std::size_t>(k)];
    const double w = model.theta()(p + k);
    couplings[static_cast<std::size_t>(e.u)].emplace_back(e.v, w);
    couplings[static_cast<std::size_t>(e.v)].emplace_back(e.u, w);
  }

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int8_t> x(static_cast<std::size_t>(p));
  for (auto& xi : x) xi = unif(rng) < 0.5 ? 1 : -1;

  auto sweep = [&] {
    for (int i = 0; i < p; ++i) {
      double field = model.theta()(i);
      for (auto [j, w] : couplings[static_cast<std::size_t>(i)]) field += w * x[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(i)] = unif(rng) < logistic(2.0 * field) ? 1 : -1;
    }
  };

  for (int s = 0; s < options.burn_in; ++s) sweep();
  SampleMatrix out(n, p);
  for (int k = 0; k < n; ++k) {
    const int steps = std::max(options.thin, 1);
    for (int s = 0; s < steps; ++s) sweep();
    for (int i = 0; i < p; ++i) out.set(k, i, x[static_cast<std::size_t>(i)]);
  }
  return out;
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double local_field(const MarkovGraph& g, const ParamVector& theta, int i, std::span<const std::int8_t> x) {
  double field = theta(i);
  for (int j : g.neighbors(i)) field += theta(g.node_count() + g.edge_index(i, j)) * x[static_cast<std::size_t>(j)];
  return field;
}

double conditional_prob(double theta_node, std::span<const double> theta_edges,
                        std::span<const std::int8_t> x_nbr) {
  if (theta_edges.size() != x_nbr.size()) {
    throw std::invalid_argument("conditional_prob: " + std::to_string(theta_edges.size()) +
                                " edge parameters for " + std::to_string(x_nbr.size()) + " neighbors");
  }
  double field = theta_node;
  for (std::size_t k = 0; k < x_nbr.size(); ++k) field += theta_edges[k] * x_nbr[k];
  return logistic(2.0 * field);
}

double conditional_prob(const MarkovGraph& g, const ParamVector& theta, int i, std::span<const std::int8_t> x) {
  if (static_cast<int>(x.size()) != g.node_count()) throw std::invalid_argument("configuration size mismatch");
  return logistic(2.0 * local_field(g, theta, i, x));
}

// ---------------------------------------------------------------------------
// Generators

namespace {

MarkovGraph star_graph(const StarGraph& s) {
  if (s.leaves < 1) throw std::invalid_argument("star needs at least one leaf");
  std::vector<std::pair<int, int>> edges;
  for (int k = 1; k <= s.leaves; ++k) edges.emplace_back(0, k);
  return MarkovGraph(s.leaves + 1, edges);
}

MarkovGraph grid_graph(const GridGraph& s) {
  if (s.rows < 1 || s.cols < 1) throw std::invalid_argument("grid dimensions must be positive");
  std::vector<std::pair<int, int>> edges;
  auto id = [&](int r, int c) { return r * s.cols + c; };
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      if (c + 1 < s.cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < s.rows) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  }
  return MarkovGraph(s.rows * s.cols, edges);
}

MarkovGraph barabasi_albert(const BarabasiAlbertGraph& s) {
  if (s.nodes < 1 || s.edges_per_node < 1) throw std::invalid_argument("Barabasi-Albert sizes must be positive");
  const int seed_size = std::min(std::max(s.edges_per_node, 2), s.nodes);
  std::vector<std::pair<int, int>> edges;
  std::vector<int> endpoints;  // each node repeated once per incident edge
  for (int a = 0; a < seed_size; ++a) {
    for (int b = a + 1; b < seed_size; ++b) {
      edges.emplace_back(a, b);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }
  Rng rng = make_rng(derive_seed(s.seed, stream::kGraph, {1}));
  for (int t = seed_size; t < s.nodes; ++t) {
    std::vector<int> targets;
    const int want = std::min(s.edges_per_node, t);
    while (static_cast<int>(targets.size()) < want) {
      std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
      int cand = endpoints[pick(rng)];
      if (std::find(targets.begin(), targets.end(), cand) == targets.end()) targets.push_back(cand);
    }
    for (int v : targets) {
      edges.emplace_back(v, t);
      endpoints.push_back(v);
      endpoints.push_back(t);
    }
  }
  return MarkovGraph(s.nodes, edges);
}

MarkovGraph euclidean_graph(const EuclideanGraph& s) {
  if (s.nodes < 1) throw std::invalid_argument("Euclidean graph needs at least one node");
  if (!(s.radius > 0)) throw std::invalid_argument("Euclidean radius must be positive");
  for (int attempt = 0; attempt < std::max(s.max_retries, 1); ++attempt) {
    Rng rng = make_rng(derive_seed(s.seed, stream::kGraph, {2, static_cast<std::uint64_t>(attempt)}));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(s.nodes));
    for (auto& [px, py] : pts) {
      px = unif(rng);
      py = unif(rng);
    }
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < s.nodes; ++a) {
      for (int b = a + 1; b < s.nodes; ++b) {
        const double dx = pts[static_cast<std::size_t>(a)].first - pts[static_cast<std::size_t>(b)].first;
        const double dy = pts[static_cast<std::size_t>(a)].second - pts[static_cast<std::size_t>(b)].second;
        if (std::hypot(dx, dy) <= s.radius) edges.emplace_back(a, b);
      }
    }
    MarkovGraph g(s.nodes, edges);
    if (g.is_connected()) return g;
  }
  throw std::runtime_error("Euclidean graph still disconnected after " + std::to_string(s.max_retries) +
                           " redraws");
}

}  // namespace

MarkovGraph make_graph(const GraphKind& kind) {
  return std::visit(
      [](const auto& k) -> MarkovGraph {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, StarGraph>) return star_graph(k);
        if constexpr (std::is_same_v<K, GridGraph>) return grid_graph(k);
        if constexpr (std::is_same_v<K, BarabasiAlbertGraph>) return barabasi_albert(k);
        if constexpr (std::is_same_v<K, EuclideanGraph>) return euclidean_graph(k);
      },
      kind);
}

ModelSpec random_model(const MarkovGraph& g, double sigma_pair, double sigma_singleton, std::uint64_t seed) {
  if (sigma_pair < 0 || sigma_singleton < 0) throw std::invalid_argument("standard deviations must be >= 0");
  auto draw = [](Rng& rng, double sigma) {
    if (sigma == 0.0) return 0.0;
    std::normal_distribution<double> normal(0.0, sigma);
    return normal(rng);
  };
  ParamVector theta(term_count(g));
  Rng node_rng = make_rng(derive_seed(seed, stream::kModel, {1}));
  Rng edge_rng = make_rng(derive_seed(seed, stream::kModel, {2}));
  for (int i = 0; i < g.node_count(); ++i) theta(i) = draw(node_rng, sigma_singleton);
  for (int k = 0; k < g.edge_count(); ++k) theta(g.node_count() + k) = draw(edge_rng, sigma_pair);
  return ModelSpec(g, theta);
}

}  // namespace pldist
