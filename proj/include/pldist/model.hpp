#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pldist/linalg.hpp"

namespace pldist {

// Exact oracles enumerate 2^p configurations; beyond this, use Gibbs.
inline constexpr int kDefaultEnumLimit = 20;

class EnumerationLimitError : public std::invalid_argument {
 public:
  EnumerationLimitError(int p, int limit);
};

struct Edge {
  int u = 0;  // u < v
  int v = 0;
  auto operator<=>(const Edge&) const = default;
};

// Undirected graph on nodes 0..p-1 with canonical (u < v), lexicographically
// sorted edges. Sensors communicate only along these edges.
class MarkovGraph {
 public:
  MarkovGraph() = default;
  MarkovGraph(int node_count, const std::vector<std::pair<int, int>>& edge_list);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  // Sorted neighbor list N(i).
  std::span<const int> neighbors(int i) const;
  // A(i) = {i} ∪ N(i), sorted.
  std::vector<int> closed_neighborhood(int i) const;
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  bool has_edge(int i, int j) const { return edge_index(i, j) >= 0; }
  // Position of edge {i, j} in edges(), or -1.
  int edge_index(int i, int j) const;

  bool is_connected() const;

 private:
  void check_node(int i) const;

  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// ---------------------------------------------------------------------------
// Parameter index set I = V ∪ E.
//
// Dense layout: Node(i) lives at index i, Edge k (in MarkovGraph::edges()
// order) at index p + k. That ordering is nodes first, then edges
// lexicographically, so every parameter vector shares one canonical layout.

enum class TermKind { Node = 0, Edge = 1 };

struct IndexTerm {
  TermKind kind = TermKind::Node;
  int i = 0;
  int j = -1;  // -1 for node terms

  static IndexTerm node(int i) { return {TermKind::Node, i, -1}; }
  static IndexTerm edge(int a, int b);

  bool contains(int node) const { return i == node || j == node; }
  // For an edge term, the endpoint that is not `node`.
  int other(int node) const { return i == node ? j : i; }

  auto operator<=>(const IndexTerm&) const = default;
};

std::string to_string(const IndexTerm& t);

int term_count(const MarkovGraph& g);
IndexTerm term_at(const MarkovGraph& g, int index);
int term_index(const MarkovGraph& g, const IndexTerm& t);
// β_i = {α ∈ I | i ∈ α} as sorted dense indices.
std::vector<int> scope_terms(const MarkovGraph& g, int i);
// Nodes contained in a term (one or two owners).
std::vector<int> term_owners(const MarkovGraph& g, int index);

// θ over the dense term layout.
using ParamVector = Vec;

void check_param_vector(const MarkovGraph& g, const ParamVector& theta);

// ---------------------------------------------------------------------------

// n configurations in {-1,+1}^p, one per row.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  SampleMatrix(int rows, int cols);  // filled with +1
  SampleMatrix(int rows, int cols, std::vector<std::int8_t> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::int8_t operator()(int k, int i) const { return values_[index(k, i)]; }
  void set(int k, int i, int value);

  std::span<const std::int8_t> row(int k) const {
    return {values_.data() + static_cast<std::size_t>(k) * cols_, static_cast<std::size_t>(cols_)};
  }

  // Sub-matrix keeping the listed columns in the given order.
  SampleMatrix select_columns(std::span<const int> columns) const;
  // First m rows.
  SampleMatrix head(int m) const;

  bool operator==(const SampleMatrix&) const = default;

 private:
  std::size_t index(int k, int i) const {
    return static_cast<std::size_t>(k) * cols_ + static_cast<std::size_t>(i);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::int8_t> values_;
};

// ---------------------------------------------------------------------------

enum class FreePolicy { EdgesOnly, EdgesAndSingletons };

std::vector<int> free_terms_for(const MarkovGraph& g, FreePolicy policy);

// Graph, true parameters, and the subset of terms being estimated. Terms not
// in free_terms are held at their theta values.
class ModelSpec {
 public:
  ModelSpec() = default;
  ModelSpec(MarkovGraph graph, ParamVector theta);  // all terms free
  ModelSpec(MarkovGraph graph, ParamVector theta, std::vector<int> free_terms);

  const MarkovGraph& graph() const { return graph_; }
  const ParamVector& theta() const { return theta_; }
  const std::vector<int>& free_terms() const { return free_terms_; }
  int node_count() const { return graph_.node_count(); }
  int free_count() const { return static_cast<int>(free_terms_.size()); }

  bool is_free(int term) const { return free_position(term) >= 0; }
  // Position of a term within free_terms(), or -1 when fixed.
  int free_position(int term) const { return free_position_[static_cast<std::size_t>(term)]; }

  Vec free_values(const ParamVector& full) const;
  ParamVector with_free_values(const Vec& free_values) const;

  ModelSpec with_policy(FreePolicy policy) const;
  ModelSpec with_theta(ParamVector theta) const;

 private:
  MarkovGraph graph_;
  ParamVector theta_;
  std::vector<int> free_terms_;
  std::vector<int> free_position_;
};

// ---------------------------------------------------------------------------
// Exact inference by enumeration.

inline std::int8_t spin_of(std::uint64_t state, int i) { return ((state >> i) & 1U) ? 1 : -1; }

// u(x): Node(i) -> x_i, Edge(i,j) -> x_i x_j.
Vec sufficient_statistics(std::span<const std::int8_t> x, const MarkovGraph& g);

double energy(const MarkovGraph& g, const ParamVector& theta, std::span<const std::int8_t> x);

// Probability table over all 2^p configurations; state bit i set <=> x_i = +1.
class ExactDistribution {
 public:
  ExactDistribution(const MarkovGraph& g, const ParamVector& theta, int enum_limit = kDefaultEnumLimit);

  int node_count() const { return node_count_; }
  std::uint64_t state_count() const { return std::uint64_t{1} << node_count_; }
  double log_partition() const { return log_z_; }
  const std::vector<double>& probabilities() const { return prob_; }
  std::vector<std::int8_t> configuration(std::uint64_t state) const;

 private:
  int node_count_;
  double log_z_ = 0.0;
  std::vector<double> prob_;
};

double log_partition_exact(const ModelSpec& model, int enum_limit = kDefaultEnumLimit);
// E[u(x)] over all terms (dense layout).
Vec exact_moments(const ModelSpec& model, int enum_limit = kDefaultEnumLimit);
Vec exact_moments(const MarkovGraph& g, const ExactDistribution& dist);
// cov(u(x)) over all terms.
Mat exact_statistic_covariance(const MarkovGraph& g, const ExactDistribution& dist);

SampleMatrix sample_exact(const ModelSpec& model, int n, std::uint64_t seed,
                          int enum_limit = kDefaultEnumLimit);

struct GibbsOptions {
  int burn_in = 1000;  // sweeps
  int thin = 10;       // sweeps between retained draws
};

SampleMatrix sample_gibbs(const ModelSpec& model, int n, std::uint64_t seed, GibbsOptions options = {});

// θ_i + Σ_j θ_ij x_j for node i under a full configuration.
double local_field(const MarkovGraph& g, const ParamVector& theta, int i, std::span<const std::int8_t> x);

// p(x_i = +1 | x_N(i)) = σ(2(θ_i + Σ_j θ_ij x_j)). theta_edges and x_nbr are
// aligned with the neighbor order.
double conditional_prob(double theta_node, std::span<const double> theta_edges,
                        std::span<const std::int8_t> x_nbr);
double conditional_prob(const MarkovGraph& g, const ParamVector& theta, int i,
                        std::span<const std::int8_t> x);

double logistic(double z);

// ---------------------------------------------------------------------------
// Graph and model generators.

struct StarGraph {
  int leaves = 1;
};
struct GridGraph {
  int rows = 1;
  int cols = 1;
};
struct BarabasiAlbertGraph {
  int nodes = 1;
  int edges_per_node = 1;
  std::uint64_t seed = 0;
};
struct EuclideanGraph {
  int nodes = 1;
  double radius = 0.15;
  std::uint64_t seed = 0;
  int max_retries = 100;
};

using GraphKind = std::variant<StarGraph, GridGraph, BarabasiAlbertGraph, EuclideanGraph>;

MarkovGraph make_graph(const GraphKind& kind);

// Independent N(0, sigma_pair) edge and N(0, sigma_singleton) node
// parameters; all terms free.
ModelSpec random_model(const MarkovGraph& g, double sigma_pair, double sigma_singleton, std::uint64_t seed);

}  // namespace pldist
