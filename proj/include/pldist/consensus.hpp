#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pldist/estimators.hpp"
#include "pldist/score_covariance.hpp"

namespace pldist {

// How local estimates of a shared term are weighted.
//   Uniform        w = 1
//   Diagonal       w = 1 / V̂_{α,α}
//   OptimalVector  w = V̂_α^{-1} e, normalized (needs the score exchange)
//   HessianMatrix  W^i = Ĥ^i, combined by a global solve
//   MaxDiagonal    pick argmax of 1 / V̂_{α,α}
enum class WeightScheme { Uniform, Diagonal, OptimalVector, HessianMatrix, MaxDiagonal };

std::string to_string(WeightScheme s);
WeightScheme parse_weight_scheme(const std::string& name);

bool needs_cross_covariance(WeightScheme s);

// Weights for one free term over its usable (converged) contributors,
// sensors ascending.
struct TermWeight {
  int term = -1;
  std::vector<int> sensors;
  std::vector<double> weights;
};

struct TermWeights {
  WeightScheme scheme = WeightScheme::Uniform;
  std::vector<TermWeight> terms;  // one per free term, ascending term index
};

// Per-sensor matrix weights in local free-scope coordinates (d_i x d_i).
struct MatrixWeights {
  std::vector<int> sensors;
  std::vector<Mat> weights;
};

// Normalized V^{-1} e, or nullopt when V is singular after jitter or the
// column sums add to zero.
std::optional<Vec> optimal_vector_weights(const Mat& v_alpha);

// The per-term weight rule. `qualities` are the contributors' 1/V̂_{α,α};
// `v_alpha` is required only for OptimalVector, which falls back to the
// normalized qualities when it is singular.
std::vector<double> term_weight_rule(WeightScheme scheme, std::span<const double> qualities,
                                     const Mat* v_alpha);

// Σ w θ / Σ w, summed in contributor order.
double combine_linear(std::span<const double> estimates, std::span<const double> weights);
// First index of the maximal weight (lowest sensor id on ties).
std::size_t select_max(std::span<const double> weights);

// Free terms covered by a fit collection, with their converged owners.
struct TermOwners {
  int term = -1;
  std::vector<int> sensors;   // all owners, ascending
  std::vector<int> usable;    // converged owners, ascending
};
std::vector<TermOwners> collect_owners(const std::vector<LocalFit>& fits);

TermWeights compute_weights(WeightScheme scheme, const std::vector<LocalFit>& fits,
                            const CrossCovTable* cross = nullptr);

MatrixWeights hessian_weights(const std::vector<LocalFit>& fits);

struct TermProvenance {
  int term = -1;
  std::vector<int> sensors;
  std::vector<double> weights;  // normalized; 0-1 indicator for max consensus
  int selected = -1;            // chosen sensor for max consensus
};

struct ConsensusEstimate {
  ParamVector theta;  // full layout; fixed terms keep their known values
  std::vector<int> free_terms;
  WeightScheme scheme = WeightScheme::Uniform;
  bool max_rule = false;
  std::vector<TermProvenance> provenance;
};

// Fits are indexed by sensor: fits[i].sensor() == i.
ConsensusEstimate linear_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                   const TermWeights& weights);
ConsensusEstimate max_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                const TermWeights& weights);
// (Σ W^i)^{-1} Σ W^i θ̂^i over the free terms. Needs a global solve, so it is
// for centralized analysis only.
ConsensusEstimate matrix_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                   const MatrixWeights& weights);

// Weights + combination for one scheme.
ConsensusEstimate one_step_estimate(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                    WeightScheme scheme, const CrossCovTable* cross = nullptr);

// argmin wᵀ V w subject to Σ w = 1, from the KKT system. Test oracle.
Vec brute_force_weights(const Mat& v_alpha);

}  // namespace pldist
