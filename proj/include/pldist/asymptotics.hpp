#pragma once

#include <string>
#include <vector>

#include "pldist/consensus.hpp"
#include "pldist/estimators.hpp"
#include "pldist/model.hpp"
#include "pldist/score_covariance.hpp"

namespace pldist {

// H^{-1} J H^{-1} for symmetric H; throws DegenerateError when H is singular
// after jitter.
Mat sandwich_variance(const Mat& h, const Mat& j);

// ---------------------------------------------------------------------------
// Exact (enumeration) asymptotics at the true parameter.

struct ExactLocalQuantities {
  LocalScope scope;
  Mat H_local;  // -E[∇²ℓ^i(θ*)]
  Mat J_local;  // var(∇ℓ^i(θ*))
  Mat V_local;  // H_local^{-1}
  // s^i(x) = H_local^{-1} ∇ℓ^i(θ*; x) tabulated over local configurations:
  // row r corresponds to x_{A(i)} with bit k of r set <=> x_{scope.nodes[k]} = +1.
  Mat score_table;
};

// Caches the enumerated distribution and every sensor's exact local
// quantities for one model.
class ExactAnalysis {
 public:
  explicit ExactAnalysis(const ModelSpec& model, int enum_limit = kDefaultEnumLimit);

  const ModelSpec& model() const { return model_; }
  const ExactDistribution& distribution() const { return dist_; }
  int sensor_count() const { return model_.node_count(); }
  const ExactLocalQuantities& local(int i) const { return locals_.at(static_cast<std::size_t>(i)); }

  // Row index into local(i).score_table for a global state.
  std::size_t local_pattern(int i, std::uint64_t state) const;

  // cov(s^i, s^j), d_i x d_j.
  Mat score_cov(int i, int j) const;
  // V_α over the owners of a free term, ascending sensor id.
  ScoreCovariance term_cov(int term) const;

  // 1/V^i_{α,α} with V^i = H_local^{-1}.
  double quality(int sensor, int term) const;

 private:
  ModelSpec model_;
  ExactDistribution dist_;
  std::vector<ExactLocalQuantities> locals_;
};

ExactLocalQuantities exact_local_quantities(const ModelSpec& model, int i, int enum_limit = kDefaultEnumLimit);
Mat exact_score_cov(const ModelSpec& model, int i, int j, int enum_limit = kDefaultEnumLimit);

// ---------------------------------------------------------------------------

enum class Method { Mle, JointMple, LinearUniform, LinearDiagonal, LinearOpt, MaxDiagonal, MatrixHessian };

std::string to_string(Method m);
Method parse_method(const std::string& name);
// The weight scheme behind a one-step method.
WeightScheme scheme_of(Method m);
bool is_one_step(Method m);

struct VarianceReport {
  std::string method;
  std::vector<int> free_terms;
  Mat covariance;  // asymptotic covariance of √n(θ̂ - θ*) over the free terms
  double trace = 0.0;
  double efficiency_ratio = 1.0;     // tr(V) / tr(V_mle)
  double relative_efficiency = 1.0;  // tr(V_mle) / tr(V)
};

VarianceReport make_report(std::string method, std::vector<int> free_terms, Mat covariance);

// Population weights from exact quantities (deterministic limits of the
// empirical weights).
TermWeights population_weights(const ExactAnalysis& analysis, WeightScheme scheme);
MatrixWeights population_hessian_weights(const ExactAnalysis& analysis);

// var(Σ_i w̃^i_α s^i_α) assembled over all free terms; weights are
// normalized per term. Max-consensus weights should already be indicators.
VarianceReport vector_consensus_variance_exact(const ExactAnalysis& analysis, const TermWeights& weights,
                                               std::string method);
// var((Σ W^i)^{-1} Σ W^i s^i).
VarianceReport matrix_consensus_variance_exact(const ExactAnalysis& analysis, const MatrixWeights& weights,
                                               std::string method);
// Inverse Fisher information of the full likelihood over the free terms.
VarianceReport mle_variance_exact(const ExactAnalysis& analysis);
// Sandwich H^{-1} J H^{-1} of the summed conditional likelihood, computed
// directly in global coordinates.
VarianceReport joint_mple_variance_exact(const ExactAnalysis& analysis);

// Exact asymptotic covariance of a method with population weights.
VarianceReport consensus_variance_exact(const ExactAnalysis& analysis, Method method);

// tr(V)/tr(V_mle); throws on mismatched term sets.
double efficiency(const VarianceReport& report, const VarianceReport& mle_report);
void attach_efficiency(VarianceReport& report, const VarianceReport& mle_report);

// ---------------------------------------------------------------------------
// Matrix-weight objective tr var(Σ_i W^i s^i).

// Covariance of the stacked local scores (s^1; ...; s^K).
struct StackedScoreCov {
  int dim = 0;                              // number of free terms
  std::vector<std::vector<int>> supports;   // per sensor: free positions of its scope
  Mat cov;                                  // (Σ d_i) x (Σ d_i)
};

StackedScoreCov exact_stacked_score_cov(const ExactAnalysis& analysis);

// weights[i] is dim x d_i (W^i restricted to its column support). Requires
// Σ_i W^i = identity (checked to 1e-9, reported rather than normalized).
double matrix_weight_mse(const std::vector<Mat>& weights, const StackedScoreCov& cov);

// W^i = (Σ_j H^j)^{-1} H^i in the dim x d_i layout above.
std::vector<Mat> normalized_matrix_weights(const std::vector<Mat>& local_weights,
                                           const std::vector<std::vector<int>>& supports, int dim);

// ---------------------------------------------------------------------------
// Empirical cross-covariance of exchanged scores.

// V̂_α from the first m score samples (m = 0 uses all n). Degenerate fits are
// excluded and listed in excluded_sensors.
ScoreCovariance empirical_cross_cov(const std::vector<LocalFit>& fits, int term, int m = 0);
CrossCovTable empirical_cross_cov_table(const std::vector<LocalFit>& fits, int m = 0);

// ---------------------------------------------------------------------------
// One-parameter, two-estimator toy case.

struct ToyCase {
  double v1 = 1.0;
  double v2 = 1.0;
  double v12 = 0.0;
};

void validate(const ToyCase& tc);

struct ToyVariances {
  double lin_unif = 0.0;
  double joint = 0.0;
  double lin_opt = 0.0;
  double max_opt = 0.0;
};

ToyVariances toy_variances(const ToyCase& tc);
// Optimal weight on estimator 1 (V^{-1}e normalized).
double toy_optimal_weight(const ToyCase& tc);

enum class ToyRegion { I, II, III };

struct ToyDominance {
  bool joint_beats_max = false;  // joint ⪯ maxOpt
  bool unif_beats_max = false;   // linUnif ⪯ maxOpt
  ToyRegion region() const;
};

// gamma = min(v1/v2, v2/v1) in (0, 1]; rho = v12 / sqrt(v1 v2) in [-1, 1].
ToyDominance toy_dominance(double gamma, double rho);
// The ToyCase with v2 = 1, v1 = gamma, v12 = rho * sqrt(gamma).
ToyCase toy_case_from(double gamma, double rho);

std::string to_string(ToyRegion r);

}  // namespace pldist
