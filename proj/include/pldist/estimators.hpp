#pragma once

#include <stdexcept>
#include <vector>

#include "pldist/linalg.hpp"
#include "pldist/model.hpp"

namespace pldist {

class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sensor i's view of β_i: which of its terms are estimated, the known values
// of the rest, and how each term's statistic is read off the local data
// X_{A(i)} (columns ordered as `nodes`).
struct LocalScope {
  int sensor = 0;
  std::vector<int> nodes;         // A(i), sorted; column order of the local data
  int self_column = 0;            // column of x_i within `nodes`
  std::vector<int> free_terms;    // β_i ∩ free, ascending dense indices
  std::vector<int> free_columns;  // statistic multiplier column per free term (-1: node term, multiplier 1)
  std::vector<int> fixed_terms;
  std::vector<int> fixed_columns;
  std::vector<double> fixed_values;

  int size() const { return static_cast<int>(free_terms.size()); }
  // Position of a dense term index within free_terms, or -1.
  int position(int term) const;
};

LocalScope make_local_scope(const ModelSpec& model, int i);

// X_{A(i)}: the columns of the global sample matrix a sensor stores.
SampleMatrix local_data(const MarkovGraph& g, const SampleMatrix& x, int i);

struct LogLikEval {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

// Mean log conditional likelihood (1/n) Σ_k log p(x_i^k | x_N(i)^k) as a
// function of the free scope parameters. Precomputes the per-sample
// statistic multipliers so repeated evaluations (Newton, ADMM) are cheap.
class ConditionalObjective {
 public:
  ConditionalObjective(const LocalScope& scope, const SampleMatrix& x_local);

  int dim() const { return static_cast<int>(design_.cols()); }
  int sample_count() const { return static_cast<int>(design_.rows()); }

  LogLikEval evaluate(const Vec& theta_free) const;
  double value(const Vec& theta_free) const;
  // Row k is ∇ log p(x_i^k | x_N(i)^k; θ).
  Mat per_sample_gradients(const Vec& theta_free) const;

 private:
  Vec fields(const Vec& theta_free) const;

  Mat design_;    // n x d statistic multipliers
  Vec offset_;    // contribution of fixed terms to the local field
  Vec response_;  // x_i^k
};

LogLikEval conditional_loglik(const LocalScope& scope, const Vec& theta_free, const SampleMatrix& x_local);

enum class FitStatus { Converged, Degenerate };

struct NewtonOptions {
  double grad_tol = 1e-10;
  int max_iter = 100;
  // |θ| beyond this flags quasi-separation.
  double divergence_bound = 25.0;
};

// Smallest eigenvalue of Ĵ accepted as non-singular. Gradient statistics are
// bounded by 2 in magnitude, so this is an absolute scale.
inline constexpr double kInformationFloor = 1e-12;

struct LocalFit {
  LocalScope scope;
  Vec theta_hat;
  Mat H_hat;   // -(1/n) Σ ∇²ℓ at θ̂
  Mat J_hat;   // (1/n) Σ ∇ℓ ∇ℓᵀ at θ̂
  Mat V_hat;   // Ĵ^{-1}
  Mat scores;  // n x d, row k = (Ĥ^{-1} ∇ℓ(θ̂; x^k))ᵀ
  FitStatus status = FitStatus::Degenerate;
  int iterations = 0;
  double grad_norm = 0.0;

  bool converged() const { return status == FitStatus::Converged; }
  int sensor() const { return scope.sensor; }
  int sample_count() const { return static_cast<int>(scores.rows()); }
  double estimate(int term) const;
  // 1/V̂_{α,α}: the per-term quality weight.
  double quality(int term) const;
};

LocalFit fit_local(const LocalScope& scope, const SampleMatrix& x_local, const Vec& init = Vec(),
                   const NewtonOptions& options = {});

// argmax ℓ(θ) − λᵀθ − Σ_a ρ_a/2 (θ_a − c_a)², the ADMM local step. Strictly
// concave for ρ > 0, so no divergence bound is applied.
struct PenalizedSolve {
  Vec theta;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

PenalizedSolve maximize_penalized(const ConditionalObjective& objective, const Vec& lambda, const Vec& rho,
                                  const Vec& center, const Vec& init, const NewtonOptions& options = {});

enum class GlobalMethod { ExactMle, JointMple };

struct GlobalFit {
  ParamVector theta;  // full layout; fixed terms keep their known values
  std::vector<int> free_terms;
  GlobalMethod method = GlobalMethod::JointMple;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

// `shape` supplies the graph, the free/fixed split and the known values of
// fixed terms; its free values are not used. `init` is over free terms
// (zero when empty).
GlobalFit fit_mle_exact(const ModelSpec& shape, const SampleMatrix& x, const Vec& init = Vec(),
                        int enum_limit = kDefaultEnumLimit, const NewtonOptions& options = {});

// Σ_i of the mean conditional log-likelihoods over the free parameters.
LogLikEval joint_pseudo_loglik(const ModelSpec& shape, const Vec& theta_free, const SampleMatrix& x);

GlobalFit fit_joint_mple_centralized(const ModelSpec& shape, const SampleMatrix& x, const Vec& init = Vec(),
                                     const NewtonOptions& options = {});

// Trace of accepted objective values from the last Newton run, for tests of
// monotone ascent.
struct NewtonTrace {
  std::vector<double> values;
};

GlobalFit fit_joint_mple_centralized(const ModelSpec& shape, const SampleMatrix& x, const Vec& init,
                                     const NewtonOptions& options, NewtonTrace* trace);

}  // namespace pldist
