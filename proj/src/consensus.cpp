#include "pldist/consensus.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace pldist {

std::string to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::Uniform: return "uniform";
    case WeightScheme::Diagonal: return "diagonal";
    case WeightScheme::OptimalVector: return "optimal-vector";
    case WeightScheme::HessianMatrix: return "hessian-matrix";
    case WeightScheme::MaxDiagonal: return "max-diagonal";
  }
  return "unknown";
}

WeightScheme parse_weight_scheme(const std::string& name) {
  for (auto s : {WeightScheme::Uniform, WeightScheme::Diagonal, WeightScheme::OptimalVector,
                 WeightScheme::HessianMatrix, WeightScheme::MaxDiagonal}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown weight scheme '" + name + "'");
}

bool needs_cross_covariance(WeightScheme s) { return s == WeightScheme::OptimalVector; }

std::optional<Vec> optimal_vector_weights(const Mat& v_alpha) {
  if (v_alpha.rows() == 0 || v_alpha.rows() != v_alpha.cols()) return std::nullopt;
  std::optional<Vec> w;
  const bool diagonal = (v_alpha - Mat(v_alpha.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  if (diagonal && (v_alpha.diagonal().array() > 0.0).all()) {
    w = Vec(v_alpha.diagonal().cwiseInverse());
  } else {
    w = spd_solve(v_alpha, Vec::Ones(v_alpha.rows()));
  }
  if (!w) return std::nullopt;
  const double total = w->sum();
  if (!(std::abs(total) > 0.0) || !std::isfinite(total)) return std::nullopt;
  return Vec(*w / total);
}

std::vector<double> term_weight_rule(WeightScheme scheme, std::span<const double> qualities, const Mat* v_alpha) {
  std::vector<double> w(qualities.begin(), qualities.end());
  switch (scheme) {
    case WeightScheme::Uniform:
      std::fill(w.begin(), w.end(), 1.0);
      return w;
    case WeightScheme::Diagonal:
    case WeightScheme::MaxDiagonal:
      return w;
    case WeightScheme::OptimalVector: {
      if (!v_alpha) throw std::invalid_argument("optimal-vector weights need the score cross-covariance");
      if (v_alpha->rows() != static_cast<Eigen::Index>(qualities.size())) {
        throw std::invalid_argument("cross-covariance size does not match contributors");
      }
      if (auto opt = optimal_vector_weights(*v_alpha)) return {opt->data(), opt->data() + opt->size()};
      double total = 0.0;
      for (double q : w) total += q;
      for (double& q : w) q /= total;
      return w;
    }
    case WeightScheme::HessianMatrix:
      break;
  }
  throw std::invalid_argument("hessian-matrix weights are matrices; use hessian_weights()");
}

double combine_linear(std::span<const double> estimates, std::span<const double> weights) {
  if (estimates.size() != weights.size() || estimates.empty()) {
    throw std::invalid_argument("combine_linear: estimates and weights must be non-empty and aligned");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    num += weights[k] * estimates[k];
    den += weights[k];
  }
  if (den == 0.0 || !std::isfinite(den)) throw DegenerateError("linear consensus weights sum to zero");
  return num / den;
}

std::size_t select_max(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("select_max: no candidates");
  std::size_t best = 0;
  for (std::size_t k = 1; k < weights.size(); ++k) {
    if (weights[k] > weights[best]) best = k;
  }
  return best;
}

std::vector<TermOwners> collect_owners(const std::vector<LocalFit>& fits) {
  std::map<int, TermOwners> by_term;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (fits[i].sensor() != static_cast<int>(i)) throw std::invalid_argument("fits must be indexed by sensor id");
    for (int t : fits[i].scope.free_terms) {
      TermOwners& o = by_term[t];
      o.term = t;
      o.sensors.push_back(static_cast<int>(i));
      if (fits[i].converged()) o.usable.push_back(static_cast<int>(i));
    }
  }
  std::vector<TermOwners> out;
  out.reserve(by_term.size());
  for (auto& [t, o] : by_term) out.push_back(std::move(o));
  return out;
}

TermWeights compute_weights(WeightScheme scheme, const std::vector<LocalFit>& fits, const CrossCovTable* cross) {
  if (scheme == WeightScheme::HessianMatrix) {
    throw std::invalid_argument("hessian-matrix weights are matrices; use hessian_weights()");
  }
  TermWeights out;
  out.scheme = scheme;
  for (const TermOwners& owners : collect_owners(fits)) {
    if (owners.usable.empty()) {
      throw DegenerateError("every estimate of term " + std::to_string(owners.term) + " is degenerate");
    }
    TermWeight tw;
    tw.term = owners.term;
    tw.sensors = owners.usable;
    if (owners.usable.size() == 1) {
      tw.weights = {1.0};
      out.terms.push_back(std::move(tw));
      continue;
    }
    std::vector<double> qualities;
    for (int s : owners.usable) qualities.push_back(fits[static_cast<std::size_t>(s)].quality(owners.term));
    const Mat* v_alpha = nullptr;
    if (needs_cross_covariance(scheme)) {
      if (!cross) throw std::invalid_argument("optimal-vector weights need the score exchange (cross-covariances)");
      auto it = cross->find(owners.term);
      if (it == cross->end() || it->second.sensors != owners.usable) {
        throw std::invalid_argument("missing cross-covariance for term " + std::to_string(owners.term));
      }
      v_alpha = &it->second.matrix;
    }
    tw.weights = term_weight_rule(scheme, qualities, v_alpha);
    out.terms.push_back(std::move(tw));
  }
  return out;
}

MatrixWeights hessian_weights(const std::vector<LocalFit>& fits) {
  MatrixWeights out;
  for (const LocalFit& f : fits) {
    out.sensors.push_back(f.sensor());
    out.weights.push_back(f.converged() ? f.H_hat : Mat::Zero(f.scope.size(), f.scope.size()));
  }
  return out;
}

namespace {

void check_shape(const ModelSpec& shape, const std::vector<LocalFit>& fits) {
  if (static_cast<int>(fits.size()) != shape.node_count()) {
    throw std::invalid_argument("expected one local fit per sensor");
  }
}

ConsensusEstimate start_estimate(const ModelSpec& shape, WeightScheme scheme, bool max_rule) {
  ConsensusEstimate est;
  est.theta = shape.theta();
  est.free_terms = shape.free_terms();
  est.scheme = scheme;
  est.max_rule = max_rule;
  return est;
}

// Usable (converged) subset of a term's weights.
void usable_candidates(const std::vector<LocalFit>& fits, const TermWeight& tw, std::vector<int>& sensors,
                       std::vector<double>& estimates, std::vector<double>& weights) {
  sensors.clear();
  estimates.clear();
  weights.clear();
  if (tw.sensors.size() != tw.weights.size()) throw std::invalid_argument("term weights misaligned");
  for (std::size_t k = 0; k < tw.sensors.size(); ++k) {
    const LocalFit& f = fits.at(static_cast<std::size_t>(tw.sensors[k]));
    if (!f.converged()) continue;
    sensors.push_back(tw.sensors[k]);
    estimates.push_back(f.estimate(tw.term));
    weights.push_back(tw.weights[k]);
  }
  if (sensors.empty()) throw DegenerateError("every estimate of term " + std::to_string(tw.term) + " is degenerate");
}

void check_coverage(const ModelSpec& shape, const ConsensusEstimate& est) {
  if (est.provenance.size() != shape.free_terms().size()) {
    throw std::invalid_argument("weights do not cover every free term");
  }
}

}  // namespace

ConsensusEstimate linear_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                   const TermWeights& weights) {
  check_shape(shape, fits);
  ConsensusEstimate est = start_estimate(shape, weights.scheme, false);
  std::vector<int> sensors;
  std::vector<double> estimates, w;
  for (const TermWeight& tw : weights.terms) {
    if (!shape.is_free(tw.term)) throw std::invalid_argument("weights given for a fixed term");
    usable_candidates(fits, tw, sensors, estimates, w);
    est.theta(tw.term) = combine_linear(estimates, w);
    double total = 0.0;
    for (double x : w) total += x;
    TermProvenance prov{tw.term, sensors, {}, -1};
    for (double x : w) prov.weights.push_back(x / total);
    est.provenance.push_back(std::move(prov));
  }
  check_coverage(shape, est);
  return est;
}

ConsensusEstimate max_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                const TermWeights& weights) {
  check_shape(shape, fits);
  ConsensusEstimate est = start_estimate(shape, weights.scheme, true);
  std::vector<int> sensors;
  std::vector<double> estimates, w;
  for (const TermWeight& tw : weights.terms) {
    if (!shape.is_free(tw.term)) throw std::invalid_argument("weights given for a fixed term");
    usable_candidates(fits, tw, sensors, estimates, w);
    const std::size_t best = select_max(w);
    est.theta(tw.term) = estimates[best];
    TermProvenance prov{tw.term, sensors, std::vector<double>(sensors.size(), 0.0), sensors[best]};
    prov.weights[best] = 1.0;
    est.provenance.push_back(std::move(prov));
  }
  check_coverage(shape, est);
  return est;
}

ConsensusEstimate matrix_consensus(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                   const MatrixWeights& weights) {
  check_shape(shape, fits);
  if (weights.weights.size() != fits.size()) throw std::invalid_argument("expected one weight matrix per sensor");
  const int d = shape.free_count();
  Mat total = Mat::Zero(d, d);
  Vec rhs = Vec::Zero(d);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const LocalFit& f = fits[i];
    if (!f.converged()) continue;
    const Mat& w = weights.weights[i];
    const int di = f.scope.size();
    if (w.rows() != di || w.cols() != di) throw std::invalid_argument("matrix weight does not match sensor scope");
    const Vec contrib = w * f.theta_hat;
    for (int a = 0; a < di; ++a) {
      const int ga = shape.free_position(f.scope.free_terms[static_cast<std::size_t>(a)]);
      rhs(ga) += contrib(a);
      for (int b = 0; b < di; ++b) {
        total(ga, shape.free_position(f.scope.free_terms[static_cast<std::size_t>(b)])) += w(a, b);
      }
    }
  }
  auto solution = lu_solve(total, rhs);
  if (!solution) throw DegenerateError("matrix consensus weight sum is singular");

  ConsensusEstimate est = start_estimate(shape, WeightScheme::HessianMatrix, false);
  est.theta = shape.with_free_values(*solution);
  for (const TermOwners& owners : collect_owners(fits)) {
    est.provenance.push_back({owners.term, owners.usable, {}, -1});
  }
  return est;
}

ConsensusEstimate one_step_estimate(const ModelSpec& shape, const std::vector<LocalFit>& fits,
                                    WeightScheme scheme, const CrossCovTable* cross) {
  switch (scheme) {
    case WeightScheme::HessianMatrix:
      return matrix_consensus(shape, fits, hessian_weights(fits));
    case WeightScheme::MaxDiagonal:
      return max_consensus(shape, fits, compute_weights(scheme, fits, cross));
    default:
      return linear_consensus(shape, fits, compute_weights(scheme, fits, cross));
  }
}

Vec brute_force_weights(const Mat& v_alpha) {
  const Eigen::Index k = v_alpha.rows();
  if (k == 0 || v_alpha.cols() != k) throw std::invalid_argument("brute_force_weights: need a square matrix");
  Mat kkt = Mat::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = 2.0 * v_alpha;
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Vec rhs = Vec::Zero(k + 1);
  rhs(k) = 1.0;
  auto sol = lu_solve(kkt, rhs);
  if (!sol) throw std::domain_error("brute_force_weights: singular stationarity system");
  return sol->head(k);
}

}  // namespace pldist
