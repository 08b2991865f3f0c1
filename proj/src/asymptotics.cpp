#include "pldist/asymptotics.hpp"

#include <algorithm>
#include <cmath>

namespace pldist {

double score_second_moment(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("score samples must be non-empty and aligned");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s / static_cast<double>(a.size());
}

Mat score_moment_matrix(const std::vector<std::span<const double>>& columns) {
  const auto k = static_cast<Eigen::Index>(columns.size());
  Mat out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      out(a, b) = out(b, a) =
          score_second_moment(columns[static_cast<std::size_t>(a)], columns[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

Mat sandwich_variance(const Mat& h, const Mat& j) {
  if (h.rows() != h.cols() || j.rows() != j.cols() || h.rows() != j.rows()) {
    throw std::invalid_argument("sandwich_variance: H and J must be square and the same size");
  }
  auto v = sandwich(h, j);
  if (!v) throw DegenerateError("sandwich_variance: H is singular");
  return *v;
}

// ---------------------------------------------------------------------------

namespace {

double sech2(double m) {
  const double c = std::cosh(m);
  return 1.0 / (c * c);
}

std::size_t pattern_of(std::uint64_t state, const std::vector<int>& nodes) {
  std::size_t r = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if ((state >> nodes[k]) & 1U) r |= std::size_t{1} << k;
  }
  return r;
}

ExactLocalQuantities local_quantities(const ModelSpec& model, const ExactDistribution& dist, int i) {
  ExactLocalQuantities q;
  q.scope = make_local_scope(model, i);
  const LocalScope& scope = q.scope;
  const int d = scope.size();
  const std::size_t patterns = std::size_t{1} << scope.nodes.size();

  std::vector<double> marginal(patterns, 0.0);
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) marginal[pattern_of(s, scope.nodes)] += dist.probabilities()[s];

  Mat grads(static_cast<Eigen::Index>(patterns), d);
  Mat h = Mat::Zero(d, d);
  Mat second = Mat::Zero(d, d);
  Vec mean = Vec::Zero(d);
  Vec c(d);
  for (std::size_t r = 0; r < patterns; ++r) {
    auto spin = [&](int col) { return ((r >> col) & 1U) ? 1.0 : -1.0; };
    double field = 0.0;
    for (int a = 0; a < d; ++a) {
      const int col = scope.free_columns[static_cast<std::size_t>(a)];
      c(a) = col < 0 ? 1.0 : spin(col);
      field += model.theta()(scope.free_terms[static_cast<std::size_t>(a)]) * c(a);
    }
    for (std::size_t b = 0; b < scope.fixed_terms.size(); ++b) {
      const int col = scope.fixed_columns[b];
      field += scope.fixed_values[b] * (col < 0 ? 1.0 : spin(col));
    }
    const Vec g = (spin(scope.self_column) - std::tanh(field)) * c;
    grads.row(static_cast<Eigen::Index>(r)) = g.transpose();
    const double p = marginal[r];
    h.noalias() += p * sech2(field) * c * c.transpose();
    second.noalias() += p * g * g.transpose();
    mean += p * g;
  }
  q.H_local = symmetrize(h);
  q.J_local = symmetrize(second - mean * mean.transpose());
  if (d == 0) {
    q.V_local = Mat::Zero(0, 0);
    q.score_table = Mat::Zero(static_cast<Eigen::Index>(patterns), 0);
    return q;
  }
  auto v = spd_inverse(q.H_local);
  if (!v) throw DegenerateError("exact local Hessian of sensor " + std::to_string(i) + " is singular");
  q.V_local = *v;
  q.score_table = grads * q.V_local;
  return q;
}

}  // namespace

ExactAnalysis::ExactAnalysis(const ModelSpec& model, int enum_limit)
    : model_(model), dist_(model.graph(), model.theta(), enum_limit) {
  for (int i = 0; i < model_.node_count(); ++i) locals_.push_back(local_quantities(model_, dist_, i));
}

std::size_t ExactAnalysis::local_pattern(int i, std::uint64_t state) const {
  return pattern_of(state, local(i).scope.nodes);
}

Mat ExactAnalysis::score_cov(int i, int j) const {
  const ExactLocalQuantities& qi = local(i);
  const ExactLocalQuantities& qj = local(j);
  Mat out = Mat::Zero(qi.scope.size(), qj.scope.size());
  for (std::uint64_t s = 0; s < dist_.state_count(); ++s) {
    const double p = dist_.probabilities()[s];
    out.noalias() += p * qi.score_table.row(static_cast<Eigen::Index>(local_pattern(i, s))).transpose() *
                     qj.score_table.row(static_cast<Eigen::Index>(local_pattern(j, s)));
  }
  return out;
}

ScoreCovariance ExactAnalysis::term_cov(int term) const {
  if (!model_.is_free(term)) throw std::invalid_argument("term_cov: term is not free");
  ScoreCovariance out;
  out.term = term;
  out.sensors = term_owners(model_.graph(), term);
  out.provenance = Provenance::Exact;
  const auto k = static_cast<Eigen::Index>(out.sensors.size());
  std::vector<int> pos;
  for (int s : out.sensors) pos.push_back(local(s).scope.position(term));
  out.matrix = Mat::Zero(k, k);
  Vec v(k);
  for (std::uint64_t st = 0; st < dist_.state_count(); ++st) {
    for (Eigen::Index a = 0; a < k; ++a) {
      const int s = out.sensors[static_cast<std::size_t>(a)];
      v(a) = local(s).score_table(static_cast<Eigen::Index>(local_pattern(s, st)), pos[static_cast<std::size_t>(a)]);
    }
    out.matrix.noalias() += dist_.probabilities()[st] * v * v.transpose();
  }
  out.matrix = symmetrize(out.matrix);
  return out;
}

double ExactAnalysis::quality(int sensor, int term) const {
  const ExactLocalQuantities& q = local(sensor);
  const int a = q.scope.position(term);
  if (a < 0) throw std::out_of_range("term not in sensor scope");
  return 1.0 / q.V_local(a, a);
}

ExactLocalQuantities exact_local_quantities(const ModelSpec& model, int i, int enum_limit) {
  ExactDistribution dist(model.graph(), model.theta(), enum_limit);
  return local_quantities(model, dist, i);
}

Mat exact_score_cov(const ModelSpec& model, int i, int j, int enum_limit) {
  return ExactAnalysis(model, enum_limit).score_cov(i, j);
}

// ---------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::Mle: return "mle";
    case Method::JointMple: return "mple";
    case Method::LinearUniform: return "linear-uniform";
    case Method::LinearDiagonal: return "linear-diagonal";
    case Method::LinearOpt: return "linear-opt";
    case Method::MaxDiagonal: return "max-diagonal";
    case Method::MatrixHessian: return "matrix-hessian";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::Mle, Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt,
                 Method::MaxDiagonal, Method::MatrixHessian}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + name + "'");
}

WeightScheme scheme_of(Method m) {
  switch (m) {
    case Method::LinearUniform: return WeightScheme::Uniform;
    case Method::LinearDiagonal: return WeightScheme::Diagonal;
    case Method::LinearOpt: return WeightScheme::OptimalVector;
    case Method::MaxDiagonal: return WeightScheme::MaxDiagonal;
    case Method::MatrixHessian: return WeightScheme::HessianMatrix;
    default: break;
  }
  throw std::invalid_argument("method " + to_string(m) + " is not a one-step consensus");
}

bool is_one_step(Method m) {
  return m == Method::LinearUniform || m == Method::LinearDiagonal || m == Method::LinearOpt ||
         m == Method::MaxDiagonal || m == Method::MatrixHessian;
}

VarianceReport make_report(std::string method, std::vector<int> free_terms, Mat covariance) {
  VarianceReport r;
  r.method = std::move(method);
  r.free_terms = std::move(free_terms);
  r.covariance = symmetrize(covariance);
  r.trace = r.covariance.trace();
  return r;
}

TermWeights population_weights(const ExactAnalysis& analysis, WeightScheme scheme) {
  if (scheme == WeightScheme::HessianMatrix) throw std::invalid_argument("use population_hessian_weights()");
  const ModelSpec& model = analysis.model();
  TermWeights out;
  out.scheme = scheme;
  for (int term : model.free_terms()) {
    TermWeight tw;
    tw.term = term;
    tw.sensors = term_owners(model.graph(), term);
    if (tw.sensors.size() == 1) {
      tw.weights = {1.0};
    } else {
      std::vector<double> qualities;
      for (int s : tw.sensors) qualities.push_back(analysis.quality(s, term));
      Mat v_alpha;
      if (needs_cross_covariance(scheme)) v_alpha = analysis.term_cov(term).matrix;
      tw.weights = term_weight_rule(scheme, qualities, needs_cross_covariance(scheme) ? &v_alpha : nullptr);
    }
    out.terms.push_back(std::move(tw));
  }
  return out;
}

MatrixWeights population_hessian_weights(const ExactAnalysis& analysis) {
  MatrixWeights out;
  for (int i = 0; i < analysis.sensor_count(); ++i) {
    out.sensors.push_back(i);
    out.weights.push_back(analysis.local(i).H_local);
  }
  return out;
}

namespace {

TermWeights to_indicator(TermWeights w) {
  for (TermWeight& tw : w.terms) {
    const std::size_t best = select_max(tw.weights);
    std::fill(tw.weights.begin(), tw.weights.end(), 0.0);
    tw.weights[best] = 1.0;
  }
  return w;
}

}  // namespace

VarianceReport vector_consensus_variance_exact(const ExactAnalysis& analysis, const TermWeights& weights,
                                               std::string method) {
  const ModelSpec& model = analysis.model();
  const int d = model.free_count();
  if (static_cast<int>(weights.terms.size()) != d) throw std::invalid_argument("weights must cover every free term");

  struct Piece {
    int sensor;
    int local_pos;
    int global_pos;
    double weight;
  };
  std::vector<Piece> pieces;
  for (const TermWeight& tw : weights.terms) {
    double total = 0.0;
    for (double w : tw.weights) total += w;
    if (total == 0.0 || !std::isfinite(total)) throw DegenerateError("weight sum is zero for term " + std::to_string(tw.term));
    for (std::size_t k = 0; k < tw.sensors.size(); ++k) {
      const int s = tw.sensors[k];
      pieces.push_back({s, analysis.local(s).scope.position(tw.term), model.free_position(tw.term), tw.weights[k] / total});
    }
  }

  const ExactDistribution& dist = analysis.distribution();
  Mat v = Mat::Zero(d, d);
  Vec t(d);
  std::vector<std::size_t> pattern(static_cast<std::size_t>(analysis.sensor_count()));
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    for (int i = 0; i < analysis.sensor_count(); ++i) pattern[static_cast<std::size_t>(i)] = analysis.local_pattern(i, s);
    t.setZero();
    for (const Piece& pc : pieces) {
      t(pc.global_pos) += pc.weight * analysis.local(pc.sensor).score_table(
                                          static_cast<Eigen::Index>(pattern[static_cast<std::size_t>(pc.sensor)]),
                                          pc.local_pos);
    }
    v.noalias() += dist.probabilities()[s] * t * t.transpose();
  }
  return make_report(std::move(method), model.free_terms(), v);
}

std::vector<Mat> normalized_matrix_weights(const std::vector<Mat>& local_weights,
                                           const std::vector<std::vector<int>>& supports, int dim) {
  if (local_weights.size() != supports.size()) throw std::invalid_argument("one support per weight matrix");
  Mat total = Mat::Zero(dim, dim);
  for (std::size_t i = 0; i < local_weights.size(); ++i) {
    const auto& sup = supports[i];
    for (std::size_t a = 0; a < sup.size(); ++a) {
      for (std::size_t b = 0; b < sup.size(); ++b) {
        total(sup[a], sup[b]) += local_weights[i](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  auto inv = lu_inverse(total);
  if (!inv) throw DegenerateError("matrix weight sum is singular");
  std::vector<Mat> out;
  for (std::size_t i = 0; i < local_weights.size(); ++i) {
    const auto& sup = supports[i];
    Mat embedded = Mat::Zero(dim, static_cast<Eigen::Index>(sup.size()));
    for (std::size_t a = 0; a < sup.size(); ++a) embedded.row(sup[a]) = local_weights[i].row(static_cast<Eigen::Index>(a));
    out.push_back(*inv * embedded);
  }
  return out;
}

namespace {

std::vector<std::vector<int>> free_supports(const ExactAnalysis& analysis) {
  std::vector<std::vector<int>> supports;
  for (int i = 0; i < analysis.sensor_count(); ++i) {
    std::vector<int> sup;
    for (int t : analysis.local(i).scope.free_terms) sup.push_back(analysis.model().free_position(t));
    supports.push_back(std::move(sup));
  }
  return supports;
}

}  // namespace

VarianceReport matrix_consensus_variance_exact(const ExactAnalysis& analysis, const MatrixWeights& weights,
                                               std::string method) {
  const ModelSpec& model = analysis.model();
  const int d = model.free_count();
  if (static_cast<int>(weights.weights.size()) != analysis.sensor_count()) {
    throw std::invalid_argument("expected one weight matrix per sensor");
  }
  const std::vector<Mat> mixed = normalized_matrix_weights(weights.weights, free_supports(analysis), d);
  const ExactDistribution& dist = analysis.distribution();
  Mat v = Mat::Zero(d, d);
  Vec t(d);
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    t.setZero();
    for (int i = 0; i < analysis.sensor_count(); ++i) {
      if (mixed[static_cast<std::size_t>(i)].cols() == 0) continue;
      t.noalias() += mixed[static_cast<std::size_t>(i)] *
                     analysis.local(i).score_table.row(static_cast<Eigen::Index>(analysis.local_pattern(i, s))).transpose();
    }
    v.noalias() += dist.probabilities()[s] * t * t.transpose();
  }
  return make_report(std::move(method), model.free_terms(), v);
}

VarianceReport mle_variance_exact(const ExactAnalysis& analysis) {
  const ModelSpec& model = analysis.model();
  const Mat full = exact_statistic_covariance(model.graph(), analysis.distribution());
  const int d = model.free_count();
  Mat fisher(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      fisher(a, b) = full(model.free_terms()[static_cast<std::size_t>(a)], model.free_terms()[static_cast<std::size_t>(b)]);
    }
  }
  auto v = spd_inverse(fisher);
  if (!v) throw DegenerateError("Fisher information is singular");
  return make_report(to_string(Method::Mle), model.free_terms(), *v);
}

VarianceReport joint_mple_variance_exact(const ExactAnalysis& analysis) {
  const ModelSpec& model = analysis.model();
  const MarkovGraph& g = model.graph();
  const ParamVector& theta = model.theta();
  const int p = g.node_count();
  const int d = model.free_count();
  const ExactDistribution& dist = analysis.distribution();

  Mat h = Mat::Zero(d, d);
  Mat second = Mat::Zero(d, d);
  Vec mean = Vec::Zero(d);
  Vec grad(d);
  Vec residual(p), curvature(p);
  std::vector<std::pair<int, double>> stat;  // sparse ∂(field_i)/∂θ over free positions
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    const double prob = dist.probabilities()[s];
    const std::vector<std::int8_t> x = dist.configuration(s);
    for (int i = 0; i < p; ++i) {
      const double m = local_field(g, theta, i, x);
      residual(i) = x[static_cast<std::size_t>(i)] - std::tanh(m);
      curvature(i) = sech2(m);
    }
    grad.setZero();
    for (int i = 0; i < p; ++i) {
      if (model.is_free(i)) grad(model.free_position(i)) += residual(i);
    }
    for (int k = 0; k < g.edge_count(); ++k) {
      const int term = p + k;
      if (!model.is_free(term)) continue;
      const Edge& e = g.edges()[static_cast<std::size_t>(k)];
      grad(model.free_position(term)) += residual(e.u) * x[static_cast<std::size_t>(e.v)] +
                                         residual(e.v) * x[static_cast<std::size_t>(e.u)];
    }
    for (int i = 0; i < p; ++i) {
      stat.clear();
      if (model.is_free(i)) stat.emplace_back(model.free_position(i), 1.0);
      for (int j : g.neighbors(i)) {
        const int term = p + g.edge_index(i, j);
        if (model.is_free(term)) stat.emplace_back(model.free_position(term), x[static_cast<std::size_t>(j)]);
      }
      for (auto [a, ca] : stat) {
        for (auto [b, cb] : stat) h(a, b) += prob * curvature(i) * ca * cb;
      }
    }
    second.noalias() += prob * grad * grad.transpose();
    mean += prob * grad;
  }
  const Mat j = symmetrize(second - mean * mean.transpose());
  return make_report(to_string(Method::JointMple), model.free_terms(), sandwich_variance(symmetrize(h), j));
}

VarianceReport consensus_variance_exact(const ExactAnalysis& analysis, Method method) {
  switch (method) {
    case Method::Mle:
      return mle_variance_exact(analysis);
    case Method::JointMple:
      return joint_mple_variance_exact(analysis);
    case Method::MatrixHessian:
      return matrix_consensus_variance_exact(analysis, population_hessian_weights(analysis), to_string(method));
    case Method::MaxDiagonal:
      return vector_consensus_variance_exact(
          analysis, to_indicator(population_weights(analysis, WeightScheme::MaxDiagonal)), to_string(method));
    default:
      return vector_consensus_variance_exact(analysis, population_weights(analysis, scheme_of(method)),
                                             to_string(method));
  }
}

double efficiency(const VarianceReport& report, const VarianceReport& mle_report) {
  if (report.free_terms != mle_report.free_terms) throw std::invalid_argument("efficiency: reports cover different terms");
  if (!(mle_report.trace > 0)) throw std::invalid_argument("efficiency: reference trace must be positive");
  return report.trace / mle_report.trace;
}

void attach_efficiency(VarianceReport& report, const VarianceReport& mle_report) {
  report.efficiency_ratio = efficiency(report, mle_report);
  report.relative_efficiency = 1.0 / report.efficiency_ratio;
}

// ---------------------------------------------------------------------------

StackedScoreCov exact_stacked_score_cov(const ExactAnalysis& analysis) {
  StackedScoreCov out;
  out.dim = analysis.model().free_count();
  out.supports = free_supports(analysis);
  std::vector<Eigen::Index> offset;
  Eigen::Index total = 0;
  for (const auto& sup : out.supports) {
    offset.push_back(total);
    total += static_cast<Eigen::Index>(sup.size());
  }
  out.cov = Mat::Zero(total, total);
  Vec z(total);
  const ExactDistribution& dist = analysis.distribution();
  for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
    for (int i = 0; i < analysis.sensor_count(); ++i) {
      const Mat& table = analysis.local(i).score_table;
      z.segment(offset[static_cast<std::size_t>(i)], table.cols()) =
          table.row(static_cast<Eigen::Index>(analysis.local_pattern(i, s))).transpose();
    }
    out.cov.noalias() += dist.probabilities()[s] * z * z.transpose();
  }
  out.cov = symmetrize(out.cov);
  return out;
}

double matrix_weight_mse(const std::vector<Mat>& weights, const StackedScoreCov& cov) {
  if (weights.size() != cov.supports.size()) throw std::invalid_argument("expected one weight matrix per sensor");
  const int d = cov.dim;
  Mat sum = Mat::Zero(d, d);
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& sup = cov.supports[i];
    if (weights[i].rows() != d || weights[i].cols() != static_cast<Eigen::Index>(sup.size())) {
      throw std::invalid_argument("weight matrix " + std::to_string(i) + " has the wrong shape");
    }
    for (std::size_t a = 0; a < sup.size(); ++a) sum.col(sup[a]) += weights[i].col(static_cast<Eigen::Index>(a));
    total += static_cast<Eigen::Index>(sup.size());
  }
  if (total != cov.cov.rows()) throw std::invalid_argument("stacked covariance does not match supports");
  const double violation = (sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  if (violation > 1e-9) {
    throw std::invalid_argument("matrix weights violate sum W^i = I (max deviation " + std::to_string(violation) + ")");
  }
  Mat stacked(d, total);
  Eigen::Index off = 0;
  for (const Mat& w : weights) {
    stacked.middleCols(off, w.cols()) = w;
    off += w.cols();
  }
  return (stacked * cov.cov * stacked.transpose()).trace();
}

// ---------------------------------------------------------------------------

ScoreCovariance empirical_cross_cov(const std::vector<LocalFit>& fits, int term, int m) {
  ScoreCovariance out;
  out.term = term;
  out.provenance = Provenance::Empirical;
  int n = -1;
  for (const LocalFit& f : fits) {
    if (f.scope.position(term) < 0) continue;
    if (!f.converged()) {
      out.excluded_sensors.push_back(f.sensor());
      continue;
    }
    if (n >= 0 && f.sample_count() != n) throw std::invalid_argument("fits disagree on the sample count");
    n = f.sample_count();
    out.sensors.push_back(f.sensor());
  }
  if (out.sensors.empty()) throw DegenerateError("no converged estimate of term " + std::to_string(term));
  if (m == 0) m = n;
  if (m < 0 || m > n) throw std::invalid_argument("subsample size must be in [1, n]");

  std::vector<std::span<const double>> cols;
  for (int s : out.sensors) {
    const LocalFit& f = fits[static_cast<std::size_t>(s)];
    cols.emplace_back(f.scores.col(f.scope.position(term)).data(), static_cast<std::size_t>(m));
  }
  out.matrix = score_moment_matrix(cols);
  return out;
}

CrossCovTable empirical_cross_cov_table(const std::vector<LocalFit>& fits, int m) {
  CrossCovTable table;
  for (const TermOwners& owners : collect_owners(fits)) {
    if (owners.usable.size() < 2) continue;
    table.emplace(owners.term, empirical_cross_cov(fits, owners.term, m));
  }
  return table;
}

// ---------------------------------------------------------------------------

void validate(const ToyCase& tc) {
  if (!(tc.v1 > 0) || !(tc.v2 > 0)) throw std::invalid_argument("toy variances must be positive");
  if (tc.v12 * tc.v12 > tc.v1 * tc.v2 * (1.0 + 1e-12)) throw std::invalid_argument("toy covariance exceeds the PSD bound");
}

namespace {

double toy_denominator(const ToyCase& tc) { return tc.v1 + tc.v2 - 2.0 * tc.v12; }

bool toy_degenerate(const ToyCase& tc) { return toy_denominator(tc) <= 1e-15 * (tc.v1 + tc.v2); }

}  // namespace

double toy_optimal_weight(const ToyCase& tc) {
  validate(tc);
  if (toy_degenerate(tc)) return 0.5;
  return (tc.v2 - tc.v12) / toy_denominator(tc);
}

ToyVariances toy_variances(const ToyCase& tc) {
  validate(tc);
  ToyVariances out;
  const double s = tc.v1 + tc.v2;
  out.lin_unif = 0.25 * (s + 2.0 * tc.v12);
  out.joint = tc.v1 * tc.v2 * (s + 2.0 * tc.v12) / (s * s);
  out.lin_opt = toy_degenerate(tc) ? tc.v1 : (tc.v1 * tc.v2 - tc.v12 * tc.v12) / toy_denominator(tc);
  out.max_opt = std::min(tc.v1, tc.v2);
  return out;
}

ToyRegion ToyDominance::region() const {
  if (unif_beats_max) return ToyRegion::I;
  if (joint_beats_max) return ToyRegion::II;
  return ToyRegion::III;
}

ToyDominance toy_dominance(double gamma, double rho) {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(rho >= -1 && rho <= 1)) throw std::invalid_argument("rho must be in [-1, 1]");
  const double root = std::sqrt(gamma);
  ToyDominance out;
  out.joint_beats_max = rho <= 0.5 * root * (gamma + 1.0);
  out.unif_beats_max = rho <= (3.0 * gamma - 1.0) / (2.0 * root);
  return out;
}

ToyCase toy_case_from(double gamma, double rho) { return {gamma, 1.0, rho * std::sqrt(gamma)}; }

std::string to_string(ToyRegion r) {
  switch (r) {
    case ToyRegion::I: return "I";
    case ToyRegion::II: return "II";
    case ToyRegion::III: return "III";
  }
  return "?";
}

}  // namespace pldist
