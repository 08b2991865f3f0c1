#include "pldist/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pldist {

namespace {

// log σ(z), stable for large |z|.
double log_logistic(double z) {
  if (z >= 0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double sech2(double m) {
  const double c = std::cosh(m);
  return 1.0 / (c * c);
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

struct NewtonResult {
  Vec theta;
  LogLikEval last;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool diverged = false;
  bool singular = false;
};

// Damped Newton ascent on a concave objective: full step, halved until the
// objective does not decrease.
template <class Eval>
NewtonResult newton_maximize(Eval&& eval, Vec theta, const NewtonOptions& options, std::vector<double>* values) {
  NewtonResult r;
  LogLikEval cur = eval(theta);
  if (values) values->push_back(cur.value);
  for (;;) {
    r.grad_norm = inf_norm(cur.gradient);
    if (r.grad_norm <= options.grad_tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= options.max_iter) break;
    auto step = spd_solve(-cur.hessian, cur.gradient);
    if (!step) {
      r.singular = true;
      break;
    }
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      Vec cand = theta + t * *step;
      LogLikEval e = eval(cand);
      // Near the optimum value changes fall below rounding; fall back to
      // gradient decrease there.
      const bool flat = std::abs(e.value - cur.value) <= 1e-13 * (1.0 + std::abs(cur.value));
      if (e.value >= cur.value || (flat && inf_norm(e.gradient) < inf_norm(cur.gradient))) {
        theta = std::move(cand);
        cur = std::move(e);
        accepted = true;
        break;
      }
    }
    ++r.iterations;
    if (!accepted) break;
    if (values) values->push_back(cur.value);
    if (inf_norm(theta) > options.divergence_bound) {
      r.diverged = true;
      r.grad_norm = inf_norm(cur.gradient);
      break;
    }
  }
  r.theta = std::move(theta);
  r.last = std::move(cur);
  return r;
}

Vec init_or_zero(const Vec& init, int d) {
  if (init.size() == 0) return Vec::Zero(d);
  if (init.size() != d) throw std::invalid_argument("initial vector has wrong dimension");
  return init;
}

}  // namespace

// ---------------------------------------------------------------------------

int LocalScope::position(int term) const {
  auto it = std::lower_bound(free_terms.begin(), free_terms.end(), term);
  if (it == free_terms.end() || *it != term) return -1;
  return static_cast<int>(it - free_terms.begin());
}

LocalScope make_local_scope(const ModelSpec& model, int i) {
  const MarkovGraph& g = model.graph();
  LocalScope s;
  s.sensor = i;
  s.nodes = g.closed_neighborhood(i);
  auto column_of = [&](int node) {
    return static_cast<int>(std::lower_bound(s.nodes.begin(), s.nodes.end(), node) - s.nodes.begin());
  };
  s.self_column = column_of(i);
  for (int t : scope_terms(g, i)) {
    IndexTerm term = term_at(g, t);
    const int col = term.kind == TermKind::Node ? -1 : column_of(term.other(i));
    if (model.is_free(t)) {
      s.free_terms.push_back(t);
      s.free_columns.push_back(col);
    } else {
      s.fixed_terms.push_back(t);
      s.fixed_columns.push_back(col);
      s.fixed_values.push_back(model.theta()(t));
    }
  }
  return s;
}

SampleMatrix local_data(const MarkovGraph& g, const SampleMatrix& x, int i) {
  if (x.cols() != g.node_count()) throw std::invalid_argument("sample matrix width does not match graph");
  std::vector<int> cols = g.closed_neighborhood(i);
  return x.select_columns(cols);
}

// ---------------------------------------------------------------------------

ConditionalObjective::ConditionalObjective(const LocalScope& scope, const SampleMatrix& x_local) {
  if (x_local.empty()) throw std::invalid_argument("conditional likelihood needs at least one sample");
  if (x_local.cols() != static_cast<int>(scope.nodes.size())) {
    throw std::invalid_argument("local data must cover A(i): expected " + std::to_string(scope.nodes.size()) +
                                " columns, got " + std::to_string(x_local.cols()));
  }
  const int n = x_local.rows();
  const int d = scope.size();
  design_.resize(n, d);
  offset_.setZero(n);
  response_.resize(n);
  for (int k = 0; k < n; ++k) {
    response_(k) = x_local(k, scope.self_column);
    for (int a = 0; a < d; ++a) {
      const int col = scope.free_columns[static_cast<std::size_t>(a)];
      design_(k, a) = col < 0 ? 1.0 : x_local(k, col);
    }
    for (std::size_t b = 0; b < scope.fixed_terms.size(); ++b) {
      const int col = scope.fixed_columns[b];
      offset_(k) += scope.fixed_values[b] * (col < 0 ? 1.0 : x_local(k, col));
    }
  }
}

Vec ConditionalObjective::fields(const Vec& theta_free) const {
  if (theta_free.size() != dim()) throw std::invalid_argument("parameter vector does not match local scope");
  return design_ * theta_free + offset_;
}

double ConditionalObjective::value(const Vec& theta_free) const {
  const Vec m = fields(theta_free);
  double v = 0.0;
  for (int k = 0; k < sample_count(); ++k) v += log_logistic(2.0 * response_(k) * m(k));
  return v / sample_count();
}

LogLikEval ConditionalObjective::evaluate(const Vec& theta_free) const {
  const Vec m = fields(theta_free);
  const int n = sample_count();
  Vec residual(n);
  Vec curvature(n);
  double v = 0.0;
  for (int k = 0; k < n; ++k) {
    v += log_logistic(2.0 * response_(k) * m(k));
    residual(k) = response_(k) - std::tanh(m(k));
    curvature(k) = sech2(m(k));
  }
  LogLikEval out;
  out.value = v / n;
  out.gradient = design_.transpose() * residual / n;
  out.hessian = -(design_.transpose() * curvature.asDiagonal() * design_) / n;
  return out;
}

Mat ConditionalObjective::per_sample_gradients(const Vec& theta_free) const {
  const Vec m = fields(theta_free);
  Vec residual(sample_count());
  for (int k = 0; k < sample_count(); ++k) residual(k) = response_(k) - std::tanh(m(k));
  return residual.asDiagonal() * design_;
}

LogLikEval conditional_loglik(const LocalScope& scope, const Vec& theta_free, const SampleMatrix& x_local) {
  return ConditionalObjective(scope, x_local).evaluate(theta_free);
}

// ---------------------------------------------------------------------------

double LocalFit::estimate(int term) const {
  const int a = scope.position(term);
  if (a < 0) throw std::out_of_range("term not in sensor " + std::to_string(scope.sensor) + "'s free scope");
  return theta_hat(a);
}

double LocalFit::quality(int term) const {
  const int a = scope.position(term);
  if (a < 0) throw std::out_of_range("term not in sensor " + std::to_string(scope.sensor) + "'s free scope");
  return 1.0 / V_hat(a, a);
}

LocalFit fit_local(const LocalScope& scope, const SampleMatrix& x_local, const Vec& init,
                   const NewtonOptions& options) {
  ConditionalObjective objective(scope, x_local);
  const int d = objective.dim();
  const int n = objective.sample_count();

  LocalFit fit;
  fit.scope = scope;
  NewtonResult r = newton_maximize([&](const Vec& th) { return objective.evaluate(th); }, init_or_zero(init, d),
                                   options, nullptr);
  fit.theta_hat = r.theta;
  fit.iterations = r.iterations;
  fit.grad_norm = r.grad_norm;
  fit.H_hat = Mat::Zero(d, d);
  fit.J_hat = Mat::Zero(d, d);
  fit.V_hat = Mat::Zero(d, d);
  fit.scores = Mat::Zero(n, d);
  fit.status = FitStatus::Degenerate;
  if (!r.converged || r.diverged || inf_norm(r.theta) > options.divergence_bound) return fit;

  fit.H_hat = symmetrize(-r.last.hessian);
  const Mat grads = objective.per_sample_gradients(r.theta);
  fit.J_hat = symmetrize(grads.transpose() * grads / n);
  if (d == 0) {
    fit.status = FitStatus::Converged;
    return fit;
  }
  if (min_eigenvalue(fit.J_hat) <= kInformationFloor || min_eigenvalue(fit.H_hat) <= 0.0) return fit;
  auto v = spd_inverse(fit.J_hat);
  auto h_inv = spd_inverse(fit.H_hat);
  if (!v || !h_inv) return fit;
  fit.V_hat = *v;
  fit.scores = grads * *h_inv;
  fit.status = FitStatus::Converged;
  return fit;
}

PenalizedSolve maximize_penalized(const ConditionalObjective& objective, const Vec& lambda, const Vec& rho,
                                  const Vec& center, const Vec& init, const NewtonOptions& options) {
  const int d = objective.dim();
  if (lambda.size() != d || rho.size() != d || center.size() != d) {
    throw std::invalid_argument("penalized solve: vector sizes do not match the scope");
  }
  if ((rho.array() <= 0.0).any()) throw std::invalid_argument("penalties must be positive");
  auto eval = [&](const Vec& th) {
    LogLikEval e = objective.evaluate(th);
    const Vec diff = th - center;
    e.value -= lambda.dot(th) + 0.5 * (rho.array() * diff.array().square()).sum();
    e.gradient -= lambda + Vec(rho.array() * diff.array());
    e.hessian.diagonal() -= rho;
    return e;
  };
  NewtonOptions opts = options;
  opts.divergence_bound = std::numeric_limits<double>::infinity();
  NewtonResult r = newton_maximize(eval, init_or_zero(init, d), opts, nullptr);
  return {r.theta, r.iterations, r.grad_norm, r.converged};
}

// ---------------------------------------------------------------------------

GlobalFit fit_mle_exact(const ModelSpec& shape, const SampleMatrix& x, const Vec& init, int enum_limit,
                        const NewtonOptions& options) {
  const MarkovGraph& g = shape.graph();
  if (g.node_count() > enum_limit) throw EnumerationLimitError(g.node_count(), enum_limit);
  if (x.empty()) throw std::invalid_argument("MLE needs at least one sample");
  if (x.cols() != g.node_count()) throw std::invalid_argument("sample matrix width does not match graph");

  const int d = shape.free_count();
  Vec empirical = Vec::Zero(term_count(g));
  for (int k = 0; k < x.rows(); ++k) empirical += sufficient_statistics(x.row(k), g);
  empirical /= x.rows();

  auto eval = [&](const Vec& th) {
    const ParamVector full = shape.with_free_values(th);
    ExactDistribution dist(g, full, enum_limit);
    Vec mean = Vec::Zero(term_count(g));
    Mat second = Mat::Zero(d, d);
    for (std::uint64_t s = 0; s < dist.state_count(); ++s) {
      const Vec u = sufficient_statistics(dist.configuration(s), g);
      const double p = dist.probabilities()[s];
      mean += p * u;
      const Vec uf = shape.free_values(u);
      second.noalias() += p * uf * uf.transpose();
    }
    const Vec mean_f = shape.free_values(mean);
    LogLikEval e;
    e.value = full.dot(empirical) - dist.log_partition();
    e.gradient = shape.free_values(empirical) - mean_f;
    e.hessian = -symmetrize(second - mean_f * mean_f.transpose());
    return e;
  };

  NewtonResult r = newton_maximize(eval, init_or_zero(init, d), options, nullptr);
  GlobalFit fit;
  fit.theta = shape.with_free_values(r.theta);
  fit.free_terms = shape.free_terms();
  fit.method = GlobalMethod::ExactMle;
  fit.iterations = r.iterations;
  fit.grad_norm = r.grad_norm;
  fit.converged = r.converged && !r.diverged;
  return fit;
}

namespace {

struct JointObjective {
  const ModelSpec& shape;
  std::vector<LocalScope> scopes;
  std::vector<ConditionalObjective> parts;

  JointObjective(const ModelSpec& s, const SampleMatrix& x) : shape(s) {
    if (x.empty()) throw std::invalid_argument("pseudo-likelihood needs at least one sample");
    const MarkovGraph& g = shape.graph();
    if (x.cols() != g.node_count()) throw std::invalid_argument("sample matrix width does not match graph");
    for (int i = 0; i < g.node_count(); ++i) {
      scopes.push_back(make_local_scope(shape, i));
      parts.emplace_back(scopes.back(), local_data(g, x, i));
    }
  }

  Vec gather(const Vec& theta_free, const LocalScope& scope) const {
    Vec local(scope.size());
    for (int a = 0; a < scope.size(); ++a) {
      local(a) = theta_free(shape.free_position(scope.free_terms[static_cast<std::size_t>(a)]));
    }
    return local;
  }

  LogLikEval operator()(const Vec& theta_free) const {
    const int d = shape.free_count();
    LogLikEval total{0.0, Vec::Zero(d), Mat::Zero(d, d)};
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const LocalScope& scope = scopes[i];
      LogLikEval e = parts[i].evaluate(gather(theta_free, scope));
      total.value += e.value;
      for (int a = 0; a < scope.size(); ++a) {
        const int ga = shape.free_position(scope.free_terms[static_cast<std::size_t>(a)]);
        total.gradient(ga) += e.gradient(a);
        for (int b = 0; b < scope.size(); ++b) {
          total.hessian(ga, shape.free_position(scope.free_terms[static_cast<std::size_t>(b)])) += e.hessian(a, b);
        }
      }
    }
    return total;
  }
};

}  // namespace

LogLikEval joint_pseudo_loglik(const ModelSpec& shape, const Vec& theta_free, const SampleMatrix& x) {
  if (theta_free.size() != shape.free_count()) throw std::invalid_argument("parameter vector has wrong dimension");
  return JointObjective(shape, x)(theta_free);
}

GlobalFit fit_joint_mple_centralized(const ModelSpec& shape, const SampleMatrix& x, const Vec& init,
                                     const NewtonOptions& options, NewtonTrace* trace) {
  JointObjective objective(shape, x);
  NewtonResult r = newton_maximize(objective, init_or_zero(init, shape.free_count()), options,
                                   trace ? &trace->values : nullptr);
  GlobalFit fit;
  fit.theta = shape.with_free_values(r.theta);
  fit.free_terms = shape.free_terms();
  fit.method = GlobalMethod::JointMple;
  fit.iterations = r.iterations;
  fit.grad_norm = r.grad_norm;
  fit.converged = r.converged && !r.diverged;
  return fit;
}

GlobalFit fit_joint_mple_centralized(const ModelSpec& shape, const SampleMatrix& x, const Vec& init,
                                     const NewtonOptions& options) {
  return fit_joint_mple_centralized(shape, x, init, options, nullptr);
}

}  // namespace pldist
