#include "pldist/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pldist/parallel.hpp"
#include "pldist/score_covariance.hpp"

namespace pldist {

std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::EstimateShare: return "estimate";
    case PayloadKind::ScoreShare: return "score";
    case PayloadKind::ThetaBarShare: return "theta-bar";
  }
  return "unknown";
}

void NetworkTrace::record(const Message& m) {
  const TraceCounts one{1, m.scalar_count()};
  total_ += one;
  rounds_[m.round] += one;
  directed_[{m.source, m.destination}] += one;
  kinds_[m.kind] += one;
}

TraceCounts NetworkTrace::round(int r) const {
  auto it = rounds_.find(r);
  return it == rounds_.end() ? TraceCounts{} : it->second;
}

TraceCounts NetworkTrace::directed(int source, int destination) const {
  auto it = directed_.find({source, destination});
  return it == directed_.end() ? TraceCounts{} : it->second;
}

TraceCounts NetworkTrace::link(int u, int v) const {
  TraceCounts c = directed(u, v);
  c += directed(v, u);
  return c;
}

TraceCounts NetworkTrace::kind(PayloadKind k) const {
  auto it = kinds_.find(k);
  return it == kinds_.end() ? TraceCounts{} : it->second;
}

// ---------------------------------------------------------------------------

void AdmmConfig::validate() const {
  if (!(primal_tol > 0) || !(dual_tol > 0)) throw std::invalid_argument("ADMM tolerances must be positive");
  if (max_iter < 1) throw std::invalid_argument("ADMM needs at least one iteration");
  if (!(rho > 0)) throw std::invalid_argument("ADMM penalty must be positive");
  if (interrupt_at && *interrupt_at < 0) throw std::invalid_argument("interrupt iteration must be >= 0");
  if (scheme == WeightScheme::HessianMatrix) throw std::invalid_argument("ADMM weights must be per-term scalars");
  if (score_samples < 0) throw std::invalid_argument("score subsample must be >= 0");
}

AdmmConfig AdmmConfig::zero_init() {
  AdmmConfig c;
  c.init = AdmmInit::Zero;
  c.penalty = AdmmPenalty::Constant;
  c.rho = 1.0;
  return c;
}

AdmmConfig AdmmConfig::consensus_init(WeightScheme scheme) {
  AdmmConfig c;
  c.init = AdmmInit::Consensus;
  c.penalty = AdmmPenalty::WeightDerived;
  c.scheme = scheme;
  return c;
}

int AdmmResult::iterations_to_primal(double tol) const {
  for (const AdmmStep& s : steps) {
    if (s.primal < tol) return s.iteration;
  }
  return -1;
}

void write_trajectory_csv(std::ostream& out, const AdmmResult& result) {
  out << "iteration,primal,dual,sq_error,scalars\n";
  out.precision(17);
  for (const AdmmStep& s : result.steps) {
    out << s.iteration << ',' << s.primal << ',' << s.dual << ',' << s.sq_error << ',' << s.scalars << '\n';
  }
}

// ---------------------------------------------------------------------------

SensorNode::SensorNode(LocalScope scope, SampleMatrix data) : scope_(std::move(scope)), data_(std::move(data)) {}

SensorNetwork::SensorNetwork(const ModelSpec& shape, const SampleMatrix& x, int threads)
    : shape_(shape), threads_(std::max(1, threads)) {
  if (x.cols() != shape.node_count()) throw std::invalid_argument("sample matrix width does not match graph");
  if (x.empty()) throw std::invalid_argument("network needs at least one sample");
  for (int i = 0; i < shape.node_count(); ++i) {
    nodes_.emplace_back(make_local_scope(shape, i), local_data(shape.graph(), x, i));
  }
}

void SensorNetwork::send(int source, int destination, PayloadKind kind, int term, std::vector<double> payload) {
  const MarkovGraph& g = shape_.graph();
  if (source == destination || g.edge_index(source, destination) < 0) {
    throw std::logic_error("message from " + std::to_string(source) + " to non-neighbor " + std::to_string(destination));
  }
  if (node(source).scope().position(term) < 0 || node(destination).scope().position(term) < 0) {
    throw std::logic_error("message about a term outside the shared scope");
  }
  outbox_.push_back({source, destination, round_, kind, term, std::move(payload)});
}

void SensorNetwork::deliver() {
  for (Message& m : outbox_) {
    trace_.record(m);
    nodes_[static_cast<std::size_t>(m.destination)].inbox_.push_back(std::move(m));
  }
  outbox_.clear();
  for (SensorNode& n : nodes_) {
    for (Message& m : n.inbox_) {
      switch (m.kind) {
        case PayloadKind::EstimateShare:
          n.estimates_[m.term][m.source] = std::move(m.payload);
          break;
        case PayloadKind::ScoreShare:
          n.scores_[m.term][m.source] = std::move(m.payload);
          break;
        case PayloadKind::ThetaBarShare:
          n.admm_shared_[m.term][m.source] = {m.payload.at(0), m.payload.at(1)};
          break;
      }
    }
    n.inbox_.clear();
  }
}

void SensorNetwork::require_local_phase() const {
  if (!local_done_) throw std::logic_error("run the local phase first");
}

std::vector<std::pair<int, int>> SensorNetwork::shared_edges(int i) const {
  const MarkovGraph& g = shape_.graph();
  std::vector<std::pair<int, int>> out;
  for (int j : g.neighbors(i)) {
    const int term = g.node_count() + g.edge_index(i, j);
    if (shape_.is_free(term)) out.emplace_back(j, term);
  }
  return out;
}

std::vector<LocalFit> SensorNetwork::run_local_phase(const NewtonOptions& options) {
  parallel_for(size(), threads_, [&](int i) {
    SensorNode& n = nodes_[static_cast<std::size_t>(i)];
    n.fit_ = fit_local(n.scope_, n.data_, Vec(), options);
  });
  local_done_ = true;
  return local_fits();
}

std::vector<LocalFit> SensorNetwork::local_fits() const {
  require_local_phase();
  std::vector<LocalFit> out;
  for (const SensorNode& n : nodes_) out.push_back(*n.fit_);
  return out;
}

void SensorNetwork::exchange_estimates(WeightScheme scheme) {
  require_local_phase();
  if (scheme == WeightScheme::HessianMatrix) throw std::invalid_argument("matrix consensus needs a global solve");
  ++round_;
  for (SensorNode& n : nodes_) n.estimates_.clear();
  for (const SensorNode& n : nodes_) {
    if (!n.usable()) continue;
    for (auto [j, term] : shared_edges(n.id())) {
      std::vector<double> payload{n.fit_->estimate(term)};
      if (scheme != WeightScheme::Uniform) payload.push_back(n.fit_->quality(term));
      send(n.id(), j, PayloadKind::EstimateShare, term, std::move(payload));
    }
  }
  deliver();
  shared_scheme_ = scheme;
}

void SensorNetwork::exchange_scores(int m) {
  require_local_phase();
  const int n_samples = nodes_.front().data_.rows();
  if (m == 0) m = n_samples;
  if (m < 0 || m > n_samples) throw std::invalid_argument("score subsample must be in [1, n]");
  ++round_;
  for (SensorNode& n : nodes_) n.scores_.clear();
  for (const SensorNode& n : nodes_) {
    if (!n.usable()) continue;
    for (auto [j, term] : shared_edges(n.id())) {
      const double* col = n.fit_->scores.col(n.scope_.position(term)).data();
      send(n.id(), j, PayloadKind::ScoreShare, term, std::vector<double>(col, col + m));
    }
  }
  deliver();
  score_m_ = m;
}

ConsensusEstimate SensorNetwork::one_step_consensus(WeightScheme scheme) {
  require_local_phase();
  if (scheme == WeightScheme::HessianMatrix) throw std::invalid_argument("matrix consensus needs a global solve");
  if (!shared_scheme_) throw std::logic_error("exchange estimates first");
  if (scheme != WeightScheme::Uniform && *shared_scheme_ == WeightScheme::Uniform) {
    throw std::logic_error("quality weights were not exchanged");
  }
  const bool max_rule = scheme == WeightScheme::MaxDiagonal;

  parallel_for(size(), threads_, [&](int i) {
    SensorNode& n = nodes_[static_cast<std::size_t>(i)];
    n.consensus_.clear();
    n.provenance_.clear();
    for (int term : n.scope_.free_terms) {
      std::vector<int> sensors;
      std::vector<double> estimates, qualities;
      std::vector<std::span<const double>> columns;
      bool have_scores = true;
      std::map<int, int> order;  // sensor -> source slot (-1 for self)
      if (n.usable()) order[n.id()] = -1;
      if (auto it = n.estimates_.find(term); it != n.estimates_.end()) {
        for (const auto& [src, payload] : it->second) order[src] = src;
      }
      for (const auto& [s, slot] : order) {
        sensors.push_back(s);
        if (slot < 0) {
          estimates.push_back(n.fit_->estimate(term));
          qualities.push_back(n.fit_->quality(term));
          if (score_m_ > 0) {
            columns.emplace_back(n.fit_->scores.col(n.scope_.position(term)).data(),
                                 static_cast<std::size_t>(score_m_));
          } else {
            have_scores = false;
          }
        } else {
          const std::vector<double>& payload = n.estimates_.at(term).at(s);
          estimates.push_back(payload[0]);
          qualities.push_back(payload.size() > 1 ? payload[1] : 1.0);
          auto sc = n.scores_.find(term);
          if (sc != n.scores_.end() && sc->second.count(s)) {
            columns.emplace_back(sc->second.at(s));
          } else {
            have_scores = false;
          }
        }
      }
      if (sensors.empty()) throw DegenerateError("every estimate of term " + std::to_string(term) + " is degenerate");

      std::vector<double> weights;
      if (sensors.size() == 1) {
        weights = {1.0};
      } else if (needs_cross_covariance(scheme)) {
        if (!have_scores) throw std::invalid_argument("optimal-vector weights need the score exchange");
        const Mat v = score_moment_matrix(columns);
        weights = term_weight_rule(scheme, qualities, &v);
      } else {
        weights = term_weight_rule(scheme, qualities, nullptr);
      }

      TermProvenance prov{term, sensors, {}, -1};
      if (max_rule) {
        const std::size_t best = select_max(weights);
        n.consensus_[term] = estimates[best];
        prov.weights.assign(sensors.size(), 0.0);
        prov.weights[best] = 1.0;
        prov.selected = sensors[best];
      } else {
        n.consensus_[term] = combine_linear(estimates, weights);
        double total = 0.0;
        for (double w : weights) total += w;
        for (double w : weights) prov.weights.push_back(w / total);
      }
      n.provenance_[term] = std::move(prov);
    }
  });
  combined_scheme_ = scheme;

  ConsensusEstimate est;
  est.theta = shape_.theta();
  est.free_terms = shape_.free_terms();
  est.scheme = scheme;
  est.max_rule = max_rule;
  for (int term : shape_.free_terms()) {
    const std::vector<int> owners = term_owners(shape_.graph(), term);
    const SensorNode& first = node(owners.front());
    const double value = first.consensus_.at(term);
    for (int o : owners) {
      if (node(o).consensus_.at(term) != value) throw std::logic_error("endpoints disagree on a combined term");
    }
    est.theta(term) = value;
    est.provenance.push_back(first.provenance_.at(term));
  }
  return est;
}

// ---------------------------------------------------------------------------

double SensorNetwork::penalty_for(const SensorNode& n, int term, const AdmmConfig& config) const {
  if (config.penalty == AdmmPenalty::Constant || config.scheme == WeightScheme::Uniform) {
    return config.penalty == AdmmPenalty::Constant ? config.rho : 1.0;
  }
  if (n.usable()) return n.fit_->quality(term);
  // Degenerate contributor: borrow the smallest quality seen for the term.
  double smallest = std::numeric_limits<double>::infinity();
  if (auto it = n.estimates_.find(term); it != n.estimates_.end()) {
    for (const auto& [src, payload] : it->second) {
      if (payload.size() > 1 && payload[1] > 0) smallest = std::min(smallest, payload[1]);
    }
  }
  return std::isfinite(smallest) ? smallest : 1.0;
}

void SensorNetwork::admm_initialize(const AdmmConfig& config) {
  config.validate();
  const bool need_fits = config.init == AdmmInit::Consensus ||
                         (config.penalty == AdmmPenalty::WeightDerived && config.scheme != WeightScheme::Uniform);
  if (need_fits && !local_done_) run_local_phase(config.newton);
  if (config.init == AdmmInit::Consensus) {
    exchange_estimates(config.scheme);
    if (needs_cross_covariance(config.scheme)) exchange_scores(config.score_samples);
    one_step_consensus(config.scheme);
  }
  for (SensorNode& n : nodes_) {
    if (!n.objective_) n.objective_.emplace(n.scope_, n.data_);
    const int d = n.scope_.size();
    n.lambda_ = Vec::Zero(d);
    n.rho_.resize(d);
    n.theta_bar_.resize(d);
    for (int a = 0; a < d; ++a) {
      const int term = n.scope_.free_terms[static_cast<std::size_t>(a)];
      n.rho_(a) = penalty_for(n, term, config);
      n.theta_bar_(a) = config.init == AdmmInit::Consensus ? n.consensus_.at(term) : 0.0;
    }
    n.theta_ = (config.init == AdmmInit::Consensus && n.usable()) ? n.fit_->theta_hat : n.theta_bar_;
    n.admm_shared_.clear();
  }
  admm_config_ = config;
  admm_ready_ = true;
}

AdmmResiduals SensorNetwork::admm_iterate() {
  if (!admm_ready_) throw std::logic_error("initialize ADMM first");
  ++round_;
  const NewtonOptions& newton = admm_config_->newton;
  parallel_for(size(), threads_, [&](int i) {
    SensorNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.scope_.size() == 0) return;
    PenalizedSolve s = maximize_penalized(*n.objective_, n.lambda_, n.rho_, n.theta_bar_, n.theta_, newton);
    if (!s.converged) {
      throw std::runtime_error("ADMM local solve failed at sensor " + std::to_string(i) + " (gradient " +
                               std::to_string(s.grad_norm) + ", " + std::to_string(s.iterations) + " iterations)");
    }
    n.theta_ = std::move(s.theta);
  });

  for (const SensorNode& n : nodes_) {
    for (auto [j, term] : shared_edges(n.id())) {
      const int a = n.scope_.position(term);
      send(n.id(), j, PayloadKind::ThetaBarShare, term, {n.theta_(a), n.rho_(a)});
    }
  }
  deliver();

  std::vector<AdmmResiduals> local(nodes_.size());
  parallel_for(size(), threads_, [&](int i) {
    SensorNode& n = nodes_[static_cast<std::size_t>(i)];
    AdmmResiduals& r = local[static_cast<std::size_t>(i)];
    for (int a = 0; a < n.scope_.size(); ++a) {
      const int term = n.scope_.free_terms[static_cast<std::size_t>(a)];
      std::map<int, std::pair<double, double>> contributions;
      contributions[n.id()] = {n.theta_(a), n.rho_(a)};
      if (auto it = n.admm_shared_.find(term); it != n.admm_shared_.end()) {
        for (const auto& [src, v] : it->second) contributions[src] = v;
      }
      double bar = n.theta_(a);
      if (contributions.size() > 1) {
        std::vector<double> values, weights;
        for (const auto& [src, v] : contributions) {
          values.push_back(v.first);
          weights.push_back(v.second);
        }
        bar = combine_linear(values, weights);
      }
      r.dual = std::max(r.dual, std::abs(bar - n.theta_bar_(a)));
      n.theta_bar_(a) = bar;
      n.lambda_(a) += n.rho_(a) * (n.theta_(a) - bar);
      r.primal = std::max(r.primal, std::abs(n.theta_(a) - bar));
    }
    n.admm_shared_.clear();
  });

  AdmmResiduals out;
  for (const AdmmResiduals& r : local) {
    out.primal = std::max(out.primal, r.primal);
    out.dual = std::max(out.dual, r.dual);
  }
  return out;
}

ParamVector SensorNetwork::admm_theta_bar() const {
  if (!admm_ready_) throw std::logic_error("initialize ADMM first");
  ParamVector theta = shape_.theta();
  for (int term : shape_.free_terms()) {
    const SensorNode& owner = node(term_owners(shape_.graph(), term).front());
    theta(term) = owner.theta_bar_(owner.scope_.position(term));
  }
  return theta;
}

AdmmResult SensorNetwork::run_admm(const AdmmConfig& config, const ParamVector* truth) {
  admm_initialize(config);
  AdmmResult result;
  result.history.push_back(admm_theta_bar());
  if (config.interrupt_at && *config.interrupt_at == 0) {
    result.interrupted = true;
  } else {
    for (int it = 1; it <= config.max_iter; ++it) {
      const AdmmResiduals r = admm_iterate();
      ParamVector bar = admm_theta_bar();
      AdmmStep step{it, r.primal, r.dual, std::numeric_limits<double>::quiet_NaN(), trace_.total().scalars};
      if (truth) step.sq_error = shape_.free_values(bar - *truth).squaredNorm();
      result.steps.push_back(step);
      result.history.push_back(std::move(bar));
      result.iterations = it;
      if (r.primal < config.primal_tol && r.dual < config.dual_tol) {
        result.converged = true;
        break;
      }
      if (config.interrupt_at && it == *config.interrupt_at) {
        result.interrupted = true;
        break;
      }
    }
  }
  result.theta_bar = result.history.back();
  return result;
}

}  // namespace pldist
