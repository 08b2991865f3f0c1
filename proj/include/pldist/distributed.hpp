#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pldist/consensus.hpp"
#include "pldist/estimators.hpp"
#include "pldist/model.hpp"

namespace pldist {

enum class PayloadKind { EstimateShare, ScoreShare, ThetaBarShare };

std::string to_string(PayloadKind k);

// One point-to-point transmission about a single term.
//   EstimateShare  [θ̂_α] or [θ̂_α, quality]
//   ScoreShare     the first m score samples s_α(x^k)
//   ThetaBarShare  [θ_α^i, ρ_α^i]
struct Message {
  int source = -1;
  int destination = -1;
  int round = 0;
  PayloadKind kind = PayloadKind::EstimateShare;
  int term = -1;
  std::vector<double> payload;

  long long scalar_count() const { return static_cast<long long>(payload.size()); }
};

struct TraceCounts {
  long long messages = 0;
  long long scalars = 0;

  TraceCounts& operator+=(const TraceCounts& o) {
    messages += o.messages;
    scalars += o.scalars;
    return *this;
  }
  bool operator==(const TraceCounts&) const = default;
};

class NetworkTrace {
 public:
  void record(const Message& m);

  const TraceCounts& total() const { return total_; }
  TraceCounts round(int r) const;
  // Both directions of the undirected link {u, v}.
  TraceCounts link(int u, int v) const;
  TraceCounts directed(int source, int destination) const;
  TraceCounts kind(PayloadKind k) const;

  const std::map<int, TraceCounts>& rounds() const { return rounds_; }
  const std::map<std::pair<int, int>, TraceCounts>& directed_links() const { return directed_; }

 private:
  TraceCounts total_;
  std::map<int, TraceCounts> rounds_;
  std::map<std::pair<int, int>, TraceCounts> directed_;
  std::map<PayloadKind, TraceCounts> kinds_;
};

enum class AdmmPenalty { Constant, WeightDerived };
enum class AdmmInit { Zero, Consensus };

struct AdmmConfig {
  AdmmPenalty penalty = AdmmPenalty::WeightDerived;
  double rho = 1.0;  // Constant penalty value
  AdmmInit init = AdmmInit::Consensus;
  // Scheme for ConsensusInit and for weight-derived penalties.
  WeightScheme scheme = WeightScheme::Diagonal;
  int score_samples = 0;  // m for an OptimalVector warm start (0: all)
  int max_iter = 500;
  double primal_tol = 1e-6;
  double dual_tol = 1e-6;
  std::optional<int> interrupt_at;
  NewtonOptions newton{};

  void validate() const;

  static AdmmConfig zero_init();
  static AdmmConfig consensus_init(WeightScheme scheme);
};

struct AdmmStep {
  int iteration = 0;
  double primal = 0.0;
  double dual = 0.0;
  double sq_error = 0.0;  // ‖θ̄ − θ*‖² over free terms; NaN without a reference
  long long scalars = 0;  // cumulative over the whole protocol
};

struct AdmmResult {
  ParamVector theta_bar;
  std::vector<ParamVector> history;  // θ̄ after 0, 1, 2, ... iterations
  std::vector<AdmmStep> steps;       // one per executed iteration
  int iterations = 0;
  bool converged = false;
  bool interrupted = false;

  // First iteration whose primal residual is below tol, or -1.
  int iterations_to_primal(double tol) const;
};

void write_trajectory_csv(std::ostream& out, const AdmmResult& result);

struct AdmmResiduals {
  double primal = 0.0;
  double dual = 0.0;
};

// A sensor: it stores only X_{A(i)} and learns about other sensors only
// through delivered messages.
class SensorNode {
 public:
  SensorNode(LocalScope scope, SampleMatrix data);

  int id() const { return scope_.sensor; }
  const LocalScope& scope() const { return scope_; }
  const SampleMatrix& data() const { return data_; }
  const std::optional<LocalFit>& fit() const { return fit_; }
  bool usable() const { return fit_ && fit_->converged(); }

 private:
  friend class SensorNetwork;

  LocalScope scope_;
  SampleMatrix data_;
  std::optional<ConditionalObjective> objective_;
  std::optional<LocalFit> fit_;
  std::vector<Message> inbox_;

  // Received per term, keyed by source sensor (ascending).
  std::map<int, std::map<int, std::vector<double>>> estimates_;
  std::map<int, std::map<int, std::vector<double>>> scores_;
  std::map<int, std::map<int, std::pair<double, double>>> admm_shared_;

  // Combination results for the terms in scope.
  std::map<int, double> consensus_;
  std::map<int, TermProvenance> provenance_;

  // ADMM state over scope.free_terms.
  Vec theta_, lambda_, rho_, theta_bar_;
};

class SensorNetwork {
 public:
  // Each node receives only the columns A(i) of x.
  SensorNetwork(const ModelSpec& shape, const SampleMatrix& x, int threads = 1);

  const ModelSpec& shape() const { return shape_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const SensorNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const NetworkTrace& trace() const { return trace_; }
  int round() const { return round_; }

  // Every node fits its own conditional likelihood. No messages.
  std::vector<LocalFit> run_local_phase(const NewtonOptions& options = {});
  std::vector<LocalFit> local_fits() const;

  // Usable nodes send each neighbor their estimate of the shared edge term,
  // plus the quality weight unless the scheme is Uniform.
  void exchange_estimates(WeightScheme scheme);
  // Usable nodes send the first m score samples of each shared edge term
  // (m = 0 sends all n).
  void exchange_scores(int m = 0);
  // Every node combines the terms in its scope from what it holds; the
  // assembled estimate takes each term from its lowest-id owner.
  ConsensusEstimate one_step_consensus(WeightScheme scheme);

  void admm_initialize(const AdmmConfig& config);
  AdmmResiduals admm_iterate();
  ParamVector admm_theta_bar() const;
  AdmmResult run_admm(const AdmmConfig& config, const ParamVector* truth = nullptr);

 private:
  void send(int source, int destination, PayloadKind kind, int term, std::vector<double> payload);
  void deliver();
  void require_local_phase() const;
  // Free edge terms shared between a node and each neighbor.
  std::vector<std::pair<int, int>> shared_edges(int i) const;
  double penalty_for(const SensorNode& n, int term, const AdmmConfig& config) const;

  ModelSpec shape_;
  int threads_ = 1;
  std::vector<SensorNode> nodes_;
  std::vector<Message> outbox_;
  NetworkTrace trace_;
  int round_ = 0;
  bool local_done_ = false;
  std::optional<WeightScheme> shared_scheme_;
  int score_m_ = 0;  // 0 until scores are exchanged
  std::optional<WeightScheme> combined_scheme_;
  bool admm_ready_ = false;
  std::optional<AdmmConfig> admm_config_;
};

}  // namespace pldist
