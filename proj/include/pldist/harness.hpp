#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pldist/asymptotics.hpp"
#include "pldist/consensus.hpp"
#include "pldist/model.hpp"

namespace pldist {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GraphFamily { Star, Grid, BarabasiAlbert, Euclidean };
enum class EvaluationMode { ExactAsymptotic, EmpiricalMse, Both };
enum class SamplerKind { Auto, Exact, Gibbs };

std::string to_string(GraphFamily g);
std::string to_string(EvaluationMode m);
std::string to_string(SamplerKind s);

struct ExperimentSpec {
  std::string name = "experiment";
  GraphFamily graph = GraphFamily::Star;
  int nodes = 4;  // star: total nodes (hub + leaves); BA / Euclidean: node count
  int rows = 3;   // grid
  int cols = 3;
  int edges_per_node = 1;  // Barabási–Albert
  double radius = 0.15;    // Euclidean
  double sigma_pair = 0.5;
  double sigma_singleton = 0.5;
  FreePolicy policy = FreePolicy::EdgesOnly;
  std::vector<Method> methods{Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt,
                              Method::MaxDiagonal};
  std::vector<int> sample_sizes{1000};
  int models = 1;
  int datasets = 1;
  std::uint64_t seed = 1;
  EvaluationMode mode = EvaluationMode::Both;
  SamplerKind sampler = SamplerKind::Auto;
  int gibbs_burn_in = 1000;
  int gibbs_thin = 10;
  int score_samples = 0;  // m for Linear-Opt (0: all n)
  int enum_limit = kDefaultEnumLimit;

  int node_count() const;
  void validate() const;
};

// Line-oriented `key = value` with `#` comments. Unknown keys are errors.
ExperimentSpec parse_experiment_spec(std::istream& in);
ExperimentSpec read_experiment_spec(const std::filesystem::path& path);
void write_experiment_spec(std::ostream& out, const ExperimentSpec& spec);

// The graph and true model of one replicate.
ModelSpec replicate_model(const ExperimentSpec& spec, int model_rep);
// One dataset of size n for (model_rep, data_rep).
SampleMatrix replicate_data(const ExperimentSpec& spec, const ModelSpec& model, int model_rep, int data_rep, int n);

inline constexpr const char* kMetricMse = "mse";
inline constexpr const char* kMetricNTimesMse = "n_times_mse";
inline constexpr const char* kMetricEfficiency = "efficiency";
inline constexpr const char* kMetricIterations = "iterations";
inline constexpr const char* kMetricScalars = "scalars_sent";

struct ResultRow {
  std::string experiment;
  int model_rep = 0;
  int data_rep = -1;  // -1 for exact rows
  std::string method;
  int n = 0;          // 0 for exact rows
  std::string metric;
  double value = 0.0;
};

struct SummaryRow {
  std::string method;
  int n = 0;
  std::string metric;
  double mean = 0.0;
  int count = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  // Exact tr(V) per model replicate and method (exact modes only).
  std::vector<std::map<std::string, double>> exact_traces;
  int skipped = 0;  // degenerate dataset replicates excluded from every method
  std::vector<std::string> log;
};

// Estimate for one method on one dataset. Throws DegenerateError when the
// method cannot produce an estimate. `scalars` receives the protocol's
// communication cost (0 for centralized methods).
ParamVector estimate_with(Method method, const ModelSpec& shape, const SampleMatrix& x, int score_samples,
                          long long* scalars = nullptr, int enum_limit = kDefaultEnumLimit);

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 1);

// Means grouped by (method, n, metric), in order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
// One row per method: method,trace,efficiency_ratio,relative_efficiency.
void write_variance_report_csv(std::ostream& out, const std::vector<VarianceReport>& reports);
// Covariance entries: method,term_a,term_b,value.
void write_covariance_csv(std::ostream& out, const std::vector<VarianceReport>& reports, const MarkovGraph& g);
void write_consensus_csv(std::ostream& out, const ConsensusEstimate& est, const MarkovGraph& g);

// ---------------------------------------------------------------------------

enum class FigureScale { Desk, Paper };

FigureScale parse_figure_scale(const std::string& name);
const std::vector<std::string>& figure_names();

struct FigureOptions {
  FigureScale scale = FigureScale::Desk;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out_dir = ".";
};

// Writes <out_dir>/<name>.csv (and a <name>.log with replicate counts);
// returns the files written.
std::vector<std::filesystem::path> reproduce_figure(const std::string& name, const FigureOptions& options);

}  // namespace pldist
