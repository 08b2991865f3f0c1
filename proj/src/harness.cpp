#include "pldist/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pldist/distributed.hpp"
#include "pldist/model_io.hpp"
#include "pldist/parallel.hpp"
#include "pldist/rng.hpp"

namespace pldist {

std::string to_string(GraphFamily g) {
  switch (g) {
    case GraphFamily::Star: return "star";
    case GraphFamily::Grid: return "grid";
    case GraphFamily::BarabasiAlbert: return "barabasi-albert";
    case GraphFamily::Euclidean: return "euclidean";
  }
  return "unknown";
}

std::string to_string(EvaluationMode m) {
  switch (m) {
    case EvaluationMode::ExactAsymptotic: return "exact";
    case EvaluationMode::EmpiricalMse: return "empirical";
    case EvaluationMode::Both: return "both";
  }
  return "unknown";
}

std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::Auto: return "auto";
    case SamplerKind::Exact: return "exact";
    case SamplerKind::Gibbs: return "gibbs";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) throw SpecError("bad value for '" + key + "': " + value);
  return v;
}

template <class E>
E parse_choice(const std::string& key, const std::string& value, std::initializer_list<E> options) {
  for (E o : options) {
    if (to_string(o) == value) return o;
  }
  throw SpecError("bad value for '" + key + "': " + value);
}

std::string policy_name(FreePolicy p) { return p == FreePolicy::EdgesOnly ? "edges" : "edges+singletons"; }

int auto_exact_limit(const ExperimentSpec& spec) { return std::min(spec.enum_limit, 16); }

}  // namespace

int ExperimentSpec::node_count() const {
  switch (graph) {
    case GraphFamily::Grid: return rows * cols;
    default: return nodes;
  }
}

void ExperimentSpec::validate() const {
  if (graph == GraphFamily::Star && nodes < 2) throw SpecError("a star needs at least 2 nodes");
  if (graph == GraphFamily::Grid && (rows < 1 || cols < 1)) throw SpecError("grid dimensions must be positive");
  if (node_count() < 1) throw SpecError("nodes must be positive");
  if (edges_per_node < 1) throw SpecError("edges_per_node must be >= 1");
  if (!(radius > 0)) throw SpecError("radius must be positive");
  if (sigma_pair < 0 || sigma_singleton < 0) throw SpecError("sigmas must be non-negative");
  if (methods.empty()) throw SpecError("no methods listed");
  if (models < 1 || datasets < 1) throw SpecError("replication counts must be >= 1");
  if (mode != EvaluationMode::ExactAsymptotic) {
    if (sample_sizes.empty()) throw SpecError("no sample sizes listed");
    for (int n : sample_sizes) {
      if (n < 1) throw SpecError("sample sizes must be positive");
      if (score_samples > n) throw SpecError("score_samples exceeds a sample size");
    }
  }
  if (score_samples < 0) throw SpecError("score_samples must be >= 0");
  if (gibbs_burn_in < 0 || gibbs_thin < 1) throw SpecError("bad Gibbs settings");
  const bool exact_needed = mode != EvaluationMode::EmpiricalMse ||
                            std::find(methods.begin(), methods.end(), Method::Mle) != methods.end() ||
                            sampler == SamplerKind::Exact;
  if (exact_needed && node_count() > enum_limit) {
    throw SpecError("exact computations need p <= " + std::to_string(enum_limit) + ", got " +
                    std::to_string(node_count()));
  }
}

ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw SpecError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");

    if (key == "name") spec.name = value;
    else if (key == "graph")
      spec.graph = parse_choice(key, value, {GraphFamily::Star, GraphFamily::Grid, GraphFamily::BarabasiAlbert,
                                             GraphFamily::Euclidean});
    else if (key == "nodes") spec.nodes = parse_number<int>(key, value);
    else if (key == "rows") spec.rows = parse_number<int>(key, value);
    else if (key == "cols") spec.cols = parse_number<int>(key, value);
    else if (key == "edges_per_node") spec.edges_per_node = parse_number<int>(key, value);
    else if (key == "radius") spec.radius = parse_number<double>(key, value);
    else if (key == "sigma_pair") spec.sigma_pair = parse_number<double>(key, value);
    else if (key == "sigma_singleton") spec.sigma_singleton = parse_number<double>(key, value);
    else if (key == "free") {
      if (value == "edges") spec.policy = FreePolicy::EdgesOnly;
      else if (value == "edges+singletons") spec.policy = FreePolicy::EdgesAndSingletons;
      else throw SpecError("bad value for 'free': " + value);
    } else if (key == "methods") {
      spec.methods.clear();
      for (const auto& m : split_list(value)) {
        try {
          spec.methods.push_back(parse_method(m));
        } catch (const std::invalid_argument& e) {
          throw SpecError(e.what());
        }
      }
    } else if (key == "sample_sizes") {
      spec.sample_sizes.clear();
      for (const auto& v : split_list(value)) spec.sample_sizes.push_back(parse_number<int>(key, v));
    } else if (key == "models") spec.models = parse_number<int>(key, value);
    else if (key == "datasets") spec.datasets = parse_number<int>(key, value);
    else if (key == "seed") spec.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "mode")
      spec.mode = parse_choice(key, value,
                               {EvaluationMode::ExactAsymptotic, EvaluationMode::EmpiricalMse, EvaluationMode::Both});
    else if (key == "sampler")
      spec.sampler = parse_choice(key, value, {SamplerKind::Auto, SamplerKind::Exact, SamplerKind::Gibbs});
    else if (key == "gibbs_burn_in") spec.gibbs_burn_in = parse_number<int>(key, value);
    else if (key == "gibbs_thin") spec.gibbs_thin = parse_number<int>(key, value);
    else if (key == "score_samples") spec.score_samples = parse_number<int>(key, value);
    else if (key == "enum_limit") spec.enum_limit = parse_number<int>(key, value);
    else throw SpecError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  spec.validate();
  return spec;
}

ExperimentSpec read_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file " + path.string());
  return parse_experiment_spec(in);
}

void write_experiment_spec(std::ostream& out, const ExperimentSpec& spec) {
  out << "name = " << spec.name << "\n";
  out << "graph = " << to_string(spec.graph) << "\n";
  if (spec.graph == GraphFamily::Grid) {
    out << "rows = " << spec.rows << "\ncols = " << spec.cols << "\n";
  } else {
    out << "nodes = " << spec.nodes << "\n";
  }
  if (spec.graph == GraphFamily::BarabasiAlbert) out << "edges_per_node = " << spec.edges_per_node << "\n";
  if (spec.graph == GraphFamily::Euclidean) out << "radius = " << format_double(spec.radius) << "\n";
  out << "sigma_pair = " << format_double(spec.sigma_pair) << "\n";
  out << "sigma_singleton = " << format_double(spec.sigma_singleton) << "\n";
  out << "free = " << policy_name(spec.policy) << "\n";
  out << "methods = ";
  for (std::size_t k = 0; k < spec.methods.size(); ++k) out << (k ? "," : "") << to_string(spec.methods[k]);
  out << "\nsample_sizes = ";
  for (std::size_t k = 0; k < spec.sample_sizes.size(); ++k) out << (k ? "," : "") << spec.sample_sizes[k];
  out << "\nmodels = " << spec.models << "\ndatasets = " << spec.datasets << "\n";
  out << "seed = " << spec.seed << "\nmode = " << to_string(spec.mode) << "\n";
  out << "sampler = " << to_string(spec.sampler) << "\n";
  out << "gibbs_burn_in = " << spec.gibbs_burn_in << "\ngibbs_thin = " << spec.gibbs_thin << "\n";
  out << "score_samples = " << spec.score_samples << "\nenum_limit = " << spec.enum_limit << "\n";
}

ModelSpec replicate_model(const ExperimentSpec& spec, int model_rep) {
  const auto rep = static_cast<std::uint64_t>(model_rep);
  const std::uint64_t graph_seed = derive_seed(spec.seed, stream::kGraph, {rep});
  GraphKind kind;
  switch (spec.graph) {
    case GraphFamily::Star: kind = StarGraph{spec.nodes - 1}; break;
    case GraphFamily::Grid: kind = GridGraph{spec.rows, spec.cols}; break;
    case GraphFamily::BarabasiAlbert: kind = BarabasiAlbertGraph{spec.nodes, spec.edges_per_node, graph_seed}; break;
    case GraphFamily::Euclidean: kind = EuclideanGraph{spec.nodes, spec.radius, graph_seed}; break;
  }
  const ModelSpec full = random_model(make_graph(kind), spec.sigma_pair, spec.sigma_singleton,
                                      derive_seed(spec.seed, stream::kModel, {rep}));
  return full.with_policy(spec.policy);
}

SampleMatrix replicate_data(const ExperimentSpec& spec, const ModelSpec& model, int model_rep, int data_rep, int n) {
  const std::uint64_t seed = derive_seed(spec.seed, stream::kData,
                                         {static_cast<std::uint64_t>(model_rep), static_cast<std::uint64_t>(data_rep),
                                          static_cast<std::uint64_t>(n)});
  bool exact = spec.sampler == SamplerKind::Exact;
  if (spec.sampler == SamplerKind::Auto) exact = model.node_count() <= auto_exact_limit(spec);
  if (exact) return sample_exact(model, n, seed, spec.enum_limit);
  return sample_gibbs(model, n, seed, GibbsOptions{spec.gibbs_burn_in, spec.gibbs_thin});
}

// ---------------------------------------------------------------------------

namespace {

ParamVector one_step_on(SensorNetwork& net, WeightScheme scheme, int score_samples, long long* scalars) {
  const long long before = net.trace().total().scalars;
  net.exchange_estimates(scheme);
  if (needs_cross_covariance(scheme)) net.exchange_scores(score_samples);
  ParamVector theta = net.one_step_consensus(scheme).theta;
  if (scalars) *scalars = net.trace().total().scalars - before;
  return theta;
}

ParamVector centralized_estimate(Method method, const ModelSpec& shape, const SampleMatrix& x,
                                 const std::vector<LocalFit>& fits, int enum_limit) {
  switch (method) {
    case Method::Mle: {
      GlobalFit f = fit_mle_exact(shape, x, Vec(), enum_limit);
      if (!f.converged) throw DegenerateError("MLE did not converge");
      return f.theta;
    }
    case Method::JointMple: {
      GlobalFit f = fit_joint_mple_centralized(shape, x);
      if (!f.converged) throw DegenerateError("joint MPLE did not converge");
      return f.theta;
    }
    case Method::MatrixHessian:
      return matrix_consensus(shape, fits, hessian_weights(fits)).theta;
    default:
      break;
  }
  throw std::logic_error("not a centralized method");
}

bool distributed_method(Method m) { return is_one_step(m) && m != Method::MatrixHessian; }

}  // namespace

ParamVector estimate_with(Method method, const ModelSpec& shape, const SampleMatrix& x, int score_samples,
                          long long* scalars, int enum_limit) {
  if (scalars) *scalars = 0;
  if (distributed_method(method)) {
    SensorNetwork net(shape, x);
    net.run_local_phase();
    return one_step_on(net, scheme_of(method), score_samples, scalars);
  }
  std::vector<LocalFit> fits;
  if (method == Method::MatrixHessian) {
    for (int i = 0; i < shape.node_count(); ++i) {
      fits.push_back(fit_local(make_local_scope(shape, i), local_data(shape.graph(), x, i)));
    }
  }
  return centralized_estimate(method, shape, x, fits, enum_limit);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  ExperimentResult result;
  std::vector<ModelSpec> models;
  for (int r = 0; r < spec.models; ++r) models.push_back(replicate_model(spec, r));

  if (spec.mode != EvaluationMode::EmpiricalMse) {
    std::vector<std::vector<ResultRow>> rows(static_cast<std::size_t>(spec.models));
    std::vector<std::map<std::string, double>> traces(static_cast<std::size_t>(spec.models));
    std::vector<std::string> errors(static_cast<std::size_t>(spec.models));
    parallel_for(spec.models, threads, [&](int r) {
      try {
        ExactAnalysis analysis(models[static_cast<std::size_t>(r)], spec.enum_limit);
        const VarianceReport mle = mle_variance_exact(analysis);
        auto& t = traces[static_cast<std::size_t>(r)];
        t[to_string(Method::Mle)] = mle.trace;
        for (Method m : spec.methods) {
          const VarianceReport rep = m == Method::Mle ? mle : consensus_variance_exact(analysis, m);
          t[to_string(m)] = rep.trace;
          rows[static_cast<std::size_t>(r)].push_back(
              {spec.name, r, -1, to_string(m), 0, kMetricEfficiency, efficiency(rep, mle)});
        }
      } catch (const DegenerateError& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
        rows[static_cast<std::size_t>(r)].clear();
        traces[static_cast<std::size_t>(r)].clear();
      }
    });
    for (int r = 0; r < spec.models; ++r) {
      const auto k = static_cast<std::size_t>(r);
      if (!errors[k].empty()) result.log.push_back("model " + std::to_string(r) + " exact analysis skipped: " + errors[k]);
      result.rows.insert(result.rows.end(), rows[k].begin(), rows[k].end());
    }
    result.exact_traces = std::move(traces);
  }

  if (spec.mode != EvaluationMode::ExactAsymptotic) {
    const int jobs = spec.models * spec.datasets;
    std::vector<std::vector<ResultRow>> rows(static_cast<std::size_t>(jobs));
    std::vector<std::vector<std::string>> logs(static_cast<std::size_t>(jobs));
    std::vector<int> skipped(static_cast<std::size_t>(jobs), 0);
    parallel_for(jobs, threads, [&](int job) {
      const int r = job / spec.datasets;
      const int d = job % spec.datasets;
      const ModelSpec& model = models[static_cast<std::size_t>(r)];
      const auto k = static_cast<std::size_t>(job);
      for (int n : spec.sample_sizes) {
        const SampleMatrix x = replicate_data(spec, model, r, d, n);
        std::vector<ResultRow> local;
        try {
          std::optional<SensorNetwork> net;
          std::vector<LocalFit> fits;
          for (Method m : spec.methods) {
            ParamVector theta;
            long long scalars = 0;
            if (is_one_step(m)) {
              if (!net) {
                net.emplace(model, x);
                fits = net->run_local_phase();
              }
            }
            if (distributed_method(m)) {
              theta = one_step_on(*net, scheme_of(m), spec.score_samples, &scalars);
            } else {
              theta = centralized_estimate(m, model, x, fits, spec.enum_limit);
            }
            const double mse = model.free_values(theta - model.theta()).squaredNorm();
            if (!std::isfinite(mse)) throw DegenerateError("non-finite estimate");
            local.push_back({spec.name, r, d, to_string(m), n, kMetricMse, mse});
            local.push_back({spec.name, r, d, to_string(m), n, kMetricNTimesMse, n * mse});
            if (distributed_method(m)) {
              local.push_back({spec.name, r, d, to_string(m), n, kMetricScalars, static_cast<double>(scalars)});
            }
          }
        } catch (const DegenerateError& e) {
          ++skipped[k];
          logs[k].push_back("model " + std::to_string(r) + " dataset " + std::to_string(d) + " n=" +
                            std::to_string(n) + " skipped: " + e.what());
          continue;
        }
        rows[k].insert(rows[k].end(), local.begin(), local.end());
      }
    });
    for (int job = 0; job < jobs; ++job) {
      const auto k = static_cast<std::size_t>(job);
      result.rows.insert(result.rows.end(), rows[k].begin(), rows[k].end());
      result.log.insert(result.log.end(), logs[k].begin(), logs[k].end());
      result.skipped += skipped[k];
    }
  }
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, int, std::string>, std::size_t> index;
  std::vector<double> sums;
  for (const ResultRow& r : rows) {
    auto key = std::make_tuple(r.method, r.n, r.metric);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.method, r.n, r.metric, 0.0, 0});
      sums.push_back(0.0);
    }
    sums[it->second] += r.value;
    ++out[it->second].count;
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k].mean = sums[k] / out[k].count;
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "experiment,model_rep,data_rep,method,n,metric,value\n";
  for (const ResultRow& r : rows) {
    out << r.experiment << ',' << r.model_rep << ',' << r.data_rep << ',' << r.method << ',' << r.n << ',' << r.metric
        << ',' << format_double(r.value) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,n,metric,mean,count\n";
  for (const SummaryRow& r : rows) {
    out << r.method << ',' << r.n << ',' << r.metric << ',' << format_double(r.mean) << ',' << r.count << '\n';
  }
}

void write_variance_report_csv(std::ostream& out, const std::vector<VarianceReport>& reports) {
  out << "method,trace,efficiency_ratio,relative_efficiency\n";
  for (const VarianceReport& r : reports) {
    out << r.method << ',' << format_double(r.trace) << ',' << format_double(r.efficiency_ratio) << ','
        << format_double(r.relative_efficiency) << '\n';
  }
}

void write_covariance_csv(std::ostream& out, const std::vector<VarianceReport>& reports, const MarkovGraph& g) {
  out << "method,term_a,term_b,value\n";
  for (const VarianceReport& r : reports) {
    for (std::size_t a = 0; a < r.free_terms.size(); ++a) {
      for (std::size_t b = 0; b < r.free_terms.size(); ++b) {
        out << r.method << ',' << to_string(term_at(g, r.free_terms[a])) << ','
            << to_string(term_at(g, r.free_terms[b])) << ','
            << format_double(r.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
      }
    }
  }
}

void write_consensus_csv(std::ostream& out, const ConsensusEstimate& est, const MarkovGraph& g) {
  out << "term,estimate,sensors,weights,selected\n";
  for (const TermProvenance& p : est.provenance) {
    out << to_string(term_at(g, p.term)) << ',' << format_double(est.theta(p.term)) << ',';
    for (std::size_t k = 0; k < p.sensors.size(); ++k) out << (k ? ";" : "") << p.sensors[k];
    out << ',';
    for (std::size_t k = 0; k < p.weights.size(); ++k) out << (k ? ";" : "") << format_double(p.weights[k]);
    out << ',';
    if (p.selected >= 0) out << p.selected;
    out << '\n';
  }
}

}  // namespace pldist
