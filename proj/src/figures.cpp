#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "pldist/distributed.hpp"
#include "pldist/harness.hpp"
#include "pldist/model_io.hpp"
#include "pldist/parallel.hpp"

namespace pldist {

namespace {

const std::vector<Method> kCompared{Method::JointMple, Method::LinearUniform, Method::LinearDiagonal,
                                    Method::LinearOpt, Method::MaxDiagonal};

struct FigureWriter {
  std::filesystem::path csv;
  std::filesystem::path log;
  std::ofstream out;
  std::ofstream log_out;

  FigureWriter(const FigureOptions& options, const std::string& name)
      : csv(options.out_dir / (name + ".csv")), log(options.out_dir / (name + ".log")) {
    std::filesystem::create_directories(options.out_dir);
    out.open(csv);
    log_out.open(log);
    if (!out || !log_out) throw std::runtime_error("cannot write figure files under " + options.out_dir.string());
    log_out << "figure " << name << " scale " << (options.scale == FigureScale::Desk ? "desk" : "paper") << " seed "
            << options.seed << "\n";
  }

  std::vector<std::filesystem::path> files() const { return {csv, log}; }

  void record(const ExperimentResult& r, const std::string& label) {
    log_out << label << ": " << r.rows.size() << " rows, " << r.skipped << " degenerate replicates skipped\n";
    for (const auto& line : r.log) log_out << "  " << line << "\n";
  }
};

bool desk(const FigureOptions& o) { return o.scale == FigureScale::Desk; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

// Mean exact tr(V) per method across model replicates.
std::map<std::string, double> mean_traces(const ExperimentResult& r) {
  std::map<std::string, std::vector<double>> by_method;
  for (const auto& t : r.exact_traces) {
    for (const auto& [m, v] : t) by_method[m].push_back(v);
  }
  std::map<std::string, double> out;
  for (const auto& [m, v] : by_method) out[m] = mean_of(v);
  return out;
}

std::vector<std::filesystem::path> star_efficiency(const FigureOptions& o) {
  FigureWriter w(o, "star_efficiency");
  w.out << "nodes,method,kind,value,count\n";
  const int max_nodes = 10;
  for (int nodes = 3; nodes <= max_nodes; ++nodes) {
    ExperimentSpec spec;
    spec.name = "star_efficiency";
    spec.graph = GraphFamily::Star;
    spec.nodes = nodes;
    spec.methods = kCompared;
    spec.seed = o.seed;
    spec.mode = EvaluationMode::ExactAsymptotic;
    spec.models = desk(o) ? 20 : 50;
    const ExperimentResult exact = run_experiment(spec, o.threads);
    w.record(exact, "exact nodes=" + std::to_string(nodes));
    for (const SummaryRow& s : summarize(exact.rows)) {
      w.out << nodes << ',' << s.method << ",exact," << format_double(s.mean) << ',' << s.count << '\n';
    }

    // Empirical efficiency: n·MSE relative to the model's exact tr(V_mle).
    spec.mode = EvaluationMode::Both;
    spec.models = desk(o) ? 5 : 50;
    spec.datasets = desk(o) ? 10 : 50;
    spec.sample_sizes = {desk(o) ? 1000 : 10000};
    const ExperimentResult emp = run_experiment(spec, o.threads);
    w.record(emp, "empirical nodes=" + std::to_string(nodes));
    std::map<std::string, std::vector<double>> ratios;
    std::vector<std::string> order;
    for (const ResultRow& r : emp.rows) {
      if (r.metric != kMetricNTimesMse) continue;
      const auto& t = emp.exact_traces[static_cast<std::size_t>(r.model_rep)];
      auto mle = t.find(to_string(Method::Mle));
      if (mle == t.end()) continue;
      if (!ratios.count(r.method)) order.push_back(r.method);
      ratios[r.method].push_back(r.value / mle->second);
    }
    for (const auto& m : order) {
      w.out << nodes << ',' << m << ",empirical," << format_double(mean_of(ratios[m])) << ',' << ratios[m].size()
            << '\n';
    }
  }
  return w.files();
}

std::vector<std::filesystem::path> grid_efficiency(const FigureOptions& o) {
  FigureWriter w(o, "grid_efficiency");
  w.out << "sigma_singleton,method,kind,value,count\n";
  for (double sigma : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    ExperimentSpec spec;
    spec.name = "grid_efficiency";
    spec.graph = GraphFamily::Grid;
    spec.rows = spec.cols = desk(o) ? 3 : 4;
    spec.sigma_singleton = sigma;
    spec.methods = kCompared;
    spec.seed = o.seed;
    spec.mode = EvaluationMode::ExactAsymptotic;
    spec.models = desk(o) ? 20 : 50;
    const ExperimentResult r = run_experiment(spec, o.threads);
    w.record(r, "sigma_singleton=" + format_double(sigma));
    for (const SummaryRow& s : summarize(r.rows)) {
      w.out << format_double(sigma) << ',' << s.method << ",exact," << format_double(s.mean) << ',' << s.count
            << '\n';
    }
  }
  return w.files();
}

// Mean MSE per (n, method), plus tr(V)/n reference lines when exact theory
// is available.
std::vector<std::filesystem::path> mse_figure(const FigureOptions& o, const std::string& name, ExperimentSpec spec) {
  FigureWriter w(o, name);
  w.out << "n,method,kind,value,count\n";
  const ExperimentResult r = run_experiment(spec, o.threads);
  w.record(r, name);
  for (const SummaryRow& s : summarize(r.rows)) {
    if (s.metric != kMetricMse) continue;
    w.out << s.n << ',' << s.method << ",mean_mse," << format_double(s.mean) << ',' << s.count << '\n';
  }
  if (spec.mode == EvaluationMode::Both) {
    const auto traces = mean_traces(r);
    for (int n : spec.sample_sizes) {
      for (Method m : spec.methods) {
        auto it = traces.find(to_string(m));
        if (it == traces.end()) continue;
        w.out << n << ',' << it->first << ",theory," << format_double(it->second / n) << ','
              << r.exact_traces.size() << '\n';
      }
    }
  }
  return w.files();
}

std::vector<std::filesystem::path> admm_convergence(const FigureOptions& o) {
  FigureWriter w(o, "admm_convergence");
  ExperimentSpec spec;
  spec.name = "admm_convergence";
  spec.graph = GraphFamily::Grid;
  spec.rows = spec.cols = desk(o) ? 3 : 4;
  spec.seed = o.seed;
  spec.models = desk(o) ? 10 : 50;
  spec.datasets = desk(o) ? 5 : 50;
  const int n = 1000;
  const int iterations = desk(o) ? 100 : 200;

  struct Series {
    std::string name;
    AdmmConfig config;
  };
  std::vector<Series> series{{"zero", AdmmConfig::zero_init()},
                             {"consensus-uniform", AdmmConfig::consensus_init(WeightScheme::Uniform)},
                             {"consensus-diagonal", AdmmConfig::consensus_init(WeightScheme::Diagonal)}};
  for (Series& s : series) {
    s.config.max_iter = iterations;
    s.config.primal_tol = s.config.dual_tol = 1e-14;
  }

  const int jobs = spec.models * spec.datasets;
  const auto cells = static_cast<std::size_t>(iterations + 1);
  // [job][series] -> per-iteration primal, dual, error (carried forward after convergence)
  std::vector<std::vector<std::vector<std::array<double, 3>>>> traj(static_cast<std::size_t>(jobs));
  std::vector<std::vector<int>> hits(static_cast<std::size_t>(jobs));
  std::vector<std::string> errors(static_cast<std::size_t>(jobs));
  std::vector<ModelSpec> models;
  for (int r = 0; r < spec.models; ++r) models.push_back(replicate_model(spec, r));

  parallel_for(jobs, o.threads, [&](int job) {
    const int r = job / spec.datasets;
    const int d = job % spec.datasets;
    const ModelSpec& model = models[static_cast<std::size_t>(r)];
    const SampleMatrix x = replicate_data(spec, model, r, d, n);
    auto& out = traj[static_cast<std::size_t>(job)];
    try {
      for (const Series& s : series) {
        SensorNetwork net(model, x);
        const AdmmResult res = net.run_admm(s.config, &model.theta());
        std::vector<std::array<double, 3>> rows(cells);
        rows[0] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                   model.free_values(res.history[0] - model.theta()).squaredNorm()};
        for (std::size_t t = 1; t < cells; ++t) {
          const std::size_t k = std::min(t, res.steps.size());
          const AdmmStep& st = res.steps[k - 1];
          rows[t] = {st.primal, st.dual, st.sq_error};
        }
        out.push_back(std::move(rows));
        hits[static_cast<std::size_t>(job)].push_back(res.iterations_to_primal(1e-4));
      }
    } catch (const std::exception& e) {
      out.clear();
      errors[static_cast<std::size_t>(job)] = e.what();
    }
  });

  w.out << "iteration,series,primal,dual,sq_error,count\n";
  int used = 0;
  for (int job = 0; job < jobs; ++job) {
    if (errors[static_cast<std::size_t>(job)].empty()) ++used;
    else w.log_out << "  job " << job << " skipped: " << errors[static_cast<std::size_t>(job)] << "\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    for (std::size_t t = 0; t < cells; ++t) {
      std::array<double, 3> sum{0.0, 0.0, 0.0};
      for (int job = 0; job < jobs; ++job) {
        const auto& out = traj[static_cast<std::size_t>(job)];
        if (out.empty()) continue;
        for (int c = 0; c < 3; ++c) sum[static_cast<std::size_t>(c)] += out[si][t][static_cast<std::size_t>(c)];
      }
      w.out << t << ',' << series[si].name;
      for (double v : sum) w.out << ',' << format_double(v / used);
      w.out << ',' << used << '\n';
    }
    std::vector<int> it;
    for (int job = 0; job < jobs; ++job) {
      if (!traj[static_cast<std::size_t>(job)].empty()) it.push_back(hits[static_cast<std::size_t>(job)][si]);
    }
    std::sort(it.begin(), it.end());
    if (!it.empty()) {
      w.log_out << series[si].name << " median iterations to primal 1e-4: " << it[it.size() / 2] << "\n";
    }
  }
  return w.files();
}

std::vector<std::filesystem::path> toy_regions(const FigureOptions& o) {
  FigureWriter w(o, "toy_regions");
  const int grid = desk(o) ? 200 : 400;
  w.out << "gamma,rho,region,joint_beats_max,unif_beats_max\n";
  for (int a = 0; a < grid; ++a) {
    const double gamma = (a + 1.0) / grid;
    for (int b = 0; b < grid; ++b) {
      const double rho = -1.0 + 2.0 * b / (grid - 1);
      const ToyDominance dom = toy_dominance(gamma, rho);
      w.out << format_double(gamma) << ',' << format_double(rho) << ',' << to_string(dom.region()) << ','
            << dom.joint_beats_max << ',' << dom.unif_beats_max << '\n';
    }
  }
  return w.files();
}

ExperimentSpec mse_spec(const FigureOptions& o, const std::string& name) {
  ExperimentSpec spec;
  spec.name = name;
  spec.seed = o.seed;
  spec.methods = kCompared;
  spec.models = desk(o) ? 20 : 50;
  spec.datasets = desk(o) ? 20 : 50;
  spec.sample_sizes = desk(o) ? std::vector<int>{100, 1000, 10000} : std::vector<int>{100, 300, 1000, 3000, 10000};
  return spec;
}

ExperimentSpec large_graph_spec(const FigureOptions& o, const std::string& name, GraphFamily family) {
  ExperimentSpec spec = mse_spec(o, name);
  spec.graph = family;
  spec.nodes = desk(o) ? 30 : 100;
  spec.edges_per_node = 1;
  // Desk graphs keep the mean degree of 100 nodes at radius 0.15.
  spec.radius = desk(o) ? 0.15 * std::sqrt(100.0 / 30.0) : 0.15;
  spec.policy = FreePolicy::EdgesAndSingletons;
  spec.sampler = SamplerKind::Gibbs;
  spec.mode = EvaluationMode::EmpiricalMse;
  spec.models = 5;
  spec.datasets = desk(o) ? 20 : 50;
  spec.sample_sizes = desk(o) ? std::vector<int>{1000, 10000} : std::vector<int>{1000, 3000, 10000};
  return spec;
}

}  // namespace

FigureScale parse_figure_scale(const std::string& name) {
  if (name == "desk") return FigureScale::Desk;
  if (name == "paper") return FigureScale::Paper;
  throw std::invalid_argument("unknown scale '" + name + "' (desk | paper)");
}

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names{"star_efficiency", "star_mse",         "grid_efficiency",
                                              "grid_mse",        "admm_convergence", "toy_regions",
                                              "scalefree_mse",   "euclidean_mse"};
  return names;
}

std::vector<std::filesystem::path> reproduce_figure(const std::string& name, const FigureOptions& options) {
  if (name == "star_efficiency") return star_efficiency(options);
  if (name == "grid_efficiency") return grid_efficiency(options);
  if (name == "admm_convergence") return admm_convergence(options);
  if (name == "toy_regions") return toy_regions(options);
  if (name == "star_mse") {
    ExperimentSpec spec = mse_spec(options, name);
    spec.graph = GraphFamily::Star;
    spec.nodes = 10;
    return mse_figure(options, name, spec);
  }
  if (name == "grid_mse") {
    ExperimentSpec spec = mse_spec(options, name);
    spec.graph = GraphFamily::Grid;
    spec.rows = spec.cols = desk(options) ? 3 : 4;
    return mse_figure(options, name, spec);
  }
  if (name == "scalefree_mse") return mse_figure(options, name, large_graph_spec(options, name, GraphFamily::BarabasiAlbert));
  if (name == "euclidean_mse") return mse_figure(options, name, large_graph_spec(options, name, GraphFamily::Euclidean));
  throw std::invalid_argument("unknown figure '" + name + "'");
}

}  // namespace pldist
