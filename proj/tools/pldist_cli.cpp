#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pldist/asymptotics.hpp"
#include "pldist/distributed.hpp"
#include "pldist/harness.hpp"
#include "pldist/model_io.hpp"
#include "pldist/rng.hpp"

namespace fs = std::filesystem;
using namespace pldist;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out = ".";
  int enum_limit = kDefaultEnumLimit;
  int threads = 1;
};

struct GraphArgs {
  std::string kind = "star";
  int nodes = 4;
  int rows = 3;
  int cols = 3;
  int edges_per_node = 1;
  double radius = 0.15;
};

void add_graph_options(CLI::App* cmd, GraphArgs& g) {
  cmd->add_option("--kind", g.kind, "star | grid | barabasi-albert | euclidean")
      ->check(CLI::IsMember({"star", "grid", "barabasi-albert", "euclidean"}));
  cmd->add_option("--nodes", g.nodes, "node count (star: hub + leaves)");
  cmd->add_option("--rows", g.rows);
  cmd->add_option("--cols", g.cols);
  cmd->add_option("--edges-per-node", g.edges_per_node, "Barabási–Albert attachment count");
  cmd->add_option("--radius", g.radius, "Euclidean connection radius");
}

MarkovGraph build_graph(const GraphArgs& g, std::uint64_t seed) {
  const std::uint64_t graph_seed = derive_seed(seed, stream::kGraph);
  if (g.kind == "star") return make_graph(StarGraph{g.nodes - 1});
  if (g.kind == "grid") return make_graph(GridGraph{g.rows, g.cols});
  if (g.kind == "barabasi-albert") return make_graph(BarabasiAlbertGraph{g.nodes, g.edges_per_node, graph_seed});
  return make_graph(EuclideanGraph{g.nodes, g.radius, graph_seed});
}

void write_graph_csv(const fs::path& path, const MarkovGraph& g) {
  std::ofstream out(path);
  out << "# p " << g.node_count() << "\nu,v\n";
  for (const Edge& e : g.edges()) out << e.u << ',' << e.v << '\n';
}

MarkovGraph read_graph_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  int p = -1;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(in, line)) {
    if (line.rfind("# p ", 0) == 0) {
      p = std::stoi(line.substr(4));
      continue;
    }
    if (line.empty() || line[0] == '#' || line == "u,v") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("bad edge line: " + line);
    edges.emplace_back(std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
  }
  if (p < 1) throw FormatError("graph file lacks a '# p N' line");
  return MarkovGraph(p, edges);
}

FreePolicy parse_policy(const std::string& s) {
  if (s == "edges") return FreePolicy::EdgesOnly;
  if (s == "edges+singletons") return FreePolicy::EdgesAndSingletons;
  throw std::invalid_argument("--free must be edges or edges+singletons");
}

ModelSpec load_model(const std::string& path, const std::string& policy) {
  ModelFile mf = read_model_file(path);
  return ModelSpec(mf.graph, mf.theta).with_policy(parse_policy(policy));
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

void print_estimate(std::ostream& out, const ModelSpec& shape, const ParamVector& theta) {
  for (int t : shape.free_terms()) out << to_string(term_at(shape.graph(), t)) << ' ' << format_double(theta(t)) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed pseudo-likelihood estimation for binary pairwise Markov random fields"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--enum-limit", g.enum_limit, "largest p for exact enumeration")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  GraphArgs graph_args;
  auto* gen_graph = app.add_subcommand("gen-graph", "write a graph as graph.csv");
  add_graph_options(gen_graph, graph_args);

  GraphArgs model_graph;
  std::string graph_file;
  double sigma_pair = 0.5, sigma_singleton = 0.5;
  auto* gen_model = app.add_subcommand("gen-model", "draw a random model and write model.txt");
  add_graph_options(gen_model, model_graph);
  gen_model->add_option("--graph", graph_file, "graph.csv to use instead of generating one");
  gen_model->add_option("--sigma-pair", sigma_pair)->capture_default_str();
  gen_model->add_option("--sigma-singleton", sigma_singleton)->capture_default_str();

  std::string model_file;
  int n = 1000;
  std::string sampler = "auto";
  int burn_in = 1000, thin = 10;
  auto* sample = app.add_subcommand("sample", "draw samples.csv from a model");
  sample->add_option("--model", model_file)->required();
  sample->add_option("-n,--samples", n)->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--sampler", sampler)->check(CLI::IsMember({"auto", "exact", "gibbs"}))->capture_default_str();
  sample->add_option("--burn-in", burn_in)->capture_default_str();
  sample->add_option("--thin", thin)->capture_default_str();

  std::string fit_model, data_file, method = "linear-diagonal", policy = "edges";
  int score_samples = 0;
  auto* fit = app.add_subcommand("fit", "estimate the free parameters from data");
  fit->add_option("--model", fit_model, "model file giving the graph and known values")->required();
  fit->add_option("--data", data_file, "samples csv")->required();
  fit->add_option("--method", method)
      ->check(CLI::IsMember({"mle", "mple", "local", "linear-uniform", "linear-diagonal", "linear-opt",
                             "max-diagonal", "matrix-hessian", "admm"}))
      ->capture_default_str();
  fit->add_option("--free", policy, "edges | edges+singletons")->capture_default_str();
  fit->add_option("--score-samples", score_samples, "score samples exchanged for linear-opt (0: all)");
  std::string admm_init = "diagonal";
  int admm_iter = 500;
  fit->add_option("--admm-init", admm_init, "zero | uniform | diagonal | optimal-vector | max-diagonal")
      ->capture_default_str();
  fit->add_option("--admm-iterations", admm_iter)->capture_default_str();

  std::string var_model, var_policy = "edges";
  auto* exact_var = app.add_subcommand("exact-variance", "exact asymptotic covariance of every method");
  exact_var->add_option("--model", var_model)->required();
  exact_var->add_option("--free", var_policy)->capture_default_str();

  std::string spec_file;
  auto* experiment = app.add_subcommand("experiment", "run an experiment spec");
  experiment->add_option("spec", spec_file, "key = value spec file")->required();

  std::string figure_name, scale = "desk";
  auto* figure = app.add_subcommand("figure", "write the data behind a figure");
  figure->add_option("name", figure_name)->required()->check(CLI::IsMember(figure_names()));
  figure->add_option("--scale", scale)->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_graph) {
      const MarkovGraph graph = build_graph(graph_args, g.seed);
      const fs::path p = out_path(g, "graph.csv");
      write_graph_csv(p, graph);
      std::cout << "wrote " << p.string() << " (" << graph.node_count() << " nodes, " << graph.edge_count()
                << " edges)\n";
    } else if (*gen_model) {
      const MarkovGraph graph = graph_file.empty() ? build_graph(model_graph, g.seed) : read_graph_csv(graph_file);
      const ModelSpec model = random_model(graph, sigma_pair, sigma_singleton, derive_seed(g.seed, stream::kModel));
      const fs::path p = out_path(g, "model.txt");
      write_model_file(p.string(), model.graph(), model.theta());
      std::cout << "wrote " << p.string() << "\n";
    } else if (*sample) {
      const ModelSpec model = load_model(model_file, "edges+singletons");
      const std::uint64_t seed = derive_seed(g.seed, stream::kData);
      const bool exact = sampler == "exact" || (sampler == "auto" && model.node_count() <= std::min(g.enum_limit, 16));
      const SampleMatrix x = exact ? sample_exact(model, n, seed, g.enum_limit)
                                   : sample_gibbs(model, n, seed, GibbsOptions{burn_in, thin});
      const fs::path p = out_path(g, "samples.csv");
      write_samples_file(p.string(), x);
      std::cout << "wrote " << p.string() << " (" << x.rows() << " samples, " << (exact ? "exact" : "gibbs") << ")\n";
    } else if (*fit) {
      const ModelSpec shape = load_model(fit_model, policy);
      const SampleMatrix x = read_samples_file(data_file);
      if (method == "local") {
        for (int i = 0; i < shape.node_count(); ++i) {
          const LocalFit f = fit_local(make_local_scope(shape, i), local_data(shape.graph(), x, i));
          std::cout << "sensor " << i << (f.converged() ? "" : " (degenerate)") << '\n';
          for (int t : f.scope.free_terms) {
            std::cout << "  " << to_string(term_at(shape.graph(), t)) << ' ' << format_double(f.estimate(t));
            if (f.converged()) std::cout << " quality " << format_double(f.quality(t));
            std::cout << '\n';
          }
        }
      } else if (method == "admm") {
        SensorNetwork net(shape, x, g.threads);
        AdmmConfig config =
            admm_init == "zero" ? AdmmConfig::zero_init() : AdmmConfig::consensus_init(parse_weight_scheme(admm_init));
        config.max_iter = admm_iter;
        config.score_samples = score_samples;
        const AdmmResult r = net.run_admm(config);
        print_estimate(std::cout, shape, r.theta_bar);
        std::cout << (r.converged ? "converged" : "not converged") << " after " << r.iterations << " iterations, "
                  << net.trace().total().scalars << " scalars sent\n";
        std::ofstream traj(out_path(g, "trajectory.csv"));
        write_trajectory_csv(traj, r);
      } else if (method == "mle" || method == "mple" || method == "matrix-hessian") {
        const Method m = parse_method(method);
        const ParamVector theta = estimate_with(m, shape, x, score_samples, nullptr, g.enum_limit);
        print_estimate(std::cout, shape, theta);
      } else {
        const WeightScheme scheme = scheme_of(parse_method(method));
        SensorNetwork net(shape, x, g.threads);
        net.run_local_phase();
        net.exchange_estimates(scheme);
        if (needs_cross_covariance(scheme)) net.exchange_scores(score_samples);
        const ConsensusEstimate est = net.one_step_consensus(scheme);
        for (const TermProvenance& p : est.provenance) {
          std::cout << to_string(term_at(shape.graph(), p.term)) << ' ' << format_double(est.theta(p.term));
          if (p.selected >= 0) std::cout << " selected sensor " << p.selected;
          std::cout << '\n';
        }
        std::cout << net.trace().total().messages << " messages, " << net.trace().total().scalars
                  << " scalars sent\n";
        std::ofstream csv(out_path(g, "estimate.csv"));
        write_consensus_csv(csv, est, shape.graph());
      }
    } else if (*exact_var) {
      const ModelSpec model = load_model(var_model, var_policy);
      const ExactAnalysis analysis(model, g.enum_limit);
      const VarianceReport mle = mle_variance_exact(analysis);
      std::vector<VarianceReport> reports;
      for (Method m : {Method::Mle, Method::JointMple, Method::LinearUniform, Method::LinearDiagonal,
                       Method::LinearOpt, Method::MaxDiagonal, Method::MatrixHessian}) {
        VarianceReport r = consensus_variance_exact(analysis, m);
        attach_efficiency(r, mle);
        std::cout << r.method << " trace " << format_double(r.trace) << " efficiency "
                  << format_double(r.efficiency_ratio) << '\n';
        reports.push_back(std::move(r));
      }
      std::ofstream summary(out_path(g, "variance.csv"));
      write_variance_report_csv(summary, reports);
      std::ofstream cov(out_path(g, "covariance.csv"));
      write_covariance_csv(cov, reports, model.graph());
    } else if (*experiment) {
      ExperimentSpec spec = read_experiment_spec(spec_file);
      if (app.get_option("--seed")->count() > 0) spec.seed = g.seed;
      const ExperimentResult r = run_experiment(spec, g.threads);
      std::ofstream rows(out_path(g, spec.name + "_rows.csv"));
      write_rows_csv(rows, r.rows);
      std::ofstream summary(out_path(g, spec.name + "_summary.csv"));
      write_summary_csv(summary, summarize(r.rows));
      std::ofstream log(out_path(g, spec.name + ".log"));
      write_experiment_spec(log, spec);
      log << "skipped " << r.skipped << "\n";
      for (const auto& line : r.log) log << line << "\n";
      std::cout << r.rows.size() << " rows, " << r.skipped << " degenerate replicates skipped\n";
    } else if (*figure) {
      FigureOptions options{parse_figure_scale(scale), g.seed, g.threads, g.out};
      for (const fs::path& p : reproduce_figure(figure_name, options)) std::cout << "wrote " << p.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
