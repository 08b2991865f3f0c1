#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "pldist/harness.hpp"
#include "support.hpp"

using namespace pldist;
namespace fs = std::filesystem;

namespace {

ExperimentSpec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment_spec(in);
}

std::string rows_csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_rows_csv(out, r.rows);
  return out.str();
}

ExperimentSpec small_empirical() {
  ExperimentSpec s;
  s.name = "small";
  s.graph = GraphFamily::Star;
  s.nodes = 4;
  s.methods = {Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt,
               Method::MaxDiagonal, Method::MatrixHessian, Method::Mle};
  s.sample_sizes = {300, 1000};
  s.models = 2;
  s.datasets = 3;
  s.seed = 11;
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pldist_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("spec parsing") {
  const ExperimentSpec s = parse(
      "# comment line\n"
      "name = grid_run\n"
      "graph = grid   # trailing comment\n"
      "rows = 2\ncols = 3\n"
      "sigma_pair = 0.25\n"
      "free = edges+singletons\n"
      "methods = mple, linear-uniform,max-diagonal\n"
      "sample_sizes = 100,1000\n"
      "models = 4\ndatasets = 5\nseed = 99\nmode = empirical\nsampler = gibbs\n");
  CHECK(s.name == "grid_run");
  CHECK(s.graph == GraphFamily::Grid);
  CHECK(s.node_count() == 6);
  CHECK(s.sigma_pair == 0.25);
  CHECK(s.sigma_singleton == 0.5);
  CHECK(s.policy == FreePolicy::EdgesAndSingletons);
  REQUIRE(s.methods.size() == 3);
  CHECK(s.methods[1] == Method::LinearUniform);
  CHECK(s.sample_sizes == std::vector<int>{100, 1000});
  CHECK(s.models == 4);
  CHECK(s.seed == 99u);
  CHECK(s.mode == EvaluationMode::EmpiricalMse);
  CHECK(s.sampler == SamplerKind::Gibbs);

  CHECK_THROWS_AS(parse("colour = red\n"), SpecError);
  CHECK_THROWS_AS(parse("nodes = four\n"), SpecError);
  CHECK_THROWS_AS(parse("nodes = 4x\n"), SpecError);
  CHECK_THROWS_AS(parse("graph = torus\n"), SpecError);
  CHECK_THROWS_AS(parse("methods = linear-median\n"), SpecError);
  CHECK_THROWS_AS(parse("nodes 4\n"), SpecError);
  CHECK_THROWS_AS(parse("nodes =\n"), SpecError);
  CHECK_THROWS_AS(read_experiment_spec("/nonexistent/x.spec"), SpecError);
}

TEST_CASE("spec write/parse round trip") {
  ExperimentSpec s = small_empirical();
  s.graph = GraphFamily::Euclidean;
  s.nodes = 12;
  s.radius = 0.3;
  s.sigma_singleton = 0.125;
  s.policy = FreePolicy::EdgesAndSingletons;
  s.mode = EvaluationMode::EmpiricalMse;
  s.score_samples = 50;
  s.gibbs_thin = 3;
  std::ostringstream out;
  write_experiment_spec(out, s);
  const ExperimentSpec t = parse(out.str());
  std::ostringstream again;
  write_experiment_spec(again, t);
  CHECK(out.str() == again.str());
  CHECK(t.radius == s.radius);
  CHECK(t.methods == s.methods);
  CHECK(t.score_samples == 50);
}

TEST_CASE("spec validation") {
  ExperimentSpec s;
  CHECK_NOTHROW(s.validate());
  s.models = 0;
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = ExperimentSpec{};
  s.datasets = 0;
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = ExperimentSpec{};
  s.methods.clear();
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = ExperimentSpec{};
  s.sample_sizes = {0};
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = ExperimentSpec{};
  s.sample_sizes = {100};
  s.score_samples = 200;
  CHECK_THROWS_AS(s.validate(), SpecError);

  // exact analysis beyond the enumeration limit
  s = ExperimentSpec{};
  s.graph = GraphFamily::BarabasiAlbert;
  s.nodes = 30;
  s.mode = EvaluationMode::ExactAsymptotic;
  CHECK_THROWS_AS(s.validate(), SpecError);
  s.mode = EvaluationMode::EmpiricalMse;
  CHECK_NOTHROW(s.validate());
  s.methods.push_back(Method::Mle);
  CHECK_THROWS_AS(s.validate(), SpecError);
  s.methods.pop_back();
  s.sampler = SamplerKind::Exact;
  CHECK_THROWS_AS(s.validate(), SpecError);

  s = ExperimentSpec{};
  s.nodes = 8;
  s.enum_limit = 6;
  s.mode = EvaluationMode::ExactAsymptotic;
  CHECK_THROWS_AS(s.validate(), SpecError);
}

TEST_CASE("method coverage through names") {
  for (const char* name :
       {"mle", "mple", "linear-uniform", "linear-diagonal", "linear-opt", "max-diagonal", "matrix-hessian"}) {
    CHECK(to_string(parse_method(name)) == name);
  }
  CHECK_THROWS(parse_method("admm"));
}

TEST_CASE("replicates depend only on spec and indices") {
  const ExperimentSpec s = small_empirical();
  const ModelSpec a = replicate_model(s, 1);
  const ModelSpec b = replicate_model(s, 1);
  CHECK(a.theta() == b.theta());
  CHECK(replicate_model(s, 0).theta() != a.theta());
  CHECK(a.free_count() == 3);  // edges only
  const SampleMatrix x = replicate_data(s, a, 1, 2, 50);
  const SampleMatrix y = replicate_data(s, a, 1, 2, 50);
  CHECK(x == y);
  CHECK(!(replicate_data(s, a, 1, 1, 50) == x));
}

TEST_CASE("run_experiment rows") {
  const ExperimentSpec s = small_empirical();
  const ExperimentResult r = run_experiment(s, 2);
  const std::set<std::string> vocab{kMetricMse, kMetricNTimesMse, kMetricEfficiency, kMetricIterations,
                                    kMetricScalars};
  int exact_rows = 0;
  for (const ResultRow& row : r.rows) {
    CHECK(std::isfinite(row.value));
    CHECK(vocab.count(row.metric) == 1);
    CHECK(row.experiment == "small");
    if (row.data_rep < 0) {
      ++exact_rows;
      CHECK(row.metric == kMetricEfficiency);
      CHECK(row.n == 0);
    }
  }
  CHECK(exact_rows == s.models * static_cast<int>(s.methods.size()));
  const int per_dataset = 2 * 7 + 4;  // mse and n*mse per method, scalars for the 4 distributed ones
  CHECK(static_cast<int>(r.rows.size()) ==
        exact_rows + (s.models * s.datasets * 2 - r.skipped) * per_dataset);
  REQUIRE(r.exact_traces.size() == 2);
  CHECK(r.exact_traces[0].count("mle") == 1);

  for (const ResultRow& row : r.rows) {
    if (row.metric == kMetricNTimesMse) {
      // the matching mse row precedes it
      bool found = false;
      for (const ResultRow& o : r.rows) {
        if (o.metric == kMetricMse && o.model_rep == row.model_rep && o.data_rep == row.data_rep &&
            o.method == row.method && o.n == row.n) {
          CHECK(row.value == doctest::Approx(o.value * row.n).epsilon(1e-14));
          found = true;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("run_experiment is deterministic and thread independent") {
  const ExperimentSpec s = small_empirical();
  const std::string a = rows_csv(run_experiment(s, 1));
  const std::string b = rows_csv(run_experiment(s, 1));
  const std::string c = rows_csv(run_experiment(s, 4));
  CHECK(a == b);
  CHECK(a == c);
  ExperimentSpec other = s;
  other.seed = 12;
  CHECK(rows_csv(run_experiment(other, 2)) != a);
}

TEST_CASE("summary means match recomputation") {
  const ExperimentResult r = run_experiment(small_empirical(), 3);
  const std::vector<SummaryRow> summary = summarize(r.rows);
  for (const SummaryRow& s : summary) {
    double sum = 0.0;
    int count = 0;
    for (const ResultRow& row : r.rows) {
      if (row.method == s.method && row.n == s.n && row.metric == s.metric) {
        sum += row.value;
        ++count;
      }
    }
    CHECK(count == s.count);
    CHECK(std::abs(s.mean - sum / count) <= 1e-12 * std::max(1.0, std::abs(s.mean)));
  }
  std::ostringstream out;
  write_summary_csv(out, summary);
  CHECK(out.str().rfind("method,n,metric,mean,count\n", 0) == 0);
}

TEST_CASE("star(9) exact efficiencies") {
  ExperimentSpec s;
  s.name = "star_eff";
  s.graph = GraphFamily::Star;
  s.nodes = 10;
  s.mode = EvaluationMode::ExactAsymptotic;
  s.methods = {Method::Mle, Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt,
               Method::MaxDiagonal};
  s.models = 3;
  s.seed = 5;
  const ExperimentResult r = run_experiment(s, 3);
  REQUIRE(r.rows.size() == 18);
  for (const ResultRow& row : r.rows) {
    CHECK(row.metric == kMetricEfficiency);
    if (row.method == "mle") CHECK(row.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.value >= 1.0 - 1e-9);
  }
  // efficiency agrees with the oracle covariance traces
  for (int m = 0; m < s.models; ++m) {
    const ModelSpec model = replicate_model(s, m);
    const auto om = testsupport::to_oracle(model);
    const auto free = model.free_terms();
    const double mle = oracle::mle_cov(om, free).trace();
    const double joint = oracle::joint_mple_cov(om, free).trace();
    for (const ResultRow& row : r.rows) {
      if (row.model_rep != m) continue;
      if (row.method == "mple") CHECK(row.value == doctest::Approx(joint / mle).epsilon(1e-9));
    }
    CHECK(r.exact_traces[static_cast<std::size_t>(m)].at("mle") == doctest::Approx(mle).epsilon(1e-9));
  }
}

TEST_CASE("n*MSE approaches exact trace on a 4-node star") {
  ExperimentSpec s;
  s.name = "star4";
  s.graph = GraphFamily::Star;
  s.nodes = 4;
  s.methods = {Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::MaxDiagonal};
  s.sample_sizes = {100, 1000, 10000};
  s.models = 1;
  s.datasets = 150;
  s.seed = 3;
  const ExperimentResult r = run_experiment(s, 4);
  const auto& traces = r.exact_traces.at(0);
  std::map<std::pair<std::string, int>, double> rel;
  for (const SummaryRow& row : summarize(r.rows)) {
    if (row.metric != kMetricNTimesMse) continue;
    rel[{row.method, row.n}] = std::abs(row.mean / traces.at(row.method) - 1.0);
  }
  for (Method m : s.methods) {
    const std::string name = to_string(m);
    INFO(name);
    // 150 datasets: the mean of a scaled chi-square has relative sd around 0.07
    CHECK(rel.at({name, 10000}) < 0.25);
  }
}

TEST_CASE("estimate_with") {
  const ModelSpec model = testsupport::random_spec(5, 0.6, 0.5, 0.5, 21);
  const SampleMatrix x = sample_exact(model, 3000, 4);
  long long scalars = -1;
  const ParamVector mple = estimate_with(Method::JointMple, model, x, 0, &scalars);
  CHECK(scalars == 0);
  const GlobalFit direct = fit_joint_mple_centralized(model, x);
  CHECK((mple - direct.theta).norm() == 0.0);
  const int e = model.graph().edge_count();
  estimate_with(Method::LinearUniform, model, x, 0, &scalars);
  CHECK(scalars == 2LL * e);
  estimate_with(Method::LinearDiagonal, model, x, 0, &scalars);
  CHECK(scalars == 4LL * e);
  estimate_with(Method::LinearOpt, model, x, 100, &scalars);
  CHECK(scalars == 4LL * e + 2LL * e * 100);
  const ParamVector h = estimate_with(Method::MatrixHessian, model, x, 0, &scalars);
  CHECK(scalars == 0);
  CHECK(model.free_values(h - model.theta()).norm() < 0.5);
}

TEST_CASE("toy_regions figure labels") {
  const fs::path dir = scratch("toy");
  const auto files = reproduce_figure("toy_regions", FigureOptions{FigureScale::Desk, 1, 1, dir});
  REQUIRE(!files.empty());
  std::ifstream in(dir / "toy_regions.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "gamma,rho,region,joint_beats_max,unif_beats_max");
  int count = 0;
  int mismatches = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    const auto f = split(line);
    REQUIRE(f.size() == 5);
    const double g = std::stod(f[0]);
    const double rho = std::stod(f[1]);
    const double t_joint = 0.5 * std::sqrt(g) * (g + 1.0);
    const double t_unif = (3.0 * g - 1.0) / (2.0 * std::sqrt(g));
    const std::string expect = rho <= t_unif ? "I" : (rho <= t_joint ? "II" : "III");
    if (f[2] != expect) ++mismatches;
    ++seen[f[2]];
    ++count;
  }
  CHECK(count == 200 * 200);
  CHECK(mismatches == 0);
  CHECK(seen.size() == 3);
  CHECK_THROWS(reproduce_figure("no_such_figure", FigureOptions{FigureScale::Desk, 1, 1, dir}));
  CHECK_THROWS(parse_figure_scale("huge"));
  CHECK(figure_names().size() == 8);
}

TEST_CASE("grid_mse desk figure: joint MPLE has the lowest mean MSE") {
  const fs::path dir = scratch("grid_mse");
  reproduce_figure("grid_mse", FigureOptions{FigureScale::Desk, 1, 2, dir});
  std::ifstream in(dir / "grid_mse.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,method,kind,value,count");
  std::map<int, std::map<std::string, double>> mse;
  while (std::getline(in, line)) {
    const auto f = split(line);
    REQUIRE(f.size() == 5);
    if (f[2] == "mean_mse") mse[std::stoi(f[0])][f[1]] = std::stod(f[3]);
  }
  REQUIRE(mse.size() == 3);
  for (const auto& [n, by_method] : mse) {
    INFO("n = " << n);
    REQUIRE(by_method.count("mple") == 1);
    for (const auto& [method, v] : by_method)
      if (method != "mple") CHECK(by_method.at("mple") < v);
  }
}

TEST_CASE("admm_convergence figure series") {
  const fs::path dir = scratch("admm");
  reproduce_figure("admm_convergence", FigureOptions{FigureScale::Desk, 1, 2, dir});
  std::ifstream in(dir / "admm_convergence.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,series,primal,dual,sq_error,count");
  std::set<std::string> series;
  while (std::getline(in, line)) series.insert(split(line).at(1));
  CHECK(series == std::set<std::string>{"zero", "consensus-uniform", "consensus-diagonal"});
}
