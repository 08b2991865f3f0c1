#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "pldist/model.hpp"
#include "pldist/model_io.hpp"
#include "support.hpp"

using namespace pldist;
using testsupport::to_oracle;

namespace {

ModelSpec two_node(double t12, double t1 = 0.0, double t2 = 0.0) {
  MarkovGraph g(2, {{0, 1}});
  Vec th(3);
  th << t1, t2, t12;
  return ModelSpec(g, th);
}

std::vector<std::int8_t> cfg(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("graph construction and adjacency") {
  MarkovGraph g(4, {{2, 1}, {0, 3}, {0, 1}});
  CHECK(g.edge_count() == 3);
  CHECK(g.edges()[0] == Edge{0, 1});
  CHECK(g.edges()[1] == Edge{0, 3});
  CHECK(g.edges()[2] == Edge{1, 2});
  for (int i = 0; i < 4; ++i)
    for (int j : g.neighbors(i)) CHECK(g.has_edge(j, i));
  auto a1 = g.closed_neighborhood(1);
  CHECK(a1 == std::vector<int>{0, 1, 2});
  CHECK_THROWS(MarkovGraph(3, {{1, 1}}));
  CHECK_THROWS(MarkovGraph(3, {{0, 1}, {1, 0}}));
  CHECK_THROWS(MarkovGraph(3, {{0, 5}}));
}

TEST_CASE("index terms have a canonical dense layout") {
  MarkovGraph g(3, {{0, 1}, {0, 2}, {1, 2}});
  CHECK(term_count(g) == 6);
  for (int a = 0; a < term_count(g); ++a) CHECK(term_index(g, term_at(g, a)) == a);
  CHECK(term_at(g, 0) < term_at(g, 2));
  CHECK(term_at(g, 2) < term_at(g, 3));
  CHECK(term_at(g, 3) == IndexTerm::edge(1, 0));
  CHECK(scope_terms(g, 1) == std::vector<int>{1, 3, 5});
  CHECK_THROWS(term_index(MarkovGraph(3, {{0, 1}}), IndexTerm::edge(1, 2)));
}

TEST_CASE("sufficient statistics") {
  MarkovGraph path(2, {{0, 1}});
  auto u = sufficient_statistics(cfg({1, 1}), path);
  CHECK(u[0] == 1);
  CHECK(u[1] == 1);
  CHECK(u[2] == 1);
  CHECK(sufficient_statistics(cfg({1, -1}), path)[2] == -1);

  MarkovGraph tri(3, {{0, 1}, {0, 2}, {1, 2}});
  auto t = sufficient_statistics(cfg({-1, -1, 1}), tri);
  CHECK(t[3] == 1);
  CHECK(t[4] == -1);
  CHECK(t[5] == -1);
  CHECK_THROWS(sufficient_statistics(cfg({1, 1, 1}), path));
}

TEST_CASE("log partition examples") {
  MarkovGraph one(1, {});
  CHECK(log_partition_exact(ModelSpec(one, Vec::Zero(1))) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_partition_exact(two_node(0.0)) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  // four states: e, e, 1/e, 1/e
  const double expect = std::log(2 * std::exp(1.0) + 2 * std::exp(-1.0));
  CHECK(std::abs(log_partition_exact(two_node(1.0)) - expect) < 1e-14);
  CHECK(std::abs(log_partition_exact(two_node(1.0)) - 1.8201) < 1e-4);
  MarkovGraph big(21, {});
  CHECK_THROWS_AS(log_partition_exact(ModelSpec(big, Vec::Zero(21))), EnumerationLimitError);
  CHECK_NOTHROW(log_partition_exact(ModelSpec(MarkovGraph(5, {}), Vec::Zero(5)), 5));
  CHECK_THROWS_AS(log_partition_exact(ModelSpec(MarkovGraph(5, {}), Vec::Zero(5)), 4), EnumerationLimitError);
}

TEST_CASE("exact moments examples") {
  auto m0 = exact_moments(two_node(0.0));
  CHECK(m0.cwiseAbs().maxCoeff() < 1e-15);
  auto m1 = exact_moments(two_node(1.0));
  CHECK(std::abs(m1[2] - std::tanh(1.0)) < 1e-14);
  CHECK(std::abs(m1[2] - 0.7616) < 1e-4);
  CHECK(std::abs(m1[0]) < 1e-15);
  CHECK(exact_moments(two_node(10.0))[2] >= 0.999);
}

TEST_CASE("enumeration agrees with brute force on random models") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto m = testsupport::random_spec(4, 0.6, 0.5, 0.5, 100 + s);
    auto o = to_oracle(m);
    CHECK(std::abs(log_partition_exact(m) - oracle::log_z(o)) < 1e-12);
    CHECK(oracle::max_abs(exact_moments(m) - oracle::moments(o)) < 1e-12);
    ExactDistribution d(m.graph(), m.theta());
    CHECK(oracle::max_abs(exact_statistic_covariance(m.graph(), d) - oracle::stat_cov(o)) < 1e-12);
  }
}

TEST_CASE("gradient of log Z equals the moments") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 200 + s);
    auto f = [&](const Vec& th) { return log_partition_exact(m.with_theta(th)); };
    Vec fd = oracle::fd_gradient(f, m.theta(), 1e-4);
    CHECK(oracle::max_abs(fd - exact_moments(m)) < 1e-6);
  }
}

TEST_CASE("zero parameters give the uniform distribution exactly") {
  for (int p = 1; p <= 6; ++p) {
    MarkovGraph g = make_graph(StarGraph{std::max(1, p - 1)});
    ExactDistribution d(g, Vec::Zero(term_count(g)));
    for (double pr : d.probabilities()) CHECK(pr == std::ldexp(1.0, -g.node_count()));
  }
}

TEST_CASE("conditional probability") {
  double none[1] = {0.0};
  std::int8_t up[1] = {1};
  CHECK(conditional_prob(0.0, std::span<const double>(none, 1), std::span<const std::int8_t>(up, 1)) == 0.5);
  double one[1] = {1.0};
  const double q = conditional_prob(0.0, std::span<const double>(one, 1), std::span<const std::int8_t>(up, 1));
  CHECK(std::abs(q - 1.0 / (1.0 + std::exp(-2.0))) < 1e-15);
  CHECK(std::abs(q - 0.8808) < 1e-4);

  double th[3] = {0.3, -0.7, 1.1};
  std::int8_t x[3] = {1, -1, -1};
  std::int8_t xf[3] = {-1, 1, 1};
  const double a = conditional_prob(0.0, th, x);
  const double b = conditional_prob(0.0, th, xf);
  CHECK(std::abs(a + b - 1.0) < 1e-15);
  CHECK_THROWS(conditional_prob(0.0, std::span<const double>(th, 2), std::span<const std::int8_t>(x, 3)));
}

TEST_CASE("conditional probability is the enumerated conditional (Markov property)") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto m = testsupport::random_spec(4, 0.6, 0.5, 0.5, 300 + s);
    auto o = to_oracle(m);
    for (std::uint64_t st = 0; st < 16; ++st) {
      auto xo = oracle::spins(st, 4);
      std::vector<std::int8_t> x(xo.begin(), xo.end());
      for (int i = 0; i < 4; ++i)
        CHECK(std::abs(conditional_prob(m.graph(), m.theta(), i, x) - oracle::conditional_plus(o, i, xo)) <= 1e-12);
    }
  }
}

TEST_CASE("exact sampling") {
  auto z = sample_exact(two_node(0.0), 100000, 5);
  double m0 = 0, m1 = 0;
  for (int k = 0; k < z.rows(); ++k) m0 += z(k, 0), m1 += z(k, 1);
  CHECK(std::abs(m0 / z.rows()) < 0.02);
  CHECK(std::abs(m1 / z.rows()) < 0.02);

  auto x = sample_exact(two_node(1.0), 100000, 6);
  double c = 0;
  for (int k = 0; k < x.rows(); ++k) c += x(k, 0) * x(k, 1);
  CHECK(std::abs(c / x.rows() - std::tanh(1.0)) < 0.02);

  CHECK(sample_exact(two_node(1.0), 500, 9) == sample_exact(two_node(1.0), 500, 9));
  CHECK_FALSE(sample_exact(two_node(1.0), 500, 9) == sample_exact(two_node(1.0), 500, 10));
  CHECK_THROWS(sample_exact(two_node(1.0), 0, 9));
}

TEST_CASE("exact sampling moments converge at the Monte-Carlo rate") {
  auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 400);
  auto o = to_oracle(m);
  const Vec mu = oracle::moments(o);
  const int n = 100000;
  auto x = sample_exact(m, n, 401);
  Vec emp = Vec::Zero(mu.size());
  for (int k = 0; k < n; ++k) emp += sufficient_statistics(x.row(k), m.graph());
  emp /= n;
  for (int a = 0; a < mu.size(); ++a) {
    const double se = std::sqrt((1.0 - mu[a] * mu[a]) / n);
    CHECK(std::abs(emp[a] - mu[a]) < 4 * se);
  }
}

TEST_CASE("Gibbs sampling") {
  auto z = sample_gibbs(two_node(0.0), 20000, 11);
  double m0 = 0;
  for (int k = 0; k < z.rows(); ++k) m0 += z(k, 0);
  CHECK(std::abs(m0 / z.rows()) < 0.03);

  auto x = sample_gibbs(two_node(1.0), 100000, 12, GibbsOptions{1000, 10});
  double c = 0;
  for (int k = 0; k < x.rows(); ++k) c += x(k, 0) * x(k, 1);
  CHECK(std::abs(c / x.rows() - std::tanh(1.0)) < 0.03);

  CHECK(sample_gibbs(two_node(1.0), 100, 3) == sample_gibbs(two_node(1.0), 100, 3));
  CHECK_THROWS(sample_gibbs(two_node(1.0), 10, 3, GibbsOptions{-1, 10}));
}

TEST_CASE("Gibbs configuration frequencies match enumeration") {
  auto m = testsupport::random_spec(3, 1.0, 0.5, 0.5, 500);
  auto pr = oracle::probs(to_oracle(m));
  const int n = 100000;
  auto x = sample_gibbs(m, n, 501, GibbsOptions{1000, 10});
  std::vector<double> freq(8, 0.0);
  for (int k = 0; k < n; ++k) {
    int s = 0;
    for (int i = 0; i < 3; ++i)
      if (x(k, i) > 0) s |= 1 << i;
    freq[s] += 1.0 / n;
  }
  for (int s = 0; s < 8; ++s) {
    const double se = std::sqrt(pr[s] * (1 - pr[s]) / n);
    CHECK(std::abs(freq[s] - pr[s]) < 3 * se);
  }
}

TEST_CASE("graph generators") {
  auto star = make_graph(StarGraph{3});
  CHECK(star.node_count() == 4);
  CHECK(star.edge_count() == 3);
  CHECK(star.degree(0) == 3);

  auto grid = make_graph(GridGraph{4, 4});
  CHECK(grid.node_count() == 16);
  CHECK(grid.edge_count() == 24);

  auto ba = make_graph(BarabasiAlbertGraph{100, 1, 7});
  CHECK(ba.node_count() == 100);
  CHECK(ba.edge_count() == 99);
  CHECK(ba.is_connected());
  auto ba2 = make_graph(BarabasiAlbertGraph{30, 2, 7});
  CHECK(ba2.edge_count() == 1 + 2 * 28);
  CHECK(ba2.is_connected());
  CHECK(make_graph(BarabasiAlbertGraph{30, 2, 7}).edges() == ba2.edges());

  auto eu = make_graph(EuclideanGraph{30, 0.3, 8});
  CHECK(eu.node_count() == 30);
  CHECK(eu.is_connected());
  CHECK_THROWS(make_graph(EuclideanGraph{50, 0.01, 8, 3}));
  CHECK_THROWS(make_graph(EuclideanGraph{5, 0.0, 8}));
}

TEST_CASE("random models") {
  auto g = make_graph(GridGraph{3, 3});
  auto z = random_model(g, 0.0, 0.0, 1);
  CHECK(z.theta().cwiseAbs().maxCoeff() == 0.0);
  CHECK(random_model(g, 0.5, 0.5, 4).theta() == random_model(g, 0.5, 0.5, 4).theta());

  auto wide = make_graph(StarGraph{10000});
  auto m = random_model(wide, 0.5, 0.0, 2);
  double s = 0, s2 = 0;
  for (int k = 0; k < 10000; ++k) {
    const double v = m.theta()[10001 + k];
    s += v;
    s2 += v * v;
  }
  const double sd = std::sqrt(s2 / 10000 - (s / 10000) * (s / 10000));
  CHECK(std::abs(sd - 0.5) < 0.025);
  CHECK_THROWS(random_model(g, -1.0, 0.0, 1));
}

TEST_CASE("free term policies") {
  auto g = make_graph(StarGraph{2});
  auto m = random_model(g, 0.5, 0.5, 3);
  CHECK(m.free_count() == 5);
  auto e = m.with_policy(FreePolicy::EdgesOnly);
  CHECK(e.free_terms() == std::vector<int>{3, 4});
  CHECK_FALSE(e.is_free(0));
  Vec fv(2);
  fv << 9.0, 8.0;
  auto full = e.with_free_values(fv);
  CHECK(full[3] == 9.0);
  CHECK(full[0] == m.theta()[0]);
}

TEST_CASE("model and sample files round trip") {
  auto m = testsupport::random_spec(5, 0.5, 0.5, 0.5, 600);
  std::stringstream ss;
  write_model(ss, m.graph(), m.theta());
  auto back = read_model(ss);
  CHECK(back.graph.edges() == m.graph().edges());
  CHECK(back.theta == m.theta());

  auto x = sample_exact(m, 50, 601);
  std::stringstream cs;
  write_samples_csv(cs, x);
  CHECK(read_samples_csv(cs) == x);

  std::stringstream bad("1,-1\n1,0\n");
  CHECK_THROWS_AS(read_samples_csv(bad), FormatError);
  std::stringstream badm("p 2\nnode 0 0\nedge 0 1 1\n");
  CHECK_THROWS_AS(read_model(badm), FormatError);
}
