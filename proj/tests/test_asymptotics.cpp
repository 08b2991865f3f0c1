#include <cmath>

#include "doctest.h"
#include "oracle.hpp"
#include "pldist/asymptotics.hpp"
#include "support.hpp"

using namespace pldist;
using testsupport::to_oracle;

namespace {

// Normalized per-term weights for the oracle, built from oracle quantities.
std::vector<std::vector<std::pair<int, double>>> oracle_weights(const oracle::Ising& o, const std::vector<int>& free,
                                                                Method method) {
  std::vector<oracle::LocalExact> loc;
  for (int i = 0; i < o.p; ++i) loc.push_back(oracle::local_exact(o, i, free));
  auto var_of = [&](int i, int term) {
    const auto& t = loc[i].terms;
    const auto at = std::find(t.begin(), t.end(), term) - t.begin();
    return oracle::inverse(loc[i].H)(at, at);
  };
  std::vector<std::vector<std::pair<int, double>>> out;
  for (int term : free) {
    auto own = oracle::owners(o, term);
    std::vector<double> w(own.size());
    if (own.size() == 1) {
      w[0] = 1.0;
    } else if (method == Method::LinearUniform) {
      std::fill(w.begin(), w.end(), 1.0);
    } else if (method == Method::LinearDiagonal) {
      for (std::size_t k = 0; k < own.size(); ++k) w[k] = 1.0 / var_of(own[k], term);
    } else if (method == Method::MaxDiagonal) {
      const bool first = var_of(own[0], term) <= var_of(own[1], term);
      w[0] = first ? 1.0 : 0.0;
      w[1] = first ? 0.0 : 1.0;
    } else {
      // V_α from the cross covariances, then V^{-1} e
      oracle::Mat va(2, 2);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto c = oracle::score_cross_cov(o, free, own[a], own[b]);
          const auto& ta = loc[own[a]].terms;
          const auto& tb = loc[own[b]].terms;
          va(a, b) = c(std::find(ta.begin(), ta.end(), term) - ta.begin(),
                       std::find(tb.begin(), tb.end(), term) - tb.begin());
        }
      oracle::Vec u = oracle::inverse(va) * oracle::Vec::Ones(2);
      w = {u[0], u[1]};
    }
    double s = 0;
    for (double v : w) s += v;
    std::vector<std::pair<int, double>> tw;
    for (std::size_t k = 0; k < own.size(); ++k) tw.emplace_back(own[k], w[k] / s);
    out.push_back(tw);
  }
  return out;
}

ModelSpec two_node(double t12, double t1 = 0.0, double t2 = 0.0, FreePolicy pol = FreePolicy::EdgesOnly) {
  MarkovGraph g(2, {{0, 1}});
  Vec th(3);
  th << t1, t2, t12;
  return ModelSpec(g, th).with_policy(pol);
}

}  // namespace

TEST_CASE("sandwich variance") {
  Mat I = Mat::Identity(3, 3);
  CHECK(oracle::max_abs(sandwich_variance(I, I) - I) < 1e-15);
  CHECK(oracle::max_abs(sandwich_variance(2 * I, I) - 0.25 * I) < 1e-15);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Mat h = testsupport::random_spd(4, s);
    Mat j = testsupport::random_spd(4, 100 + s);
    Mat hi = h.inverse();
    Mat direct = hi * j * hi;
    CHECK(oracle::max_abs(sandwich_variance(h, j) - direct) < 1e-12 * (1 + oracle::max_abs(direct)));
    CHECK(oracle::max_abs(sandwich_variance(h, h) - hi) < 1e-12 * (1 + oracle::max_abs(hi)));
  }
  CHECK_THROWS_AS(sandwich_variance(Mat::Zero(2, 2), I.topLeftCorner(2, 2)), DegenerateError);
  CHECK_THROWS(sandwich_variance(I, Mat::Identity(2, 2)));
}

TEST_CASE("exact local quantities") {
  auto q = exact_local_quantities(two_node(0.0), 0);
  REQUIRE(q.H_local.rows() == 1);
  CHECK(std::abs(q.H_local(0, 0) - 1.0) < 1e-15);
  // pattern r: bit k <=> node k = +1; s = ∇ℓ = x0 x1 at zero parameters
  for (int r = 0; r < 4; ++r) {
    const double x0 = (r & 1) ? 1 : -1, x1 = (r & 2) ? 1 : -1;
    CHECK(std::abs(q.score_table(r, 0) - x0 * x1) < 1e-15);
  }

  for (std::uint64_t s = 0; s < 6; ++s) {
    auto m = testsupport::random_spec(5, 0.6, 0.5, 0.5, 10 + s);
    auto o = to_oracle(m);
    ExactAnalysis an(m);
    for (int i = 0; i < 5; ++i) {
      const auto& lq = an.local(i);
      auto le = oracle::local_exact(o, i, m.free_terms());
      CHECK(lq.scope.free_terms == le.terms);
      CHECK(oracle::max_abs(lq.H_local - le.H) < 1e-12);
      CHECK(oracle::max_abs(lq.J_local - le.J) < 1e-12);
      // E[s^i] = 0
      Vec mean = Vec::Zero(lq.H_local.rows());
      const auto& pr = an.distribution().probabilities();
      for (std::uint64_t st = 0; st < pr.size(); ++st) mean += pr[st] * lq.score_table.row(an.local_pattern(i, st)).transpose();
      CHECK(mean.cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("exact H matches the empirical Hessian at large n") {
  auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 30);
  ExactAnalysis an(m);
  auto x = sample_exact(m, 100000, 31);
  for (int i = 0; i < 4; ++i) {
    auto sc = make_local_scope(m, i);
    Vec th(sc.size());
    for (int a = 0; a < sc.size(); ++a) th[a] = m.theta()[sc.free_terms[a]];
    Mat hhat = -conditional_loglik(sc, th, local_data(m.graph(), x, i)).hessian;
    const Mat& h = an.local(i).H_local;
    CHECK((hhat - h).norm() <= 0.02 * h.norm());
  }
}

TEST_CASE("exact score covariance") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto m = testsupport::random_spec(5, 0.6, 0.5, 0.5, 40 + s);
    auto o = to_oracle(m);
    ExactAnalysis an(m);
    for (int i = 0; i < 5; ++i) {
      CHECK(oracle::max_abs(an.score_cov(i, i) - an.local(i).H_local.inverse()) < 1e-12);
      for (int j = 0; j < 5; ++j)
        CHECK(oracle::max_abs(an.score_cov(i, j) - oracle::score_cross_cov(o, m.free_terms(), i, j)) < 1e-12);
    }
  }
  ExactAnalysis pair(two_node(0.0));
  auto v = pair.term_cov(2);
  CHECK(v.sensors == std::vector<int>{0, 1});
  CHECK(std::abs(v.matrix(0, 0) - v.matrix(1, 1)) < 1e-15);

  // two dyads with no path between them
  MarkovGraph g(4, {{0, 1}, {2, 3}});
  auto m = random_model(g, 0.5, 0.5, 5);
  CHECK(oracle::max_abs(exact_score_cov(m, 0, 2)) < 1e-15);
  CHECK(oracle::max_abs(exact_score_cov(m, 1, 3)) < 1e-15);
}

TEST_CASE("consensus variances agree with the oracle") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto pol = s % 2 ? FreePolicy::EdgesOnly : FreePolicy::EdgesAndSingletons;
    auto m = testsupport::random_spec(5, 0.6, 0.5, 0.5, 50 + s, pol);
    auto o = to_oracle(m);
    ExactAnalysis an(m);
    for (Method meth : {Method::LinearUniform, Method::LinearDiagonal, Method::MaxDiagonal, Method::LinearOpt}) {
      auto rep = consensus_variance_exact(an, meth);
      auto ref = oracle::vector_consensus_cov(o, m.free_terms(), oracle_weights(o, m.free_terms(), meth));
      CHECK(oracle::max_abs(rep.covariance - ref) < 1e-10);
      CHECK(std::abs(rep.trace - ref.trace()) < 1e-10);
    }
    CHECK(oracle::max_abs(mle_variance_exact(an).covariance - oracle::mle_cov(o, m.free_terms())) < 1e-9);
    auto joint = joint_mple_variance_exact(an);
    CHECK(oracle::max_abs(joint.covariance - oracle::joint_mple_cov(o, m.free_terms())) < 1e-9);
    auto hess = consensus_variance_exact(an, Method::MatrixHessian);
    CHECK(oracle::max_abs(hess.covariance - joint.covariance) < 1e-9);
    CHECK(oracle::max_abs(consensus_variance_exact(an, Method::JointMple).covariance - joint.covariance) == 0.0);
  }
}

TEST_CASE("single-owner terms keep the local variance") {
  auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 60);
  ExactAnalysis an(m);
  auto rep = consensus_variance_exact(an, Method::LinearUniform);
  for (int i = 0; i < 4; ++i) {
    const auto& lq = an.local(i);
    const int a = lq.scope.position(i);
    CHECK(std::abs(rep.covariance(m.free_position(i), m.free_position(i)) - lq.V_local(a, a)) < 1e-12);
  }
}

TEST_CASE("uniform two-node variance is a quarter of the summed block") {
  auto m = two_node(0.6, 0.3, -0.4);
  ExactAnalysis an(m);
  auto v = an.term_cov(2).matrix;
  auto rep = consensus_variance_exact(an, Method::LinearUniform);
  CHECK(std::abs(rep.trace - 0.25 * (v(0, 0) + v(1, 1) + 2 * v(0, 1))) < 1e-14);
}

TEST_CASE("efficiency") {
  auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 70);
  ExactAnalysis an(m);
  auto mle = mle_variance_exact(an);
  CHECK(efficiency(mle, mle) == 1.0);

  for (double t : {0.0, 0.5, 1.5}) {
    ExactAnalysis pair(two_node(t, 0.2, -0.7));
    auto ref = mle_variance_exact(pair);
    for (Method meth : {Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt, Method::MaxDiagonal,
                        Method::JointMple, Method::MatrixHessian})
      CHECK(efficiency(consensus_variance_exact(pair, meth), ref) >= 1 - 1e-9);
  }

  auto cycle = random_model(MarkovGraph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}), 0.5, 0.5, 71);
  ExactAnalysis ca(cycle);
  auto joint = joint_mple_variance_exact(ca);
  attach_efficiency(joint, mle_variance_exact(ca));
  CHECK(joint.efficiency_ratio >= 1 - 1e-12);
  CHECK(std::abs(joint.efficiency_ratio * joint.relative_efficiency - 1) < 1e-15);

  ExactAnalysis edges(m.with_policy(FreePolicy::EdgesOnly));
  CHECK_THROWS(efficiency(mle_variance_exact(edges), mle));
}

TEST_CASE("matrix weight objective") {
  // one sensor owning everything
  StackedScoreCov one;
  one.dim = 2;
  one.supports = {{0, 1}};
  one.cov = testsupport::random_spd(2, 3);
  CHECK(std::abs(matrix_weight_mse({Mat::Identity(2, 2)}, one) - one.cov.trace()) < 1e-14);
  CHECK_THROWS_AS(matrix_weight_mse({2 * Mat::Identity(2, 2)}, one), std::invalid_argument);

  // symmetric sensors: f(1/2 + e) = f(1/2 - e), so uniform is stationary
  ExactAnalysis pair(two_node(0.8));
  auto cov = exact_stacked_score_cov(pair);
  REQUIRE(cov.dim == 1);
  auto f = [&](double w) {
    return matrix_weight_mse({Mat::Constant(1, 1, w), Mat::Constant(1, 1, 1 - w)}, cov);
  };
  for (double e : {1e-3, 0.1, 0.3}) {
    CHECK(std::abs(f(0.5 + e) - f(0.5 - e)) < 1e-14);
    CHECK(f(0.5 + e) >= f(0.5));
  }
  // value at vector weights agrees with the vector-weight report
  auto rep = consensus_variance_exact(pair, Method::LinearUniform);
  CHECK(std::abs(f(0.5) - rep.trace) < 1e-14);
}

TEST_CASE("Hessian weights minimize the matrix objective for uncorrelated scores") {
  auto m = testsupport::random_spec(4, 0.7, 0.5, 0.5, 80);
  ExactAnalysis an(m);
  auto stacked = exact_stacked_score_cov(an);
  // zero the cross-sensor blocks; each diagonal block is H_i^{-1}
  int off = 0;
  std::vector<Mat> h;
  Mat block = Mat::Zero(stacked.cov.rows(), stacked.cov.cols());
  for (int i = 0; i < an.sensor_count(); ++i) {
    const int d = an.local(i).scope.size();
    block.block(off, off, d, d) = an.local(i).V_local;
    h.push_back(an.local(i).H_local);
    off += d;
  }
  stacked.cov = block;
  auto w = normalized_matrix_weights(h, stacked.supports, stacked.dim);
  const double best = matrix_weight_mse(w, stacked);
  auto rng = make_rng(81);
  std::normal_distribution<double> nd(0.0, 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    auto pert = w;
    // per free position, zero-sum perturbation across owners
    for (int a = 0; a < stacked.dim; ++a) {
      std::vector<std::pair<int, int>> own;
      for (int i = 0; i < an.sensor_count(); ++i)
        for (std::size_t c = 0; c < stacked.supports[i].size(); ++c)
          if (stacked.supports[i][c] == a) own.emplace_back(i, static_cast<int>(c));
      Mat d = Mat::Zero(stacked.dim, static_cast<int>(own.size()));
      for (int r = 0; r < stacked.dim; ++r)
        for (int k = 0; k < d.cols(); ++k) d(r, k) = nd(rng);
      Vec mean = d.rowwise().mean();
      for (int k = 0; k < d.cols(); ++k) pert[own[k].first].col(own[k].second) += d.col(k) - mean;
    }
    CHECK(matrix_weight_mse(pert, stacked) >= best - 1e-10);
  }
}

TEST_CASE("empirical cross covariance") {
  // two-node, edges only: both sensors have the score x0 x1 - tanh θ over the same curvature
  auto m = two_node(0.4);
  auto x = sample_exact(m, 3000, 90);
  std::vector<LocalFit> fits;
  for (int i = 0; i < 2; ++i) fits.push_back(fit_local(make_local_scope(m, i), local_data(m.graph(), x, i)));
  auto v = empirical_cross_cov(fits, 2);
  CHECK(std::abs(v.matrix(0, 1) - v.matrix(0, 0)) < 1e-12);
  CHECK(std::abs(v.matrix(1, 1) - v.matrix(0, 0)) < 1e-12);
  CHECK(std::abs(v.matrix.determinant()) < 1e-12);

  auto big = testsupport::random_spec(5, 0.6, 0.5, 0.5, 91);
  auto xb = sample_exact(big, 100000, 92);
  std::vector<LocalFit> bf;
  for (int i = 0; i < 5; ++i) bf.push_back(fit_local(make_local_scope(big, i), local_data(big.graph(), xb, i)));
  ExactAnalysis an(big);
  auto table = empirical_cross_cov_table(bf);
  CHECK(table.size() == static_cast<std::size_t>(big.graph().edge_count()));
  for (const auto& [term, cov] : table) {
    CHECK(cov.provenance == Provenance::Empirical);
    // diagonal is the fit's sandwich entry
    for (std::size_t k = 0; k < cov.sensors.size(); ++k) {
      const auto& f = bf[cov.sensors[k]];
      const int a = f.scope.position(term);
      const Mat hi = f.H_hat.inverse();
      CHECK(std::abs(cov.matrix(k, k) - (hi * f.J_hat * hi)(a, a)) < 1e-10);
    }
    auto exact = an.term_cov(term).matrix;
    CHECK(((cov.matrix - exact).cwiseAbs().array() <= 0.05 * exact.cwiseAbs().array() + 0.02 * exact.diagonal().minCoeff())
              .all());
  }
  auto head = empirical_cross_cov(bf, table.begin()->first, 100);
  CHECK(head.matrix.rows() == 2);
  CHECK_THROWS(empirical_cross_cov(bf, table.begin()->first, 200000));
}

TEST_CASE("toy variances") {
  auto a = toy_variances({1, 1, 0});
  CHECK(a.lin_unif == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.joint == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.lin_opt == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.max_opt == 1.0);
  auto b = toy_variances({1, 1, -0.5});
  CHECK(std::abs(b.lin_unif - 0.25) < 1e-15);
  CHECK(std::abs(b.joint - 0.25) < 1e-15);
  CHECK(std::abs(b.lin_opt - 0.25) < 1e-15);
  CHECK(b.max_opt == 1.0);
  auto c = toy_variances({1, 4, 0});
  CHECK(std::abs(c.lin_opt - 0.8) < 1e-15);
  CHECK(c.max_opt == 1.0);
  CHECK(std::abs(c.lin_unif - 1.25) < 1e-15);
  CHECK(std::abs(c.joint - 0.8) < 1e-15);
  for (ToyCase tc : {ToyCase{1, 1, 0}, ToyCase{1, 1, -0.5}, ToyCase{1, 4, 0}, ToyCase{2, 3, 1.5}, ToyCase{1, 1, 1}})
    CHECK(std::abs(toy_variances(tc).lin_opt - oracle::toy_scan_min(tc.v1, tc.v2, tc.v12)) < 1e-8);
  CHECK(std::abs(toy_optimal_weight({1, 4, 0}) - 0.8) < 1e-15);
  CHECK(std::abs(toy_optimal_weight({1, 2, 0.5}) - 0.75) < 1e-15);
  CHECK_THROWS(validate({1, 1, 2}));
  CHECK_THROWS(validate({-1, 1, 0}));
}

TEST_CASE("diagonal weights reproduce the optimal toy variance when uncorrelated") {
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int k = 0; k < 200; ++k) {
    const double v1 = u(rng), v2 = u(rng);
    const double w1 = (1 / v1) / (1 / v1 + 1 / v2);
    CHECK(std::abs(oracle::toy_var(v1, v2, 0.0, w1) - toy_variances({v1, v2, 0}).lin_opt) <=
          1e-12 * toy_variances({v1, v2, 0}).lin_opt);
  }
}

TEST_CASE("toy dominance") {
  auto o = toy_dominance(1.0, 0.0);
  CHECK(o.joint_beats_max);
  CHECK(o.unif_beats_max);
  CHECK(o.region() == ToyRegion::I);
  auto q = toy_dominance(0.25, 0.5);
  CHECK_FALSE(q.joint_beats_max);
  auto tv = toy_variances(toy_case_from(0.25, 0.5));
  CHECK(tv.max_opt < tv.joint);
  for (double g : {0.1, 0.25, 0.5, 0.9}) {
    const double rho = 0.5 * std::sqrt(g) * (g + 1);
    auto v = toy_variances(toy_case_from(g, rho));
    CHECK(std::abs(v.joint - v.max_opt) < 1e-12);
    const double rho2 = (3 * g - 1) / (2 * std::sqrt(g));
    if (rho2 >= -1 && rho2 <= 1) {
      auto w = toy_variances(toy_case_from(g, rho2));
      CHECK(std::abs(w.lin_unif - w.max_opt) < 1e-12);
    }
  }
  CHECK_THROWS(toy_dominance(0.0, 0.1));
  CHECK_THROWS(toy_dominance(0.5, 1.5));
}

TEST_CASE("optimal nonnegative weights concentrate on the smallest variance under perfect correlation") {
  // s^i = v^i s0 with var(s0) = 1
  const std::vector<std::vector<double>> cases{{1.0, 2.0, 3.0}, {2.5, 0.7, 1.1}, {4.0, 3.0, 0.2}};
  for (const auto& v : cases) {
    StackedScoreCov cov;
    cov.dim = 1;
    cov.supports = {{0}, {0}, {0}};
    cov.cov = Mat(3, 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) cov.cov(a, b) = v[a] * v[b];
    double best = 1e300;
    int bi = -1, bj = -1;
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; i + j <= 1000; ++j) {
        const double w0 = i / 1000.0, w1 = j / 1000.0, w2 = 1.0 - w0 - w1;
        const double f = matrix_weight_mse({Mat::Constant(1, 1, w0), Mat::Constant(1, 1, w1), Mat::Constant(1, 1, w2)}, cov);
        if (f < best - 1e-15) best = f, bi = i, bj = j;
      }
    const int smallest = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    const int got = bi == 1000 ? 0 : bj == 1000 ? 1 : (bi == 0 && bj == 0) ? 2 : -1;
    CHECK(got == smallest);
  }
}

TEST_CASE("method names") {
  for (Method m : {Method::Mle, Method::JointMple, Method::LinearUniform, Method::LinearDiagonal, Method::LinearOpt,
                   Method::MaxDiagonal, Method::MatrixHessian})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS(parse_method("bogus"));
}
