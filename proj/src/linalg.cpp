#include "pldist/linalg.hpp"

#include <cmath>

namespace pldist {

namespace {

std::optional<Eigen::LLT<Mat>> factor_with_jitter(const Mat& a) {
  if (a.rows() == 0 || a.rows() != a.cols() || !a.allFinite()) return std::nullopt;
  Eigen::LLT<Mat> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const double shift = kJitterScale * std::abs(a.trace()) / static_cast<double>(a.rows());
  Mat jittered = a;
  jittered.diagonal().array() += shift;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  return std::nullopt;
}

}  // namespace

std::optional<Mat> spd_inverse(const Mat& a) {
  auto llt = factor_with_jitter(a);
  if (!llt) return std::nullopt;
  Mat inv = llt->solve(Mat::Identity(a.rows(), a.cols()));
  if (!inv.allFinite()) return std::nullopt;
  return symmetrize(inv);
}

std::optional<Vec> spd_solve(const Mat& a, const Vec& b) {
  auto llt = factor_with_jitter(a);
  if (!llt) return std::nullopt;
  Vec x = llt->solve(b);
  if (!x.allFinite()) return std::nullopt;
  return x;
}

std::optional<Vec> lu_solve(const Mat& a, const Vec& b) {
  if (a.rows() == 0 || a.rows() != a.cols()) return std::nullopt;
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible()) return std::nullopt;
  Vec x = lu.solve(b);
  if (!x.allFinite()) return std::nullopt;
  return x;
}

std::optional<Mat> lu_inverse(const Mat& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) return std::nullopt;
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible()) return std::nullopt;
  return lu.inverse();
}

std::optional<Mat> sandwich(const Mat& h, const Mat& j) {
  auto h_inv = spd_inverse(h);
  if (!h_inv) return std::nullopt;
  return symmetrize(*h_inv * j * h_inv->transpose());
}

double min_eigenvalue(const Mat& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace pldist
