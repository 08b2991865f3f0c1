#pragma once

#include <optional>

#include <Eigen/Dense>

namespace pldist {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Relative jitter added to the diagonal when a Cholesky factorization fails.
inline constexpr double kJitterScale = 1e-10;

// Inverse of a symmetric positive definite matrix. On Cholesky failure the
// diagonal is shifted by kJitterScale * trace / dim and factorization is
// retried once; nullopt if that also fails.
std::optional<Mat> spd_inverse(const Mat& a);

std::optional<Vec> spd_solve(const Mat& a, const Vec& b);

// General (LU) solve for possibly non-symmetric weight sums; nullopt when
// the matrix is numerically singular.
std::optional<Vec> lu_solve(const Mat& a, const Vec& b);
std::optional<Mat> lu_inverse(const Mat& a);

// H^{-1} J H^{-1} for symmetric H.
std::optional<Mat> sandwich(const Mat& h, const Mat& j);

double min_eigenvalue(const Mat& a);

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

}  // namespace pldist
