#pragma once

#include <map>
#include <span>
#include <vector>

#include "pldist/linalg.hpp"

namespace pldist {

enum class Provenance { Exact, Empirical };

// V_α: covariance between the scores of the sensors sharing term α, with
// rows/columns ordered by ascending sensor id.
struct ScoreCovariance {
  int term = -1;
  std::vector<int> sensors;
  Mat matrix;
  Provenance provenance = Provenance::Empirical;
  std::vector<int> excluded_sensors;  // degenerate contributors left out
};

using CrossCovTable = std::map<int, ScoreCovariance>;

// (1/m) Σ_k a_k b_k over the first m = a.size() entries, summed in index
// order. Shared by every code path that forms V̂_α so results agree bitwise.
double score_second_moment(std::span<const double> a, std::span<const double> b);

// Matrix of pairwise score_second_moment over aligned score columns.
Mat score_moment_matrix(const std::vector<std::span<const double>>& columns);

}  // namespace pldist
