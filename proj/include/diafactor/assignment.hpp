#pragma once

#include <Eigen/Dense>
#include <vector>

namespace diafactor {

/// Maximum-weight one-to-one assignment (Hungarian algorithm, O(n^3)).
/// Accepts rectangular non-negative weight matrices; returns, per row, the
/// assigned column or -1 when the row is left unmatched (more rows than
/// columns). Ties resolve deterministically.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight);

}  // namespace diafactor
