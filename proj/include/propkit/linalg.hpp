#pragma once

#include <Eigen/Dense>

namespace propkit {

struct SolveResult {
  Eigen::VectorXd x;
  /// max |A x - b|
  double residual = 0.0;
  /// Reciprocal condition estimate (square systems) or |R_kk|_min / |R_11| (least squares).
  double rcond = 1.0;
  Eigen::Index rank = 0;
};

/// Solves A x = b by column-pivoted QR; least squares when A has more rows
/// than columns. Throws Conditioning (naming `module`) when the system is
/// numerically singular, i.e. rcond < `rcond_floor`.
SolveResult solve_dense(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* module,
                        double rcond_floor = 1e-13);

}  // namespace propkit
