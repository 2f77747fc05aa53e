#include "propkit/linalg.hpp"

#include <cmath>
#include <sstream>

#include "propkit/error.hpp"

namespace propkit {

SolveResult solve_dense(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* module,
                        double rcond_floor) {
  if (A.rows() != b.size())
    throw Error(ErrorKind::InvalidInput, module, "matrix and right-hand side sizes differ");
  if (A.rows() < A.cols())
    throw Error(ErrorKind::Underdetermined, module, "fewer equations than unknowns");
  if (!A.allFinite() || !b.allFinite())
    throw Error(ErrorKind::InvalidInput, module, "non-finite entries in linear system");

  SolveResult out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (A.rows() == A.cols()) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    out.rcond = lu.rcond();
  } else {
    const auto& R = qr.matrixR();
    const double top = std::abs(R(0, 0));
    const double bottom = std::abs(R(A.cols() - 1, A.cols() - 1));
    out.rcond = top > 0 ? bottom / top : 0.0;
  }
  out.rank = qr.rank();
  if (!(out.rcond >= rcond_floor) || out.rank < A.cols()) {
    std::ostringstream msg;
    msg << A.rows() << "x" << A.cols() << " system is numerically singular (condition estimate "
        << (out.rcond > 0 ? 1.0 / out.rcond : INFINITY) << ", rank " << out.rank << ")";
    throw Error(ErrorKind::Conditioning, module, msg.str());
  }
  out.x = qr.solve(b);
  out.residual = (A * out.x - b).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace propkit
