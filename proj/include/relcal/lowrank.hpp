#pragma once

#include <Eigen/Dense>

namespace relcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Applies H = I_n + X P X^T and its inverse without forming any n x n matrix.
// P may be a nonnegative diagonal (vector form) or a symmetric positive
// semidefinite matrix; both are factored as P = L L^T so that zero priorities
// never require inverting P.  Storage is O(n K).
class HApplier {
 public:
  HApplier(MatrixXd design, const VectorXd& priorities);
  HApplier(MatrixXd design, const MatrixXd& priority_matrix);

  VectorXd apply(const VectorXd& v) const;          // H v
  VectorXd apply_inverse(const VectorXd& v) const;  // H^{-1} v via Woodbury
  double inv_quad(const VectorXd& v) const;         // v^T H^{-1} v

  Eigen::Index size() const { return design_.rows(); }
  Eigen::Index cols() const { return design_.cols(); }
  const MatrixXd& design() const { return design_; }

 private:
  void init();

  MatrixXd design_;               // n x m
  MatrixXd scaled_;               // X L
  Eigen::LLT<MatrixXd> core_;     // I_m + L^T X^T X L, eigenvalues >= 1
};

// Nonzero eigenpairs of Q = u c^T + c u^T; e1 >= e2 and the eigenvectors are
// unit length.
struct QEigenpairs {
  double e1 = 0.0, e2 = 0.0;
  VectorXd v1, v2;
};

QEigenpairs q_eigenpairs(const VectorXd& u, const VectorXd& c);

// Closed-form coefficients of (lambda2*I + Q)^{-1}:
//   R^{-1} = I/lambda2 + ca*c u^T + cb*u c^T - cc*c c^T - cd*u u^T
// with ca = cb = (lambda2 + u.c)/e, cc = u.u/e, cd = c.c/e and
// e = lambda2*(u.u * c.c - (lambda2 + u.c)^2).
struct ResolventCoeffs {
  double uu = 0.0, cc_dot = 0.0, uc = 0.0;
  double ca = 0.0, cb = 0.0, cc = 0.0, cd = 0.0, e = 0.0;
};

// Throws SingularShiftError when lambda2 is within the guard radius of a
// value making lambda2*I + Q singular (0 and the negated eigenvalues of Q).
ResolventCoeffs resolvent_coeffs(double lambda2, double uu, double cc_dot, double uc);

bool lambda_shift_is_singular(double lambda2, double uu, double cc_dot, double uc,
                              double guard = 1e-8);

class RankTwoResolvent {
 public:
  RankTwoResolvent(double lambda2, VectorXd u, VectorXd c);

  VectorXd apply(const VectorXd& v) const;  // (lambda2*I + Q)^{-1} v
  VectorXd apply_forward(const VectorXd& v) const;  // (lambda2*I + Q) v

  double lambda2() const { return lambda2_; }
  const ResolventCoeffs& coeffs() const { return k_; }
  Eigen::Index size() const { return u_.size(); }

 private:
  double lambda2_;
  VectorXd u_, c_;
  ResolventCoeffs k_;
};

}  // namespace relcal
