#include "relcal/lowrank.hpp"

#include <cmath>
#include <string>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

// Pivot columns beyond the numerical rank, for error reporting.
std::vector<int> deficient_columns(const MatrixXd& x) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  std::vector<int> cols;
  for (Eigen::Index i = qr.rank(); i < x.cols(); ++i)
    cols.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  return cols;
}

void check_full_rank(const MatrixXd& x) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw RankDeficiencyError("design matrix is rank deficient: remove redundant columns and "
                              "apportion their priorities to the retained ones",
                              deficient_columns(x));
  }
}

}  // namespace

HApplier::HApplier(MatrixXd design, const VectorXd& priorities) : design_(std::move(design)) {
  if (priorities.size() != design_.cols())
    throw DimensionError("priority vector length must match design columns");
  if ((priorities.array() < 0.0).any())
    throw DegenerateInputError("priorities must be nonnegative");
  scaled_ = design_ * priorities.array().sqrt().matrix().asDiagonal();
  init();
}

HApplier::HApplier(MatrixXd design, const MatrixXd& priority_matrix) : design_(std::move(design)) {
  if (priority_matrix.rows() != design_.cols() || priority_matrix.cols() != design_.cols())
    throw DimensionError("priority matrix shape must match design columns");
  // P = L L^T through an eigendecomposition; tolerates semidefinite P.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (priority_matrix + priority_matrix.transpose()));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if ((es.eigenvalues().array() < -1e-12 * scale).any())
    throw DegenerateInputError("priority matrix must be positive semidefinite");
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  scaled_ = design_ * (es.eigenvectors() * root.asDiagonal());
  init();
}

void HApplier::init() {
  check_full_rank(design_);
  const Eigen::Index m = scaled_.cols();
  MatrixXd core = MatrixXd::Identity(m, m) + scaled_.transpose() * scaled_;
  core_.compute(core);
  if (core_.info() != Eigen::Success)
    throw RankDeficiencyError("core factorization failed; design is numerically rank deficient");
}

VectorXd HApplier::apply(const VectorXd& v) const {
  if (v.size() != design_.rows()) throw DimensionError("vector length must match design rows");
  return v + scaled_ * (scaled_.transpose() * v);
}

VectorXd HApplier::apply_inverse(const VectorXd& v) const {
  if (v.size() != design_.rows()) throw DimensionError("vector length must match design rows");
  return v - scaled_ * core_.solve(scaled_.transpose() * v);
}

double HApplier::inv_quad(const VectorXd& v) const { return v.dot(apply_inverse(v)); }

QEigenpairs q_eigenpairs(const VectorXd& u, const VectorXd& c) {
  if (u.size() != c.size()) throw DimensionError("u and c must have equal length");
  const double nu = u.norm();
  const double nc = c.norm();
  if (nu == 0.0 || nc == 0.0)
    throw DegenerateInputError("q_eigenpairs: zero vector input is degenerate");
  const double cosine = std::abs(u.dot(c)) / (nu * nc);
  if (cosine >= 1.0 - 1e-12)
    throw DegenerateInputError("q_eigenpairs: c is (numerically) a scalar multiple of u");

  QEigenpairs out;
  const double root = nu * nc;
  out.e1 = u.dot(c) + root;
  out.e2 = u.dot(c) - root;
  out.v1 = (c * nu + u * nc).normalized();
  out.v2 = (c * nu - u * nc).normalized();
  return out;
}

bool lambda_shift_is_singular(double lambda2, double uu, double cc_dot, double uc, double guard) {
  const double root = std::sqrt(uu * cc_dot);
  const double singular[3] = {0.0, -(uc + root), -(uc - root)};
  for (double s : singular) {
    if (std::abs(lambda2 - s) <= guard * (1.0 + std::abs(s))) return true;
  }
  return false;
}

ResolventCoeffs resolvent_coeffs(double lambda2, double uu, double cc_dot, double uc) {
  if (lambda_shift_is_singular(lambda2, uu, cc_dot, uc))
    throw SingularShiftError("lambda2 = " + std::to_string(lambda2) +
                             " is within the guard radius of a singular shift");
  ResolventCoeffs k;
  k.uu = uu;
  k.cc_dot = cc_dot;
  k.uc = uc;
  const double shifted = lambda2 + uc;
  k.e = lambda2 * (uu * cc_dot - shifted * shifted);
  const double floor = 1e-14 * std::max(1.0, lambda2 * lambda2 * uu * cc_dot);
  if (std::abs(k.e) <= floor)
    throw SingularShiftError("resolvent determinant factor vanishes at lambda2 = " +
                             std::to_string(lambda2));
  k.ca = shifted / k.e;
  k.cb = k.ca;
  k.cc = uu / k.e;
  k.cd = cc_dot / k.e;
  return k;
}

RankTwoResolvent::RankTwoResolvent(double lambda2, VectorXd u, VectorXd c)
    : lambda2_(lambda2), u_(std::move(u)), c_(std::move(c)) {
  if (u_.size() != c_.size()) throw DimensionError("u and c must have equal length");
  k_ = resolvent_coeffs(lambda2_, u_.squaredNorm(), c_.squaredNorm(), u_.dot(c_));
}

VectorXd RankTwoResolvent::apply(const VectorXd& v) const {
  if (v.size() != u_.size()) throw DimensionError("vector length mismatch in resolvent apply");
  const double uv = u_.dot(v);
  const double cv = c_.dot(v);
  return v / lambda2_ + c_ * (k_.ca * uv - k_.cc * cv) + u_ * (k_.cb * cv - k_.cd * uv);
}

VectorXd RankTwoResolvent::apply_forward(const VectorXd& v) const {
  if (v.size() != u_.size()) throw DimensionError("vector length mismatch in resolvent apply");
  return lambda2_ * v + u_ * c_.dot(v) + c_ * u_.dot(v);
}

}  // namespace relcal
