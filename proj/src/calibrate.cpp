#include "relcal/calibrate.hpp"

#include <cmath>
#include <string>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

void require_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw DegenerateInputError(std::string(what) + " contains a non-finite value");
}

// Collinear column pairs (1-based auxiliary indices map to design indices here).
std::vector<std::pair<int, int>> duplicate_pairs(const MatrixXd& X) {
  std::vector<std::pair<int, int>> pairs;
  const Eigen::Index m = X.cols();
  for (Eigen::Index j = 1; j < m; ++j) {
    for (Eigen::Index l = j + 1; l < m; ++l) {
      const double denom = X.col(j).norm() * X.col(l).norm();
      if (denom == 0.0) continue;
      const double corr = std::abs(X.col(j).dot(X.col(l))) / denom;
      if (corr > 1.0 - 1e-10) pairs.emplace_back(static_cast<int>(j), static_cast<int>(l));
    }
  }
  return pairs;
}

void check_design_rank(const MatrixXd& X) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() == X.cols()) return;
  std::vector<int> cols;
  for (Eigen::Index i = qr.rank(); i < X.cols(); ++i)
    cols.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  throw RankDeficiencyError("standardized design is rank deficient", cols, duplicate_pairs(X));
}

int count_negative(const VectorXd& u) {
  return static_cast<int>((u.array() < 0.0).count());
}

}  // namespace

void Priorities::validate(Eigen::Index expected_size) const {
  if (p.size() != expected_size)
    throw DimensionError("priority vector has length " + std::to_string(p.size()) +
                         ", expected " + std::to_string(expected_size));
  if ((p.array() < 0.0).any()) throw DegenerateInputError("priorities must be nonnegative");
  if (!(R >= 0.0 && R <= 1.0)) throw DegenerateInputError("R must lie in [0,1]");
}

StandardizedDesign standardize(const MatrixXd& raw_columns, const VectorXd& raw_targets,
                               double n_pop, const VectorXd& design_weights) {
  const Eigen::Index n = raw_columns.rows();
  const Eigen::Index k = raw_columns.cols();
  if (n == 0) throw DimensionError("empty sample");
  if (raw_targets.size() != k) throw DimensionError("one raw target per auxiliary column required");
  if (!(n_pop > 0.0)) throw DegenerateInputError("population size must be positive");
  if (design_weights.size() != n) throw DimensionError("one design weight per sample row required");
  require_finite(design_weights, "design weights");
  if ((design_weights.array() <= 0.0).any())
    throw DegenerateInputError("design weights must be positive");

  StandardizedDesign d;
  d.n_pop = n_pop;
  d.X.resize(n, k + 1);
  d.X.col(0).setOnes();
  d.t.resize(k + 1);
  d.t(0) = n_pop;
  d.means.resize(k);
  d.sds.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    require_finite(raw_columns.col(j), "auxiliary column");
    const double mean = raw_columns.col(j).mean();
    const double var = (raw_columns.col(j).array() - mean).square().sum() / static_cast<double>(n);
    if (!(var > 0.0))
      throw DegenerateInputError("auxiliary column " + std::to_string(j + 1) +
                                 " has zero sample variance");
    const double sd = std::sqrt(var);
    d.means(j) = mean;
    d.sds(j) = sd;
    d.X.col(j + 1) = (raw_columns.col(j).array() - mean) / sd;
    d.t(j + 1) = (raw_targets(j) - n_pop * mean) / sd;
  }
  check_design_rank(d.X);
  return d;
}

CalibrationResult calibrate_weights(const StandardizedDesign& design, const VectorXd& w,
                                    const Priorities& prio) {
  const Eigen::Index n = design.n();
  prio.validate(design.X.cols());
  if (w.size() != n) throw DimensionError("design weight length mismatch");
  require_finite(w, "design weights");
  if ((w.array() <= 0.0).any()) throw DegenerateInputError("design weights must be positive");

  HApplier h(design.X, prio.p);
  const VectorXd s = prio.R * w +
                     (1.0 - prio.R) * (design.n_pop / static_cast<double>(n)) *
                         VectorXd::Ones(n) +
                     design.X * prio.p.cwiseProduct(design.t);
  CalibrationResult res;
  res.u = h.apply_inverse(s);
  res.deltas = design.X.transpose() * res.u - design.t;
  res.objective = objective_value(design, w, prio, res.u);
  res.negative_weights = count_negative(res.u);
  return res;
}

CalibrationResult calibrate_weights(const MatrixXd& X, const VectorXd& t, double n_pop,
                                    const VectorXd& w, const MatrixXd& priority_matrix, double R) {
  const Eigen::Index n = X.rows();
  if (t.size() != X.cols()) throw DimensionError("target length mismatch");
  if (w.size() != n) throw DimensionError("design weight length mismatch");
  if (!(R >= 0.0 && R <= 1.0)) throw DegenerateInputError("R must lie in [0,1]");
  require_finite(w, "design weights");

  HApplier h(X, priority_matrix);
  const VectorXd s =
      R * w + (1.0 - R) * (n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
      X * (priority_matrix * t);
  CalibrationResult res;
  res.u = h.apply_inverse(s);
  res.deltas = X.transpose() * res.u - t;
  const VectorXd anchor = (n_pop / static_cast<double>(n)) * VectorXd::Ones(n);
  res.objective = res.deltas.dot(priority_matrix * res.deltas) +
                  R * (res.u - w).squaredNorm() + (1.0 - R) * (res.u - anchor).squaredNorm();
  res.negative_weights = count_negative(res.u);
  return res;
}

double objective_value(const StandardizedDesign& design, const VectorXd& w,
                       const Priorities& prio, const VectorXd& u) {
  const Eigen::Index n = design.n();
  prio.validate(design.X.cols());
  if (w.size() != n || u.size() != n) throw DimensionError("vector length mismatch");
  const VectorXd deltas = design.X.transpose() * u - design.t;
  const VectorXd anchor = (design.n_pop / static_cast<double>(n)) * VectorXd::Ones(n);
  return deltas.cwiseProduct(deltas).dot(prio.p) + prio.R * (u - w).squaredNorm() +
         (1.0 - prio.R) * (u - anchor).squaredNorm();
}

VectorXd discrepancies(const StandardizedDesign& design, const VectorXd& u) {
  if (u.size() != design.n()) throw DimensionError("weight vector length mismatch");
  return design.X.transpose() * u - design.t;
}

double estimate_total(const VectorXd& u, const VectorXd& y) {
  if (u.size() != y.size()) throw DimensionError("weight and outcome lengths differ");
  return u.dot(y);
}

TransformedDesign transform_design(const StandardizedDesign& design, const Priorities& prio,
                                   const MatrixXd& E) {
  prio.validate(design.X.cols());
  if (E.rows() != design.X.cols() || E.cols() != design.X.cols())
    throw DimensionError("transform must be (K+1) x (K+1)");
  Eigen::JacobiSVD<MatrixXd> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > 1e12)
    throw DegenerateInputError("transform matrix is singular or numerically singular");

  TransformedDesign out;
  out.X = design.X * E;
  out.t = E.transpose() * design.t;
  out.n_pop = design.n_pop;
  const MatrixXd Einv = E.partialPivLu().solve(MatrixXd::Identity(E.rows(), E.cols()));
  MatrixXd pe = Einv * prio.p.asDiagonal() * Einv.transpose();
  out.P = 0.5 * (pe + pe.transpose());
  return out;
}

}  // namespace relcal
