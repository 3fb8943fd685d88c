#pragma once

#include <optional>

#include "relcal/lowrank.hpp"

namespace relcal {

// Auxiliary data with a leading intercept column: column 0 is all ones and
// columns 1..K have unweighted sample mean zero, variance one (denominator n).
// Targets are on the same transformed scale; t(0) = n_pop.
struct StandardizedDesign {
  MatrixXd X;        // n x (K+1)
  VectorXd t;        // K+1
  double n_pop = 0;  // population size N
  VectorXd means;    // K raw sample means
  VectorXd sds;      // K raw sample standard deviations
  Eigen::Index n() const { return X.rows(); }
  Eigen::Index k() const { return X.cols() - 1; }
};

struct Priorities {
  VectorXd p;      // K+1 nonnegative penalty weights, p(0) for the intercept
  double R = 0.5;  // weight-alteration priority in [0,1]
  void validate(Eigen::Index expected_size) const;
};

struct CalibrationResult {
  VectorXd u;       // calibrated weights
  VectorXd deltas;  // x_k.u - t_k for every design column
  double objective = 0.0;
  int negative_weights = 0;  // diagnostic; the quadratic kernel allows u_i < 0
  std::optional<double> estimate_cache;
};

StandardizedDesign standardize(const MatrixXd& raw_columns, const VectorXd& raw_targets,
                               double n_pop, const VectorXd& design_weights);

CalibrationResult calibrate_weights(const StandardizedDesign& design, const VectorXd& w,
                                    const Priorities& prio);

// General path used by the linear-invariance checks: the priority penalty is a
// full symmetric positive semidefinite matrix and the design need not be
// standardized.  n_pop anchors the weight-dispersion penalty.
CalibrationResult calibrate_weights(const MatrixXd& X, const VectorXd& t, double n_pop,
                                    const VectorXd& w, const MatrixXd& priority_matrix, double R);

// Penalty-sum form of the objective:
//   sum_k p_k delta_k^2 + R (u-w).(u-w) + (1-R) (u - (t0/n) 1).(u - (t0/n) 1).
double objective_value(const StandardizedDesign& design, const VectorXd& w,
                       const Priorities& prio, const VectorXd& u);

VectorXd discrepancies(const StandardizedDesign& design, const VectorXd& u);

double estimate_total(const VectorXd& u, const VectorXd& y);

// Change of basis X -> X E with targets and priorities moved contragradiently
// (t -> E^T t, P -> E^{-1} P E^{-T}) so calibration is unchanged.  The
// returned priority matrix is generally not diagonal.
struct TransformedDesign {
  MatrixXd X;
  VectorXd t;
  double n_pop = 0;
  MatrixXd P;
};

TransformedDesign transform_design(const StandardizedDesign& design, const Priorities& prio,
                                   const MatrixXd& E);

}  // namespace relcal
