#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "relcal/calibrate.hpp"

namespace relcal {

enum class SensitivityMode {
  Orthogonal,             // X^T x = 0 and x.x = n
  Centered,               // 1^T x = 0 and x.x = n
  DeltaBoundedOrthogonal, // bound on |delta| instead of |t|, orthogonal direction
  DeltaBoundedCentered,
};

const char* mode_name(SensitivityMode mode);
bool is_delta_bounded(SensitivityMode mode);

struct SensitivityConfig {
  double p_new = 0.1;     // largest plausible priority of the new variable
  double t_max = 5000.0;  // largest plausible |t| on the standardized scale
  int t_grid_size = 25;
  SensitivityMode mode = SensitivityMode::Orthogonal;
  double delta_bound = 1.0;  // used only by the delta-bounded modes
  int lambda_scan = 512;     // log-spaced scan points per sign per interval
  double root_tol = 1e-9;    // |log(x.x) - log n| at convergence
  void validate() const;
};

// Per-outcome state shared by all sensitivity evaluations: c = H^{-1} y is
// computed once, together with the Gram blocks that let the lambda2 scan run
// in O(K^2) per evaluation.
struct SensitivityContext {
  StandardizedDesign design;
  HApplier h;
  VectorXd u, y, c;
  double e1 = 0.0, e2 = 0.0;  // nonzero eigenvalues of Q = u c^T + c u^T
  MatrixXd gram;              // X^T X
  VectorXd xu, xc;            // X^T u, X^T c
  double uu = 0.0, cc = 0.0, uc = 0.0, su = 0.0, sc = 0.0;  // 1.u, 1.c

  static SensitivityContext make(StandardizedDesign design, const Priorities& prio,
                                 const CalibrationResult& calib, VectorXd y);
};

struct LambdaRoot {
  double lambda2 = 0.0;
  double g_abs = 0.0;  // |log(x.x) - log n| at the root
  int iterations = 0;
  bool converged = false;
  double norm_sq = 0.0;  // x.x at the root
  double objective = 0.0;  // -delta * x.(H^{-1}y) for the candidate at this root
};

struct ExtremeVariable {
  VectorXd x;
  double lambda2 = 0.0;
  double t_new = 0.0;
  double delta_new = 0.0;           // x.u - t_new
  double delta_theta_exact = 0.0;   // closed-form change of the estimate
  double delta_theta_approx = 0.0;  // upper-bound form, drops the denominator
  double objective = 0.0;           // -delta_new * x.(H^{-1}y)
  std::vector<LambdaRoot> all_roots;
  std::vector<double> unexplored;   // singular shifts excluded from the search
  double stationarity_residual = 0.0;
  double constraint_residual = 0.0;  // max |X^T x| (orthogonal) or |1^T x| (centered)
  double norm_gap = 0.0;             // |x.x - n| / n
};

struct ZApplied {
  VectorXd zc, zu;
};

// Rank-one re-calibration update: weights after adding (x_new, t_new, p_new)
// to the auxiliary data, without forming the augmented H.
VectorXd recalibrate(const SensitivityContext& ctx, const VectorXd& x_new, double t_new,
                     double p_new);

double delta_theta_exact(const SensitivityContext& ctx, const VectorXd& x_new, double t_new,
                         double p_new);

// Stationary candidate at a fixed multiplier: x = t * Z(lambda2) c with the
// linear constraints projected out through the resolvent.
VectorXd candidate_x(const SensitivityContext& ctx, double t_new, double lambda2,
                     SensitivityMode mode);

ZApplied apply_z(const SensitivityContext& ctx, double lambda2, SensitivityMode mode);

double delta_theta_approx(const SensitivityContext& ctx, double t_new, double p_new,
                          const ZApplied& z, SensitivityMode mode);

std::vector<LambdaRoot> solve_lambda2(const SensitivityContext& ctx, double t_new,
                                      SensitivityMode mode, const SensitivityConfig& cfg);

ExtremeVariable extreme_variable(const SensitivityContext& ctx, double t_new,
                                 const SensitivityConfig& cfg);

ExtremeVariable delta_bounded_extreme(const SensitivityContext& ctx, double delta_bound,
                                      double p_new, SensitivityMode mode);

double solution_correlation(const VectorXd& a, const VectorXd& b);

struct SweepPoint {
  double t = 0.0;
  bool ok = false;
  double lambda2 = 0.0;
  double delta_theta_exact = 0.0;
  double delta_theta_approx = 0.0;
  double objective = 0.0;
  int n_roots = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;                     // uniform grid over (0, t_max]
  std::vector<double> running_max_exact;              // over |delta_theta_exact|
  std::vector<double> running_max_approx;             // over |delta_theta_approx|
  int failures = 0;
};

SweepResult sweep_t(const SensitivityContext& ctx, const SensitivityConfig& cfg);

// Safeguarded secant/bisection refinement of a bracketed root of
// log(norm_ratio) (Log) or norm_ratio - 1 (Raw), where norm_ratio = x.x / n.
enum class RootScale { Log, Raw };

struct RefineResult {
  double lambda2 = 0.0;
  double g_abs = 0.0;
  int iterations = 0;
  bool converged = false;
};

RefineResult refine_bracket(const std::function<std::optional<double>(double)>& norm_ratio,
                            double lo, double hi, RootScale scale, double tol, int max_iter = 200);

}  // namespace relcal
