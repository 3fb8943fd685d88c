#include "relcal/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

// Gram-space evaluation of the constrained resolvent image.  Everything the
// lambda2 scan needs is expressible through B^T B, B^T u, B^T c and the five
// scalar products cached on the context, so one evaluation costs O(K^3) with
// K small; full n-vectors are materialized only at accepted roots.
struct Assembler {
  const SensitivityContext& ctx;
  SensitivityMode mode;
  Eigen::Index m;
  MatrixXd GB;  // B^T B
  VectorXd pB;  // B^T u
  VectorXd qB;  // B^T c

  Assembler(const SensitivityContext& c, SensitivityMode md) : ctx(c), mode(md) {
    if (mode == SensitivityMode::Orthogonal) {
      m = ctx.design.X.cols();
      GB = ctx.gram;
      pB = ctx.xu;
      qB = ctx.xc;
    } else {
      m = 1;
      GB = MatrixXd::Constant(1, 1, static_cast<double>(ctx.design.n()));
      pB = VectorXd::Constant(1, ctx.su);
      qB = VectorXd::Constant(1, ctx.sc);
    }
  }

  struct Eval {
    ResolventCoeffs k;
    // c channel: Zc = gamma_c c + gamma_u u - B beta
    VectorXd beta;
    double gamma_c = 0.0, gamma_u = 0.0;
    double zc_norm_sq = 0.0;
    double u_zc = 0.0, c_zc = 0.0;
    // u channel (for Zu)
    VectorXd beta_u;
    double ugamma_c = 0.0, ugamma_u = 0.0;
    VectorXd sol;  // (B^T R^{-1} B)^{-1} B^T R^{-1} c; lambda1 = -t * sol
  };

  std::optional<Eval> eval(double lambda) const {
    Eval ev;
    try {
      ev.k = resolvent_coeffs(lambda, ctx.uu, ctx.cc, ctx.uc);
    } catch (const SingularShiftError&) {
      return std::nullopt;
    }
    const ResolventCoeffs& k = ev.k;
    const VectorXd g1 = k.ca * pB - k.cc * qB;
    const VectorXd g2 = k.cb * qB - k.cd * pB;
    const MatrixXd M = GB / lambda + qB * g1.transpose() + pB * g2.transpose();
    Eigen::FullPivLU<MatrixXd> lu(M);
    lu.setThreshold(1e-12);
    if (lu.rank() < m) return std::nullopt;

    const double rho_c = 1.0 / lambda + k.ca * ctx.uc - k.cc * ctx.cc;
    const double rho_u = k.cb * ctx.cc - k.cd * ctx.uc;
    ev.sol = lu.solve(rho_c * qB + rho_u * pB);
    ev.gamma_c = rho_c - g1.dot(ev.sol);
    ev.gamma_u = rho_u - g2.dot(ev.sol);
    ev.beta = ev.sol / lambda;

    const double bq = ev.beta.dot(qB);
    const double bp = ev.beta.dot(pB);
    ev.zc_norm_sq = ev.gamma_c * ev.gamma_c * ctx.cc + ev.gamma_u * ev.gamma_u * ctx.uu +
                    2.0 * ev.gamma_c * ev.gamma_u * ctx.uc + ev.beta.dot(GB * ev.beta) -
                    2.0 * (ev.gamma_c * bq + ev.gamma_u * bp);
    ev.u_zc = ev.gamma_c * ctx.uc + ev.gamma_u * ctx.uu - bp;
    ev.c_zc = ev.gamma_c * ctx.cc + ev.gamma_u * ctx.uc - bq;
    if (!std::isfinite(ev.zc_norm_sq) || !(ev.zc_norm_sq > 0.0)) return std::nullopt;

    const double sig_c = k.ca * ctx.uu - k.cc * ctx.uc;
    const double sig_u = 1.0 / lambda + k.cb * ctx.uc - k.cd * ctx.uu;
    const VectorXd sol_u = lu.solve(sig_c * qB + sig_u * pB);
    ev.ugamma_c = sig_c - g1.dot(sol_u);
    ev.ugamma_u = sig_u - g2.dot(sol_u);
    ev.beta_u = sol_u / lambda;
    return ev;
  }

  VectorXd combine(double gamma_c, double gamma_u, const VectorXd& beta) const {
    VectorXd x = gamma_c * ctx.c + gamma_u * ctx.u;
    if (mode == SensitivityMode::Orthogonal)
      x.noalias() -= ctx.design.X * beta;
    else
      x.array() -= beta(0);
    return x;
  }

  VectorXd materialize(const Eval& ev, double t) const {
    return t * combine(ev.gamma_c, ev.gamma_u, ev.beta);
  }

  VectorXd materialize_zu(const Eval& ev) const {
    return combine(ev.ugamma_c, ev.ugamma_u, ev.beta_u);
  }
};

std::vector<double> magnitude_ladder(double scale, int count) {
  std::vector<double> out;
  out.reserve(count);
  const double lo = std::log(1e-9 * scale);
  const double hi = std::log(1e9 * scale);
  for (int i = 0; i < count; ++i)
    out.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) /
                           static_cast<double>(count - 1)));
  return out;
}

double guard_radius(double s) { return 1e-8 * (1.0 + std::abs(s)); }

struct Bracket {
  double a, b, ga, gb;
};

}  // namespace

const char* mode_name(SensitivityMode mode) {
  switch (mode) {
    case SensitivityMode::Orthogonal: return "orthogonal";
    case SensitivityMode::Centered: return "centered";
    case SensitivityMode::DeltaBoundedOrthogonal: return "delta_bounded_orthogonal";
    case SensitivityMode::DeltaBoundedCentered: return "delta_bounded_centered";
  }
  return "unknown";
}

bool is_delta_bounded(SensitivityMode mode) {
  return mode == SensitivityMode::DeltaBoundedOrthogonal ||
         mode == SensitivityMode::DeltaBoundedCentered;
}

void SensitivityConfig::validate() const {
  if (!(p_new >= 0.0)) throw DegenerateInputError("p_new must be nonnegative");
  if (!(t_max > 0.0)) throw DegenerateInputError("t_max must be positive");
  if (t_grid_size < 2) throw DegenerateInputError("t_grid_size must be at least 2");
  if (lambda_scan < 2) throw DegenerateInputError("lambda_scan must be at least 2");
  if (!(root_tol > 0.0)) throw DegenerateInputError("root_tol must be positive");
  if (is_delta_bounded(mode) && !(delta_bound > 0.0))
    throw DegenerateInputError("delta_bound must be positive");
}

SensitivityContext SensitivityContext::make(StandardizedDesign design, const Priorities& prio,
                                            const CalibrationResult& calib, VectorXd y) {
  prio.validate(design.X.cols());
  if (y.size() != design.n() || calib.u.size() != design.n())
    throw DimensionError("outcome/weight length must match the design");
  HApplier h(design.X, prio.p);
  VectorXd c = h.apply_inverse(y);
  const QEigenpairs qe = q_eigenpairs(calib.u, c);

  SensitivityContext ctx{std::move(design), std::move(h), calib.u,      std::move(y),
                         std::move(c),      qe.e1,        qe.e2,        {},
                         {},                {},           0.0,          0.0,
                         0.0,               0.0,          0.0};
  ctx.gram = ctx.design.X.transpose() * ctx.design.X;
  ctx.xu = ctx.design.X.transpose() * ctx.u;
  ctx.xc = ctx.design.X.transpose() * ctx.c;
  ctx.uu = ctx.u.squaredNorm();
  ctx.cc = ctx.c.squaredNorm();
  ctx.uc = ctx.u.dot(ctx.c);
  ctx.su = ctx.u.sum();
  ctx.sc = ctx.c.sum();
  return ctx;
}

VectorXd recalibrate(const SensitivityContext& ctx, const VectorXd& x_new, double t_new,
                     double p_new) {
  if (x_new.size() != ctx.design.n()) throw DimensionError("x_new length mismatch");
  if (p_new == 0.0) return ctx.u;
  const VectorXd hx = ctx.h.apply_inverse(x_new);
  const double delta = x_new.dot(ctx.u) - t_new;
  const double denom = 1.0 + p_new * x_new.dot(hx);
  return ctx.u - (p_new * delta / denom) * hx;
}

double delta_theta_exact(const SensitivityContext& ctx, const VectorXd& x_new, double t_new,
                         double p_new) {
  if (x_new.size() != ctx.design.n()) throw DimensionError("x_new length mismatch");
  if (p_new == 0.0) return 0.0;
  const double delta = x_new.dot(ctx.u) - t_new;
  const double xc = x_new.dot(ctx.c);
  const double denom = 1.0 + p_new * ctx.h.inv_quad(x_new);
  return -p_new * delta * xc / denom;
}

VectorXd candidate_x(const SensitivityContext& ctx, double t_new, double lambda2,
                     SensitivityMode mode) {
  if (is_delta_bounded(mode))
    throw DegenerateInputError("candidate_x applies to the t-bounded modes");
  if (t_new == 0.0)
    throw DegenerateInputError("t_new = 0 degenerates the candidate to the zero vector");
  Assembler assembler(ctx, mode);
  const auto ev = assembler.eval(lambda2);
  if (!ev) throw SingularShiftError("constraint system is singular at this lambda2");
  return assembler.materialize(*ev, t_new);
}

ZApplied apply_z(const SensitivityContext& ctx, double lambda2, SensitivityMode mode) {
  Assembler assembler(ctx, mode);
  const auto ev = assembler.eval(lambda2);
  if (!ev) throw SingularShiftError("constraint system is singular at this lambda2");
  ZApplied z;
  z.zc = assembler.materialize(*ev, 1.0);
  z.zu = assembler.materialize_zu(*ev);
  return z;
}

double delta_theta_approx(const SensitivityContext& ctx, double t_new, double p_new,
                          const ZApplied& z, SensitivityMode) {
  const double u_zc = ctx.u.dot(z.zc);
  const double c_zc = ctx.c.dot(z.zc);
  return -p_new * t_new * t_new * (u_zc - 1.0) * c_zc;
}

RefineResult refine_bracket(const std::function<std::optional<double>(double)>& norm_ratio,
                            double lo, double hi, RootScale scale, double tol, int max_iter) {
  const auto g = [&](double lam) -> std::optional<double> {
    const auto r = norm_ratio(lam);
    if (!r || !std::isfinite(*r) || !(*r > 0.0)) return std::nullopt;
    return scale == RootScale::Log ? std::log(*r) : *r - 1.0;
  };

  RefineResult res;
  auto glo = g(lo);
  auto ghi = g(hi);
  if (!glo || !ghi || (*glo) * (*ghi) > 0.0) return res;

  double a = lo, ga = *glo;
  double b = hi, gb = *ghi;
  int last_side = 0, same_side = 0;
  for (int it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    double cand = 0.0;
    bool bisect = same_side >= 2 || gb == ga;
    if (!bisect) {
      cand = b - gb * (b - a) / (gb - ga);
      if (!(cand > a && cand < b)) bisect = true;
    }
    if (bisect) cand = 0.5 * (a + b);
    auto gc = g(cand);
    if (!gc) {
      cand = 0.5 * (a + b);
      gc = g(cand);
      if (!gc) return res;  // unconverged; caller drops the bracket
    }
    res.lambda2 = cand;
    res.g_abs = std::abs(*gc);
    if (res.g_abs < tol) {
      res.converged = true;
      return res;
    }
    const int side = ((*gc) * ga > 0.0) ? -1 : +1;
    if (side < 0) {
      a = cand;
      ga = *gc;
    } else {
      b = cand;
      gb = *gc;
    }
    same_side = (side == last_side) ? same_side + 1 : 1;
    last_side = side;
    if (b - a < 4e-16 * (1.0 + std::abs(a) + std::abs(b))) return res;
  }
  return res;
}

std::vector<LambdaRoot> solve_lambda2(const SensitivityContext& ctx, double t_new,
                                      SensitivityMode mode, const SensitivityConfig& cfg) {
  if (t_new == 0.0) throw DegenerateInputError("t_new must be nonzero");
  if (is_delta_bounded(mode))
    throw DegenerateInputError("solve_lambda2 applies to the t-bounded modes");

  Assembler assembler(ctx, mode);
  const double n = static_cast<double>(ctx.design.n());
  const auto norm_ratio = [&](double lam) -> std::optional<double> {
    const auto ev = assembler.eval(lam);
    if (!ev) return std::nullopt;
    return t_new * t_new * ev->zc_norm_sq / n;
  };

  std::vector<double> singular = {0.0, -ctx.e1, -ctx.e2};
  std::sort(singular.begin(), singular.end());
  std::vector<double> sing;
  for (double s : singular) {
    if (sing.empty() || std::abs(s - sing.back()) > 1e-12 * (1.0 + std::abs(s)))
      sing.push_back(s);
  }

  const double scale = std::max({1.0, std::abs(ctx.e1), std::abs(ctx.e2)});
  const std::vector<double> ladder = magnitude_ladder(scale, cfg.lambda_scan);

  std::ostringstream trace;
  std::vector<Bracket> brackets;

  const std::size_t n_intervals = sing.size() + 1;
  for (std::size_t iv = 0; iv < n_intervals; ++iv) {
    const bool has_lo = iv > 0;
    const bool has_hi = iv < sing.size();
    const double lo = has_lo ? sing[iv - 1] + guard_radius(sing[iv - 1]) : 0.0;
    const double hi = has_hi ? sing[iv] - guard_radius(sing[iv]) : 0.0;

    std::vector<double> pts;
    if (has_lo) {
      for (double m : ladder) {
        const double x = sing[iv - 1] + m;
        if (x > lo && (!has_hi || x < hi)) pts.push_back(x);
      }
    }
    if (has_hi) {
      for (double m : ladder) {
        const double x = sing[iv] - m;
        if ((!has_lo || x > lo) && x < hi) pts.push_back(x);
      }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double x, double y) {
                            return std::abs(x - y) <= 1e-13 * (1.0 + std::abs(x));
                          }),
              pts.end());

    int valid = 0, changes = 0;
    double prev_lam = 0.0, prev_g = 0.0;
    bool have_prev = false;
    double min_abs_g = std::numeric_limits<double>::infinity();
    for (double lam : pts) {
      const auto r = norm_ratio(lam);
      if (!r || !std::isfinite(*r) || !(*r > 0.0)) {
        have_prev = false;
        continue;
      }
      const double gv = std::log(*r);
      ++valid;
      min_abs_g = std::min(min_abs_g, std::abs(gv));
      if (have_prev && prev_g * gv < 0.0) {
        brackets.push_back({prev_lam, lam, prev_g, gv});
        ++changes;
      }
      prev_lam = lam;
      prev_g = gv;
      have_prev = true;
    }
    trace << "interval " << iv << " [" << (has_lo ? std::to_string(sing[iv - 1]) : "-inf") << ", "
          << (has_hi ? std::to_string(sing[iv]) : "+inf") << "]: points=" << pts.size()
          << " valid=" << valid << " sign_changes=" << changes << " min|g|=" << min_abs_g << "\n";
  }

  std::vector<LambdaRoot> roots;
  for (const Bracket& br : brackets) {
    const RefineResult rr = refine_bracket(norm_ratio, br.a, br.b, RootScale::Log, cfg.root_tol);
    if (!rr.converged) continue;
    bool dup = false;
    for (const LambdaRoot& existing : roots) {
      if (std::abs(existing.lambda2 - rr.lambda2) <= 1e-9 * (1.0 + std::abs(rr.lambda2))) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    LambdaRoot root;
    root.lambda2 = rr.lambda2;
    root.g_abs = rr.g_abs;
    root.iterations = rr.iterations;
    root.converged = true;
    const auto ev = assembler.eval(rr.lambda2);
    if (!ev) continue;
    root.norm_sq = t_new * t_new * ev->zc_norm_sq;
    // objective -delta * x.(H^{-1}y) expressed through the Z scalars
    root.objective = -t_new * t_new * (ev->u_zc - 1.0) * ev->c_zc;
    roots.push_back(root);
  }

  if (roots.empty())
    throw NoRootError("no lambda2 root bracketed for t = " + std::to_string(t_new) + " (" +
                          mode_name(mode) + " mode)",
                      trace.str());
  std::sort(roots.begin(), roots.end(),
            [](const LambdaRoot& x, const LambdaRoot& y) { return x.lambda2 < y.lambda2; });
  return roots;
}

ExtremeVariable extreme_variable(const SensitivityContext& ctx, double t_new,
                                 const SensitivityConfig& cfg) {
  cfg.validate();
  if (is_delta_bounded(cfg.mode))
    return delta_bounded_extreme(ctx, cfg.delta_bound, cfg.p_new, cfg.mode);
  if (t_new == 0.0) throw DegenerateInputError("t_new must be nonzero");

  const std::vector<LambdaRoot> roots = solve_lambda2(ctx, t_new, cfg.mode, cfg);

  // The returned candidate maximizes the bound objective; the stationary point
  // with the largest objective is the constrained maximum (the shift there
  // keeps lambda2*I + Q positive semidefinite on the feasible tangent space).
  std::size_t best = 0;
  for (std::size_t i = 1; i < roots.size(); ++i) {
    const double tie = 1e-12 * std::max(1.0, std::abs(roots[best].objective));
    if (roots[i].objective > roots[best].objective + tie) {
      best = i;
    } else if (std::abs(roots[i].objective - roots[best].objective) <= tie &&
               std::abs(roots[i].lambda2) < std::abs(roots[best].lambda2)) {
      best = i;
    }
  }

  Assembler assembler(ctx, cfg.mode);
  const auto ev = assembler.eval(roots[best].lambda2);
  if (!ev) throw SingularShiftError("selected root became singular on re-evaluation");

  ExtremeVariable out;
  out.lambda2 = roots[best].lambda2;
  out.t_new = t_new;
  out.x = assembler.materialize(*ev, t_new);
  out.all_roots = roots;
  out.unexplored = {0.0, -ctx.e1, -ctx.e2};

  const double n = static_cast<double>(ctx.design.n());
  out.delta_new = out.x.dot(ctx.u) - t_new;
  const double xc = out.x.dot(ctx.c);
  out.objective = -out.delta_new * xc;
  out.delta_theta_approx = -cfg.p_new * out.delta_new * xc;
  if (cfg.p_new == 0.0) {
    out.delta_theta_exact = 0.0;
  } else {
    const double denom = 1.0 + cfg.p_new * ctx.h.inv_quad(out.x);
    out.delta_theta_exact = -cfg.p_new * out.delta_new * xc / denom;
  }

  // Stationarity: -Qx + t c + B lambda1 - lambda2 x with lambda1 = -t sol.
  VectorXd resid = -(ctx.u * ctx.c.dot(out.x) + ctx.c * ctx.u.dot(out.x)) + t_new * ctx.c -
                   out.lambda2 * out.x;
  if (cfg.mode == SensitivityMode::Orthogonal)
    resid.noalias() -= ctx.design.X * (t_new * ev->sol);
  else
    resid.array() -= t_new * ev->sol(0);
  out.stationarity_residual = resid.norm();

  if (cfg.mode == SensitivityMode::Orthogonal)
    out.constraint_residual = (ctx.design.X.transpose() * out.x).cwiseAbs().maxCoeff();
  else
    out.constraint_residual = std::abs(out.x.sum());
  out.norm_gap = std::abs(out.x.squaredNorm() - n) / n;
  return out;
}

ExtremeVariable delta_bounded_extreme(const SensitivityContext& ctx, double delta_bound,
                                      double p_new, SensitivityMode mode) {
  if (!(delta_bound > 0.0)) throw DegenerateInputError("delta_bound must be positive");
  const Eigen::Index n = ctx.design.n();
  const double nn = static_cast<double>(n);

  const bool orth = (mode == SensitivityMode::DeltaBoundedOrthogonal ||
                     mode == SensitivityMode::Orthogonal);
  VectorXd dir;
  if (orth)
    dir = ctx.design.X * (ctx.xc / nn) - ctx.c;  // (XX^T/n - I) c
  else
    dir = VectorXd::Constant(n, ctx.sc / nn) - ctx.c;  // (11^T/n - I) c

  const double norm = dir.norm();
  if (norm <= 1e-14 * std::max(1.0, ctx.c.norm()))
    throw DegenerateInputError("direction vector vanishes: H^{-1}y lies in the constrained space");

  ExtremeVariable out;
  out.x = (std::sqrt(nn) / norm) * dir;
  out.lambda2 = delta_bound * norm / std::sqrt(nn);  // normalizing constant
  out.delta_new = delta_bound;
  // Implied total x.u - delta; large values flag an implausible scenario.
  out.t_new = out.x.dot(ctx.u) - delta_bound;

  const double xc = out.x.dot(ctx.c);
  out.objective = -delta_bound * xc;
  out.delta_theta_approx = -p_new * delta_bound * xc;
  if (p_new == 0.0) {
    out.delta_theta_exact = 0.0;
  } else {
    const double denom = 1.0 + p_new * ctx.h.inv_quad(out.x);
    out.delta_theta_exact = -p_new * delta_bound * xc / denom;
  }
  out.all_roots.push_back({out.lambda2, 0.0, 0, true, out.x.squaredNorm(), out.objective});
  if (orth)
    out.constraint_residual = (ctx.design.X.transpose() * out.x).cwiseAbs().maxCoeff();
  else
    out.constraint_residual = std::abs(out.x.sum());
  out.norm_gap = std::abs(out.x.squaredNorm() - nn) / nn;
  return out;
}

double solution_correlation(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("vectors must have equal length");
  if (a.size() < 2) throw DegenerateInputError("correlation needs at least two entries");
  const VectorXd da = a.array() - a.mean();
  const VectorXd db = b.array() - b.mean();
  const double na = da.norm();
  const double nb = db.norm();
  if (na == 0.0 || nb == 0.0)
    throw DegenerateInputError("correlation undefined for a constant vector");
  return da.dot(db) / (na * nb);
}

SweepResult sweep_t(const SensitivityContext& ctx, const SensitivityConfig& cfg) {
  cfg.validate();
  if (is_delta_bounded(cfg.mode))
    throw DegenerateInputError("sweep_t applies to the t-bounded modes");

  SweepResult out;
  double run_exact = 0.0, run_approx = 0.0;
  for (int i = 1; i <= cfg.t_grid_size; ++i) {
    SweepPoint pt;
    pt.t = cfg.t_max * static_cast<double>(i) / static_cast<double>(cfg.t_grid_size);
    try {
      const ExtremeVariable ev = extreme_variable(ctx, pt.t, cfg);
      pt.ok = true;
      pt.lambda2 = ev.lambda2;
      pt.delta_theta_exact = ev.delta_theta_exact;
      pt.delta_theta_approx = ev.delta_theta_approx;
      pt.objective = ev.objective;
      pt.n_roots = static_cast<int>(ev.all_roots.size());
      run_exact = std::max(run_exact, std::abs(ev.delta_theta_exact));
      run_approx = std::max(run_approx, std::abs(ev.delta_theta_approx));
    } catch (const NoRootError&) {
      ++out.failures;
    }
    out.points.push_back(pt);
    out.running_max_exact.push_back(run_exact);
    out.running_max_approx.push_back(run_approx);
  }
  return out;
}

}  // namespace relcal
