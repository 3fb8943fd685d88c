// Acceptance suite: one check per numbered criterion, each printed as a
// single [PASS]/[FAIL] line with the measured quantities.  Exit status is the
// number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "relcal/csv.hpp"
#include "relcal/errors.hpp"
#include "relcal/scenario.hpp"
#include "relcal/sensitivity.hpp"
#include "relcal/simgen.hpp"
#include "test_util.hpp"

using namespace relcal;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED{" << what << "}";
    }
  }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int threads() {
  return static_cast<int>(std::min(4u, std::max(1u, std::thread::hardware_concurrency())));
}

// ---------------------------------------------------------------------------

Outcome criterion1_calibration_oracle() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> nd(8, 50), kd(0, 5);
  std::uniform_real_distribution<double> rd(0.0, 1.0);
  double worst_rel = 0.0, worst_grad = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = nd(rng);
    const Eigen::Index k = std::min<Eigen::Index>(kd(rng), (n - 2) / 3);
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1), rd(rng)};
    const CalibrationResult res = calibrate_weights(d, w, prio);

    const MatrixXd h = dense_h(d.X, prio.p);
    const VectorXd s = prio.R * w +
                       (1.0 - prio.R) * (d.n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
                       d.X * prio.p.cwiseProduct(d.t);
    worst_rel = std::max(worst_rel, rel_err(res.u, VectorXd(h.partialPivLu().solve(s))));
    const VectorXd grad = 2.0 * (h * res.u - s);
    worst_grad = std::max(worst_grad, grad.cwiseAbs().maxCoeff() / s.cwiseAbs().maxCoeff());
  }
  const double dt = seconds_since(t0);
  out.require(worst_rel < 1e-10, "dense-solve mismatch");
  out.require(worst_grad < 1e-8, "gradient");
  out.require(dt < 5.0, "runtime");
  out.detail << "max rel err " << worst_rel << ", max scaled grad " << worst_grad << ", " << dt
             << " s";
  return out;
}

Outcome criterion2_recalibration_oracle() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(902);
  std::uniform_int_distribution<int> nd(12, 50), kd(0, 4);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = nd(rng);
    const Eigen::Index k = std::min<Eigen::Index>(kd(rng), (n - 3) / 3);
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1), 0.5};
    const CalibrationResult calib = calibrate_weights(d, w, prio);
    const VectorXd y = d.X * random_vector(rng, k + 1) + random_vector(rng, n, 0.5);
    const SensitivityContext ctx = SensitivityContext::make(d, prio, calib, y);

    VectorXd x = random_vector(rng, n);
    x.array() -= x.mean();
    x *= std::sqrt(static_cast<double>(n)) / x.norm();
    const double t_new = 0.15 * d.n_pop;
    const double p_new = 0.2;
    const VectorXd fast = recalibrate(ctx, x, t_new, p_new);

    MatrixXd xa(n, d.X.cols() + 1);
    xa << d.X, x;
    VectorXd ta(d.t.size() + 1);
    ta << d.t, t_new;
    VectorXd pa(prio.p.size() + 1);
    pa << prio.p, p_new;
    const VectorXd sa = prio.R * w +
                        (1.0 - prio.R) * (d.n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
                        xa * pa.cwiseProduct(ta);
    const VectorXd dense = dense_h(xa, pa).partialPivLu().solve(sa);
    worst = std::max(worst, rel_err(fast, dense));
  }
  const double dt = seconds_since(t0);
  out.require(worst < 1e-9, "augmented dense mismatch");
  out.require(dt < 5.0, "runtime");
  out.detail << "max rel err " << worst << ", " << dt << " s";
  return out;
}

Outcome criterion3_extreme_correctness() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(903);

  // constraint satisfaction over a batch of instances, modes and t values;
  // points where the norm equation has no stationary solution are skipped the
  // same way the replication harness discards them
  double worst_gap = 0.0, worst_res = 0.0, worst_stat = 0.0;
  int solved = 0, unattainable = 0;
  for (int rep = 0; rep < 12; ++rep) {
    const Eigen::Index n = 16 + 4 * (rep % 4);
    const Eigen::Index k = 1 + rep % 3;
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1, 0.0), 0.5};
    const CalibrationResult calib = calibrate_weights(d, w, prio);
    const VectorXd y = d.X * random_vector(rng, k + 1) + random_vector(rng, n, 0.5);
    const SensitivityContext ctx = SensitivityContext::make(d, prio, calib, y);
    SensitivityConfig cfg;
    cfg.t_max = 3.0 * static_cast<double>(n);
    cfg.lambda_scan = 256;
    for (const SensitivityMode mode : {SensitivityMode::Orthogonal, SensitivityMode::Centered}) {
      cfg.mode = mode;
      for (double frac : {0.6, 1.0}) {
        try {
          const ExtremeVariable ev = extreme_variable(ctx, frac * cfg.t_max, cfg);
          ++solved;
          worst_gap = std::max(worst_gap, ev.norm_gap);
          worst_res = std::max(worst_res, ev.constraint_residual / static_cast<double>(n));
          worst_stat = std::max(worst_stat, ev.stationarity_residual /
                                                (ctx.c.norm() * std::abs(frac * cfg.t_max)));
        } catch (const NoRootError&) {
          ++unattainable;
        }
      }
    }
  }
  out.require(solved >= 40, "too few solvable instances");
  out.require(worst_gap < 1e-7, "norm gap");
  out.require(worst_res < 1e-6, "constraint residual");
  out.require(worst_stat < 1e-6, "stationarity residual");

  // random-search maximality at n = 20, K = 2 with 1e5 feasible candidates
  const Eigen::Index n = 20;
  const StandardizedDesign d = random_design(rng, n, 2);
  const VectorXd w = positive_weights(rng, n);
  const Priorities prio{nonneg_priorities(rng, 3, 0.0), 0.5};
  const CalibrationResult calib = calibrate_weights(d, w, prio);
  const VectorXd y = d.X * random_vector(rng, 3) + random_vector(rng, n, 0.5);
  const SensitivityContext ctx = SensitivityContext::make(d, prio, calib, y);
  SensitivityConfig cfg;
  cfg.t_max = 80.0;
  double worst_excess = -1e300;
  Eigen::FullPivLU<MatrixXd> gram_lu(ctx.gram);
  for (const SensitivityMode mode : {SensitivityMode::Orthogonal, SensitivityMode::Centered}) {
    cfg.mode = mode;
    const ExtremeVariable ev = extreme_variable(ctx, 55.0, cfg);
    double best = -1e300;
    for (int i = 0; i < 100000; ++i) {
      VectorXd x = random_vector(rng, n);
      if (mode == SensitivityMode::Orthogonal)
        x -= d.X * gram_lu.solve(d.X.transpose() * x);
      else
        x.array() -= x.mean();
      x *= std::sqrt(static_cast<double>(n)) / x.norm();
      best = std::max(best, -(x.dot(ctx.u) - 55.0) * x.dot(ctx.c));
    }
    worst_excess = std::max(worst_excess, best - ev.objective);
  }
  out.require(worst_excess <= 1e-6, "random search beat the returned objective");

  const double dt = seconds_since(t0);
  out.require(dt < 60.0, "runtime");
  out.detail << "norm gap " << worst_gap << ", constraint " << worst_res << ", stationarity "
             << worst_stat << " (" << solved << " solved, " << unattainable
             << " unattainable), search excess " << worst_excess << ", " << dt << " s";
  return out;
}

Outcome criterion4_closed_form_identities() {
  Outcome out;
  std::mt19937_64 rng(904);
  double worst_dt = 0.0, worst_resolvent = 0.0, worst_woodbury = 0.0, worst_eigen = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index n = 10 + rep % 30;
    const Eigen::Index k = std::min<Eigen::Index>(1 + rep % 4, (n - 3) / 3);
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1), 0.4};
    const CalibrationResult calib = calibrate_weights(d, w, prio);
    const VectorXd y = d.X * random_vector(rng, k + 1) + random_vector(rng, n, 0.5);
    const SensitivityContext ctx = SensitivityContext::make(d, prio, calib, y);

    VectorXd x = random_vector(rng, n);
    x *= std::sqrt(static_cast<double>(n)) / x.norm();
    const double t_new = 0.1 * d.n_pop;
    const double p_new = 0.3;
    const double direct = delta_theta_exact(ctx, x, t_new, p_new);
    const double via_update = (recalibrate(ctx, x, t_new, p_new) - ctx.u).dot(y);
    worst_dt =
        std::max(worst_dt, std::abs(direct - via_update) / std::max(1.0, std::abs(direct)));

    const VectorXd v = random_vector(rng, n);
    HApplier h(d.X, prio.p);
    worst_woodbury = std::max(worst_woodbury, rel_err(h.apply(h.apply_inverse(v)), v));

    const double span = ctx.u.norm() * ctx.c.norm() + std::abs(ctx.uc);
    const double lam = (rep % 2 == 0 ? 1.0 : -1.0) * (1.3 * span + 0.7);
    if (!lambda_shift_is_singular(lam, ctx.uu, ctx.cc, ctx.uc, 1e-6)) {
      RankTwoResolvent r(lam, ctx.u, ctx.c);
      worst_resolvent = std::max(worst_resolvent, rel_err(r.apply_forward(r.apply(v)), v));
    }

    const QEigenpairs qe = q_eigenpairs(ctx.u, ctx.c);
    const MatrixXd q = dense_q(ctx.u, ctx.c);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
    const double scale = std::abs(qe.e1) + std::abs(qe.e2);
    worst_eigen = std::max({worst_eigen, std::abs(qe.e1 - es.eigenvalues().maxCoeff()) / scale,
                            std::abs(qe.e2 - es.eigenvalues().minCoeff()) / scale,
                            (q * qe.v1 - qe.e1 * qe.v1).norm() / scale,
                            (q * qe.v2 - qe.e2 * qe.v2).norm() / scale});
  }
  out.require(worst_dt < 1e-10, "delta-theta identity");
  out.require(worst_resolvent < 1e-9, "resolvent round trip");
  out.require(worst_woodbury < 1e-9, "woodbury round trip");
  out.require(worst_eigen < 1e-10, "eigenpairs");
  out.detail << "dt identity " << worst_dt << ", resolvent " << worst_resolvent << ", woodbury "
             << worst_woodbury << ", eigen " << worst_eigen;
  return out;
}

Outcome criterion5_linear_invariance() {
  Outcome out;
  std::mt19937_64 rng(905);
  double worst = 0.0, worst_cond = 0.0;
  int done = 0;
  while (done < 50) {
    const Eigen::Index n = 25 + done % 10;
    const Eigen::Index k = 2 + done % 3;
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1, 0.0), 0.35};
    MatrixXd e = random_matrix(rng, k + 1, k + 1) + 2.0 * MatrixXd::Identity(k + 1, k + 1);
    Eigen::JacobiSVD<MatrixXd> svd(e);
    const double cond = svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
    if (cond >= 1e3) continue;
    ++done;
    worst_cond = std::max(worst_cond, cond);
    const CalibrationResult base = calibrate_weights(d, w, prio);
    const TransformedDesign tf = transform_design(d, prio, e);
    const CalibrationResult moved = calibrate_weights(tf.X, tf.t, tf.n_pop, w, tf.P, prio.R);
    worst = std::max(worst, rel_err(moved.u, base.u));
  }
  out.require(worst < 1e-9, "weights changed under basis change");
  out.detail << "max rel change " << worst << " over 50 transforms, max cond " << worst_cond;
  return out;
}

Outcome criterion6_symmetry_proportionality() {
  Outcome out;
  std::mt19937_64 rng(906);
  double worst_sym = 0.0, worst_prop = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 20 + 2 * rep;
    const Eigen::Index k = 2;
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const Priorities prio{nonneg_priorities(rng, k + 1, 0.0), 0.5};
    const CalibrationResult calib = calibrate_weights(d, w, prio);
    const VectorXd y = d.X * random_vector(rng, k + 1) + random_vector(rng, n, 0.5);
    const SensitivityContext ctx = SensitivityContext::make(d, prio, calib, y);
    SensitivityConfig cfg;
    cfg.t_max = 70.0;
    cfg.mode = rep % 2 == 0 ? SensitivityMode::Orthogonal : SensitivityMode::Centered;
    const double t_new = 45.0 + rep;
    const ExtremeVariable plus = extreme_variable(ctx, t_new, cfg);
    const ExtremeVariable minus = extreme_variable(ctx, -t_new, cfg);
    worst_sym =
        std::max(worst_sym, std::abs(std::abs(minus.delta_theta_exact) -
                                     std::abs(plus.delta_theta_exact)) /
                                std::max(1.0, std::abs(plus.delta_theta_exact)));

    // at fixed x and t the bound value is exactly linear in the new priority
    const ZApplied z = apply_z(ctx, plus.lambda2, cfg.mode);
    const double a1 = delta_theta_approx(ctx, t_new, 0.05, z, cfg.mode);
    const double a4 = delta_theta_approx(ctx, t_new, 0.20, z, cfg.mode);
    worst_prop = std::max(worst_prop, std::abs(a4 - 4.0 * a1) / std::max(1.0, std::abs(a4)));
  }
  out.require(worst_sym <= 1e-10, "sign symmetry");
  out.require(worst_prop <= 1e-12, "linearity in the new priority");
  out.detail << "symmetry gap " << worst_sym << ", proportionality gap " << worst_prop;
  return out;
}

struct StudyRun {
  ReplicationSummary sum;
  double mean_orth_k = 0, mean_cent_k = 0;  // reported change of estimate, in thousands
};

StudyRun run_study(double expected_sample, int reps, std::uint64_t pop_seed,
               std::uint64_t master_seed) {
  PopulationSpec spec = PopulationSpec::twelve_mixed_default(pop_seed);
  spec.expected_sample = expected_sample;
  const Priorities prio = twelve_mixed_priorities();
  SensitivityConfig sens;  // p_new 0.1, t_max 5000, default scan
  ReplicationConfig rep;
  rep.n_reps = reps;
  rep.master_seed = master_seed;
  rep.threads = threads();
  StudyRun out{run_replications(spec, prio, sens, rep), 0, 0};
  out.mean_orth_k = out.sum.aggregates.mean_dt_orth_exact / 1000.0;
  out.mean_cent_k = out.sum.aggregates.mean_dt_cent_exact / 1000.0;
  return out;
}

Outcome criterion7_statistical_reproduction(const StudyRun& run) {
  Outcome out;
  const ReplicationAggregates& a = run.sum.aggregates;
  out.require(run.mean_orth_k >= 0.10 && run.mean_orth_k <= 0.40, "mean dt orth band");
  out.require(run.mean_cent_k >= 1.0 && run.mean_cent_k <= 2.8, "mean dt cent band");
  out.require(a.corr_bounds > 0.6, "corr of the two mode values");
  out.require(a.median_ratio >= 4.0 && a.median_ratio <= 16.0, "median ratio band");
  out.require(a.mean_corr_modes >= 0.15 && a.mean_corr_modes <= 0.35, "corr(x, x0) band");
  out.detail << "mean dt orth " << run.mean_orth_k << "k, cent " << run.mean_cent_k << "k, corr "
             << a.corr_bounds << ", median ratio " << a.median_ratio << ", corr(x,x0) "
             << a.mean_corr_modes << " (" << a.kept << " kept, " << a.discarded << " discarded)";
  return out;
}

Outcome criterion8_discrepancy_ordering(const StudyRun& run) {
  Outcome out;
  const ReplicationAggregates& a = run.sum.aggregates;
  double imp = 0, unimp = 0, ht = 0;
  int n_imp = 0, n_unimp = 0;
  for (Eigen::Index j = 1; j < a.sd_deltas_cal.size(); ++j) {
    ht += a.sd_deltas_ht(j);
    if (run.sum.column_important[static_cast<std::size_t>(j - 1)]) {
      imp += a.sd_deltas_cal(j);
      ++n_imp;
    } else {
      unimp += a.sd_deltas_cal(j);
      ++n_unimp;
    }
  }
  imp /= n_imp;
  unimp /= n_unimp;
  ht /= static_cast<double>(a.sd_deltas_cal.size() - 1);
  out.require(a.sd_deltas_cal(0) < 3.0, "sd(delta0)");
  out.require(imp >= 20.0 && imp <= 80.0, "important band");
  out.require(unimp >= 180.0 && unimp <= 750.0, "unimportant band");
  out.require(ht >= 2000.0 && ht <= 8000.0, "uncalibrated band");
  out.require(a.sd_deltas_cal(0) < imp && imp < unimp && unimp < ht, "ordering");
  out.detail << "sd(delta0) " << a.sd_deltas_cal(0) << ", important " << imp << ", unimportant "
             << unimp << ", uncalibrated " << ht;
  return out;
}

Outcome criterion9_sample_size_trend() {
  Outcome out;
  double prev = -1e300;
  for (double en : {500.0, 1000.0, 2000.0}) {
    const StudyRun run = run_study(en, 100, 4711, 2);
    out.detail << "E(n)=" << en << ": " << run.mean_orth_k << "k  ";
    out.require(run.mean_orth_k > prev, "means not increasing");
    prev = run.mean_orth_k;
  }
  return out;
}

Outcome criterion10_smd_recovery() {
  Outcome out;
  Priorities prio;
  prio.p = VectorXd(3);
  prio.p << 5.0, 0.1, 0.1;
  prio.R = 0.5;
  SensitivityConfig sens;
  sens.p_new = 0.1;
  sens.t_max = 210.0;
  sens.lambda_scan = 256;
  ReplicationConfig rep;
  rep.n_reps = 100;
  rep.master_seed = 13;
  rep.threads = threads();
  rep.calibrate_columns = {1, 2};
  rep.recovery_column = 3;
  rep.target_override = {0.0, 0.0, 0.0};

  double prev = 1e300;
  bool first = true;
  for (double s2 : {0.04, 0.3066, 0.5733, 0.84}) {
    const PopulationSpec spec = PopulationSpec::trinormal_default(s2, 21);
    const ReplicationSummary sum = run_replications(spec, prio, sens, rep);
    const double rec = sum.aggregates.mean_recovery_orth;
    if (first) {
      out.require(rec > 0.9, "recovery at sigma2=0.04");
      out.require(sum.aggregates.mean_corr_modes > 0.97, "mode correlation");
      out.detail << "corr(x*,x3)=" << rec << ", corr(x*,x0)=" << sum.aggregates.mean_corr_modes
                 << "; sigma2 grid:";
      first = false;
    }
    out.detail << " " << rec;
    out.require(rec < prev, "recovery not decreasing in sigma2");
    prev = rec;
  }
  return out;
}

Outcome criterion11_cli_determinism() {
  Outcome out;
  const char* bin = std::getenv("RELCAL_BIN");
  if (!bin) {
    out.pass = false;
    out.detail << "RELCAL_BIN not set";
    return out;
  }
  const fs::path tmp = fs::temp_directory_path() / ("relcal_acc_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  {
    std::ofstream cfg(tmp / "scenario.cfg");
    cfg << "[population]\nn_pop = 10000\nexpected_sample = 300\nseed = 5\n"
           "[priorities]\n[sensitivity]\nt_max = 1500\nlambda_scan = 128\nt_grid_size = 5\n"
           "[replication]\nn_reps = 6\nmaster_seed = 3\n"
           "[sweeps]\nt_sweep = true\nr_grid = 0.25, 0.75\n";
  }
  auto run = [&](const std::string& name, int nthreads) {
    const std::string cmd = std::string(bin) + " simulate --scenario " +
                            (tmp / "scenario.cfg").string() + " --out " + (tmp / name).string() +
                            " --threads " + std::to_string(nthreads) + " > " +
                            (tmp / (name + ".log")).string() + " 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  out.require(run("a", 1) == 0, "run a failed");
  out.require(run("b", 1) == 0, "run b failed");
  out.require(run("c", 4) == 0, "run c failed");
  int checked = 0;
  if (out.pass) {
    const std::vector<std::string> files = {
        "replicates.csv",
        "summary.csv",
        "summary_stats.csv",
        "plotdata/t_sweep_orthogonal.csv",
        "plotdata/t_sweep_centered.csv",
        "plotdata/r_sweep.csv"};
    for (const std::string& file : files) {
      const std::string a = slurp(tmp / "a" / file);
      out.require(!a.empty(), "empty output " + file);
      out.require(a == slurp(tmp / "b" / file), "rerun differs: " + file);
      out.require(a == slurp(tmp / "c" / file), "thread count changed bytes: " + file);
      ++checked;
    }
  }
  out.detail << checked << " machine-readable files byte-identical across reruns and 1/4 threads";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const auto wanted = [&](int k) {
    return only.empty() || std::find(only.begin(), only.end(), k) != only.end();
  };

  int failures = 0;
  const auto report = [&](int num, const char* name, const Outcome& o) {
    std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", num, name,
                o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  if (wanted(1))
    report(1, "calibration optimality and oracle equivalence", criterion1_calibration_oracle());
  if (wanted(2))
    report(2, "rank-one re-calibration vs dense augmented solve", criterion2_recalibration_oracle());
  if (wanted(3))
    report(3, "extreme-variable correctness and maximality", criterion3_extreme_correctness());
  if (wanted(4)) report(4, "closed-form identities", criterion4_closed_form_identities());
  if (wanted(5)) report(5, "linear invariance of calibration", criterion5_linear_invariance());
  if (wanted(6)) report(6, "symmetry and proportionality", criterion6_symmetry_proportionality());

  if (wanted(7) || wanted(8)) {
    const auto t0 = std::chrono::steady_clock::now();
    const StudyRun run = run_study(1000.0, 200, 4711, 1);
    const double dt = seconds_since(t0);
    if (wanted(7)) {
      Outcome o = criterion7_statistical_reproduction(run);
      o.require(dt < 900.0, "runtime");
      o.detail << ", " << dt << " s";
      report(7, "replication study statistics", o);
    }
    if (wanted(8))
      report(8, "discrepancy dispersion ordering", criterion8_discrepancy_ordering(run));
  }

  if (wanted(9))
    report(9, "sensitivity grows with expected sample size", criterion9_sample_size_trend());
  if (wanted(10)) report(10, "omitted-variable recovery", criterion10_smd_recovery());
  if (wanted(11)) report(11, "deterministic simulation outputs", criterion11_cli_determinism());

  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
