#include "relcal/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

constexpr double kPiFloor = 1e-6;

double draw_one(Philox& rng, ColumnDist d) {
  switch (d) {
    case ColumnDist::Normal: return rng.gauss();
    case ColumnDist::ChiSq4: return rng.chisq4();
    case ColumnDist::LogNormal: return rng.lognormal();
    case ColumnDist::Binary12: return rng.bernoulli(0.12) ? 1.0 : 0.0;
    case ColumnDist::Poisson25: return static_cast<double>(rng.poisson(2.5));
    case ColumnDist::Gamma15: return rng.gamma_shape1(5.0);
  }
  throw DegenerateInputError("unknown column distribution");
}

double clamp_pi(double v) { return std::min(1.0, std::max(kPiFloor, v)); }

}  // namespace

const char* column_dist_name(ColumnDist d) {
  switch (d) {
    case ColumnDist::Normal: return "normal";
    case ColumnDist::ChiSq4: return "chisq4";
    case ColumnDist::LogNormal: return "lognormal";
    case ColumnDist::Binary12: return "binary12";
    case ColumnDist::Poisson25: return "poisson25";
    case ColumnDist::Gamma15: return "gamma15";
  }
  return "unknown";
}

std::optional<ColumnDist> parse_column_dist(const std::string& name) {
  if (name == "normal") return ColumnDist::Normal;
  if (name == "chisq4") return ColumnDist::ChiSq4;
  if (name == "lognormal") return ColumnDist::LogNormal;
  if (name == "binary12") return ColumnDist::Binary12;
  if (name == "poisson25") return ColumnDist::Poisson25;
  if (name == "gamma15") return ColumnDist::Gamma15;
  return std::nullopt;
}

PopulationSpec PopulationSpec::twelve_mixed_default(std::uint64_t seed) {
  PopulationSpec s;
  s.n_pop = 120000;
  s.expected_sample = 1000.0;
  s.sigma = 0.4;
  s.y_low = 0.0;
  s.y_high = 25.0;
  s.seed = seed;
  s.columns = {ColumnDist::Normal,    ColumnDist::Normal,    ColumnDist::ChiSq4,
               ColumnDist::ChiSq4,    ColumnDist::LogNormal, ColumnDist::LogNormal,
               ColumnDist::Binary12,  ColumnDist::Binary12,  ColumnDist::Poisson25,
               ColumnDist::Poisson25, ColumnDist::Gamma15,   ColumnDist::Gamma15};
  s.important.assign(12, false);
  s.beta = VectorXd::Zero(13);
  s.beta(0) = 1.0;
  for (int j = 0; j < 12; ++j) {
    const bool imp = (j % 2 == 0);
    s.important[j] = imp;
    s.beta(j + 1) = imp ? 1.0 : 0.1;
  }
  s.gamma = VectorXd::Zero(12);
  s.gamma(4) = 0.35;  // important log-normal
  s.gamma(8) = 0.70;  // important Poisson
  s.gamma(10) = 0.40; // important gamma
  return s;
}

PopulationSpec PopulationSpec::trinormal_default(double sigma2, std::uint64_t seed) {
  PopulationSpec s;
  s.n_pop = 5000;
  s.expected_sample = 200.0;
  s.sigma = std::sqrt(sigma2);
  s.y_low = -std::numeric_limits<double>::infinity();
  s.y_high = std::numeric_limits<double>::infinity();
  s.seed = seed;
  s.columns = {ColumnDist::Normal, ColumnDist::Normal, ColumnDist::Normal};
  s.important = {true, true, true};
  s.beta = VectorXd::Zero(4);
  s.beta << 0.0, 1.0, 1.0, 1.0;
  s.gamma = VectorXd::Zero(3);
  return s;
}

Priorities twelve_mixed_priorities() {
  Priorities prio;
  prio.p = VectorXd::Zero(13);
  prio.p(0) = 3.0;
  for (int j = 0; j < 12; ++j) prio.p(j + 1) = (j % 2 == 0) ? 0.1 : 0.01;
  prio.R = 0.5;
  return prio;
}

void PopulationSpec::validate() const {
  if (n_pop <= 0) throw DegenerateInputError("population size must be positive");
  if (columns.empty()) throw DegenerateInputError("at least one auxiliary column required");
  if (!(sigma >= 0.0)) throw DegenerateInputError("sigma must be nonnegative");
  if (!(y_low < y_high)) throw DegenerateInputError("y limits must satisfy low < high");
  if (!(expected_sample > 0.0) || expected_sample > static_cast<double>(n_pop))
    throw DegenerateInputError("expected sample size must lie in (0, n_pop]");
  if (beta.size() != k() + 1) throw DimensionError("beta must have K+1 entries");
  if (gamma.size() != k()) throw DimensionError("gamma must have K entries");
  if (static_cast<Eigen::Index>(important.size()) != k())
    throw DimensionError("importance flags must have K entries");
}

Population gen_population(const PopulationSpec& spec) {
  spec.validate();
  const Eigen::Index N = static_cast<Eigen::Index>(spec.n_pop);
  const Eigen::Index K = spec.k();

  Population pop;
  pop.X.resize(N, K + 1);
  pop.X.col(0).setOnes();
  for (Eigen::Index j = 0; j < K; ++j) {
    Philox rng(spec.seed, 0, static_cast<std::uint64_t>(j) + 1);
    for (Eigen::Index i = 0; i < N; ++i) pop.X(i, j + 1) = draw_one(rng, spec.columns[j]);
  }

  pop.y = pop.X * spec.beta;
  if (spec.sigma > 0.0) {
    Philox rng(spec.seed, 0, static_cast<std::uint64_t>(K) + 1);
    for (Eigen::Index i = 0; i < N; ++i) pop.y(i) += spec.sigma * rng.gauss();
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    if (pop.y(i) < spec.y_low) {
      pop.y(i) = spec.y_low;
      ++pop.clamped_low;
    } else if (pop.y(i) > spec.y_high) {
      pop.y(i) = spec.y_high;
      ++pop.clamped_high;
    }
  }

  const VectorXd raw = VectorXd::Ones(N) + pop.X.rightCols(K) * spec.gamma;
  const auto scaled_sum = [&](double c) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) s += clamp_pi(c * raw(i));
    return s;
  };
  const double floor_sum = static_cast<double>(N) * kPiFloor;
  if (spec.expected_sample <= floor_sum)
    throw DegenerateInputError("expected sample size is below the probability floor");
  double c_lo = 0.0, c_hi = spec.expected_sample / static_cast<double>(N);
  int expand = 0;
  while (scaled_sum(c_hi) < spec.expected_sample) {
    c_hi *= 2.0;
    if (++expand > 200)
      throw DegenerateInputError("unsatisfiable probability scaling: all probabilities pinned");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (c_lo + c_hi);
    if (scaled_sum(mid) < spec.expected_sample)
      c_lo = mid;
    else
      c_hi = mid;
  }
  const double c = 0.5 * (c_lo + c_hi);
  pop.pi.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double v = c * raw(i);
    pop.pi(i) = clamp_pi(v);
    if (v < kPiFloor || v > 1.0) ++pop.pi_clamp_count;
  }

  pop.targets.resize(K + 1);
  pop.targets(0) = static_cast<double>(N);
  for (Eigen::Index j = 0; j < K; ++j) pop.targets(j + 1) = pop.X.col(j + 1).sum();
  pop.theta = pop.y.sum();
  return pop;
}

SampleDraw draw_sample(const Population& pop, Philox& rng) {
  const Eigen::Index N = pop.X.rows();
  const Eigen::Index K = pop.X.cols() - 1;
  std::vector<std::int64_t> idx;
  for (Eigen::Index i = 0; i < N; ++i) {
    if (rng.next_double() < pop.pi(i)) idx.push_back(static_cast<std::int64_t>(i));
  }
  SampleDraw s;
  s.indices = idx;
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  s.X.resize(n, K);
  s.y.resize(n);
  s.w.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]);
    s.X.row(r) = pop.X.row(i).tail(K);
    s.y(r) = pop.y(i);
    s.w(r) = 1.0 / pop.pi(i);
  }
  return s;
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const double ma = sample_mean(a), mb = sample_mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

ReplicationAggregates aggregate_records(const std::vector<ReplicationRecord>& records) {
  ReplicationAggregates agg;
  std::vector<double> ob, cb, oe, ce, ratio, corr, hte, cle, ro, rc;
  Eigen::Index n_cols = 0;
  for (const ReplicationRecord& r : records) {
    if (r.discarded) {
      ++agg.discarded;
      continue;
    }
    ++agg.kept;
    n_cols = r.deltas_cal.size();
    ob.push_back(r.dt_orth_bound);
    cb.push_back(r.dt_cent_bound);
    oe.push_back(r.dt_orth_exact);
    ce.push_back(r.dt_cent_exact);
    if (r.dt_orth_bound != 0.0) ratio.push_back(r.dt_cent_bound / r.dt_orth_bound);
    corr.push_back(r.corr_modes);
    hte.push_back(r.ht_error);
    cle.push_back(r.calib_error);
    if (r.has_recovery) {
      ro.push_back(r.recovery_orth);
      rc.push_back(r.recovery_cent);
    }
  }
  agg.mean_dt_orth_bound = sample_mean(ob);
  agg.sd_dt_orth_bound = sample_sd(ob);
  agg.mean_dt_cent_bound = sample_mean(cb);
  agg.sd_dt_cent_bound = sample_sd(cb);
  agg.mean_dt_orth_exact = sample_mean(oe);
  agg.sd_dt_orth_exact = sample_sd(oe);
  agg.mean_dt_cent_exact = sample_mean(ce);
  agg.sd_dt_cent_exact = sample_sd(ce);
  agg.corr_bounds = pearson(ob, cb);
  agg.median_ratio = quantile(ratio, 0.5);
  agg.ratio_q1 = quantile(ratio, 0.25);
  agg.ratio_q3 = quantile(ratio, 0.75);
  agg.mean_corr_modes = sample_mean(corr);
  agg.sd_corr_modes = sample_sd(corr);
  agg.mean_ht_error = sample_mean(hte);
  agg.sd_ht_error = sample_sd(hte);
  agg.mean_calib_error = sample_mean(cle);
  agg.sd_calib_error = sample_sd(cle);
  agg.has_recovery = !ro.empty();
  agg.mean_recovery_orth = sample_mean(ro);
  agg.sd_recovery_orth = sample_sd(ro);
  agg.mean_recovery_cent = sample_mean(rc);
  agg.sd_recovery_cent = sample_sd(rc);

  agg.sd_deltas_cal = VectorXd::Zero(n_cols);
  agg.sd_deltas_ht = VectorXd::Zero(n_cols);
  for (Eigen::Index j = 0; j < n_cols; ++j) {
    std::vector<double> dc, dh;
    for (const ReplicationRecord& r : records) {
      if (r.discarded) continue;
      dc.push_back(r.deltas_cal(j));
      dh.push_back(r.deltas_ht(j));
    }
    agg.sd_deltas_cal(j) = sample_sd(dc);
    agg.sd_deltas_ht(j) = sample_sd(dh);
  }
  return agg;
}

namespace {

ReplicationRecord run_one(const Population& pop, const Priorities& prio,
                          const SensitivityConfig& sens, const ReplicationConfig& cfg,
                          const std::vector<int>& cal_cols, int rep) {
  ReplicationRecord rec;
  rec.rep = rep;
  rec.stream = static_cast<std::uint64_t>(rep) + 1;
  try {
    SampleDraw s;
    int attempt = 0;
    for (;;) {
      Philox rng(cfg.master_seed, rec.stream, static_cast<std::uint64_t>(attempt));
      s = draw_sample(pop, rng);
      if (s.realized_n() > 0) break;
      if (++attempt >= cfg.max_resample_attempts)
        throw DegenerateInputError("empty sample after resampling");
    }
    rec.resamples = attempt;
    rec.realized_n = static_cast<int>(s.realized_n());

    const Eigen::Index kc = static_cast<Eigen::Index>(cal_cols.size());
    MatrixXd raw(s.realized_n(), kc);
    VectorXd raw_targets(kc);
    for (Eigen::Index j = 0; j < kc; ++j) {
      const int col = cal_cols[static_cast<std::size_t>(j)];
      raw.col(j) = s.X.col(col - 1);
      raw_targets(j) = pop.targets(col);
    }
    StandardizedDesign design;
    if (cfg.sample_standardize) {
      design = standardize(raw, raw_targets, static_cast<double>(pop.X.rows()), s.w);
    } else {
      design.n_pop = static_cast<double>(pop.X.rows());
      design.X.resize(raw.rows(), kc + 1);
      design.X.col(0).setOnes();
      design.X.rightCols(kc) = raw;
      design.t.resize(kc + 1);
      design.t(0) = design.n_pop;
      design.t.tail(kc) = raw_targets;
      design.means = VectorXd::Zero(kc);
      design.sds = VectorXd::Ones(kc);
    }
    // externally known targets replace the realized ones on the calibration scale
    if (!cfg.target_override.empty()) {
      for (Eigen::Index j = 0; j < kc; ++j)
        design.t(j + 1) = cfg.target_override[static_cast<std::size_t>(
            cal_cols[static_cast<std::size_t>(j)] - 1)];
    }
    CalibrationResult calib = calibrate_weights(design, s.w, prio);
    calib.estimate_cache = estimate_total(calib.u, s.y);
    rec.deltas_cal = calib.deltas;
    rec.deltas_ht = discrepancies(design, s.w);
    rec.ht_error = estimate_total(s.w, s.y) - pop.theta;
    rec.calib_error = *calib.estimate_cache - pop.theta;
    rec.negative_weights = calib.negative_weights;

    const SensitivityContext ctx = SensitivityContext::make(design, prio, calib, s.y);
    const double t_eval = cfg.t_eval > 0.0 ? cfg.t_eval : sens.t_max;
    SensitivityConfig mode_cfg = sens;
    mode_cfg.mode = SensitivityMode::Orthogonal;
    const ExtremeVariable orth = extreme_variable(ctx, t_eval, mode_cfg);
    mode_cfg.mode = SensitivityMode::Centered;
    const ExtremeVariable cent = extreme_variable(ctx, t_eval, mode_cfg);

    rec.dt_orth_exact = orth.delta_theta_exact;
    rec.dt_orth_bound = orth.delta_theta_approx;
    rec.dt_cent_exact = cent.delta_theta_exact;
    rec.dt_cent_bound = cent.delta_theta_approx;
    rec.lambda2_orth = orth.lambda2;
    rec.lambda2_cent = cent.lambda2;
    rec.corr_modes = solution_correlation(orth.x, cent.x);

    if (cfg.recovery_column > 0) {
      const VectorXd omit = s.X.col(cfg.recovery_column - 1);
      rec.recovery_orth = solution_correlation(orth.x, omit);
      rec.recovery_cent = solution_correlation(cent.x, omit);
      rec.has_recovery = true;
    }
  } catch (const std::exception& e) {
    rec.discarded = true;
    rec.discard_reason = e.what();
  }
  return rec;
}

}  // namespace

ReplicationSummary run_replications(const PopulationSpec& spec, const Priorities& prio,
                                    const SensitivityConfig& sens, const ReplicationConfig& cfg) {
  if (cfg.n_reps < 1) throw DegenerateInputError("n_reps must be at least 1");
  sens.validate();
  const Population pop = gen_population(spec);

  std::vector<int> cal_cols = cfg.calibrate_columns;
  if (cal_cols.empty()) {
    for (int j = 1; j <= static_cast<int>(spec.k()); ++j) cal_cols.push_back(j);
  }
  for (int c : cal_cols) {
    if (c < 1 || c > static_cast<int>(spec.k()))
      throw DegenerateInputError("calibrate_columns entry out of range");
  }
  prio.validate(static_cast<Eigen::Index>(cal_cols.size()) + 1);
  if (cfg.recovery_column < 0 || cfg.recovery_column > static_cast<int>(spec.k()))
    throw DegenerateInputError("recovery_column out of range");
  if (!cfg.target_override.empty() &&
      cfg.target_override.size() != static_cast<std::size_t>(spec.k()))
    throw DimensionError("target_override needs one value per population column");

  ReplicationSummary out;
  out.calibrate_columns = cal_cols;
  for (int c : cal_cols) out.column_important.push_back(spec.important[static_cast<std::size_t>(c - 1)]);
  out.records.resize(static_cast<std::size_t>(cfg.n_reps));

  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (int r = 0; r < cfg.n_reps; ++r)
      out.records[static_cast<std::size_t>(r)] = run_one(pop, prio, sens, cfg, cal_cols, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= cfg.n_reps) return;
          out.records[static_cast<std::size_t>(r)] = run_one(pop, prio, sens, cfg, cal_cols, r);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  out.aggregates = aggregate_records(out.records);
  if (out.aggregates.discarded * 10 > cfg.n_reps)
    throw DiscardRateError("replication discard rate above 10%: " +
                               std::to_string(out.aggregates.discarded) + " of " +
                               std::to_string(cfg.n_reps),
                           out.aggregates.discarded, cfg.n_reps);
  return out;
}

}  // namespace relcal
