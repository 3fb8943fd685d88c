#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relcal/rng.hpp"
#include "relcal/sensitivity.hpp"

namespace relcal {

enum class ColumnDist { Normal, ChiSq4, LogNormal, Binary12, Poisson25, Gamma15 };

const char* column_dist_name(ColumnDist d);
std::optional<ColumnDist> parse_column_dist(const std::string& name);

struct PopulationSpec {
  std::int64_t n_pop = 120000;
  double expected_sample = 1000.0;
  VectorXd beta;   // K+1 outcome coefficients, intercept first
  double sigma = 0.4;
  double y_low = 0.0;
  double y_high = 25.0;
  VectorXd gamma;  // K inclusion-probability coefficients
  std::vector<ColumnDist> columns;
  std::vector<bool> important;  // one flag per column
  std::uint64_t seed = 4711;

  static PopulationSpec twelve_mixed_default(std::uint64_t seed = 4711);
  static PopulationSpec trinormal_default(double sigma2 = 0.04, std::uint64_t seed = 4711);
  void validate() const;
  Eigen::Index k() const { return static_cast<Eigen::Index>(columns.size()); }
};

Priorities twelve_mixed_priorities();

struct Population {
  MatrixXd X;        // N x (K+1) raw auxiliary values, ones column first
  VectorXd y;        // N outcomes after truncation
  VectorXd pi;       // inclusion probabilities in (0, 1]
  VectorXd targets;  // K+1 raw column totals, targets(0) = N
  double theta = 0.0;  // population total of y
  long clamped_low = 0, clamped_high = 0;  // outcome truncation counts
  long pi_clamp_count = 0;                 // probabilities clipped into validity
};

Population gen_population(const PopulationSpec& spec);

struct SampleDraw {
  std::vector<std::int64_t> indices;  // strictly increasing population rows
  MatrixXd X;  // n x K raw auxiliary values (no ones column)
  VectorXd y;
  VectorXd w;  // design weights 1/pi
  Eigen::Index realized_n() const { return X.rows(); }
};

SampleDraw draw_sample(const Population& pop, Philox& rng);

struct ReplicationConfig {
  int n_reps = 200;
  std::uint64_t master_seed = 1;
  int threads = 1;
  std::vector<int> calibrate_columns;  // 1-based population columns; empty = all
  int recovery_column = 0;             // 1-based; 0 = none
  double t_eval = 0.0;                 // 0 = use sensitivity t_max
  int max_resample_attempts = 64;
  // Within-sample standardization is the default.  Columns that are already
  // on a standard scale by construction can skip it; targets are then used on
  // the raw scale.
  bool sample_standardize = true;
  // Externally known population totals (one per population column); empty
  // means the realized totals of the generated population.
  std::vector<double> target_override;
};

struct ReplicationRecord {
  int rep = 0;
  std::uint64_t stream = 0;
  int realized_n = 0;
  int resamples = 0;
  double ht_error = 0.0, calib_error = 0.0;
  double dt_orth_exact = 0.0, dt_orth_bound = 0.0;
  double dt_cent_exact = 0.0, dt_cent_bound = 0.0;
  double lambda2_orth = 0.0, lambda2_cent = 0.0;
  double corr_modes = 0.0;  // corr of the two extreme variables
  double recovery_orth = 0.0, recovery_cent = 0.0;  // vs an omitted column
  bool has_recovery = false;
  VectorXd deltas_cal, deltas_ht;  // per calibrated design column
  int negative_weights = 0;
  bool discarded = false;
  std::string discard_reason;
};

struct ReplicationAggregates {
  int kept = 0, discarded = 0;
  double mean_dt_orth_bound = 0, sd_dt_orth_bound = 0;
  double mean_dt_cent_bound = 0, sd_dt_cent_bound = 0;
  double mean_dt_orth_exact = 0, sd_dt_orth_exact = 0;
  double mean_dt_cent_exact = 0, sd_dt_cent_exact = 0;
  double corr_bounds = 0;  // corr(dt_orth_bound, dt_cent_bound) across replicates
  double median_ratio = 0, ratio_q1 = 0, ratio_q3 = 0;  // dt_cent_bound / dt_orth_bound
  double mean_corr_modes = 0, sd_corr_modes = 0;
  double mean_ht_error = 0, sd_ht_error = 0;
  double mean_calib_error = 0, sd_calib_error = 0;
  VectorXd sd_deltas_cal, sd_deltas_ht;  // per calibrated design column
  double mean_recovery_orth = 0, sd_recovery_orth = 0;
  double mean_recovery_cent = 0, sd_recovery_cent = 0;
  bool has_recovery = false;
};

struct ReplicationSummary {
  std::vector<ReplicationRecord> records;
  ReplicationAggregates aggregates;
  std::vector<int> calibrate_columns;  // resolved, 1-based
  std::vector<bool> column_important;  // for the calibrated columns
};

// Recomputable exactly from the per-replicate records.
ReplicationAggregates aggregate_records(const std::vector<ReplicationRecord>& records);

// One population per summary; per-replicate substreams are derived from
// master_seed so results do not depend on the worker count.
ReplicationSummary run_replications(const PopulationSpec& spec, const Priorities& prio,
                                    const SensitivityConfig& sens, const ReplicationConfig& rep);

double sample_sd(const std::vector<double>& v);
double sample_mean(const std::vector<double>& v);
double quantile(std::vector<double> v, double q);  // linear interpolation
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace relcal
