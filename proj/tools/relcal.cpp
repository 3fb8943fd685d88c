#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relcal/csv.hpp"
#include "relcal/errors.hpp"
#include "relcal/scenario.hpp"
#include "relcal/sensitivity.hpp"
#include "relcal/simgen.hpp"

namespace fs = std::filesystem;
using namespace relcal;

namespace {

constexpr const char* kVersion = "relcal 1.0.0";

// Exit codes: 0 ok, 2 malformed input/config, 3 rank deficiency,
// 4 root-search failure, 5 replication discard rate above threshold.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const RankDeficiencyError*>(&e)) return 3;
  if (dynamic_cast<const NoRootError*>(&e)) return 4;
  if (dynamic_cast<const DiscardRateError*>(&e)) return 5;
  return 2;
}

std::string fd(double v) { return csv::format_double(v); }

std::string sanitize_cell(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

struct SurveyData {
  std::vector<std::string> unit_ids;
  std::vector<std::string> aux_names;
  VectorXd w, y;
  MatrixXd aux;  // n x K raw
};

SurveyData read_survey_data(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 4)
    throw CsvError("data file needs columns: unit_id, weight, y, then auxiliary columns", path, 1);
  if (t.header[0] != "unit_id" || t.header[1] != "weight" || t.header[2] != "y")
    throw CsvError("data header must start with unit_id,weight,y", path, 1);
  SurveyData d;
  for (std::size_t j = 3; j < t.header.size(); ++j) d.aux_names.push_back(t.header[j]);
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  if (n == 0) throw CsvError("data file has no rows", path, 2);
  d.w.resize(n);
  d.y.resize(n);
  d.aux.resize(n, static_cast<Eigen::Index>(d.aux_names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const int line = static_cast<int>(i) + 2;
    d.unit_ids.push_back(row[0]);
    d.w(i) = csv::parse_double(row[1], path, line);
    d.y(i) = csv::parse_double(row[2], path, line);
    for (std::size_t j = 3; j < row.size(); ++j)
      d.aux(i, static_cast<Eigen::Index>(j - 3)) = csv::parse_double(row[j], path, line);
  }
  return d;
}

// Targets file rows: column_name, raw_target.  The population size is the row
// named N; every auxiliary column must appear exactly once.
struct TargetData {
  double n_pop = 0.0;
  std::map<std::string, double> by_name;
};

TargetData read_targets(const std::string& path, const std::vector<std::string>& aux_names) {
  const csv::Table t = csv::read_file(path);
  t.require_column("column_name", path);
  t.require_column("raw_target", path);
  const int cn = t.column("column_name");
  const int cv = t.column("raw_target");
  TargetData out;
  bool have_n = false;
  std::map<std::string, double> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int line = static_cast<int>(i) + 2;
    const std::string& name = t.rows[i][static_cast<std::size_t>(cn)];
    const double v = csv::parse_double(t.rows[i][static_cast<std::size_t>(cv)], path, line);
    if (name == "N") {
      out.n_pop = v;
      have_n = true;
      continue;
    }
    if (seen.count(name)) throw CsvError("duplicate target row for column '" + name + "'", path, line);
    seen[name] = v;
  }
  if (!have_n) throw CsvError("targets file must contain a row named N (population size)", path, 1);
  for (const std::string& name : aux_names) {
    if (!seen.count(name))
      throw CsvError("targets file is missing a row for data column '" + name + "'", path, 1);
  }
  for (const auto& [name, v] : seen) {
    (void)v;
    bool known = false;
    for (const std::string& a : aux_names) known = known || a == name;
    if (!known)
      throw CsvError("targets file names column '" + name + "' absent from the data file", path, 1);
  }
  out.by_name = seen;
  return out;
}

Priorities priorities_for(const AnalysisConfig& cfg, const std::vector<std::string>& aux_names,
                          const std::string& config_path) {
  Priorities prio;
  prio.p = VectorXd::Zero(static_cast<Eigen::Index>(aux_names.size()) + 1);
  prio.p(0) = cfg.p_intercept;
  for (std::size_t j = 0; j < aux_names.size(); ++j) {
    const auto it = cfg.column_priorities.find(aux_names[j]);
    if (it == cfg.column_priorities.end())
      throw ConfigError("no priority configured for data column '" + aux_names[j] + "'",
                        config_path, 0);
    prio.p(static_cast<Eigen::Index>(j) + 1) = it->second;
  }
  prio.R = cfg.R;
  return prio;
}

void rank_error_with_names(const RankDeficiencyError& e,
                           const std::vector<std::string>& aux_names) {
  std::ostringstream os;
  os << "error: " << e.what();
  auto name_of = [&](int design_col) -> std::string {
    if (design_col == 0) return "intercept";
    const std::size_t j = static_cast<std::size_t>(design_col - 1);
    return j < aux_names.size() ? aux_names[j] : ("column " + std::to_string(design_col));
  };
  if (!e.duplicate_pairs.empty()) {
    os << "; collinear pairs:";
    for (const auto& [a, b] : e.duplicate_pairs) os << " (" << name_of(a) << ", " << name_of(b) << ")";
  } else if (!e.columns.empty()) {
    os << "; offending columns:";
    for (int c : e.columns) os << " " << name_of(c);
  }
  std::cerr << os.str() << "\n";
}

struct CalibratedInputs {
  SurveyData data;
  StandardizedDesign design;
  Priorities prio;
  AnalysisConfig cfg;
};

CalibratedInputs load_pipeline_inputs(const std::string& data_path, const std::string& targets_path,
                                      const std::string& config_path) {
  CalibratedInputs in{read_survey_data(data_path), {}, {}, parse_analysis_config(config_path)};
  const TargetData targets = read_targets(targets_path, in.data.aux_names);
  VectorXd raw_targets(static_cast<Eigen::Index>(in.data.aux_names.size()));
  for (std::size_t j = 0; j < in.data.aux_names.size(); ++j)
    raw_targets(static_cast<Eigen::Index>(j)) = targets.by_name.at(in.data.aux_names[j]);
  in.design = standardize(in.data.aux, raw_targets, targets.n_pop, in.data.w);
  in.prio = priorities_for(in.cfg, in.data.aux_names, config_path);
  return in;
}

int cmd_calibrate(const std::string& data_path, const std::string& targets_path,
                  const std::string& config_path, const std::string& out_dir) {
  CalibratedInputs in = load_pipeline_inputs(data_path, targets_path, config_path);
  const CalibrationResult res = calibrate_weights(in.design, in.data.w, in.prio);

  fs::create_directories(out_dir);
  {
    csv::Table t;
    t.header = {"unit_id", "design_weight", "calibrated_weight"};
    for (Eigen::Index i = 0; i < in.design.n(); ++i)
      t.rows.push_back({in.data.unit_ids[static_cast<std::size_t>(i)], fd(in.data.w(i)), fd(res.u(i))});
    csv::write_file(fs::path(out_dir) / "weights.csv", t);
  }
  {
    const VectorXd ht = in.design.X.transpose() * in.data.w;
    const VectorXd cal = in.design.X.transpose() * res.u;
    csv::Table t;
    t.header = {"variable", "ht_estimate", "calib_estimate", "target", "ht_error", "calib_error"};
    for (Eigen::Index k = 0; k < in.design.X.cols(); ++k) {
      const std::string name =
          k == 0 ? "intercept" : in.data.aux_names[static_cast<std::size_t>(k - 1)];
      t.rows.push_back({name, fd(ht(k)), fd(cal(k)), fd(in.design.t(k)),
                        fd(ht(k) - in.design.t(k)), fd(res.deltas(k))});
    }
    csv::write_file(fs::path(out_dir) / "discrepancies.csv", t);
  }
  {
    csv::Table t;
    t.header = {"outcome", "ht", "calibrated"};
    t.rows.push_back({"y", fd(estimate_total(in.data.w, in.data.y)),
                      fd(estimate_total(res.u, in.data.y))});
    csv::write_file(fs::path(out_dir) / "estimate.csv", t);
  }
  // report in thousands, one decimal
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "calibrated " << in.design.n() << " weights over " << in.design.k()
            << " auxiliary variables (negative weights: " << res.negative_weights << ")\n"
            << "HT estimate (thousands):          " << estimate_total(in.data.w, in.data.y) / 1000.0
            << "\n"
            << "calibration estimate (thousands): " << estimate_total(res.u, in.data.y) / 1000.0
            << "\n";
  return 0;
}

VectorXd read_calibrated_weights(const std::string& calib_dir,
                                 const std::vector<std::string>& unit_ids) {
  const fs::path p = fs::path(calib_dir) / "weights.csv";
  const csv::Table t = csv::read_file(p);
  const int cid = t.require_column("unit_id", p.string());
  const int cw = t.require_column("calibrated_weight", p.string());
  if (t.rows.size() != unit_ids.size())
    throw CsvError("weights.csv row count does not match the data file", p.string(), 1);
  VectorXd u(static_cast<Eigen::Index>(unit_ids.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][static_cast<std::size_t>(cid)] != unit_ids[i])
      throw CsvError("weights.csv unit_id order does not match the data file", p.string(),
                     static_cast<int>(i) + 2);
    u(static_cast<Eigen::Index>(i)) = csv::parse_double(t.rows[i][static_cast<std::size_t>(cw)]);
  }
  return u;
}

struct ModeOutputs {
  SensitivityMode mode;
  SweepResult sweep;
  std::optional<ExtremeVariable> at_tmax;
};

int cmd_sensitivity(const std::string& data_path, const std::string& targets_path,
                    const std::string& config_path, const std::string& calib_dir,
                    const std::string& out_dir, const std::string& mode_override,
                    std::optional<double> t_max, std::optional<double> p_new,
                    std::optional<int> grid) {
  CalibratedInputs in = load_pipeline_inputs(data_path, targets_path, config_path);
  if (!mode_override.empty()) in.cfg.modes = parse_run_modes(mode_override);
  if (t_max) in.cfg.sensitivity.t_max = *t_max;
  if (p_new) in.cfg.sensitivity.p_new = *p_new;
  if (grid) in.cfg.sensitivity.t_grid_size = *grid;
  in.cfg.sensitivity.validate();

  CalibrationResult calib;
  calib.u = read_calibrated_weights(calib_dir, in.data.unit_ids);
  calib.deltas = discrepancies(in.design, calib.u);
  const SensitivityContext ctx = SensitivityContext::make(in.design, in.prio, calib, in.data.y);

  fs::create_directories(out_dir);
  std::vector<ModeOutputs> runs;
  std::vector<std::string> fatal_modes;
  if (in.cfg.modes == RunModes::DeltaBounded) {
    for (SensitivityMode m : {SensitivityMode::DeltaBoundedOrthogonal,
                              SensitivityMode::DeltaBoundedCentered}) {
      ModeOutputs mo;
      mo.mode = m;
      mo.at_tmax = delta_bounded_extreme(ctx, in.cfg.sensitivity.delta_bound,
                                         in.cfg.sensitivity.p_new, m);
      runs.push_back(std::move(mo));
    }
  } else {
    std::vector<SensitivityMode> modes;
    if (in.cfg.modes == RunModes::Orthogonal || in.cfg.modes == RunModes::Both)
      modes.push_back(SensitivityMode::Orthogonal);
    if (in.cfg.modes == RunModes::Centered || in.cfg.modes == RunModes::Both)
      modes.push_back(SensitivityMode::Centered);
    for (SensitivityMode m : modes) {
      ModeOutputs mo;
      mo.mode = m;
      SensitivityConfig scfg = in.cfg.sensitivity;
      scfg.mode = m;
      mo.sweep = sweep_t(ctx, scfg);
      bool any_ok = false;
      for (const SweepPoint& pt : mo.sweep.points) any_ok = any_ok || pt.ok;
      if (!any_ok) fatal_modes.push_back(mode_name(m));
      try {
        mo.at_tmax = extreme_variable(ctx, scfg.t_max, scfg);
      } catch (const NoRootError&) {
        // flagged through the converged column
      }
      runs.push_back(std::move(mo));
    }
  }

  {
    csv::Table t;
    t.header = {"mode", "t", "lambda2", "delta_theta_exact", "delta_theta_approx",
                "objective", "n_roots", "converged", "running_max_exact", "running_max_approx"};
    for (const ModeOutputs& mo : runs) {
      if (mo.sweep.points.empty() && mo.at_tmax) {
        const ExtremeVariable& ev = *mo.at_tmax;
        t.rows.push_back({mode_name(mo.mode), fd(ev.t_new), fd(ev.lambda2),
                          fd(ev.delta_theta_exact), fd(ev.delta_theta_approx), fd(ev.objective),
                          "1", "1", fd(std::abs(ev.delta_theta_exact)),
                          fd(std::abs(ev.delta_theta_approx))});
        continue;
      }
      for (std::size_t i = 0; i < mo.sweep.points.size(); ++i) {
        const SweepPoint& pt = mo.sweep.points[i];
        t.rows.push_back({mode_name(mo.mode), fd(pt.t), fd(pt.lambda2), fd(pt.delta_theta_exact),
                          fd(pt.delta_theta_approx), fd(pt.objective),
                          std::to_string(pt.n_roots), pt.ok ? "1" : "0",
                          fd(mo.sweep.running_max_exact[i]), fd(mo.sweep.running_max_approx[i])});
      }
    }
    csv::write_file(fs::path(out_dir) / "sensitivity.csv", t);
  }
  {
    csv::Table t;
    t.header = {"unit_id"};
    for (const ModeOutputs& mo : runs) t.header.push_back(std::string("x_") + mode_name(mo.mode));
    for (Eigen::Index i = 0; i < in.design.n(); ++i) {
      std::vector<std::string> row = {in.data.unit_ids[static_cast<std::size_t>(i)]};
      for (const ModeOutputs& mo : runs)
        row.push_back(mo.at_tmax ? fd(mo.at_tmax->x(i)) : std::string());
      t.rows.push_back(std::move(row));
    }
    csv::write_file(fs::path(out_dir) / "extreme_x.csv", t);
  }
  {
    csv::Table t;
    t.header = {"mode", "max_abs_delta_theta_exact", "max_abs_delta_theta_approx", "argmax_t",
                "lambda2_at_tmax", "corr_with_other_mode", "root_failures"};
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const ModeOutputs& mo = runs[r];
      double best = 0.0, best_t = 0.0, best_approx = 0.0;
      for (const SweepPoint& pt : mo.sweep.points) {
        if (pt.ok && std::abs(pt.delta_theta_exact) >= best) {
          best = std::abs(pt.delta_theta_exact);
          best_approx = std::abs(pt.delta_theta_approx);
          best_t = pt.t;
        }
      }
      if (mo.sweep.points.empty() && mo.at_tmax) {
        best = std::abs(mo.at_tmax->delta_theta_exact);
        best_approx = std::abs(mo.at_tmax->delta_theta_approx);
        best_t = mo.at_tmax->t_new;
      }
      std::string corr;
      if (runs.size() == 2 && runs[0].at_tmax && runs[1].at_tmax)
        corr = fd(solution_correlation(runs[0].at_tmax->x, runs[1].at_tmax->x));
      t.rows.push_back({mode_name(mo.mode), fd(best), fd(best_approx), fd(best_t),
                        mo.at_tmax ? fd(mo.at_tmax->lambda2) : std::string(), corr,
                        std::to_string(mo.sweep.failures)});
      (void)r;
    }
    csv::write_file(fs::path(out_dir) / "sensitivity_summary.csv", t);
  }
  if (!fatal_modes.empty()) {
    std::ostringstream os;
    os << "no lambda2 root found at any grid point (";
    for (std::size_t i = 0; i < fatal_modes.size(); ++i)
      os << (i ? ", " : "") << fatal_modes[i];
    os << " mode); partial outputs written to " << out_dir;
    throw NoRootError(os.str());
  }
  std::cout << "sensitivity analysis written to " << out_dir << "\n";
  return 0;
}

void write_replicates_csv(const fs::path& path, const ReplicationSummary& sum) {
  csv::Table t;
  t.header = {"rep",
              "stream",
              "realized_n",
              "resamples",
              "ht_error",
              "calib_error",
              "dt_orth_exact",
              "dt_orth_bound",
              "dt_cent_exact",
              "dt_cent_bound",
              "lambda2_orth",
              "lambda2_cent",
              "corr_modes",
              "recovery_orth",
              "recovery_cent",
              "negative_weights",
              "discarded",
              "reason"};
  const Eigen::Index ncols =
      sum.records.empty() ? 0 : [&] {
        for (const auto& r : sum.records)
          if (!r.discarded) return r.deltas_cal.size();
        return Eigen::Index(0);
      }();
  for (Eigen::Index j = 0; j < ncols; ++j) t.header.push_back("delta_" + std::to_string(j));
  for (Eigen::Index j = 0; j < ncols; ++j) t.header.push_back("ht_delta_" + std::to_string(j));
  for (const ReplicationRecord& r : sum.records) {
    std::vector<std::string> row = {std::to_string(r.rep),
                                    std::to_string(r.stream),
                                    std::to_string(r.realized_n),
                                    std::to_string(r.resamples),
                                    fd(r.ht_error),
                                    fd(r.calib_error),
                                    fd(r.dt_orth_exact),
                                    fd(r.dt_orth_bound),
                                    fd(r.dt_cent_exact),
                                    fd(r.dt_cent_bound),
                                    fd(r.lambda2_orth),
                                    fd(r.lambda2_cent),
                                    fd(r.corr_modes),
                                    r.has_recovery ? fd(r.recovery_orth) : std::string(),
                                    r.has_recovery ? fd(r.recovery_cent) : std::string(),
                                    std::to_string(r.negative_weights),
                                    r.discarded ? "1" : "0",
                                    sanitize_cell(r.discard_reason)};
    for (Eigen::Index j = 0; j < ncols; ++j)
      row.push_back(r.discarded ? std::string() : fd(r.deltas_cal(j)));
    for (Eigen::Index j = 0; j < ncols; ++j)
      row.push_back(r.discarded ? std::string() : fd(r.deltas_ht(j)));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

void write_summary_csv(const fs::path& dir, const ScenarioConfig& cfg,
                       const ReplicationSummary& sum) {
  {
    csv::Table t;
    t.header = {"variable", "priority", "important", "sd_delta_calibrated", "sd_delta_ht"};
    const auto& agg = sum.aggregates;
    for (Eigen::Index k = 0; k < agg.sd_deltas_cal.size(); ++k) {
      std::string name = "intercept";
      std::string important = "";
      if (k > 0) {
        const int pop_col = sum.calibrate_columns[static_cast<std::size_t>(k - 1)];
        name = "x" + std::to_string(pop_col) + "_" +
               column_dist_name(cfg.population.columns[static_cast<std::size_t>(pop_col - 1)]);
        important = sum.column_important[static_cast<std::size_t>(k - 1)] ? "1" : "0";
      }
      t.rows.push_back({name, fd(cfg.priorities.p(k)), important, fd(agg.sd_deltas_cal(k)),
                        fd(agg.sd_deltas_ht(k))});
    }
    csv::write_file(dir / "summary.csv", t);
  }
  {
    csv::Table t;
    t.header = {"name", "value"};
    const auto& a = sum.aggregates;
    const std::vector<std::pair<std::string, double>> stats = {
        {"kept", static_cast<double>(a.kept)},
        {"discarded", static_cast<double>(a.discarded)},
        {"mean_dt_orth_bound", a.mean_dt_orth_bound},
        {"sd_dt_orth_bound", a.sd_dt_orth_bound},
        {"mean_dt_cent_bound", a.mean_dt_cent_bound},
        {"sd_dt_cent_bound", a.sd_dt_cent_bound},
        {"mean_dt_orth_exact", a.mean_dt_orth_exact},
        {"sd_dt_orth_exact", a.sd_dt_orth_exact},
        {"mean_dt_cent_exact", a.mean_dt_cent_exact},
        {"sd_dt_cent_exact", a.sd_dt_cent_exact},
        {"corr_bounds", a.corr_bounds},
        {"median_ratio", a.median_ratio},
        {"ratio_q1", a.ratio_q1},
        {"ratio_q3", a.ratio_q3},
        {"mean_corr_modes", a.mean_corr_modes},
        {"sd_corr_modes", a.sd_corr_modes},
        {"mean_ht_error", a.mean_ht_error},
        {"sd_ht_error", a.sd_ht_error},
        {"mean_calib_error", a.mean_calib_error},
        {"sd_calib_error", a.sd_calib_error},
    };
    for (const auto& [name, value] : stats) t.rows.push_back({name, fd(value)});
    if (a.has_recovery) {
      t.rows.push_back({"mean_recovery_orth", fd(a.mean_recovery_orth)});
      t.rows.push_back({"sd_recovery_orth", fd(a.sd_recovery_orth)});
      t.rows.push_back({"mean_recovery_cent", fd(a.mean_recovery_cent)});
      t.rows.push_back({"sd_recovery_cent", fd(a.sd_recovery_cent)});
    }
    csv::write_file(dir / "summary_stats.csv", t);
  }
}

struct FixedSample {
  StandardizedDesign design;
  VectorXd w, y;
};

FixedSample first_replicate_sample(const Population& pop, const ScenarioConfig& cfg,
                                   const std::vector<int>& cal_cols) {
  Philox rng(cfg.replication.master_seed, 1, 0);
  const SampleDraw s = draw_sample(pop, rng);
  MatrixXd raw(s.realized_n(), static_cast<Eigen::Index>(cal_cols.size()));
  VectorXd raw_targets(static_cast<Eigen::Index>(cal_cols.size()));
  for (std::size_t j = 0; j < cal_cols.size(); ++j) {
    raw.col(static_cast<Eigen::Index>(j)) = s.X.col(cal_cols[j] - 1);
    raw_targets(static_cast<Eigen::Index>(j)) = pop.targets(cal_cols[j]);
  }
  return {standardize(raw, raw_targets, static_cast<double>(pop.X.rows()), s.w), s.w, s.y};
}

void write_plotdata(const fs::path& dir, const ScenarioConfig& cfg, const Population& pop,
                    const std::vector<int>& cal_cols) {
  fs::create_directories(dir);
  const FixedSample fixed = first_replicate_sample(pop, cfg, cal_cols);
  const double t_eval =
      cfg.replication.t_eval > 0.0 ? cfg.replication.t_eval : cfg.sensitivity.t_max;

  auto run_modes_at = [&](const Priorities& prio)
      -> std::optional<std::pair<ExtremeVariable, ExtremeVariable>> {
    try {
      const CalibrationResult calib = calibrate_weights(fixed.design, fixed.w, prio);
      const SensitivityContext ctx = SensitivityContext::make(fixed.design, prio, calib, fixed.y);
      SensitivityConfig scfg = cfg.sensitivity;
      scfg.mode = SensitivityMode::Orthogonal;
      const ExtremeVariable o = extreme_variable(ctx, t_eval, scfg);
      scfg.mode = SensitivityMode::Centered;
      const ExtremeVariable c = extreme_variable(ctx, t_eval, scfg);
      return std::make_pair(o, c);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  if (cfg.sweeps.t_sweep) {
    const CalibrationResult calib = calibrate_weights(fixed.design, fixed.w, cfg.priorities);
    const SensitivityContext ctx =
        SensitivityContext::make(fixed.design, cfg.priorities, calib, fixed.y);
    for (SensitivityMode m : {SensitivityMode::Orthogonal, SensitivityMode::Centered}) {
      SensitivityConfig scfg = cfg.sensitivity;
      scfg.mode = m;
      const SweepResult sw = sweep_t(ctx, scfg);
      csv::Table t;
      t.header = {"t", "ok", "lambda2", "delta_theta_exact", "delta_theta_approx",
                  "objective", "running_max_exact", "running_max_approx"};
      for (std::size_t i = 0; i < sw.points.size(); ++i) {
        const SweepPoint& pt = sw.points[i];
        t.rows.push_back({fd(pt.t), pt.ok ? "1" : "0", fd(pt.lambda2), fd(pt.delta_theta_exact),
                          fd(pt.delta_theta_approx), fd(pt.objective),
                          fd(sw.running_max_exact[i]), fd(sw.running_max_approx[i])});
      }
      csv::write_file(dir / (std::string("t_sweep_") + mode_name(m) + ".csv"), t);
    }
  }

  const double theta = pop.theta;
  auto sweep_rows = [&](const std::vector<double>& grid,
                        const std::function<Priorities(double)>& make_prio, const fs::path& file) {
    if (grid.empty()) return;
    csv::Table t;
    t.header = {"value",        "dt_orth_exact", "dt_orth_bound", "dt_cent_exact",
                "dt_cent_bound", "calib_error",   "corr_modes"};
    for (double v : grid) {
      const Priorities prio = make_prio(v);
      const auto res = run_modes_at(prio);
      if (!res) {
        t.rows.push_back({fd(v), "", "", "", "", "", ""});
        continue;
      }
      const CalibrationResult calib = calibrate_weights(fixed.design, fixed.w, prio);
      t.rows.push_back({fd(v), fd(res->first.delta_theta_exact), fd(res->first.delta_theta_approx),
                        fd(res->second.delta_theta_exact), fd(res->second.delta_theta_approx),
                        fd(estimate_total(calib.u, fixed.y) - theta),
                        fd(solution_correlation(res->first.x, res->second.x))});
    }
    csv::write_file(file, t);
  };

  sweep_rows(cfg.sweeps.r_grid,
             [&](double r) {
               Priorities p = cfg.priorities;
               p.R = r;
               return p;
             },
             dir / "r_sweep.csv");
  sweep_rows(cfg.sweeps.p0_grid,
             [&](double v) {
               Priorities p = cfg.priorities;
               p.p(0) = v;
               return p;
             },
             dir / "p0_sweep.csv");
  auto group_prio = [&](bool important, double v) {
    Priorities p = cfg.priorities;
    for (std::size_t j = 0; j < cal_cols.size(); ++j) {
      const bool imp = cfg.population.important[static_cast<std::size_t>(cal_cols[j] - 1)];
      if (imp == important) p.p(static_cast<Eigen::Index>(j) + 1) = v;
    }
    return p;
  };
  sweep_rows(cfg.sweeps.p_important_grid, [&](double v) { return group_prio(true, v); },
             dir / "p_important_sweep.csv");
  sweep_rows(cfg.sweeps.p_unimportant_grid, [&](double v) { return group_prio(false, v); },
             dir / "p_unimportant_sweep.csv");
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<long long> seed, std::optional<int> threads,
                 const std::string& mode_override, std::optional<double> t_max,
                 std::optional<double> p_new, std::optional<int> grid) {
  ScenarioConfig cfg = parse_scenario(scenario_path);
  if (seed) cfg.replication.master_seed = static_cast<std::uint64_t>(*seed);
  if (threads) cfg.replication.threads = *threads;
  if (!mode_override.empty()) cfg.modes = parse_run_modes(mode_override);
  if (t_max) cfg.sensitivity.t_max = *t_max;
  if (p_new) cfg.sensitivity.p_new = *p_new;
  if (grid) cfg.sensitivity.t_grid_size = *grid;
  cfg.sensitivity.validate();

  const ReplicationSummary sum =
      run_replications(cfg.population, cfg.priorities, cfg.sensitivity, cfg.replication);

  fs::create_directories(out_dir);
  write_replicates_csv(fs::path(out_dir) / "replicates.csv", sum);
  write_summary_csv(fs::path(out_dir), cfg, sum);

  const Population pop = gen_population(cfg.population);
  write_plotdata(fs::path(out_dir) / "plotdata", cfg, pop, sum.calibrate_columns);

  std::cout << std::fixed << std::setprecision(3);
  std::cout << "replicates: " << sum.aggregates.kept << " kept, " << sum.aggregates.discarded
            << " discarded\n"
            << "mean extreme change (orthogonal): " << sum.aggregates.mean_dt_orth_bound << "\n"
            << "mean extreme change (centered):   " << sum.aggregates.mean_dt_cent_bound << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relcal: relaxed calibration of survey weights with sensitivity analysis"};
  app.set_version_flag("--version", kVersion);

  std::string template_kind;
  app.add_option("--emit-config-template", template_kind,
                 "print a config template (analysis|scenario) and exit")
      ->expected(1);

  auto* cal = app.add_subcommand("calibrate", "calibrate survey weights from CSV inputs");
  std::string data_path, targets_path, config_path, out_dir, calib_dir, mode_override;
  cal->add_option("--data", data_path, "survey data CSV (unit_id,weight,y,aux...)")->required();
  cal->add_option("--targets", targets_path, "targets CSV (column_name,raw_target)")->required();
  cal->add_option("--config", config_path, "analysis configuration")->required();
  cal->add_option("--out", out_dir, "output directory")->required();

  std::optional<long long> seed;
  std::optional<int> threads, grid;
  std::optional<double> t_max, p_new;

  auto* sns = app.add_subcommand("sensitivity", "extreme plausible new-variable analysis");
  sns->add_option("--data", data_path, "survey data CSV")->required();
  sns->add_option("--targets", targets_path, "targets CSV")->required();
  sns->add_option("--config", config_path, "analysis configuration")->required();
  sns->add_option("--calib", calib_dir, "directory produced by the calibrate command")->required();
  sns->add_option("--out", out_dir, "output directory")->required();
  sns->add_option("--mode", mode_override, "orth|centered|both|delta-bounded");
  sns->add_option("--t-max", t_max, "override the largest plausible |t|");
  sns->add_option("--p-new", p_new, "override the new-variable priority");
  sns->add_option("--grid", grid, "override the t grid size");

  auto* sim = app.add_subcommand("simulate", "seeded replication study from a scenario file");
  std::string scenario_path;
  sim->add_option("--scenario", scenario_path, "scenario configuration file")->required();
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--seed", seed, "override the master seed");
  sim->add_option("--threads", threads, "replication worker count");
  sim->add_option("--mode", mode_override, "orth|centered|both|delta-bounded");
  sim->add_option("--t-max", t_max, "override the largest plausible |t|");
  sim->add_option("--p-new", p_new, "override the new-variable priority");
  sim->add_option("--grid", grid, "override the t grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (!template_kind.empty()) {
      if (template_kind == "analysis")
        std::cout << analysis_template();
      else if (template_kind == "scenario")
        std::cout << scenario_template();
      else
        throw ConfigError("unknown template kind '" + template_kind + "'");
      return 0;
    }
    if (cal->parsed()) return cmd_calibrate(data_path, targets_path, config_path, out_dir);
    if (sns->parsed())
      return cmd_sensitivity(data_path, targets_path, config_path, calib_dir, out_dir,
                             mode_override, t_max, p_new, grid);
    if (sim->parsed())
      return cmd_simulate(scenario_path, out_dir, seed, threads, mode_override, t_max, p_new, grid);
    std::cout << app.help();
    return 0;
  } catch (const RankDeficiencyError& e) {
    std::vector<std::string> names;
    try {
      names = read_survey_data(data_path).aux_names;
    } catch (...) {
    }
    rank_error_with_names(e, names);
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
