#ifndef BARTPP_IO_HPP
#define BARTPP_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "bartpp/diagnostics.hpp"
#include "bartpp/geometry.hpp"
#include "bartpp/sampler.hpp"
#include "bartpp/synthetic.hpp"

namespace bartpp {

// On-disk run description (JSON). Exactly one point source: a scenario to
// simulate from, or a CSV of observed events.
struct RunConfig {
  Domain domain;
  std::optional<IntensityScenario> scenario;
  std::optional<std::string> points_path;
  std::string test_points = "uniform:1000";  // "uniform:K" | "grid:K" | CSV path
  std::string out_dir = "out";
  int jobs = 0;  // 0: one worker per chain

  SamplerConfig sampler;
  BinningRule binning = BinningRule::fixed;
  int binning_cells = 100;
  bool force_unit_rate_beta = false;
  std::optional<double> alpha_override;
  std::optional<double> beta_override;
};

RunConfig load_run_config(const std::string& path);

// Conversion factor from unit-cube intensity to native units (counts are
// preserved across the coordinate change).
inline double intensity_scale(const Domain& domain) { return 1.0 / domain.volume(); }

// Reads `x1[,x2,...]` rows, validates against the domain, and returns
// unit-cube coordinates. Errors cite the offending line.
PointSet parse_points_csv(const std::string& path, const Domain& domain);

void write_points_csv(const std::string& path, const PointSet& native_points);

// Test points in unit coordinates, resolved from the config spec; the
// "uniform:K" form derives its own stream from the seed so every command
// regenerates the same set.
PointSet resolve_test_points(const RunConfig& config);

// Simple stderr logging gated by BARTPP_LOG (quiet | info | debug).
void log_info(const std::string& message);
void log_debug(const std::string& message);

// simulate: points.csv + truth.csv (native units) under out_dir.
void cmd_simulate(const RunConfig& config);
// fit: test_points.csv, chain_<k>.csv matrices (native units), manifest.json.
void cmd_fit(const RunConfig& config);
// diagnose: summary.csv (+ scores.csv when truth.csv is present).
void cmd_diagnose(const RunConfig& config);
// simulate -> fit -> diagnose in one output directory.
void cmd_pipeline(const RunConfig& config);

}  // namespace bartpp

#endif
