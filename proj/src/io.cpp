#include "bartpp/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "bartpp/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace bartpp {

namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("BARTPP_LOG");
    if (env == nullptr) return 1;
    const std::string value(env);
    if (value == "quiet" || value == "0") return 0;
    if (value == "debug" || value == "2") return 2;
    return 1;
  }();
  return level;
}

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

double parse_double_cell(const std::string& cell, const std::string& path, std::size_t line) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw DataError(path + ":" + std::to_string(line) + ": non-numeric cell '" + cell + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Domain parse_domain(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("domain must be a nonempty array of [low, high] pairs");
  Domain domain;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) throw ConfigError("domain entries must be [low, high] pairs");
    const double lo = pair[0].get<double>();
    const double hi = pair[1].get<double>();
    if (!(lo < hi)) throw ConfigError("domain bounds must satisfy low < high");
    domain.lower.push_back(lo);
    domain.upper.push_back(hi);
  }
  return domain;
}

IntensityScenario parse_scenario(const json& j, const Domain& domain) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    const IntensityScenario* builtin = find_scenario(name);
    if (builtin == nullptr) throw ConfigError("unknown scenario '" + name + "'");
    return *builtin;
  }
  if (!j.is_object()) throw ConfigError("scenario must be a name or an object");
  const std::string type = j.value("type", "piecewise");
  if (type != "piecewise") throw ConfigError("unsupported scenario type '" + type + "'");
  const double base = j.value("base", 0.0);
  if (base < 0.0) throw ConfigError("piecewise base level must be nonnegative");
  std::vector<PiecewisePiece> pieces;
  for (const auto& piece : j.value("pieces", json::array())) {
    RegionBox box;
    for (const auto& pair : piece.at("box")) {
      box.lower.push_back(pair[0].get<double>());
      box.upper.push_back(pair[1].get<double>());
    }
    if (box.dim() != domain.dim()) throw ConfigError("piecewise piece dimension mismatch");
    const double level = piece.at("level").get<double>();
    if (level < 0.0) throw ConfigError("piecewise levels must be nonnegative");
    pieces.push_back({std::move(box), level});
  }
  return make_piecewise_scenario(j.value("name", "piecewise"), domain, base, std::move(pieces));
}

BinningRule parse_binning(const std::string& name) {
  if (name == "fixed") return BinningRule::fixed;
  if (name == "rule_i") return BinningRule::sample_root_1;
  if (name == "rule_ii") return BinningRule::sample_root_2;
  if (name == "rule_iqr") return BinningRule::iqr;
  throw ConfigError("unknown binning rule '" + name + "' (fixed | rule_i | rule_ii | rule_iqr)");
}

std::string binning_name(BinningRule rule) {
  switch (rule) {
    case BinningRule::fixed: return "fixed";
    case BinningRule::sample_root_1: return "rule_i";
    case BinningRule::sample_root_2: return "rule_ii";
    case BinningRule::iqr: return "rule_iqr";
  }
  return "fixed";
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

PointSet read_native_points_csv(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open points file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_csv_line(strip_cr(line));
  if (static_cast<int>(header.size()) != expected_dim) {
    throw DataError(path + ":1: expected " + std::to_string(expected_dim) +
                    " column header, found " + std::to_string(header.size()));
  }
  PointSet points;
  points.dim = expected_dim;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != expected_dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_dim) + " columns, found " +
                      std::to_string(cells.size()));
    }
    for (const auto& cell : cells) {
      points.coords.push_back(parse_double_cell(cell, path, line_no));
    }
  }
  if (points.size() == 0) throw DataError(path + ": no events");
  return points;
}

struct ChainFiles {
  std::vector<ChainResult> chains;  // native intensity units
};

ChainResult read_chain_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open chain file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_csv_line(strip_cr(line));
  if (header.empty() || header.front() != "iter") {
    throw DataError(path + ":1: header must start with 'iter'");
  }
  ChainResult chain;
  chain.test_point_count = header.size() - 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": column count mismatch");
    }
    chain.kept_iterations.push_back(static_cast<long>(parse_double_cell(cells[0], path, line_no)));
    for (std::size_t j = 1; j < cells.size(); ++j) {
      chain.samples.push_back(parse_double_cell(cells[j], path, line_no));
    }
  }
  if (chain.rows() == 0) throw DataError(path + ": no kept draws");
  return chain;
}

void write_chain_matrix_csv(const fs::path& path, const ChainResult& chain, double scale) {
  auto out = open_output(path);
  out << "iter";
  for (std::size_t j = 0; j < chain.test_point_count; ++j) out << ",z" << (j + 1);
  out << "\n";
  for (std::size_t r = 0; r < chain.rows(); ++r) {
    out << chain.kept_iterations[r];
    for (std::size_t j = 0; j < chain.test_point_count; ++j) {
      out << ',' << format_double(chain.at(r, j) * scale);
    }
    out << "\n";
  }
}

PointSet read_test_points(const fs::path& dir, const Domain& domain) {
  return read_native_points_csv((dir / "test_points.csv").string(), domain.dim());
}

json sampler_to_json(const SamplerConfig& s) {
  return json{{"trees", s.tree_count},
              {"iterations", s.iterations},
              {"burn_in_fraction", s.burn_in_fraction},
              {"thin", s.thin},
              {"chains", s.chain_count},
              {"seed", s.seed},
              {"proposal_probs", {{"grow", s.p_grow}, {"prune", s.p_prune}, {"change", s.p_change}}},
              {"split_gamma", s.split_gamma},
              {"split_delta", s.split_delta},
              {"grid_resolution", s.grid_resolution}};
}

}  // namespace

void log_info(const std::string& message) {
  if (log_level() >= 1) std::cerr << "[bartpp] " << message << "\n";
}

void log_debug(const std::string& message) {
  if (log_level() >= 2) std::cerr << "[bartpp] " << message << "\n";
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }

  try {
    RunConfig config;
    config.domain = parse_domain(j.at("domain"));

    const bool has_scenario = j.contains("scenario");
    const bool has_points = j.contains("points");
    if (has_scenario == has_points) {
      throw ConfigError("config must name exactly one point source: 'scenario' or 'points'");
    }
    if (has_scenario) {
      config.scenario = parse_scenario(j.at("scenario"), config.domain);
      if (config.scenario->dim() != config.domain.dim()) {
        throw ConfigError("scenario dimension does not match domain");
      }
      // Builtin scenarios carry their own native window.
      if (j.at("scenario").is_string()) config.domain = config.scenario->domain;
    } else {
      config.points_path = j.at("points").get<std::string>();
    }

    config.test_points = j.value("test_points", config.test_points);
    config.out_dir = j.value("out", config.out_dir);
    config.jobs = j.value("jobs", 0);

    SamplerConfig& s = config.sampler;
    s.tree_count = j.value("trees", s.tree_count);
    s.iterations = j.value("iterations", s.iterations);
    s.burn_in_fraction = j.value("burn_in_fraction", s.burn_in_fraction);
    s.thin = j.value("thin", s.thin);
    s.chain_count = j.value("chains", s.chain_count);
    s.seed = j.value("seed", s.seed);
    if (j.contains("proposal_probs")) {
      const auto& p = j.at("proposal_probs");
      s.p_grow = p.value("grow", s.p_grow);
      s.p_prune = p.value("prune", s.p_prune);
      s.p_change = p.value("change", s.p_change);
    }
    s.split_gamma = j.value("split_gamma", s.split_gamma);
    s.split_delta = j.value("split_delta", s.split_delta);
    s.grid_resolution = j.value("grid_resolution", s.grid_resolution);

    config.binning = parse_binning(j.value("binning", "fixed"));
    config.binning_cells = j.value("binning_cells", 100);
    config.force_unit_rate_beta = j.value("force_unit_rate_beta", false);
    if (j.contains("alpha")) config.alpha_override = j.at("alpha").get<double>();
    if (j.contains("beta")) config.beta_override = j.at("beta").get<double>();
    return config;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

PointSet parse_points_csv(const std::string& path, const Domain& domain) {
  const PointSet native = read_native_points_csv(path, domain.dim());
  // Re-validate row by row so bound violations cite their data line
  // (header is line 1).
  for (std::size_t i = 0; i < native.size(); ++i) {
    const auto p = native[i];
    for (int jdim = 0; jdim < domain.dim(); ++jdim) {
      if (p[jdim] < domain.lower[jdim] || p[jdim] > domain.upper[jdim]) {
        throw DataError(path + ":" + std::to_string(i + 2) + ": coordinate " +
                        format_double(p[jdim]) + " outside domain bounds");
      }
    }
  }
  return normalize_points(native, domain);
}

void write_points_csv(const std::string& path, const PointSet& native_points) {
  auto out = open_output(path);
  for (int j = 0; j < native_points.dim; ++j) out << (j > 0 ? "," : "") << "x" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < native_points.size(); ++i) {
    const auto p = native_points[i];
    for (int j = 0; j < native_points.dim; ++j) out << (j > 0 ? "," : "") << format_double(p[j]);
    out << "\n";
  }
}

PointSet resolve_test_points(const RunConfig& config) {
  const int d = config.domain.dim();
  const std::string& spec = config.test_points;
  PointSet points;
  points.dim = d;

  const auto parse_count = [&](const std::string& prefix) -> long {
    const std::string digits = spec.substr(prefix.size());
    long count = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), count);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || count < 1) {
      throw ConfigError("bad test point spec '" + spec + "'");
    }
    return count;
  };

  if (spec.rfind("uniform:", 0) == 0) {
    const long count = parse_count("uniform:");
    Rng rng(config.sampler.seed, kTestPointStream);
    points.coords.resize(static_cast<std::size_t>(count) * d);
    for (auto& c : points.coords) c = rng.uniform();
    return points;
  }
  if (spec.rfind("grid:", 0) == 0) {
    const long count = parse_count("grid:");
    const long per_dim = std::max<long>(
        1, static_cast<long>(std::llround(std::pow(static_cast<double>(count), 1.0 / d))));
    std::vector<long> index(d, 0);
    for (;;) {
      for (int j = 0; j < d; ++j) {
        points.coords.push_back((static_cast<double>(index[j]) + 0.5) / static_cast<double>(per_dim));
      }
      int j = d - 1;
      while (j >= 0 && ++index[j] == per_dim) index[j--] = 0;
      if (j < 0) break;
    }
    return points;
  }
  // Otherwise a CSV of native-coordinate locations.
  return parse_points_csv(spec, config.domain);
}

void cmd_simulate(const RunConfig& config) {
  if (!config.scenario.has_value()) throw ConfigError("simulate requires a scenario");
  const IntensityScenario& scenario = *config.scenario;
  fs::create_directories(config.out_dir);

  Rng rng(config.sampler.seed, kSimulateStream);
  const PointSet native = simulate_thinning(scenario, rng);
  if (native.size() == 0) throw DataError("simulated realization is empty; raise the intensity");
  write_points_csv((fs::path(config.out_dir) / "points.csv").string(), native);
  log_info("simulate: " + std::to_string(native.size()) + " events from scenario '" +
           scenario.name + "'");

  const PointSet tests = resolve_test_points(config);
  auto out = open_output(fs::path(config.out_dir) / "truth.csv");
  for (int j = 0; j < tests.dim; ++j) out << "x" << (j + 1) << ",";
  out << "intensity\n";
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto native_point = denormalize_point(tests[i], config.domain);
    for (double c : native_point) out << format_double(c) << ',';
    out << format_double(scenario.intensity(native_point)) << "\n";
  }
}

void cmd_fit(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (!config.points_path.has_value() && !config.scenario.has_value()) {
    throw ConfigError("fit requires a points file");
  }
  const std::string points_path =
      config.points_path.value_or((fs::path(config.out_dir) / "points.csv").string());
  const PointSet unit_points = parse_points_csv(points_path, config.domain);
  const PointSet tests = resolve_test_points(config);
  fs::create_directories(config.out_dir);

  SamplerConfig sampler = config.sampler;
  GammaHyperFit fit;
  if (config.alpha_override && config.beta_override) {
    fit.alpha = *config.alpha_override;
    fit.beta = *config.beta_override;
  } else {
    fit = fit_gamma_hyperparameters(unit_points, sampler.tree_count, config.binning,
                                    config.binning_cells, config.force_unit_rate_beta);
    if (config.alpha_override) fit.alpha = *config.alpha_override;
    if (config.beta_override) fit.beta = *config.beta_override;
    if (fit.zero_variance_fallback) {
      log_info("hyperparameter fit: zero variance across bins, falling back to beta = 1");
    }
  }
  sampler.alpha = fit.alpha;
  sampler.beta = fit.beta;
  sampler.validate();
  log_info("fit: n = " + std::to_string(unit_points.size()) + ", alpha = " +
           format_double(sampler.alpha) + ", beta = " + format_double(sampler.beta));

  const std::vector<ChainResult> chains = run_parallel_chains(unit_points, sampler, tests, config.jobs);

  // Native-coordinate artifacts.
  {
    PointSet native;
    native.dim = tests.dim;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      const auto p = denormalize_point(tests[i], config.domain);
      native.push_back(p);
    }
    write_points_csv((fs::path(config.out_dir) / "test_points.csv").string(), native);
  }
  const double scale = intensity_scale(config.domain);
  AcceptanceStats totals;
  for (std::size_t k = 0; k < chains.size(); ++k) {
    write_chain_matrix_csv(fs::path(config.out_dir) / ("chain_" + std::to_string(k) + ".csv"),
                           chains[k], scale);
    totals.merge(chains[k].acceptance);
    log_debug("chain " + std::to_string(k) + ": " + std::to_string(chains[k].rows()) +
              " kept rows, acceptance grow " + format_double(chains[k].acceptance.rate(ProposalKind::grow)) +
              " prune " + format_double(chains[k].acceptance.rate(ProposalKind::prune)) +
              " change " + format_double(chains[k].acceptance.rate(ProposalKind::change)));
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest;
  manifest["sampler"] = sampler_to_json(sampler);
  manifest["resolved"] = {{"alpha", sampler.alpha},
                          {"beta", sampler.beta},
                          {"binning", binning_name(config.binning)},
                          {"bins_per_dim", fit.bins_per_dim},
                          {"cells", fit.cell_count},
                          {"zero_variance_fallback", fit.zero_variance_fallback}};
  manifest["n_points"] = unit_points.size();
  manifest["n_test_points"] = tests.size();
  manifest["kept_rows_per_chain"] = chains.front().rows();
  manifest["wall_seconds"] = wall;
  const auto rate_entry = [&](ProposalKind kind) {
    const int k = static_cast<int>(kind);
    return json{{"proposed", totals.proposed[k]},
                {"accepted", totals.accepted[k]},
                {"rate", totals.rate(kind)}};
  };
  manifest["acceptance"] = {{"grow", rate_entry(ProposalKind::grow)},
                            {"prune", rate_entry(ProposalKind::prune)},
                            {"change", rate_entry(ProposalKind::change)}};
  auto out = open_output(fs::path(config.out_dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
  log_info("fit: wrote " + std::to_string(chains.size()) + " chain matrices in " +
           format_double(wall) + " s");
}

void cmd_diagnose(const RunConfig& config) {
  const fs::path dir(config.out_dir);
  const PointSet tests = read_test_points(dir, config.domain);

  std::vector<ChainResult> chains;
  for (int k = 0;; ++k) {
    const fs::path path = dir / ("chain_" + std::to_string(k) + ".csv");
    if (!fs::exists(path)) break;
    chains.push_back(read_chain_matrix_csv(path.string()));
  }
  if (chains.empty()) throw DataError("no chain matrices found under '" + config.out_dir + "'");
  for (const auto& chain : chains) {
    if (chain.test_point_count != tests.size()) {
      throw DataError("chain matrices do not align with test_points.csv");
    }
  }

  std::vector<double> truth;
  const fs::path truth_path = dir / "truth.csv";
  if (fs::exists(truth_path)) {
    const PointSet rows = read_native_points_csv(truth_path.string(), tests.dim + 1);
    if (rows.size() != tests.size()) throw DataError("truth.csv does not align with test points");
    truth.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) truth[i] = rows[i][tests.dim];
  }

  const SummaryResult summary = summarize(chains, truth);

  auto out = open_output(dir / "summary.csv");
  for (int j = 0; j < tests.dim; ++j) out << "x" << (j + 1) << ",";
  out << "mean,median,hdi_low,hdi_high,rhat\n";
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto p = tests[i];
    for (int j = 0; j < tests.dim; ++j) out << format_double(p[j]) << ',';
    const auto& row = summary.rows[i];
    out << format_double(row.mean) << ',' << format_double(row.median) << ','
        << format_double(row.hdi_low) << ',' << format_double(row.hdi_high) << ','
        << format_double(row.rhat) << "\n";
  }

  if (summary.mean_scores.has_value()) {
    auto scores = open_output(dir / "scores.csv");
    scores << "estimator,aae,rmse\n";
    scores << "mean," << format_double(summary.mean_scores->aae) << ','
           << format_double(summary.mean_scores->rmse) << "\n";
    scores << "median," << format_double(summary.median_scores->aae) << ','
           << format_double(summary.median_scores->rmse) << "\n";
    log_info("diagnose: AAE(mean) = " + format_double(summary.mean_scores->aae) +
             ", RMSE(mean) = " + format_double(summary.mean_scores->rmse));
  }
}

void cmd_pipeline(const RunConfig& config) {
  if (!config.scenario.has_value()) throw ConfigError("pipeline requires a scenario");
  cmd_simulate(config);
  RunConfig fit_config = config;
  fit_config.points_path = (fs::path(config.out_dir) / "points.csv").string();
  cmd_fit(fit_config);
  cmd_diagnose(fit_config);
}

}  // namespace bartpp
