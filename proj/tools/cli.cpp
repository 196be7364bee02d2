#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "fluxfilter/config.hpp"
#include "fluxfilter/errors.hpp"
#include "fluxfilter/experiments.hpp"
#include "fluxfilter/io.hpp"
#include "json.hpp"

namespace fluxfilter::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 0;
  std::string kernel;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RunConfig load(const Common& common) {
  RunConfig config = common.config_path.empty() ? default_config() : load_config(common.config_path);
  if (common.seed_opt && common.seed_opt->count()) config.seed = common.seed;
  if (common.workers_opt && common.workers_opt->count()) config.workers = common.workers;
  if (!common.out.empty()) config.output = common.out;
  if (!common.kernel.empty()) config.kernel.kind = parse_kernel_kind(common.kernel);
  config.validate();
  return config;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

CsvTag tag_for(const RunConfig& config, std::vector<std::pair<std::string, std::string>> extra = {}) {
  return {config_hash(config), config.seed, std::move(extra)};
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string shortest(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

int cmd_twin(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const TwinDataset twin = make_twin(config);
  const double generate_s = seconds_since(start);

  const fs::path dir = prepare_dir(config.output);
  const CsvTag tag = tag_for(config, {{"twin_hash", twin_hash(config)}});
  write_measurements(dir / "measurements.csv", tag, twin.measurements);
  write_flux_series(dir / "truth_flux.csv", tag, twin.truth.flux);
  write_sensor_series(dir / "truth_sensors.csv", tag, twin.truth.times,
                      twin.truth.sensor_temperatures);
  save_config(config, dir / "config.ini");

  Manifest m;
  m.command = "twin";
  m.config_hash = config_hash(config);
  m.twin_hash = twin_hash(config);
  m.seed = config.seed;
  m.files = {"measurements.csv", "truth_flux.csv", "truth_sensors.csv", "config.ini"};
  m.versions = version_info();
  m.timings = {{"generate", generate_s}, {"total", seconds_since(start)}};
  write_manifest(dir / "manifest.json", m);

  out << "twin: " << twin.measurements.size() << " measurement batches written to "
      << dir.string() << " (twin_hash " << m.twin_hash << ")\n";
  return kOk;
}

TwinDataset load_twin(const RunConfig& config, const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw ConfigError("twin directory " + dir.string() + " has no manifest.json");
  }
  const Manifest m = read_manifest(manifest_path);
  const std::string expected = twin_hash(config);
  if (m.twin_hash != expected) {
    throw ConfigError("twin hash mismatch: " + dir.string() + " holds twin " + m.twin_hash +
                      " but the configuration expects " + expected +
                      "; regenerate it with `fluxfilter twin`");
  }
  TwinDataset twin;
  twin.measurements = read_measurements(dir / "measurements.csv");
  twin.truth.flux = read_flux_series(dir / "truth_flux.csv");
  read_sensor_series(dir / "truth_sensors.csv", twin.truth.times, twin.truth.sensor_temperatures);
  if (twin.truth.flux.size() != twin.truth.times.size()) {
    throw ConfigError("truth_flux.csv and truth_sensors.csv cover different instants");
  }
  for (std::size_t t = 0; t < twin.truth.times.size(); ++t) {
    if (twin.truth.flux[t].time != twin.truth.times[t]) {
      throw ConfigError("truth_flux.csv and truth_sensors.csv disagree on time stamps");
    }
  }
  return twin;
}

int cmd_assimilate(const RunConfig& config, const std::string& twin_dir, bool open_loop,
                   std::ostream& out) {
  const auto start = Clock::now();
  const TwinDataset twin = load_twin(config, twin_dir);
  const double load_s = seconds_since(start);

  const auto t_run = Clock::now();
  const Scenario scenario = build_scenario(config);
  const AssimilationSetup setup = make_setup(config, scenario, !open_loop);
  const AssimilationResult result =
      run_assimilation(scenario.model, scenario.basis, setup, twin.measurements);
  const double run_s = seconds_since(t_run);

  const ErrorReport report = score(config, scenario.basis, result, twin.truth);
  const CoverageReport coverage =
      coverage_report(result, twin.truth, scenario.probe_sensor, scenario.probes.flux_face);

  const fs::path dir = prepare_dir(config.output);
  const std::string hash = config_hash(config);
  const std::string mode = open_loop ? "open_loop" : "assimilate";
  const CsvTag tag = tag_for(config, {{"mode", mode}, {"error_norm", to_string(config.error_norm)}});
  auto name = [&](const std::string& stem, const char* ext) { return stem + "_" + hash + ext; };
  std::vector<std::string> files;

  {
    const auto estimate = estimated_flux(scenario.basis, result, twin.truth.times);
    write_flux_series(dir / name("posterior_flux", ".csv"), tag, estimate, "flux_mean");
    files.push_back(name("posterior_flux", ".csv"));
  }
  {
    CsvWriter csv(tag, {"time", "weight_id", "mean", "p05", "p95"});
    for (const auto& s : result.steps) {
      for (Eigen::Index j = 0; j < s.weight_mean.size(); ++j) {
        csv.row({format_number(s.time), std::to_string(j), format_number(s.weight_mean[j]),
                 format_number(s.weight_p05[j]), format_number(s.weight_p95[j])});
      }
    }
    csv.save(dir / name("posterior_weights", ".csv"));
    files.push_back(name("posterior_weights", ".csv"));
  }
  {
    CsvWriter csv(tag, {"time", "cell_id", "temperature_mean"});
    for (const auto& s : result.posterior_states) {
      const std::string t = format_number(s.time);
      for (Eigen::Index c = 0; c < s.values.size(); ++c) {
        csv.row({t, std::to_string(c), format_number(s.values[c])});
      }
    }
    csv.save(dir / name("posterior_temperature", ".csv"));
    files.push_back(name("posterior_temperature", ".csv"));
  }
  {
    CsvWriter csv(tag, {"time", "updated", "temperature_mean", "temperature_p05",
                        "temperature_p95", "flux_mean", "flux_p05", "flux_p95", "total_flux_mean",
                        "total_flux_p05", "total_flux_p95", "condition_number", "gain_residual"});
    for (const auto& s : result.steps) {
      csv.row({s.time, s.updated ? 1.0 : 0.0, s.probe_temperature.mean, s.probe_temperature.p05,
               s.probe_temperature.p95, s.probe_flux.mean, s.probe_flux.p05, s.probe_flux.p95,
               s.total_flux.mean, s.total_flux.p05, s.total_flux.p95, s.condition_number,
               s.gain_residual});
    }
    csv.save(dir / name("probes", ".csv"));
    files.push_back(name("probes", ".csv"));
  }
  {
    const auto totals = total_flux_series(scenario.grid, twin.truth.flux);
    CsvWriter csv(tag, {"time", "temperature", "flux", "total_flux"});
    const auto face = static_cast<Eigen::Index>(scenario.probes.flux_face);
    for (std::size_t t = 0; t < twin.truth.times.size(); ++t) {
      csv.row({twin.truth.times[t], twin.truth.sensor_temperatures[t][scenario.probe_sensor],
               twin.truth.flux[t].values[face], totals[t]});
    }
    csv.save(dir / name("truth_probes", ".csv"));
    files.push_back(name("truth_probes", ".csv"));
  }
  {
    CsvWriter csv(tag, {"time", "relative_error"});
    for (std::size_t t = 0; t < report.times.size(); ++t) {
      csv.row({report.times[t], report.per_time_errors[t]});
    }
    csv.save(dir / name("errors", ".csv"));
    files.push_back(name("errors", ".csv"));
  }
  {
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["seed"] = config.seed;
    j["mode"] = mode;
    j["error_norm"] = to_string(report.norm);
    j["spatiotemporal_error"] = report.spatiotemporal_error;
    j["coverage"] = {{"temperature_probe", coverage.temperature},
                     {"flux_probe", coverage.flux},
                     {"instants", coverage.instants}};
    j["max_condition"] = report.max_condition;
    j["mean_condition"] = report.mean_condition;
    j["max_gain_residual"] = report.max_gain_residual;
    j["projection_residual"] = scenario.projection_residual;
    j["config"] = report.config_snapshot;
    write_text(dir / name("error_report", ".json"), j.dump(2) + "\n");
    files.push_back(name("error_report", ".json"));
  }
  save_config(config, dir / "config.ini");
  files.push_back("config.ini");

  Manifest m;
  m.command = open_loop ? "assimilate --open-loop" : "assimilate";
  m.config_hash = hash;
  m.twin_hash = twin_hash(config);
  m.seed = config.seed;
  m.files = files;
  m.versions = version_info();
  m.timings = {{"load_twin", load_s}, {"assimilate", run_s}, {"total", seconds_since(start)}};
  write_manifest(dir / "manifest.json", m);

  out << mode << ": spatiotemporal error " << fixed(100.0 * report.spatiotemporal_error, 2)
      << "% (" << to_string(report.norm) << "), temperature-probe coverage "
      << fixed(coverage.temperature, 3) << ", max cond(P^y) " << shortest(report.max_condition)
      << ", written to " << dir.string() << "\n";
  return kOk;
}

int cmd_sweep(RunConfig config, const std::string& param, const std::string& values,
              std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  if (!param.empty()) config.sweep_parameter = param;
  if (!values.empty()) {
    config.sweep_values.clear();
    std::stringstream in(values);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        std::size_t used = 0;
        config.sweep_values.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      } catch (const std::logic_error&) {
        throw ConfigError("--values: '" + item + "' is not a number");
      }
    }
  }
  if (config.sweep_parameter.empty()) throw ConfigError("sweep needs --param or sweep.parameter");
  if (config.sweep_values.empty()) throw ConfigError("sweep needs --values or sweep.values");
  config.validate();

  SweepSpec spec{config.sweep_parameter, config.sweep_values, config};
  const auto points = run_sweep(spec);

  const fs::path dir = prepare_dir(config.output);
  const std::string hash = config_hash(config);
  const std::string stem = "sweep_" + spec.parameter + "_" + hash;
  const CsvTag tag = tag_for(config, {{"parameter", spec.parameter},
                                      {"error_norm", to_string(config.error_norm)}});
  CsvWriter csv(tag, {"value", "spatiotemporal_error", "max_condition", "mean_condition",
                      "max_gain_residual", "status"});
  nlohmann::ordered_json j;
  j["config_hash"] = hash;
  j["seed"] = config.seed;
  j["parameter"] = spec.parameter;
  j["points"] = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& p : points) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto& r = p.report;
    csv.row({format_number(p.value), format_number(p.ok ? r.spatiotemporal_error : nan),
             format_number(p.ok ? r.max_condition : nan), format_number(p.ok ? r.mean_condition : nan),
             format_number(p.ok ? r.max_gain_residual : nan), p.ok ? "ok" : "failed"});
    nlohmann::ordered_json point;
    point["value"] = p.value;
    point["ok"] = p.ok;
    if (p.ok) {
      point["spatiotemporal_error"] = r.spatiotemporal_error;
      point["max_condition"] = r.max_condition;
      point["config_hash"] = r.config_hash;
    } else {
      point["failure"] = p.failure;
      ++failed;
      err << "sweep: " << spec.parameter << "=" << shortest(p.value) << " failed: " << p.failure
          << "\n";
    }
    j["points"].push_back(point);
  }
  csv.save(dir / (stem + ".csv"));
  write_text(dir / (stem + ".json"), j.dump(2) + "\n");
  save_config(config, dir / "config.ini");

  Manifest m;
  m.command = "sweep";
  m.config_hash = hash;
  m.twin_hash = twin_hash(config);
  m.seed = config.seed;
  m.files = {stem + ".csv", stem + ".json", "config.ini"};
  m.versions = version_info();
  m.timings = {{"total", seconds_since(start)}};
  write_manifest(dir / "manifest.json", m);

  out << "sweep " << spec.parameter << ": " << points.size() - failed << "/" << points.size()
      << " points completed, written to " << (dir / (stem + ".csv")).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

std::string table3_header() {
  return "| kernel | S_n | eta | kappa | shift | dt (s) | obs span (s) | error (%) |\n"
         "|---|---|---|---|---|---|---|---|\n";
}

std::string table3_row(const RunConfig& c, const std::string& error) {
  return "| " + to_string(c.kernel.kind) + " | " + std::to_string(c.ensemble_size) + " | " +
         shortest(c.kernel.eta) + " | " + shortest(c.kappa) + " | " + shortest(c.shift) + " | " +
         shortest(c.dt) + " | " + shortest(c.obs_span) + " | " + error + " |\n";
}

/// Joins the per-step probe series with the truth at the truth instants.
void write_figure(const fs::path& path, const CsvTable& probes, const CsvTable& truth,
                  const std::string& quantity, const std::string& truth_column, const CsvTag& tag) {
  CsvWriter csv(tag, {"time", "mean", "p05", "p95", "truth"});
  std::size_t p = 0;
  for (std::size_t t = 0; t < truth.rows.size(); ++t) {
    const double time = truth.number(t, "time");
    while (p < probes.rows.size() && probes.number(p, "time") < time - 1e-9) ++p;
    if (p == probes.rows.size() || std::abs(probes.number(p, "time") - time) > 1e-9) {
      throw ConfigError("probe series has no entry at t=" + format_number(time));
    }
    csv.row({time, probes.number(p, quantity + "_mean"), probes.number(p, quantity + "_p05"),
             probes.number(p, quantity + "_p95"), truth.number(t, truth_column)});
  }
  csv.save(path);
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw ConfigError("run directory " + run_dir + " does not exist");
  if (!fs::exists(dir / "manifest.json")) {
    throw ConfigError("run directory " + run_dir + " has no manifest.json; nothing to report");
  }
  const Manifest m = read_manifest(dir / "manifest.json");
  for (const auto& f : m.files) {
    if (!fs::exists(dir / f)) throw ConfigError("manifest lists missing file " + (dir / f).string());
  }
  const RunConfig config = load_config(dir / "config.ini");
  const CsvTag tag{m.config_hash, m.seed, {}};

  std::string md = "# fluxfilter run summary\n\n";
  md += "- command: " + m.command + "\n";
  md += "- config_hash: " + m.config_hash + "\n";
  md += "- twin_hash: " + m.twin_hash + "\n";
  md += "- seed: " + std::to_string(m.seed) + "\n";
  md += "- error norm: " + to_string(config.error_norm) + "\n\n";
  std::vector<std::string> written = {"summary.md"};

  if (m.command.rfind("assimilate", 0) == 0) {
    const std::string h = m.config_hash;
    const auto report = nlohmann::json::parse(read_text(dir / ("error_report_" + h + ".json")));
    const double error = report.at("spatiotemporal_error").get<double>();
    md += table3_header() + table3_row(config, fixed(100.0 * error, 2)) + "\n";
    md += "- mode: " + report.at("mode").get<std::string>() + "\n";
    md += "- temperature probe 5-95% coverage: " +
          fixed(report.at("coverage").at("temperature_probe").get<double>(), 3) + "\n";
    md += "- flux probe 5-95% coverage: " +
          fixed(report.at("coverage").at("flux_probe").get<double>(), 3) + "\n";
    md += "- max cond(P^y): " + shortest(report.at("max_condition").get<double>()) + "\n";
    md += "- max gain residual: " + shortest(report.at("max_gain_residual").get<double>()) + "\n";

    const CsvTable probes = read_csv_table(dir / ("probes_" + h + ".csv"));
    const CsvTable truth = read_csv_table(dir / ("truth_probes_" + h + ".csv"));
    const std::vector<std::tuple<std::string, std::string, std::string>> figures = {
        {"fig_probe_temperature_" + h + ".csv", "temperature", "temperature"},
        {"fig_probe_flux_" + h + ".csv", "flux", "flux"},
        {"fig_total_flux_" + h + ".csv", "total_flux", "total_flux"},
    };
    for (const auto& [file, quantity, column] : figures) {
      write_figure(dir / file, probes, truth, quantity, column, tag);
      written.push_back(file);
    }
  } else if (m.command == "sweep") {
    const auto csv_name = std::find_if(m.files.begin(), m.files.end(), [](const std::string& f) {
      return f.rfind("sweep_", 0) == 0 && f.ends_with(".csv");
    });
    if (csv_name == m.files.end()) throw ConfigError("sweep manifest lists no sweep CSV");
    const CsvTable sweep = read_csv_table(dir / *csv_name);
    const std::string param = sweep.tag.count("parameter") ? sweep.tag.at("parameter") : "";
    md += "Sweep over `" + param + "`.\n\n" + table3_header();
    for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
      const double value = sweep.number(r, "value");
      const bool ok = sweep.rows[r][sweep.column("status")] == "ok";
      RunConfig point = config;
      try {
        point = with_parameter(config, param, value);
      } catch (const ConfigError&) {
      }
      md += table3_row(point, ok ? fixed(100.0 * sweep.number(r, "spatiotemporal_error"), 2)
                                 : std::string("failed"));
    }
  } else if (m.command == "twin") {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> temps;
    read_sensor_series(dir / "truth_sensors.csv", times, temps);
    md += "Twin dataset: " + std::to_string(times.size()) + " measurement batches of " +
          std::to_string(temps.empty() ? 0 : temps.front().size()) + " sensors.\n";
  } else {
    throw ConfigError("unknown command '" + m.command + "' in manifest");
  }

  write_text(dir / "summary.md", md);
  out << "report: wrote";
  for (const auto& f : written) out << " " << f;
  out << " in " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble estimation of the hot-face heat flux of a continuous-casting mold", "fluxfilter"};
  app.fallthrough();
  app.require_subcommand(1);

  Common common;
  app.add_option("--config", common.config_path, "Configuration file")->check(CLI::ExistingFile);
  common.seed_opt = app.add_option("--seed", common.seed, "Override run.seed");
  app.add_option("--out", common.out, "Output directory (overrides run.output)");
  common.workers_opt =
      app.add_option("--workers", common.workers, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_option("--kernel", common.kernel, "Override rbf.kernel")
      ->check(CLI::IsMember({"gaussian", "multiquadric"}, CLI::ignore_case));

  auto* twin = app.add_subcommand("twin", "Generate the synthetic twin dataset");
  auto* assimilate = app.add_subcommand("assimilate", "Estimate the flux from a twin dataset");
  std::string twin_dir;
  bool open_loop = false;
  assimilate->add_option("--twin", twin_dir, "Twin directory written by `twin`")->required();
  assimilate->add_flag("--open-loop", open_loop, "Forecast only, ignore the measurements");
  auto* sweep = app.add_subcommand("sweep", "One-parameter sweep");
  std::string param, values;
  sweep->add_option("--param", param, "ensemble_size | eta | kappa | shift | dt | obs_span");
  sweep->add_option("--values", values, "Comma-separated values");
  auto* report = app.add_subcommand("report", "Summarise a finished run directory");
  std::string run_dir;
  report->add_option("--run", run_dir, "Run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (report->parsed()) return cmd_report(run_dir, out);
    const RunConfig config = load(common);
    if (twin->parsed()) return cmd_twin(config, out);
    if (assimilate->parsed()) return cmd_assimilate(config, twin_dir, open_loop, out);
    if (sweep->parsed()) return cmd_sweep(config, param, values, out, err);
  } catch (const ConfigError& e) {
    err << "fluxfilter: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "fluxfilter: numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "fluxfilter: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace fluxfilter::cli
