// onebit-sim: batch Monte-Carlo runner for 1-bit massive MIMO uplink
// experiments (channel estimation NMSE, uncoded/coded BER, near-far).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "onebit/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_path;
  std::string format = "csv";
  int workers = -1;
  std::string seed;
  bool quiet = false;
};

nlohmann::json load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw onebit::IoError("config file not found: " + path);
  }
  std::ifstream in(path);
  if (!in) throw onebit::IoError("cannot open config file: " + path);
  nlohmann::json config;
  try {
    in >> config;
  } catch (const nlohmann::json::exception& e) {
    throw onebit::ConfigError("config parse error in " + path + ": " +
                              e.what());
  }
  return config;
}

// --set key=value with dotted paths into nested objects; the value is
// parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw onebit::ConfigError("override must look like key=value: " +
                              assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) {
      throw onebit::ConfigError("bad override key: " + path);
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

// Expand optional "estimators"/"detectors" lists into per-combination specs.
std::vector<onebit::ExperimentSpec> expand_specs(nlohmann::json config) {
  std::vector<std::string> estimators;
  std::vector<std::string> detectors;
  if (config.contains("estimators")) {
    estimators = config.at("estimators").get<std::vector<std::string>>();
    config.erase("estimators");
  }
  if (config.contains("detectors")) {
    detectors = config.at("detectors").get<std::vector<std::string>>();
    config.erase("detectors");
  }
  if (estimators.empty()) {
    estimators.push_back(config.value("estimator", "perfect-csi"));
  }
  if (detectors.empty()) {
    detectors.push_back(config.value("detector", "lra-mmse"));
  }
  std::vector<onebit::ExperimentSpec> specs;
  for (const auto& est : estimators) {
    for (const auto& det : detectors) {
      nlohmann::json combo = config;
      combo["estimator"] = est;
      combo["detector"] = det;
      specs.push_back(onebit::spec_from_json(combo));
    }
  }
  return specs;
}

void print_records(const std::vector<onebit::CurveRecord>& records,
                   bool quiet) {
  if (quiet) return;
  for (const auto& r : records) {
    std::printf("%8.2f dB  %-12s %-11s %-9s %.6g +- %.2g  (%ld trials",
                r.point_db, r.metric.c_str(), r.estimator.c_str(),
                r.detector.c_str(), r.value, r.stderr_value, r.trials);
    if (r.user_index >= 0) std::printf(", user %d", r.user_index);
    std::printf(", %.1fs)\n", r.wall_seconds);
  }
}

int run_command(const CliOptions& opts, const std::string& subcommand) {
  nlohmann::json config = load_config(opts.config_path);
  for (const auto& assignment : opts.overrides) {
    apply_override(config, assignment);
  }

  // Subcommand presets; explicit config keys win where they make sense.
  if (subcommand == "estimate-sweep") {
    config["metric"] = "nmse";
  } else if (subcommand == "ber-sweep") {
    config["metric"] = "ber";
    config["coded"] = false;
  } else if (subcommand == "coded-sweep") {
    config["metric"] = "ber";
    config["coded"] = true;
  } else if (subcommand == "near-far") {
    config["metric"] = "ber";
    if (!config.contains("near_far_db")) config["near_far_db"] = 6.0;
  }
  if (opts.workers >= 0) config["workers"] = opts.workers;
  const auto parse_seed = [](const std::string& text) {
    try {
      std::size_t pos = 0;
      const std::uint64_t seed = std::stoull(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      return seed;
    } catch (const std::exception&) {
      throw onebit::ConfigError("bad seed value: " + text);
    }
  };
  if (!opts.seed.empty()) {
    config["base_seed"] = parse_seed(opts.seed);
  } else if (!config.contains("base_seed")) {
    if (const char* env = std::getenv("ONEBIT_MIMO_SEED")) {
      config["base_seed"] = parse_seed(env);
    }
  }

  const std::vector<onebit::ExperimentSpec> specs = expand_specs(config);
  for (const auto& spec : specs) spec.validate();

  if (subcommand == "validate") {
    std::printf("config ok: %zu run(s), %zu sweep point(s)\n", specs.size(),
                specs.front().sweep_db.size());
    for (const auto& spec : specs) {
      std::printf("  estimator=%s detector=%s coded=%d trials=%d\n",
                  onebit::to_string(spec.estimator).c_str(),
                  onebit::to_string(spec.detector).c_str(),
                  spec.coded ? 1 : 0, spec.trials);
      if (spec.estimator == onebit::EstimatorKind::kLraRls) {
        for (std::size_t i = 0; i < spec.sweep_db.size(); ++i) {
          std::printf("    point %g dB: sigma_n^2=%.6g delta=%.6g\n",
                      spec.sweep_db[i],
                      spec.noise_variance_at(spec.sweep_db[i]),
                      spec.delta_at(static_cast<int>(i)));
        }
      }
    }
    return kExitOk;
  }

  std::vector<onebit::CurveRecord> records;
  for (const auto& spec : specs) {
    for (std::size_t i = 0; i < spec.sweep_db.size(); ++i) {
      auto point_records = onebit::run_point(spec, static_cast<int>(i));
      print_records(point_records, opts.quiet);
      records.insert(records.end(), point_records.begin(),
                     point_records.end());
    }
  }

  std::string out = opts.out_path;
  if (out.empty()) {
    out = opts.format == "json" ? "results.json" : "results.csv";
  }
  if (opts.format == "json") {
    onebit::write_json(records, specs.front(), out);
  } else {
    onebit::write_csv(records, out);
  }
  if (!opts.quiet) {
    std::printf("wrote %zu record(s) to %s\n", records.size(), out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "onebit-sim: Monte-Carlo link simulator for multi-user massive MIMO "
      "uplink with 1-bit ADCs.\n"
      "SNR convention: snr = symbol_energy * K / noise_variance per receive "
      "antenna; coded sweeps are over E_b/N_0 = snr / (2 * code_rate)."};
  app.require_subcommand(1);

  CliOptions opts;
  std::string active;
  for (const auto& name :
       {"estimate-sweep", "ber-sweep", "coded-sweep", "near-far", "validate"}) {
    auto* sub = app.add_subcommand(
        name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", opts.config_path, "JSON experiment config")
        ->required();
    sub->add_option("--set", opts.overrides,
                    "config override key=value (repeatable, dotted paths)");
    sub->add_option("--out", opts.out_path, "output file path");
    sub->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", opts.workers, "worker thread cap");
    sub->add_option("--seed", opts.seed,
                    "base seed (fallback: ONEBIT_MIMO_SEED env)");
    sub->add_flag("--quiet", opts.quiet, "suppress per-point summaries");
    sub->callback([&active, name]() { active = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return run_command(opts, active);
  } catch (const onebit::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const onebit::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntime;
  }
}
