// zcsim: command-line front end for the simulator.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "zc/baselines.hpp"
#include "zc/config.hpp"
#include "zc/executor.hpp"
#include "zc/report.hpp"
#include "zc/text.hpp"

namespace {

enum Exit { kOk = 0, kError = 1, kConfig = 2, kInvariant = 3 };

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool verify = false;
};

zc::SimConfig load(const Common& c) {
  zc::SimConfig cfg = c.config.empty() ? zc::default_config() : zc::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.verify) cfg.verify = true;
  zc::validate(cfg);
  return cfg;
}

std::ofstream open(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : zc::split(s, ','))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-streaming camera query simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool out_is_file = false) {
    sub->add_option("--config", common.config, "config file (JSON); defaults apply when omitted");
    sub->add_option("--out", common.out, out_is_file ? "output file" : "output directory");
    sub->add_option("--seed", common.seed, "override the run seed");
    sub->add_flag("--verify", common.verify, "check invariants while simulating");
  };

  auto* gen = app.add_subcommand("gen-trace", "write the configured trace");
  add_common(gen, true);
  auto* run = app.add_subcommand("run", "run one system and write its CSVs");
  add_common(run);
  auto* cmp = app.add_subcommand("compare", "run several systems on the same scenario");
  add_common(cmp);
  std::string systems = "zc2,cloudonly,optop,preindexall";
  cmp->add_option("--systems", systems, "comma-separated systems");
  auto* sw = app.add_subcommand("sweep", "vary one parameter");
  add_common(sw);
  std::string axis, values;
  sw->add_option("--axis", axis, "uplink_bandwidth|camera_compute|landmark_interval|landmark_corruption|alpha|beta")
      ->required();
  sw->add_option("--values", values, "comma-separated values")->required();
  auto* vc = app.add_subcommand("validate-config", "parse and check a config");
  add_common(vc);

  CLI11_PARSE(app, argc, argv);

  try {
    zc::SimConfig cfg = load(common);
    if (*gen) {
      if (common.seed) cfg.trace.synth.seed = *common.seed;
      const zc::Trace trace = zc::materialize_trace(cfg);
      auto f = open(common.out == "out" ? std::filesystem::path("trace.csv") : std::filesystem::path(common.out));
      zc::save_trace(trace, f);
      std::cout << "wrote " << trace.frame_count() << " frames\n";
    } else if (*run) {
      const zc::Trace trace = zc::materialize_trace(cfg);
      const zc::SimResult r = zc::run(cfg, trace);
      zc::write_run_outputs(cfg, trace, r, common.out);
      for (const auto& row : zc::summarize(cfg, trace, r)) std::cout << row.metric << ' ' << row.value << ' ' << row.unit << '\n';
    } else if (*cmp) {
      const zc::Trace trace = zc::materialize_trace(cfg);
      const auto list = split_list(systems);
      for (const auto& s : list)
        if (std::find(zc::known_systems().begin(), zc::known_systems().end(), s) == zc::known_systems().end())
          throw zc::ConfigError("systems: unknown system '" + s + "'");
      const zc::Comparison c = zc::compare(cfg, trace, list);
      const std::filesystem::path dir = common.out;
      {
        auto f = open(dir / "compare.csv");
        zc::write_compare_csv(cfg, c, f);
      }
      {
        auto f = open(dir / "speedup.csv");
        zc::write_speedup_csv(cfg, c, f);
      }
      for (std::size_t i = 0; i < c.results.size(); ++i) {
        zc::SimConfig sc = cfg;
        sc.system = list[i];
        zc::write_run_outputs(sc, trace, c.results[i], dir / list[i]);
      }
      zc::write_speedup_csv(cfg, c, std::cout);
    } else if (*sw) {
      std::vector<double> vals;
      for (const auto& v : split_list(values)) {
        try {
          vals.push_back(std::stod(v));
        } catch (const std::exception&) {
          throw zc::ConfigError("values: not a number '" + v + "'");
        }
      }
      const auto points = zc::sweep(cfg, axis, vals);
      auto f = open(std::filesystem::path(common.out) / "sweep.csv");
      zc::write_sweep_csv(cfg, axis, points, f);
      for (const auto& p : points) {
        std::cout << axis << '=' << zc::format_double(p.value) << ' ' << p.variant;
        for (const auto& [k, v] : p.milestones) std::cout << ' ' << k << '=' << zc::format_double(v);
        std::cout << '\n';
      }
    } else if (*vc) {
      std::cout << "ok config_hash=" << zc::hex64(zc::config_hash(cfg)) << '\n';
    }
  } catch (const zc::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariant;
  } catch (const zc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const zc::PolicyError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kOk;
}
