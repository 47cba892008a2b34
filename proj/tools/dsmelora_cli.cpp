// dsmelora: run DSME-over-LoRa scenarios, parameter sweeps, heap estimates.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dsmelora/config.hpp"
#include "dsmelora/memmodel.hpp"
#include "dsmelora/report.hpp"
#include "dsmelora/sim.hpp"

namespace fs = std::filesystem;
using namespace dsmelora;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kInfeasible = 2;

int exit_code_for(const Error& e) { return e.infeasible() ? kInfeasible : kInvalid; }

ConfigBuilder load(const std::string& config_path, const std::vector<std::string>& sets) {
  ConfigBuilder b;
  if (!config_path.empty()) b.parse_file(config_path);
  for (const auto& s : sets) b.set_assignment(s);
  return b;
}

RunResult run_config(const RunConfig& c) { return run(c.scenario, c.mac, c.phy, c.csma); }

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out) {
  try {
    RunConfig c = load(config_path, sets).build();
    const fs::path dir = out.empty() ? fs::path(c.out_dir) : fs::path(out);
    const RunResult r = run_config(c);
    write_run_outputs(dir, r, c.scenario.warmup);
    std::cout << "generated=" << r.summary.generated << " delivered=" << r.summary.delivered
              << " prr=" << format_g6(r.summary.prr) << " -> " << dir.string() << '\n';
    return kOk;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  }
}

// "5,10,15" or "1..10" (inclusive integer range).
std::vector<std::string> expand_values(const std::string& spec) {
  std::vector<std::string> out;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    long long lo = 0, hi = 0;
    const std::string a = spec.substr(0, dots), b = spec.substr(dots + 2);
    auto ok = [](const std::string& s, long long& v) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc{} && p == s.data() + s.size();
    };
    if (!ok(a, lo) || !ok(b, hi)) throw Error(Errc::InvalidConfig, "values: bad range '" + spec + "'");
    for (long long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out,
              const std::string& axis, const std::string& values_spec, unsigned jobs) {
  std::vector<RunConfig> configs;
  std::vector<std::string> values;
  fs::path root;
  try {
    if (!is_sweepable(axis)) throw Error(Errc::InvalidConfig, axis + ": not a sweepable key");
    values = expand_values(values_spec);
    if (values.empty()) throw Error(Errc::InvalidConfig, "values: empty list");
    const ConfigBuilder base = load(config_path, sets);
    for (const auto& v : values) {
      ConfigBuilder b = base;
      b.set(axis, v);
      configs.push_back(b.build());
    }
    root = out.empty() ? fs::path(configs.front().out_dir) : fs::path(out);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  }

  // One engine per run; each run writes only into its own directory.
  std::vector<std::optional<Summary>> summaries(configs.size());
  std::vector<std::string> errors(configs.size());
  std::vector<int> codes(configs.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const RunResult r = run_config(configs[i]);
        write_run_outputs(root / (axis + "_" + values[i]), r, configs[i].scenario.warmup);
        summaries[i] = r.summary;
      } catch (const Error& e) {
        errors[i] = e.what();
        codes[i] = exit_code_for(e);
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(configs.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int code = kOk;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (codes[i] != kOk) {
      std::cerr << axis << "=" << values[i] << ": " << errors[i] << '\n';
      code = std::max(code, codes[i]);
    }
  }
  if (code != kOk) return code;

  fs::create_directories(root);
  std::ofstream agg(root / "aggregate.csv", std::ios::binary);
  agg << aggregate_header(axis) << '\n';
  for (std::size_t i = 0; i < configs.size(); ++i) agg << aggregate_row(values[i], *summaries[i]) << '\n';
  std::cout << configs.size() << " runs -> " << (root / "aggregate.csv").string() << '\n';
  return kOk;
}

// Frame sizes are "25" or "25x5" (five frames of 25 B).
int cmd_heap(const std::vector<std::string>& args) {
  auto parse = [](const std::string& s, long long& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (args.size() < 2) {
    std::cerr << "heap: expected N_GTS N_NEIGHBOURS [SIZE[xCOUNT]...]\n";
    return kInvalid;
  }
  long long gts = 0, neigh = 0;
  if (!parse(args[0], gts) || !parse(args[1], neigh) || gts < 0 || neigh < 0) {
    std::cerr << "heap: counts must be non-negative integers\n";
    return kInvalid;
  }
  std::vector<int> sizes;
  for (std::size_t i = 2; i < args.size(); ++i) {
    const auto& a = args[i];
    const auto x = a.find('x');
    long long size = 0, count = 1;
    if (!parse(a.substr(0, x), size) || (x != std::string::npos && !parse(a.substr(x + 1), count)) || size < 0 ||
        count < 0) {
      std::cerr << "heap: bad frame size '" << a << "'\n";
      return kInvalid;
    }
    sizes.insert(sizes.end(), static_cast<std::size_t>(count), static_cast<int>(size));
  }
  const HeapUsage u = heap_usage(gts, neigh, sizes);
  std::cout << "slots=" << u.slots << " packets=" << u.packets << " total=" << u.total() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSME over LoRa MAC simulator"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "Run one scenario");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one scenario per value of a key");
  for (auto* c : {run_cmd, sweep_cmd}) {
    c->add_option("--config", config_path, "Config file (key = value)");
    c->add_option("--set", sets, "Override key=value (repeatable)")->allow_extra_args(false);
    c->add_option("--out", out, "Output directory");
  }
  std::string axis, values;
  unsigned jobs = 0;
  sweep_cmd->add_option("--axis", axis, "sensors | tx_interval_mean_s | seed")->required();
  sweep_cmd->add_option("--values", values, "Comma list or a..b")->required();
  sweep_cmd->add_option("--jobs", jobs, "Parallel runs (0 = all cores)");

  std::vector<std::string> heap_args;
  auto* heap_cmd = app.add_subcommand("heap", "Heap usage of GTS, neighbour and packet objects");
  heap_cmd->add_option("args", heap_args, "N_GTS N_NEIGHBOURS [SIZE[xCOUNT]...]")->allow_extra_args();
  heap_cmd->prefix_command(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, sets, out);
    if (*sweep_cmd) return cmd_sweep(config_path, sets, out, axis, values, jobs);
    if (*heap_cmd) return cmd_heap(heap_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}
