#pragma once

// Flat `key = value` run configuration. Every scenario, calendar, PHY and
// CSMA parameter has a key; `#` starts a comment.

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dsmelora/calendar.hpp"
#include "dsmelora/error.hpp"
#include "dsmelora/mac.hpp"
#include "dsmelora/phy.hpp"
#include "dsmelora/sim.hpp"

namespace dsmelora {

struct RunConfig {
  Scenario scenario;
  MacConfig mac;
  PhyConfig phy;
  CsmaParams csma;
  std::string out_dir = "out";
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(Errc::InvalidConfig, key + ": cannot parse '" + value + "' as " + what);
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, v, "integer");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, v, "unsigned integer");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "number");
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (errno != 0 || end != v.c_str() + v.size()) bad_value(key, v, "number");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "boolean");
}

inline int parse_small(const std::string& key, const std::string& v) {
  const auto i = parse_int(key, v);
  if (i < -1'000'000'000 || i > 1'000'000'000) bad_value(key, v, "integer in range");
  return static_cast<int>(i);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto int_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_small(k, v); };
    };
    auto seconds_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) {
        member(c) = from_seconds(parse_double(k, v));
      };
    };

    // Scenario
    t["mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "cap") c.scenario.mode = Mode::Cap;
      else if (v == "cfp") c.scenario.mode = Mode::Cfp;
      else bad_value(k, v, "cap|cfp");
    };
    int_key("sensors", [](RunConfig& c) -> int& { return c.scenario.n_sensors; });
    int_key("actuators", [](RunConfig& c) -> int& { return c.scenario.n_actuators; });
    seconds_key("tx_interval_mean_s", [](RunConfig& c) -> Duration& { return c.scenario.tx_interval_mean; });
    int_key("payload_bytes", [](RunConfig& c) -> int& { return c.scenario.payload_bytes; });
    seconds_key("duration_s", [](RunConfig& c) -> Duration& { return c.scenario.duration; });
    seconds_key("warmup_s", [](RunConfig& c) -> Duration& { return c.scenario.warmup; });
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.seed = parse_uint(k, v); };
    t["arrivals"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "exponential") c.scenario.arrivals = ArrivalProcess::Exponential;
      else if (v == "periodic") c.scenario.arrivals = ArrivalProcess::Periodic;
      else bad_value(k, v, "exponential|periodic");
    };
    t["destination"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "fixed") c.scenario.destination = DestinationPolicy::Fixed;
      else if (v == "round_robin") c.scenario.destination = DestinationPolicy::RoundRobin;
      else bad_value(k, v, "fixed|round_robin");
    };

    // Calendar and MAC
    int_key("superframe_order", [](RunConfig& c) -> int& { return c.mac.superframe_order; });
    int_key("multisuperframe_order", [](RunConfig& c) -> int& { return c.mac.multisuperframe_order; });
    int_key("beacon_order", [](RunConfig& c) -> int& { return c.mac.beacon_order; });
    int_key("slots_per_superframe", [](RunConfig& c) -> int& { return c.mac.slots_per_superframe; });
    int_key("base_slot_symbols", [](RunConfig& c) -> int& { return c.mac.base_slot_symbols; });
    int_key("cap_slots", [](RunConfig& c) -> int& { return c.mac.cap_slots; });
    int_key("cfp_slots", [](RunConfig& c) -> int& { return c.mac.cfp_slots; });
    int_key("queue_capacity", [](RunConfig& c) -> int& { return c.mac.queue_capacity; });
    int_key("mac_overhead_bytes", [](RunConfig& c) -> int& { return c.mac.mac_overhead_bytes; });
    int_key("ack_turnaround_symbols", [](RunConfig& c) -> int& { return c.mac.ack_turnaround_symbols; });
    int_key("beacon_bytes", [](RunConfig& c) -> int& { return c.mac.beacon_bytes; });
    t["drift_ppm"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.mac.drift_ppm = parse_double(k, v); };

    // PHY
    int_key("spreading_factor", [](RunConfig& c) -> int& { return c.phy.spreading_factor; });
    int_key("bandwidth_hz", [](RunConfig& c) -> int& { return c.phy.bandwidth_hz; });
    int_key("coding_rate", [](RunConfig& c) -> int& { return c.phy.coding_rate; });
    int_key("preamble_symbols", [](RunConfig& c) -> int& { return c.phy.preamble_symbols; });
    t["explicit_header"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.phy.explicit_header = parse_bool(k, v); };
    t["low_datarate_optimize"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.phy.low_datarate_optimize = parse_bool(k, v);
    };
    int_key("channel_count", [](RunConfig& c) -> int& { return c.phy.channel_count; });
    t["cca_false_clear_prob"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.phy.cca_false_clear_prob = parse_double(k, v);
    };

    // CSMA
    int_key("min_be", [](RunConfig& c) -> int& { return c.csma.min_be; });
    int_key("max_be", [](RunConfig& c) -> int& { return c.csma.max_be; });
    int_key("max_csma_backoffs", [](RunConfig& c) -> int& { return c.csma.max_csma_backoffs; });
    int_key("max_frame_retries", [](RunConfig& c) -> int& { return c.csma.max_frame_retries; });
    int_key("backoff_period_symbols", [](RunConfig& c) -> int& { return c.csma.backoff_period_symbols; });
    int_key("contention_window", [](RunConfig& c) -> int& { return c.csma.contention_window; });

    // Output
    t["out_dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Keys without a default; a configuration must set them.
inline const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"mode", "sensors", "tx_interval_mean_s"};
  return keys;
}

/// Keys that `sweep` may vary.
inline bool is_sweepable(std::string_view key) {
  return key == "sensors" || key == "tx_interval_mean_s" || key == "seed";
}

/// Accumulates key/value assignments and produces a validated RunConfig.
class ConfigBuilder {
 public:
  void set(const std::string& raw_key, const std::string& raw_value) {
    const std::string key = config_detail::trim(raw_key);
    const std::string value = config_detail::trim(raw_value);
    const auto& table = config_detail::setters();
    auto it = table.find(key);
    if (it == table.end()) throw Error(Errc::InvalidConfig, key + ": unknown key");
    it->second(cfg_, key, value);
    seen_.insert(key);
  }

  /// Parses `key=value` (used for --set overrides).
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidConfig, std::string(assignment) + ": expected key=value");
    }
    set(std::string(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
  }

  void parse(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = config_detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
      }
      set(t.substr(0, eq), t.substr(eq + 1));
    }
  }

  void parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidConfig, path + ": cannot read config file");
    parse(in);
  }

  bool has(std::string_view key) const { return seen_.count(std::string(key)) != 0; }

  /// Checks required keys and all parameter ranges.
  RunConfig build() const {
    for (const auto& k : required_keys()) {
      if (!has(k)) throw Error(Errc::InvalidConfig, k + ": required key missing");
    }
    RunConfig c = cfg_;
    c.mac.symbol_time = c.phy.symbol_time();
    c.phy.validate();
    c.mac.validate();
    c.csma.validate();
    if (c.scenario.n_sensors < 0) throw Error(Errc::InvalidConfig, "sensors: must be non-negative");
    c.scenario.validate();
    return c;
  }

 private:
  RunConfig cfg_;
  std::set<std::string> seen_;
};

}  // namespace dsmelora
