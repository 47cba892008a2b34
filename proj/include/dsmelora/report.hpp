#pragma once

// Output files of a run: packet trace, summary JSON, TTC CDF, sweep aggregate.
// Times are integer microseconds printed as ms with three decimals.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsmelora/sim.hpp"

namespace dsmelora {

/// %.6g, parsed back so the JSON writer emits exactly those digits.
inline double six_significant(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline constexpr const char* kTraceHeader = "pkt_id,src,dst,gen_time_ms,ttc_ms,status,retries,cell_slot,cell_channel";

inline void write_trace(std::ostream& os, const std::vector<PacketRecord>& records) {
  os << kTraceHeader << '\n';
  for (const auto& r : records) {
    os << r.pkt_id << ',' << r.src << ',' << r.dst << ',' << format_ms(since_origin(r.gen_time)) << ',';
    if (auto t = r.ttc()) os << format_ms(*t);
    os << ',' << to_string(r.status) << ',' << r.retries << ',';
    if (r.cell) os << r.cell->slot_index;
    os << ',';
    if (r.cell) os << r.cell->channel;
    os << '\n';
  }
}

inline nlohmann::ordered_json summary_json(const Summary& s) {
  auto ms = [](const std::optional<Duration>& d) -> nlohmann::ordered_json {
    if (!d) return nullptr;
    return six_significant(to_ms(*d));
  };
  nlohmann::ordered_json j;
  j["generated"] = s.generated;
  j["delivered"] = s.delivered;
  j["drop_queue"] = s.drop_queue;
  j["drop_channel_access"] = s.drop_channel_access;
  j["drop_retry"] = s.drop_retry;
  j["in_flight"] = s.in_flight;
  j["prr"] = six_significant(s.prr);
  j["ttc_p50"] = ms(s.ttc_p50);
  j["ttc_p95"] = ms(s.ttc_p95);
  j["ttc_max"] = ms(s.ttc_max);
  j["t_qo"] = ms(s.t_qo);
  return j;
}

inline void write_summary(std::ostream& os, const Summary& s) { os << summary_json(s).dump(2) << '\n'; }

/// Sorted TTC of delivered packets generated after warmup, with the
/// cumulative fraction of those packets at or below each value.
inline void write_cdf(std::ostream& os, const std::vector<PacketRecord>& records, Duration warmup) {
  std::vector<Duration> ttcs;
  for (const auto& r : records) {
    if (since_origin(r.gen_time) < warmup) continue;
    if (auto t = r.ttc()) ttcs.push_back(*t);
  }
  std::sort(ttcs.begin(), ttcs.end());
  os << "ttc_ms,cumulative_fraction\n";
  const double n = static_cast<double>(ttcs.size());
  for (std::size_t i = 0; i < ttcs.size(); ++i) {
    os << format_ms(ttcs[i]) << ',' << format_g6(static_cast<double>(i + 1) / n) << '\n';
  }
}

inline std::string aggregate_header(const std::string& axis) {
  return axis + ",generated,delivered,drop_queue,drop_channel_access,drop_retry,in_flight,prr,ttc_p50,ttc_p95,ttc_max,t_qo";
}

inline std::string aggregate_row(const std::string& value, const Summary& s) {
  auto ms = [](const std::optional<Duration>& d) { return d ? format_ms(*d) : std::string{}; };
  std::ostringstream os;
  os << value << ',' << s.generated << ',' << s.delivered << ',' << s.drop_queue << ',' << s.drop_channel_access
     << ',' << s.drop_retry << ',' << s.in_flight << ',' << format_g6(s.prr) << ',' << ms(s.ttc_p50) << ','
     << ms(s.ttc_p95) << ',' << ms(s.ttc_max) << ',' << ms(s.t_qo);
  return os.str();
}

inline constexpr const char* kTraceFile = "trace.csv";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kCdfFile = "ttc_cdf.csv";

/// Writes the three per-run files into dir, creating it if needed.
inline void write_run_outputs(const std::filesystem::path& dir, const RunResult& r, Duration warmup) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open(kTraceFile);
    write_trace(os, r.records);
  }
  {
    auto os = open(kSummaryFile);
    write_summary(os, r.summary);
  }
  auto os = open(kCdfFile);
  write_cdf(os, r.records, warmup);
}

// Reading traces back, so that properties can be checked from the file alone.

struct TraceRow {
  std::uint64_t pkt_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Duration gen_time{};
  std::optional<Duration> ttc;
  std::string status;
  int retries = 0;
};

namespace report_detail {
inline Duration parse_ms(const std::string& s) {
  // "<int>.<3 digits>" back to integer microseconds.
  const auto dot = s.find('.');
  if (dot == std::string::npos || s.size() - dot != 4) throw std::runtime_error("bad time field '" + s + "'");
  const bool neg = !s.empty() && s[0] == '-';
  const long long whole = std::stoll(s.substr(neg ? 1 : 0, dot - (neg ? 1 : 0)));
  const long long frac = std::stoll(s.substr(dot + 1));
  const long long us = whole * 1000 + frac;
  return Duration{neg ? -us : us};
}
}  // namespace report_detail

inline std::vector<TraceRow> read_trace(std::istream& is) {
  std::vector<TraceRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw std::runtime_error("trace: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw std::runtime_error("trace: expected 9 fields in '" + line + "'");
    TraceRow r;
    r.pkt_id = std::stoull(f[0]);
    r.src = static_cast<NodeId>(std::stoul(f[1]));
    r.dst = static_cast<NodeId>(std::stoul(f[2]));
    r.gen_time = report_detail::parse_ms(f[3]);
    if (!f[4].empty()) r.ttc = report_detail::parse_ms(f[4]);
    r.status = f[5];
    r.retries = std::stoi(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Summary counts recomputed from trace rows generated at or after warmup.
/// Rows with an unknown status, or whose ttc presence disagrees with the
/// status, are counted in `inconsistent` and nowhere else.
struct TraceCounts {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t drop_queue = 0;
  std::uint64_t drop_channel_access = 0;
  std::uint64_t drop_retry = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t inconsistent = 0;

  bool conserved() const {
    return inconsistent == 0 &&
           generated == delivered + drop_queue + drop_channel_access + drop_retry + in_flight;
  }
};

inline TraceCounts count_trace(const std::vector<TraceRow>& rows, Duration warmup) {
  TraceCounts c;
  for (const auto& r : rows) {
    if (r.gen_time < warmup) continue;
    ++c.generated;
    const bool delivered = r.status == "Delivered";
    if (delivered != r.ttc.has_value()) {
      ++c.inconsistent;
      continue;
    }
    if (delivered) ++c.delivered;
    else if (r.status == "DropQueue") ++c.drop_queue;
    else if (r.status == "DropChannelAccess") ++c.drop_channel_access;
    else if (r.status == "DropRetry") ++c.drop_retry;
    else if (r.status == "InFlightAtEnd") ++c.in_flight;
    else ++c.inconsistent;
  }
  return c;
}

}  // namespace dsmelora
