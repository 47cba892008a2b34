#include <gtest/gtest.h>

#include "cli_support.hpp"
#include "dsmelora/report.hpp"

namespace fs = std::filesystem;

namespace {

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

const char* kStressedCfp = "# stressed CFP\nmode = cfp\nsensors = 15\ntx_interval_mean_s = 5\nduration_s = 600\n";

}  // namespace

TEST(CliRun, WritesThreeFiles) {
  const fs::path dir = scratch("run_stressed");
  const auto cfg = write_config(dir, kStressedCfp);
  const CliResult r = run_cli({"run", "--config", cfg.string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 0) << r.output;
  for (const char* f : {dsmelora::kTraceFile, dsmelora::kSummaryFile, dsmelora::kCdfFile})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / dsmelora::kSummaryFile));
  EXPECT_TRUE(summary.contains("prr"));
  EXPECT_TRUE(summary.contains("t_qo"));
}

TEST(CliRun, OutDirFromConfigKey) {
  const fs::path dir = scratch("run_out_key");
  const auto cfg = write_config(dir, std::string(kStressedCfp) + "out_dir = " + (dir / "via_key").string() + "\n");
  EXPECT_EQ(run_cli({"run", "--config", cfg.string()}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "via_key" / dsmelora::kTraceFile));
}

TEST(CliRun, CapacityExceededExitsTwo) {
  const fs::path dir = scratch("run_capacity");
  const auto cfg = write_config(dir, kStressedCfp);
  const CliResult r = run_cli({"run", "--config", cfg.string(), "--set", "sensors=38", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("CapacityExceeded: 114 > 112"), std::string::npos) << r.output;
}

TEST(CliRun, SlotTooShortExitsTwo) {
  const fs::path dir = scratch("run_slot");
  const CliResult r = run_cli({"run", "--set", "mode=cfp", "--set", "sensors=1", "--set", "tx_interval_mean_s=5",
                               "--set", "superframe_order=0", "--set", "multisuperframe_order=0", "--set",
                               "beacon_order=0", "--set", "spreading_factor=12", "--set", "payload_bytes=200",
                               "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("SlotTooShort"), std::string::npos) << r.output;
}

TEST(CliRun, UnknownKeyExitsOne) {
  const fs::path dir = scratch("run_unknown");
  const auto cfg = write_config(dir, std::string(kStressedCfp) + "snr_model = friis\n");
  const CliResult r = run_cli({"run", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("snr_model"), std::string::npos);
}

TEST(CliRun, MissingConfigFileExitsOne) {
  EXPECT_EQ(run_cli({"run", "--config", "/nonexistent/x.cfg"}).code, 1);
}

TEST(CliSweep, ThreeSensorCounts) {
  const fs::path dir = scratch("sweep_sensors");
  const auto cfg = write_config(dir, "mode = cap\nsensors = 1\ntx_interval_mean_s = 5\nduration_s = 300\n");
  const CliResult r = run_cli({"sweep", "--config", cfg.string(), "--axis", "sensors", "--values", "5,10,15", "--out",
                               (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* v : {"sensors_5", "sensors_10", "sensors_15"})
    EXPECT_TRUE(fs::exists(dir / "out" / v / dsmelora::kSummaryFile)) << v;
  std::istringstream agg(slurp(dir / "out" / "aggregate.csv"));
  std::string line;
  std::getline(agg, line);
  EXPECT_EQ(line.rfind("sensors,generated,", 0), 0u);
  int rows = 0;
  while (std::getline(agg, line)) {
    ++rows;
    std::vector<long long> f;
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 7 && std::getline(ss, cell, ','); ++i) f.push_back(std::stoll(cell));
    EXPECT_EQ(f[1], f[2] + f[3] + f[4] + f[5] + f[6]) << line;
  }
  EXPECT_EQ(rows, 3);
}

TEST(CliSweep, SeedRange) {
  const fs::path dir = scratch("sweep_seed");
  const CliResult r = run_cli({"sweep", "--set", "mode=cfp", "--set", "sensors=5", "--set", "tx_interval_mean_s=20",
                               "--set", "duration_s=120", "--axis", "seed", "--values", "1..10", "--out",
                               dir.string()});
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream agg(slurp(dir / "aggregate.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(agg, line)) ++rows;
  EXPECT_EQ(rows, 10);
}

TEST(CliSweep, EmptyValuesExitOne) {
  const fs::path dir = scratch("sweep_empty");
  const CliResult r = run_cli({"sweep", "--set", "mode=cap", "--set", "sensors=5", "--set", "tx_interval_mean_s=5",
                               "--axis", "sensors", "--values", "", "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
}

TEST(CliSweep, NonSweepableAxisExitsOne) {
  const CliResult r = run_cli({"sweep", "--set", "mode=cap", "--set", "sensors=5", "--set", "tx_interval_mean_s=5",
                               "--axis", "mode", "--values", "cap,cfp"});
  EXPECT_EQ(r.code, 1);
}

TEST(CliHeap, WorkedExample) {
  const CliResult r = run_cli({"heap", "6", "3", "25x5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.output, "slots=636 packets=585 total=1221\n");
}

TEST(CliHeap, ZeroAndOne) {
  EXPECT_NE(run_cli({"heap", "0", "0"}).output.find("total=0"), std::string::npos);
  EXPECT_NE(run_cli({"heap", "1", "1"}).output.find("total=168"), std::string::npos);
}

TEST(CliHeap, NegativeExitsOne) {
  EXPECT_EQ(run_cli({"heap", "-1", "3"}).code, 1);
  EXPECT_EQ(run_cli({"heap", "1", "3", "-25"}).code, 1);
}

TEST(CliRun, RepeatedInvocationsByteIdentical) {
  const fs::path dir = scratch("run_repeat");
  const auto cfg = write_config(dir, "mode = cap\nsensors = 10\ntx_interval_mean_s = 5\nduration_s = 600\n");
  ASSERT_EQ(run_cli({"run", "--config", cfg.string(), "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run_cli({"run", "--config", cfg.string(), "--out", (dir / "b").string()}).code, 0);
  for (const char* f : {dsmelora::kTraceFile, dsmelora::kSummaryFile, dsmelora::kCdfFile})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}
