#include <gtest/gtest.h>

#include <sstream>

#include "dsmelora/report.hpp"

using namespace dsmelora;
using namespace std::chrono_literals;

namespace {

PacketRecord rec(std::uint64_t id, Duration gen, std::optional<Duration> ttc, PacketStatus st,
                 std::optional<GtsCell> cell = std::nullopt) {
  PacketRecord r;
  r.pkt_id = id;
  r.src = 1;
  r.dst = 4;
  r.gen_time = at(gen);
  if (ttc) r.completion_time = at(gen + *ttc);
  r.status = st;
  r.cell = cell;
  return r;
}

}  // namespace

TEST(Trace, ColumnsAndFormatting) {
  std::vector<PacketRecord> rs{
      rec(0, 85'136us, 4'438'384us, PacketStatus::Delivered, GtsCell{0, 9, 2, 1, 4}),
      rec(1, 1'000'001us, std::nullopt, PacketStatus::DropQueue),
  };
  std::ostringstream os;
  write_trace(os, rs);
  EXPECT_EQ(os.str(),
            "pkt_id,src,dst,gen_time_ms,ttc_ms,status,retries,cell_slot,cell_channel\n"
            "0,1,4,85.136,4438.384,Delivered,0,9,2\n"
            "1,1,4,1000.001,,DropQueue,0,,\n");
}

TEST(Trace, RoundTripAndCounts) {
  std::vector<PacketRecord> rs{
      rec(0, 0us, 7ms, PacketStatus::Delivered),
      rec(1, 5s, std::nullopt, PacketStatus::DropChannelAccess),
      rec(2, 6s, std::nullopt, PacketStatus::DropRetry),
      rec(3, 7s, 1s, PacketStatus::Delivered),
      rec(4, 8s, std::nullopt, PacketStatus::InFlightAtEnd),
  };
  std::stringstream ss;
  write_trace(ss, rs);
  const auto rows = read_trace(ss);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[3].gen_time, 7s);
  EXPECT_EQ(*rows[3].ttc, 1s);
  const TraceCounts all = count_trace(rows, 0us);
  EXPECT_TRUE(all.conserved());
  EXPECT_EQ(all.delivered, 2u);
  const TraceCounts late = count_trace(rows, 6s);
  EXPECT_EQ(late.generated, 3u);
  EXPECT_TRUE(late.conserved());
}

TEST(Trace, InconsistentRowBreaksConservation) {
  std::vector<TraceRow> rows(1);
  rows[0].status = "DropQueue";
  rows[0].ttc = 5ms;
  EXPECT_FALSE(count_trace(rows, 0us).conserved());
}

TEST(SummaryJson, FieldNamesAndPrecision) {
  Summary s;
  s.generated = 9789;
  s.delivered = 6195;
  s.drop_queue = 3488;
  s.in_flight = 106;
  s.prr = 6195.0 / 9789.0;
  s.ttc_max = 62'914'519us;
  const auto j = summary_json(s);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"generated", "delivered", "drop_queue", "drop_channel_access",
                                            "drop_retry", "in_flight", "prr", "ttc_p50", "ttc_p95", "ttc_max",
                                            "t_qo"}));
  EXPECT_EQ(j["prr"].dump(), "0.632853");
  EXPECT_EQ(j["ttc_max"].dump(), "62914.5");
  EXPECT_TRUE(j["ttc_p50"].is_null());
}

TEST(Cdf, SortedWithCumulativeFraction) {
  std::vector<PacketRecord> rs{
      rec(0, 0us, 3ms, PacketStatus::Delivered),
      rec(1, 1s, 1ms, PacketStatus::Delivered),
      rec(2, 2s, std::nullopt, PacketStatus::DropQueue),
      rec(3, 3s, 2ms, PacketStatus::Delivered),
  };
  std::ostringstream os;
  write_cdf(os, rs, 0us);
  EXPECT_EQ(os.str(), "ttc_ms,cumulative_fraction\n1.000,0.333333\n2.000,0.666667\n3.000,1\n");
}

TEST(Aggregate, RowMatchesHeader) {
  Summary s;
  s.generated = 3;
  s.delivered = 3;
  s.prr = 1;
  const std::string header = aggregate_header("sensors");
  const std::string row = aggregate_row("5", s);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row, "5,3,3,0,0,0,0,1,,,,");
}
