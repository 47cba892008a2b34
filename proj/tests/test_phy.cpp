#include <gtest/gtest.h>

#include <cmath>

#include "dsmelora/phy.hpp"

using namespace dsmelora;
using namespace std::chrono_literals;

namespace {

// Airtime in ms straight from the transceiver datasheet formula, in doubles.
double oracle_toa_ms(int pl, int sf, double bw, int cr, int preamble, bool explicit_header, bool ldro) {
  const double ts = std::pow(2.0, sf) / bw * 1000.0;
  const double ih = explicit_header ? 0 : 1;
  const double de = ldro ? 1 : 0;
  const double n = std::ceil((8.0 * pl - 4.0 * sf + 28 + 16 - 20 * ih) / (4.0 * (sf - 2 * de)));
  const double payload = 8 + std::max(n * (cr + 4), 0.0);
  return (preamble + 4.25 + payload) * ts;
}

Frame data_frame(NodeId src, NodeId dst, int payload = 16) {
  Frame f;
  f.src = src;
  f.dst = dst;
  f.payload_bytes = payload;
  return f;
}

}  // namespace

TEST(TimeOnAir, TwentyFiveBytes) {
  const PhyConfig cfg;
  EXPECT_EQ(time_on_air(25, cfg), 61'696us);
  EXPECT_NEAR(time_on_air(25, cfg).count() / 1000.0, oracle_toa_ms(25, 7, 125e3, 1, 8, true, false), 1e-3);
}

TEST(TimeOnAir, EmptyPayload) { EXPECT_EQ(time_on_air(0, PhyConfig{}), 25'856us); }

// The 16-byte payload on its own is 51.456 ms by the formula; the data frame
// on air is 25 bytes once MAC overhead is added.
TEST(TimeOnAir, SixteenBytesMatchesOracle) {
  EXPECT_EQ(time_on_air(16, PhyConfig{}), 51'456us);
  EXPECT_NEAR(time_on_air(16, PhyConfig{}).count() / 1000.0, oracle_toa_ms(16, 7, 125e3, 1, 8, true, false), 1e-3);
}

TEST(TimeOnAir, MatchesOracleAcrossConfigurations) {
  for (int sf = 6; sf <= 12; ++sf)
    for (int bw : {125000, 250000, 500000})
      for (int cr = 1; cr <= 4; ++cr)
        for (bool ih : {true, false})
          for (bool ldro : {false, true})
            for (int pl : {0, 1, 7, 25, 64, 255}) {
              PhyConfig c;
              c.spreading_factor = sf;
              c.bandwidth_hz = bw;
              c.coding_rate = cr;
              c.explicit_header = ih;
              c.low_datarate_optimize = ldro;
              if (sf - 2 * (ldro ? 1 : 0) <= 0) continue;
              EXPECT_NEAR(time_on_air(pl, c).count() / 1000.0, oracle_toa_ms(pl, sf, bw, cr, 8, ih, ldro), 1e-3)
                  << "sf=" << sf << " bw=" << bw << " cr=" << cr << " pl=" << pl;
            }
}

TEST(TimeOnAir, MonotoneInPayloadAndSf) {
  for (int sf = 7; sf <= 12; ++sf) {
    PhyConfig c;
    c.spreading_factor = sf;
    for (int pl = 1; pl <= 255; ++pl) EXPECT_GE(time_on_air(pl, c), time_on_air(pl - 1, c));
    if (sf > 7) {
      PhyConfig lower = c;
      lower.spreading_factor = sf - 1;
      for (int pl = 0; pl <= 255; ++pl) EXPECT_GE(time_on_air(pl, c), time_on_air(pl, lower));
    }
  }
}

TEST(TimeOnAir, DegenerateSpreadingFactor) {
  PhyConfig c;
  c.spreading_factor = 2;
  c.low_datarate_optimize = true;
  try {
    time_on_air(10, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidPhyConfig);
  }
}

TEST(Medium, TransmissionSpansAirtime) {
  Medium m{PhyConfig{}};
  const auto tx = m.begin_transmission(1, 0, data_frame(1, 2), at(1000us));
  EXPECT_EQ(tx.start, at(1000us));
  EXPECT_EQ(tx.end - tx.start, time_on_air(25, PhyConfig{}));
}

TEST(Medium, HalfDuplex) {
  Medium m{PhyConfig{}};
  m.begin_transmission(1, 0, data_frame(1, 2), at(0us));
  try {
    m.begin_transmission(1, 5, data_frame(1, 3), at(10'000us));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RadioBusy);
  }
  EXPECT_NO_THROW(m.begin_transmission(1, 0, data_frame(1, 2), at(61'696us)));
}

TEST(Medium, ChannelBounds) {
  Medium m{PhyConfig{}};
  try {
    m.begin_transmission(1, 16, data_frame(1, 2), at(0us));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidChannel);
  }
}

TEST(Medium, SingleTransmissionDelivered) {
  Medium m{PhyConfig{}};
  const auto tx = m.begin_transmission(1, 0, data_frame(1, 2), at(0us));
  EXPECT_EQ(m.resolve_reception(tx, true), Reception::Delivered);
  EXPECT_EQ(m.resolve_reception(tx, false), Reception::Missed);
}

TEST(Medium, OverlapOnSameChannelCollidesBoth) {
  Medium m{PhyConfig{}};
  const auto a = m.begin_transmission(1, 3, data_frame(1, 4), at(0us));
  const auto b = m.begin_transmission(2, 3, data_frame(2, 4), at(30'000us));
  EXPECT_EQ(m.resolve_reception(a, true), Reception::Collided);
  EXPECT_EQ(m.resolve_reception(b, true), Reception::Collided);
}

TEST(Medium, DifferentChannelsIsolated) {
  Medium m{PhyConfig{}};
  const auto a = m.begin_transmission(1, 3, data_frame(1, 4), at(0us));
  const auto b = m.begin_transmission(2, 4, data_frame(2, 5), at(0us));
  EXPECT_EQ(m.resolve_reception(a, true), Reception::Delivered);
  EXPECT_EQ(m.resolve_reception(b, true), Reception::Delivered);
}

TEST(Medium, BackToBackDoesNotCollide) {
  Medium m{PhyConfig{}};
  const auto a = m.begin_transmission(1, 0, data_frame(1, 4), at(0us));
  const auto b = m.begin_transmission(2, 0, data_frame(2, 4), a.end);
  EXPECT_FALSE(m.collided(a));
  EXPECT_FALSE(m.collided(b));
}

TEST(Medium, CollisionIsSymmetric) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    Medium m{PhyConfig{}};
    std::vector<Transmission> txs;
    for (NodeId n = 0; n < 6; ++n) {
      const int ch = static_cast<int>(rng.below(2));
      txs.push_back(m.begin_transmission(n, ch, data_frame(n, 9), at(Duration{static_cast<std::int64_t>(rng.below(200'000))})));
    }
    for (const auto& a : txs)
      for (const auto& b : txs) {
        if (a.id == b.id) continue;
        const bool ab = a.channel == b.channel && a.overlaps(b);
        const bool ba = b.channel == a.channel && b.overlaps(a);
        EXPECT_EQ(ab, ba);
        if (ab) {
          EXPECT_TRUE(m.collided(a));
          EXPECT_TRUE(m.collided(b));
        }
      }
  }
}

TEST(Cca, IdleChannelAlwaysClear) {
  PhyConfig c;
  c.cca_false_clear_prob = 1.0;
  Medium m{c};
  Rng rng(1);
  EXPECT_EQ(m.cca(0, at(0us), rng), CcaResult::Clear);
}

TEST(Cca, BusyChannelWithPerfectDetection) {
  PhyConfig c;
  c.cca_false_clear_prob = 0.0;
  Medium m{c};
  Rng rng(1);
  m.begin_transmission(1, 0, data_frame(1, 2), at(0us));
  EXPECT_EQ(m.cca(0, at(1us), rng), CcaResult::Busy);
  EXPECT_EQ(m.cca(1, at(1us), rng), CcaResult::Clear);
}

TEST(Cca, BusyChannelForcedFalseClear) {
  PhyConfig c;
  c.cca_false_clear_prob = 1.0;
  Medium m{c};
  Rng rng(1);
  m.begin_transmission(1, 0, data_frame(1, 2), at(0us));
  EXPECT_EQ(m.cca(0, at(1us), rng), CcaResult::Clear);
}

TEST(Cca, FalseClearRateMatchesProbability) {
  PhyConfig c;
  c.cca_false_clear_prob = 0.2;
  Medium m{c};
  Rng rng(11);
  m.begin_transmission(1, 0, data_frame(1, 2), at(0us));
  int clear = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) clear += m.cca(0, at(10us), rng) == CcaResult::Clear;
  EXPECT_NEAR(clear / double(n), 0.2, 0.015);
}

// A transmission started right after a clear CCA cannot overlap one that was
// already on air when the CCA sampled the channel.
TEST(Cca, ClearSampleImpliesNoOverlapWithActiveFrames) {
  PhyConfig c;
  c.cca_false_clear_prob = 0.0;
  c.channel_count = 1;
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Medium m{c};
    const auto earlier = m.begin_transmission(1, 0, data_frame(1, 9), at(Duration{static_cast<std::int64_t>(rng.below(100'000))}));
    const TimePoint now = at(Duration{static_cast<std::int64_t>(rng.below(200'000))});
    if (now < earlier.start) continue;
    if (m.cca(0, now, rng) != CcaResult::Clear) continue;
    if (m.transmitting(2, now)) continue;
    const auto mine = m.begin_transmission(2, 0, data_frame(2, 9), now);
    if (earlier.start < now) EXPECT_FALSE(earlier.overlaps(mine));
  }
}
