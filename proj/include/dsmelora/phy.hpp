#pragma once

// LoRa PHY model: airtime, a multichannel shared medium with collision
// detection, and CCA realized as channel activity detection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsmelora/error.hpp"
#include "dsmelora/frame.hpp"
#include "dsmelora/rng.hpp"
#include "dsmelora/time.hpp"

namespace dsmelora {

struct PhyConfig {
  int spreading_factor = 7;
  int bandwidth_hz = 125000;
  int coding_rate = 1;  // 4/(4+CR)
  int preamble_symbols = 8;
  bool explicit_header = true;
  bool low_datarate_optimize = false;
  int channel_count = 16;
  double cca_false_clear_prob = 0.05;

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw Error(Errc::InvalidConfig, key + ": " + why);
    };
    if (spreading_factor < 6 || spreading_factor > 12) fail("spreading_factor", "must be in 6..12");
    if (bandwidth_hz <= 0) fail("bandwidth_hz", "must be positive");
    if (coding_rate < 1 || coding_rate > 4) fail("coding_rate", "must be in 1..4");
    if (preamble_symbols < 0) fail("preamble_symbols", "must be non-negative");
    if (channel_count < 1) fail("channel_count", "must be >= 1");
    if (!(cca_false_clear_prob >= 0.0 && cca_false_clear_prob <= 1.0))
      fail("cca_false_clear_prob", "must be in [0,1]");
  }

  /// 2^SF / BW in (fractional) microseconds.
  double symbol_time_us() const {
    return std::ldexp(1.0, spreading_factor) * 1e6 / static_cast<double>(bandwidth_hz);
  }

  Duration symbol_time() const { return Duration{std::llround(symbol_time_us())}; }
};

namespace detail {
constexpr std::int64_t ceil_div(std::int64_t num, std::int64_t den) {
  const std::int64_t q = num / den;
  return (num % den != 0 && ((num > 0) == (den > 0))) ? q + 1 : q;
}
}  // namespace detail

/// Number of payload symbols (including the 8 fixed ones) for the standard
/// SX127x airtime model with CRC enabled.
inline std::int64_t payload_symbols(int payload_bytes, const PhyConfig& cfg) {
  const int sf = cfg.spreading_factor;
  const int ih = cfg.explicit_header ? 0 : 1;
  const int de = cfg.low_datarate_optimize ? 1 : 0;
  const int den = 4 * (sf - 2 * de);
  if (den <= 0) throw Error(Errc::InvalidPhyConfig, "SF - 2*DE must be positive");
  const std::int64_t num = 8LL * payload_bytes - 4LL * sf + 28 + 16 - 20LL * ih;
  return 8 + std::max<std::int64_t>(detail::ceil_div(num, den) * (cfg.coding_rate + 4), 0);
}

inline Duration time_on_air(int payload_bytes, const PhyConfig& cfg) {
  if (payload_bytes < 0) throw std::domain_error("time_on_air: negative payload");
  // Preamble adds 4.25 symbols; count in quarter symbols to stay integral.
  const std::int64_t quarters =
      4LL * cfg.preamble_symbols + 17 + 4 * payload_symbols(payload_bytes, cfg);
  return Duration{std::llround(static_cast<double>(quarters) * cfg.symbol_time_us() / 4.0)};
}

struct Transmission {
  std::uint64_t id = 0;
  NodeId sender = 0;
  int channel = 0;
  TimePoint start{};
  TimePoint end{};
  Frame frame{};

  bool overlaps(const Transmission& o) const { return start < o.end && o.start < end; }
};

enum class Reception { Delivered, Collided, Missed };
enum class CcaResult { Clear, Busy };

/// Shared radio medium. All nodes are within mutual range; overlapping frames
/// on one channel destroy each other (no capture).
class Medium {
 public:
  explicit Medium(PhyConfig cfg) : cfg_(std::move(cfg)) {}

  const PhyConfig& config() const { return cfg_; }

  Transmission begin_transmission(NodeId sender, int channel, const Frame& frame, TimePoint now) {
    if (channel < 0 || channel >= cfg_.channel_count) {
      throw Error(Errc::InvalidChannel, "channel " + std::to_string(channel) + " outside 0.." +
                                            std::to_string(cfg_.channel_count - 1));
    }
    if (transmitting(sender, now)) {
      throw Error(Errc::RadioBusy, "node " + std::to_string(sender) + " is already transmitting");
    }
    Transmission tx;
    tx.id = next_id_++;
    tx.sender = sender;
    tx.channel = channel;
    tx.start = now;
    tx.end = now + time_on_air(frame.on_air_bytes(), cfg_);
    tx.frame = frame;
    log_.push_back(tx);
    return tx;
  }

  /// True if another frame on the same channel overlaps tx in time.
  bool collided(const Transmission& tx) const {
    return std::any_of(log_.begin(), log_.end(), [&](const Transmission& o) {
      return o.id != tx.id && o.channel == tx.channel && o.overlaps(tx);
    });
  }

  /// Call once tx.end has been reached. receiver_listening states whether the
  /// destination had its radio on tx.channel and was not transmitting.
  Reception resolve_reception(const Transmission& tx, bool receiver_listening) {
    const bool hit = collided(tx);
    if (tx.frame.kind == FrameKind::Data) {
      ++stats_.data_frames;
      if (hit) ++stats_.data_collisions;
    } else if (tx.frame.kind == FrameKind::Ack) {
      ++stats_.ack_frames;
      if (hit) ++stats_.ack_collisions;
    } else if (hit) {
      ++stats_.beacon_collisions;
    }
    if (hit) return Reception::Collided;
    return receiver_listening ? Reception::Delivered : Reception::Missed;
  }

  /// Channel activity detection at an instant. Frames that start exactly at
  /// `now` have not put a preamble on air yet and are not detected.
  CcaResult cca(int channel, TimePoint now, Rng& rng) const {
    if (!busy(channel, now)) return CcaResult::Clear;
    return rng.bernoulli(cfg_.cca_false_clear_prob) ? CcaResult::Clear : CcaResult::Busy;
  }

  bool busy(int channel, TimePoint now) const {
    return std::any_of(log_.begin(), log_.end(), [&](const Transmission& o) {
      return o.channel == channel && o.start < now && now < o.end;
    });
  }

  bool transmitting(NodeId node, TimePoint now) const {
    return std::any_of(log_.begin(), log_.end(), [&](const Transmission& o) {
      return o.sender == node && o.start <= now && now < o.end;
    });
  }

  /// True if node transmits at any point of [from, to).
  bool transmitting_during(NodeId node, TimePoint from, TimePoint to) const {
    return std::any_of(log_.begin(), log_.end(), [&](const Transmission& o) {
      return o.sender == node && o.start < to && from < o.end;
    });
  }

  /// Drop frames that ended before horizon; they can no longer overlap
  /// anything that is still to be resolved.
  void forget_before(TimePoint horizon) {
    std::erase_if(log_, [&](const Transmission& o) { return o.end < horizon; });
  }

  struct Stats {
    std::uint64_t data_frames = 0;
    std::uint64_t data_collisions = 0;
    std::uint64_t ack_frames = 0;
    std::uint64_t ack_collisions = 0;
    std::uint64_t beacon_collisions = 0;
  };

  const Stats& stats() const { return stats_; }
  std::size_t tracked() const { return log_.size(); }

 private:
  PhyConfig cfg_;
  std::vector<Transmission> log_;
  std::uint64_t next_id_ = 1;
  Stats stats_;
};

}  // namespace dsmelora
