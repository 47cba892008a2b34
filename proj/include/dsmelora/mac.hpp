#pragma once

// DSME MAC building blocks: the transmit queue, slotted CSMA-CA for the CAP,
// GTS service in the CFP, acknowledgement handling, beacons and
// synchronization, and the static cell allocation used at bootstrap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsmelora/calendar.hpp"
#include "dsmelora/error.hpp"
#include "dsmelora/frame.hpp"
#include "dsmelora/phy.hpp"
#include "dsmelora/rng.hpp"
#include "dsmelora/time.hpp"

namespace dsmelora {

// ---------------------------------------------------------------------------
// Queue

enum class EnqueueResult { Accepted, DroppedQueueOverflow };

/// FIFO of frames waiting for (or in) transmission. A frame leaves the queue
/// only when it is confirmed or dropped.
class MacQueue {
 public:
  explicit MacQueue(int capacity) : capacity_(capacity) {}

  EnqueueResult enqueue(const Frame& f) {
    if (static_cast<int>(entries_.size()) >= capacity_) return EnqueueResult::DroppedQueueOverflow;
    entries_.push_back(f);
    return EnqueueResult::Accepted;
  }

  int capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  Frame& front() { return entries_.front(); }
  const Frame& front() const { return entries_.front(); }

  /// First frame, in FIFO order, addressed to dst.
  Frame* first_for(NodeId dst) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Frame& f) { return f.dst == dst; });
    return it == entries_.end() ? nullptr : &*it;
  }

  Frame* find(std::uint64_t pkt_id) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Frame& f) { return f.pkt_id == pkt_id; });
    return it == entries_.end() ? nullptr : &*it;
  }

  /// Removes the frame; returns it if it was present.
  std::optional<Frame> remove(std::uint64_t pkt_id) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Frame& f) { return f.pkt_id == pkt_id; });
    if (it == entries_.end()) return std::nullopt;
    Frame f = *it;
    entries_.erase(it);
    return f;
  }

  /// Moves a frame to the head so it is the next one served.
  void move_to_front(std::uint64_t pkt_id) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Frame& f) { return f.pkt_id == pkt_id; });
    if (it == entries_.end() || it == entries_.begin()) return;
    Frame f = *it;
    entries_.erase(it);
    entries_.push_front(f);
  }

  const std::deque<Frame>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<Frame> entries_;
};

// ---------------------------------------------------------------------------
// Slotted CSMA-CA

struct CsmaParams {
  int min_be = 3;
  int max_be = 5;
  int max_csma_backoffs = 4;
  int max_frame_retries = 3;
  int backoff_period_symbols = 20;
  int contention_window = 1;  // consecutive clear CCAs required

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw Error(Errc::InvalidConfig, key + ": " + why);
    };
    if (min_be < 0) fail("min_be", "must be non-negative");
    if (max_be < min_be) fail("max_be", "must be >= min_be");
    if (max_be > 30) fail("max_be", "must be <= 30");
    if (max_csma_backoffs < 0) fail("max_csma_backoffs", "must be non-negative");
    if (max_frame_retries < 0) fail("max_frame_retries", "must be non-negative");
    if (backoff_period_symbols <= 0) fail("backoff_period_symbols", "must be positive");
    if (contention_window < 1) fail("contention_window", "must be >= 1");
  }
};

/// One channel-access procedure for one frame. NB and BE follow the
/// 802.15.4 slotted algorithm; backoff boundaries are aligned to CAP start.
class SlottedCsma {
 public:
  enum class Step { Transmit, CcaAgain, Retry, Failure };

  SlottedCsma(const CsmaParams& params, Duration backoff_period)
      : params_(params), period_(backoff_period) {
    reset();
  }

  void reset() {
    nb_ = 0;
    be_ = params_.min_be;
    cw_ = params_.contention_window;
  }

  int nb() const { return nb_; }
  int cw() const { return cw_; }
  int be() const { return be_; }
  int last_backoff_periods() const { return last_draw_; }
  Duration backoff_period() const { return period_; }

  /// Draws a backoff and returns the time of the CCA that concludes it, or
  /// nullopt if backoff plus the full frame exchange does not fit in the
  /// window (the attempt must then be deferred to the next CAP).
  std::optional<TimePoint> schedule_cca(TimePoint now, const CapWindow& window, Duration exchange,
                                        Rng& rng) {
    last_draw_ = static_cast<int>(rng.below(std::uint64_t{1} << be_));
    const TimePoint from = std::max(now, window.start);
    const Duration since = from - window.start;
    const std::int64_t periods_elapsed = (since.count() + period_.count() - 1) / period_.count();
    const TimePoint boundary = window.start + period_ * periods_elapsed;
    const TimePoint cca_at = boundary + period_ * last_draw_;
    if (cca_at + exchange > window.end) return std::nullopt;
    return cca_at;
  }

  /// Follow-up CCA one backoff period after a clear one (contention window > 1).
  std::optional<TimePoint> schedule_follow_up(TimePoint last_cca, const CapWindow& window, Duration exchange) const {
    const TimePoint cca_at = last_cca + period_;
    if (cca_at + exchange > window.end) return std::nullopt;
    return cca_at;
  }

  Step on_cca(CcaResult r) {
    if (r == CcaResult::Clear) {
      if (--cw_ <= 0) return Step::Transmit;
      return Step::CcaAgain;
    }
    cw_ = params_.contention_window;
    ++nb_;
    be_ = std::min(be_ + 1, params_.max_be);
    return nb_ > params_.max_csma_backoffs ? Step::Failure : Step::Retry;
  }

 private:
  CsmaParams params_;
  Duration period_;
  int nb_ = 0;
  int be_ = 0;
  int cw_ = 1;
  int last_draw_ = 0;
};

struct CapAttemptResult {
  enum class Kind { Sent, ChannelAccessFailure, Deferred };
  Kind kind;
  TimePoint at{};  // transmission start when Sent
  int ccas = 0;
};

/// Runs a complete channel-access attempt inside one CAP window. cca_probe is
/// asked for the channel state at each backoff boundary.
inline CapAttemptResult cap_attempt(const CsmaParams& csma, Duration backoff_period,
                                    const CapWindow& window, TimePoint now, Duration exchange,
                                    Rng& rng, const std::function<CcaResult(TimePoint)>& cca_probe) {
  SlottedCsma proc(csma, backoff_period);
  CapAttemptResult res{CapAttemptResult::Kind::Deferred};
  std::optional<TimePoint> cca_at = proc.schedule_cca(now, window, exchange, rng);
  for (;;) {
    if (!cca_at) return res;
    ++res.ccas;
    switch (proc.on_cca(cca_probe(*cca_at))) {
      case SlottedCsma::Step::Transmit:
        res.kind = CapAttemptResult::Kind::Sent;
        res.at = *cca_at;
        return res;
      case SlottedCsma::Step::Failure:
        res.kind = CapAttemptResult::Kind::ChannelAccessFailure;
        res.at = *cca_at;
        return res;
      case SlottedCsma::Step::CcaAgain:
        cca_at = proc.schedule_follow_up(*cca_at, window, exchange);
        break;
      case SlottedCsma::Step::Retry:
        // The next backoff starts at the boundary after the failed CCA.
        cca_at = proc.schedule_cca(*cca_at + Duration{1}, window, exchange, rng);
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Frame exchange timing

inline Duration ack_turnaround(const MacConfig& mac) { return mac.symbol_time * mac.ack_turnaround_symbols; }

inline Duration ack_airtime(const MacConfig& mac, const PhyConfig& phy) {
  (void)mac;
  return time_on_air(0, phy);
}

/// Data frame, turnaround and ACK.
inline Duration exchange_duration(int payload_bytes, const MacConfig& mac, const PhyConfig& phy) {
  return time_on_air(payload_bytes + mac.mac_overhead_bytes, phy) + ack_turnaround(mac) + ack_airtime(mac, phy);
}

/// Startup check that one acknowledged data frame fits in a GTS.
inline void check_slot_fits(int payload_bytes, const MacConfig& mac, const PhyConfig& phy) {
  const Duration need = exchange_duration(payload_bytes, mac, phy);
  const Duration slot = slot_duration(mac);
  if (need > slot) {
    throw Error(Errc::SlotTooShort, "frame exchange " + format_ms(need) + " ms > slot " + format_ms(slot) + " ms");
  }
}

// ---------------------------------------------------------------------------
// CFP service

/// Transmits, on the cell's channel, the first queued frame addressed to the
/// cell's receiver. The frame stays queued until its ACK outcome is known.
inline std::optional<Transmission> cfp_service(MacQueue& q, const GtsCell& cell, TimePoint occurrence,
                                               Medium& medium) {
  Frame* f = q.first_for(cell.owner_rx);
  if (f == nullptr) return std::nullopt;
  return medium.begin_transmission(cell.owner_tx, cell.channel, *f, occurrence);
}

// ---------------------------------------------------------------------------
// Acknowledgements

enum class TxOutcome { Acked, Collided, NoAck };
enum class AckDecision { Confirmed, Requeued, DroppedRetryLimit };

/// Applies the outcome of one transmission of a queued frame. Requeued frames
/// are moved to the queue head; confirmed and dropped frames leave the queue.
inline AckDecision handle_ack(TxOutcome outcome, MacQueue& q, std::uint64_t pkt_id, int max_frame_retries) {
  if (outcome == TxOutcome::Acked) {
    q.remove(pkt_id);
    return AckDecision::Confirmed;
  }
  Frame* f = q.find(pkt_id);
  if (f == nullptr) return AckDecision::DroppedRetryLimit;
  if (f->retries >= max_frame_retries) {
    q.remove(pkt_id);
    return AckDecision::DroppedRetryLimit;
  }
  ++f->retries;
  q.move_to_front(pkt_id);
  return AckDecision::Requeued;
}

// ---------------------------------------------------------------------------
// Beacons and synchronization

constexpr int kBeaconChannel = 0;
constexpr int kCapChannel = 0;

inline bool is_beacon_interval_start(TimePoint t, const MacConfig& cfg) {
  return since_origin(t).count() % beacon_interval_duration(cfg).count() == 0;
}

/// The coordinator sends a beacon in the beacon slot that opens every beacon
/// interval. Other nodes never beacon.
inline std::optional<Transmission> emit_beacon(bool is_coordinator, NodeId self, TimePoint slot_start,
                                               const MacConfig& cfg, Medium& medium) {
  if (!is_coordinator || !is_beacon_interval_start(slot_start, cfg)) return std::nullopt;
  Frame beacon;
  beacon.kind = FrameKind::Beacon;
  beacon.src = self;
  beacon.dst = self;
  beacon.payload_bytes = cfg.beacon_bytes;
  beacon.mac_overhead_bytes = 0;
  beacon.gen_time = slot_start;
  return medium.begin_transmission(self, kBeaconChannel, beacon, slot_start);
}

/// Local clock state of a node relative to the coordinator.
struct SyncState {
  TimePoint last_beacon_time{};
  std::chrono::duration<double, std::micro> clock_offset{0.0};
  double drift_ppm = 0.0;

  /// Offset accumulated by time t since the last received beacon.
  std::chrono::duration<double, std::micro> offset_at(TimePoint t) const {
    const double elapsed = static_cast<double>((t - last_beacon_time).count());
    return std::chrono::duration<double, std::micro>{drift_ppm * 1e-6 * elapsed};
  }

  /// Local time at which a node believes the calendar instant `nominal` occurs.
  TimePoint local(TimePoint nominal) const {
    return nominal + Duration{std::llround(offset_at(nominal).count())};
  }
};

/// Re-aligns to the coordinator. Returns the offset that had built up just
/// before the beacon.
inline std::chrono::duration<double, std::micro> on_beacon(SyncState& s, TimePoint rx_time) {
  const auto before = s.offset_at(rx_time);
  s.last_beacon_time = rx_time;
  s.clock_offset = std::chrono::duration<double, std::micro>{0.0};
  return before;
}

// ---------------------------------------------------------------------------
// Static GTS allocation

inline std::int64_t cell_capacity(const MacConfig& cfg, int channel_count) {
  return static_cast<std::int64_t>(cfg.cfp_slots) * cfg.superframes_per_multisuperframe() * channel_count;
}

/// One cell per sensor-actuator pair. Pairs are numbered sensor-major
/// (p = sensor_index * |actuators| + actuator_index); pair p gets the CFP slot
/// p mod cfp_slots (spread over the superframes of the multisuperframe) and
/// the channel p div (cfp_slots * superframes).
inline std::vector<GtsCell> allocate_static_cells(std::span<const NodeId> sensors,
                                                  std::span<const NodeId> actuators, const MacConfig& cfg,
                                                  int channel_count) {
  const std::int64_t demand = static_cast<std::int64_t>(sensors.size()) * static_cast<std::int64_t>(actuators.size());
  const std::int64_t capacity = cell_capacity(cfg, channel_count);
  if (demand > capacity) {
    throw Error(Errc::CapacityExceeded, std::to_string(demand) + " > " + std::to_string(capacity));
  }
  const std::int64_t per_channel = static_cast<std::int64_t>(cfg.cfp_slots) * cfg.superframes_per_multisuperframe();
  std::vector<GtsCell> cells;
  cells.reserve(static_cast<std::size_t>(demand));
  std::int64_t p = 0;
  for (NodeId s : sensors) {
    for (NodeId a : actuators) {
      const std::int64_t in_time = p % per_channel;
      GtsCell c;
      c.superframe_index = static_cast<int>(in_time / cfg.cfp_slots);
      c.slot_index = cfg.cfp_first_slot() + static_cast<int>(in_time % cfg.cfp_slots);
      c.channel = static_cast<int>(p / per_channel);
      c.owner_tx = s;
      c.owner_rx = a;
      cells.push_back(c);
      ++p;
    }
  }
  return cells;
}

}  // namespace dsmelora
