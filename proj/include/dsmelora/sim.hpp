#pragma once

// Discrete-event engine for the sensor-actuator experiment: one coordinator,
// a set of sensors with Poisson traffic and a set of actuators, all running
// the DSME MAC over the shared LoRa medium.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsmelora/calendar.hpp"
#include "dsmelora/error.hpp"
#include "dsmelora/frame.hpp"
#include "dsmelora/mac.hpp"
#include "dsmelora/memmodel.hpp"
#include "dsmelora/phy.hpp"
#include "dsmelora/rng.hpp"
#include "dsmelora/time.hpp"

namespace dsmelora {

enum class Mode { Cap, Cfp };
enum class ArrivalProcess { Exponential, Periodic };
enum class DestinationPolicy { Fixed, RoundRobin };

struct Scenario {
  int n_sensors = 0;
  int n_actuators = 3;
  NodeId coordinator = 0;
  Mode mode = Mode::Cfp;
  Duration tx_interval_mean = std::chrono::seconds{20};
  int payload_bytes = 16;
  Duration duration = std::chrono::seconds{3600};
  std::uint64_t seed = 1;
  Duration warmup{0};
  // Periodic arrivals (one packet every tx_interval_mean starting at t=0)
  // exist for deterministic tests.
  ArrivalProcess arrivals = ArrivalProcess::Exponential;
  // Fixed: sensor i always sends to actuator i mod n_actuators.
  DestinationPolicy destination = DestinationPolicy::Fixed;

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw Error(Errc::InvalidConfig, key + ": " + why);
    };
    if (n_sensors < 0) fail("sensors", "must be non-negative");
    if (n_sensors == 0) throw Error(Errc::EmptyScenario, "no sensors");
    if (n_actuators < 1) fail("actuators", "must be >= 1");
    if (tx_interval_mean.count() <= 0) fail("tx_interval_mean_s", "must be positive");
    if (payload_bytes < 0) fail("payload_bytes", "must be non-negative");
    if (duration.count() <= 0) fail("duration_s", "must be positive");
    if (warmup.count() < 0) fail("warmup_s", "must be non-negative");
  }

  NodeId sensor_id(int i) const { return coordinator + 1 + static_cast<NodeId>(i); }
  NodeId actuator_id(int j) const { return coordinator + 1 + static_cast<NodeId>(n_sensors + j); }
  int node_count() const { return 1 + n_sensors + n_actuators; }
};

enum class PacketStatus { Delivered, DropQueue, DropChannelAccess, DropRetry, InFlightAtEnd };

constexpr std::string_view to_string(PacketStatus s) {
  switch (s) {
    case PacketStatus::Delivered: return "Delivered";
    case PacketStatus::DropQueue: return "DropQueue";
    case PacketStatus::DropChannelAccess: return "DropChannelAccess";
    case PacketStatus::DropRetry: return "DropRetry";
    case PacketStatus::InFlightAtEnd: return "InFlightAtEnd";
  }
  return "?";
}

struct PacketRecord {
  std::uint64_t pkt_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  TimePoint gen_time{};
  std::optional<TimePoint> completion_time;
  PacketStatus status = PacketStatus::InFlightAtEnd;
  int retries = 0;
  std::optional<GtsCell> cell;

  std::optional<Duration> ttc() const {
    if (!completion_time) return std::nullopt;
    return *completion_time - gen_time;
  }

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct Summary {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t drop_queue = 0;
  std::uint64_t drop_channel_access = 0;
  std::uint64_t drop_retry = 0;
  std::uint64_t in_flight = 0;
  double prr = 0.0;
  std::optional<Duration> ttc_p50;
  std::optional<Duration> ttc_p95;
  std::optional<Duration> ttc_max;
  std::optional<Duration> t_qo;

  bool conserved() const {
    return generated == delivered + drop_queue + drop_channel_access + drop_retry + in_flight;
  }
};

/// Completion time of the last packet of a saturated queue served once per
/// multisuperframe without retransmissions.
inline Duration t_qo(const MacConfig& cfg, int queue_capacity) {
  return multisuperframe_duration(cfg) * queue_capacity;
}

/// Nearest-rank percentile over an ascending sequence; pct in (0, 100].
inline Duration nearest_rank(const std::vector<Duration>& sorted, double pct) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Counts and TTC percentiles over records generated at or after warmup.
inline Summary percentiles(const std::vector<PacketRecord>& records, Duration warmup) {
  Summary s;
  std::vector<Duration> ttcs;
  for (const auto& r : records) {
    if (since_origin(r.gen_time) < warmup) continue;
    ++s.generated;
    switch (r.status) {
      case PacketStatus::Delivered:
        ++s.delivered;
        ttcs.push_back(*r.ttc());
        break;
      case PacketStatus::DropQueue: ++s.drop_queue; break;
      case PacketStatus::DropChannelAccess: ++s.drop_channel_access; break;
      case PacketStatus::DropRetry: ++s.drop_retry; break;
      case PacketStatus::InFlightAtEnd: ++s.in_flight; break;
    }
  }
  s.prr = s.generated > 0 ? static_cast<double>(s.delivered) / static_cast<double>(s.generated) : 0.0;
  if (!ttcs.empty()) {
    std::sort(ttcs.begin(), ttcs.end());
    s.ttc_p50 = nearest_rank(ttcs, 50);
    s.ttc_p95 = nearest_rank(ttcs, 95);
    s.ttc_max = ttcs.back();
  }
  return s;
}

/// One frame put on air during a run.
struct TxLogEntry {
  FrameKind kind = FrameKind::Data;
  NodeId sender = 0;
  NodeId receiver = 0;
  int channel = 0;
  TimePoint start{};
  TimePoint end{};
  std::uint64_t pkt_id = 0;
  Reception reception = Reception::Missed;
};

/// Clock offset a node had accumulated when a beacon re-synchronized it.
struct SyncSample {
  NodeId node = 0;
  TimePoint rx_time{};
  double pre_offset_us = 0.0;
};

struct RunResult {
  std::vector<PacketRecord> records;
  Summary summary;
  std::vector<GtsCell> cells;
  std::vector<TxLogEntry> tx_log;
  std::vector<SyncSample> sync_samples;
  Medium::Stats medium;
  std::vector<std::int64_t> heap_watermark;  // bytes, indexed by node id
  std::vector<std::size_t> max_queue_length;  // indexed by node id
  std::uint64_t events = 0;
};

namespace detail {

enum class EventKind { SlotBoundary, BeaconDue, PacketArrival, GtsStart, CcaSample, TxEnd, AckStart, AckTimeout };

struct Event {
  TimePoint time{};
  int priority = 1;  // slot boundaries (0) precede anything else at the same instant
  std::uint64_t seq = 0;
  EventKind kind = EventKind::SlotBoundary;
  NodeId target = 0;
  std::uint64_t token = 0;
  std::uint64_t aux = 0;

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (priority != o.priority) return priority > o.priority;
    return seq > o.seq;
  }
};

enum class Role { Coordinator, Sensor, Actuator };
enum class Phase { Idle, WaitCap, Backoff, Transmitting, AwaitAck };

struct Node {
  NodeId id = 0;
  Role role = Role::Actuator;
  Rng rng{0};
  MacQueue queue{0};
  SyncState sync;
  SlottedCsma csma{CsmaParams{}, Duration{1}};
  Phase phase = Phase::Idle;
  std::uint64_t token = 0;  // invalidates stale CCA / timeout events
  std::uint64_t csma_pkt = 0;
  bool csma_running = false;
  std::uint64_t inflight_pkt = 0;
  int inflight_channel = 0;
  bool acked = false;
  std::size_t rr_next = 0;
  std::vector<NodeId> destinations;
  std::vector<GtsCell> tx_cells;
  std::vector<TimePoint> cell_last_use;
  std::map<std::pair<int, int>, int> rx_plan;  // (superframe, slot) -> listen channel
  std::size_t max_queue = 0;
};

}  // namespace detail

class Engine {
 public:
  Engine(Scenario scenario, MacConfig mac, PhyConfig phy, CsmaParams csma)
      : sc_(std::move(scenario)), mac_(std::move(mac)), phy_(std::move(phy)), csma_(csma), medium_(phy_) {
    mac_.symbol_time = phy_.symbol_time();
    mac_.validate();
    phy_.validate();
    csma_.validate();
    sc_.validate();
    bootstrap();
  }

  RunResult run() {
    const TimePoint end = at(sc_.duration);
    push(at(Duration{0}), detail::EventKind::SlotBoundary, 0, 0, 0, 0);
    push(at(Duration{0}), detail::EventKind::BeaconDue, sc_.coordinator);
    for (int i = 0; i < sc_.n_sensors; ++i) {
      auto& n = node(sc_.sensor_id(i));
      const Duration first = sc_.arrivals == ArrivalProcess::Periodic ? Duration{0} : draw_interarrival(n);
      push(at(first), detail::EventKind::PacketArrival, n.id);
    }
    while (!events_.empty()) {
      const detail::Event ev = events_.top();
      if (ev.time >= end) break;
      events_.pop();
      now_ = ev.time;
      ++result_.events;
      dispatch(ev);
    }
    return finish();
  }

  const MacConfig& mac() const { return mac_; }

 private:
  using EventKind = detail::EventKind;
  using Phase = detail::Phase;
  using Role = detail::Role;

  // --- setup -------------------------------------------------------------

  void bootstrap() {
    nodes_.resize(static_cast<std::size_t>(sc_.coordinator) + sc_.node_count());
    auto init = [&](NodeId id, Role role) {
      auto& n = nodes_[id];
      n.id = id;
      n.role = role;
      n.rng = Rng::for_node(sc_.seed, id);
      n.queue = MacQueue(mac_.queue_capacity);
      n.sync.drift_ppm = role == Role::Coordinator ? 0.0 : mac_.drift_ppm;
      n.csma = SlottedCsma(csma_, mac_.symbol_time * csma_.backoff_period_symbols);
    };
    init(sc_.coordinator, Role::Coordinator);
    for (int i = 0; i < sc_.n_sensors; ++i) init(sc_.sensor_id(i), Role::Sensor);
    for (int j = 0; j < sc_.n_actuators; ++j) init(sc_.actuator_id(j), Role::Actuator);

    std::vector<NodeId> sensors, actuators;
    for (int i = 0; i < sc_.n_sensors; ++i) sensors.push_back(sc_.sensor_id(i));
    for (int j = 0; j < sc_.n_actuators; ++j) actuators.push_back(sc_.actuator_id(j));

    for (int i = 0; i < sc_.n_sensors; ++i) {
      auto& n = node(sensors[i]);
      if (sc_.destination == DestinationPolicy::Fixed) {
        n.destinations = {actuators[static_cast<std::size_t>(i) % actuators.size()]};
      } else {
        n.destinations = actuators;
      }
    }

    exchange_ = exchange_duration(sc_.payload_bytes, mac_, phy_);
    if (sc_.mode == Mode::Cfp) {
      result_.cells = allocate_static_cells(sensors, actuators, mac_, phy_.channel_count);
      check_slot_fits(sc_.payload_bytes, mac_, phy_);
      for (const auto& c : result_.cells) {
        auto& tx = node(c.owner_tx);
        tx.tx_cells.push_back(c);
        tx.cell_last_use.push_back(at(Duration{-1}));
      }
      build_rx_plans();
    }
  }

  /// Each receiver can listen on one channel per slot. Where it owns several
  /// RX cells in the same slot it tunes to the lowest channel among the
  /// cells of links that carry traffic.
  void build_rx_plans() {
    std::map<std::tuple<NodeId, int, int>, std::pair<bool, int>> best;
    for (const auto& c : result_.cells) {
      const auto& dests = node(c.owner_tx).destinations;
      const bool active = std::find(dests.begin(), dests.end(), c.owner_rx) != dests.end();
      auto key = std::make_tuple(c.owner_rx, c.superframe_index, c.slot_index);
      auto it = best.find(key);
      if (it == best.end() || (active && !it->second.first) ||
          (active == it->second.first && c.channel < it->second.second)) {
        best[key] = {active, c.channel};
      }
    }
    for (const auto& [key, v] : best) {
      const auto [rx, sf, slot] = key;
      node(rx).rx_plan[{sf, slot}] = v.second;
    }
  }

  // --- event plumbing ----------------------------------------------------

  void push(TimePoint t, EventKind kind, NodeId target, std::uint64_t token = 0, std::uint64_t aux = 0,
            int priority = 1) {
    detail::Event ev;
    ev.time = t;
    ev.priority = priority;
    ev.seq = seq_++;
    ev.kind = kind;
    ev.target = target;
    ev.token = token;
    ev.aux = aux;
    events_.push(ev);
  }

  detail::Node& node(NodeId id) { return nodes_[id]; }

  void dispatch(const detail::Event& ev) {
    switch (ev.kind) {
      case EventKind::SlotBoundary: on_slot_boundary(); break;
      case EventKind::BeaconDue: on_beacon_due(); break;
      case EventKind::PacketArrival: on_arrival(node(ev.target)); break;
      case EventKind::GtsStart: on_gts_start(node(ev.target), ev.aux); break;
      case EventKind::CcaSample: on_cca(node(ev.target), ev.token); break;
      case EventKind::TxEnd: on_tx_end(ev.token); break;
      case EventKind::AckStart: on_ack_start(node(ev.target), ev.token, ev.aux); break;
      case EventKind::AckTimeout: on_ack_timeout(node(ev.target), ev.token); break;
    }
  }

  Duration draw_interarrival(detail::Node& n) {
    if (sc_.arrivals == ArrivalProcess::Periodic) return sc_.tx_interval_mean;
    const double us = n.rng.exponential(static_cast<double>(sc_.tx_interval_mean.count()));
    return Duration{std::max<std::int64_t>(1, std::llround(us))};
  }

  // --- handlers ----------------------------------------------------------

  void on_slot_boundary() {
    push(now_ + slot_duration(mac_), EventKind::SlotBoundary, 0, 0, 0, 0);
    const SlotRef ref = slot_at(now_, mac_);
    if (sc_.mode == Mode::Cap && ref.slot_kind == SlotKind::Cap && ref.slot_index == 1) {
      for (int i = 0; i < sc_.n_sensors; ++i) {
        auto& n = node(sc_.sensor_id(i));
        if (n.phase == Phase::WaitCap || (n.phase == Phase::Idle && !n.queue.empty())) start_csma(n);
      }
    }
    if (sc_.mode == Mode::Cfp && ref.slot_kind == SlotKind::Cfp) {
      for (int i = 0; i < sc_.n_sensors; ++i) {
        auto& n = node(sc_.sensor_id(i));
        for (std::size_t c = 0; c < n.tx_cells.size(); ++c) {
          const auto& cell = n.tx_cells[c];
          if (cell.superframe_index != ref.superframe_index || cell.slot_index != ref.slot_index) continue;
          const TimePoint local = std::max(now_, n.sync.local(now_));
          if (local > now_) {
            push(local, EventKind::GtsStart, n.id, 0, c);
          } else {
            try_gts(n, c, now_);
          }
        }
      }
    }
  }

  void on_beacon_due() {
    push(now_ + beacon_interval_duration(mac_), EventKind::BeaconDue, sc_.coordinator);
    auto tx = emit_beacon(true, sc_.coordinator, now_, mac_, medium_);
    if (tx) track(*tx, sc_.coordinator);
  }

  void on_arrival(detail::Node& n) {
    push(now_ + draw_interarrival(n), EventKind::PacketArrival, n.id);

    Frame f;
    f.kind = FrameKind::Data;
    f.pkt_id = result_.records.size();
    f.src = n.id;
    f.dst = n.destinations[n.rr_next % n.destinations.size()];
    ++n.rr_next;
    f.payload_bytes = sc_.payload_bytes;
    f.mac_overhead_bytes = mac_.mac_overhead_bytes;
    f.gen_time = now_;

    PacketRecord rec;
    rec.pkt_id = f.pkt_id;
    rec.src = f.src;
    rec.dst = f.dst;
    rec.gen_time = now_;
    if (sc_.mode == Mode::Cfp) rec.cell = cell_for(n, f.dst);
    if (n.queue.enqueue(f) == EnqueueResult::DroppedQueueOverflow) rec.status = PacketStatus::DropQueue;
    result_.records.push_back(rec);
    n.max_queue = std::max(n.max_queue, n.queue.size());

    if (rec.status == PacketStatus::DropQueue) return;
    if (sc_.mode == Mode::Cap) {
      if (n.phase == Phase::Idle) start_csma(n);
    } else {
      serve_cfp_now(n);
    }
  }

  std::optional<GtsCell> cell_for(const detail::Node& n, NodeId dst) const {
    for (const auto& c : n.tx_cells)
      if (c.owner_rx == dst) return c;
    return std::nullopt;
  }

  // CAP ------------------------------------------------------------------

  void start_csma(detail::Node& n) {
    if (n.queue.empty()) {
      n.phase = Phase::Idle;
      n.csma_running = false;
      return;
    }
    const std::uint64_t head = n.queue.front().pkt_id;
    if (!n.csma_running || n.csma_pkt != head) {
      n.csma.reset();
      n.csma_running = true;
      n.csma_pkt = head;
    }
    schedule_backoff(n, now_);
  }

  void schedule_backoff(detail::Node& n, TimePoint from) {
    const CapWindow w = current_or_next_cap(from, mac_);
    if (from < w.start) {
      n.phase = Phase::WaitCap;
      return;
    }
    auto cca_at = n.csma.schedule_cca(from, w, exchange_, n.rng);
    if (!cca_at) {
      n.phase = Phase::WaitCap;
      return;
    }
    n.phase = Phase::Backoff;
    ++n.token;
    push(std::max(now_, n.sync.local(*cca_at)), EventKind::CcaSample, n.id, n.token);
  }

  void on_cca(detail::Node& n, std::uint64_t token) {
    if (token != n.token || n.phase != Phase::Backoff) return;
    const CcaResult r = medium_.cca(kCapChannel, now_, n.rng);
    switch (n.csma.on_cca(r)) {
      case SlottedCsma::Step::Transmit: {
        Frame* f = n.queue.find(n.csma_pkt);
        n.csma_running = false;
        transmit(n, *f, kCapChannel);
        break;
      }
      case SlottedCsma::Step::CcaAgain: {
        auto next = n.csma.schedule_follow_up(now_, current_or_next_cap(now_, mac_), exchange_);
        if (!next) {
          n.phase = Phase::WaitCap;
        } else {
          ++n.token;
          push(*next, EventKind::CcaSample, n.id, n.token);
        }
        break;
      }
      case SlottedCsma::Step::Retry:
        // The next backoff begins at the boundary after this CCA.
        schedule_backoff(n, now_ + Duration{1});
        break;
      case SlottedCsma::Step::Failure: {
        auto f = n.queue.remove(n.csma_pkt);
        n.csma_running = false;
        n.phase = Phase::Idle;
        if (f) settle(f->pkt_id, PacketStatus::DropChannelAccess, f->retries);
        start_csma(n);
        break;
      }
    }
  }

  // CFP ------------------------------------------------------------------

  void on_gts_start(detail::Node& n, std::uint64_t cell_index) { try_gts(n, cell_index, now_); }

  /// Uses cell cell_index at time t if its slot is current, it was not used
  /// in this occurrence, and the exchange still fits before slot end.
  bool try_gts(detail::Node& n, std::size_t cell_index, TimePoint t) {
    if (n.phase != Phase::Idle) return false;
    const GtsCell& cell = n.tx_cells[cell_index];
    const SlotRef ref = slot_at(t, mac_);
    if (ref.superframe_index != cell.superframe_index || ref.slot_index != cell.slot_index) return false;
    SlotRef slot_ref = ref;
    const TimePoint occurrence = time_of(slot_ref, mac_);
    if (n.cell_last_use[cell_index] == occurrence) return false;
    if (t + exchange_ > occurrence + slot_duration(mac_)) return false;
    Frame* f = n.queue.first_for(cell.owner_rx);
    if (f == nullptr) return false;
    n.cell_last_use[cell_index] = occurrence;
    auto tx = cfp_service(n.queue, cell, t, medium_);
    if (!tx) return false;
    begin_exchange(n, *tx);
    return true;
  }

  void serve_cfp_now(detail::Node& n) {
    if (n.phase != Phase::Idle) return;
    for (std::size_t c = 0; c < n.tx_cells.size(); ++c) {
      if (try_gts(n, c, now_)) return;
    }
  }

  // Exchange -------------------------------------------------------------

  void transmit(detail::Node& n, const Frame& f, int channel) {
    auto tx = medium_.begin_transmission(n.id, channel, f, now_);
    begin_exchange(n, tx);
  }

  void begin_exchange(detail::Node& n, const Transmission& tx) {
    n.phase = Phase::Transmitting;
    n.inflight_pkt = tx.frame.pkt_id;
    n.inflight_channel = tx.channel;
    n.acked = false;
    track(tx, tx.frame.dst);
  }

  void track(const Transmission& tx, NodeId receiver) {
    inflight_.emplace(tx.id, tx);
    TxLogEntry e;
    e.kind = tx.frame.kind;
    e.sender = tx.sender;
    e.receiver = receiver;
    e.channel = tx.channel;
    e.start = tx.start;
    e.end = tx.end;
    e.pkt_id = tx.frame.pkt_id;
    log_index_.emplace(tx.id, result_.tx_log.size());
    result_.tx_log.push_back(e);
    push(tx.end, EventKind::TxEnd, tx.sender, tx.id);
  }

  /// Whether node had its radio tuned to channel and idle for all of [from, to).
  bool listening(const detail::Node& n, int channel, TimePoint from, TimePoint to) const {
    if (medium_.transmitting_during(n.id, from, to)) return false;
    if (n.phase == Phase::AwaitAck || n.phase == Phase::Transmitting) return channel == n.inflight_channel;
    int expected = kCapChannel;
    if (sc_.mode == Mode::Cfp) {
      const SlotRef ref = slot_at(from, mac_);
      if (ref.slot_kind == SlotKind::Cfp) {
        auto it = n.rx_plan.find({ref.superframe_index, ref.slot_index});
        if (it != n.rx_plan.end()) expected = it->second;
      }
    }
    return channel == expected;
  }

  void on_tx_end(std::uint64_t tx_id) {
    auto it = inflight_.find(tx_id);
    if (it == inflight_.end()) return;
    const Transmission tx = it->second;
    inflight_.erase(it);
    auto& log = result_.tx_log[log_index_.at(tx_id)];
    log_index_.erase(tx_id);

    switch (tx.frame.kind) {
      case FrameKind::Beacon: {
        const bool hit = medium_.collided(tx);
        log.reception = medium_.resolve_reception(tx, true);
        if (!hit) {
          for (auto& n : nodes_) {
            if (n.role == Role::Coordinator || n.id == tx.sender) continue;
            if (!listening(n, tx.channel, tx.start, tx.end)) continue;
            const auto before = on_beacon(n.sync, now_);
            result_.sync_samples.push_back({n.id, now_, before.count()});
          }
        }
        break;
      }
      case FrameKind::Data: {
        auto& sender = node(tx.sender);
        const auto& rx = node(tx.frame.dst);
        const Reception r = medium_.resolve_reception(tx, listening(rx, tx.channel, tx.start, tx.end));
        log.reception = r;
        sender.phase = Phase::AwaitAck;
        ++sender.token;
        const TimePoint ack_start = now_ + ack_turnaround(mac_);
        const TimePoint deadline = ack_start + ack_airtime(mac_, phy_) + mac_.symbol_time;
        push(deadline, EventKind::AckTimeout, sender.id, sender.token);
        if (r == Reception::Delivered) {
          push(ack_start, EventKind::AckStart, rx.id, tx.frame.pkt_id,
               (static_cast<std::uint64_t>(tx.channel) << 32) | sender.id);
        }
        last_outcome_[tx.sender] = r == Reception::Collided ? TxOutcome::Collided : TxOutcome::NoAck;
        break;
      }
      case FrameKind::Ack: {
        auto& sender = node(tx.frame.dst);
        const Reception r = medium_.resolve_reception(tx, listening(sender, tx.channel, tx.start, tx.end));
        log.reception = r;
        if (r == Reception::Delivered && sender.phase == Phase::AwaitAck && sender.inflight_pkt == tx.frame.pkt_id) {
          complete(sender, TxOutcome::Acked);
        }
        break;
      }
    }
    prune();
  }

  void on_ack_start(detail::Node& rx, std::uint64_t pkt_id, std::uint64_t aux) {
    const int channel = static_cast<int>(aux >> 32);
    const auto sender = static_cast<NodeId>(aux & 0xffffffffu);
    if (medium_.transmitting(rx.id, now_)) return;
    Frame ack;
    ack.kind = FrameKind::Ack;
    ack.pkt_id = pkt_id;
    ack.src = rx.id;
    ack.dst = sender;
    ack.payload_bytes = 0;
    ack.mac_overhead_bytes = 0;
    ack.gen_time = now_;
    auto tx = medium_.begin_transmission(rx.id, channel, ack, now_);
    track(tx, sender);
  }

  void on_ack_timeout(detail::Node& n, std::uint64_t token) {
    if (token != n.token || n.phase != Phase::AwaitAck) return;
    complete(n, last_outcome_[n.id]);
  }

  void complete(detail::Node& n, TxOutcome outcome) {
    ++n.token;
    const std::uint64_t pkt = n.inflight_pkt;
    const Frame* f = n.queue.find(pkt);
    const int retries_before = f ? f->retries : 0;
    const AckDecision d = handle_ack(outcome, n.queue, pkt, csma_.max_frame_retries);
    n.phase = Phase::Idle;
    switch (d) {
      case AckDecision::Confirmed: {
        auto& rec = result_.records[pkt];
        rec.status = PacketStatus::Delivered;
        rec.completion_time = now_;
        rec.retries = retries_before;
        break;
      }
      case AckDecision::DroppedRetryLimit:
        settle(pkt, PacketStatus::DropRetry, retries_before);
        break;
      case AckDecision::Requeued:
        result_.records[pkt].retries = retries_before + 1;
        break;
    }
    if (sc_.mode == Mode::Cap) {
      start_csma(n);
    } else {
      serve_cfp_now(n);
    }
  }

  void settle(std::uint64_t pkt, PacketStatus status, int retries) {
    auto& rec = result_.records[pkt];
    rec.status = status;
    rec.retries = retries;
  }

  void prune() {
    TimePoint horizon = now_;
    for (const auto& [id, tx] : inflight_) horizon = std::min(horizon, tx.start);
    medium_.forget_before(horizon);
  }

  RunResult finish() {
    for (auto& n : nodes_) {
      for (const auto& f : n.queue.entries()) {
        auto& rec = result_.records[f.pkt_id];
        if (rec.status == PacketStatus::InFlightAtEnd) rec.retries = f.retries;
      }
    }
    result_.summary = percentiles(result_.records, sc_.warmup);
    if (sc_.mode == Mode::Cfp) result_.summary.t_qo = t_qo(mac_, mac_.queue_capacity);
    result_.medium = medium_.stats();

    const std::vector<int> no_frames;
    result_.heap_watermark.assign(nodes_.size(), 0);
    result_.max_queue_length.assign(nodes_.size(), 0);
    const int frame_bytes = sc_.payload_bytes + mac_.mac_overhead_bytes;
    for (const auto& n : nodes_) {
      std::int64_t cells = 0;
      std::vector<NodeId> peers;
      for (const auto& c : result_.cells) {
        if (c.owner_tx != n.id && c.owner_rx != n.id) continue;
        ++cells;
        const NodeId peer = c.owner_tx == n.id ? c.owner_rx : c.owner_tx;
        if (std::find(peers.begin(), peers.end(), peer) == peers.end()) peers.push_back(peer);
      }
      const std::vector<int> frames(n.max_queue, frame_bytes);
      result_.heap_watermark[n.id] = heap_usage(cells, static_cast<std::int64_t>(peers.size()), frames).total();
      result_.max_queue_length[n.id] = n.max_queue;
    }
    return std::move(result_);
  }

  Scenario sc_;
  MacConfig mac_;
  PhyConfig phy_;
  CsmaParams csma_;
  Medium medium_;
  Duration exchange_{0};
  std::vector<detail::Node> nodes_;
  std::priority_queue<detail::Event, std::vector<detail::Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  TimePoint now_{};
  std::unordered_map<std::uint64_t, Transmission> inflight_;
  std::unordered_map<std::uint64_t, std::size_t> log_index_;
  std::unordered_map<NodeId, TxOutcome> last_outcome_;
  RunResult result_;
};

inline RunResult run(const Scenario& scenario, const MacConfig& mac, const PhyConfig& phy, const CsmaParams& csma) {
  return Engine(scenario, mac, phy, csma).run();
}

}  // namespace dsmelora
