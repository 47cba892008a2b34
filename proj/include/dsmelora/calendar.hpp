#pragma once

// DSME superframe calendar: beacon intervals made of multisuperframes made of
// superframes, each superframe split into a beacon slot, the CAP and the CFP.

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "dsmelora/error.hpp"
#include "dsmelora/time.hpp"

namespace dsmelora {

struct MacConfig {
  int superframe_order = 3;
  int multisuperframe_order = 3;
  int beacon_order = 4;
  Duration symbol_time{1024};
  int slots_per_superframe = 16;
  int base_slot_symbols = 60;
  int cap_slots = 8;
  int cfp_slots = 7;

  // Node-level MAC parameters that are not calendar geometry.
  int queue_capacity = 8;
  int mac_overhead_bytes = 9;
  int ack_turnaround_symbols = 12;
  int beacon_bytes = 32;
  double drift_ppm = 0.0;

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw Error(Errc::InvalidConfig, key + ": " + why);
    };
    if (superframe_order < 0 || superframe_order > 14) fail("superframe_order", "must be in 0..14");
    if (multisuperframe_order < superframe_order)
      fail("multisuperframe_order", "must be >= superframe_order");
    if (beacon_order < multisuperframe_order) fail("beacon_order", "must be >= multisuperframe_order");
    if (beacon_order > 14) fail("beacon_order", "must be <= 14");
    if (symbol_time.count() < 0) fail("symbol_time", "must be non-negative");
    if (base_slot_symbols <= 0) fail("base_slot_symbols", "must be positive");
    if (cap_slots < 0) fail("cap_slots", "must be non-negative");
    if (cfp_slots < 0) fail("cfp_slots", "must be non-negative");
    if (1 + cap_slots + cfp_slots != slots_per_superframe)
      fail("slots_per_superframe", "must equal 1 + cap_slots + cfp_slots");
    if (queue_capacity < 0) fail("queue_capacity", "must be non-negative");
    if (mac_overhead_bytes < 0) fail("mac_overhead_bytes", "must be non-negative");
    if (ack_turnaround_symbols < 0) fail("ack_turnaround_symbols", "must be non-negative");
    if (beacon_bytes < 0) fail("beacon_bytes", "must be non-negative");
  }

  int superframes_per_multisuperframe() const { return 1 << (multisuperframe_order - superframe_order); }
  int multisuperframes_per_beacon_interval() const { return 1 << (beacon_order - multisuperframe_order); }
  int cfp_first_slot() const { return 1 + cap_slots; }
};

enum class SlotKind { Beacon, Cap, Cfp };

constexpr std::string_view to_string(SlotKind k) {
  switch (k) {
    case SlotKind::Beacon: return "Beacon";
    case SlotKind::Cap: return "Cap";
    case SlotKind::Cfp: return "Cfp";
  }
  return "?";
}

/// Calendar coordinates of one slot. Indices other than the beacon interval
/// are relative to their parent unit.
struct SlotRef {
  std::int64_t beacon_interval_index = 0;
  int multisuperframe_index = 0;
  int superframe_index = 0;
  int slot_index = 0;
  SlotKind slot_kind = SlotKind::Beacon;

  friend bool operator==(const SlotRef&, const SlotRef&) = default;
};

/// A guaranteed time slot: one (slot, channel) pair in every multisuperframe,
/// owned by a single transmitter/receiver link.
struct GtsCell {
  int superframe_index = 0;
  int slot_index = 0;
  int channel = 0;
  NodeId owner_tx = 0;
  NodeId owner_rx = 0;

  friend bool operator==(const GtsCell&, const GtsCell&) = default;
};

inline SlotKind kind_of_slot(int slot_index, const MacConfig& cfg) {
  if (slot_index == 0) return SlotKind::Beacon;
  if (slot_index <= cfg.cap_slots) return SlotKind::Cap;
  return SlotKind::Cfp;
}

inline Duration slot_duration(const MacConfig& cfg) {
  return cfg.symbol_time * (static_cast<std::int64_t>(cfg.base_slot_symbols) << cfg.superframe_order);
}

inline Duration superframe_duration(const MacConfig& cfg) {
  return slot_duration(cfg) * cfg.slots_per_superframe;
}

inline Duration multisuperframe_duration(const MacConfig& cfg) {
  return superframe_duration(cfg) * cfg.superframes_per_multisuperframe();
}

inline Duration beacon_interval_duration(const MacConfig& cfg) {
  return multisuperframe_duration(cfg) * cfg.multisuperframes_per_beacon_interval();
}

inline SlotRef slot_at(TimePoint t, const MacConfig& cfg) {
  const std::int64_t us = since_origin(t).count();
  if (us < 0) throw std::domain_error("slot_at: negative time");
  const std::int64_t slot_us = slot_duration(cfg).count();
  if (slot_us <= 0) throw std::domain_error("slot_at: zero-length slots");

  const std::int64_t global_slot = us / slot_us;
  const std::int64_t spsf = cfg.slots_per_superframe;
  const std::int64_t global_sf = global_slot / spsf;
  const std::int64_t global_msf = global_sf / cfg.superframes_per_multisuperframe();

  SlotRef ref;
  ref.slot_index = static_cast<int>(global_slot % spsf);
  ref.superframe_index = static_cast<int>(global_sf % cfg.superframes_per_multisuperframe());
  ref.multisuperframe_index = static_cast<int>(global_msf % cfg.multisuperframes_per_beacon_interval());
  ref.beacon_interval_index = global_msf / cfg.multisuperframes_per_beacon_interval();
  ref.slot_kind = kind_of_slot(ref.slot_index, cfg);
  return ref;
}

inline TimePoint time_of(const SlotRef& s, const MacConfig& cfg) {
  const std::int64_t msf = s.beacon_interval_index * cfg.multisuperframes_per_beacon_interval() +
                           s.multisuperframe_index;
  const std::int64_t sf = msf * cfg.superframes_per_multisuperframe() + s.superframe_index;
  const std::int64_t slot = sf * cfg.slots_per_superframe + s.slot_index;
  return at(slot_duration(cfg) * slot);
}

/// Start of the superframe containing t.
inline TimePoint superframe_start(TimePoint t, const MacConfig& cfg) {
  const Duration sf = superframe_duration(cfg);
  return at(sf * (since_origin(t) / sf));
}

/// Contention access period of the superframe starting at sf_start.
struct CapWindow {
  TimePoint start;
  TimePoint end;

  bool contains(TimePoint t) const { return start <= t && t < end; }
};

inline CapWindow cap_window(TimePoint sf_start, const MacConfig& cfg) {
  const Duration slot = slot_duration(cfg);
  return {sf_start + slot, sf_start + slot * (1 + cfg.cap_slots)};
}

/// First CAP that has not ended at t (the current one if t lies inside a CAP).
inline CapWindow current_or_next_cap(TimePoint t, const MacConfig& cfg) {
  const TimePoint sf = superframe_start(t, cfg);
  CapWindow w = cap_window(sf, cfg);
  if (t >= w.end) w = cap_window(sf + superframe_duration(cfg), cfg);
  return w;
}

inline Duration cell_offset_in_multisuperframe(const GtsCell& cell, const MacConfig& cfg) {
  return superframe_duration(cfg) * cell.superframe_index + slot_duration(cfg) * cell.slot_index;
}

inline void check_cell(const GtsCell& cell, const MacConfig& cfg) {
  if (cell.slot_index < cfg.cfp_first_slot() || cell.slot_index >= cfg.slots_per_superframe ||
      cell.superframe_index < 0 || cell.superframe_index >= cfg.superframes_per_multisuperframe()) {
    throw Error(Errc::InvalidCell, "slot " + std::to_string(cell.slot_index) + " of superframe " +
                                       std::to_string(cell.superframe_index) + " is not a CFP slot");
  }
}

/// Earliest start of the cell's slot at or after now.
inline TimePoint next_occurrence(const GtsCell& cell, TimePoint now, const MacConfig& cfg) {
  check_cell(cell, cfg);
  const std::int64_t msf = multisuperframe_duration(cfg).count();
  const std::int64_t off = cell_offset_in_multisuperframe(cell, cfg).count();
  const std::int64_t rel = since_origin(now).count() - off;
  std::int64_t k = rel <= 0 ? 0 : (rel + msf - 1) / msf;
  if (rel < 0) k = -((-rel) / msf);
  return at(Duration{k * msf + off});
}

}  // namespace dsmelora
