#pragma once

// Heap cost of the MAC's dynamically allocated objects.

#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>

namespace dsmelora {

struct HeapCostParams {
  std::int64_t packet_base = 92;      // per packet, plus the frame without FCS
  std::int64_t gts_slot = 44;
  std::int64_t neighbour_entry = 124;
};

struct HeapUsage {
  std::int64_t slots = 0;    // GTS and neighbour entries
  std::int64_t packets = 0;  // queued packets
  std::int64_t total() const { return slots + packets; }
};

inline HeapUsage heap_usage(std::int64_t n_gts, std::int64_t n_neighbours, std::span<const int> frame_sizes,
                            const HeapCostParams& p = {}) {
  if (n_gts < 0 || n_neighbours < 0) throw std::domain_error("heap_usage: negative count");
  HeapUsage u;
  u.slots = n_gts * p.gts_slot + n_neighbours * p.neighbour_entry;
  u.packets = std::accumulate(frame_sizes.begin(), frame_sizes.end(), std::int64_t{0},
                              [&](std::int64_t acc, int size) {
                                if (size < 0) throw std::domain_error("heap_usage: negative frame size");
                                return acc + p.packet_base + size;
                              });
  return u;
}

}  // namespace dsmelora
