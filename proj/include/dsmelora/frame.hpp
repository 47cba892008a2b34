#pragma once

#include <cstdint>

#include "dsmelora/time.hpp"

namespace dsmelora {

enum class FrameKind { Data, Ack, Beacon };

/// MAC data unit. Only data frames carry a packet id and generation time.
struct Frame {
  FrameKind kind = FrameKind::Data;
  std::uint64_t pkt_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  int payload_bytes = 0;
  int mac_overhead_bytes = 9;
  TimePoint gen_time{};
  int retries = 0;

  int on_air_bytes() const { return payload_bytes + mac_overhead_bytes; }
};

}  // namespace dsmelora
