#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsmelora {

enum class Errc {
  InvalidConfig,
  InvalidPhyConfig,
  InvalidCell,
  InvalidChannel,
  RadioBusy,
  CapacityExceeded,
  SlotTooShort,
  EmptyScenario,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidPhyConfig: return "InvalidPhyConfig";
    case Errc::InvalidCell: return "InvalidCell";
    case Errc::InvalidChannel: return "InvalidChannel";
    case Errc::RadioBusy: return "RadioBusy";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::SlotTooShort: return "SlotTooShort";
    case Errc::EmptyScenario: return "EmptyScenario";
  }
  return "Unknown";
}

/// what() reads "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Configuration-level failures the CLI reports as an infeasible scenario.
  bool infeasible() const noexcept {
    return code_ == Errc::CapacityExceeded || code_ == Errc::SlotTooShort;
  }

 private:
  Errc code_;
};

}  // namespace dsmelora
