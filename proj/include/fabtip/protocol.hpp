#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fabtip {

inline constexpr std::size_t kFrameSize = 47;
inline constexpr std::array<std::uint8_t, 2> kFrameMagic{0x48, 0x46};  // "HF"
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 47047;

/// The 50 Hz haptic state. Indentations in mm, velocities in mm/s in the pad
/// frame (x right, y front, z pad normal), angular velocity about the pad normal.
struct HapticFrame {
  std::uint16_t seq = 0;
  std::uint32_t timestamp_ms = 0;
  std::array<float, 4> indentation_mm{};
  std::array<std::uint8_t, 4> material_id{};
  std::array<float, 3> velocity_mm_s{};
  float angular_velocity_rad_s = 0.0f;

  friend bool operator==(const HapticFrame&, const HapticFrame&) = default;
};

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

/// Layout (little-endian): magic[2] version u8 seq u16 timestamp u32
/// indentation f32x4 material u8x4 velocity f32x3 angular f32 crc u16.
/// The CRC covers bytes 0..44. Throws ValidationError for indentations that are
/// negative or not finite, non-finite velocities, or material ids above 3.
FrameBytes encode(const HapticFrame& frame);

enum class DecodeStatus { Ok, BadLength, BadMagic, BadVersion, BadCrc, BadPayload };

std::string_view to_string(DecodeStatus status);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::BadLength;
  std::optional<HapticFrame> frame;

  explicit operator bool() const { return status == DecodeStatus::Ok; }
};

DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Serial-number comparison with a 2^15 window: true if `a` is after `b`.
bool seq_after(std::uint16_t a, std::uint16_t b);

/// Latest-wins receiver state. One consumer updates it; readers copy snapshots.
class FrameReceiver {
 public:
  struct Counters {
    std::uint64_t accepted = 0;
    std::uint64_t stale = 0;
    std::uint64_t duplicate = 0;
    std::uint64_t bad_length = 0;
    std::uint64_t bad_magic = 0;
    std::uint64_t bad_version = 0;
    std::uint64_t bad_crc = 0;
    std::uint64_t bad_payload = 0;

    std::uint64_t rejected() const { return bad_length + bad_magic + bad_version + bad_crc + bad_payload; }
  };

  enum class Outcome { Accepted, Stale, Duplicate, Rejected };

  Outcome receive(std::span<const std::uint8_t> datagram);
  Outcome receive(const HapticFrame& frame);

  const std::optional<HapticFrame>& latest() const { return latest_; }
  const Counters& counters() const { return counters_; }

 private:
  std::optional<HapticFrame> latest_;
  Counters counters_;
};

/// In-process datagram channel with seeded loss, reordering and duplication.
/// Each `transmit` call is one send slot; `deliver` returns what arrives in that slot.
class ImpairedChannel {
 public:
  struct Impairments {
    double loss = 0.0;
    double reorder = 0.0;    // probability a datagram is held back one slot
    double duplicate = 0.0;  // probability a datagram is delivered twice
  };

  ImpairedChannel(Impairments impairments, std::uint64_t seed);

  /// Sends one datagram and returns the datagrams delivered during this slot.
  std::vector<FrameBytes> transmit(const FrameBytes& datagram);

  std::uint64_t dropped() const { return dropped_; }

 private:
  Impairments impairments_;
  std::mt19937_64 rng_;
  std::optional<FrameBytes> held_;
  std::uint64_t dropped_ = 0;
};

/// Blocking UDP endpoints for the haptic stream (IPv4).
class UdpSender {
 public:
  UdpSender(const std::string& host, std::uint16_t port = kDefaultPort);
  ~UdpSender();
  UdpSender(const UdpSender&) = delete;
  UdpSender& operator=(const UdpSender&) = delete;

  void send(const FrameBytes& datagram);

 private:
  int fd_ = -1;
  std::array<std::uint8_t, 16> addr_{};
};

class UdpReceiver {
 public:
  /// Port 0 binds an ephemeral port; see `port()`.
  explicit UdpReceiver(std::uint16_t port = kDefaultPort, const std::string& bind_host = "127.0.0.1");
  ~UdpReceiver();
  UdpReceiver(const UdpReceiver&) = delete;
  UdpReceiver& operator=(const UdpReceiver&) = delete;

  std::uint16_t port() const { return port_; }

  /// Waits up to `timeout_ms` for one datagram; empty on timeout.
  std::optional<std::vector<std::uint8_t>> receive(int timeout_ms);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace fabtip
