#include "fabtip/protocol.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <utility>

#include "fabtip/errors.hpp"

namespace fabtip {

namespace {

constexpr std::size_t kCrcOffset = kFrameSize - 2;

class Writer {
 public:
  explicit Writer(FrameBytes& out) : out_(out) {}
  void u8(std::uint8_t v) { out_[pos_++] = v; }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::size_t pos() const { return pos_; }

 private:
  FrameBytes& out_;
  std::size_t pos_ = 0;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return in_[pos_++]; }
  std::uint16_t u16() {
    std::uint16_t lo = u8();
    std::uint16_t hi = u8();
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool payload_valid(const HapticFrame& f) {
  for (float d : f.indentation_mm)
    if (!std::isfinite(d) || d < 0.0f) return false;
  for (float v : f.velocity_mm_s)
    if (!std::isfinite(v)) return false;
  if (!std::isfinite(f.angular_velocity_rad_s)) return false;
  for (auto m : f.material_id)
    if (m > 3) return false;
  return true;
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : data) {
    crc ^= static_cast<std::uint16_t>(byte) << 8;
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
  }
  return crc;
}

FrameBytes encode(const HapticFrame& frame) {
  if (!payload_valid(frame)) throw ValidationError("haptic frame payload violates invariants");
  FrameBytes out{};
  Writer w(out);
  w.u8(kFrameMagic[0]);
  w.u8(kFrameMagic[1]);
  w.u8(kFrameVersion);
  w.u16(frame.seq);
  w.u32(frame.timestamp_ms);
  for (float d : frame.indentation_mm) w.f32(d);
  for (auto m : frame.material_id) w.u8(m);
  for (float v : frame.velocity_mm_s) w.f32(v);
  w.f32(frame.angular_velocity_rad_s);
  w.u16(crc16_ccitt_false(std::span(out).first(kCrcOffset)));
  return out;
}

std::string_view to_string(DecodeStatus status) {
  switch (status) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::BadLength: return "bad_length";
    case DecodeStatus::BadMagic: return "bad_magic";
    case DecodeStatus::BadVersion: return "bad_version";
    case DecodeStatus::BadCrc: return "bad_crc";
    case DecodeStatus::BadPayload: return "bad_payload";
  }
  return "unknown";
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kFrameSize) return {DecodeStatus::BadLength, std::nullopt};
  if (bytes[0] != kFrameMagic[0] || bytes[1] != kFrameMagic[1]) return {DecodeStatus::BadMagic, std::nullopt};
  if (bytes[2] != kFrameVersion) return {DecodeStatus::BadVersion, std::nullopt};
  std::uint16_t wire_crc = static_cast<std::uint16_t>(bytes[kCrcOffset] | (bytes[kCrcOffset + 1] << 8));
  if (crc16_ccitt_false(bytes.first(kCrcOffset)) != wire_crc) return {DecodeStatus::BadCrc, std::nullopt};

  Reader r(bytes.subspan(3));
  HapticFrame f;
  f.seq = r.u16();
  f.timestamp_ms = r.u32();
  for (auto& d : f.indentation_mm) d = r.f32();
  for (auto& m : f.material_id) m = r.u8();
  for (auto& v : f.velocity_mm_s) v = r.f32();
  f.angular_velocity_rad_s = r.f32();
  if (!payload_valid(f)) return {DecodeStatus::BadPayload, std::nullopt};
  return {DecodeStatus::Ok, f};
}

bool seq_after(std::uint16_t a, std::uint16_t b) {
  auto diff = static_cast<std::uint16_t>(a - b);
  return diff != 0 && diff < 0x8000;
}

FrameReceiver::Outcome FrameReceiver::receive(std::span<const std::uint8_t> datagram) {
  auto result = decode(datagram);
  switch (result.status) {
    case DecodeStatus::Ok: return receive(*result.frame);
    case DecodeStatus::BadLength: ++counters_.bad_length; break;
    case DecodeStatus::BadMagic: ++counters_.bad_magic; break;
    case DecodeStatus::BadVersion: ++counters_.bad_version; break;
    case DecodeStatus::BadCrc: ++counters_.bad_crc; break;
    case DecodeStatus::BadPayload: ++counters_.bad_payload; break;
  }
  return Outcome::Rejected;
}

FrameReceiver::Outcome FrameReceiver::receive(const HapticFrame& frame) {
  if (latest_) {
    if (frame.seq == latest_->seq) {
      if (frame.timestamp_ms == latest_->timestamp_ms) {
        ++counters_.duplicate;
        return Outcome::Duplicate;
      }
      if (frame.timestamp_ms < latest_->timestamp_ms) {
        ++counters_.stale;
        return Outcome::Stale;
      }
    } else if (!seq_after(frame.seq, latest_->seq)) {
      ++counters_.stale;
      return Outcome::Stale;
    }
  }
  latest_ = frame;
  ++counters_.accepted;
  return Outcome::Accepted;
}

ImpairedChannel::ImpairedChannel(Impairments impairments, std::uint64_t seed)
    : impairments_(impairments), rng_(seed) {}

std::vector<FrameBytes> ImpairedChannel::transmit(const FrameBytes& datagram) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FrameBytes> delivered;
  std::optional<FrameBytes> previously_held = std::exchange(held_, std::nullopt);

  if (u(rng_) < impairments_.loss) {
    ++dropped_;
  } else if (u(rng_) < impairments_.reorder) {
    held_ = datagram;
  } else {
    delivered.push_back(datagram);
    if (u(rng_) < impairments_.duplicate) delivered.push_back(datagram);
  }
  // A held datagram arrives after this slot's on-time datagram.
  if (previously_held) delivered.push_back(*previously_held);
  return delivered;
}

UdpSender::UdpSender(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ConfigError("invalid IPv4 address '" + host + "'");
  }
  static_assert(sizeof(addr) == 16);
  std::memcpy(addr_.data(), &addr, sizeof(addr));
}

UdpSender::~UdpSender() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpSender::send(const FrameBytes& datagram) {
  sockaddr_in addr{};
  std::memcpy(&addr, addr_.data(), sizeof(addr));
  auto n = ::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (n != static_cast<ssize_t>(datagram.size())) throw IoError(std::string("sendto: ") + std::strerror(errno));
}

UdpReceiver::UdpReceiver(std::uint16_t port, const std::string& bind_host) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ConfigError("invalid IPv4 address '" + bind_host + "'");
  }
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd_);
    throw IoError(std::string("bind: ") + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

UdpReceiver::~UdpReceiver() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<std::vector<std::uint8_t>> UdpReceiver::receive(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready < 0) throw IoError(std::string("poll: ") + std::strerror(errno));
  if (ready == 0) return std::nullopt;
  std::vector<std::uint8_t> buf(512);
  auto n = ::recv(fd_, buf.data(), buf.size(), 0);
  if (n < 0) throw IoError(std::string("recv: ") + std::strerror(errno));
  buf.resize(static_cast<std::size_t>(n));
  return buf;
}

}  // namespace fabtip
