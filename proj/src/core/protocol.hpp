#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace wmatch {

inline constexpr std::size_t kPacketSize = 56;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint8_t kMsgTypeWatermark = 0x01;
inline constexpr std::array<std::uint8_t, 4> kMagic = {'W', 'M', 'K', '1'};

struct WatermarkPacket {
  std::uint8_t version = kProtocolVersion;
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  double u_g_v = 0.0;
  double u_g_omega = 0.0;
  double e_v = 0.0;
  double e_omega = 0.0;

  bool operator==(const WatermarkPacket&) const = default;
};

enum class DecodeError {
  None = 0,
  Truncated,   // buffer shorter than the fixed layout
  Corrupted,   // CRC mismatch
  BadMagic,    // CRC fine but not our protocol
  BadVersion,  // CRC and magic fine, unsupported version
};

const char* decode_error_str(DecodeError e);

// Fixed 56-byte little-endian frame:
// magic "WMK1" | version u8 | msg_type u8 | reserved u16 | seq u32 |
// timestamp_us u64 | u_g_v f64 | u_g_omega f64 | e_v f64 | e_omega f64 |
// crc32 (ISO-HDLC) of the preceding 52 bytes.
std::array<std::uint8_t, kPacketSize> encode(const WatermarkPacket& pkt);

// CRC is checked before magic so any bit corruption reports Corrupted;
// BadMagic means a well-formed frame of some other protocol.
DecodeError decode(std::span<const std::uint8_t> buf, WatermarkPacket& out);

}  // namespace wmatch
