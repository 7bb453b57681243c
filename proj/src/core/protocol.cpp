#include "protocol.hpp"

#include <zlib.h>

#include <cstring>

namespace wmatch {

const char* decode_error_str(DecodeError e) {
  switch (e) {
    case DecodeError::None: return "ok";
    case DecodeError::Truncated: return "truncated packet";
    case DecodeError::Corrupted: return "corrupted packet (crc mismatch)";
    case DecodeError::BadMagic: return "foreign packet (bad magic)";
    case DecodeError::BadVersion: return "unsupported protocol version";
  }
  return "unknown";
}

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_f64(std::uint8_t* p, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(p, bits);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = get_u64(p);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::uint32_t frame_crc(const std::uint8_t* data) {
  return static_cast<std::uint32_t>(
      crc32(0L, data, static_cast<uInt>(kPacketSize - 4)));
}

}  // namespace

std::array<std::uint8_t, kPacketSize> encode(const WatermarkPacket& pkt) {
  std::array<std::uint8_t, kPacketSize> buf{};
  std::memcpy(buf.data(), kMagic.data(), 4);
  buf[4] = pkt.version;
  buf[5] = kMsgTypeWatermark;
  put_u16(buf.data() + 6, 0);
  put_u32(buf.data() + 8, pkt.seq);
  put_u64(buf.data() + 12, pkt.timestamp_us);
  put_f64(buf.data() + 20, pkt.u_g_v);
  put_f64(buf.data() + 28, pkt.u_g_omega);
  put_f64(buf.data() + 36, pkt.e_v);
  put_f64(buf.data() + 44, pkt.e_omega);
  put_u32(buf.data() + 52, frame_crc(buf.data()));
  return buf;
}

DecodeError decode(std::span<const std::uint8_t> buf, WatermarkPacket& out) {
  if (buf.size() < kPacketSize) return DecodeError::Truncated;
  if (get_u32(buf.data() + 52) != frame_crc(buf.data()))
    return DecodeError::Corrupted;
  if (std::memcmp(buf.data(), kMagic.data(), 4) != 0)
    return DecodeError::BadMagic;
  if (buf[4] != kProtocolVersion) return DecodeError::BadVersion;

  out.version = buf[4];
  out.seq = get_u32(buf.data() + 8);
  out.timestamp_us = get_u64(buf.data() + 12);
  out.u_g_v = get_f64(buf.data() + 20);
  out.u_g_omega = get_f64(buf.data() + 28);
  out.e_v = get_f64(buf.data() + 36);
  out.e_omega = get_f64(buf.data() + 44);
  return DecodeError::None;
}

}  // namespace wmatch
