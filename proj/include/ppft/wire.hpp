#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "ppft/error.hpp"
#include "ppft/matrix.hpp"
#include "ppft/noise.hpp"

namespace ppft {

// Binary frame: the only representation that crosses the client/server
// boundary. Little-endian throughout.
//
//   offset  size  field
//        0     4  magic "PPFT"
//        4     2  version (currently 1)
//        6     1  mechanism_code (0 none, 1 laplace, 2 gaussian)
//        7     2  k
//        9     4  d_e
//       13     4  m
//       17     8  epsilon (IEEE-754 double)
//       25     8  seed_echo
//       33  4*m*d_e  payload, float32 row-major
//        +     4  crc32 over bytes [0, 33 + payload)
//
// Frames with mechanism_code 1 or 2 are obfuscated transmissions and must
// carry unit-norm rows (the mechanism renormalizes by definition); frames
// with mechanism_code 0 double as the raw embedding file container and
// carry arbitrary finite rows.

inline constexpr std::array<std::uint8_t, 4> kWireMagic{'P', 'P', 'F', 'T'};
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 33;
inline constexpr double kWireNormTolerance = 1e-4;

struct WireFrame {
  std::uint16_t version = kWireVersion;
  std::uint8_t mechanism_code = 0;
  std::uint16_t k = 1;
  std::uint32_t d_e = 0;
  std::uint32_t m = 0;
  double epsilon = 0.0;
  std::uint64_t seed_echo = 0;
  std::vector<float> payload;  // m * d_e floats
};

namespace wire_detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[off + static_cast<std::size_t>(i)];
  return v;
}
inline std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[off + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace wire_detail

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

inline std::size_t frame_encoded_size(std::uint32_t m, std::uint32_t d_e) {
  return kWireHeaderBytes + 4ull * m * d_e + 4;
}

inline std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
  const std::uint64_t cells = static_cast<std::uint64_t>(frame.m) * frame.d_e;
  if (cells > 0xFFFFFFFFull / 4) {
    raise(ErrorCode::TooLarge, "encode_frame: payload exceeds 32-bit addressing");
  }
  if (frame.payload.size() != cells) {
    raise(ErrorCode::ShapeError, "encode_frame: payload size does not match m * d_e");
  }
  std::vector<std::uint8_t> out;
  out.reserve(frame_encoded_size(frame.m, frame.d_e));
  for (std::uint8_t b : kWireMagic) out.push_back(b);
  wire_detail::put_u16(out, frame.version);
  out.push_back(frame.mechanism_code);
  wire_detail::put_u16(out, frame.k);
  wire_detail::put_u32(out, frame.d_e);
  wire_detail::put_u32(out, frame.m);
  wire_detail::put_u64(out, std::bit_cast<std::uint64_t>(frame.epsilon));
  wire_detail::put_u64(out, frame.seed_echo);
  for (float f : frame.payload) {
    wire_detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  wire_detail::put_u32(out, crc32_of(out));
  return out;
}

inline WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes + 4) {
    raise(ErrorCode::LengthMismatch, "decode_frame: shorter than minimal frame");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != kWireMagic[i]) raise(ErrorCode::BadMagic, "decode_frame: bad magic");
  }
  WireFrame frame;
  frame.version = wire_detail::get_u16(bytes, 4);
  if (frame.version != kWireVersion) {
    raise(ErrorCode::UnsupportedVersion,
          "decode_frame: version " + std::to_string(frame.version));
  }
  frame.mechanism_code = bytes[6];
  if (frame.mechanism_code > 2) {
    raise(ErrorCode::ParseError,
          "decode_frame: unknown mechanism code " + std::to_string(frame.mechanism_code));
  }
  frame.k = wire_detail::get_u16(bytes, 7);
  frame.d_e = wire_detail::get_u32(bytes, 9);
  frame.m = wire_detail::get_u32(bytes, 13);
  frame.epsilon = std::bit_cast<double>(wire_detail::get_u64(bytes, 17));
  frame.seed_echo = wire_detail::get_u64(bytes, 25);

  const std::uint64_t cells = static_cast<std::uint64_t>(frame.m) * frame.d_e;
  if (cells > 0xFFFFFFFFull / 4) raise(ErrorCode::TooLarge, "decode_frame: payload too large");
  if (bytes.size() != frame_encoded_size(frame.m, frame.d_e)) {
    raise(ErrorCode::LengthMismatch, "decode_frame: expected " +
                                         std::to_string(frame_encoded_size(frame.m, frame.d_e)) +
                                         " bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint32_t stored_crc = wire_detail::get_u32(bytes, bytes.size() - 4);
  const std::uint32_t actual_crc = crc32_of(bytes.first(bytes.size() - 4));
  if (stored_crc != actual_crc) raise(ErrorCode::ChecksumMismatch, "decode_frame: crc mismatch");

  frame.payload.resize(cells);
  for (std::uint64_t i = 0; i < cells; ++i) {
    frame.payload[i] =
        std::bit_cast<float>(wire_detail::get_u32(bytes, kWireHeaderBytes + 4 * i));
  }
  for (float f : frame.payload) {
    if (!std::isfinite(f)) raise(ErrorCode::ParseError, "decode_frame: non-finite payload value");
  }
  if (frame.mechanism_code != 0 && frame.d_e > 0) {
    for (std::uint32_t row = 0; row < frame.m; ++row) {
      double sq = 0.0;
      for (std::uint32_t c = 0; c < frame.d_e; ++c) {
        const double v = frame.payload[static_cast<std::size_t>(row) * frame.d_e + c];
        sq += v * v;
      }
      if (std::abs(std::sqrt(sq) - 1.0) > kWireNormTolerance) {
        raise(ErrorCode::NormViolation,
              "decode_frame: row " + std::to_string(row) + " is not unit norm");
      }
    }
  }
  return frame;
}

// crc32 of the payload section alone; echoed in acknowledgments and logs.
inline std::uint32_t payload_digest(const WireFrame& frame) {
  std::vector<std::uint8_t> raw;
  raw.reserve(frame.payload.size() * 4);
  for (float f : frame.payload) wire_detail::put_u32(raw, std::bit_cast<std::uint32_t>(f));
  return crc32_of(raw);
}

inline WireFrame frame_from(const ObfuscatedEmbeddings& obf) {
  WireFrame frame;
  frame.mechanism_code = static_cast<std::uint8_t>(obf.config_echo.mechanism);
  frame.k = obf.k_echo;
  frame.d_e = static_cast<std::uint32_t>(obf.d_e());
  frame.m = static_cast<std::uint32_t>(obf.m());
  frame.epsilon = obf.config_echo.mechanism == Mechanism::None ? 0.0 : obf.config_echo.epsilon;
  frame.seed_echo = obf.config_echo.seed;
  frame.payload.reserve(obf.slots.data().size());
  for (double v : obf.slots.data()) frame.payload.push_back(static_cast<float>(v));
  return frame;
}

// Raw embedding container: mechanism_code 0, arbitrary finite rows.
inline WireFrame container_from(const Matrix& values, std::uint16_t k, std::uint64_t seed_echo) {
  WireFrame frame;
  frame.mechanism_code = 0;
  frame.k = k;
  frame.d_e = static_cast<std::uint32_t>(values.cols());
  frame.m = static_cast<std::uint32_t>(values.rows());
  frame.seed_echo = seed_echo;
  frame.payload.reserve(values.data().size());
  for (double v : values.data()) frame.payload.push_back(static_cast<float>(v));
  return frame;
}

inline Matrix payload_matrix(const WireFrame& frame) {
  Matrix out(frame.m, frame.d_e);
  for (std::size_t i = 0; i < frame.payload.size(); ++i) out.data()[i] = frame.payload[i];
  return out;
}

inline void write_frame_file(const std::string& path, const WireFrame& frame) {
  const auto bytes = encode_frame(frame);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::ParseError, "write_frame_file: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline WireFrame read_frame_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::ParseError, "read_frame_file: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_frame(bytes);
}

}  // namespace ppft
