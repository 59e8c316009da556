#pragma once

// Port waveform messages and their binary frame.
//
//   offset  size  field
//   0       4     magic 0x4D544D31 ("MTM1"), big-endian
//   4       4     window index, big-endian
//   8       2     wire id, big-endian
//   10      1     port id (1 or 2)
//   11      1     flags
//   12      4     sample count K, big-endian
//   16      16K   K pairs (u, i), IEEE-754 binary64 little-endian
//   16+16K  4     CRC32C of the sample block, big-endian

#include "mtm/errors.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mtm {

struct PortSample {
    double u = 0.0;
    double i = 0.0;

    bool operator==(const PortSample&) const = default;
};

struct PortWaveformMessage {
    static constexpr std::uint8_t kFlagRelaxation = 0x2; ///< waveform-relaxation iterate

    std::uint32_t window = 0; ///< exchange round, strictly increasing per stream
    std::uint16_t wire = 0;
    std::uint8_t port = 1;
    std::uint8_t flags = 0;
    std::vector<PortSample> samples;

    /// Stream key: two streams per wire, one per sending port.
    std::size_t stream() const { return 2u * wire + (port == 2 ? 1u : 0u); }

    bool operator==(const PortWaveformMessage&) const = default;
};

inline constexpr std::uint32_t kFrameMagic = 0x4D544D31u;
inline constexpr std::size_t kFrameHeaderSize = 16;
inline constexpr std::size_t kFrameTrailerSize = 4;

inline std::size_t frame_size(std::size_t k) { return kFrameHeaderSize + 16 * k + kFrameTrailerSize; }

using Crc32c = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;

inline std::uint32_t crc32c(std::span<const std::uint8_t> bytes) {
    Crc32c crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

namespace detail {

inline void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int k = bytes - 1; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int k = 0; k < bytes; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

inline std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int k = 0; k < bytes; ++k) v = (v << 8) | in[at + static_cast<std::size_t>(k)];
    return v;
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int k = bytes - 1; k >= 0; --k) v = (v << 8) | in[at + static_cast<std::size_t>(k)];
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> encode(const PortWaveformMessage& m) {
    std::vector<std::uint8_t> out;
    out.reserve(frame_size(m.samples.size()));
    detail::put_be(out, kFrameMagic, 4);
    detail::put_be(out, m.window, 4);
    detail::put_be(out, m.wire, 2);
    out.push_back(m.port);
    out.push_back(m.flags);
    detail::put_be(out, m.samples.size(), 4);
    for (const auto& s : m.samples) {
        detail::put_le(out, std::bit_cast<std::uint64_t>(s.u), 8);
        detail::put_le(out, std::bit_cast<std::uint64_t>(s.i), 8);
    }
    const auto crc = crc32c(std::span(out).subspan(kFrameHeaderSize));
    detail::put_be(out, crc, 4);
    return out;
}

struct FrameHeader {
    std::uint32_t window = 0;
    std::uint16_t wire = 0;
    std::uint8_t port = 0;
    std::uint8_t flags = 0;
    std::uint32_t count = 0;
};

/// Parses the fixed 16-byte header. Throws ProtocolError on a bad magic or port id.
inline FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderSize) throw ProtocolError("truncated frame header");
    if (detail::get_be(bytes, 0, 4) != kFrameMagic) throw ProtocolError("bad frame magic");
    FrameHeader h;
    h.window = static_cast<std::uint32_t>(detail::get_be(bytes, 4, 4));
    h.wire = static_cast<std::uint16_t>(detail::get_be(bytes, 8, 2));
    h.port = bytes[10];
    h.flags = bytes[11];
    h.count = static_cast<std::uint32_t>(detail::get_be(bytes, 12, 4));
    if (h.port != 1 && h.port != 2) throw ProtocolError("bad port id " + std::to_string(h.port));
    return h;
}

/// Inverse of encode. Throws ProtocolError on length, magic or checksum mismatch.
inline PortWaveformMessage decode(std::span<const std::uint8_t> bytes) {
    const auto h = decode_header(bytes);
    if (bytes.size() != frame_size(h.count)) throw ProtocolError("frame length does not match sample count");
    const auto payload = bytes.subspan(kFrameHeaderSize, 16 * static_cast<std::size_t>(h.count));
    const auto crc = static_cast<std::uint32_t>(detail::get_be(bytes, kFrameHeaderSize + payload.size(), 4));
    if (crc != crc32c(payload)) throw ProtocolError("frame checksum mismatch");

    PortWaveformMessage m{h.window, h.wire, h.port, h.flags, {}};
    m.samples.resize(h.count);
    for (std::size_t k = 0; k < h.count; ++k) {
        const std::size_t at = kFrameHeaderSize + 16 * k;
        m.samples[k].u = std::bit_cast<double>(detail::get_le(bytes, at, 8));
        m.samples[k].i = std::bit_cast<double>(detail::get_le(bytes, at + 8, 8));
    }
    return m;
}

} // namespace mtm
