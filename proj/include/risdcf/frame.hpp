#pragma once

// R-RTS / R-CTS / DATA / ACK frames and their bit-exact wire layout.
//
// Fields are packed most-significant-bit first, in this order:
//
//   R-RTS  FC(16) Duration(16) RA(48) DA(48) TA(48) FCS(32)             = 208
//   R-CTS  FC(16) Duration(16) RA(48) SA(48) FCS(32)                    = 160
//   ACK    FC(16) Duration(16) RA(48) TA(48) zero pad(80) FCS(32)       = 240
//   DATA   PHY header(128) MAC header(240) payload FCS(32)              = 400 + payload
//
// The DATA PHY header is a 64-bit 0xAA.. preamble, the 32-bit payload length in
// bits and 32 reserved zero bits. The DATA MAC header is FC, Duration, RA, DA,
// TA, SA (48 each) and a 16-bit sequence control word (always zero).
// Payload contents are not modelled: the payload is transmitted as zeros.
//
// FCS is CRC-32 (reflected polynomial 0xEDB88320, i.e. 0x04C11DB7 reversed,
// init and final xor 0xFFFFFFFF) over all preceding bits in transmission order.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "risdcf/errors.hpp"

namespace risdcf::protocol {

struct MacAddress {
    static constexpr std::uint64_t kMax = (std::uint64_t{1} << 48) - 1;

    std::uint64_t value = 0;

    friend constexpr auto operator<=>(const MacAddress&, const MacAddress&) = default;
};

std::string to_string(MacAddress addr);

enum class FrameKind : std::uint8_t { RRts, RCts, Data, Ack };

std::string_view to_string(FrameKind kind);

struct Frame {
    FrameKind kind = FrameKind::RRts;
    std::uint32_t duration_us = 0;  // encodes into 16 bits; larger values fail to encode
    MacAddress receiver;     // RA, every variant
    MacAddress destination;  // DA, R-RTS and DATA
    MacAddress transmitter;  // TA, R-RTS, DATA and ACK
    MacAddress sender;       // SA, R-CTS; originating source on DATA
    std::uint32_t payload_bits = 0;  // DATA only

    friend bool operator==(const Frame&, const Frame&) = default;
};

Frame make_rrts(MacAddress ra, MacAddress da, MacAddress ta, std::uint32_t duration_us);
Frame make_rcts(MacAddress ra, MacAddress sa, std::uint32_t duration_us);
Frame make_data(MacAddress ra, MacAddress da, MacAddress ta, MacAddress sa,
                std::uint32_t duration_us, std::uint32_t payload_bits);
Frame make_ack(MacAddress ra, MacAddress ta, std::uint32_t duration_us);

inline constexpr std::size_t kRRtsBits = 208;
inline constexpr std::size_t kRCtsBits = 160;
inline constexpr std::size_t kAckBits = 240;
inline constexpr std::size_t kDataOverheadBits = 400;  // PHY 128 + MAC 272 (incl. FCS)

std::size_t encoded_length(const Frame& frame);

class BitString {
public:
    BitString() = default;

    std::size_t size() const { return size_; }
    bool bit(std::size_t index) const;
    void flip(std::size_t index);

    // Appends the low `width` bits of value, most significant first.
    void append(std::uint64_t value, int width);
    std::uint64_t read(std::size_t offset, int width) const;

    BitString prefix(std::size_t length) const;

    friend bool operator==(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t size_ = 0;
};

// Bitwise CRC-32 over the first `length` bits of `bits` in order.
std::uint32_t crc32_bits(const BitString& bits, std::size_t length);

// EncodingError if an address exceeds 48 bits or the duration exceeds 16 bits.
BitString encode_frame(const Frame& frame);

// FormatError when the length matches no variant (or the header is
// inconsistent); CorruptionError when the FCS does not verify. The FCS is
// checked before the DATA length field, so a truncated DATA frame reports
// corruption while a truncated control frame reports a format error.
Frame decode_frame(const BitString& bits);

}  // namespace risdcf::protocol
