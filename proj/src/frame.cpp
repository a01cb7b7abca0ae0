#include "risdcf/frame.hpp"

#include <cstdio>

namespace risdcf::protocol {

namespace {

// 802.11-style first octet (type/subtype) and a second octet flagging the
// RIS-DCF extension.
constexpr std::uint16_t kFcRRts = 0xB480;
constexpr std::uint16_t kFcRCts = 0xC480;
constexpr std::uint16_t kFcAck = 0xD480;
constexpr std::uint16_t kFcData = 0x0880;
constexpr std::uint64_t kPreamble = 0xAAAAAAAAAAAAAAAAULL;

std::uint16_t frame_control(FrameKind kind) {
    switch (kind) {
        case FrameKind::RRts: return kFcRRts;
        case FrameKind::RCts: return kFcRCts;
        case FrameKind::Ack: return kFcAck;
        case FrameKind::Data: return kFcData;
    }
    return 0;
}

void put_address(BitString& out, MacAddress addr, const char* field) {
    if (addr.value > MacAddress::kMax) {
        throw EncodingError(std::string(field) + " does not fit in 48 bits");
    }
    out.append(addr.value, 48);
}

}  // namespace

std::string to_string(MacAddress addr) {
    char buf[18];
    const std::uint64_t v = addr.value;
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                  static_cast<unsigned>((v >> 40) & 0xff), static_cast<unsigned>((v >> 32) & 0xff),
                  static_cast<unsigned>((v >> 24) & 0xff), static_cast<unsigned>((v >> 16) & 0xff),
                  static_cast<unsigned>((v >> 8) & 0xff), static_cast<unsigned>(v & 0xff));
    return buf;
}

std::string_view to_string(FrameKind kind) {
    switch (kind) {
        case FrameKind::RRts: return "RRTS";
        case FrameKind::RCts: return "RCTS";
        case FrameKind::Data: return "DATA";
        case FrameKind::Ack: return "ACK";
    }
    return "?";
}

Frame make_rrts(MacAddress ra, MacAddress da, MacAddress ta, std::uint32_t duration_us) {
    Frame f;
    f.kind = FrameKind::RRts;
    f.duration_us = duration_us;
    f.receiver = ra;
    f.destination = da;
    f.transmitter = ta;
    return f;
}

Frame make_rcts(MacAddress ra, MacAddress sa, std::uint32_t duration_us) {
    Frame f;
    f.kind = FrameKind::RCts;
    f.duration_us = duration_us;
    f.receiver = ra;
    f.sender = sa;
    return f;
}

Frame make_data(MacAddress ra, MacAddress da, MacAddress ta, MacAddress sa,
                std::uint32_t duration_us, std::uint32_t payload_bits) {
    Frame f;
    f.kind = FrameKind::Data;
    f.duration_us = duration_us;
    f.receiver = ra;
    f.destination = da;
    f.transmitter = ta;
    f.sender = sa;
    f.payload_bits = payload_bits;
    return f;
}

Frame make_ack(MacAddress ra, MacAddress ta, std::uint32_t duration_us) {
    Frame f;
    f.kind = FrameKind::Ack;
    f.duration_us = duration_us;
    f.receiver = ra;
    f.transmitter = ta;
    return f;
}

std::size_t encoded_length(const Frame& frame) {
    switch (frame.kind) {
        case FrameKind::RRts: return kRRtsBits;
        case FrameKind::RCts: return kRCtsBits;
        case FrameKind::Ack: return kAckBits;
        case FrameKind::Data: return kDataOverheadBits + frame.payload_bits;
    }
    return 0;
}

bool BitString::bit(std::size_t index) const {
    if (index >= size_) throw std::out_of_range("bit index out of range");
    return (bytes_[index / 8] >> (7 - index % 8)) & 1U;
}

void BitString::flip(std::size_t index) {
    if (index >= size_) throw std::out_of_range("bit index out of range");
    bytes_[index / 8] ^= static_cast<std::uint8_t>(1U << (7 - index % 8));
}

void BitString::append(std::uint64_t value, int width) {
    for (int i = width - 1; i >= 0; --i) {
        if (size_ % 8 == 0) bytes_.push_back(0);
        if ((value >> i) & 1U) bytes_.back() |= static_cast<std::uint8_t>(1U << (7 - size_ % 8));
        ++size_;
    }
}

std::uint64_t BitString::read(std::size_t offset, int width) const {
    if (offset + static_cast<std::size_t>(width) > size_) throw std::out_of_range("read past end");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 1) | static_cast<std::uint64_t>(bit(offset + i));
    return v;
}

BitString BitString::prefix(std::size_t length) const {
    if (length > size_) throw std::out_of_range("prefix longer than string");
    BitString out;
    out.bytes_.assign(bytes_.begin(), bytes_.begin() + static_cast<std::ptrdiff_t>((length + 7) / 8));
    out.size_ = length;
    if (length % 8 != 0) out.bytes_.back() &= static_cast<std::uint8_t>(0xFF << (8 - length % 8));
    return out;
}

std::uint32_t crc32_bits(const BitString& bits, std::size_t length) {
    std::uint32_t crc = 0xFFFFFFFFU;
    for (std::size_t i = 0; i < length; ++i) {
        const std::uint32_t b = bits.bit(i) ? 1U : 0U;
        const bool mix = ((crc ^ b) & 1U) != 0;
        crc >>= 1;
        if (mix) crc ^= 0xEDB88320U;
    }
    return crc ^ 0xFFFFFFFFU;
}

BitString encode_frame(const Frame& f) {
    if (f.duration_us > 0xFFFF) throw EncodingError("duration exceeds 16 bits");
    BitString out;
    if (f.kind == FrameKind::Data) {
        out.append(kPreamble, 64);
        out.append(f.payload_bits, 32);
        out.append(0, 32);
    }
    out.append(frame_control(f.kind), 16);
    out.append(f.duration_us, 16);
    put_address(out, f.receiver, "RA");
    switch (f.kind) {
        case FrameKind::RRts:
            put_address(out, f.destination, "DA");
            put_address(out, f.transmitter, "TA");
            break;
        case FrameKind::RCts:
            put_address(out, f.sender, "SA");
            break;
        case FrameKind::Ack:
            put_address(out, f.transmitter, "TA");
            out.append(0, 64);
            out.append(0, 16);
            break;
        case FrameKind::Data:
            put_address(out, f.destination, "DA");
            put_address(out, f.transmitter, "TA");
            put_address(out, f.sender, "SA");
            out.append(0, 16);
            for (std::uint32_t left = f.payload_bits; left > 0;) {
                const int chunk = left >= 64 ? 64 : static_cast<int>(left);
                out.append(0, chunk);
                left -= static_cast<std::uint32_t>(chunk);
            }
            break;
    }
    out.append(crc32_bits(out, out.size()), 32);
    return out;
}

Frame decode_frame(const BitString& bits) {
    const std::size_t n = bits.size();
    FrameKind kind;
    std::size_t mac_start = 0;
    if (n == kRRtsBits) {
        kind = FrameKind::RRts;
    } else if (n == kRCtsBits) {
        kind = FrameKind::RCts;
    } else if (n == kAckBits) {
        kind = FrameKind::Ack;
    } else if (n >= kDataOverheadBits) {
        kind = FrameKind::Data;
        mac_start = 128;
    } else {
        throw FormatError("bit length " + std::to_string(n) + " matches no frame variant");
    }

    const auto fcs = static_cast<std::uint32_t>(bits.read(n - 32, 32));
    if (crc32_bits(bits, n - 32) != fcs) throw CorruptionError("FCS mismatch");

    if (bits.read(mac_start, 16) != frame_control(kind)) {
        throw FormatError("frame control does not match a " + std::string(to_string(kind)) +
                          " of this length");
    }

    Frame f;
    f.kind = kind;
    std::size_t pos = mac_start + 16;
    auto take = [&](int width) {
        const std::uint64_t v = bits.read(pos, width);
        pos += static_cast<std::size_t>(width);
        return v;
    };
    f.duration_us = static_cast<std::uint32_t>(take(16));
    f.receiver = MacAddress{take(48)};
    switch (kind) {
        case FrameKind::RRts:
            f.destination = MacAddress{take(48)};
            f.transmitter = MacAddress{take(48)};
            break;
        case FrameKind::RCts:
            f.sender = MacAddress{take(48)};
            break;
        case FrameKind::Ack:
            f.transmitter = MacAddress{take(48)};
            if (take(64) != 0 || take(16) != 0) throw FormatError("nonzero ACK padding");
            break;
        case FrameKind::Data: {
            if (bits.read(0, 64) != kPreamble) throw FormatError("bad PHY preamble");
            const auto length = bits.read(64, 32);
            if (length != n - kDataOverheadBits) {
                throw FormatError("PHY length field disagrees with frame length");
            }
            if (bits.read(96, 32) != 0) throw FormatError("nonzero PHY reserved bits");
            f.payload_bits = static_cast<std::uint32_t>(length);
            f.destination = MacAddress{take(48)};
            f.transmitter = MacAddress{take(48)};
            f.sender = MacAddress{take(48)};
            if (take(16) != 0) throw FormatError("nonzero sequence control");
            break;
        }
    }
    return f;
}

}  // namespace risdcf::protocol
