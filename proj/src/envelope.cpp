#include "hermes/envelope.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace hermes {

void ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::span<const std::uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
}

bool ByteReader::need(std::size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
        ok_ = false;
        return false;
    }
    return true;
}

std::uint8_t ByteReader::u8() {
    if (!need(1)) return 0;
    return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
    if (!need(2)) return 0;
    const std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
}

std::uint64_t ByteReader::u64() {
    if (!need(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> ByteReader::bytes(std::size_t n) {
    if (!need(n)) return {};
    std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
}

const char* to_string(Category c) {
    switch (c) {
        case Category::Routing: return "routing";
        case Category::Lifecycle: return "lifecycle";
        case Category::Middleware: return "middleware";
        case Category::Data: return "data";
        case Category::Monitoring: return "monitoring";
    }
    return "?";
}

const char* to_string(DecodeError e) {
    switch (e) {
        case DecodeError::None: return "none";
        case DecodeError::Truncated: return "truncated";
        case DecodeError::BadMagic: return "bad-magic";
        case DecodeError::BadVersion: return "bad-version";
        case DecodeError::BadCategory: return "bad-category";
        case DecodeError::LengthMismatch: return "length-mismatch";
    }
    return "?";
}

std::vector<std::uint8_t> encode(const Envelope& env) {
    if (env.payload.size() > Envelope::kMaxPayload) throw std::length_error("envelope payload too large");
    ByteWriter w;
    w.u8(Envelope::kMagic);
    w.u8(Envelope::kVersion);
    w.u8(static_cast<std::uint8_t>(env.category));
    w.u8(env.type);
    w.ip(env.src);
    w.ip(env.dst);
    w.ip(env.final_dst);
    w.u32(env.id);
    w.u16(static_cast<std::uint16_t>(env.payload.size()));
    w.bytes(env.payload);
    return w.take();
}

std::optional<Envelope> decode(std::span<const std::uint8_t> frame, DecodeError* error) {
    auto fail = [&](DecodeError e) -> std::optional<Envelope> {
        if (error) *error = e;
        return std::nullopt;
    };
    if (frame.size() < Envelope::kHeaderSize) return fail(DecodeError::Truncated);
    ByteReader r(frame);
    if (r.u8() != Envelope::kMagic) return fail(DecodeError::BadMagic);
    if (r.u8() != Envelope::kVersion) return fail(DecodeError::BadVersion);
    const std::uint8_t cat = r.u8();
    if (cat < 1 || cat > 5) return fail(DecodeError::BadCategory);
    Envelope env;
    env.category = static_cast<Category>(cat);
    env.type = r.u8();
    env.src = r.ip();
    env.dst = r.ip();
    env.final_dst = r.ip();
    env.id = r.u32();
    const std::uint16_t len = r.u16();
    if (r.remaining() < len) return fail(DecodeError::Truncated);
    if (r.remaining() > len) return fail(DecodeError::LengthMismatch);
    env.payload = r.bytes(len);
    if (error) *error = DecodeError::None;
    return env;
}

}  // namespace hermes
