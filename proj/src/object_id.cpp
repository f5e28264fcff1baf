#include "copytrace/object_id.hpp"

#include "copytrace/error.hpp"

namespace copytrace {

namespace {

int nibble(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr char kDigits[] = "0123456789abcdef";

}  // namespace

std::optional<ObjectId> ObjectId::try_from_hex(std::string_view hex) noexcept {
    if (hex.size() != kHexSize) return std::nullopt;
    ObjectId id;
    for (std::size_t i = 0; i < kRawSize; ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        id.raw_[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return id;
}

ObjectId ObjectId::from_hex(std::string_view hex) {
    auto id = try_from_hex(hex);
    if (!id) throw Error(Errc::ConfigInvalid, "not a 40-digit object id: '" + std::string(hex) + "'");
    return *id;
}

void ObjectId::append_hex(std::string& out) const {
    for (std::uint8_t b : raw_) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 15]);
    }
}

std::string ObjectId::hex() const {
    std::string out;
    out.reserve(kHexSize);
    append_hex(out);
    return out;
}

bool ObjectId::is_zero() const noexcept {
    for (std::uint8_t b : raw_)
        if (b) return false;
    return true;
}

}  // namespace copytrace
