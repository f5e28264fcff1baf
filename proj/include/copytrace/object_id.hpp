#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace copytrace {

/// 20-byte SHA-1 object name. Ordering is bytewise, which matches ordering
/// of the lowercase hex rendering.
class ObjectId {
public:
    static constexpr std::size_t kRawSize = 20;
    static constexpr std::size_t kHexSize = 40;

    ObjectId() = default;
    explicit ObjectId(std::span<const std::uint8_t, kRawSize> raw) {
        std::memcpy(raw_.data(), raw.data(), kRawSize);
    }

    static ObjectId from_raw(const void* bytes) {
        ObjectId id;
        std::memcpy(id.raw_.data(), bytes, kRawSize);
        return id;
    }
    /// Throws Error(ConfigInvalid) unless `hex` is 40 chars of [0-9a-fA-F].
    static ObjectId from_hex(std::string_view hex);
    static std::optional<ObjectId> try_from_hex(std::string_view hex) noexcept;

    std::string hex() const;
    void append_hex(std::string& out) const;

    const std::array<std::uint8_t, kRawSize>& raw() const noexcept { return raw_; }
    std::uint8_t operator[](std::size_t i) const noexcept { return raw_[i]; }
    bool is_zero() const noexcept;

    auto operator<=>(const ObjectId&) const = default;
    bool operator==(const ObjectId&) const = default;

private:
    std::array<std::uint8_t, kRawSize> raw_{};
};

struct ObjectIdHash {
    std::size_t operator()(const ObjectId& id) const noexcept {
        std::size_t h;
        std::memcpy(&h, id.raw().data(), sizeof h);
        return h;
    }
};

}  // namespace copytrace

template <>
struct std::hash<copytrace::ObjectId> : copytrace::ObjectIdHash {};
