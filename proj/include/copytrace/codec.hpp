#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copytrace/object_id.hpp"

namespace copytrace {

using Bytes = std::vector<std::uint8_t>;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline std::string_view as_chars(std::span<const std::uint8_t> b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

/// Incremental SHA-1 (OpenSSL EVP).
class Sha1 {
public:
    Sha1();
    ~Sha1();
    Sha1(const Sha1&) = delete;
    Sha1& operator=(const Sha1&) = delete;

    Sha1& update(std::span<const std::uint8_t> data);
    Sha1& update(std::string_view data) { return update(as_bytes(data)); }
    ObjectId finish();

private:
    struct Ctx;
    std::unique_ptr<Ctx> ctx_;
};

ObjectId sha1(std::span<const std::uint8_t> data);
inline ObjectId sha1(std::string_view data) { return sha1(as_bytes(data)); }

/// Name of a git object: sha1("<kind> <size>\0" ++ payload).
ObjectId git_object_id(std::string_view kind, std::span<const std::uint8_t> payload);

/// Inflates one zlib stream starting at the front of `input`. `consumed` receives
/// the compressed byte count. `size_hint` pre-sizes the output buffer.
/// Throws Error(CorruptObject) on a malformed or truncated stream.
Bytes zlib_inflate(std::span<const std::uint8_t> input, std::size_t size_hint = 0,
                   std::size_t* consumed = nullptr);

/// Deterministic zlib compression (fixed level).
Bytes zlib_deflate(std::span<const std::uint8_t> input);

}  // namespace copytrace
