#include "copytrace/codec.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <climits>

#include "copytrace/error.hpp"

namespace copytrace {

struct Sha1::Ctx {
    EVP_MD_CTX* md = nullptr;
};

Sha1::Sha1() : ctx_(std::make_unique<Ctx>()) {
    ctx_->md = EVP_MD_CTX_new();
    if (!ctx_->md || EVP_DigestInit_ex(ctx_->md, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("EVP sha1 init failed");
}

Sha1::~Sha1() {
    if (ctx_ && ctx_->md) EVP_MD_CTX_free(ctx_->md);
}

Sha1& Sha1::update(std::span<const std::uint8_t> data) {
    EVP_DigestUpdate(ctx_->md, data.data(), data.size());
    return *this;
}

ObjectId Sha1::finish() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_->md, out, &len);
    return ObjectId::from_raw(out);
}

ObjectId sha1(std::span<const std::uint8_t> data) {
    Sha1 h;
    h.update(data);
    return h.finish();
}

ObjectId git_object_id(std::string_view kind, std::span<const std::uint8_t> payload) {
    std::string header(kind);
    header += ' ';
    header += std::to_string(payload.size());
    header.push_back('\0');
    Sha1 h;
    h.update(header);
    h.update(payload);
    return h.finish();
}

Bytes zlib_inflate(std::span<const std::uint8_t> input, std::size_t size_hint, std::size_t* consumed) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw Error(Errc::CorruptObject, "inflateInit failed");
    Bytes out(size_hint > 0 ? size_hint : 4096);
    std::size_t produced = 0;
    std::size_t fed = 0;
    int rc = Z_OK;
    while (true) {
        if (produced == out.size()) out.resize(out.size() * 2 + 64);
        // zlib counts in uInt; feed large inputs in slices.
        std::size_t in_left = input.size() - fed;
        zs.next_in = const_cast<Bytef*>(input.data() + fed);
        zs.avail_in = static_cast<uInt>(std::min<std::size_t>(in_left, UINT_MAX));
        zs.next_out = out.data() + produced;
        zs.avail_out = static_cast<uInt>(std::min<std::size_t>(out.size() - produced, UINT_MAX));
        uInt in_before = zs.avail_in;
        uInt out_before = zs.avail_out;
        rc = inflate(&zs, Z_NO_FLUSH);
        fed += in_before - zs.avail_in;
        produced += out_before - zs.avail_out;
        if (rc == Z_STREAM_END) break;
        if (rc == Z_BUF_ERROR && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw Error(Errc::CorruptObject, "truncated zlib stream");
        }
        if (rc != Z_OK && rc != Z_BUF_ERROR) {
            inflateEnd(&zs);
            throw Error(Errc::CorruptObject, std::string("zlib: ") + (zs.msg ? zs.msg : "inflate error"));
        }
    }
    inflateEnd(&zs);
    out.resize(produced);
    if (consumed) *consumed = fed;
    return out;
}

Bytes zlib_deflate(std::span<const std::uint8_t> input) {
    uLongf bound = compressBound(static_cast<uLong>(input.size()));
    Bytes out(bound);
    if (compress2(out.data(), &bound, input.data(), static_cast<uLong>(input.size()), Z_BEST_SPEED) != Z_OK)
        throw Error(Errc::IoError, "deflate failed");
    out.resize(bound);
    return out;
}

}  // namespace copytrace
