#include <doctest.h>

#include <string>

#include "copytrace/codec.hpp"
#include "copytrace/error.hpp"

using namespace copytrace;

TEST_SUITE("codec") {

TEST_CASE("sha1 reference vectors") {
    CHECK(sha1("").hex() == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    CHECK(sha1("abc").hex() == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(sha1("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").hex() ==
          "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
    std::string million(1000000, 'a');
    CHECK(sha1(million).hex() == "34aa973cd4c4daa4f61eeb2bdbad27316534016f");
}

TEST_CASE("incremental sha1 matches one-shot") {
    std::string text = "The quick brown fox jumps over the lazy dog";
    Sha1 h;
    for (char c : text) h.update(std::string_view(&c, 1));
    CHECK(h.finish() == sha1(text));
}

TEST_CASE("git object names") {
    // `git hash-object` of an empty file and of "hello\n"
    CHECK(git_object_id("blob", as_bytes("")).hex() == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_object_id("blob", as_bytes("hello\n")).hex() == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_object_id("tree", as_bytes("")).hex() == "4b825dc642cb6eb9a060e54bf8d69288fbee4904");
}

TEST_CASE("object id hex round trip and ordering") {
    auto a = ObjectId::from_hex("00ff00ff00ff00ff00ff00ff00ff00ff00ff00ff");
    auto b = ObjectId::from_hex("0100000000000000000000000000000000000000");
    CHECK(a.hex() == "00ff00ff00ff00ff00ff00ff00ff00ff00ff00ff");
    CHECK(a < b);
    CHECK(ObjectId::from_hex("ABCDEF0123456789ABCDEF0123456789ABCDEF01").hex() ==
          "abcdef0123456789abcdef0123456789abcdef01");
    CHECK_FALSE(ObjectId::try_from_hex("xyz").has_value());
    CHECK_FALSE(ObjectId::try_from_hex(std::string(40, 'g')).has_value());
    CHECK_THROWS_AS(ObjectId::from_hex("123"), Error);
    CHECK(ObjectId().is_zero());
}

TEST_CASE("zlib round trip") {
    std::string text;
    for (int i = 0; i < 5000; ++i) text += std::to_string(i * 7919 % 1013) + ",";
    Bytes z = zlib_deflate(as_bytes(text));
    CHECK(z.size() < text.size());
    std::size_t consumed = 0;
    Bytes trailing = z;
    trailing.push_back(0x42);
    Bytes back = zlib_inflate(trailing, 0, &consumed);
    CHECK(as_chars(back) == text);
    CHECK(consumed == z.size());
}

TEST_CASE("truncated zlib stream is rejected") {
    Bytes z = zlib_deflate(as_bytes(std::string(1000, 'q')));
    z.resize(z.size() / 2);
    try {
        zlib_inflate(z);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CorruptObject);
    }
}

}
