#include "mandala/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace mandala {

Digest sha256(const void* data, size_t len) {
    Digest out;
    unsigned int n = 0;
    EVP_Digest(data, len, out.bytes.data(), &n, EVP_sha256(), nullptr);
    return out;
}

Digest sha256(std::string_view s) { return sha256(s.data(), s.size()); }
Digest sha256(const std::vector<uint8_t>& v) { return sha256(v.data(), v.size()); }

static const char* kHex = "0123456789abcdef";

std::string to_hex(const Digest& d) {
    std::string s;
    s.reserve(64);
    for (auto b : d.bytes) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xf]);
    }
    return s;
}

std::string to_hex_short(const Digest& d) { return to_hex(d).substr(0, 8); }

static int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool from_hex(std::string_view hex, Digest& out) {
    if (hex.size() != 64) return false;
    for (size_t i = 0; i < 32; i++) {
        int hi = hex_val(hex[2 * i]), lo = hex_val(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return false;
        out.bytes[i] = static_cast<uint8_t>(hi << 4 | lo);
    }
    return true;
}

Hasher::Hasher() {
    auto* c = EVP_MD_CTX_new();
    if (!c || EVP_DigestInit_ex(c, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 init failed");
    ctx_ = c;
}

Hasher::~Hasher() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Hasher::update(const void* data, size_t len) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len);
}

void Hasher::update(std::string_view s) { update(s.data(), s.size()); }
void Hasher::update_u8(uint8_t v) { update(&v, 1); }

void Hasher::update_u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    update(b, 4);
}

void Hasher::update_u64(uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; i++) b[i] = uint8_t(v >> (8 * i));
    update(b, 8);
}

void Hasher::update(const Digest& d) { update(d.bytes.data(), d.bytes.size()); }

Digest Hasher::finish() {
    Digest out;
    unsigned int n = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.bytes.data(), &n);
    return out;
}

}  // namespace mandala
