#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace mandala {

// 32-byte content digest. Used for module addresses, cell keys, IDs,
// contexts and state digests alike.
struct Digest {
    std::array<uint8_t, 32> bytes{};

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;
    bool is_zero() const {
        for (auto b : bytes)
            if (b) return false;
        return true;
    }
};

Digest sha256(const void* data, size_t len);
Digest sha256(std::string_view s);
Digest sha256(const std::vector<uint8_t>& v);

std::string to_hex(const Digest& d);
std::string to_hex_short(const Digest& d);  // first 8 hex chars, for display
bool from_hex(std::string_view hex, Digest& out);

// Incremental hasher for composite digests.
class Hasher {
public:
    Hasher();
    ~Hasher();
    Hasher(const Hasher&) = delete;
    Hasher& operator=(const Hasher&) = delete;

    void update(const void* data, size_t len);
    void update(std::string_view s);
    void update_u8(uint8_t v);
    void update_u32(uint32_t v);
    void update_u64(uint64_t v);
    void update(const Digest& d);
    Digest finish();

private:
    void* ctx_;
};

}  // namespace mandala
