#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mandala/digest.hpp"

namespace mandala {

// Builtin capabilities, encoded as a bitmask.
enum class BuiltinCap : uint8_t {
    Drop = 1 << 0,
    Copy = 1 << 1,
    Persist = 1 << 2,
    Modify = 1 << 3,
    Inspect = 1 << 4,
    Master = 1 << 5,
};

const char* builtin_cap_name(BuiltinCap c);
std::optional<BuiltinCap> builtin_cap_by_name(const std::string& name);

// A user-defined capability, identified by its defining module and the
// index into that module's capability table.
struct UserCap {
    Digest module;
    uint32_t index = 0;
    bool operator==(const UserCap&) const = default;
    auto operator<=>(const UserCap&) const = default;
};

// Set of capabilities attached to a type instance. Value semantics,
// order-independent equality; the user list is kept sorted.
class CapSet {
public:
    CapSet() = default;
    static CapSet of(std::initializer_list<BuiltinCap> caps);

    bool has(BuiltinCap c) const { return mask_ & uint8_t(c); }
    bool has(const UserCap& c) const;
    void add(BuiltinCap c) { mask_ |= uint8_t(c); }
    void add(const UserCap& c);
    void remove(BuiltinCap c) { mask_ &= ~uint8_t(c); }
    void remove(const UserCap& c);

    bool empty() const { return mask_ == 0 && user_.empty(); }
    uint8_t builtin_mask() const { return mask_; }
    const std::vector<UserCap>& user() const { return user_; }

    // true if every capability in `required` is present here.
    bool covers(const CapSet& required) const;
    CapSet intersect(const CapSet& other) const;
    CapSet unite(const CapSet& other) const;

    bool operator==(const CapSet&) const = default;
    auto operator<=>(const CapSet&) const = default;

private:
    uint8_t mask_ = 0;
    std::vector<UserCap> user_;  // sorted, unique
};

inline const CapSet kCopyDropPersist =
    CapSet::of({BuiltinCap::Copy, BuiltinCap::Drop, BuiltinCap::Persist});

}  // namespace mandala
