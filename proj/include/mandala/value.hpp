#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mandala/bytecode.hpp"
#include "mandala/registry.hpp"

namespace mandala {

// Runtime value. Type references are absolute (no "this module" digests)
// and every value carries its capability set, mirroring the static
// discipline at run time.
enum class ValK : uint8_t {
    UInt = 0,
    Int = 1,
    Unit = 2,
    Tuple = 3,
    Adt = 4,
    Id = 5,
    Context = 6,
    Ref = 7,
};

struct Value {
    ValK k = ValK::Unit;
    CapSet caps;
    uint64_t u = 0;
    int64_t i = 0;
    std::vector<Value> fields;       // Tuple / Adt
    Digest module;                   // Adt: defining module
    uint32_t typeIndex = 0;          // Adt
    uint32_t ctorIndex = 0;          // Adt
    std::vector<SemType> typeArgs;   // Adt
    Digest bytes32;                  // Id / Context / Ref payload
    std::optional<SemType> inner;    // Context / Ref content type

    static Value make_uint(uint64_t v);
    static Value make_int(int64_t v);
    static Value make_unit();
    static Value make_id(const Digest& d, bool master);

    bool operator==(const Value& o) const;
};

// The static type of a runtime value (absolute form).
SemType value_type(const Value& v);

// Canonical byte form shared by cells, vals, the write-ahead log and the
// state digest.
Bytes encode_value(const Value& v);
std::optional<Value> decode_value(const Bytes& b);

// Human-readable rendering: `Token[MyToken](100000000)`. Unresolvable
// names fall back to short hex.
std::string render_value(const Value& v, const DeployedRegistry& reg);
std::string render_type(const SemType& t, const DeployedRegistry& reg);

}  // namespace mandala
