#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mandala/ast.hpp"
#include "mandala/caps.hpp"
#include "mandala/digest.hpp"
#include "mandala/types.hpp"

namespace mandala {

// Canonical module form. Cross-module references are by 32-byte address;
// a zero module digest inside SemType/CapRef/RiskRef means "this module".
// Encoding is canonical: encode(decode(b)) == b for every valid b, and the
// module address is the digest of the encoded bytes.

inline constexpr char kMagic[4] = {'M', 'D', 'L', 'C'};
inline constexpr uint16_t kBytecodeVersion = 1;  // value codec + sha256 addressing

struct CapRef {
    bool builtin = true;
    BuiltinCap b = BuiltinCap::Drop;
    Digest module;  // user cap: defining module (zero = self)
    uint32_t index = 0;
    std::string name;  // display only, not encoded

    bool operator==(const CapRef& o) const {
        if (builtin != o.builtin) return false;
        return builtin ? b == o.b : (module == o.module && index == o.index);
    }
};

enum class BuiltinRisk : uint8_t { NumericOverflow = 0, NumericUnderflow = 1, EmptyCell = 2 };

const char* builtin_risk_name(BuiltinRisk r);

struct RiskRef {
    bool builtin = true;
    BuiltinRisk b = BuiltinRisk::NumericOverflow;
    Digest module;  // user risk: owning module (zero = self)
    std::string name;

    bool operator==(const RiskRef& o) const {
        if (builtin != o.builtin) return false;
        return builtin ? b == o.b : (module == o.module && name == o.name);
    }
    bool operator<(const RiskRef& o) const {
        if (builtin != o.builtin) return builtin;
        if (builtin) return b < o.b;
        if (module != o.module) return module < o.module;
        return name < o.name;
    }
    std::string display() const { return builtin ? builtin_risk_name(b) : name; }
};

// Instruction tree. MOVE/COPY/DROP are explicit so the validator can audit
// the substructural discipline without the source.
enum class NodeK : uint8_t {
    LitU = 0,
    LitI = 1,
    LitUnit = 2,
    UseMove = 3,
    UseCopy = 4,
    Drop = 5,      // slot; kids[0] = continuation
    Let = 6,       // slot; kids[0] = rhs, kids[1] = body
    Construct = 7, // module+index = type, index2 = ctor, typeArgs, kids = fields
    MakeTuple = 8,
    Call = 9,      // module+index = function, typeArgs, kids = args
    LoadVal = 10,  // module+index = val
    Arith = 11,    // op: 0 add, 1 sub; kids = lhs, rhs
    Match = 12,    // kids[0] = scrutinee; arms with ctor index + binder slots
    MatchTuple = 13,
    Modify = 14,   // slot = cell binder; kids[0] = ref, kids[1] = transition
    AndReturn = 15,
    Attach = 16,
    Detach = 17,
    Try = 18,      // kids[0] = call; arms keyed by risk
    Cycle = 19,    // lit = N, slot = accumulator; kids[0] = init, kids[1] = body
    NewId = 20,
    NewContext = 21,  // typeArgs[0] = cell content type
    Derive = 22,      // kids = context, id
};

struct IrNode;

struct IrArm {
    uint32_t ctorIndex = 0;  // Match
    RiskRef risk;            // Try
    std::vector<uint32_t> slots;
    std::vector<uint32_t> dropsAtEntry;  // slots dropped on entering this arm
    std::vector<IrNode> body;            // exactly one element
};

struct IrNode {
    NodeK k = NodeK::LitUnit;
    uint64_t lit = 0;  // LitU bits / LitI bits / Cycle count
    uint32_t slot = 0;
    uint8_t op = 0;
    Digest module;  // Construct/Call/LoadVal target (zero = self)
    uint32_t index = 0;
    uint32_t index2 = 0;
    std::vector<SemType> typeArgs;
    CapRef cap;
    std::vector<uint32_t> extraSlots;  // Try: dropped when the call succeeds
    std::vector<IrNode> kids;
    std::vector<IrArm> arms;
};

struct BParam {
    std::string name;
    SemType type;
};

struct BFunction {
    std::string name;
    Visibility vis = Visibility::Private;
    uint32_t protectedParam = 0;
    Effect effect = Effect::Pure;
    uint32_t defaultFor = UINT32_MAX;  // type index or none
    std::vector<RiskRef> risks;        // sorted
    std::vector<std::string> typeParams;
    std::vector<BParam> params;
    SemType ret;
    uint32_t slotCount = 0;  // params occupy slots [0, params.size())
    std::vector<std::string> slotNames;
    std::vector<uint32_t> entryDrops;
    IrNode body;
};

struct BVal {
    std::string name;
    SemType type;
    uint32_t slotCount = 0;
    std::vector<std::string> slotNames;
    IrNode init;
};

struct BInit {
    std::vector<RiskRef> risks;
    BParam param;
    uint32_t slotCount = 0;
    std::vector<std::string> slotNames;
    std::vector<uint32_t> entryDrops;
    IrNode body;
};

struct BCtor {
    std::string name;
    std::vector<SemType> fields;
};

struct BTypeDecl {
    std::string name;
    bool open = false;
    CapSet declaredCaps;
    std::vector<std::string> typeParams;
    std::vector<BCtor> ctors;
};

struct BCapability {
    std::string name;
    bool open = false;
};

struct BytecodeModule {
    uint16_t version = kBytecodeVersion;
    std::string name;
    std::vector<BTypeDecl> types;
    std::vector<BCapability> caps;
    std::vector<Digest> imports;
    std::vector<BFunction> functions;
    std::vector<BVal> vals;
    std::optional<BInit> init;

    const BFunction* find_function(const std::string& n) const;
    int function_index(const std::string& n) const;
    int val_index(const std::string& n) const;
    int type_index(const std::string& n) const;
};

struct DecodeError {
    size_t offset = 0;
    std::string reason;
};

using Bytes = std::vector<uint8_t>;

// Canonical encoding; little-endian fixed-width integers, length-prefixed
// sections in fixed order (types, caps, imports, functions, vals, init).
Bytes encode(const BytecodeModule& m);
std::variant<BytecodeModule, DecodeError> decode(const Bytes& bytes);

inline Digest module_address(const Bytes& bytes) { return sha256(bytes); }

}  // namespace mandala
