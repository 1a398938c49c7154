#pragma once

#include <variant>

#include "mandala/bytecode.hpp"
#include "mandala/registry.hpp"

namespace mandala {

// Unit costs per executed instruction-tree node. The interpreter charges
// exactly these, so the statically computed bound dominates every run.
// Versioned with the bytecode format.
struct CostTable {
    uint64_t move = 1;
    uint64_t copy = 2;
    uint64_t drop = 1;
    uint64_t arith = 1;
    uint64_t constructBase = 2;  // + one per field
    uint64_t matchBase = 2;      // + one per arm
    uint64_t call = 10;
    uint64_t cellRead = 50;
    uint64_t cellWrite = 200;
    uint64_t derive = 5;
    uint64_t newId = 20;
    uint64_t newContext = 20;
    uint64_t tryGuard = 2;
    uint64_t lit = 1;
    uint64_t valRead = 10;
    uint64_t attach = 1;
    uint64_t detach = 1;
    uint64_t andReturn = 1;
    uint64_t let = 1;
    uint64_t cycleBase = 2;  // + bound(init) + N * bound(body)

    static const CostTable& v1();
};

struct VerifiedModule {
    Digest address;
    BytecodeModule module;
    std::vector<uint64_t> functionBounds;
    std::vector<uint64_t> valBounds;
    uint64_t initBound = 0;
};

struct VError {
    std::string code;  // V-DECODE, V-TYPE, V-LINEAR, V-CAP, V-EFFECT, V-RISK,
                       // V-DEP-MISSING, V-DEFAULT-DUP
    std::string detail;
};

namespace vcode {
inline constexpr const char* Decode = "V-DECODE";
inline constexpr const char* Type = "V-TYPE";
inline constexpr const char* Linear = "V-LINEAR";
inline constexpr const char* Cap = "V-CAP";
inline constexpr const char* Effect = "V-EFFECT";
inline constexpr const char* Risk = "V-RISK";
inline constexpr const char* DepMissing = "V-DEP-MISSING";
inline constexpr const char* DefaultDup = "V-DEFAULT-DUP";
}  // namespace vcode

// Re-establishes every static guarantee directly on the encoded bytes,
// trusting nothing but the registry, and computes the gas bounds.
std::variant<VerifiedModule, VError> validate(const Bytes& bytes,
                                              const DeployedRegistry& registry,
                                              const CostTable& table = CostTable::v1());

// Worst-case interpretation cost of one function of an already verified
// module (callee bounds come from the registry or earlier entries).
uint64_t gas_bound(const BytecodeModule& m, uint32_t fnIndex,
                   const std::vector<uint64_t>& earlierBounds,
                   const DeployedRegistry& registry, const CostTable& table);

}  // namespace mandala
