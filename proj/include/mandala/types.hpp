#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mandala/caps.hpp"
#include "mandala/digest.hpp"

namespace mandala {

enum class TypeK : uint8_t {
    UInt = 0,
    Int = 1,
    Unit = 2,
    Id = 3,
    Context = 4,  // one inner type
    Ref = 5,      // one inner type
    Adt = 6,      // module + index + args
    Tuple = 7,
    Var = 8,  // function/type parameter, by index
};

// A fully elaborated type together with its capability set. Two types are
// the same only if base, arguments and capabilities all agree; display
// names are carried for diagnostics and do not participate in identity.
struct SemType {
    TypeK kind = TypeK::Unit;
    CapSet caps;
    Digest module;       // Adt: defining module; zero digest = "this module"
    uint32_t index = 0;  // Adt: type table index; Var: parameter index
    std::string name;    // display only
    std::vector<SemType> args;

    bool equals(const SemType& o) const;
    bool operator==(const SemType& o) const { return equals(o); }
};

SemType make_prim(TypeK k);  // UInt/Int/Unit/Id with Copy+Drop+Persist
SemType make_context(SemType inner);
SemType make_ref(SemType inner);
SemType make_adt(Digest module, uint32_t index, std::string name,
                 std::vector<SemType> args, CapSet caps);
SemType make_tuple(std::vector<SemType> elems);
SemType make_var(uint32_t index, std::string name);

// Capabilities a type carries when mentioned without an explicit
// capability annotation. Primitives are inherently Copy/Drop/Persist;
// tuples take the common subset of their elements; type variables none.
// For ADTs the declared set must be supplied by the caller.
CapSet natural_prim_caps();
CapSet tuple_caps(const std::vector<SemType>& elems);

// Substitute Var(i) with bindings[i]. A Var mention carrying explicit
// capabilities keeps those as its demanded set.
SemType substitute(const SemType& t, const std::vector<SemType>& bindings);
bool contains_var(const SemType& t);

// Structural unification used for local generic inference. Inner
// positions are invariant; at the top level the argument may carry more
// capabilities than the parameter demands.
bool unify(const SemType& param, const SemType& arg,
           std::vector<std::optional<SemType>>& bindings, bool top_level);

std::string type_to_string(const SemType& t);

}  // namespace mandala
