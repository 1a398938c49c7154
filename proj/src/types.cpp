#include "mandala/types.hpp"

#include <sstream>

namespace mandala {

bool SemType::equals(const SemType& o) const {
    if (kind != o.kind || caps != o.caps || index != o.index) return false;
    if (kind == TypeK::Adt && module != o.module) return false;
    if (args.size() != o.args.size()) return false;
    for (size_t i = 0; i < args.size(); i++)
        if (!args[i].equals(o.args[i])) return false;
    return true;
}

CapSet natural_prim_caps() { return kCopyDropPersist; }

SemType make_prim(TypeK k) {
    SemType t;
    t.kind = k;
    t.caps = natural_prim_caps();
    return t;
}

SemType make_context(SemType inner) {
    SemType t;
    t.kind = TypeK::Context;
    t.caps = natural_prim_caps();
    t.args.push_back(std::move(inner));
    return t;
}

SemType make_ref(SemType inner) {
    SemType t;
    t.kind = TypeK::Ref;
    t.caps = natural_prim_caps();
    t.args.push_back(std::move(inner));
    return t;
}

SemType make_adt(Digest module, uint32_t index, std::string name,
                 std::vector<SemType> args, CapSet caps) {
    SemType t;
    t.kind = TypeK::Adt;
    t.module = module;
    t.index = index;
    t.name = std::move(name);
    t.args = std::move(args);
    t.caps = std::move(caps);
    return t;
}

CapSet tuple_caps(const std::vector<SemType>& elems) {
    CapSet c = kCopyDropPersist;
    for (const auto& e : elems) c = c.intersect(e.caps);
    return c;
}

SemType make_tuple(std::vector<SemType> elems) {
    SemType t;
    t.kind = TypeK::Tuple;
    t.caps = tuple_caps(elems);
    t.args = std::move(elems);
    return t;
}

SemType make_var(uint32_t index, std::string name) {
    SemType t;
    t.kind = TypeK::Var;
    t.index = index;
    t.name = std::move(name);
    return t;
}

SemType substitute(const SemType& t, const std::vector<SemType>& bindings) {
    if (t.kind == TypeK::Var) {
        if (t.index < bindings.size()) {
            SemType out = bindings[t.index];
            if (!t.caps.empty()) out.caps = t.caps;
            return out;
        }
        return t;
    }
    SemType out = t;
    for (auto& a : out.args) a = substitute(a, bindings);
    if (out.kind == TypeK::Tuple) out.caps = tuple_caps(out.args);
    return out;
}

bool contains_var(const SemType& t) {
    if (t.kind == TypeK::Var) return true;
    for (const auto& a : t.args)
        if (contains_var(a)) return true;
    return false;
}

bool unify(const SemType& param, const SemType& arg,
           std::vector<std::optional<SemType>>& bindings, bool top_level) {
    if (param.kind == TypeK::Var) {
        if (param.index >= bindings.size()) return false;
        auto& slot = bindings[param.index];
        if (slot) return slot->equals(arg);
        slot = arg;
        return true;
    }
    if (param.kind != arg.kind || param.index != arg.index) return false;
    if (param.kind == TypeK::Adt && param.module != arg.module) return false;
    if (param.args.size() != arg.args.size()) return false;
    for (size_t i = 0; i < param.args.size(); i++)
        if (!unify(param.args[i], arg.args[i], bindings, false)) return false;
    if (top_level) return arg.caps.covers(param.caps);
    return arg.caps == param.caps;
}

std::string type_to_string(const SemType& t) {
    std::ostringstream os;
    auto caps = [&](const CapSet& c) {
        for (auto b : {BuiltinCap::Drop, BuiltinCap::Copy, BuiltinCap::Persist,
                       BuiltinCap::Modify, BuiltinCap::Inspect, BuiltinCap::Master})
            if (c.has(b)) os << builtin_cap_name(b) << ' ';
        for (const auto& u : c.user()) os << "cap#" << u.index << ' ';
    };
    caps(t.caps);
    switch (t.kind) {
        case TypeK::UInt: os << "UInt"; break;
        case TypeK::Int: os << "Int"; break;
        case TypeK::Unit: os << "Unit"; break;
        case TypeK::Id: os << "ID"; break;
        case TypeK::Context: os << "Context[" << type_to_string(t.args[0]) << "]"; break;
        case TypeK::Ref: os << "Ref[" << type_to_string(t.args[0]) << "]"; break;
        case TypeK::Var: os << (t.name.empty() ? "T" + std::to_string(t.index) : t.name); break;
        case TypeK::Tuple: {
            os << "(";
            for (size_t i = 0; i < t.args.size(); i++) {
                if (i) os << ", ";
                os << type_to_string(t.args[i]);
            }
            os << ")";
            break;
        }
        case TypeK::Adt: {
            os << (t.name.empty() ? "type#" + std::to_string(t.index) : t.name);
            if (!t.args.empty()) {
                os << "[";
                for (size_t i = 0; i < t.args.size(); i++) {
                    if (i) os << ", ";
                    os << type_to_string(t.args[i]);
                }
                os << "]";
            }
            break;
        }
    }
    return os.str();
}

}  // namespace mandala
