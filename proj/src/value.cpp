#include "mandala/value.hpp"

#include <cstring>
#include <sstream>

namespace mandala {

Value Value::make_uint(uint64_t v) {
    Value out;
    out.k = ValK::UInt;
    out.u = v;
    out.caps = kCopyDropPersist;
    return out;
}

Value Value::make_int(int64_t v) {
    Value out;
    out.k = ValK::Int;
    out.i = v;
    out.caps = kCopyDropPersist;
    return out;
}

Value Value::make_unit() {
    Value out;
    out.k = ValK::Unit;
    out.caps = kCopyDropPersist;
    return out;
}

Value Value::make_id(const Digest& d, bool master) {
    Value out;
    out.k = ValK::Id;
    out.bytes32 = d;
    out.caps = kCopyDropPersist;
    if (master) out.caps.add(BuiltinCap::Master);
    return out;
}

bool Value::operator==(const Value& o) const {
    if (k != o.k || caps != o.caps || u != o.u || i != o.i || module != o.module ||
        typeIndex != o.typeIndex || ctorIndex != o.ctorIndex || bytes32 != o.bytes32)
        return false;
    if (fields.size() != o.fields.size() || typeArgs.size() != o.typeArgs.size())
        return false;
    for (size_t n = 0; n < fields.size(); n++)
        if (!(fields[n] == o.fields[n])) return false;
    for (size_t n = 0; n < typeArgs.size(); n++)
        if (!typeArgs[n].equals(o.typeArgs[n])) return false;
    if (inner.has_value() != o.inner.has_value()) return false;
    if (inner && !inner->equals(*o.inner)) return false;
    return true;
}

SemType value_type(const Value& v) {
    switch (v.k) {
        case ValK::UInt: {
            SemType t = make_prim(TypeK::UInt);
            t.caps = v.caps;
            return t;
        }
        case ValK::Int: {
            SemType t = make_prim(TypeK::Int);
            t.caps = v.caps;
            return t;
        }
        case ValK::Unit: {
            SemType t = make_prim(TypeK::Unit);
            t.caps = v.caps;
            return t;
        }
        case ValK::Id: {
            SemType t = make_prim(TypeK::Id);
            t.caps = v.caps;
            return t;
        }
        case ValK::Tuple: {
            std::vector<SemType> elems;
            for (const auto& f : v.fields) elems.push_back(value_type(f));
            SemType t = make_tuple(std::move(elems));
            t.caps = v.caps;
            return t;
        }
        case ValK::Adt: {
            return make_adt(v.module, v.typeIndex, "", v.typeArgs, v.caps);
        }
        case ValK::Context: {
            SemType t = make_context(*v.inner);
            t.caps = v.caps;
            return t;
        }
        case ValK::Ref: {
            SemType t = make_ref(*v.inner);
            t.caps = v.caps;
            return t;
        }
    }
    return make_prim(TypeK::Unit);
}

namespace {

void put_u32(Bytes& b, uint32_t v) {
    for (int i = 0; i < 4; i++) b.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(Bytes& b, uint64_t v) {
    for (int i = 0; i < 8; i++) b.push_back(uint8_t(v >> (8 * i)));
}
void put_digest(Bytes& b, const Digest& d) {
    b.insert(b.end(), d.bytes.begin(), d.bytes.end());
}

void put_capset(Bytes& b, const CapSet& c) {
    b.push_back(c.builtin_mask());
    put_u32(b, uint32_t(c.user().size()));
    for (const auto& u : c.user()) {
        put_digest(b, u.module);
        put_u32(b, u.index);
    }
}

void put_type(Bytes& b, const SemType& t) {
    b.push_back(uint8_t(t.kind));
    put_capset(b, t.caps);
    switch (t.kind) {
        case TypeK::Adt:
            put_digest(b, t.module);
            put_u32(b, t.index);
            put_u32(b, uint32_t(t.args.size()));
            for (const auto& a : t.args) put_type(b, a);
            break;
        case TypeK::Context:
        case TypeK::Ref:
            put_type(b, t.args[0]);
            break;
        case TypeK::Tuple:
            put_u32(b, uint32_t(t.args.size()));
            for (const auto& a : t.args) put_type(b, a);
            break;
        case TypeK::Var:
            put_u32(b, t.index);
            break;
        default:
            break;
    }
}

void put_value(Bytes& b, const Value& v) {
    b.push_back(uint8_t(v.k));
    put_capset(b, v.caps);
    switch (v.k) {
        case ValK::UInt: put_u64(b, v.u); break;
        case ValK::Int: put_u64(b, uint64_t(v.i)); break;
        case ValK::Unit: break;
        case ValK::Tuple:
            put_u32(b, uint32_t(v.fields.size()));
            for (const auto& f : v.fields) put_value(b, f);
            break;
        case ValK::Adt:
            put_digest(b, v.module);
            put_u32(b, v.typeIndex);
            put_u32(b, uint32_t(v.typeArgs.size()));
            for (const auto& a : v.typeArgs) put_type(b, a);
            put_u32(b, v.ctorIndex);
            put_u32(b, uint32_t(v.fields.size()));
            for (const auto& f : v.fields) put_value(b, f);
            break;
        case ValK::Id: put_digest(b, v.bytes32); break;
        case ValK::Context:
        case ValK::Ref:
            put_digest(b, v.bytes32);
            put_type(b, *v.inner);
            break;
    }
}

struct VReader {
    const Bytes& b;
    size_t i = 0;
    bool bad = false;

    bool need(size_t n) {
        if (b.size() - i < n) {
            bad = true;
            return false;
        }
        return true;
    }
    uint8_t u8() {
        if (!need(1)) return 0;
        return b[i++];
    }
    uint32_t u32() {
        if (!need(4)) return 0;
        uint32_t v = 0;
        for (int k = 0; k < 4; k++) v |= uint32_t(b[i + k]) << (8 * k);
        i += 4;
        return v;
    }
    uint64_t u64() {
        if (!need(8)) return 0;
        uint64_t v = 0;
        for (int k = 0; k < 8; k++) v |= uint64_t(b[i + k]) << (8 * k);
        i += 8;
        return v;
    }
    Digest digest() {
        Digest d;
        if (!need(32)) return d;
        std::memcpy(d.bytes.data(), b.data() + i, 32);
        i += 32;
        return d;
    }
};

CapSet get_capset(VReader& r) {
    CapSet c;
    uint8_t mask = r.u8();
    for (int bit = 0; bit < 6; bit++)
        if (mask & (1 << bit)) c.add(BuiltinCap(1 << bit));
    uint32_t n = r.u32();
    if (n > r.b.size()) {
        r.bad = true;
        return c;
    }
    for (uint32_t i = 0; i < n && !r.bad; i++) {
        UserCap u;
        u.module = r.digest();
        u.index = r.u32();
        c.add(u);
    }
    return c;
}

SemType get_type(VReader& r, int depth = 0) {
    SemType t;
    if (depth > 64) {
        r.bad = true;
        return t;
    }
    uint8_t k = r.u8();
    if (k > uint8_t(TypeK::Var)) {
        r.bad = true;
        return t;
    }
    t.kind = TypeK(k);
    t.caps = get_capset(r);
    switch (t.kind) {
        case TypeK::Adt: {
            t.module = r.digest();
            t.index = r.u32();
            uint32_t n = r.u32();
            if (n > r.b.size()) {
                r.bad = true;
                return t;
            }
            for (uint32_t i = 0; i < n && !r.bad; i++) t.args.push_back(get_type(r, depth + 1));
            break;
        }
        case TypeK::Context:
        case TypeK::Ref:
            t.args.push_back(get_type(r, depth + 1));
            break;
        case TypeK::Tuple: {
            uint32_t n = r.u32();
            if (n > r.b.size()) {
                r.bad = true;
                return t;
            }
            for (uint32_t i = 0; i < n && !r.bad; i++) t.args.push_back(get_type(r, depth + 1));
            break;
        }
        case TypeK::Var:
            t.index = r.u32();
            break;
        default:
            break;
    }
    return t;
}

Value get_value(VReader& r, int depth = 0) {
    Value v;
    if (depth > 64) {
        r.bad = true;
        return v;
    }
    uint8_t k = r.u8();
    if (k > uint8_t(ValK::Ref)) {
        r.bad = true;
        return v;
    }
    v.k = ValK(k);
    v.caps = get_capset(r);
    switch (v.k) {
        case ValK::UInt: v.u = r.u64(); break;
        case ValK::Int: v.i = int64_t(r.u64()); break;
        case ValK::Unit: break;
        case ValK::Tuple: {
            uint32_t n = r.u32();
            if (n > r.b.size()) {
                r.bad = true;
                return v;
            }
            for (uint32_t i = 0; i < n && !r.bad; i++) v.fields.push_back(get_value(r, depth + 1));
            break;
        }
        case ValK::Adt: {
            v.module = r.digest();
            v.typeIndex = r.u32();
            uint32_t tn = r.u32();
            if (tn > r.b.size()) {
                r.bad = true;
                return v;
            }
            for (uint32_t i = 0; i < tn && !r.bad; i++) v.typeArgs.push_back(get_type(r, depth + 1));
            v.ctorIndex = r.u32();
            uint32_t fn = r.u32();
            if (fn > r.b.size()) {
                r.bad = true;
                return v;
            }
            for (uint32_t i = 0; i < fn && !r.bad; i++) v.fields.push_back(get_value(r, depth + 1));
            break;
        }
        case ValK::Id: v.bytes32 = r.digest(); break;
        case ValK::Context:
        case ValK::Ref:
            v.bytes32 = r.digest();
            v.inner = get_type(r, depth + 1);
            break;
    }
    return v;
}

}  // namespace

Bytes encode_value(const Value& v) {
    Bytes b;
    put_value(b, v);
    return b;
}

std::optional<Value> decode_value(const Bytes& b) {
    VReader r{b};
    Value v = get_value(r);
    if (r.bad || r.i != b.size()) return std::nullopt;
    return v;
}

std::string render_type(const SemType& t, const DeployedRegistry& reg) {
    switch (t.kind) {
        case TypeK::UInt: return "UInt";
        case TypeK::Int: return "Int";
        case TypeK::Unit: return "Unit";
        case TypeK::Id: return "ID";
        case TypeK::Context: return "Context[" + render_type(t.args[0], reg) + "]";
        case TypeK::Ref: return "Ref[" + render_type(t.args[0], reg) + "]";
        case TypeK::Var: return t.name.empty() ? "T" : t.name;
        case TypeK::Tuple: {
            std::string s = "(";
            for (size_t i = 0; i < t.args.size(); i++) {
                if (i) s += ", ";
                s += render_type(t.args[i], reg);
            }
            return s + ")";
        }
        case TypeK::Adt: {
            std::string name;
            if (const auto* m = reg.module_at(t.module))
                if (t.index < m->types.size()) name = m->types[t.index].name;
            if (name.empty()) name = "type@" + to_hex_short(t.module);
            if (!t.args.empty()) {
                name += "[";
                for (size_t i = 0; i < t.args.size(); i++) {
                    if (i) name += ", ";
                    name += render_type(t.args[i], reg);
                }
                name += "]";
            }
            return name;
        }
    }
    return "?";
}

std::string render_value(const Value& v, const DeployedRegistry& reg) {
    switch (v.k) {
        case ValK::UInt: return std::to_string(v.u);
        case ValK::Int: return std::to_string(v.i);
        case ValK::Unit: return "()";
        case ValK::Id: return "ID(#" + to_hex_short(v.bytes32) + ")";
        case ValK::Context:
            return "Context[" + render_type(*v.inner, reg) + "](#" +
                   to_hex_short(v.bytes32) + ")";
        case ValK::Ref:
            return "Ref[" + render_type(*v.inner, reg) + "](#" + to_hex_short(v.bytes32) +
                   ")";
        case ValK::Tuple: {
            std::string s = "(";
            for (size_t i = 0; i < v.fields.size(); i++) {
                if (i) s += ", ";
                s += render_value(v.fields[i], reg);
            }
            return s + ")";
        }
        case ValK::Adt: {
            std::string name, ctorName;
            if (const auto* m = reg.module_at(v.module)) {
                if (v.typeIndex < m->types.size()) {
                    name = m->types[v.typeIndex].name;
                    if (v.ctorIndex < m->types[v.typeIndex].ctors.size())
                        ctorName = m->types[v.typeIndex].ctors[v.ctorIndex].name;
                }
            }
            if (name.empty()) name = "type@" + to_hex_short(v.module);
            std::string s = name;
            if (!v.typeArgs.empty()) {
                s += "[";
                for (size_t i = 0; i < v.typeArgs.size(); i++) {
                    if (i) s += ", ";
                    s += render_type(v.typeArgs[i], reg);
                }
                s += "]";
            }
            if (!ctorName.empty() && ctorName != name) s += "." + ctorName;
            s += "(";
            for (size_t i = 0; i < v.fields.size(); i++) {
                if (i) s += ", ";
                s += render_value(v.fields[i], reg);
            }
            return s + ")";
        }
    }
    return "?";
}

}  // namespace mandala
