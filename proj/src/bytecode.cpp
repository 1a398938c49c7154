#include "mandala/bytecode.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace mandala {

const char* builtin_risk_name(BuiltinRisk r) {
    switch (r) {
        case BuiltinRisk::NumericOverflow: return "NumericOverflow";
        case BuiltinRisk::NumericUnderflow: return "NumericUnderflow";
        case BuiltinRisk::EmptyCell: return "EmptyCell";
    }
    return "?";
}

const BFunction* BytecodeModule::find_function(const std::string& n) const {
    for (const auto& f : functions)
        if (f.name == n) return &f;
    return nullptr;
}

int BytecodeModule::function_index(const std::string& n) const {
    for (size_t i = 0; i < functions.size(); i++)
        if (functions[i].name == n) return int(i);
    return -1;
}

int BytecodeModule::val_index(const std::string& n) const {
    for (size_t i = 0; i < vals.size(); i++)
        if (vals[i].name == n) return int(i);
    return -1;
}

int BytecodeModule::type_index(const std::string& n) const {
    for (size_t i = 0; i < types.size(); i++)
        if (types[i].name == n) return int(i);
    return -1;
}

namespace {

struct DecodeErr {
    DecodeError e;
};

class Writer {
public:
    Bytes out;

    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; i++) out.push_back(uint8_t(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; i++) out.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; i++) out.push_back(uint8_t(v >> (8 * i)));
    }
    void str(const std::string& s) {
        u32(uint32_t(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    void digest(const Digest& d) { out.insert(out.end(), d.bytes.begin(), d.bytes.end()); }
};

class Reader {
public:
    Reader(const Bytes& b, size_t begin, size_t end) : b_(b), i_(begin), end_(end) {}

    size_t pos() const { return i_; }
    bool done() const { return i_ >= end_; }

    [[noreturn]] void fail(const std::string& why) const {
        throw DecodeErr{DecodeError{i_, why}};
    }
    void need(size_t n) const {
        if (end_ - i_ < n) fail("truncated input");
    }
    uint8_t u8() {
        need(1);
        return b_[i_++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(b_[i_]) | uint16_t(b_[i_ + 1]) << 8;
        i_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int k = 0; k < 4; k++) v |= uint32_t(b_[i_ + k]) << (8 * k);
        i_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int k = 0; k < 8; k++) v |= uint64_t(b_[i_ + k]) << (8 * k);
        i_ += 8;
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + i_), n);
        i_ += n;
        return s;
    }
    Digest digest() {
        need(32);
        Digest d;
        std::memcpy(d.bytes.data(), b_.data() + i_, 32);
        i_ += 32;
        return d;
    }
    uint32_t count(const char* what) {
        uint32_t n = u32();
        if (n > end_ - i_) fail(std::string("count too large for ") + what);
        return n;
    }

private:
    const Bytes& b_;
    size_t i_;
    size_t end_;
};

class Codec {
public:
    explicit Codec(const std::vector<Digest>& imports) : imports_(imports) {}

    // --- encoding ---

    uint32_t module_ref(const Digest& d) const {
        if (d.is_zero()) return 0;
        for (size_t i = 0; i < imports_.size(); i++)
            if (imports_[i] == d) return uint32_t(i + 1);
        throw std::runtime_error("module reference not in import table");
    }

    void put_capset(Writer& w, const CapSet& c) const {
        w.u8(c.builtin_mask());
        w.u32(uint32_t(c.user().size()));
        for (const auto& u : c.user()) {
            w.u32(module_ref(u.module));
            w.u32(u.index);
        }
    }

    void put_type(Writer& w, const SemType& t) const {
        w.u8(uint8_t(t.kind));
        put_capset(w, t.caps);
        switch (t.kind) {
            case TypeK::Adt:
                w.u32(module_ref(t.module));
                w.u32(t.index);
                put_types(w, t.args);
                break;
            case TypeK::Context:
            case TypeK::Ref:
            case TypeK::Tuple:
                put_types(w, t.args);
                break;
            case TypeK::Var:
                w.u32(t.index);
                break;
            default:
                break;
        }
    }

    void put_types(Writer& w, const std::vector<SemType>& v) const {
        w.u32(uint32_t(v.size()));
        for (const auto& t : v) put_type(w, t);
    }

    void put_capref(Writer& w, const CapRef& c) const {
        w.u8(c.builtin ? 1 : 0);
        if (c.builtin) {
            w.u8(uint8_t(c.b));
        } else {
            w.u32(module_ref(c.module));
            w.u32(c.index);
        }
    }

    void put_risk(Writer& w, const RiskRef& r) const {
        w.u8(r.builtin ? 1 : 0);
        if (r.builtin) {
            w.u8(uint8_t(r.b));
        } else {
            w.u32(module_ref(r.module));
            w.str(r.name);
        }
    }

    void put_risks(Writer& w, const std::vector<RiskRef>& rs) const {
        w.u32(uint32_t(rs.size()));
        for (const auto& r : rs) put_risk(w, r);
    }

    void put_slots(Writer& w, const std::vector<uint32_t>& v) const {
        w.u32(uint32_t(v.size()));
        for (auto s : v) w.u32(s);
    }

    void put_node(Writer& w, const IrNode& n) const {
        w.u8(uint8_t(n.k));
        switch (n.k) {
            case NodeK::LitU:
            case NodeK::LitI:
                w.u64(n.lit);
                break;
            case NodeK::LitUnit:
            case NodeK::NewId:
                break;
            case NodeK::UseMove:
            case NodeK::UseCopy:
                w.u32(n.slot);
                break;
            case NodeK::Drop:
            case NodeK::Let:
            case NodeK::Modify:
                w.u32(n.slot);
                break;
            case NodeK::Construct:
                w.u32(module_ref(n.module));
                w.u32(n.index);
                w.u32(n.index2);
                put_types(w, n.typeArgs);
                break;
            case NodeK::Call:
            case NodeK::LoadVal:
                w.u32(module_ref(n.module));
                w.u32(n.index);
                if (n.k == NodeK::Call) put_types(w, n.typeArgs);
                break;
            case NodeK::Arith:
                w.u8(n.op);
                break;
            case NodeK::Attach:
            case NodeK::Detach:
                put_capref(w, n.cap);
                break;
            case NodeK::Cycle:
                w.u64(n.lit);
                w.u32(n.slot);
                break;
            case NodeK::NewContext:
                put_types(w, n.typeArgs);
                break;
            default:
                break;
        }
        w.u32(uint32_t(n.kids.size()));
        for (const auto& k : n.kids) put_node(w, k);
        if (n.k == NodeK::Try) put_slots(w, n.extraSlots);
        if (n.k == NodeK::Match || n.k == NodeK::MatchTuple || n.k == NodeK::Try) {
            w.u32(uint32_t(n.arms.size()));
            for (const auto& a : n.arms) {
                if (n.k == NodeK::Try) put_risk(w, a.risk);
                else w.u32(a.ctorIndex);
                put_slots(w, a.slots);
                put_slots(w, a.dropsAtEntry);
                put_node(w, a.body.at(0));
            }
        }
    }

    // --- decoding ---

    Digest ref_to_digest(Reader& r, uint32_t ref) const {
        if (ref == 0) return Digest{};
        if (ref > imports_.size()) r.fail("module reference out of range");
        return imports_[ref - 1];
    }

    CapSet get_capset(Reader& r) const {
        CapSet c;
        uint8_t mask = r.u8();
        if (mask & ~0x3f) r.fail("invalid capability mask");
        for (int bit = 0; bit < 6; bit++)
            if (mask & (1 << bit)) c.add(BuiltinCap(1 << bit));
        uint32_t n = r.count("capability set");
        for (uint32_t i = 0; i < n; i++) {
            UserCap u;
            u.module = ref_to_digest(r, r.u32());
            u.index = r.u32();
            c.add(u);
        }
        return c;
    }

    SemType get_type(Reader& r, int depth = 0) const {
        if (depth > 64) r.fail("type nesting too deep");
        SemType t;
        uint8_t k = r.u8();
        if (k > uint8_t(TypeK::Var)) r.fail("invalid type tag");
        t.kind = TypeK(k);
        t.caps = get_capset(r);
        switch (t.kind) {
            case TypeK::Adt: {
                t.module = ref_to_digest(r, r.u32());
                t.index = r.u32();
                uint32_t n = r.count("type arguments");
                for (uint32_t i = 0; i < n; i++) t.args.push_back(get_type(r, depth + 1));
                break;
            }
            case TypeK::Context:
            case TypeK::Ref: {
                uint32_t n = r.count("type arguments");
                if (n != 1) r.fail("Ref/Context takes one type argument");
                t.args.push_back(get_type(r, depth + 1));
                break;
            }
            case TypeK::Tuple: {
                uint32_t n = r.count("tuple elements");
                for (uint32_t i = 0; i < n; i++) t.args.push_back(get_type(r, depth + 1));
                break;
            }
            case TypeK::Var:
                t.index = r.u32();
                break;
            default:
                break;  // primitives carry nothing beyond the capability set
        }
        return t;
    }

    std::vector<SemType> get_types(Reader& r) const {
        uint32_t n = r.count("type list");
        std::vector<SemType> v;
        for (uint32_t i = 0; i < n; i++) v.push_back(get_type(r));
        return v;
    }

    CapRef get_capref(Reader& r) const {
        CapRef c;
        c.builtin = r.u8() != 0;
        if (c.builtin) {
            uint8_t b = r.u8();
            if (b == 0 || (b & (b - 1)) || b > uint8_t(BuiltinCap::Master))
                r.fail("invalid builtin capability");
            c.b = BuiltinCap(b);
        } else {
            c.module = ref_to_digest(r, r.u32());
            c.index = r.u32();
        }
        return c;
    }

    RiskRef get_risk(Reader& r) const {
        RiskRef k;
        k.builtin = r.u8() != 0;
        if (k.builtin) {
            uint8_t b = r.u8();
            if (b > uint8_t(BuiltinRisk::EmptyCell)) r.fail("invalid builtin risk");
            k.b = BuiltinRisk(b);
            k.name = builtin_risk_name(k.b);
        } else {
            k.module = ref_to_digest(r, r.u32());
            k.name = r.str();
        }
        return k;
    }

    std::vector<RiskRef> get_risks(Reader& r) const {
        uint32_t n = r.count("risk list");
        std::vector<RiskRef> v;
        for (uint32_t i = 0; i < n; i++) v.push_back(get_risk(r));
        return v;
    }

    std::vector<uint32_t> get_slots(Reader& r) const {
        uint32_t n = r.count("slot list");
        std::vector<uint32_t> v;
        for (uint32_t i = 0; i < n; i++) v.push_back(r.u32());
        return v;
    }

    static void type_typeargs_count_check(Reader& r, const IrNode& n) {
        if (n.k == NodeK::NewContext && n.typeArgs.size() != 1)
            r.fail("NewContext takes one type argument");
    }

    IrNode get_node(Reader& r, int depth = 0) const {
        if (depth > 256) r.fail("instruction nesting too deep");
        IrNode n;
        uint8_t k = r.u8();
        if (k > uint8_t(NodeK::Derive)) r.fail("invalid instruction tag");
        n.k = NodeK(k);
        switch (n.k) {
            case NodeK::LitU:
            case NodeK::LitI:
                n.lit = r.u64();
                break;
            case NodeK::UseMove:
            case NodeK::UseCopy:
            case NodeK::Drop:
            case NodeK::Let:
            case NodeK::Modify:
                n.slot = r.u32();
                break;
            case NodeK::Construct:
                n.module = ref_to_digest(r, r.u32());
                n.index = r.u32();
                n.index2 = r.u32();
                n.typeArgs = get_types(r);
                break;
            case NodeK::Call:
                n.module = ref_to_digest(r, r.u32());
                n.index = r.u32();
                n.typeArgs = get_types(r);
                break;
            case NodeK::LoadVal:
                n.module = ref_to_digest(r, r.u32());
                n.index = r.u32();
                break;
            case NodeK::Arith:
                n.op = r.u8();
                if (n.op > 1) r.fail("invalid arithmetic op");
                break;
            case NodeK::Attach:
            case NodeK::Detach:
                n.cap = get_capref(r);
                break;
            case NodeK::Cycle:
                n.lit = r.u64();
                n.slot = r.u32();
                break;
            case NodeK::NewContext:
                n.typeArgs = get_types(r);
                type_typeargs_count_check(r, n);
                break;
            default:
                break;
        }
        uint32_t kidCount = r.count("children");
        static const int kArity[] = {
            0, 0, 0, 0, 0, 1, 2, -1, -1, -1, 0, 2, 1, 1, 2, 2, 1, 1, 1, 2, 0, 0, 2};
        int want = kArity[int(n.k)];
        if (want >= 0 && int(kidCount) != want) r.fail("wrong child count");
        for (uint32_t i = 0; i < kidCount; i++) n.kids.push_back(get_node(r, depth + 1));
        if (n.k == NodeK::Try) n.extraSlots = get_slots(r);
        if (n.k == NodeK::Match || n.k == NodeK::MatchTuple || n.k == NodeK::Try) {
            uint32_t armCount = r.count("arms");
            if (armCount == 0) r.fail("empty arm list");
            if (n.k == NodeK::MatchTuple && armCount != 1)
                r.fail("tuple match takes one arm");
            for (uint32_t i = 0; i < armCount; i++) {
                IrArm a;
                if (n.k == NodeK::Try) a.risk = get_risk(r);
                else a.ctorIndex = r.u32();
                a.slots = get_slots(r);
                a.dropsAtEntry = get_slots(r);
                a.body.push_back(get_node(r, depth + 1));
                n.arms.push_back(std::move(a));
            }
        }
        return n;
    }

private:
    const std::vector<Digest>& imports_;
};

void put_strings(Writer& w, const std::vector<std::string>& v) {
    w.u32(uint32_t(v.size()));
    for (const auto& s : v) w.str(s);
}

std::vector<std::string> get_strings(Reader& r) {
    uint32_t n = r.count("string list");
    std::vector<std::string> v;
    for (uint32_t i = 0; i < n; i++) v.push_back(r.str());
    return v;
}

}  // namespace

Bytes encode(const BytecodeModule& m) {
    Codec codec(m.imports);
    Writer w;
    w.out.insert(w.out.end(), kMagic, kMagic + 4);
    w.u16(m.version);
    w.str(m.name);

    auto section = [&](auto&& fill) {
        Writer sw;
        fill(sw);
        w.u32(uint32_t(sw.out.size()));
        w.out.insert(w.out.end(), sw.out.begin(), sw.out.end());
    };

    section([&](Writer& sw) {
        sw.u32(uint32_t(m.types.size()));
        for (const auto& t : m.types) {
            sw.str(t.name);
            sw.u8(t.open ? 1 : 0);
            codec.put_capset(sw, t.declaredCaps);
            put_strings(sw, t.typeParams);
            sw.u32(uint32_t(t.ctors.size()));
            for (const auto& c : t.ctors) {
                sw.str(c.name);
                codec.put_types(sw, c.fields);
            }
        }
    });
    section([&](Writer& sw) {
        sw.u32(uint32_t(m.caps.size()));
        for (const auto& c : m.caps) {
            sw.str(c.name);
            sw.u8(c.open ? 1 : 0);
        }
    });
    section([&](Writer& sw) {
        sw.u32(uint32_t(m.imports.size()));
        for (const auto& d : m.imports) sw.digest(d);
    });
    section([&](Writer& sw) {
        sw.u32(uint32_t(m.functions.size()));
        for (const auto& f : m.functions) {
            sw.str(f.name);
            sw.u8(uint8_t(f.vis));
            sw.u32(f.protectedParam);
            sw.u8(uint8_t(f.effect));
            sw.u32(f.defaultFor);
            codec.put_risks(sw, f.risks);
            put_strings(sw, f.typeParams);
            sw.u32(uint32_t(f.params.size()));
            for (const auto& p : f.params) {
                sw.str(p.name);
                codec.put_type(sw, p.type);
            }
            codec.put_type(sw, f.ret);
            sw.u32(f.slotCount);
            put_strings(sw, f.slotNames);
            codec.put_slots(sw, f.entryDrops);
            codec.put_node(sw, f.body);
        }
    });
    section([&](Writer& sw) {
        sw.u32(uint32_t(m.vals.size()));
        for (const auto& v : m.vals) {
            sw.str(v.name);
            codec.put_type(sw, v.type);
            sw.u32(v.slotCount);
            put_strings(sw, v.slotNames);
            codec.put_node(sw, v.init);
        }
    });
    section([&](Writer& sw) {
        sw.u8(m.init ? 1 : 0);
        if (m.init) {
            codec.put_risks(sw, m.init->risks);
            sw.str(m.init->param.name);
            codec.put_type(sw, m.init->param.type);
            sw.u32(m.init->slotCount);
            put_strings(sw, m.init->slotNames);
            codec.put_slots(sw, m.init->entryDrops);
            codec.put_node(sw, m.init->body);
        }
    });
    return w.out;
}

std::variant<BytecodeModule, DecodeError> decode(const Bytes& bytes) {
    try {
        Reader top(bytes, 0, bytes.size());
        top.need(4);
        if (std::memcmp(bytes.data(), kMagic, 4) != 0)
            return DecodeError{0, "bad magic"};
        Reader r(bytes, 4, bytes.size());
        BytecodeModule m;
        m.version = r.u16();
        if (m.version != kBytecodeVersion)
            return DecodeError{4, "unsupported version"};
        m.name = r.str();

        // sections: types, caps, imports, functions, vals, init
        struct Span {
            size_t begin, end;
        };
        Span spans[6];
        for (auto& s : spans) {
            uint32_t len = r.u32();
            r.need(len);
            s.begin = r.pos();
            s.end = s.begin + len;
            Reader skip(bytes, s.begin, s.end);
            (void)skip;
            // advance
            for (uint32_t i = 0; i < len; i++) r.u8();
        }
        if (!r.done()) return DecodeError{r.pos(), "trailing bytes"};

        // imports first: later sections reference them
        {
            Reader ir(bytes, spans[2].begin, spans[2].end);
            uint32_t n = ir.count("imports");
            for (uint32_t i = 0; i < n; i++) m.imports.push_back(ir.digest());
            if (!ir.done()) ir.fail("trailing bytes in import section");
        }
        Codec codec(m.imports);
        {
            Reader tr(bytes, spans[0].begin, spans[0].end);
            uint32_t n = tr.count("types");
            for (uint32_t i = 0; i < n; i++) {
                BTypeDecl t;
                t.name = tr.str();
                t.open = tr.u8() != 0;
                t.declaredCaps = codec.get_capset(tr);
                t.typeParams = get_strings(tr);
                uint32_t cn = tr.count("constructors");
                for (uint32_t j = 0; j < cn; j++) {
                    BCtor c;
                    c.name = tr.str();
                    c.fields = codec.get_types(tr);
                    t.ctors.push_back(std::move(c));
                }
                m.types.push_back(std::move(t));
            }
            if (!tr.done()) tr.fail("trailing bytes in type section");
        }
        {
            Reader cr(bytes, spans[1].begin, spans[1].end);
            uint32_t n = cr.count("capabilities");
            for (uint32_t i = 0; i < n; i++) {
                BCapability c;
                c.name = cr.str();
                c.open = cr.u8() != 0;
                m.caps.push_back(std::move(c));
            }
            if (!cr.done()) cr.fail("trailing bytes in capability section");
        }
        {
            Reader fr(bytes, spans[3].begin, spans[3].end);
            uint32_t n = fr.count("functions");
            for (uint32_t i = 0; i < n; i++) {
                BFunction f;
                f.name = fr.str();
                uint8_t vis = fr.u8();
                if (vis > 2) fr.fail("invalid visibility");
                f.vis = Visibility(vis);
                f.protectedParam = fr.u32();
                uint8_t eff = fr.u8();
                if (eff > 3) fr.fail("invalid effect");
                f.effect = Effect(eff);
                f.defaultFor = fr.u32();
                f.risks = codec.get_risks(fr);
                f.typeParams = get_strings(fr);
                uint32_t pn = fr.count("parameters");
                for (uint32_t j = 0; j < pn; j++) {
                    BParam p;
                    p.name = fr.str();
                    p.type = codec.get_type(fr);
                    f.params.push_back(std::move(p));
                }
                f.ret = codec.get_type(fr);
                f.slotCount = fr.u32();
                f.slotNames = get_strings(fr);
                f.entryDrops = codec.get_slots(fr);
                f.body = codec.get_node(fr);
                m.functions.push_back(std::move(f));
            }
            if (!fr.done()) fr.fail("trailing bytes in function section");
        }
        {
            Reader vr(bytes, spans[4].begin, spans[4].end);
            uint32_t n = vr.count("vals");
            for (uint32_t i = 0; i < n; i++) {
                BVal v;
                v.name = vr.str();
                v.type = codec.get_type(vr);
                v.slotCount = vr.u32();
                v.slotNames = get_strings(vr);
                v.init = codec.get_node(vr);
                m.vals.push_back(std::move(v));
            }
            if (!vr.done()) vr.fail("trailing bytes in val section");
        }
        {
            Reader ir(bytes, spans[5].begin, spans[5].end);
            uint8_t has = ir.u8();
            if (has > 1) ir.fail("invalid init flag");
            if (has) {
                BInit in;
                in.risks = codec.get_risks(ir);
                in.param.name = ir.str();
                in.param.type = codec.get_type(ir);
                in.slotCount = ir.u32();
                in.slotNames = get_strings(ir);
                in.entryDrops = codec.get_slots(ir);
                in.body = codec.get_node(ir);
                m.init = std::move(in);
            }
            if (!ir.done()) ir.fail("trailing bytes in init section");
        }
        return m;
    } catch (const DecodeErr& e) {
        return e.e;
    }
}

}  // namespace mandala
