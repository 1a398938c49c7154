#include "mandala/validator.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace mandala {

const CostTable& CostTable::v1() {
    static const CostTable t{};
    return t;
}

namespace {

struct VErr {
    VError e;
};

[[noreturn]] void fail(const char* code, std::string detail) {
    throw VErr{VError{code, std::move(detail)}};
}

struct RiskLess {
    bool operator()(const RiskRef& a, const RiskRef& b) const { return a < b; }
};
using RiskSet = std::set<RiskRef, RiskLess>;

class Validator {
public:
    Validator(const BytecodeModule& m, const DeployedRegistry& reg, const CostTable& tab)
        : m_(m), reg_(reg), tab_(tab) {}

    VerifiedModule run(const Digest& addr) {
        for (const auto& dep : m_.imports)
            if (!reg_.module_at(dep))
                fail(vcode::DepMissing, "dependency " + to_hex_short(dep) + " not deployed");

        check_type_table();
        check_defaults();

        VerifiedModule out;
        out.address = addr;
        out.module = m_;

        fnValLoads_.assign(m_.functions.size(), -1);
        for (uint32_t i = 0; i < m_.functions.size(); i++) {
            check_function(i);
            out.functionBounds.push_back(bound_of_function(i, out.functionBounds));
        }
        bounds_ = out.functionBounds;
        for (uint32_t i = 0; i < m_.vals.size(); i++) {
            check_val(i);
            out.valBounds.push_back(bound(m_.vals[i].init));
        }
        if (m_.init) {
            check_init();
            out.initBound = bound(m_.init->body) + tab_.drop * m_.init->entryDrops.size();
        }
        return out;
    }

private:
    const BytecodeModule& m_;
    const DeployedRegistry& reg_;
    const CostTable& tab_;

    // state of the body being checked
    std::vector<std::optional<SemType>> slots_;
    uint32_t slotCount_ = 0;
    uint32_t currentFn_ = UINT32_MAX;
    Effect currentEffect_ = Effect::Pure;
    bool inTransition_ = false;
    int maxOwnValLoad_ = -1;
    std::vector<int> fnValLoads_;
    std::vector<uint64_t> bounds_;

    struct Ctx {
        bool tail = false;
        const SemType* cell = nullptr;
    };

    // ---- shared lookups ----

    const BTypeDecl& type_decl(const Digest& module, uint32_t idx) const {
        if (module.is_zero()) {
            if (idx >= m_.types.size()) fail(vcode::Type, "type index out of range");
            return m_.types[idx];
        }
        const auto* dep = reg_.module_at(module);
        if (!dep || idx >= dep->types.size())
            fail(vcode::Type, "dangling type reference");
        return dep->types[idx];
    }

    const BFunction& function_decl(const Digest& module, uint32_t idx) const {
        if (module.is_zero()) {
            if (idx >= m_.functions.size()) fail(vcode::Type, "function index out of range");
            return m_.functions[idx];
        }
        const auto* dep = reg_.module_at(module);
        if (!dep || idx >= dep->functions.size())
            fail(vcode::Type, "dangling call target");
        return dep->functions[idx];
    }

    CapSet abs_caps(const CapSet& c, const Digest& owner) const {
        CapSet out;
        for (int bit = 0; bit < 6; bit++)
            if (c.builtin_mask() & (1 << bit)) out.add(BuiltinCap(1 << bit));
        for (auto u : c.user()) {
            u.module = resolve_owner(u.module, owner);
            out.add(u);
        }
        return out;
    }

    void check_capset_wf(const CapSet& c) const {
        for (const auto& u : c.user()) {
            if (u.module.is_zero()) {
                if (u.index >= m_.caps.size())
                    fail(vcode::Type, "capability index out of range");
            } else {
                const auto* dep = reg_.module_at(u.module);
                if (!dep || u.index >= dep->caps.size())
                    fail(vcode::Type, "dangling capability reference");
            }
        }
    }

    void check_wf(const SemType& t, uint32_t varBound) const {
        check_capset_wf(t.caps);
        if (t.caps.has(BuiltinCap::Modify) && t.kind != TypeK::Ref)
            fail(vcode::Cap, "Modify on a non-reference type");
        if (t.caps.has(BuiltinCap::Master) && t.kind != TypeK::Id)
            fail(vcode::Cap, "Master on a non-ID type");
        switch (t.kind) {
            case TypeK::Adt: {
                const auto& td = type_decl(t.module, t.index);
                if (t.args.size() != td.typeParams.size())
                    fail(vcode::Type, "type argument count mismatch for " + td.name);
                break;
            }
            case TypeK::Context:
            case TypeK::Ref:
                if (!t.args[0].caps.has(BuiltinCap::Persist))
                    fail(vcode::Type, "stored type lacks Persist");
                break;
            case TypeK::Var:
                if (t.index >= varBound) fail(vcode::Type, "type variable out of range");
                break;
            default:
                break;
        }
        for (const auto& a : t.args) check_wf(a, varBound);
    }

    void check_type_table() const {
        for (const auto& td : m_.types) {
            if (td.declaredCaps.has(BuiltinCap::Modify) ||
                td.declaredCaps.has(BuiltinCap::Master))
                fail(vcode::Cap, "type '" + td.name + "' declares Modify or Master");
            for (const auto& ctor : td.ctors) {
                for (const auto& f : ctor.fields) {
                    check_wf(f, uint32_t(td.typeParams.size()));
                    for (auto c :
                         {BuiltinCap::Copy, BuiltinCap::Drop, BuiltinCap::Persist})
                        if (td.declaredCaps.has(c) && !f.caps.has(c))
                            fail(vcode::Cap, "type '" + td.name + "' declares " +
                                                 builtin_cap_name(c) +
                                                 " unsupported by a field");
                }
            }
        }
    }

    void check_defaults() const {
        std::set<uint32_t> seen;
        for (const auto& f : m_.functions) {
            if (f.defaultFor == UINT32_MAX) continue;
            if (f.defaultFor >= m_.types.size())
                fail(vcode::Type, "default for unknown type");
            if (!seen.insert(f.defaultFor).second)
                fail(vcode::DefaultDup,
                     "duplicate default provider for type '" +
                         m_.types[f.defaultFor].name + "'");
            const auto& td = m_.types[f.defaultFor];
            if (!f.params.empty() || f.typeParams.size() != td.typeParams.size())
                fail(vcode::Type, "default provider has a wrong signature");
            if (f.effect != Effect::Pure)
                fail(vcode::Effect, "default provider must be pure");
            const SemType& r = f.ret;
            bool ok = r.kind == TypeK::Adt && r.module.is_zero() &&
                      r.index == f.defaultFor && r.args.size() == td.typeParams.size();
            if (ok)
                for (size_t i = 0; i < r.args.size(); i++)
                    ok &= r.args[i].kind == TypeK::Var && r.args[i].index == i;
            if (!ok) fail(vcode::Type, "default provider does not produce its type");
        }
    }

    // ---- expression typing ----

    void bind_slot(uint32_t s, SemType t) {
        if (s >= slotCount_) fail(vcode::Type, "slot index out of range");
        if (slots_[s]) fail(vcode::Type, "slot bound twice");
        slots_[s] = std::move(t);
    }

    const SemType& slot_type(uint32_t s) const {
        if (s >= slotCount_ || !slots_[s]) fail(vcode::Type, "use of unbound slot");
        return *slots_[s];
    }

    static bool same_base(const SemType& a, const SemType& b) {
        if (a.kind != b.kind || a.index != b.index) return false;
        if (a.kind == TypeK::Adt && a.module != b.module) return false;
        if (a.args.size() != b.args.size()) return false;
        for (size_t i = 0; i < a.args.size(); i++)
            if (!a.args[i].equals(b.args[i])) return false;
        return true;
    }

    SemType join(const SemType& a, const SemType& b) const {
        if (!same_base(a, b)) fail(vcode::Type, "branches produce different types");
        SemType out = a;
        out.caps = a.caps.intersect(b.caps);
        return out;
    }

    void effect_demand(Effect e, const char* what) const {
        if (inTransition_ && e > Effect::Pure)
            fail(vcode::Effect, std::string("modify transition contains ") + what);
        if (e > currentEffect_)
            fail(vcode::Effect, std::string("effect escalation: ") + what);
    }

    SemType infer(const IrNode& n, Ctx ctx) {
        switch (n.k) {
            case NodeK::LitU: return make_prim(TypeK::UInt);
            case NodeK::LitI: return make_prim(TypeK::Int);
            case NodeK::LitUnit: return make_prim(TypeK::Unit);
            case NodeK::UseMove:
            case NodeK::UseCopy:
                return slot_type(n.slot);
            case NodeK::Drop:
                (void)slot_type(n.slot);
                return infer(n.kids[0], ctx);
            case NodeK::Let: {
                SemType t0 = infer(n.kids[0], Ctx{});
                bind_slot(n.slot, std::move(t0));
                return infer(n.kids[1], ctx);
            }
            case NodeK::Construct: {
                const auto& td = type_decl(n.module, n.index);
                if (!n.module.is_zero() && !td.open)
                    fail(vcode::Cap, "construction of non-open foreign type " + td.name);
                if (n.index2 >= td.ctors.size())
                    fail(vcode::Type, "constructor index out of range");
                if (n.typeArgs.size() != td.typeParams.size())
                    fail(vcode::Type, "type argument count mismatch");
                for (const auto& a : n.typeArgs) check_wf(a, varBound_);
                const auto& fields = td.ctors[n.index2].fields;
                if (n.kids.size() != fields.size())
                    fail(vcode::Type, "constructor arity mismatch");
                for (size_t i = 0; i < fields.size(); i++) {
                    SemType want = substitute(
                        absolutize(fields[i], resolve_owner(n.module, Digest{})),
                        n.typeArgs);
                    SemType got = infer(n.kids[i], Ctx{});
                    if (!same_base(got, want) || !got.caps.covers(want.caps))
                        fail(vcode::Type, "constructor field type mismatch");
                }
                return make_adt(n.module, n.index, td.name, n.typeArgs,
                                abs_caps(td.declaredCaps,
                                         resolve_owner(n.module, Digest{})));
            }
            case NodeK::MakeTuple: {
                std::vector<SemType> elems;
                for (const auto& k : n.kids) elems.push_back(infer(k, Ctx{}));
                return make_tuple(std::move(elems));
            }
            case NodeK::Call: {
                const BFunction& f = function_decl(n.module, n.index);
                if (n.module.is_zero() && n.index >= currentFn_)
                    fail(vcode::Type, "call to a later declaration");
                if (n.module.is_zero() && currentFn_ <= fnValLoads_.size() &&
                    n.index < fnValLoads_.size())
                    maxOwnValLoad_ = std::max(maxOwnValLoad_, fnValLoads_[n.index]);
                Digest owner = resolve_owner(n.module, Digest{});
                if (!n.module.is_zero() && f.vis == Visibility::Private)
                    fail(vcode::Cap, "'" + f.name + "' is private");
                if (f.vis == Visibility::Protected) {
                    if (f.protectedParam >= n.typeArgs.size())
                        fail(vcode::Type, "protected parameter out of range");
                    const auto& bound = n.typeArgs[f.protectedParam];
                    if (bound.kind != TypeK::Adt || !bound.module.is_zero())
                        fail(vcode::Cap,
                             "protected call: this module does not define the bound type");
                }
                effect_demand(f.effect, ("a " + std::string(effect_name(f.effect)) +
                                         " call")
                                            .c_str());
                if (n.typeArgs.size() != f.typeParams.size())
                    fail(vcode::Type, "type argument count mismatch");
                for (const auto& a : n.typeArgs) check_wf(a, varBound_);
                if (n.kids.size() != f.params.size())
                    fail(vcode::Type, "call arity mismatch");
                for (size_t i = 0; i < f.params.size(); i++) {
                    SemType want =
                        substitute(absolutize(f.params[i].type, owner), n.typeArgs);
                    SemType got = infer(n.kids[i], Ctx{});
                    if (!same_base(got, want) || !got.caps.covers(want.caps))
                        fail(vcode::Type, "call argument type mismatch");
                }
                return substitute(absolutize(f.ret, owner), n.typeArgs);
            }
            case NodeK::LoadVal: {
                if (n.module.is_zero()) {
                    if (n.index >= m_.vals.size())
                        fail(vcode::Type, "val index out of range");
                    maxOwnValLoad_ = std::max(maxOwnValLoad_, int(n.index));
                    return m_.vals[n.index].type;
                }
                const auto* dep = reg_.module_at(n.module);
                if (!dep || n.index >= dep->vals.size())
                    fail(vcode::Type, "dangling val reference");
                return absolutize(dep->vals[n.index].type, n.module);
            }
            case NodeK::Arith: {
                SemType l = infer(n.kids[0], Ctx{});
                SemType r = infer(n.kids[1], Ctx{});
                bool ok = (l.kind == TypeK::UInt && r.kind == TypeK::UInt) ||
                          (l.kind == TypeK::Int && r.kind == TypeK::Int);
                if (!ok) fail(vcode::Type, "arithmetic needs two UInt or two Int");
                if (l.kind == TypeK::Int) arithIsInt_.insert(&n);
                return make_prim(l.kind);
            }
            case NodeK::Match: {
                SemType st = infer(n.kids[0], Ctx{});
                if (st.kind != TypeK::Adt) fail(vcode::Type, "match on a non-ADT value");
                const auto& td = type_decl(st.module, st.index);
                if (!st.module.is_zero() && !st.caps.has(BuiltinCap::Inspect))
                    fail(vcode::Cap, "unpacking a foreign value without Inspect");
                std::vector<bool> seen(td.ctors.size(), false);
                std::optional<SemType> ty;
                for (const auto& a : n.arms) {
                    if (a.ctorIndex >= td.ctors.size())
                        fail(vcode::Type, "arm constructor out of range");
                    if (seen[a.ctorIndex]) fail(vcode::Type, "duplicate match arm");
                    seen[a.ctorIndex] = true;
                    const auto& fields = td.ctors[a.ctorIndex].fields;
                    if (a.slots.size() != fields.size())
                        fail(vcode::Type, "arm binder count mismatch");
                    for (size_t i = 0; i < fields.size(); i++)
                        bind_slot(a.slots[i],
                                  substitute(absolutize(fields[i],
                                                        resolve_owner(st.module, Digest{})),
                                             st.args));
                    for (uint32_t d : a.dropsAtEntry) (void)slot_type(d);
                    SemType bt = infer(a.body[0], ctx);
                    ty = ty ? join(*ty, bt) : bt;
                }
                for (size_t i = 0; i < seen.size(); i++)
                    if (!seen[i]) fail(vcode::Type, "non-exhaustive match");
                return *ty;
            }
            case NodeK::MatchTuple: {
                SemType st = infer(n.kids[0], Ctx{});
                if (st.kind != TypeK::Tuple) fail(vcode::Type, "tuple match on non-tuple");
                const auto& a = n.arms[0];
                if (a.slots.size() != st.args.size())
                    fail(vcode::Type, "tuple binder count mismatch");
                for (size_t i = 0; i < a.slots.size(); i++) bind_slot(a.slots[i], st.args[i]);
                for (uint32_t d : a.dropsAtEntry) (void)slot_type(d);
                return infer(a.body[0], ctx);
            }
            case NodeK::Modify: {
                effect_demand(Effect::Active, "a cell modification");
                SemType rt = infer(n.kids[0], Ctx{});
                if (rt.kind != TypeK::Ref) fail(vcode::Type, "modify on a non-reference");
                if (!rt.caps.has(BuiltinCap::Modify))
                    fail(vcode::Cap, "modify through a reference without Modify");
                SemType cell = rt.args[0];
                bind_slot(n.slot, cell);
                modifyCell_[&n] = cell;
                bool saved = inTransition_;
                inTransition_ = true;
                Ctx inner;
                inner.tail = true;
                inner.cell = &cell;
                SemType tt = infer(n.kids[1], inner);
                inTransition_ = saved;
                auto ar = tails_and_return(n.kids[1]);
                if (!ar) fail(vcode::Type, "transition branches disagree on '& return'");
                if (*ar) return tt;
                if (!same_base(tt, cell) || !tt.caps.covers(cell.caps))
                    fail(vcode::Type, "transition result does not fit the cell");
                return make_prim(TypeK::Unit);
            }
            case NodeK::AndReturn: {
                if (!ctx.tail || !ctx.cell)
                    fail(vcode::Type, "'& return' outside a transition tail");
                SemType cv = infer(n.kids[0], Ctx{});
                if (!same_base(cv, *ctx.cell) || !cv.caps.covers(ctx.cell->caps))
                    fail(vcode::Type, "written value does not fit the cell");
                return infer(n.kids[1], Ctx{});
            }
            case NodeK::Attach:
            case NodeK::Detach: {
                SemType t = infer(n.kids[0], Ctx{});
                CapRef cap = absolutize(n.cap, Digest{});
                if (!cap.builtin) {
                    CapSet probe;
                    probe.add(UserCap{cap.module, cap.index});
                    check_capset_wf(probe);
                }
                bool has = cap.builtin ? t.caps.has(cap.b)
                                       : t.caps.has(UserCap{cap.module, cap.index});
                if (n.k == NodeK::Attach) {
                    if (has) fail(vcode::Type, "capability already attached");
                    check_attach_right(cap, t);
                    if (cap.builtin) t.caps.add(cap.b);
                    else t.caps.add(UserCap{cap.module, cap.index});
                    if (t.caps.has(BuiltinCap::Modify) && t.kind != TypeK::Ref)
                        fail(vcode::Cap, "Modify on a non-reference type");
                    if (t.caps.has(BuiltinCap::Master) && t.kind != TypeK::Id)
                        fail(vcode::Cap, "Master on a non-ID type");
                } else {
                    if (!has) fail(vcode::Type, "capability not attached");
                    if (cap.builtin) t.caps.remove(cap.b);
                    else t.caps.remove(UserCap{cap.module, cap.index});
                }
                return t;
            }
            case NodeK::Try: {
                if (n.kids[0].k != NodeK::Call) fail(vcode::Type, "try guards a call");
                SemType ty = infer(n.kids[0], Ctx{});
                const IrNode& call = n.kids[0];
                const BFunction& f = function_decl(call.module, call.index);
                Digest owner = resolve_owner(call.module, Digest{});
                std::vector<RiskRef> callee;
                for (const auto& r : f.risks) callee.push_back(absolutize(r, owner));
                for (uint32_t d : n.extraSlots) (void)slot_type(d);
                std::set<std::string> handled;
                for (const auto& a : n.arms) {
                    RiskRef want = absolutize(a.risk, Digest{});
                    bool known = false;
                    for (const auto& r : callee) known |= r == want;
                    if (!known) fail(vcode::Risk, "handler for a risk the callee lacks");
                    if (!handled.insert(want.display()).second)
                        fail(vcode::Risk, "duplicate handler");
                    if (a.slots.size() != f.params.size())
                        fail(vcode::Type, "handler binder count mismatch");
                    for (size_t i = 0; i < a.slots.size(); i++)
                        bind_slot(a.slots[i],
                                  substitute(absolutize(f.params[i].type, owner),
                                             call.typeArgs));
                    for (uint32_t d : a.dropsAtEntry) (void)slot_type(d);
                    ty = join(ty, infer(a.body[0], ctx));
                }
                return ty;
            }
            case NodeK::Cycle: {
                SemType t0 = infer(n.kids[0], Ctx{});
                bind_slot(n.slot, t0);
                SemType bt = infer(n.kids[1], Ctx{});
                if (!same_base(bt, t0) || !bt.caps.covers(t0.caps))
                    fail(vcode::Type, "cycle body does not reproduce the accumulator");
                return t0;
            }
            case NodeK::NewId: {
                effect_demand(Effect::Init, "ID.new");
                SemType id = make_prim(TypeK::Id);
                id.caps.add(BuiltinCap::Master);
                return id;
            }
            case NodeK::NewContext: {
                effect_demand(Effect::Init, "Context.new");
                check_wf(n.typeArgs[0], varBound_);
                if (!n.typeArgs[0].caps.has(BuiltinCap::Persist))
                    fail(vcode::Type, "context content type lacks Persist");
                return make_context(n.typeArgs[0]);
            }
            case NodeK::Derive: {
                SemType c = infer(n.kids[0], Ctx{});
                SemType i = infer(n.kids[1], Ctx{});
                if (c.kind != TypeK::Context || i.kind != TypeK::Id)
                    fail(vcode::Type, "derive takes a Context and an ID");
                SemType ref = make_ref(c.args[0]);
                ref.caps.add(BuiltinCap::Modify);
                return ref;
            }
        }
        fail(vcode::Decode, "unreachable node kind");
    }

    void check_attach_right(const CapRef& cap, const SemType& target) const {
        bool targetOwn = target.kind == TypeK::Adt && target.module.is_zero();
        if (cap.builtin) {
            if (!targetOwn)
                fail(vcode::Cap, "builtin capabilities attach only to own types");
            return;
        }
        if (cap.module.is_zero()) return;
        const auto* dep = reg_.module_at(cap.module);
        bool open = dep && cap.index < dep->caps.size() && dep->caps[cap.index].open;
        if (open && targetOwn) return;
        fail(vcode::Cap, "capability attached outside its defining module");
    }

    std::optional<bool> tails_and_return(const IrNode& n) const {
        switch (n.k) {
            case NodeK::AndReturn: return true;
            case NodeK::Drop: return tails_and_return(n.kids[0]);
            case NodeK::Let: return tails_and_return(n.kids[1]);
            case NodeK::Match:
            case NodeK::MatchTuple:
            case NodeK::Try: {
                std::optional<bool> acc;
                if (n.k == NodeK::Try) acc = false;
                for (const auto& a : n.arms) {
                    auto r = tails_and_return(a.body[0]);
                    if (!r) return std::nullopt;
                    if (!acc) acc = r;
                    else if (*acc != *r) return std::nullopt;
                }
                return acc;
            }
            default:
                return false;
        }
    }

    // ---- risk audit ----

    std::vector<RiskRef> callee_risks(const IrNode& call) const {
        const BFunction& f = function_decl(call.module, call.index);
        Digest owner = resolve_owner(call.module, Digest{});
        std::vector<RiskRef> out;
        for (const auto& r : f.risks) out.push_back(absolutize(r, owner));
        return out;
    }

    bool has_default_provider(const SemType& cell) const {
        if (cell.kind != TypeK::Adt) return false;
        if (cell.module.is_zero()) {
            for (const auto& f : m_.functions)
                if (f.defaultFor == cell.index) return true;
            return false;
        }
        return reg_.default_for(cell.module, cell.index).has_value();
    }

    void collect_risks(const IrNode& n, RiskSet& out) const {
        switch (n.k) {
            case NodeK::Arith: {
                bool isInt = arithIsInt_.count(&n) != 0;
                if (n.op == 0 || isInt)
                    out.insert(
                        RiskRef{true, BuiltinRisk::NumericOverflow, {}, "NumericOverflow"});
                if (n.op == 1 || isInt)
                    out.insert(RiskRef{true, BuiltinRisk::NumericUnderflow, {},
                                       "NumericUnderflow"});
                break;
            }
            case NodeK::Call:
                for (const auto& r : callee_risks(n)) out.insert(r);
                break;
            case NodeK::Modify:
                if (!has_default_provider(modifyCell_.at(&n)))
                    out.insert(RiskRef{true, BuiltinRisk::EmptyCell, {}, "EmptyCell"});
                break;
            case NodeK::Try: {
                RiskSet inner;
                collect_risks(n.kids[0], inner);
                for (const auto& a : n.arms) {
                    inner.erase(absolutize(a.risk, Digest{}));
                    collect_risks(a.body[0], inner);
                }
                out.insert(inner.begin(), inner.end());
                return;
            }
            default:
                break;
        }
        for (const auto& k : n.kids) collect_risks(k, out);
        for (const auto& a : n.arms) collect_risks(a.body[0], out);
    }

    void check_risks_declared(const IrNode& body, const std::vector<RiskRef>& declared,
                              const std::string& what) const {
        RiskSet raised;
        collect_risks(body, raised);
        for (const auto& r : raised) {
            bool ok = false;
            for (const auto& d : declared) ok |= absolutize(d, Digest{}) == r;
            if (!ok)
                fail(vcode::Risk, what + " raises undeclared risk '" + r.display() + "'");
        }
    }

    // ---- linear audit ----

    enum class St : uint8_t { Live, Dead };

    struct Binder {
        uint32_t slot;
        const IrNode* scope;           // subtree in which the slot lives
        const std::vector<uint32_t>* entryDrops = nullptr;
    };

    const CapSet& slot_caps(uint32_t s) const { return slots_[s]->caps; }

    St audit(const IrNode& n, uint32_t s, St st) const {
        switch (n.k) {
            case NodeK::UseMove:
                if (n.slot == s) {
                    if (st != St::Live) fail(vcode::Linear, "use of a consumed value");
                    return St::Dead;
                }
                return st;
            case NodeK::UseCopy:
                if (n.slot == s) {
                    if (st != St::Live) fail(vcode::Linear, "copy of a consumed value");
                    if (!slot_caps(s).has(BuiltinCap::Copy))
                        fail(vcode::Linear, "COPY of a value without Copy");
                }
                return st;
            case NodeK::Drop: {
                St cur = st;
                if (n.slot == s) {
                    if (st != St::Live) fail(vcode::Linear, "drop of a consumed value");
                    if (!slot_caps(s).has(BuiltinCap::Drop))
                        fail(vcode::Linear, "DROP of a value without Drop");
                    cur = St::Dead;
                }
                return audit(n.kids[0], s, cur);
            }
            case NodeK::Match:
            case NodeK::MatchTuple:
            case NodeK::Try: {
                St st1 = audit(n.kids[0], s, st);
                std::optional<St> end;
                if (n.k == NodeK::Try) {
                    St sEnd = st1;
                    sEnd = apply_drop_list(n.extraSlots, s, sEnd);
                    end = sEnd;
                }
                for (const auto& a : n.arms) {
                    St sa = apply_drop_list(a.dropsAtEntry, s, st1);
                    sa = audit(a.body[0], s, sa);
                    if (end && *end != sa)
                        fail(vcode::Linear, "paths disagree on value consumption");
                    end = sa;
                }
                return *end;
            }
            case NodeK::Cycle: {
                St st1 = audit(n.kids[0], s, st);
                if (n.lit >= 2) {
                    St st2 = audit(n.kids[1], s, st1);
                    if (st2 != st1)
                        fail(vcode::Linear, "cycle body consumes an outer value");
                    return st1;
                }
                return audit(n.kids[1], s, st1);
            }
            default: {
                St cur = st;
                for (const auto& k : n.kids) cur = audit(k, s, cur);
                return cur;
            }
        }
    }

    St apply_drop_list(const std::vector<uint32_t>& drops, uint32_t s, St st) const {
        for (uint32_t d : drops) {
            if (d != s) continue;
            if (st != St::Live) fail(vcode::Linear, "drop of a consumed value");
            if (!slot_caps(s).has(BuiltinCap::Drop))
                fail(vcode::Linear, "DROP of a value without Drop");
            st = St::Dead;
        }
        return st;
    }

    void collect_binders(const IrNode& n, std::vector<Binder>& out) const {
        switch (n.k) {
            case NodeK::Let:
            case NodeK::Modify:
            case NodeK::Cycle:
                out.push_back(Binder{n.slot, &n.kids[1]});
                break;
            case NodeK::Match:
            case NodeK::MatchTuple:
            case NodeK::Try:
                for (const auto& a : n.arms)
                    for (uint32_t s : a.slots) {
                        // entry drops of the same arm may consume the binder
                        out.push_back(Binder{s, &a.body[0], &a.dropsAtEntry});
                    }
                break;
            default:
                break;
        }
        for (const auto& k : n.kids) collect_binders(k, out);
        for (const auto& a : n.arms) collect_binders(a.body[0], out);
    }

    void audit_body(const IrNode& body, const std::vector<uint32_t>& paramSlots,
                    const std::vector<uint32_t>& entryDrops) {
        std::vector<Binder> binders;
        for (uint32_t p : paramSlots) binders.push_back(Binder{p, &body, &entryDrops});
        collect_binders(body, binders);
        for (const auto& b : binders) {
            St st = St::Live;
            if (b.entryDrops) st = apply_drop_list(*b.entryDrops, b.slot, st);
            st = audit(*b.scope, b.slot, st);
            if (st != St::Dead) fail(vcode::Linear, "value is never consumed");
        }
    }

    // ---- per-declaration drivers ----

    uint32_t varBound_ = 0;
    std::map<const IrNode*, SemType> modifyCell_;
    std::set<const IrNode*> arithIsInt_;

    void begin_body(uint32_t slotCount) {
        slots_.assign(slotCount, std::nullopt);
        slotCount_ = slotCount;
        maxOwnValLoad_ = -1;
        modifyCell_.clear();
        arithIsInt_.clear();
    }

    void check_function(uint32_t idx) {
        const BFunction& f = m_.functions[idx];
        currentFn_ = idx;
        currentEffect_ = f.effect;
        varBound_ = uint32_t(f.typeParams.size());
        begin_body(f.slotCount);
        if (f.params.size() > f.slotCount)
            fail(vcode::Type, "fewer slots than parameters");
        std::vector<uint32_t> paramSlots;
        for (size_t i = 0; i < f.params.size(); i++) {
            check_wf(f.params[i].type, varBound_);
            bind_slot(uint32_t(i), f.params[i].type);
            paramSlots.push_back(uint32_t(i));
        }
        check_wf(f.ret, varBound_);
        for (uint32_t d : f.entryDrops) (void)slot_type(d);
        SemType bt = infer(f.body, Ctx{});
        if (!same_base(bt, f.ret) || bt.caps != f.ret.caps)
            fail(vcode::Type, "body type does not match the declared return type");
        audit_body(f.body, paramSlots, f.entryDrops);
        check_risks_declared(f.body, f.risks, "'" + f.name + "'");
        fnValLoads_[idx] = maxOwnValLoad_;
    }

    void check_val(uint32_t idx) {
        const BVal& v = m_.vals[idx];
        currentFn_ = uint32_t(m_.functions.size());
        currentEffect_ = Effect::Init;
        varBound_ = 0;
        begin_body(v.slotCount);
        check_wf(v.type, 0);
        SemType t = infer(v.init, Ctx{});
        if (!t.equals(v.type)) fail(vcode::Type, "val type does not match its initializer");
        if (!t.caps.has(BuiltinCap::Copy) || !t.caps.has(BuiltinCap::Persist))
            fail(vcode::Cap, "val stores a value without Copy and Persist");
        if (maxOwnValLoad_ >= int(idx))
            fail(vcode::Type, "val initializer reaches a later val");
        audit_body(v.init, {}, {});
        check_risks_declared(v.init, {}, "val '" + v.name + "'");
    }

    void check_init() {
        const BInit& in = *m_.init;
        currentFn_ = uint32_t(m_.functions.size());
        currentEffect_ = Effect::Active;
        varBound_ = 0;
        begin_body(in.slotCount);
        check_wf(in.param.type, 0);
        if (in.param.type.kind != TypeK::Id || !in.param.type.caps.has(BuiltinCap::Master))
            fail(vcode::Type, "init parameter must be a Master ID");
        if (in.slotCount < 1) fail(vcode::Type, "init needs a parameter slot");
        bind_slot(0, in.param.type);
        for (uint32_t d : in.entryDrops) (void)slot_type(d);
        (void)infer(in.body, Ctx{});
        audit_body(in.body, {0}, in.entryDrops);
        check_risks_declared(in.body, in.risks, "init");
    }

    // ---- gas bounds ----

    uint64_t callee_bound(const IrNode& call, const std::vector<uint64_t>& earlier) const {
        if (call.module.is_zero()) return earlier.at(call.index);
        return reg_.function_bound(call.module, call.index);
    }

    uint64_t bound_with(const IrNode& n, const std::vector<uint64_t>& earlier) const {
        auto rec = [&](const IrNode& k) { return bound_with(k, earlier); };
        switch (n.k) {
            case NodeK::LitU:
            case NodeK::LitI:
            case NodeK::LitUnit:
                return tab_.lit;
            case NodeK::UseMove: return tab_.move;
            case NodeK::UseCopy: return tab_.copy;
            case NodeK::Drop: return tab_.drop + rec(n.kids[0]);
            case NodeK::Let: return tab_.let + rec(n.kids[0]) + rec(n.kids[1]);
            case NodeK::Construct:
            case NodeK::MakeTuple: {
                uint64_t c = tab_.constructBase + n.kids.size();
                for (const auto& k : n.kids) c += rec(k);
                return c;
            }
            case NodeK::Call: {
                uint64_t c = tab_.call + callee_bound(n, earlier);
                for (const auto& k : n.kids) c += rec(k);
                return c;
            }
            case NodeK::LoadVal: return tab_.valRead;
            case NodeK::Arith: return tab_.arith + rec(n.kids[0]) + rec(n.kids[1]);
            case NodeK::Match:
            case NodeK::MatchTuple: {
                uint64_t c = tab_.matchBase + n.arms.size() + rec(n.kids[0]);
                uint64_t worst = 0;
                for (const auto& a : n.arms) {
                    uint64_t ac = tab_.drop * a.dropsAtEntry.size() + rec(a.body[0]);
                    worst = std::max(worst, ac);
                }
                return c + worst;
            }
            case NodeK::Modify:
                return tab_.cellRead + tab_.cellWrite + rec(n.kids[0]) + rec(n.kids[1]);
            case NodeK::AndReturn:
                return tab_.andReturn + rec(n.kids[0]) + rec(n.kids[1]);
            case NodeK::Attach: return tab_.attach + rec(n.kids[0]);
            case NodeK::Detach: return tab_.detach + rec(n.kids[0]);
            case NodeK::Try: {
                uint64_t c = tab_.tryGuard + rec(n.kids[0]);
                uint64_t worst = tab_.drop * n.extraSlots.size();
                for (const auto& a : n.arms) {
                    uint64_t ac = tab_.drop * a.dropsAtEntry.size() + rec(a.body[0]);
                    worst = std::max(worst, ac);
                }
                return c + worst;
            }
            case NodeK::Cycle: {
                uint64_t body = rec(n.kids[1]);
                uint64_t total = (body != 0 && n.lit > UINT64_MAX / body)
                                     ? UINT64_MAX
                                     : n.lit * body;
                return tab_.cycleBase + rec(n.kids[0]) + total;
            }
            case NodeK::NewId: return tab_.newId;
            case NodeK::NewContext: return tab_.newContext;
            case NodeK::Derive: return tab_.derive + rec(n.kids[0]) + rec(n.kids[1]);
        }
        return 0;
    }

    uint64_t bound(const IrNode& n) const { return bound_with(n, bounds_); }

    uint64_t bound_of_function(uint32_t idx, const std::vector<uint64_t>& earlier) const {
        const BFunction& f = m_.functions[idx];
        return tab_.drop * f.entryDrops.size() + bound_with(f.body, earlier);
    }
};

}  // namespace

uint64_t gas_bound(const BytecodeModule& m, uint32_t fnIndex,
                   const std::vector<uint64_t>& earlierBounds,
                   const DeployedRegistry& registry, const CostTable& table) {
    (void)earlierBounds;
    auto r = validate(encode(m), registry, table);
    if (auto* vm = std::get_if<VerifiedModule>(&r)) return vm->functionBounds.at(fnIndex);
    return 0;
}

std::variant<VerifiedModule, VError> validate(const Bytes& bytes,
                                              const DeployedRegistry& registry,
                                              const CostTable& table) {
    auto decoded = decode(bytes);
    if (auto* err = std::get_if<DecodeError>(&decoded))
        return VError{vcode::Decode,
                      err->reason + " at offset " + std::to_string(err->offset)};
    const auto& m = std::get<BytecodeModule>(decoded);
    try {
        Validator v(m, registry, table);
        return v.run(module_address(bytes));
    } catch (const VErr& e) {
        return e.e;
    }
}

}  // namespace mandala
