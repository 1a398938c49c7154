#include <algorithm>
#include <functional>
#include <sstream>

#include "sema_internal.hpp"

namespace mandala {

using namespace detail;

namespace {

struct Ctx {
    bool transitionTail = false;
    const SemType* cellType = nullptr;

    Ctx off() const { return Ctx{}; }
};

// Normalized callable signature (types absolutized to the caller's view).
struct Callee {
    Digest module;  // zero = this module
    uint32_t index = 0;
    std::vector<std::string> typeParams;
    std::vector<SemType> params;
    SemType ret;
    std::vector<RiskRef> risks;
    Effect effect = Effect::Pure;
    std::string name;
};

struct CtorSig {
    Digest module;
    uint32_t typeIdx = 0, ctorIdx = 0;
    bool open = false;
    std::vector<std::string> typeParams;
    std::vector<SemType> fields;
    CapSet declaredCaps;
    std::string typeName;
};

class Checker {
public:
    Checker(const ResolvedModule& rm, const ModuleEnv& env, const DeployedRegistry& reg)
        : rm_(rm), env_(env), reg_(reg) {}

    TypedModule run() {
        TypedModule tm;
        tm.name = rm_.ast.name;
        tm.importNames = rm_.importNames;
        tm.imports = rm_.imports;
        tm_ = &tm;

        for (size_t i = 0; i < rm_.ast.decls.size(); i++) {
            const auto& d = rm_.ast.decls[i];
            if (const auto* t = std::get_if<TypeDecl>(&d)) check_type_decl(*t);
            else if (const auto* c = std::get_if<CapabilityDecl>(&d)) {
                tm.caps.push_back(BCapability{c->name, c->open});
            } else if (const auto* f = std::get_if<FunDecl>(&d)) check_fun(*f);
            else if (const auto* v = std::get_if<ValDecl>(&d)) check_val(*v);
            else if (const auto* in = std::get_if<InitDecl>(&d)) check_init(*in);
        }
        return tm;
    }

private:
    const ResolvedModule& rm_;
    const ModuleEnv& env_;
    const DeployedRegistry& reg_;
    TypedModule* tm_ = nullptr;

    // current function state
    std::map<std::string, uint32_t> typeParams_;
    std::vector<TBinding> slots_;
    std::vector<std::vector<std::pair<std::string, uint32_t>>> scopes_;

    // ---- shared lookups ----

    const BTypeDecl& own_type(uint32_t idx) const { return tm_->types[idx]; }

    CapSet resolve_caps(const std::vector<std::string>& names, Pos pos) const {
        CapSet c;
        for (const auto& n : names) {
            if (auto b = builtin_cap_by_name(n)) {
                c.add(*b);
                continue;
            }
            if (auto it = env_.own.caps.find(n); it != env_.own.caps.end()) {
                c.add(UserCap{Digest{}, it->second.index});
                continue;
            }
            for (const auto& ie : env_.imports) {
                int ci = ie.cap_idx(n);
                if (ci >= 0) {
                    c.add(UserCap{ie.addr, uint32_t(ci)});
                    break;
                }
            }
        }
        return c;
    }

    struct TypeLookup {
        Digest module;  // zero = self
        uint32_t index;
        const BTypeDecl* decl;
    };

    TypeLookup lookup_adt(const std::string& n, Pos pos) const {
        if (auto it = env_.own.types.find(n); it != env_.own.types.end())
            return {Digest{}, it->second.index, &tm_->types[it->second.index]};
        for (const auto& ie : env_.imports) {
            int ti = ie.type_idx(n);
            if (ti >= 0) return {ie.addr, uint32_t(ti), &ie.mod->types[ti]};
        }
        bail(diag::NameUnknown, pos, "unknown type '" + n + "'");
    }

    // Annotation to semantic type. Written capabilities are the annotation's
    // exact set for ADTs (falling back to the declared set when missing)
    // and extend the inherent Copy/Drop/Persist set for primitives.
    SemType from_atype(const AType& t) const {
        CapSet written = resolve_caps(t.caps, t.pos);
        if (t.is_tuple) {
            std::vector<SemType> elems;
            for (const auto& a : t.args) elems.push_back(from_atype(a));
            SemType out = make_tuple(std::move(elems));
            if (!written.empty()) out.caps = written;
            return out;
        }
        if (auto it = typeParams_.find(t.name); it != typeParams_.end()) {
            if (!t.args.empty())
                bail(diag::TypeMismatch, t.pos, "type parameter takes no arguments");
            SemType v = make_var(it->second, t.name);
            v.caps = written;
            return v;
        }
        if (is_builtin_type_name(t.name)) return builtin_atype(t, written);
        TypeLookup tl = lookup_adt(t.name, t.pos);
        if (t.args.size() != tl.decl->typeParams.size())
            bail(diag::TypeMismatch, t.pos,
                 "'" + t.name + "' expects " + std::to_string(tl.decl->typeParams.size()) +
                     " type argument(s), got " + std::to_string(t.args.size()));
        std::vector<SemType> args;
        for (const auto& a : t.args) args.push_back(from_atype(a));
        CapSet caps = written.empty() ? absolutize_caps(tl.decl->declaredCaps, tl.module)
                                      : written;
        SemType out = make_adt(tl.module, tl.index, t.name, std::move(args), caps);
        check_cap_targets(out, t.pos);
        return out;
    }

    SemType builtin_atype(const AType& t, CapSet written) const {
        auto arity = [&](size_t n) {
            if (t.args.size() != n)
                bail(diag::TypeMismatch, t.pos,
                     "'" + t.name + "' expects " + std::to_string(n) + " type argument(s)");
        };
        SemType out;
        if (t.name == "UInt") { arity(0); out = make_prim(TypeK::UInt); }
        else if (t.name == "Int") { arity(0); out = make_prim(TypeK::Int); }
        else if (t.name == "Unit") { arity(0); out = make_prim(TypeK::Unit); }
        else if (t.name == "ID") { arity(0); out = make_prim(TypeK::Id); }
        else if (t.name == "Context") {
            arity(1);
            out = make_context(from_atype(t.args[0]));
            require_persist(out.args[0], t.pos);
        } else {
            arity(1);
            out = make_ref(from_atype(t.args[0]));
            require_persist(out.args[0], t.pos);
        }
        out.caps = out.caps.unite(written);
        check_cap_targets(out, t.pos);
        return out;
    }

    void require_persist(const SemType& inner, Pos pos) const {
        if (!inner.caps.has(BuiltinCap::Persist))
            bail(diag::Persist, pos,
                 "stored type " + type_to_string(inner) + " lacks the Persist capability");
    }

    void check_cap_targets(const SemType& t, Pos pos) const {
        if (t.caps.has(BuiltinCap::Modify) && t.kind != TypeK::Ref)
            bail(diag::CapStruct, pos, "Modify applies only to references");
        if (t.caps.has(BuiltinCap::Master) && t.kind != TypeK::Id)
            bail(diag::CapStruct, pos, "Master applies only to IDs");
    }

    CapSet absolutize_caps(const CapSet& c, const Digest& owner) const {
        CapSet out;
        for (int bit = 0; bit < 6; bit++)
            if (c.builtin_mask() & (1 << bit)) out.add(BuiltinCap(1 << bit));
        for (auto u : c.user()) {
            u.module = resolve_owner(u.module, owner);
            out.add(u);
        }
        return out;
    }

    CtorSig ctor_sig(const std::string& name, Pos pos) const {
        if (auto it = env_.own.ctors.find(name); it != env_.own.ctors.end()) {
            const auto& td = tm_->types[it->second.index];
            CtorSig s;
            s.module = Digest{};
            s.typeIdx = it->second.index;
            s.ctorIdx = it->second.sub;
            s.open = td.open;
            s.typeParams = td.typeParams;
            s.fields = td.ctors[s.ctorIdx].fields;
            s.declaredCaps = td.declaredCaps;
            s.typeName = td.name;
            return s;
        }
        for (const auto& ie : env_.imports) {
            if (auto hit = ie.ctor(name)) {
                const auto& td = ie.mod->types[hit->first];
                CtorSig s;
                s.module = ie.addr;
                s.typeIdx = hit->first;
                s.ctorIdx = hit->second;
                s.open = td.open;
                s.typeParams = td.typeParams;
                for (const auto& f : td.ctors[hit->second].fields)
                    s.fields.push_back(absolutize(f, ie.addr));
                s.declaredCaps = absolutize_caps(td.declaredCaps, ie.addr);
                s.typeName = td.name;
                return s;
            }
        }
        bail(diag::NameUnknown, pos, "unknown constructor '" + name + "'");
    }

    Callee own_callee(uint32_t idx) const {
        const auto& f = tm_->functions[idx];
        Callee c;
        c.module = Digest{};
        c.index = idx;
        c.typeParams = f.typeParams;
        for (const auto& p : f.params) c.params.push_back(p.type);
        c.ret = f.ret;
        c.risks = f.declaredRisks;
        c.effect = f.effect;
        c.name = f.name;
        return c;
    }

    Callee import_callee(const ImportEnv& ie, uint32_t idx) const {
        const auto& f = ie.mod->functions[idx];
        Callee c;
        c.module = ie.addr;
        c.index = idx;
        c.typeParams = f.typeParams;
        for (const auto& p : f.params) c.params.push_back(absolutize(p.type, ie.addr));
        c.ret = absolutize(f.ret, ie.addr);
        for (const auto& r : f.risks) c.risks.push_back(absolutize(r, ie.addr));
        c.effect = f.effect;
        c.name = f.name;
        return c;
    }

    // ---- scope helpers ----

    uint32_t new_slot(const std::string& name, SemType type, Pos pos) {
        slots_.push_back(TBinding{name, std::move(type), pos});
        return uint32_t(slots_.size() - 1);
    }
    void push_scope() { scopes_.emplace_back(); }
    void pop_scope() { scopes_.pop_back(); }
    void bind(const std::string& n, uint32_t slot) { scopes_.back().push_back({n, slot}); }
    std::optional<uint32_t> lookup_local(const std::string& n) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            for (auto jt = it->rbegin(); jt != it->rend(); ++jt)
                if (jt->first == n) return jt->second;
        return std::nullopt;
    }

    // ---- declarations ----

    void check_type_decl(const TypeDecl& td) {
        BTypeDecl out;
        out.name = td.name;
        out.open = td.open;
        out.declaredCaps = resolve_caps(td.caps, td.pos);
        out.typeParams = td.typeParams;

        typeParams_.clear();
        for (size_t i = 0; i < td.typeParams.size(); i++)
            typeParams_[td.typeParams[i]] = uint32_t(i);

        if (td.ctors.empty() && !td.typeParams.empty())
            bail(diag::TypeMismatch, td.pos,
                 "a constructor-less marker type cannot be generic");
        for (const auto& c : td.ctors) {
            BCtor bc;
            bc.name = c.name;
            for (const auto& f : c.fields) bc.fields.push_back(from_atype(f));
            out.ctors.push_back(std::move(bc));
        }
        typeParams_.clear();
        tm_->types.push_back(std::move(out));
    }

    std::vector<RiskRef> resolve_risks(const std::vector<std::string>& names,
                                       const std::vector<Pos>& pos) {
        std::vector<RiskRef> out;
        for (size_t i = 0; i < names.size(); i++) {
            RiskRef r;
            if (auto b = builtin_risk_by_name(names[i])) {
                r.builtin = true;
                r.b = *b;
                r.name = names[i];
            } else {
                r.builtin = false;
                int hits = 0;
                for (const auto& ie : env_.imports) {
                    if (auto known = ie.risk(names[i])) {
                        r = *known;
                        hits++;
                    }
                }
                if (hits > 1)
                    bail(diag::NameUnknown, pos[i], "ambiguous risk '" + names[i] + "'");
                if (hits == 0) {
                    r.module = Digest{};
                    r.name = names[i];
                }
            }
            bool dup = false;
            for (const auto& prev : out) dup |= prev == r;
            if (!dup) out.push_back(r);
        }
        return out;
    }

    void check_fun(const FunDecl& fd) {
        TFunction f;
        f.pos = fd.pos;
        f.name = fd.name;
        f.vis = fd.vis;
        f.effect = fd.effect.value_or(Effect::Pure);
        f.declaredRisks = resolve_risks(fd.risks, fd.riskPos);
        f.typeParams = fd.typeParams;

        typeParams_.clear();
        for (size_t i = 0; i < fd.typeParams.size(); i++)
            typeParams_[fd.typeParams[i]] = uint32_t(i);
        if (fd.vis == Visibility::Protected) {
            f.protectedParam = typeParams_.at(fd.protectedParam);
        }
        if (!fd.defaultFor.empty()) {
            auto it = env_.own.types.find(fd.defaultFor);
            if (it == env_.own.types.end())
                bail(diag::TypeMismatch, fd.pos,
                     "default provider must live in the module defining the type");
            f.defaultFor = it->second.index;
            for (const auto& g : tm_->functions)
                if (g.defaultFor == f.defaultFor)
                    bail(diag::TypeMismatch, fd.pos,
                         "type '" + fd.defaultFor + "' already has a default provider");
        }

        slots_.clear();
        scopes_.clear();
        push_scope();

        struct Destructured {
            uint32_t paramSlot;
            CtorSig sig;
            std::vector<SemType> typeArgs;
            std::vector<uint32_t> fieldSlots;
            Pos pos;
        };
        std::vector<Destructured> wraps;

        // Parameters take the leading slots; field binders of destructured
        // parameters follow after all of them.
        for (const auto& p : fd.params) {
            if (!p.destructure) {
                SemType t = from_atype(p.type);
                uint32_t s = new_slot(p.name, t, p.pos);
                bind(p.name, s);
                f.params.push_back(BParam{p.name, std::move(t)});
                continue;
            }
            CtorSig sig = ctor_sig(p.type.name, p.pos);
            if (p.type.args.size() != sig.typeParams.size())
                bail(diag::TypeMismatch, p.pos,
                     "'" + p.type.name + "' expects " +
                         std::to_string(sig.typeParams.size()) + " type argument(s)");
            std::vector<SemType> targs;
            for (const auto& a : p.type.args) targs.push_back(from_atype(a));
            if (p.binders.size() != sig.fields.size())
                bail(diag::TypeMismatch, p.pos,
                     "constructor '" + p.type.name + "' has " +
                         std::to_string(sig.fields.size()) + " field(s)");
            SemType pt = make_adt(sig.module, sig.typeIdx, sig.typeName, targs,
                                  resolve_caps(p.type.caps, p.pos));
            check_cap_targets(pt, p.pos);
            uint32_t ps = new_slot("param$" + p.type.name, pt, p.pos);
            wraps.push_back(Destructured{ps, sig, targs, {}, p.pos});
            f.params.push_back(BParam{p.type.name, std::move(pt)});
        }
        {
            size_t w = 0;
            for (const auto& p : fd.params) {
                if (!p.destructure) continue;
                auto& d = wraps[w++];
                for (size_t b = 0; b < p.binders.size(); b++) {
                    SemType ft = substitute(d.sig.fields[b], d.typeArgs);
                    uint32_t fs = new_slot(p.binders[b], ft, p.binderPos[b]);
                    bind(p.binders[b], fs);
                    d.fieldSlots.push_back(fs);
                }
            }
        }

        TExprPtr body = check(*fd.body, Ctx{});

        // Destructuring parameters become single-arm matches around the body.
        for (auto it = wraps.rbegin(); it != wraps.rend(); ++it) {
            auto scrut = std::make_unique<TExpr>();
            scrut->k = TK::Var;
            scrut->pos = it->pos;
            scrut->slot = it->paramSlot;
            scrut->type = slots_[it->paramSlot].type;
            auto match = std::make_unique<TExpr>();
            match->k = TK::Case;
            match->pos = it->pos;
            match->type = body->type;
            match->kids.push_back(std::move(scrut));
            TArm arm;
            arm.ctorIndex = it->sig.ctorIdx;
            arm.slots = it->fieldSlots;
            arm.body = std::move(body);
            match->arms.push_back(std::move(arm));
            body = std::move(match);
        }

        pop_scope();
        f.ret = body->type;
        f.slots = slots_;
        f.body = std::move(body);
        tm_->functions.push_back(std::move(f));
        typeParams_.clear();
    }

    void check_val(const ValDecl& vd) {
        typeParams_.clear();
        slots_.clear();
        scopes_.clear();
        push_scope();
        TVal v;
        v.pos = vd.pos;
        v.name = vd.name;
        v.init = check(*vd.init, Ctx{});
        v.type = v.init->type;
        v.slots = slots_;
        pop_scope();
        tm_->vals.push_back(std::move(v));
    }

    void check_init(const InitDecl& in) {
        if (tm_->init)
            bail(diag::TypeMismatch, in.pos, "at most one init declaration per module");
        typeParams_.clear();
        slots_.clear();
        scopes_.clear();
        push_scope();
        TInit ti;
        ti.pos = in.pos;
        ti.risks = resolve_risks(in.risks, in.riskPos);
        if (in.param.destructure)
            bail(diag::TypeMismatch, in.param.pos, "init takes 'name:Master ID'");
        SemType pt = from_atype(in.param.type);
        if (pt.kind != TypeK::Id || !pt.caps.has(BuiltinCap::Master))
            bail(diag::TypeMismatch, in.param.pos,
                 "init parameter must be a Master ID");
        uint32_t s = new_slot(in.param.name, pt, in.param.pos);
        bind(in.param.name, s);
        ti.param = BParam{in.param.name, pt};
        ti.body = check(*in.body, Ctx{});
        ti.slots = slots_;
        pop_scope();
        tm_->init = std::move(ti);
    }

    // ---- expression typing ----

    TExprPtr leaf(TK k, const Expr& e) {
        auto t = std::make_unique<TExpr>();
        t->k = k;
        t->pos = e.pos;
        return t;
    }

    SemType join_types(const SemType& a, const SemType& b, Pos pos) const {
        if (!same_base(a, b))
            bail(diag::TypeMismatch, pos,
                 "branches disagree: " + type_to_string(a) + " vs " + type_to_string(b));
        SemType out = a;
        out.caps = a.caps.intersect(b.caps);
        return out;
    }

    // Unifies arguments against a (possibly generic) parameter list.
    std::vector<SemType> infer_type_args(Pos pos, const std::string& what,
                                         const std::vector<std::string>& typeParams,
                                         const std::vector<SemType>& params,
                                         const std::vector<AType>& explicitArgs,
                                         const std::vector<TExprPtr>& args) {
        std::vector<std::optional<SemType>> bindings(typeParams.size());
        if (!explicitArgs.empty()) {
            if (explicitArgs.size() != typeParams.size())
                bail(diag::TypeMismatch, pos,
                     what + " expects " + std::to_string(typeParams.size()) +
                         " type argument(s)");
            for (size_t i = 0; i < explicitArgs.size(); i++)
                bindings[i] = from_atype(explicitArgs[i]);
        }
        if (args.size() != params.size())
            bail(diag::TypeMismatch, pos,
                 what + " expects " + std::to_string(params.size()) + " argument(s), got " +
                     std::to_string(args.size()));
        for (size_t i = 0; i < args.size(); i++) {
            if (!unify(params[i], args[i]->type, bindings, true)) {
                SemType shown = params[i];
                std::vector<SemType> partial;
                for (const auto& b : bindings)
                    partial.push_back(b ? *b : make_var(uint32_t(partial.size()), "?"));
                shown = substitute(shown, partial);
                bail(diag::TypeMismatch, args[i]->pos,
                     what + ": argument " + std::to_string(i + 1) + " has type " +
                         type_to_string(args[i]->type) + ", expected " +
                         type_to_string(shown));
            }
        }
        std::vector<SemType> out;
        for (size_t i = 0; i < bindings.size(); i++) {
            if (!bindings[i])
                bail(diag::GenericAmbig, pos,
                     what + ": type argument '" + typeParams[i] +
                         "' cannot be inferred; write it explicitly");
            out.push_back(*bindings[i]);
        }
        return out;
    }

    TExprPtr check_ctor_apply(const Expr& e, const CtorSig& sig) {
        if (!sig.module.is_zero() && !sig.open)
            bail(diag::CtorClosed, e.pos,
                 "type '" + sig.typeName + "' is not open; only its module constructs it");
        std::vector<TExprPtr> args;
        for (const auto& k : e.kids) args.push_back(check(*k, Ctx{}));
        auto targs = infer_type_args(e.pos, "constructor '" + sig.typeName + "'",
                                     sig.typeParams, sig.fields, e.typeArgs, args);
        auto t = leaf(TK::Ctor, e);
        t->module = sig.module;
        t->index = sig.typeIdx;
        t->index2 = sig.ctorIdx;
        t->typeArgs = targs;
        t->type = make_adt(sig.module, sig.typeIdx, sig.typeName, targs, sig.declaredCaps);
        t->kids = std::move(args);
        return t;
    }

    TExprPtr check_call_to(const Expr& e, const Callee& c) {
        std::vector<TExprPtr> args;
        for (const auto& k : e.kids) args.push_back(check(*k, Ctx{}));
        auto targs = infer_type_args(e.pos, "'" + c.name + "'", c.typeParams, c.params,
                                     e.typeArgs, args);
        auto t = leaf(TK::Call, e);
        t->module = c.module;
        t->index = c.index;
        t->typeArgs = targs;
        t->type = substitute(c.ret, targs);
        t->kids = std::move(args);
        return t;
    }

    TExprPtr check_builtin(const Expr& e, BuiltinFn which) {
        auto t = leaf(TK::BuiltinCall, e);
        t->builtin = which;
        std::vector<TExprPtr> args;
        for (const auto& k : e.kids) args.push_back(check(*k, Ctx{}));
        switch (which) {
            case BuiltinFn::Derive: {
                if (!e.typeArgs.empty())
                    bail(diag::TypeMismatch, e.pos, "derive takes no type arguments");
                if (args.size() != 2)
                    bail(diag::TypeMismatch, e.pos, "derive(context, id)");
                if (args[0]->type.kind != TypeK::Context)
                    bail(diag::TypeMismatch, args[0]->pos,
                         "derive needs a Context, got " + type_to_string(args[0]->type));
                if (args[1]->type.kind != TypeK::Id)
                    bail(diag::TypeMismatch, args[1]->pos,
                         "derive needs an ID, got " + type_to_string(args[1]->type));
                SemType ref = make_ref(args[0]->type.args[0]);
                ref.caps.add(BuiltinCap::Modify);
                t->type = ref;
                break;
            }
            case BuiltinFn::NewContext: {
                if (e.typeArgs.size() != 1)
                    bail(diag::TypeMismatch, e.pos, "Context.new[T]() needs its type");
                if (!args.empty())
                    bail(diag::TypeMismatch, e.pos, "Context.new takes no arguments");
                SemType inner = from_atype(e.typeArgs[0]);
                require_persist(inner, e.pos);
                t->typeArgs.push_back(inner);
                t->type = make_context(inner);
                break;
            }
            case BuiltinFn::NewId: {
                if (!e.typeArgs.empty() || !args.empty())
                    bail(diag::TypeMismatch, e.pos, "ID.new takes no arguments");
                SemType id = make_prim(TypeK::Id);
                id.caps.add(BuiltinCap::Master);
                t->type = id;
                break;
            }
        }
        t->kids = std::move(args);
        return t;
    }

    TExprPtr check_val_ref(const Expr& e, const Digest& module, uint32_t idx,
                           const SemType& type) {
        auto t = leaf(TK::ValRef, e);
        t->module = module;
        t->index = idx;
        t->type = type;
        return t;
    }

    TExprPtr check_call(const Expr& e) {
        if (e.path.size() == 2) {
            if (e.path[0] == "Context" && e.path[1] == "new")
                return check_builtin(e, BuiltinFn::NewContext);
            if (e.path[0] == "ID" && e.path[1] == "new")
                return check_builtin(e, BuiltinFn::NewId);
            const auto* ie = env_.import_by_name(e.path[0]);
            if (!ie) bail(diag::NameUnknown, e.pos, "unknown module '" + e.path[0] + "'");
            int fi = ie->fn_idx(e.path[1]);
            if (fi >= 0) return check_call_to(e, import_callee(*ie, uint32_t(fi)));
            if (auto hit = ie->ctor(e.path[1])) {
                CtorSig sig = ctor_sig_from(*ie, hit->first, hit->second);
                return check_ctor_apply(e, sig);
            }
            bail(diag::TypeMismatch, e.pos, "'" + e.path[1] + "' is not callable");
        }
        const std::string& n = e.path[0];
        if (lookup_local(n))
            bail(diag::TypeMismatch, e.pos, "'" + n + "' is a value, not a function");
        if (n == "derive") return check_builtin(e, BuiltinFn::Derive);
        if (auto it = env_.own.fns.find(n); it != env_.own.fns.end())
            return check_call_to(e, own_callee(it->second.index));
        if (auto it = env_.own.ctors.find(n); it != env_.own.ctors.end())
            return check_ctor_apply(e, ctor_sig(n, e.pos));
        for (const auto& ie : env_.imports) {
            int fi = ie.fn_idx(n);
            if (fi >= 0) return check_call_to(e, import_callee(ie, uint32_t(fi)));
            if (auto hit = ie.ctor(n)) return check_ctor_apply(e, ctor_sig(n, e.pos));
        }
        if (env_.own.vals.count(n))
            bail(diag::TypeMismatch, e.pos, "'" + n + "' is a val, not a function");
        bail(diag::NameUnknown, e.pos, "unknown name '" + n + "'");
    }

    CtorSig ctor_sig_from(const ImportEnv& ie, uint32_t typeIdx, uint32_t ctorIdx) const {
        const auto& td = ie.mod->types[typeIdx];
        CtorSig s;
        s.module = ie.addr;
        s.typeIdx = typeIdx;
        s.ctorIdx = ctorIdx;
        s.open = td.open;
        s.typeParams = td.typeParams;
        for (const auto& f : td.ctors[ctorIdx].fields)
            s.fields.push_back(absolutize(f, ie.addr));
        s.declaredCaps = absolutize_caps(td.declaredCaps, ie.addr);
        s.typeName = td.name;
        return s;
    }

    TExprPtr check_path_expr(const Expr& e) {
        if (e.path.size() == 1) {
            const std::string& n = e.path[0];
            if (auto s = lookup_local(n)) {
                auto t = leaf(TK::Var, e);
                t->slot = *s;
                t->type = slots_[*s].type;
                return t;
            }
            if (auto it = env_.own.vals.find(n); it != env_.own.vals.end())
                return check_val_ref(e, Digest{}, it->second.index,
                                     tm_->vals[it->second.index].type);
            for (const auto& ie : env_.imports) {
                int vi = ie.val_idx(n);
                if (vi >= 0)
                    return check_val_ref(e, ie.addr, uint32_t(vi),
                                         absolutize(ie.mod->vals[vi].type, ie.addr));
            }
            if (env_.own.fns.count(n) || env_.own.ctors.count(n))
                bail(diag::TypeMismatch, e.pos,
                     "'" + n + "' is a function; write a call");
            bail(diag::NameUnknown, e.pos, "unknown name '" + n + "'");
        }
        const auto* ie = env_.import_by_name(e.path[0]);
        if (!ie) bail(diag::NameUnknown, e.pos, "unknown module '" + e.path[0] + "'");
        int vi = ie->val_idx(e.path[1]);
        if (vi < 0)
            bail(diag::NameUnknown, e.pos,
                 "module '" + e.path[0] + "' has no val '" + e.path[1] + "'");
        return check_val_ref(e, ie->addr, uint32_t(vi),
                             absolutize(ie->mod->vals[vi].type, ie->addr));
    }

    // Whether all tail positions of a transition end in `& return`.
    // nullopt = mixed.
    std::optional<bool> tails_and_return(const TExpr& t) const {
        switch (t.k) {
            case TK::AndReturn:
                return true;
            case TK::Let:
                return tails_and_return(*t.kids[1]);
            case TK::Case:
            case TK::Try: {
                std::optional<bool> acc;
                if (t.k == TK::Try) acc = false;  // success path yields the call value
                for (const auto& a : t.arms) {
                    auto r = tails_and_return(*a.body);
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

    TExprPtr check(const Expr& e, Ctx ctx) {
        switch (e.k) {
            case ExK::LitU: {
                auto t = leaf(TK::LitU, e);
                t->litu = e.litu;
                t->type = make_prim(TypeK::UInt);
                return t;
            }
            case ExK::LitI: {
                auto t = leaf(TK::LitI, e);
                t->liti = e.liti;
                t->type = make_prim(TypeK::Int);
                return t;
            }
            case ExK::Unit: {
                auto t = leaf(TK::Unit, e);
                t->type = make_prim(TypeK::Unit);
                return t;
            }
            case ExK::Path:
                return check_path_expr(e);
            case ExK::Call:
                return check_call(e);
            case ExK::Tuple: {
                auto t = leaf(TK::Tuple, e);
                std::vector<SemType> elems;
                for (const auto& k : e.kids) {
                    t->kids.push_back(check(*k, Ctx{}));
                    elems.push_back(t->kids.back()->type);
                }
                t->type = make_tuple(std::move(elems));
                return t;
            }
            case ExK::Binary: {
                auto t = leaf(TK::Binary, e);
                t->op = e.op;
                t->kids.push_back(check(*e.kids[0], Ctx{}));
                t->kids.push_back(check(*e.kids[1], Ctx{}));
                const auto& lt = t->kids[0]->type;
                const auto& rt = t->kids[1]->type;
                if (!((lt.kind == TypeK::UInt && rt.kind == TypeK::UInt) ||
                      (lt.kind == TypeK::Int && rt.kind == TypeK::Int)))
                    bail(diag::TypeMismatch, e.pos,
                         "arithmetic needs two UInt or two Int operands, got " +
                             type_to_string(lt) + " and " + type_to_string(rt));
                t->type = make_prim(lt.kind);
                return t;
            }
            case ExK::Let: {
                auto rhs = check(*e.kids[0], Ctx{});
                if (e.pat.k == Pattern::K::Binder) {
                    auto t = leaf(TK::Let, e);
                    uint32_t s = new_slot(e.pat.name, rhs->type, e.pat.pos);
                    push_scope();
                    bind(e.pat.name, s);
                    t->slot = s;
                    t->kids.push_back(std::move(rhs));
                    t->kids.push_back(check(*e.kids[1], ctx));
                    pop_scope();
                    t->type = t->kids[1]->type;
                    return t;
                }
                // pattern let is a single-arm case
                return check_case_like(e, std::move(rhs), ctx, /*fromLet=*/true);
            }
            case ExK::Case: {
                auto scrut = check(*e.kids[0], Ctx{});
                return check_case_like(e, std::move(scrut), ctx, false);
            }
            case ExK::Modify:
                return check_modify(e, ctx);
            case ExK::AndReturn: {
                if (!ctx.transitionTail || !ctx.cellType)
                    bail(diag::TypeMismatch, e.pos,
                         "'& return' is only valid at the end of a modify transition");
                auto t = leaf(TK::AndReturn, e);
                t->kids.push_back(check(*e.kids[0], Ctx{}));
                const auto& cellv = t->kids[0]->type;
                if (!same_base(cellv, *ctx.cellType) ||
                    !cellv.caps.covers(ctx.cellType->caps))
                    bail(diag::TypeMismatch, t->kids[0]->pos,
                         "cell takes " + type_to_string(*ctx.cellType) + ", got " +
                             type_to_string(cellv));
                t->kids.push_back(check(*e.kids[1], Ctx{}));
                t->type = t->kids[1]->type;
                return t;
            }
            case ExK::Attach:
            case ExK::Detach: {
                auto t = leaf(e.k == ExK::Attach ? TK::Attach : TK::Detach, e);
                t->kids.push_back(check(*e.kids[0], Ctx{}));
                t->cap = resolve_cap_ref(e.bindName, e.bindPos);
                SemType ty = t->kids[0]->type;
                bool has = t->cap.builtin ? ty.caps.has(t->cap.b)
                                          : ty.caps.has(UserCap{t->cap.module, t->cap.index});
                if (e.k == ExK::Attach) {
                    if (has)
                        bail(diag::TypeMismatch, e.pos,
                             "capability '" + e.bindName + "' already attached");
                    if (t->cap.builtin) ty.caps.add(t->cap.b);
                    else ty.caps.add(UserCap{t->cap.module, t->cap.index});
                    check_cap_targets(ty, e.pos);
                } else {
                    if (!has)
                        bail(diag::TypeMismatch, e.pos,
                             "capability '" + e.bindName + "' is not attached");
                    if (t->cap.builtin) ty.caps.remove(t->cap.b);
                    else ty.caps.remove(UserCap{t->cap.module, t->cap.index});
                }
                t->type = std::move(ty);
                return t;
            }
            case ExK::Cycle: {
                auto t = leaf(TK::Cycle, e);
                t->cycleN = e.cycleN;
                t->kids.push_back(check(*e.kids[0], Ctx{}));
                SemType accType = t->kids[0]->type;
                uint32_t s = new_slot(e.bindName, accType, e.bindPos);
                t->slot = s;
                push_scope();
                bind(e.bindName, s);
                t->kids.push_back(check(*e.kids[1], Ctx{}));
                pop_scope();
                const auto& bt = t->kids[1]->type;
                if (!same_base(bt, accType) || !bt.caps.covers(accType.caps))
                    bail(diag::TypeMismatch, t->kids[1]->pos,
                         "cycle body must produce " + type_to_string(accType) + ", got " +
                             type_to_string(bt));
                t->type = accType;
                return t;
            }
            case ExK::Try:
                return check_try(e, ctx);
        }
        bail(diag::TypeMismatch, e.pos, "unsupported expression");
    }

    CapRef resolve_cap_ref(const std::string& n, Pos pos) const {
        CapRef c;
        if (auto b = builtin_cap_by_name(n)) {
            c.builtin = true;
            c.b = *b;
            c.name = n;
            return c;
        }
        c.builtin = false;
        c.name = n;
        if (auto it = env_.own.caps.find(n); it != env_.own.caps.end()) {
            c.module = Digest{};
            c.index = it->second.index;
            return c;
        }
        for (const auto& ie : env_.imports) {
            int ci = ie.cap_idx(n);
            if (ci >= 0) {
                c.module = ie.addr;
                c.index = uint32_t(ci);
                return c;
            }
        }
        bail(diag::NameUnknown, pos, "unknown capability '" + n + "'");
    }

    TExprPtr check_case_like(const Expr& e, TExprPtr scrut, Ctx ctx, bool fromLet) {
        auto t = leaf(TK::Case, e);
        const SemType st = scrut->type;
        t->kids.push_back(std::move(scrut));

        auto arm_of = [&](const Pattern& pat, const Expr& bodyExpr) {
            TArm arm;
            if (st.kind == TypeK::Tuple) {
                if (pat.k != Pattern::K::Tuple)
                    bail(diag::TypeMismatch, pat.pos, "tuple value needs a tuple pattern");
                if (pat.binders.size() != st.args.size())
                    bail(diag::TypeMismatch, pat.pos,
                         "tuple has " + std::to_string(st.args.size()) + " element(s)");
                arm.isTuple = true;
                push_scope();
                for (size_t i = 0; i < pat.binders.size(); i++) {
                    uint32_t s = new_slot(pat.binders[i], st.args[i], pat.binderPos[i]);
                    bind(pat.binders[i], s);
                    arm.slots.push_back(s);
                }
                arm.body = check(bodyExpr, ctx);
                pop_scope();
                return arm;
            }
            if (st.kind != TypeK::Adt)
                bail(diag::TypeMismatch, pat.pos,
                     "cannot match on " + type_to_string(st));
            const BTypeDecl* td = type_decl_of(st);
            std::string cname = pat.name;
            int ci = -1;
            for (size_t i = 0; i < td->ctors.size(); i++)
                if (td->ctors[i].name == cname) ci = int(i);
            if (ci < 0)
                bail(diag::TypeMismatch, pat.pos,
                     "'" + cname + "' is not a constructor of " + td->name);
            if (pat.k == Pattern::K::Binder && !td->ctors[ci].fields.empty())
                bail(diag::TypeMismatch, pat.pos,
                     "constructor '" + cname + "' has fields");
            if (pat.binders.size() != td->ctors[ci].fields.size())
                bail(diag::TypeMismatch, pat.pos,
                     "constructor '" + cname + "' has " +
                         std::to_string(td->ctors[ci].fields.size()) + " field(s)");
            arm.ctorIndex = uint32_t(ci);
            push_scope();
            for (size_t i = 0; i < pat.binders.size(); i++) {
                SemType ft = substitute(absolutize(td->ctors[ci].fields[i],
                                                   resolve_owner(st.module, Digest{})),
                                        st.args);
                uint32_t s = new_slot(pat.binders[i], ft, pat.binderPos[i]);
                bind(pat.binders[i], s);
                arm.slots.push_back(s);
            }
            arm.body = check(bodyExpr, ctx);
            pop_scope();
            return arm;
        };

        if (fromLet) {
            t->arms.push_back(arm_of(e.pat, *e.kids[1]));
        } else {
            for (const auto& a : e.arms) t->arms.push_back(arm_of(a.pat, *a.body));
        }

        if (st.kind == TypeK::Adt) {
            const BTypeDecl* td = type_decl_of(st);
            std::vector<bool> seen(td->ctors.size(), false);
            for (const auto& a : t->arms) {
                if (seen[a.ctorIndex])
                    bail(diag::TypeMismatch, e.pos,
                         "duplicate arm for constructor '" +
                             td->ctors[a.ctorIndex].name + "'");
                seen[a.ctorIndex] = true;
            }
            for (size_t i = 0; i < seen.size(); i++)
                if (!seen[i])
                    bail(diag::MatchNonExh, e.pos,
                         "missing arm for constructor '" + td->ctors[i].name + "'");
        }

        SemType ty = t->arms[0].body->type;
        for (size_t i = 1; i < t->arms.size(); i++)
            ty = join_types(ty, t->arms[i].body->type, t->arms[i].body->pos);
        t->type = ty;
        return t;
    }

    const BTypeDecl* type_decl_of(const SemType& st) const {
        if (st.module.is_zero()) return &tm_->types[st.index];
        const auto* m = reg_.module_at(st.module);
        if (!m || st.index >= m->types.size())
            bail(diag::TypeMismatch, Pos{}, "dangling type reference");
        return &m->types[st.index];
    }

    TExprPtr check_modify(const Expr& e, Ctx ctx) {
        auto t = leaf(TK::Modify, e);
        t->kids.push_back(check(*e.kids[0], Ctx{}));
        const SemType& refType = t->kids[0]->type;
        if (refType.kind != TypeK::Ref)
            bail(diag::TypeMismatch, t->kids[0]->pos,
                 "modify needs a reference, got " + type_to_string(refType));
        if (!refType.caps.has(BuiltinCap::Modify))
            bail(diag::TypeMismatch, t->kids[0]->pos,
                 "reference lacks the Modify capability");
        SemType cell = refType.args[0];

        // The transition pattern names the cell value as a whole; a
        // constructor form just asserts the expected shape.
        if (e.pat.k == Pattern::K::Ctor) {
            if (cell.kind != TypeK::Adt)
                bail(diag::TypeMismatch, e.pat.pos,
                     "cell holds " + type_to_string(cell) + ", not a constructor value");
            const BTypeDecl* td = type_decl_of(cell);
            bool found = false;
            for (const auto& c : td->ctors) found |= c.name == e.pat.name;
            if (!found)
                bail(diag::TypeMismatch, e.pat.pos,
                     "'" + e.pat.name + "' is not a constructor of " + td->name);
            if (e.pat.binders.size() != 1)
                bail(diag::TypeMismatch, e.pat.pos,
                     "the transition binds the whole cell value to one name");
        }
        std::string binder =
            e.pat.k == Pattern::K::Ctor ? e.pat.binders[0] : e.pat.name;
        Pos bpos = e.pat.k == Pattern::K::Ctor ? e.pat.binderPos[0] : e.pat.pos;
        uint32_t s = new_slot(binder, cell, bpos);
        t->slot = s;
        push_scope();
        bind(binder, s);
        Ctx inner;
        inner.transitionTail = true;
        inner.cellType = &cell;
        t->kids.push_back(check(*e.kids[1], inner));
        pop_scope();

        auto ar = tails_and_return(*t->kids[1]);
        if (!ar)
            bail(diag::TypeMismatch, e.pos,
                 "all transition branches must agree on '& return'");
        if (*ar) {
            t->type = t->kids[1]->type;
        } else {
            const auto& wt = t->kids[1]->type;
            if (!same_base(wt, cell) || !wt.caps.covers(cell.caps))
                bail(diag::TypeMismatch, t->kids[1]->pos,
                     "cell takes " + type_to_string(cell) + ", got " + type_to_string(wt));
            t->type = make_prim(TypeK::Unit);
        }
        return t;
    }

    TExprPtr check_try(const Expr& e, Ctx ctx) {
        auto t = leaf(TK::Try, e);
        auto call = check(*e.kids[0], Ctx{});
        if (call->k != TK::Call)
            bail(diag::TypeMismatch, e.pos, "try guards a function call");
        Callee callee = callee_of(*call);
        t->kids.push_back(std::move(call));

        SemType ty = t->kids[0]->type;
        std::vector<SemType> paramTypes;
        for (const auto& p : callee.params)
            paramTypes.push_back(substitute(p, t->kids[0]->typeArgs));
        std::set<std::string> handled;
        for (const auto& a : e.arms) {
            TArm arm;
            bool known = false;
            for (const auto& r : callee.risks)
                if (r.display() == a.pat.name) {
                    arm.risk = r;
                    known = true;
                }
            if (!known)
                bail(diag::TypeMismatch, a.pat.pos,
                     "'" + callee.name + "' does not declare risk '" + a.pat.name + "'");
            if (!handled.insert(a.pat.name).second)
                bail(diag::TypeMismatch, a.pat.pos,
                     "duplicate handler for '" + a.pat.name + "'");
            if (a.pat.binders.size() != paramTypes.size())
                bail(diag::TypeMismatch, a.pat.pos,
                     "handler binds the original " + std::to_string(paramTypes.size()) +
                         " argument(s)");
            push_scope();
            for (size_t i = 0; i < a.pat.binders.size(); i++) {
                uint32_t s = new_slot(a.pat.binders[i], paramTypes[i], a.pat.binderPos[i]);
                bind(a.pat.binders[i], s);
                arm.slots.push_back(s);
            }
            arm.body = check(*a.body, ctx);
            pop_scope();
            ty = join_types(ty, arm.body->type, arm.body->pos);
            t->arms.push_back(std::move(arm));
        }
        t->type = ty;
        return t;
    }

    Callee callee_of(const TExpr& call) const {
        if (call.module.is_zero()) return own_callee(call.index);
        for (const auto& ie : env_.imports)
            if (ie.addr == call.module) return import_callee(ie, call.index);
        bail(diag::TypeMismatch, call.pos, "dangling call target");
    }
};

}  // namespace

SemaResult<TypedModule> check_types(const ResolvedModule& rm,
                                    const DeployedRegistry& registry) {
    SemaResult<TypedModule> out;
    ModuleEnv env = build_env(rm.ast, rm.importNames, rm.imports, registry, out.diags);
    if (!out.diags.empty()) return out;
    try {
        Checker c(rm, env, registry);
        out.value = c.run();
    } catch (const SemaErr& e) {
        out.diags.push_back(e.d);
    }
    return out;
}

}  // namespace mandala
