#include <algorithm>
#include <functional>
#include <set>

#include "sema_internal.hpp"

namespace mandala {

using namespace detail;

namespace {

struct RiskLess {
    bool operator()(const RiskRef& a, const RiskRef& b) const { return a < b; }
};
using RiskSet = std::set<RiskRef, RiskLess>;

struct CheckEnv {
    const TypedModule& tm;
    const DeployedRegistry& reg;

    const BFunction* import_fn(const Digest& mod, uint32_t idx) const {
        const auto* m = reg.module_at(mod);
        if (!m || idx >= m->functions.size())
            bail(diag::TypeMismatch, Pos{}, "dangling call target");
        return &m->functions[idx];
    }

    Effect callee_effect(const TExpr& call) const {
        if (call.module.is_zero()) return tm.functions[call.index].effect;
        return import_fn(call.module, call.index)->effect;
    }

    std::vector<RiskRef> callee_risks(const TExpr& call) const {
        if (call.module.is_zero()) return tm.functions[call.index].declaredRisks;
        std::vector<RiskRef> out;
        for (const auto& r : import_fn(call.module, call.index)->risks)
            out.push_back(absolutize(r, call.module));
        return out;
    }

    bool has_default(const SemType& cell) const {
        if (cell.kind != TypeK::Adt) return false;
        if (cell.module.is_zero()) {
            for (const auto& f : tm.functions)
                if (f.defaultFor == cell.index) return true;
            return false;
        }
        return reg.default_for(cell.module, cell.index).has_value();
    }
};

// ---- capability and visibility rules ----

void check_attach(const CheckEnv& env, const TExpr& e) {
    const SemType& target = e.kids[0]->type;
    bool targetOwn = target.kind == TypeK::Adt && target.module.is_zero();
    if (e.cap.builtin) {
        // builtin capabilities behave like open ones: the module defining
        // the target type may attach them
        if (!targetOwn)
            bail(diag::CapAttach, e.pos,
                 "cannot attach '" + std::string(builtin_cap_name(e.cap.b)) +
                     "' outside the module defining " + type_to_string(target));
        return;
    }
    if (e.cap.module.is_zero()) return;  // we define the capability
    const auto* m = env.reg.module_at(e.cap.module);
    bool open = m && e.cap.index < m->caps.size() && m->caps[e.cap.index].open;
    if (open && targetOwn) return;
    bail(diag::CapAttach, e.pos,
         "capability '" + e.cap.name + "' can only be attached by its defining module" +
             (open ? " or by the module defining the target type" : ""));
}

void check_call_visibility(const CheckEnv& env, const TExpr& e) {
    Visibility vis;
    uint32_t protParam = 0;
    std::string name;
    if (e.module.is_zero()) {
        const auto& f = env.tm.functions[e.index];
        vis = f.vis;
        protParam = f.protectedParam;
        name = f.name;
        if (vis != Visibility::Protected) return;  // own private/public always fine
    } else {
        const auto* f = env.import_fn(e.module, e.index);
        vis = f->vis;
        protParam = f->protectedParam;
        name = f->name;
        if (vis == Visibility::Private)
            bail(diag::VisPrivate, e.pos, "'" + name + "' is private to its module");
        if (vis != Visibility::Protected) return;
    }
    const SemType& bound = e.typeArgs.at(protParam);
    if (bound.kind != TypeK::Adt || !bound.module.is_zero())
        bail(diag::VisProtected, e.pos,
             "'" + name + "' is protected: the caller's module must define " +
                 type_to_string(bound));
}

void walk_caps(const CheckEnv& env, const TExpr& e) {
    if (e.k == TK::Attach) check_attach(env, e);
    if (e.k == TK::Call) check_call_visibility(env, e);
    for (const auto& k : e.kids) walk_caps(env, *k);
    for (const auto& a : e.arms) walk_caps(env, *a.body);
}

// ---- effects and risks ----

struct EffErr {
    Effect e;
    Pos pos;
    std::string what;
};

Effect walk_effect(const CheckEnv& env, const TExpr& e, EffErr& worst);

void require_pure_transition(const CheckEnv& env, const TExpr& e) {
    Effect own = Effect::Pure;
    std::string what;
    switch (e.k) {
        case TK::Modify:
            bail(diag::EffModifyImpure, e.pos,
                 "a modify transition must be pure; it contains another modify");
        case TK::BuiltinCall:
            if (e.builtin != BuiltinFn::Derive)
                bail(diag::EffModifyImpure, e.pos,
                     "a modify transition must be pure; it creates fresh state");
            break;
        case TK::Call: {
            Effect ce = env.callee_effect(e);
            if (ce != Effect::Pure)
                bail(diag::EffModifyImpure, e.pos,
                     "a modify transition must be pure; it calls a " +
                         std::string(effect_name(ce)) + " function");
            break;
        }
        default:
            break;
    }
    (void)own;
    (void)what;
    for (const auto& k : e.kids) require_pure_transition(env, *k);
    for (const auto& a : e.arms) require_pure_transition(env, *a.body);
}

Effect walk_effect(const CheckEnv& env, const TExpr& e, EffErr& worst) {
    Effect eff = Effect::Pure;
    std::string what;
    switch (e.k) {
        case TK::Modify:
            eff = Effect::Active;
            what = "a cell modification";
            break;
        case TK::BuiltinCall:
            if (e.builtin != BuiltinFn::Derive) {
                eff = Effect::Init;
                what = e.builtin == BuiltinFn::NewId ? "ID.new" : "Context.new";
            }
            break;
        case TK::Call: {
            eff = env.callee_effect(e);
            what = "a call to a " + std::string(effect_name(eff)) + " function";
            break;
        }
        default:
            break;
    }
    if (eff > worst.e) worst = {eff, e.pos, what};
    if (e.k == TK::Modify) {
        // the ref expression is ordinary code; the transition must be pure
        EffErr sub = worst;
        walk_effect(env, *e.kids[0], worst);
        require_pure_transition(env, *e.kids[1]);
        (void)sub;
        return worst.e;
    }
    for (const auto& k : e.kids) walk_effect(env, *k, worst);
    for (const auto& a : e.arms) walk_effect(env, *a.body, worst);
    return worst.e;
}

void collect_risks(const CheckEnv& env, const TExpr& e, RiskSet& out) {
    switch (e.k) {
        case TK::Binary: {
            bool isInt = e.kids[0]->type.kind == TypeK::Int;
            if (e.op == '+' || isInt)
                out.insert(RiskRef{true, BuiltinRisk::NumericOverflow, {}, "NumericOverflow"});
            if (e.op == '-' || isInt)
                out.insert(
                    RiskRef{true, BuiltinRisk::NumericUnderflow, {}, "NumericUnderflow"});
            break;
        }
        case TK::Call: {
            for (const auto& r : env.callee_risks(e)) out.insert(r);
            break;
        }
        case TK::Modify: {
            if (!env.has_default(e.kids[0]->type.args[0]))
                out.insert(RiskRef{true, BuiltinRisk::EmptyCell, {}, "EmptyCell"});
            break;
        }
        case TK::Try: {
            RiskSet inner;
            collect_risks(env, *e.kids[0], inner);
            for (const auto& a : e.arms) {
                inner.erase(a.risk);
                collect_risks(env, *a.body, inner);
            }
            out.insert(inner.begin(), inner.end());
            return;
        }
        default:
            break;
    }
    for (const auto& k : e.kids) collect_risks(env, *k, out);
    for (const auto& a : e.arms) collect_risks(env, *a.body, out);
}

void check_declared_risks(const CheckEnv& env, const TExpr& body,
                          const std::vector<RiskRef>& declared, Pos pos,
                          const std::string& what) {
    RiskSet raised;
    collect_risks(env, body, raised);
    for (const auto& r : raised) {
        bool ok = false;
        for (const auto& d : declared) ok |= d == r;
        if (!ok)
            bail(diag::RiskUndeclared, pos,
                 what + " may raise '" + r.display() + "' but does not declare it");
    }
}

}  // namespace

Diagnostics check_capabilities(const TypedModule& tm, const DeployedRegistry& registry) {
    Diagnostics diags;
    CheckEnv env{tm, registry};
    try {
        for (const auto& td : tm.types) {
            for (auto c : {BuiltinCap::Copy, BuiltinCap::Drop, BuiltinCap::Persist}) {
                if (!td.declaredCaps.has(c)) continue;
                for (const auto& ctor : td.ctors)
                    for (const auto& f : ctor.fields)
                        if (!f.caps.has(c))
                            bail(diag::CapStruct, Pos{},
                                 "type '" + td.name + "' declares " + builtin_cap_name(c) +
                                     " but constructor '" + ctor.name +
                                     "' has a field of type " + type_to_string(f) +
                                     " without it");
            }
            if (td.declaredCaps.has(BuiltinCap::Modify) ||
                td.declaredCaps.has(BuiltinCap::Master))
                bail(diag::CapStruct, Pos{},
                     "type '" + td.name + "' cannot declare Modify or Master");
        }
        for (const auto& f : tm.functions) walk_caps(env, *f.body);
        for (const auto& v : tm.vals) walk_caps(env, *v.init);
        if (tm.init) walk_caps(env, *tm.init->body);
    } catch (const SemaErr& e) {
        diags.push_back(e.d);
    }
    return diags;
}

Diagnostics check_effects(const TypedModule& tm, const DeployedRegistry& registry) {
    Diagnostics diags;
    CheckEnv env{tm, registry};
    try {
        for (const auto& f : tm.functions) {
            EffErr worst{Effect::Pure, f.pos, ""};
            walk_effect(env, *f.body, worst);
            if (worst.e > f.effect)
                bail(diag::EffEscalate, worst.pos,
                     "'" + f.name + "' is " + effect_name(f.effect) + " but contains " +
                         worst.what);
            if (f.defaultFor != UINT32_MAX && f.effect != Effect::Pure)
                bail(diag::EffEscalate, f.pos, "default providers must be pure");
            check_declared_risks(env, *f.body, f.declaredRisks, f.pos,
                                 "'" + f.name + "'");
        }
        for (const auto& v : tm.vals) {
            EffErr worst{Effect::Pure, v.pos, ""};
            walk_effect(env, *v.init, worst);
            if (worst.e > Effect::Init)
                bail(diag::ValEffect, worst.pos,
                     "val '" + v.name + "' initializer must be pure or init; it contains " +
                         worst.what);
            if (!v.type.caps.has(BuiltinCap::Copy) || !v.type.caps.has(BuiltinCap::Persist))
                bail(diag::ValCaps, v.pos,
                     "val '" + v.name + "' stores " + type_to_string(v.type) +
                         " which lacks Copy and Persist");
            check_declared_risks(env, *v.init, {}, v.pos, "val '" + v.name + "'");
        }
        if (tm.init) {
            EffErr worst{Effect::Pure, tm.init->pos, ""};
            walk_effect(env, *tm.init->body, worst);
            check_declared_risks(env, *tm.init->body, tm.init->risks, tm.init->pos,
                                 "init");
        }
    } catch (const SemaErr& e) {
        diags.push_back(e.d);
    }
    return diags;
}

SemaResult<TypedModule> elaborate(AstModule ast, const DeployedRegistry& registry) {
    SemaResult<TypedModule> out;
    auto rr = resolve(std::move(ast), registry);
    if (!rr.ok()) {
        out.diags = std::move(rr.diags);
        return out;
    }
    auto tr = check_types(*rr.value, registry);
    if (!tr.ok()) {
        out.diags = std::move(tr.diags);
        return out;
    }
    TypedModule tm = std::move(*tr.value);
    out.diags = check_substructural(tm);
    if (!out.diags.empty()) return out;
    out.diags = check_capabilities(tm, registry);
    if (!out.diags.empty()) return out;
    out.diags = check_effects(tm, registry);
    if (!out.diags.empty()) return out;
    out.value = std::move(tm);
    return out;
}

}  // namespace mandala
