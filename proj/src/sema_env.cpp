#include "sema_internal.hpp"

namespace mandala::detail {

OwnDecls index_own_decls(const AstModule& ast, Diagnostics& diags) {
    OwnDecls own;
    uint32_t nType = 0, nFn = 0, nVal = 0, nCap = 0;
    auto dup = [&](Pos pos, const std::string& n) {
        diags.push_back({diag::NameDup, pos, "duplicate declaration of '" + n + "'", {}});
    };
    for (size_t i = 0; i < ast.decls.size(); i++) {
        const auto& d = ast.decls[i];
        int order = int(i);
        if (const auto* t = std::get_if<TypeDecl>(&d)) {
            if (own.types.count(t->name)) dup(t->pos, t->name);
            own.types[t->name] = {order, nType};
            std::set<std::string> seen;
            for (size_t c = 0; c < t->ctors.size(); c++) {
                const auto& ctor = t->ctors[c];
                if (!seen.insert(ctor.name).second) {
                    dup(ctor.pos, ctor.name);
                    continue;
                }
                if (own.ctors.count(ctor.name) || own.fns.count(ctor.name) ||
                    own.vals.count(ctor.name))
                    dup(ctor.pos, ctor.name);
                own.ctors[ctor.name] = {order, nType, uint32_t(c)};
                own.ctorType[ctor.name] = nType;
            }
            nType++;
        } else if (const auto* c = std::get_if<CapabilityDecl>(&d)) {
            if (own.caps.count(c->name)) dup(c->pos, c->name);
            own.caps[c->name] = {order, nCap++};
        } else if (const auto* f = std::get_if<FunDecl>(&d)) {
            if (own.fns.count(f->name) || own.ctors.count(f->name) ||
                own.vals.count(f->name))
                dup(f->pos, f->name);
            own.fns[f->name] = {order, nFn++};
        } else if (const auto* v = std::get_if<ValDecl>(&d)) {
            if (own.vals.count(v->name) || own.fns.count(v->name) ||
                own.ctors.count(v->name))
                dup(v->pos, v->name);
            own.vals[v->name] = {order, nVal++};
        }
    }
    return own;
}

ModuleEnv build_env(const AstModule& ast, const std::vector<std::string>& importNames,
                    const std::vector<Digest>& imports, const DeployedRegistry& reg,
                    Diagnostics& diags) {
    ModuleEnv env;
    env.selfName = ast.name;
    for (size_t i = 0; i < imports.size(); i++) {
        ImportEnv ie;
        ie.name = importNames[i];
        ie.addr = imports[i];
        ie.mod = reg.module_at(imports[i]);
        env.imports.push_back(ie);
    }
    env.own = index_own_decls(ast, diags);
    return env;
}

bool same_base(const SemType& a, const SemType& b) {
    if (a.kind != b.kind || a.index != b.index) return false;
    if (a.kind == TypeK::Adt && a.module != b.module) return false;
    if (a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); i++)
        if (!a.args[i].equals(b.args[i])) return false;
    return true;
}

Effect node_effect(const TExpr& e, const DeployedRegistry& reg) {
    switch (e.k) {
        case TK::Modify:
            return Effect::Active;
        case TK::BuiltinCall:
            return e.builtin == BuiltinFn::Derive ? Effect::Pure : Effect::Init;
        case TK::Call: {
            if (e.module.is_zero()) return Effect::Pure;  // resolved by caller
            const auto* m = reg.module_at(e.module);
            return m ? m->functions[e.index].effect : Effect::Pure;
        }
        default:
            return Effect::Pure;
    }
}

}  // namespace mandala::detail
