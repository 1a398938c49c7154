#include "mandala/sema.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sema_internal.hpp"

namespace mandala {

using namespace detail;

namespace {

class Resolver {
public:
    Resolver(const AstModule& ast, const ModuleEnv& env) : ast_(ast), env_(env) {}

    void run() {
        for (size_t i = 0; i < ast_.decls.size(); i++) {
            order_ = int(i);
            const auto& d = ast_.decls[i];
            if (const auto* t = std::get_if<TypeDecl>(&d)) {
                typeParams_.clear();
                for (const auto& p : t->typeParams) typeParams_.insert(p);
                for (const auto& cn : t->caps) check_cap_name(cn, t->pos);
                for (const auto& c : t->ctors)
                    for (const auto& f : c.fields) check_atype(f);
            } else if (const auto* f = std::get_if<FunDecl>(&d)) {
                typeParams_.clear();
                for (const auto& p : f->typeParams) typeParams_.insert(p);
                if (f->vis == Visibility::Protected) {
                    bool found = false;
                    for (const auto& p : f->typeParams) found |= p == f->protectedParam;
                    if (!found)
                        bail(diag::NameUnknown, f->pos,
                             "protected type parameter '" + f->protectedParam +
                                 "' is not a type parameter of '" + f->name + "'");
                }
                if (!f->defaultFor.empty()) check_type_name(f->defaultFor, f->pos);
                scopes_.clear();
                push_scope();
                for (const auto& p : f->params) bind_param(p);
                check_expr(*f->body);
                pop_scope();
            } else if (const auto* v = std::get_if<ValDecl>(&d)) {
                typeParams_.clear();
                scopes_.clear();
                push_scope();
                check_expr(*v->init);
                pop_scope();
            } else if (const auto* in = std::get_if<InitDecl>(&d)) {
                typeParams_.clear();
                scopes_.clear();
                push_scope();
                bind_param(in->param);
                check_expr(*in->body);
                pop_scope();
            }
        }
    }

private:
    const AstModule& ast_;
    const ModuleEnv& env_;
    int order_ = 0;
    std::set<std::string> typeParams_;
    std::vector<std::vector<std::string>> scopes_;

    void push_scope() { scopes_.emplace_back(); }
    void pop_scope() { scopes_.pop_back(); }
    void bind(const std::string& n) { scopes_.back().push_back(n); }
    bool is_local(const std::string& n) const {
        for (const auto& s : scopes_)
            for (const auto& b : s)
                if (b == n) return true;
        return false;
    }

    void bind_param(const ParamDecl& p) {
        if (p.destructure) {
            check_destructure_head(p);
            for (const auto& b : p.binders) bind(b);
        } else {
            check_atype(p.type);
            bind(p.name);
        }
    }

    void check_destructure_head(const ParamDecl& p) {
        for (const auto& cn : p.type.caps) check_cap_name(cn, p.pos);
        check_value_name(p.type.name, p.pos, /*callable=*/true);
        for (const auto& a : p.type.args) check_atype(a);
    }

    void check_type_name(const std::string& n, Pos pos) {
        if (typeParams_.count(n) || is_builtin_type_name(n)) return;
        if (auto it = env_.own.types.find(n); it != env_.own.types.end()) {
            if (it->second.order >= order_)
                bail(diag::RecForward, pos,
                     "'" + n + "' refers to a later declaration in this module");
            return;
        }
        int hits = 0;
        for (const auto& ie : env_.imports)
            if (ie.type_idx(n) >= 0) hits++;
        if (hits == 1) return;
        bail(diag::NameUnknown, pos,
             hits ? "ambiguous type name '" + n + "'" : "unknown type '" + n + "'");
    }

    void check_cap_name(const std::string& n, Pos pos) {
        if (builtin_cap_by_name(n)) return;
        if (auto it = env_.own.caps.find(n); it != env_.own.caps.end()) {
            if (it->second.order >= order_)
                bail(diag::RecForward, pos,
                     "capability '" + n + "' is declared later in this module");
            return;
        }
        int hits = 0;
        for (const auto& ie : env_.imports)
            if (ie.cap_idx(n) >= 0) hits++;
        if (hits == 1) return;
        bail(diag::NameUnknown, pos,
             hits ? "ambiguous capability '" + n + "'" : "unknown capability '" + n + "'");
    }

    void check_atype(const AType& t) {
        for (const auto& cn : t.caps) check_cap_name(cn, t.pos);
        if (!t.is_tuple) check_type_name(t.name, t.pos);
        for (const auto& a : t.args) check_atype(a);
    }

    // callable: constructors and functions; otherwise vals also count
    void check_value_name(const std::string& n, Pos pos, bool callable) {
        if (is_local(n)) return;
        auto own_hit = [&](const std::map<std::string, OwnDecls::Entry>& m) -> bool {
            auto it = m.find(n);
            if (it == m.end()) return false;
            if (it->second.order >= order_)
                bail(diag::RecForward, pos,
                     "'" + n + "' refers to a later declaration in this module");
            return true;
        };
        if (own_hit(env_.own.fns) || own_hit(env_.own.ctors)) return;
        if (!callable && own_hit(env_.own.vals)) return;
        if (callable && own_hit(env_.own.vals)) return;  // "not callable" caught later
        if (n == "derive") return;
        int hits = 0;
        for (const auto& ie : env_.imports) {
            if (ie.fn_idx(n) >= 0 || ie.ctor(n) || ie.val_idx(n) >= 0) hits++;
        }
        if (hits == 1) return;
        bail(diag::NameUnknown, pos,
             hits ? "ambiguous name '" + n + "'" : "unknown name '" + n + "'");
    }

    void check_path(const Expr& e, bool callable) {
        if (e.path.size() == 1) {
            check_value_name(e.path[0], e.pos, callable);
            return;
        }
        if (e.path.size() == 2) {
            const auto& head = e.path[0];
            const auto& member = e.path[1];
            if ((head == "Context" || head == "ID") && member == "new") return;
            if (const auto* ie = env_.import_by_name(head)) {
                if (ie->fn_idx(member) >= 0 || ie->ctor(member) || ie->val_idx(member) >= 0)
                    return;
                bail(diag::NameUnknown, e.pos,
                     "module '" + head + "' has no member '" + member + "'");
            }
            bail(diag::NameUnknown, e.pos, "unknown module '" + head + "'");
        }
        bail(diag::NameUnknown, e.pos, "unsupported reference path");
    }

    void check_expr(const Expr& e) {
        switch (e.k) {
            case ExK::LitU:
            case ExK::LitI:
            case ExK::Unit:
                return;
            case ExK::Path:
                check_path(e, false);
                return;
            case ExK::Call:
                check_path(e, true);
                for (const auto& t : e.typeArgs) check_atype(t);
                for (const auto& k : e.kids) check_expr(*k);
                return;
            case ExK::Tuple:
            case ExK::Binary:
            case ExK::AndReturn:
                for (const auto& k : e.kids) check_expr(*k);
                return;
            case ExK::Attach:
            case ExK::Detach:
                check_expr(*e.kids[0]);
                check_cap_name(e.bindName, e.bindPos);
                return;
            case ExK::Let: {
                check_expr(*e.kids[0]);
                push_scope();
                if (e.pat.k == Pattern::K::Binder) bind(e.pat.name);
                else
                    for (const auto& b : e.pat.binders) bind(b);
                check_expr(*e.kids[1]);
                pop_scope();
                return;
            }
            case ExK::Case: {
                check_expr(*e.kids[0]);
                for (const auto& a : e.arms) {
                    push_scope();
                    for (const auto& b : a.pat.binders) bind(b);
                    if (a.pat.k == Pattern::K::Binder) bind(a.pat.name);
                    check_expr(*a.body);
                    pop_scope();
                }
                return;
            }
            case ExK::Modify: {
                check_expr(*e.kids[0]);
                push_scope();
                if (e.pat.k == Pattern::K::Binder) bind(e.pat.name);
                else
                    for (const auto& b : e.pat.binders) bind(b);
                check_expr(*e.kids[1]);
                pop_scope();
                return;
            }
            case ExK::Cycle: {
                check_expr(*e.kids[0]);
                push_scope();
                bind(e.bindName);
                check_expr(*e.kids[1]);
                pop_scope();
                return;
            }
            case ExK::Try: {
                check_expr(*e.kids[0]);
                for (const auto& a : e.arms) {
                    push_scope();
                    for (const auto& b : a.pat.binders) bind(b);
                    check_expr(*a.body);
                    pop_scope();
                }
                return;
            }
        }
    }
};

}  // namespace

SemaResult<ResolvedModule> resolve(AstModule ast, const DeployedRegistry& registry) {
    SemaResult<ResolvedModule> out;
    ResolvedModule rm;
    for (size_t i = 0; i < ast.imports.size(); i++) {
        auto addr = registry.address_of(ast.imports[i]);
        if (!addr || !registry.module_at(*addr)) {
            out.diags.push_back({diag::ImportMissing, ast.importPos[i],
                                 "imported module '" + ast.imports[i] +
                                     "' is not deployed",
                                 {}});
            continue;
        }
        rm.importNames.push_back(ast.imports[i]);
        rm.imports.push_back(*addr);
    }
    if (!out.diags.empty()) return out;

    ModuleEnv env = build_env(ast, rm.importNames, rm.imports, registry, out.diags);
    if (!out.diags.empty()) return out;
    try {
        Resolver r(ast, env);
        r.run();
    } catch (const SemaErr& e) {
        out.diags.push_back(e.d);
        return out;
    }
    rm.ast = std::move(ast);
    out.value = std::move(rm);
    return out;
}

}  // namespace mandala
