#include "mandala/printer.hpp"

#include <sstream>

namespace mandala {

namespace {

void print_atype(std::ostringstream& os, const AType& t) {
    for (const auto& c : t.caps) os << c << ' ';
    if (t.is_tuple) {
        os << '(';
        for (size_t i = 0; i < t.args.size(); i++) {
            if (i) os << ", ";
            print_atype(os, t.args[i]);
        }
        os << ')';
        return;
    }
    os << t.name;
    if (!t.args.empty()) {
        os << '[';
        for (size_t i = 0; i < t.args.size(); i++) {
            if (i) os << ", ";
            print_atype(os, t.args[i]);
        }
        os << ']';
    }
}

void print_pattern(std::ostringstream& os, const Pattern& p) {
    switch (p.k) {
        case Pattern::K::Binder: os << p.name; break;
        case Pattern::K::Tuple: {
            os << '(';
            for (size_t i = 0; i < p.binders.size(); i++) {
                if (i) os << ", ";
                os << p.binders[i];
            }
            os << ')';
            break;
        }
        case Pattern::K::Ctor: {
            os << p.name << '(';
            for (size_t i = 0; i < p.binders.size(); i++) {
                if (i) os << ", ";
                os << p.binders[i];
            }
            os << ')';
            break;
        }
    }
}

void print_expr(std::ostringstream& os, const Expr& e);

bool is_atomic(const Expr& e) {
    switch (e.k) {
        case ExK::LitU:
        case ExK::LitI:
        case ExK::Unit:
        case ExK::Path:
        case ExK::Call:
        case ExK::Tuple:
        case ExK::Attach:
        case ExK::Detach:
            return true;
        default:
            return false;
    }
}

void print_operand(std::ostringstream& os, const Expr& e) {
    if (is_atomic(e)) {
        print_expr(os, e);
    } else {
        os << '(';
        print_expr(os, e);
        os << ')';
    }
}

void print_expr(std::ostringstream& os, const Expr& e) {
    switch (e.k) {
        case ExK::LitU: os << e.litu; break;
        case ExK::LitI: os << e.liti; break;
        case ExK::Unit: os << "()"; break;
        case ExK::Path: {
            for (size_t i = 0; i < e.path.size(); i++) {
                if (i) os << '.';
                os << e.path[i];
            }
            break;
        }
        case ExK::Call: {
            for (size_t i = 0; i < e.path.size(); i++) {
                if (i) os << '.';
                os << e.path[i];
            }
            if (!e.typeArgs.empty()) {
                os << '[';
                for (size_t i = 0; i < e.typeArgs.size(); i++) {
                    if (i) os << ", ";
                    print_atype(os, e.typeArgs[i]);
                }
                os << ']';
            }
            os << '(';
            for (size_t i = 0; i < e.kids.size(); i++) {
                if (i) os << ", ";
                print_expr(os, *e.kids[i]);
            }
            os << ')';
            break;
        }
        case ExK::Tuple: {
            os << '(';
            for (size_t i = 0; i < e.kids.size(); i++) {
                if (i) os << ", ";
                print_expr(os, *e.kids[i]);
            }
            os << ')';
            break;
        }
        case ExK::Binary: {
            os << '(';
            print_expr(os, *e.kids[0]);
            os << ' ' << e.op << ' ';
            print_expr(os, *e.kids[1]);
            os << ')';
            break;
        }
        case ExK::Let: {
            os << "let ";
            print_pattern(os, e.pat);
            os << " = ";
            print_expr(os, *e.kids[0]);
            os << " in ";
            print_expr(os, *e.kids[1]);
            break;
        }
        case ExK::Case: {
            os << "case ";
            print_expr(os, *e.kids[0]);
            os << " of { ";
            for (size_t i = 0; i < e.arms.size(); i++) {
                if (i) os << ", ";
                print_pattern(os, e.arms[i].pat);
                os << " => ";
                print_expr(os, *e.arms[i].body);
            }
            os << " }";
            break;
        }
        case ExK::Modify: {
            os << "modify ";
            print_operand(os, *e.kids[0]);
            os << " with ";
            print_pattern(os, e.pat);
            os << " => ";
            print_expr(os, *e.kids[1]);
            break;
        }
        case ExK::AndReturn: {
            print_operand(os, *e.kids[0]);
            os << " & return ";
            print_expr(os, *e.kids[1]);
            break;
        }
        case ExK::Attach:
        case ExK::Detach: {
            print_operand(os, *e.kids[0]);
            os << (e.k == ExK::Attach ? ".attach[" : ".detach[") << e.bindName << ']';
            break;
        }
        case ExK::Cycle: {
            os << "cycle " << e.cycleN << " from ";
            print_operand(os, *e.kids[0]);
            os << " as " << e.bindName << " => ";
            print_expr(os, *e.kids[1]);
            break;
        }
        case ExK::Try: {
            os << "try ";
            print_expr(os, *e.kids[0]);
            os << " catch { ";
            for (size_t i = 0; i < e.arms.size(); i++) {
                if (i) os << ", ";
                print_pattern(os, e.arms[i].pat);
                os << " => ";
                print_expr(os, *e.arms[i].body);
            }
            os << " }";
            break;
        }
    }
}

void print_param(std::ostringstream& os, const ParamDecl& p) {
    if (!p.destructure) {
        os << p.name << ':';
        print_atype(os, p.type);
        return;
    }
    for (const auto& c : p.type.caps) os << c << ' ';
    os << p.type.name;
    if (!p.type.args.empty()) {
        os << '[';
        for (size_t i = 0; i < p.type.args.size(); i++) {
            if (i) os << ", ";
            print_atype(os, p.type.args[i]);
        }
        os << ']';
    }
    os << '(';
    for (size_t i = 0; i < p.binders.size(); i++) {
        if (i) os << ", ";
        os << p.binders[i];
    }
    os << ')';
}

}  // namespace

std::string pretty_print(const AstModule& m) {
    std::ostringstream os;
    for (const auto& imp : m.imports) os << "import " << imp << ".*\n";
    os << "module " << m.name << " {\n";
    for (const auto& d : m.decls) {
        if (const auto* t = std::get_if<TypeDecl>(&d)) {
            os << "  ";
            if (t->open) os << "open ";
            if (t->publicKw) os << "public ";
            os << "type ";
            for (const auto& c : t->caps) os << c << ' ';
            os << t->name;
            if (!t->typeParams.empty()) {
                os << '[';
                for (size_t i = 0; i < t->typeParams.size(); i++) {
                    if (i) os << ", ";
                    os << t->typeParams[i];
                }
                os << ']';
            }
            if (t->shorthand) {
                os << '(';
                for (size_t i = 0; i < t->ctors[0].fields.size(); i++) {
                    if (i) os << ", ";
                    print_atype(os, t->ctors[0].fields[i]);
                }
                os << ')';
            } else if (!t->ctors.empty()) {
                os << " { ";
                for (size_t i = 0; i < t->ctors.size(); i++) {
                    if (i) os << ", ";
                    os << t->ctors[i].name << '(';
                    for (size_t j = 0; j < t->ctors[i].fields.size(); j++) {
                        if (j) os << ", ";
                        print_atype(os, t->ctors[i].fields[j]);
                    }
                    os << ')';
                }
                os << " }";
            }
            os << '\n';
        } else if (const auto* c = std::get_if<CapabilityDecl>(&d)) {
            os << "  ";
            if (c->open) os << "open ";
            os << "capability " << c->name << '\n';
        } else if (const auto* f = std::get_if<FunDecl>(&d)) {
            for (const auto& r : f->risks) os << "  risk " << r << '\n';
            os << "  ";
            if (f->visExplicit) {
                if (f->vis == Visibility::Protected)
                    os << "protected[" << f->protectedParam << "] ";
                else
                    os << visibility_name(f->vis) << ' ';
            }
            if (f->effect) os << effect_name(*f->effect) << ' ';
            if (!f->defaultFor.empty()) os << "default[" << f->defaultFor << "] ";
            os << f->name;
            if (!f->typeParams.empty()) {
                os << '[';
                for (size_t i = 0; i < f->typeParams.size(); i++) {
                    if (i) os << ", ";
                    os << f->typeParams[i];
                }
                os << ']';
            }
            os << '(';
            for (size_t i = 0; i < f->params.size(); i++) {
                if (i) os << ", ";
                print_param(os, f->params[i]);
            }
            os << ") => ";
            print_expr(os, *f->body);
            os << '\n';
        } else if (const auto* v = std::get_if<ValDecl>(&d)) {
            os << "  public val " << v->name << " = ";
            print_expr(os, *v->init);
            os << '\n';
        } else if (const auto* in = std::get_if<InitDecl>(&d)) {
            for (const auto& r : in->risks) os << "  risk " << r << '\n';
            os << "  init(";
            print_param(os, in->param);
            os << ") => ";
            print_expr(os, *in->body);
            os << '\n';
        }
    }
    os << "}\n";
    return os.str();
}

namespace {

bool atype_eq(const AType& a, const AType& b) {
    if (a.caps != b.caps || a.name != b.name || a.is_tuple != b.is_tuple) return false;
    if (a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); i++)
        if (!atype_eq(a.args[i], b.args[i])) return false;
    return true;
}

bool pattern_eq(const Pattern& a, const Pattern& b) {
    return a.k == b.k && a.name == b.name && a.binders == b.binders;
}

bool expr_eq(const Expr& a, const Expr& b) {
    if (a.k != b.k || a.litu != b.litu || a.liti != b.liti || a.path != b.path ||
        a.op != b.op || a.cycleN != b.cycleN || a.bindName != b.bindName)
        return false;
    if (a.typeArgs.size() != b.typeArgs.size()) return false;
    for (size_t i = 0; i < a.typeArgs.size(); i++)
        if (!atype_eq(a.typeArgs[i], b.typeArgs[i])) return false;
    if (!pattern_eq(a.pat, b.pat)) return false;
    if (a.kids.size() != b.kids.size() || a.arms.size() != b.arms.size()) return false;
    for (size_t i = 0; i < a.kids.size(); i++)
        if (!expr_eq(*a.kids[i], *b.kids[i])) return false;
    for (size_t i = 0; i < a.arms.size(); i++) {
        if (!pattern_eq(a.arms[i].pat, b.arms[i].pat)) return false;
        if (!expr_eq(*a.arms[i].body, *b.arms[i].body)) return false;
    }
    return true;
}

bool param_eq(const ParamDecl& a, const ParamDecl& b) {
    return a.destructure == b.destructure && a.name == b.name &&
           atype_eq(a.type, b.type) && a.binders == b.binders;
}

bool decl_eq(const Decl& a, const Decl& b) {
    if (a.index() != b.index()) return false;
    if (const auto* ta = std::get_if<TypeDecl>(&a)) {
        const auto& tb = std::get<TypeDecl>(b);
        if (ta->open != tb.open || ta->publicKw != tb.publicKw || ta->caps != tb.caps ||
            ta->name != tb.name || ta->typeParams != tb.typeParams ||
            ta->shorthand != tb.shorthand || ta->ctors.size() != tb.ctors.size())
            return false;
        for (size_t i = 0; i < ta->ctors.size(); i++) {
            if (ta->ctors[i].name != tb.ctors[i].name) return false;
            if (ta->ctors[i].fields.size() != tb.ctors[i].fields.size()) return false;
            for (size_t j = 0; j < ta->ctors[i].fields.size(); j++)
                if (!atype_eq(ta->ctors[i].fields[j], tb.ctors[i].fields[j])) return false;
        }
        return true;
    }
    if (const auto* ca = std::get_if<CapabilityDecl>(&a)) {
        const auto& cb = std::get<CapabilityDecl>(b);
        return ca->open == cb.open && ca->name == cb.name;
    }
    if (const auto* fa = std::get_if<FunDecl>(&a)) {
        const auto& fb = std::get<FunDecl>(b);
        if (fa->risks != fb.risks || fa->vis != fb.vis ||
            fa->visExplicit != fb.visExplicit ||
            fa->protectedParam != fb.protectedParam || fa->effect != fb.effect ||
            fa->defaultFor != fb.defaultFor || fa->name != fb.name ||
            fa->typeParams != fb.typeParams || fa->params.size() != fb.params.size())
            return false;
        for (size_t i = 0; i < fa->params.size(); i++)
            if (!param_eq(fa->params[i], fb.params[i])) return false;
        return expr_eq(*fa->body, *fb.body);
    }
    if (const auto* va = std::get_if<ValDecl>(&a)) {
        const auto& vb = std::get<ValDecl>(b);
        return va->name == vb.name && expr_eq(*va->init, *vb.init);
    }
    const auto& ia = std::get<InitDecl>(a);
    const auto& ib = std::get<InitDecl>(b);
    return ia.risks == ib.risks && param_eq(ia.param, ib.param) &&
           expr_eq(*ia.body, *ib.body);
}

}  // namespace

bool ast_equal(const AstModule& a, const AstModule& b) {
    if (a.name != b.name || a.imports != b.imports) return false;
    if (a.decls.size() != b.decls.size()) return false;
    for (size_t i = 0; i < a.decls.size(); i++)
        if (!decl_eq(a.decls[i], b.decls[i])) return false;
    return true;
}

}  // namespace mandala
