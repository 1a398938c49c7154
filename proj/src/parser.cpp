#include "mandala/parser.hpp"

namespace mandala {

namespace {

struct PErr {
    Diagnostic d;
};

class Parser {
public:
    explicit Parser(const TokenStream& ts) : toks_(ts.tokens) {}

    AstModule parse_file() {
        AstModule m;
        while (at_kw("import")) {
            Pos p = cur().pos;
            next();
            std::string path = expect_ident("module name");
            if (at_punct(".")) {
                next();
                expect_punct("*");
            }
            m.imports.push_back(path);
            m.importPos.push_back(p);
        }
        m.pos = cur().pos;
        expect_kw("module");
        m.name = expect_ident("module name");
        expect_punct("{");
        while (!at_punct("}")) {
            if (at_end()) err("declaration or '}'");
            m.decls.push_back(parse_decl());
        }
        expect_punct("}");
        if (!at_end()) err("end of input");
        m.exprCount = exprId_;
        return m;
    }

private:
    const std::vector<Token>& toks_;
    size_t i_ = 0;
    int exprId_ = 0;

    const Token& cur() const { return toks_[i_]; }
    const Token& peek(size_t n = 1) const {
        size_t j = i_ + n;
        return j < toks_.size() ? toks_[j] : toks_.back();
    }
    void next() {
        if (i_ + 1 < toks_.size()) i_++;
    }
    bool at_end() const { return cur().kind == TokK::End; }
    bool at_kw(std::string_view k) const {
        return cur().kind == TokK::Keyword && cur().text == k;
    }
    bool at_punct(std::string_view p) const {
        return cur().kind == TokK::Punct && cur().text == p;
    }
    bool at_ident() const { return cur().kind == TokK::Ident; }

    [[noreturn]] void err(const std::string& expected) const {
        std::string found = at_end() ? "end of input" : "'" + cur().text + "'";
        throw PErr{Diagnostic{diag::Parse, cur().pos,
                              "expected " + expected + ", found " + found, {}}};
    }
    void expect_kw(std::string_view k) {
        if (!at_kw(k)) err("'" + std::string(k) + "'");
        next();
    }
    void expect_punct(std::string_view p) {
        if (!at_punct(p)) err("'" + std::string(p) + "'");
        next();
    }
    std::string expect_ident(const std::string& what) {
        if (!at_ident()) err(what);
        std::string s = cur().text;
        next();
        return s;
    }

    ExprPtr make(ExK k, Pos pos) {
        auto e = std::make_unique<Expr>();
        e->k = k;
        e->pos = pos;
        e->id = exprId_++;
        return e;
    }

    // --- declarations ---

    Decl parse_decl() {
        std::vector<std::string> risks;
        std::vector<Pos> riskPos;
        while (at_kw("risk")) {
            riskPos.push_back(cur().pos);
            next();
            risks.push_back(expect_ident("risk name"));
        }

        bool open = false, pub = false;
        Pos declPos = cur().pos;
        while (at_kw("open") || (at_kw("public") && (peek().kind == TokK::Keyword &&
                                                     (peek().text == "type")))) {
            if (at_kw("open")) open = true;
            else pub = true;
            next();
        }
        if (at_kw("type")) {
            if (!risks.empty()) err("function declaration after risk clause");
            return parse_type_decl(declPos, open, pub);
        }
        if (at_kw("capability")) {
            if (!risks.empty()) err("function declaration after risk clause");
            next();
            CapabilityDecl c;
            c.pos = declPos;
            c.open = open;
            c.name = expect_ident("capability name");
            return c;
        }
        if (open) err("'type' or 'capability' after 'open'");

        // init declaration: 'init' immediately followed by '('
        if (at_kw("init") && peek().kind == TokK::Punct && peek().text == "(") {
            InitDecl d;
            d.pos = cur().pos;
            d.risks = std::move(risks);
            d.riskPos = std::move(riskPos);
            next();
            expect_punct("(");
            d.param = parse_param();
            expect_punct(")");
            expect_punct("=>");
            d.body = parse_expr();
            return d;
        }

        Visibility vis = Visibility::Private;
        bool visExplicit = false;
        std::string protectedParam;
        if (at_kw("public")) {
            vis = Visibility::Public;
            visExplicit = true;
            next();
        } else if (at_kw("private")) {
            visExplicit = true;
            next();
        } else if (at_kw("protected")) {
            vis = Visibility::Protected;
            visExplicit = true;
            next();
            expect_punct("[");
            protectedParam = expect_ident("type parameter");
            expect_punct("]");
        }

        if (at_kw("val")) {
            next();
            ValDecl v;
            v.pos = declPos;
            if (vis != Visibility::Public) err("'public' before 'val'");
            if (!risks.empty()) err("val without risk clause");
            v.name = expect_ident("val name");
            expect_punct("=");
            v.init = parse_expr();
            return v;
        }

        FunDecl f;
        f.pos = declPos;
        f.risks = std::move(risks);
        f.riskPos = std::move(riskPos);
        f.vis = vis;
        f.visExplicit = visExplicit;
        f.protectedParam = protectedParam;

        if (at_kw("pure")) { f.effect = Effect::Pure; next(); }
        else if (at_kw("init")) { f.effect = Effect::Init; next(); }
        else if (at_kw("dependent")) { f.effect = Effect::Dependent; next(); }
        else if (at_kw("active")) { f.effect = Effect::Active; next(); }

        if (at_kw("default")) {
            next();
            expect_punct("[");
            f.defaultFor = expect_ident("type name");
            expect_punct("]");
        }

        f.name = expect_ident("function name");
        if (at_punct("[")) {
            next();
            while (!at_punct("]")) {
                f.typeParams.push_back(expect_ident("type parameter"));
                if (at_punct(",")) next();
            }
            expect_punct("]");
        }
        expect_punct("(");
        while (!at_punct(")")) {
            f.params.push_back(parse_param());
            if (at_punct(",")) next();
            else if (!at_punct(")")) err("',' or ')'");
        }
        expect_punct(")");
        expect_punct("=>");
        f.body = parse_expr();
        return f;
    }

    Decl parse_type_decl(Pos pos, bool open, bool pub) {
        expect_kw("type");
        TypeDecl t;
        t.pos = pos;
        t.open = open;
        t.publicKw = pub;
        // caps then name: a run of identifiers, the last one is the name
        std::vector<std::string> idents;
        std::vector<Pos> identPos;
        idents.push_back(expect_ident("type name"));
        identPos.push_back(toks_[i_ - 1].pos);
        while (at_ident()) {
            identPos.push_back(cur().pos);
            idents.push_back(expect_ident("type name"));
        }
        t.name = idents.back();
        idents.pop_back();
        identPos.pop_back();
        t.caps = std::move(idents);
        t.capPos = std::move(identPos);

        if (at_punct("[")) {
            next();
            while (!at_punct("]")) {
                t.typeParams.push_back(expect_ident("type parameter"));
                if (at_punct(",")) next();
            }
            expect_punct("]");
        }
        if (at_punct("(")) {
            // shorthand: one constructor named like the type
            t.shorthand = true;
            CtorDecl c;
            c.pos = cur().pos;
            c.name = t.name;
            next();
            while (!at_punct(")")) {
                c.fields.push_back(parse_atype());
                if (at_punct(",")) next();
                else if (!at_punct(")")) err("',' or ')'");
            }
            expect_punct(")");
            t.ctors.push_back(std::move(c));
        } else if (at_punct("{")) {
            next();
            while (!at_punct("}")) {
                CtorDecl c;
                c.pos = cur().pos;
                c.name = expect_ident("constructor name");
                expect_punct("(");
                while (!at_punct(")")) {
                    c.fields.push_back(parse_atype());
                    if (at_punct(",")) next();
                    else if (!at_punct(")")) err("',' or ')'");
                }
                expect_punct(")");
                t.ctors.push_back(std::move(c));
                if (at_punct(",")) next();
            }
            expect_punct("}");
        }
        return t;
    }

    ParamDecl parse_param() {
        ParamDecl p;
        p.pos = cur().pos;
        if (at_ident() && peek().kind == TokK::Punct && peek().text == ":") {
            p.destructure = false;
            p.name = expect_ident("parameter name");
            expect_punct(":");
            p.type = parse_atype();
            return p;
        }
        // destructuring parameter: Caps Ctor[Args](binders)
        p.destructure = true;
        p.type.pos = cur().pos;
        std::string first = expect_ident("parameter");
        while (at_ident()) {
            p.type.caps.push_back(first);
            first = expect_ident("type name");
        }
        p.type.name = first;
        if (at_punct("[")) {
            next();
            while (!at_punct("]")) {
                p.type.args.push_back(parse_atype());
                if (at_punct(",")) next();
            }
            expect_punct("]");
        }
        expect_punct("(");
        while (!at_punct(")")) {
            p.binderPos.push_back(cur().pos);
            p.binders.push_back(expect_ident("field binder"));
            if (at_punct(",")) next();
            else if (!at_punct(")")) err("',' or ')'");
        }
        expect_punct(")");
        return p;
    }

    AType parse_atype() {
        AType t;
        t.pos = cur().pos;
        // capability prefix: identifiers followed by another identifier or
        // a tuple opening
        while (at_ident() && (peek().kind == TokK::Ident ||
                              (peek().kind == TokK::Punct && peek().text == "("))) {
            t.caps.push_back(cur().text);
            next();
        }
        if (at_punct("(")) {
            t.is_tuple = true;
            next();
            while (!at_punct(")")) {
                t.args.push_back(parse_atype());
                if (at_punct(",")) next();
                else if (!at_punct(")")) err("',' or ')'");
            }
            expect_punct(")");
            return t;
        }
        t.name = expect_ident("type name");
        if (at_punct("[")) {
            next();
            while (!at_punct("]")) {
                t.args.push_back(parse_atype());
                if (at_punct(",")) next();
                else if (!at_punct("]")) err("',' or ']'");
            }
            expect_punct("]");
        }
        return t;
    }

    Pattern parse_pattern() {
        Pattern p;
        p.pos = cur().pos;
        if (at_punct("(")) {
            p.k = Pattern::K::Tuple;
            next();
            while (!at_punct(")")) {
                p.binderPos.push_back(cur().pos);
                p.binders.push_back(expect_ident("binder"));
                if (at_punct(",")) next();
                else if (!at_punct(")")) err("',' or ')'");
            }
            expect_punct(")");
            return p;
        }
        p.name = expect_ident("pattern");
        if (at_punct("(")) {
            p.k = Pattern::K::Ctor;
            next();
            while (!at_punct(")")) {
                p.binderPos.push_back(cur().pos);
                p.binders.push_back(expect_ident("binder"));
                if (at_punct(",")) next();
                else if (!at_punct(")")) err("',' or ')'");
            }
            expect_punct(")");
        } else {
            p.k = Pattern::K::Binder;
        }
        return p;
    }

    // --- expressions ---

    ExprPtr parse_expr() {
        ExprPtr e = parse_expr_no_andreturn();
        if (at_punct("&")) {
            Pos p = cur().pos;
            next();
            expect_kw("return");
            auto ar = make(ExK::AndReturn, p);
            ar->kids.push_back(std::move(e));
            ar->kids.push_back(parse_expr());
            return ar;
        }
        return e;
    }

    ExprPtr parse_expr_no_andreturn() {
        if (at_kw("let")) return parse_let();
        if (at_kw("case")) return parse_case();
        if (at_kw("modify")) return parse_modify();
        if (at_kw("try")) return parse_try();
        if (at_kw("cycle")) return parse_cycle();
        return parse_additive();
    }

    ExprPtr parse_let() {
        Pos p = cur().pos;
        next();
        auto e = make(ExK::Let, p);
        e->pat = parse_pattern();
        expect_punct("=");
        e->kids.push_back(parse_expr());
        expect_kw("in");
        e->kids.push_back(parse_expr());
        return e;
    }

    ExprPtr parse_case() {
        Pos p = cur().pos;
        next();
        auto e = make(ExK::Case, p);
        e->kids.push_back(parse_expr());
        expect_kw("of");
        if (at_punct("{")) {
            next();
            while (!at_punct("}")) {
                Arm a;
                a.pat = parse_pattern();
                expect_punct("=>");
                a.body = parse_expr();
                e->arms.push_back(std::move(a));
                if (at_punct(",")) next();
            }
            expect_punct("}");
        } else {
            Arm a;
            a.pat = parse_pattern();
            expect_punct("=>");
            a.body = parse_expr();
            e->arms.push_back(std::move(a));
        }
        return e;
    }

    ExprPtr parse_modify() {
        Pos p = cur().pos;
        next();
        auto e = make(ExK::Modify, p);
        e->kids.push_back(parse_expr());
        expect_kw("with");
        e->pat.pos = cur().pos;
        e->pat.name = expect_ident("pattern");
        if (at_punct("(")) {
            e->pat.k = Pattern::K::Ctor;
            next();
            e->pat.binderPos.push_back(cur().pos);
            e->pat.binders.push_back(expect_ident("binder"));
            expect_punct(")");
        } else {
            e->pat.k = Pattern::K::Binder;
        }
        expect_punct("=>");
        e->kids.push_back(parse_expr());
        return e;
    }

    ExprPtr parse_try() {
        Pos p = cur().pos;
        next();
        auto e = make(ExK::Try, p);
        e->kids.push_back(parse_additive());  // must elaborate to a call
        expect_kw("catch");
        expect_punct("{");
        while (!at_punct("}")) {
            Arm a;
            a.pat.k = Pattern::K::Ctor;
            a.pat.pos = cur().pos;
            a.pat.name = expect_ident("risk name");
            expect_punct("(");
            while (!at_punct(")")) {
                a.pat.binderPos.push_back(cur().pos);
                a.pat.binders.push_back(expect_ident("binder"));
                if (at_punct(",")) next();
            }
            expect_punct(")");
            expect_punct("=>");
            a.body = parse_expr();
            e->arms.push_back(std::move(a));
            if (at_punct(",")) next();
        }
        expect_punct("}");
        return e;
    }

    ExprPtr parse_cycle() {
        Pos p = cur().pos;
        next();
        auto e = make(ExK::Cycle, p);
        if (cur().kind != TokK::UIntLit) err("iteration bound literal");
        e->cycleN = cur().uval;
        next();
        expect_kw("from");
        e->kids.push_back(parse_expr());
        expect_kw("as");
        e->bindPos = cur().pos;
        e->bindName = expect_ident("accumulator name");
        expect_punct("=>");
        e->kids.push_back(parse_expr());
        return e;
    }

    ExprPtr parse_additive() {
        ExprPtr lhs = parse_postfix();
        while (at_punct("+") || at_punct("-")) {
            char op = cur().text[0];
            Pos p = cur().pos;
            next();
            auto e = make(ExK::Binary, p);
            e->op = op;
            e->kids.push_back(std::move(lhs));
            e->kids.push_back(parse_postfix());
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        while (at_punct(".") && peek().kind == TokK::Ident &&
               (peek().text == "attach" || peek().text == "detach")) {
            Pos p = cur().pos;
            next();
            bool attach = cur().text == "attach";
            next();
            expect_punct("[");
            auto op = make(attach ? ExK::Attach : ExK::Detach, p);
            op->bindPos = cur().pos;
            op->bindName = expect_ident("capability name");
            expect_punct("]");
            op->kids.push_back(std::move(e));
            e = std::move(op);
        }
        return e;
    }

    ExprPtr parse_primary() {
        Pos p = cur().pos;
        if (cur().kind == TokK::UIntLit) {
            auto e = make(ExK::LitU, p);
            e->litu = cur().uval;
            next();
            return e;
        }
        if (cur().kind == TokK::IntLit) {
            auto e = make(ExK::LitI, p);
            e->liti = cur().ival;
            next();
            return e;
        }
        if (at_punct("{")) {
            next();
            ExprPtr inner = parse_expr();
            expect_punct("}");
            return inner;
        }
        if (at_punct("(")) {
            next();
            if (at_punct(")")) {
                next();
                return make(ExK::Unit, p);
            }
            std::vector<ExprPtr> elems;
            elems.push_back(parse_expr());
            while (at_punct(",")) {
                next();
                elems.push_back(parse_expr());
            }
            expect_punct(")");
            if (elems.size() == 1) return std::move(elems[0]);
            auto e = make(ExK::Tuple, p);
            e->kids = std::move(elems);
            return e;
        }
        if (at_ident()) {
            std::vector<std::string> path;
            path.push_back(cur().text);
            next();
            while (at_punct(".") && peek().kind == TokK::Ident &&
                   peek().text != "attach" && peek().text != "detach") {
                next();
                path.push_back(cur().text);
                next();
            }
            std::vector<AType> typeArgs;
            bool hasTypeArgs = false;
            if (at_punct("[")) {
                hasTypeArgs = true;
                next();
                while (!at_punct("]")) {
                    typeArgs.push_back(parse_atype());
                    if (at_punct(",")) next();
                    else if (!at_punct("]")) err("',' or ']'");
                }
                expect_punct("]");
            }
            if (at_punct("(")) {
                auto e = make(ExK::Call, p);
                e->path = std::move(path);
                e->typeArgs = std::move(typeArgs);
                next();
                while (!at_punct(")")) {
                    e->kids.push_back(parse_expr());
                    if (at_punct(",")) next();
                    else if (!at_punct(")")) err("',' or ')'");
                }
                expect_punct(")");
                return e;
            }
            if (hasTypeArgs) err("'(' after type arguments");
            auto e = make(ExK::Path, p);
            e->path = std::move(path);
            return e;
        }
        err("expression");
    }
};

}  // namespace

ParseResult parse_module(const TokenStream& tokens) {
    ParseResult r;
    try {
        Parser p(tokens);
        r.module = p.parse_file();
    } catch (const PErr& e) {
        r.diags.push_back(e.d);
    }
    return r;
}

ParseResult parse_source(std::string_view source) {
    auto lex = tokenize(source);
    if (!lex.ok()) {
        ParseResult r;
        r.diags.push_back(*lex.error);
        return r;
    }
    return parse_module(*lex.stream);
}

const char* effect_name(Effect e) {
    switch (e) {
        case Effect::Pure: return "pure";
        case Effect::Init: return "init";
        case Effect::Dependent: return "dependent";
        case Effect::Active: return "active";
    }
    return "?";
}

const char* visibility_name(Visibility v) {
    switch (v) {
        case Visibility::Private: return "private";
        case Visibility::Public: return "public";
        case Visibility::Protected: return "protected";
    }
    return "?";
}

std::string Diagnostic::line(const std::string& file) const {
    return code + " " + file + ":" + std::to_string(pos.line) + ":" +
           std::to_string(pos.column) + " " + message;
}

}  // namespace mandala
