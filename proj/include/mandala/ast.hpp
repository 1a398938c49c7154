#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mandala/diag.hpp"

namespace mandala {

// Surface syntax tree. Nodes keep source positions and a numeric id used
// by later passes to attach resolution results.

struct AType {
    Pos pos;
    std::vector<std::string> caps;  // written capability prefix
    std::string name;               // base name; empty for tuple form
    std::vector<AType> args;
    bool is_tuple = false;
};

enum class ExK : uint8_t {
    LitU,
    LitI,
    Unit,
    Path,    // variable or dotted value reference
    Call,    // call or constructor application
    Tuple,
    Binary,  // + or -
    Let,
    Case,
    Modify,
    AndReturn,
    Attach,
    Detach,
    Cycle,
    Try,
};

struct Pattern {
    enum class K : uint8_t { Binder, Tuple, Ctor };
    K k = K::Binder;
    Pos pos;
    std::string name;                  // binder name or constructor name
    std::vector<std::string> binders;  // Tuple/Ctor field binders
    std::vector<Pos> binderPos;
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Arm {
    Pattern pat;
    ExprPtr body;
};

struct Expr {
    ExK k;
    Pos pos;
    int id = -1;

    uint64_t litu = 0;
    int64_t liti = 0;
    std::vector<std::string> path;
    std::vector<AType> typeArgs;
    std::vector<ExprPtr> kids;
    char op = 0;
    Pattern pat;            // Let / Modify
    std::vector<Arm> arms;  // Case / Try handlers
    uint64_t cycleN = 0;
    std::string bindName;   // Cycle accumulator / Attach-Detach capability
    Pos bindPos;
};

struct CtorDecl {
    Pos pos;
    std::string name;
    std::vector<AType> fields;
};

struct TypeDecl {
    Pos pos;
    bool open = false;
    bool publicKw = false;  // accepted for compatibility; no extra meaning
    std::vector<std::string> caps;
    std::vector<Pos> capPos;
    std::string name;
    std::vector<std::string> typeParams;
    std::vector<CtorDecl> ctors;
    bool shorthand = false;  // single anonymous constructor form
};

struct CapabilityDecl {
    Pos pos;
    bool open = false;
    std::string name;
};

enum class Visibility : uint8_t { Private = 0, Public = 1, Protected = 2 };
enum class Effect : uint8_t { Pure = 0, Init = 1, Dependent = 2, Active = 3 };

const char* effect_name(Effect e);
const char* visibility_name(Visibility v);

struct ParamDecl {
    Pos pos;
    bool destructure = false;
    std::string name;  // annotated form only
    AType type;        // annotated type, or destructured ctor head
    std::vector<std::string> binders;
    std::vector<Pos> binderPos;
};

struct FunDecl {
    Pos pos;
    std::vector<std::string> risks;
    std::vector<Pos> riskPos;
    Visibility vis = Visibility::Private;
    bool visExplicit = false;
    std::string protectedParam;
    std::optional<Effect> effect;
    std::string defaultFor;
    std::string name;
    std::vector<std::string> typeParams;
    std::vector<ParamDecl> params;
    ExprPtr body;
};

struct ValDecl {
    Pos pos;
    std::string name;
    ExprPtr init;
};

struct InitDecl {
    Pos pos;
    std::vector<std::string> risks;
    std::vector<Pos> riskPos;
    ParamDecl param;
    ExprPtr body;
};

using Decl = std::variant<TypeDecl, CapabilityDecl, FunDecl, ValDecl, InitDecl>;

struct AstModule {
    std::string name;
    Pos pos;
    std::vector<std::string> imports;
    std::vector<Pos> importPos;
    std::vector<Decl> decls;  // declaration order preserved
    int exprCount = 0;
};

// Deep structural equality ignoring positions and node ids; the oracle
// behind the print/parse round-trip property.
bool ast_equal(const AstModule& a, const AstModule& b);

}  // namespace mandala
