#pragma once

#include <memory>
#include <variant>

#include "mandala/ast.hpp"
#include "mandala/bytecode.hpp"
#include "mandala/registry.hpp"

namespace mandala {

// Typed expression tree. Carries the full type (with capabilities), the
// linear-use decisions (move/copy per variable occurrence, drop points)
// and everything compile() needs to lower to the instruction tree.

enum class TK : uint8_t {
    LitU,
    LitI,
    Unit,
    Var,
    ValRef,
    Ctor,
    Call,
    BuiltinCall,
    Tuple,
    Binary,
    Let,
    Case,
    Modify,
    AndReturn,
    Attach,
    Detach,
    Cycle,
    Try,
};

enum class BuiltinFn : uint8_t { Derive, NewId, NewContext };
enum class UseMode : uint8_t { Move, Copy };

struct TExpr;
using TExprPtr = std::unique_ptr<TExpr>;

struct TArm {
    bool isTuple = false;
    uint32_t ctorIndex = 0;
    RiskRef risk;  // Try handlers
    std::vector<uint32_t> slots;
    std::vector<uint32_t> dropsAtEntry;
    TExprPtr body;
};

struct TExpr {
    TK k;
    Pos pos;
    SemType type;

    uint64_t litu = 0;
    int64_t liti = 0;
    uint32_t slot = 0;  // Var / Let / Modify binder / Cycle accumulator
    UseMode use = UseMode::Move;
    Digest module;  // Ctor/Call/ValRef target (zero = this module)
    uint32_t index = 0;
    uint32_t index2 = 0;
    std::vector<SemType> typeArgs;
    BuiltinFn builtin = BuiltinFn::Derive;
    char op = 0;
    CapRef cap;
    uint64_t cycleN = 0;
    std::vector<uint32_t> dropsAtEntry;  // Let/Modify/Cycle binder unused
    std::vector<uint32_t> dropsAfter;    // Cycle leftovers
    std::vector<TExprPtr> kids;
    std::vector<TArm> arms;
};

struct TBinding {
    std::string name;
    SemType type;
    Pos pos;
};

struct TFunction {
    Pos pos;
    std::string name;
    Visibility vis = Visibility::Private;
    uint32_t protectedParam = 0;
    Effect effect = Effect::Pure;
    uint32_t defaultFor = UINT32_MAX;
    std::vector<RiskRef> declaredRisks;
    std::vector<std::string> typeParams;
    std::vector<BParam> params;
    SemType ret;
    std::vector<TBinding> slots;
    std::vector<uint32_t> entryDrops;
    TExprPtr body;
};

struct TVal {
    Pos pos;
    std::string name;
    SemType type;
    std::vector<TBinding> slots;
    TExprPtr init;
};

struct TInit {
    Pos pos;
    std::vector<RiskRef> risks;
    BParam param;
    std::vector<TBinding> slots;
    std::vector<uint32_t> entryDrops;
    TExprPtr body;
};

struct TypedModule {
    std::string name;
    std::vector<std::string> importNames;
    std::vector<Digest> imports;
    std::vector<BTypeDecl> types;
    std::vector<BCapability> caps;
    std::vector<TFunction> functions;
    std::vector<TVal> vals;
    std::optional<TInit> init;
};

// Name resolution output: the AST plus resolved imports. Identifier
// binding is re-derived by the type checker; this phase's job is to
// reject unknown names, forward intra-module references and missing
// imports before any typing happens.
struct ResolvedModule {
    AstModule ast;
    std::vector<std::string> importNames;
    std::vector<Digest> imports;
};

template <typename T>
struct SemaResult {
    std::optional<T> value;
    Diagnostics diags;
    bool ok() const { return value.has_value() && diags.empty(); }
};

SemaResult<ResolvedModule> resolve(AstModule ast, const DeployedRegistry& registry);
SemaResult<TypedModule> check_types(const ResolvedModule& rm, const DeployedRegistry& registry);
Diagnostics check_substructural(TypedModule& tm);
Diagnostics check_capabilities(const TypedModule& tm, const DeployedRegistry& registry);
Diagnostics check_effects(const TypedModule& tm, const DeployedRegistry& registry);

// resolve -> check_types -> check_substructural -> check_capabilities ->
// check_effects; stops at the first failing phase.
SemaResult<TypedModule> elaborate(AstModule ast, const DeployedRegistry& registry);

// Lowers an elaborated module to its canonical bytecode form.
BytecodeModule compile(const TypedModule& tm);

}  // namespace mandala
