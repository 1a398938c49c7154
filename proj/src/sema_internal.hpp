#pragma once

// Shared internals of the elaboration phases. Not installed.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mandala/sema.hpp"

namespace mandala::detail {

struct SemaErr {
    Diagnostic d;
};

[[noreturn]] inline void bail(const char* code, Pos pos, std::string msg) {
    throw SemaErr{Diagnostic{code, pos, std::move(msg), {}}};
}

inline bool is_builtin_type_name(const std::string& n) {
    return n == "UInt" || n == "Int" || n == "Unit" || n == "ID" || n == "Context" ||
           n == "Ref";
}

inline std::optional<BuiltinRisk> builtin_risk_by_name(const std::string& n) {
    if (n == "NumericOverflow") return BuiltinRisk::NumericOverflow;
    if (n == "NumericUnderflow") return BuiltinRisk::NumericUnderflow;
    if (n == "EmptyCell") return BuiltinRisk::EmptyCell;
    return std::nullopt;
}

struct ImportEnv {
    std::string name;
    Digest addr;
    const BytecodeModule* mod = nullptr;

    int type_idx(const std::string& n) const { return mod->type_index(n); }
    int fn_idx(const std::string& n) const { return mod->function_index(n); }
    int val_idx(const std::string& n) const { return mod->val_index(n); }
    int cap_idx(const std::string& n) const {
        for (size_t i = 0; i < mod->caps.size(); i++)
            if (mod->caps[i].name == n) return int(i);
        return -1;
    }
    std::optional<std::pair<uint32_t, uint32_t>> ctor(const std::string& n) const {
        for (size_t t = 0; t < mod->types.size(); t++)
            for (size_t c = 0; c < mod->types[t].ctors.size(); c++)
                if (mod->types[t].ctors[c].name == n)
                    return std::make_pair(uint32_t(t), uint32_t(c));
        return std::nullopt;
    }
    std::optional<RiskRef> risk(const std::string& n) const {
        for (const auto& f : mod->functions)
            for (const auto& r : f.risks)
                if (!r.builtin && r.name == n) return absolutize(r, addr);
        return std::nullopt;
    }
};

struct OwnDecls {
    struct Entry {
        int order;
        uint32_t index;
        uint32_t sub = 0;
    };
    std::map<std::string, Entry> types, ctors, fns, vals, caps;
    std::map<std::string, uint32_t> ctorType;
};

struct ModuleEnv {
    std::string selfName;
    std::vector<ImportEnv> imports;
    OwnDecls own;

    const ImportEnv* import_by_name(const std::string& n) const {
        for (const auto& ie : imports)
            if (ie.name == n) return &ie;
        return nullptr;
    }
};

OwnDecls index_own_decls(const AstModule& ast, Diagnostics& diags);
ModuleEnv build_env(const AstModule& ast, const std::vector<std::string>& importNames,
                    const std::vector<Digest>& imports, const DeployedRegistry& reg,
                    Diagnostics& diags);

// Deep equality that ignores only the outermost capability set.
bool same_base(const SemType& a, const SemType& b);

// Effect demanded by one node in isolation.
Effect node_effect(const TExpr& e, const DeployedRegistry& reg);

}  // namespace mandala::detail
