#pragma once

#include <optional>

#include "mandala/ast.hpp"
#include "mandala/lexer.hpp"

namespace mandala {

struct ParseResult {
    std::optional<AstModule> module;
    Diagnostics diags;
    bool ok() const { return module.has_value() && diags.empty(); }
};

// Parses one module (optionally preceded by import lines) from a token
// stream produced by tokenize().
ParseResult parse_module(const TokenStream& tokens);

// Convenience: tokenize + parse.
ParseResult parse_source(std::string_view source);

}  // namespace mandala
