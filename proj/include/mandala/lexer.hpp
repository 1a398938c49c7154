#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mandala/diag.hpp"

namespace mandala {

enum class TokK : uint8_t { Keyword, Ident, UIntLit, IntLit, Punct, End };

struct Token {
    TokK kind = TokK::End;
    std::string text;     // exact lexeme as it appears in the source
    uint64_t uval = 0;    // UIntLit
    int64_t ival = 0;     // IntLit
    Pos pos;
    uint32_t offset = 0;  // byte offset of the lexeme in the source
};

struct TokenStream {
    std::vector<Token> tokens;  // terminated by an End token
};

struct LexResult {
    std::optional<TokenStream> stream;
    std::optional<Diagnostic> error;
    bool ok() const { return stream.has_value(); }
};

bool is_keyword(std::string_view s);

// Tokenizes UTF-8 source. Never throws; returns either the full stream or
// the first lexical error with its position.
LexResult tokenize(std::string_view source);

}  // namespace mandala
