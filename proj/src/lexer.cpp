#include "mandala/lexer.hpp"

#include <array>
#include <cctype>

namespace mandala {

static const std::array<std::string_view, 27> kKeywords = {
    "module", "import", "type", "capability", "open",   "risk",   "public",
    "private", "protected", "pure", "init", "dependent", "active", "default",
    "val",    "let",    "in",   "case",       "of",     "modify", "with",
    "return", "try",    "catch", "cycle",     "from",   "as",
};

bool is_keyword(std::string_view s) {
    for (auto k : kKeywords)
        if (k == s) return true;
    return false;
}

namespace {

struct Cursor {
    std::string_view src;
    size_t i = 0;
    uint32_t line = 1, col = 1;

    bool done() const { return i >= src.size(); }
    char peek(size_t ahead = 0) const {
        return i + ahead < src.size() ? src[i + ahead] : '\0';
    }
    char advance() {
        char c = src[i++];
        if (c == '\n') {
            line++;
            col = 1;
        } else {
            col++;
        }
        return c;
    }
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_cont(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

LexResult tokenize(std::string_view source) {
    Cursor cur{source};
    TokenStream out;
    auto fail = [&](Pos pos, std::string msg) {
        LexResult r;
        r.error = Diagnostic{diag::Lex, pos, std::move(msg), {}};
        return r;
    };

    while (!cur.done()) {
        char c = cur.peek();
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            cur.advance();
            continue;
        }
        if (c == '/' && cur.peek(1) == '/') {
            while (!cur.done() && cur.peek() != '\n') cur.advance();
            continue;
        }
        Token tok;
        tok.pos = {cur.line, cur.col};
        tok.offset = static_cast<uint32_t>(cur.i);

        if (ident_start(c)) {
            size_t start = cur.i;
            while (!cur.done() && ident_cont(cur.peek())) cur.advance();
            tok.text = std::string(source.substr(start, cur.i - start));
            tok.kind = is_keyword(tok.text) ? TokK::Keyword : TokK::Ident;
            out.tokens.push_back(std::move(tok));
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && std::isdigit(static_cast<unsigned char>(cur.peek(1))) &&
             (out.tokens.empty() ||
              (out.tokens.back().kind != TokK::Ident &&
               out.tokens.back().kind != TokK::UIntLit &&
               out.tokens.back().kind != TokK::IntLit &&
               out.tokens.back().text != ")" && out.tokens.back().text != "]")))) {
            size_t start = cur.i;
            bool neg = c == '-';
            if (neg) cur.advance();
            uint64_t v = 0;
            bool overflow = false;
            while (!cur.done() && std::isdigit(static_cast<unsigned char>(cur.peek()))) {
                uint64_t d = static_cast<uint64_t>(cur.advance() - '0');
                if (v > (UINT64_MAX - d) / 10) overflow = true;
                else v = v * 10 + d;
            }
            tok.text = std::string(source.substr(start, cur.i - start));
            if (neg) {
                // range of two's-complement int64
                if (overflow || v > uint64_t(INT64_MAX) + 1)
                    return fail(tok.pos, "integer literal out of range: " + tok.text);
                tok.kind = TokK::IntLit;
                tok.ival = (v == uint64_t(INT64_MAX) + 1) ? INT64_MIN : -int64_t(v);
            } else {
                if (overflow)
                    return fail(tok.pos, "integer literal out of range: " + tok.text);
                tok.kind = TokK::UIntLit;
                tok.uval = v;
            }
            out.tokens.push_back(std::move(tok));
            continue;
        }
        // punctuation
        std::string p;
        if (c == '=' && cur.peek(1) == '>') {
            cur.advance();
            cur.advance();
            p = "=>";
        } else if (std::string_view("{}()[],:.=+-&*").find(c) != std::string_view::npos) {
            cur.advance();
            p = std::string(1, c);
        } else {
            return fail(tok.pos, std::string("illegal character '") + c + "'");
        }
        tok.kind = TokK::Punct;
        tok.text = p;
        out.tokens.push_back(std::move(tok));
    }
    Token end;
    end.kind = TokK::End;
    end.pos = {cur.line, cur.col};
    end.offset = static_cast<uint32_t>(cur.i);
    out.tokens.push_back(std::move(end));
    LexResult r;
    r.stream = std::move(out);
    return r;
}

}  // namespace mandala
