#include <doctest.h>

#include <random>

#include "mandala/lexer.hpp"
#include "mandala/parser.hpp"
#include "mandala/printer.hpp"
#include "test_util.hpp"

using namespace mandala;

TEST_CASE("tokenize the module header of the token listing") {
    auto r = tokenize("module Token {");
    REQUIRE(r.ok());
    const auto& t = r.stream->tokens;
    REQUIRE(t.size() == 4);  // + end
    CHECK(t[0].kind == TokK::Keyword);
    CHECK(t[0].text == "module");
    CHECK(t[1].kind == TokK::Ident);
    CHECK(t[1].text == "Token");
    CHECK(t[2].kind == TokK::Punct);
    CHECK(t[2].text == "{");
}

TEST_CASE("tokenize the empty input") {
    auto r = tokenize("");
    REQUIRE(r.ok());
    CHECK(r.stream->tokens.size() == 1);
    CHECK(r.stream->tokens[0].kind == TokK::End);
}

TEST_CASE("tokenize the fixed-supply amount literal") {
    auto r = tokenize("100000000");
    REQUIRE(r.ok());
    CHECK(r.stream->tokens[0].kind == TokK::UIntLit);
    CHECK(r.stream->tokens[0].uval == 100000000ull);
}

TEST_CASE("lexemes cover the source exactly and positions never go back") {
    std::string src = testutil::read_corpus("purse.mdl");
    auto r = tokenize(src);
    REQUIRE(r.ok());
    Pos last{1, 1};
    for (const auto& t : r.stream->tokens) {
        if (t.kind == TokK::End) break;
        CHECK(src.substr(t.offset, t.text.size()) == t.text);
        bool forward = t.pos.line > last.line ||
                       (t.pos.line == last.line && t.pos.column >= last.column);
        CHECK(forward);
        last = t.pos;
    }
}

TEST_CASE("illegal characters and oversized literals are lexical errors") {
    CHECK(!tokenize("module M { $ }").ok());
    CHECK(!tokenize("99999999999999999999999999").ok());
}

TEST_CASE("tokenize never throws on arbitrary bytes") {
    std::mt19937_64 rng(42);
    for (int round = 0; round < 200; round++) {
        size_t n = size_t(rng() % (round < 190 ? 4096 : (1 << 20)));
        std::string junk(n, '\0');
        for (auto& c : junk) c = char(rng() & 0xff);
        auto r = tokenize(junk);
        CHECK((r.ok() || r.error.has_value()));
    }
}

TEST_CASE("the token listing parses to one type and four functions") {
    auto r = parse_source(testutil::read_corpus("token.mdl"));
    REQUIRE(r.ok());
    int types = 0, fns = 0;
    for (const auto& d : r.module->decls) {
        if (std::holds_alternative<TypeDecl>(d)) types++;
        if (std::holds_alternative<FunDecl>(d)) fns++;
    }
    CHECK(types == 1);
    CHECK(fns == 4);
}

TEST_CASE("an empty module parses") {
    auto r = parse_source("module M {}");
    REQUIRE(r.ok());
    CHECK(r.module->name == "M");
    CHECK(r.module->decls.empty());
}

TEST_CASE("truncated input is a parse error") {
    auto r = parse_source("module M { type X(");
    CHECK(!r.ok());
    REQUIRE(!r.diags.empty());
    CHECK(r.diags[0].code == diag::Parse);
}

TEST_CASE("all four paper listings parse with zero diagnostics") {
    for (const auto& f : testutil::golden_files()) {
        auto r = parse_source(testutil::read_corpus(f));
        CAPTURE(f);
        CHECK(r.ok());
    }
}

TEST_CASE("printing an empty module gives the canonical form") {
    auto r = parse_source("module M {}");
    REQUIRE(r.ok());
    CHECK(pretty_print(*r.module) == "module M {\n}\n");
}

TEST_CASE("parse-print-parse is the identity on the corpus") {
    std::vector<std::string> files = testutil::golden_files();
    files.push_back("fixtures/vault.mdl");
    for (const auto& f : files) {
        CAPTURE(f);
        auto first = parse_source(testutil::read_corpus(f));
        REQUIRE(first.ok());
        std::string printed = pretty_print(*first.module);
        auto second = parse_source(printed);
        REQUIRE(second.ok());
        CHECK(ast_equal(*first.module, *second.module));
        // printing is a fixed point after one round
        CHECK(pretty_print(*second.module) == printed);
    }
}

TEST_CASE("negative corpus files all parse; they fail later phases") {
    namespace fs = std::filesystem;
    for (const auto& entry : fs::directory_iterator(testutil::corpus_path("negative"))) {
        auto text = read_text_file(entry.path().string());
        REQUIRE(text.has_value());
        CAPTURE(entry.path().filename().string());
        CHECK(parse_source(*text).ok());
    }
}
