#include <doctest.h>

#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include "mandala/sema.hpp"
#include "test_util.hpp"

using namespace mandala;

TEST_CASE("the four listings elaborate in deployment order with zero diagnostics") {
    MemoryRegistry reg;
    for (const auto& f : testutil::golden_files()) {
        CAPTURE(f);
        auto parsed = parse_source(testutil::read_corpus(f));
        REQUIRE(parsed.ok());
        auto sema = elaborate(std::move(*parsed.module), reg);
        if (!sema.ok())
            for (const auto& d : sema.diags) MESSAGE(f, ": ", d.line(f));
        REQUIRE(sema.ok());
        auto bytes = encode(compile(*sema.value));
        auto verdict = validate(bytes, reg);
        auto* vm = std::get_if<VerifiedModule>(&verdict);
        REQUIRE(vm != nullptr);
        REQUIRE(reg.add(vm->address, vm->module, vm->functionBounds));
    }
}

TEST_CASE("merge is typed as the declared token with its declared capabilities") {
    MemoryRegistry reg;
    auto parsed = parse_source(testutil::read_corpus("token.mdl"));
    REQUIRE(parsed.ok());
    auto sema = elaborate(std::move(*parsed.module), reg);
    REQUIRE(sema.ok());
    const auto& merge = sema.value->functions.at(0);
    CHECK(merge.name == "merge");
    CHECK(merge.ret.kind == TypeK::Adt);
    CHECK(merge.ret.caps.has(BuiltinCap::Drop));
    CHECK(merge.ret.caps.has(BuiltinCap::Persist));
    CHECK(!merge.ret.caps.has(BuiltinCap::Copy));
    // static dispatch: every call site carries a concrete target
    CHECK(merge.effect == Effect::Pure);
}

TEST_CASE("a module with no imports and no calls resolves") {
    MemoryRegistry reg;
    auto parsed = parse_source("module Solo { private f() => 0 }");
    REQUIRE(parsed.ok());
    auto r = resolve(std::move(*parsed.module), reg);
    CHECK(r.ok());
}

TEST_CASE("calling a later declaration in the same module is rejected") {
    MemoryRegistry reg;
    auto parsed = parse_source("module NRec { private f() => g()  private g() => 0 }");
    REQUIRE(parsed.ok());
    auto r = resolve(std::move(*parsed.module), reg);
    REQUIRE(!r.ok());
    CHECK(r.diags[0].code == diag::RecForward);
}

TEST_CASE("importing an undeployed module is rejected") {
    MemoryRegistry reg;
    auto parsed = parse_source("import Token.*\nmodule M { private f() => 0 }");
    REQUIRE(parsed.ok());
    auto r = resolve(std::move(*parsed.module), reg);
    REQUIRE(!r.ok());
    CHECK(r.diags[0].code == diag::ImportMissing);
}

static Diagnostics elaborate_against_golden(const std::string& source) {
    static MemoryRegistry reg = [] {
        MemoryRegistry r;
        for (const auto& f : testutil::golden_files())
            testutil::register_source(r, testutil::read_corpus(f));
        testutil::register_source(r, testutil::read_corpus("fixtures/vault.mdl"));
        return r;
    }();
    auto parsed = parse_source(source);
    REQUIRE(parsed.ok());
    auto sema = elaborate(std::move(*parsed.module), reg);
    if (sema.ok()) return {};
    return sema.diags;
}

TEST_CASE("each negative-corpus program fails with exactly its intended code") {
    namespace fs = std::filesystem;
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(testutil::corpus_path("negative"))) {
        std::string name = entry.path().filename().string();
        // n07_E-VIS-PRIVATE.mdl -> E-VIS-PRIVATE
        auto uscore = name.find('_');
        std::string expect = name.substr(uscore + 1, name.size() - uscore - 5);
        auto text = read_text_file(entry.path().string());
        REQUIRE(text.has_value());
        CAPTURE(name);
        auto diags = elaborate_against_golden(*text);
        REQUIRE(diags.size() == 1);
        CHECK(diags[0].code == expect);
        seen++;
    }
    CHECK(seen >= 16);
}

TEST_CASE("discarding a droppable token is allowed") {
    auto diags = elaborate_against_golden(
        "import Token.*\nmodule D { private f[T](t:Token[T]) => 0 }");
    CHECK(diags.empty());
}

TEST_CASE("a second use of a copyable value is allowed") {
    auto diags = elaborate_against_golden(
        "module C { private f(x:UInt) => (x, x) }");
    CHECK(diags.empty());
}

TEST_CASE("capability subsumption is monotone at call boundaries") {
    // withdraw demands Withdraw; any purse whose written capability set
    // contains it is accepted regardless of what else it carries
    const std::vector<std::string> extras = {"", "Copy ", "Copy Drop ",
                                             "Persist Copy Drop "};
    for (const auto& extra : extras) {
        CAPTURE(extra);
        std::string src = "import Token.*\nimport Purse.*\n"
                          "module Sub {\n"
                          "  risk NumericUnderflow\n"
                          "  public active f[T](p:" +
                          extra +
                          "Withdraw Purse[T], amount:UInt) => withdraw(p, amount)\n"
                          "}";
        auto diags = elaborate_against_golden(src);
        if (!diags.empty()) MESSAGE(diags[0].message);
        CHECK(diags.empty());
    }
}

TEST_CASE("dropping a detached capability narrows the type for callees") {
    // a purse without Withdraw cannot be passed where Withdraw is demanded
    auto diags = elaborate_against_golden(
        "import Token.*\nimport Purse.*\n"
        "module Sub2 {\n"
        "  risk NumericUnderflow\n"
        "  public active f[T](p:Purse[T], amount:UInt) => withdraw(p.detach[Withdraw], "
        "amount)\n"
        "}");
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == diag::TypeMismatch);
}

TEST_CASE("a copy-only value cannot be left behind on one branch") {
    auto diags = elaborate_against_golden(
        "module Mixed {\n"
        "  type Copy Persist CP(UInt)\n"
        "  type Drop Two { A(UInt), B(UInt) }\n"
        "  private g(x:CP) => 0\n"
        "  private f(x:CP, p:Two) => let s = g(x) in case p of { A(n) => g(x) + n + s, "
        "B(n) => n + s }\n"
        "}");
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == diag::LinDrop);
}

TEST_CASE("generic inference works from arguments alone") {
    auto diags = elaborate_against_golden(
        "import Token.*\nmodule Inf {\n"
        "  risk NumericOverflow\n"
        "  private f[T](a:Token[T], b:Token[T]) => merge(a, b)\n"
        "}");
    CHECK(diags.empty());
}

TEST_CASE("the deployed universe call graph is acyclic") {
    MemoryRegistry reg = testutil::golden_registry();
    // Kahn's algorithm over (module,fn) -> callee edges
    struct Node {
        Digest mod;
        uint32_t fn;
        bool operator<(const Node& o) const {
            return mod != o.mod ? mod < o.mod : fn < o.fn;
        }
    };
    std::map<Node, std::set<Node>> edges;
    std::map<Node, int> indeg;
    std::function<void(const Digest&, const IrNode&, Node)> scan =
        [&](const Digest& self, const IrNode& n, Node from) {
            if (n.k == NodeK::Call) {
                Node to{resolve_owner(n.module, self), n.index};
                if (edges[from].insert(to).second) indeg[to]++;
            }
            for (const auto& k : n.kids) scan(self, k, from);
            for (const auto& a : n.arms) scan(self, a.body[0], from);
        };
    for (const auto& addr : reg.addresses()) {
        const auto* m = reg.module_at(addr);
        for (uint32_t i = 0; i < m->functions.size(); i++) {
            Node self{addr, i};
            indeg.emplace(self, 0);
            scan(addr, m->functions[i].body, self);
        }
    }
    std::vector<Node> queue;
    for (const auto& [n, d] : indeg)
        if (d == 0) queue.push_back(n);
    size_t seen = 0;
    while (!queue.empty()) {
        Node n = queue.back();
        queue.pop_back();
        seen++;
        for (const auto& to : edges[n])
            if (--indeg[to] == 0) queue.push_back(to);
    }
    CHECK(seen == indeg.size());
}

TEST_CASE("every call in compiled corpus modules has a concrete target") {
    MemoryRegistry reg = testutil::golden_registry();
    std::function<void(const Digest&, const IrNode&)> scan = [&](const Digest& self,
                                                                 const IrNode& n) {
        if (n.k == NodeK::Call) {
            Digest target = resolve_owner(n.module, self);
            const auto* m = reg.module_at(target);
            REQUIRE(m != nullptr);
            CHECK(n.index < m->functions.size());
        }
        for (const auto& k : n.kids) scan(self, k);
        for (const auto& a : n.arms) scan(self, a.body[0]);
    };
    for (const auto& addr : reg.addresses()) {
        const auto* m = reg.module_at(addr);
        for (const auto& f : m->functions) scan(addr, f.body);
    }
}

TEST_CASE("compiled corpus contains no cell access below the declared effect") {
    MemoryRegistry reg = testutil::golden_registry();
    std::function<bool(const IrNode&, NodeK)> contains = [&](const IrNode& n,
                                                             NodeK k) -> bool {
        if (n.k == k) return true;
        for (const auto& kid : n.kids)
            if (contains(kid, k)) return true;
        for (const auto& a : n.arms)
            if (contains(a.body[0], k)) return true;
        return false;
    };
    for (const auto& addr : reg.addresses()) {
        const auto* m = reg.module_at(addr);
        for (const auto& f : m->functions) {
            if (f.effect < Effect::Active) CHECK(!contains(f.body, NodeK::Modify));
            if (f.effect < Effect::Init) {
                CHECK(!contains(f.body, NodeK::NewId));
                CHECK(!contains(f.body, NodeK::NewContext));
            }
        }
    }
}
