#pragma once

// Shared helpers for the test suites.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mandala/validator.hpp"

#include "mandala/pipeline.hpp"
#include "mandala/runtime.hpp"

namespace testutil {

inline std::string corpus_path(const std::string& name) {
    return std::string(MANDALA_CORPUS_DIR) + "/" + name;
}

inline std::string read_corpus(const std::string& name) {
    auto text = mandala::read_text_file(corpus_path(name));
    REQUIRE(text.has_value());
    return *text;
}

// Fresh scratch directory for a Store; removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<uint64_t> counter{0};
        auto base = std::filesystem::temp_directory_path() / "mandala-tests";
        std::filesystem::create_directories(base);
        path = base / ("t" + std::to_string(::getpid()) + "-" +
                       std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

// Compiles and registers a module source against a MemoryRegistry by
// running the validator, mirroring deployment order rules.
inline mandala::Digest register_source(mandala::MemoryRegistry& reg,
                                       const std::string& source) {
    auto built = mandala::build_source(source, reg);
    REQUIRE(built.ok());
    auto verdict = mandala::validate(*built.bytes, reg);
    auto* vm = std::get_if<mandala::VerifiedModule>(&verdict);
    if (!vm) {
        auto* err = std::get_if<mandala::VError>(&verdict);
        FAIL("validation failed: ", err->code, " ", err->detail);
    }
    REQUIRE(reg.add(vm->address, vm->module, vm->functionBounds));
    return vm->address;
}

// The four paper modules, in deployment order.
inline std::vector<std::string> golden_files() {
    return {"token.mdl", "purse.mdl", "purse_storage.mdl", "my_fix_supply_token.mdl"};
}

inline mandala::MemoryRegistry golden_registry() {
    mandala::MemoryRegistry reg;
    for (const auto& f : golden_files()) register_source(reg, read_corpus(f));
    return reg;
}

}  // namespace testutil
