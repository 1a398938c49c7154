#pragma once

#include <string>

#include "mandala/parser.hpp"
#include "mandala/printer.hpp"
#include "mandala/sema.hpp"

namespace mandala {

// Front-end convenience: source text -> canonical bytecode.
struct BuildResult {
    std::optional<Bytes> bytes;
    Digest address;
    std::string moduleName;
    Diagnostics diags;
    bool ok() const { return bytes.has_value(); }
};

SemaResult<TypedModule> elaborate_source(std::string_view source,
                                         const DeployedRegistry& registry);
BuildResult build_source(std::string_view source, const DeployedRegistry& registry);

std::optional<std::string> read_text_file(const std::string& path);

}  // namespace mandala
