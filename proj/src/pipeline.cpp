#include "mandala/pipeline.hpp"

#include <fstream>
#include <sstream>

namespace mandala {

SemaResult<TypedModule> elaborate_source(std::string_view source,
                                         const DeployedRegistry& registry) {
    SemaResult<TypedModule> out;
    auto parsed = parse_source(source);
    if (!parsed.ok()) {
        out.diags = std::move(parsed.diags);
        return out;
    }
    return elaborate(std::move(*parsed.module), registry);
}

BuildResult build_source(std::string_view source, const DeployedRegistry& registry) {
    BuildResult out;
    auto sema = elaborate_source(source, registry);
    if (!sema.ok()) {
        out.diags = std::move(sema.diags);
        return out;
    }
    out.moduleName = sema.value->name;
    Bytes bytes = encode(compile(*sema.value));
    out.address = module_address(bytes);
    out.bytes = std::move(bytes);
    return out;
}

std::optional<std::string> read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace mandala
