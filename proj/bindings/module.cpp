// Python bindings over the toolchain: parse/print, check, compile,
// deploy, call and inspection against a store directory.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mandala/pipeline.hpp"
#include "mandala/runtime.hpp"

namespace py = pybind11;
using namespace mandala;

namespace {

std::vector<std::string> check_source_py(const std::string& source,
                                         const std::string& storePath) {
    Store store(storePath);
    auto sema = elaborate_source(source, store);
    std::vector<std::string> out;
    for (const auto& d : sema.diags) out.push_back(d.line("<source>"));
    return out;
}

py::tuple compile_source_py(const std::string& source, const std::string& storePath) {
    Store store(storePath);
    auto built = build_source(source, store);
    if (!built.ok()) {
        std::string msg;
        for (const auto& d : built.diags) msg += d.line("<source>") + "\n";
        throw std::runtime_error(msg);
    }
    return py::make_tuple(py::bytes(std::string(built.bytes->begin(), built.bytes->end())),
                          to_hex(built.address));
}

py::dict deploy_py(const py::bytes& bytecode, const std::string& storePath,
                   const std::optional<std::string>& signer) {
    Store store(storePath);
    Engine engine(store);
    std::string raw = bytecode;
    Bytes bytes(raw.begin(), raw.end());
    auto r = engine.deploy(bytes, signer);
    py::dict out;
    out["address"] = to_hex(r.address);
    out["gas_used"] = r.gasUsed;
    out["gas_bound"] = r.gasBound;
    out["state_digest"] = to_hex(r.stateDigest);
    return out;
}

py::dict call_py(const std::string& storePath, const std::string& target,
                 const std::vector<std::string>& typeArgs,
                 const std::vector<std::string>& args,
                 const std::optional<std::string>& signer,
                 const std::optional<uint64_t>& gasLimit) {
    Store store(storePath);
    auto dot = target.rfind('.');
    if (dot == std::string::npos) throw std::runtime_error("target is Module.fn");
    auto addr = store.address_of(target.substr(0, dot));
    if (!addr) throw std::runtime_error("unknown module");
    std::vector<SemType> targs;
    for (const auto& t : typeArgs) targs.push_back(parse_type_literal(t, store));
    std::vector<Value> values;
    for (const auto& a : args) values.push_back(parse_value_literal(a, store));
    Engine engine(store);
    auto r = engine.call(*addr, target.substr(dot + 1), targs, std::move(values), signer,
                         gasLimit);
    py::dict out;
    out["ok"] = r.ok;
    out["status"] = r.status();
    out["risk"] = r.riskName;
    out["gas_used"] = r.gasUsed;
    out["gas_bound"] = r.gasBound;
    out["state_digest"] = to_hex(r.stateDigest);
    out["value"] = r.returnRendering;
    out["line"] = r.line();
    return out;
}

std::string pretty_print_py(const std::string& source) {
    auto parsed = parse_source(source);
    if (!parsed.ok()) {
        std::string msg;
        for (const auto& d : parsed.diags) msg += d.line("<source>") + "\n";
        throw std::runtime_error(msg);
    }
    return pretty_print(*parsed.module);
}

std::string state_digest_py(const std::string& storePath) {
    Store store(storePath);
    return to_hex(store.state_digest());
}

py::list cells_py(const std::string& storePath) {
    Store store(storePath);
    py::list out;
    for (const auto& [key, bytes] : store.cells()) {
        auto v = decode_value(bytes);
        out.append(py::make_tuple(to_hex(key),
                                  v ? render_value(*v, store) : std::string("?")));
    }
    return out;
}

py::list tokenize_py(const std::string& source) {
    auto r = tokenize(source);
    py::list out;
    if (!r.ok()) throw std::runtime_error(r.error->message);
    for (const auto& t : r.stream->tokens) {
        if (t.kind == TokK::End) break;
        const char* kind = t.kind == TokK::Keyword  ? "keyword"
                           : t.kind == TokK::Ident  ? "ident"
                           : t.kind == TokK::UIntLit ? "uint"
                           : t.kind == TokK::IntLit ? "int"
                                                    : "punct";
        out.append(py::make_tuple(kind, t.text, t.pos.line, t.pos.column));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_mandala, m) {
    m.doc() = "mandala smart-contract toolchain";
    m.def("tokenize", &tokenize_py, py::arg("source"));
    m.def("pretty_print", &pretty_print_py, py::arg("source"));
    m.def("check", &check_source_py, py::arg("source"), py::arg("store"),
          "Elaborates a module; returns diagnostics (empty when clean).");
    m.def("compile", &compile_source_py, py::arg("source"), py::arg("store"),
          "Compiles a module; returns (bytecode, address).");
    m.def("deploy", &deploy_py, py::arg("bytecode"), py::arg("store"),
          py::arg("signer") = std::nullopt);
    m.def("call", &call_py, py::arg("store"), py::arg("target"),
          py::arg("type_args") = std::vector<std::string>{},
          py::arg("args") = std::vector<std::string>{},
          py::arg("signer") = std::nullopt, py::arg("gas_limit") = std::nullopt);
    m.def("state_digest", &state_digest_py, py::arg("store"));
    m.def("cells", &cells_py, py::arg("store"));
}
