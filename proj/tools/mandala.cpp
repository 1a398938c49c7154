// Command-line front end: check, compile, deploy, call, inspect, corpus.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mandala/pipeline.hpp"
#include "mandala/runtime.hpp"

namespace fs = std::filesystem;
using namespace mandala;

namespace {

struct Options {
    std::string storePath = "./store";
    std::string signer;
    uint64_t gas = 0;
    bool gasSet = false;
    bool machine = false;
};

int io_error(const std::string& what) {
    std::cerr << "io error: " << what << "\n";
    return 2;
}

Bytes read_binary(const std::string& path, bool& ok) {
    std::ifstream f(path, std::ios::binary);
    ok = bool(f);
    Bytes out;
    if (!ok) return out;
    f.seekg(0, std::ios::end);
    auto n = f.tellg();
    f.seekg(0);
    out.resize(size_t(n));
    f.read(reinterpret_cast<char*>(out.data()), n);
    return out;
}

int cmd_check(const Options& opt, const std::vector<std::string>& files) {
    Store store(opt.storePath);
    bool allOk = true;
    std::string firstCode;
    for (const auto& file : files) {
        auto text = read_text_file(file);
        if (!text) return io_error("cannot read " + file);
        auto sema = elaborate_source(*text, store);
        if (!sema.ok()) {
            allOk = false;
            for (const auto& d : sema.diags) {
                std::cerr << d.line(file) << "\n";
                if (firstCode.empty()) firstCode = d.code;
            }
        }
    }
    if (opt.machine) std::cout << (allOk ? "ok" : "error " + firstCode) << "\n";
    else if (allOk) std::cout << "ok: " << files.size() << " module(s) check\n";
    return allOk ? 0 : 1;
}

int cmd_compile(const Options& opt, const std::string& file, std::string outPath) {
    Store store(opt.storePath);
    auto text = read_text_file(file);
    if (!text) return io_error("cannot read " + file);
    auto built = build_source(*text, store);
    if (!built.ok()) {
        for (const auto& d : built.diags) std::cerr << d.line(file) << "\n";
        if (opt.machine) std::cout << "error " << built.diags.at(0).code << "\n";
        return 1;
    }
    if (outPath.empty()) outPath = fs::path(file).stem().string() + ".mdlc";
    std::ofstream out(outPath, std::ios::binary | std::ios::trunc);
    if (!out) return io_error("cannot write " + outPath);
    out.write(reinterpret_cast<const char*>(built.bytes->data()),
              std::streamsize(built.bytes->size()));
    if (opt.machine) std::cout << to_hex(built.address) << "\n";
    else
        std::cout << built.moduleName << " -> " << outPath << "\naddress " << to_hex(built.address)
                  << "\n";
    return 0;
}

int cmd_deploy(const Options& opt, const std::string& file) {
    Store store(opt.storePath);
    bool ok = false;
    Bytes bytes = read_binary(file, ok);
    if (!ok) return io_error("cannot read " + file);
    Engine engine(store);
    std::optional<std::string> signer;
    if (!opt.signer.empty()) signer = opt.signer;
    try {
        auto r = engine.deploy(bytes, signer);
        if (opt.machine)
            std::cout << to_hex(r.address) << " " << r.gasUsed << " " << r.gasBound << " "
                      << to_hex(r.stateDigest) << "\n";
        else
            std::cout << "deployed " << to_hex(r.address) << "\n  gas " << r.gasUsed << " of "
                      << r.gasBound << "\n  state " << to_hex(r.stateDigest) << "\n";
        return 0;
    } catch (const TxRejected& e) {
        std::cerr << "REJECT " << e.reason << " " << e.what() << "\n";
        if (opt.machine) std::cout << "reject " << e.reason << "\n";
        return 1;
    } catch (const DeployError& e) {
        std::cerr << "REJECT DeployError " << e.riskName << "\n";
        if (opt.machine) std::cout << "error " << e.riskName << "\n";
        return 1;
    } catch (const DuplicateModule&) {
        std::cerr << "REJECT DuplicateModule\n";
        if (opt.machine) std::cout << "reject DuplicateModule\n";
        return 1;
    }
}

std::optional<std::pair<Digest, std::string>> parse_target(const Store& store,
                                                           const std::string& target) {
    auto dot = target.rfind('.');
    if (dot == std::string::npos) return std::nullopt;
    std::string mod = target.substr(0, dot);
    std::string fn = target.substr(dot + 1);
    Digest addr;
    if (mod.size() == 64 && from_hex(mod, addr)) return std::make_pair(addr, fn);
    auto byName = store.address_of(mod);
    if (!byName) return std::nullopt;
    return std::make_pair(*byName, fn);
}

int cmd_call(const Options& opt, const std::string& target,
             const std::vector<std::string>& rest) {
    Store store(opt.storePath);
    auto parsed = parse_target(store, target);
    if (!parsed) {
        std::cerr << "unknown call target '" << target << "'\n";
        return 1;
    }
    std::vector<SemType> typeArgs;
    std::vector<Value> args;
    try {
        for (const auto& tok : rest) {
            if (tok.size() >= 2 && tok.front() == '[' && tok.back() == ']') {
                std::string inner = tok.substr(1, tok.size() - 2);
                size_t start = 0;
                while (start < inner.size()) {
                    auto comma = inner.find(',', start);
                    std::string one = inner.substr(
                        start, comma == std::string::npos ? std::string::npos
                                                          : comma - start);
                    while (!one.empty() && one.front() == ' ') one.erase(0, 1);
                    while (!one.empty() && one.back() == ' ') one.pop_back();
                    if (!one.empty()) typeArgs.push_back(parse_type_literal(one, store));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            } else {
                args.push_back(parse_value_literal(tok, store));
            }
        }
        Engine engine(store);
        std::optional<std::string> signer;
        if (!opt.signer.empty()) signer = opt.signer;
        std::optional<uint64_t> gas;
        if (opt.gasSet) gas = opt.gas;
        auto r = engine.call(parsed->first, parsed->second, typeArgs, std::move(args),
                             signer, gas);
        std::cout << r.line() << "\n";
        return r.ok ? 0 : 1;
    } catch (const TxRejected& e) {
        std::cerr << "REJECT " << e.reason << " " << e.what() << "\n";
        if (opt.machine) std::cout << "reject " << e.reason << "\n";
        return 1;
    }
}

int cmd_inspect(const Options& opt, const std::string& what) {
    Store store(opt.storePath);
    // val path: Module.valName
    auto dot = what.find('.');
    if (dot != std::string::npos && what.size() != 64) {
        auto addr = store.address_of(what.substr(0, dot));
        if (addr) {
            const auto* mod = store.module_at(*addr);
            int vi = mod->val_index(what.substr(dot + 1));
            if (vi >= 0) {
                auto bytes = store.get_val(*addr, uint32_t(vi));
                if (!bytes) {
                    std::cerr << "NotFound: val is not initialized\n";
                    return 1;
                }
                auto v = decode_value(*bytes);
                std::cout << render_value(*v, store) << "\n";
                return 0;
            }
        }
        std::cerr << "NotFound: " << what << "\n";
        return 1;
    }
    Digest d;
    if (what.size() == 64 && from_hex(what, d)) {
        if (const auto* mod = store.module_at(d)) {
            std::cout << "module " << mod->name << " @ " << what << "\n";
            for (const auto& t : mod->types) std::cout << "  type " << t.name << "\n";
            for (size_t i = 0; i < mod->functions.size(); i++)
                std::cout << "  fn " << mod->functions[i].name << " bound="
                          << store.function_bound(d, uint32_t(i)) << "\n";
            for (const auto& v : mod->vals) std::cout << "  val " << v.name << "\n";
            if (mod->init) std::cout << "  init\n";
            return 0;
        }
        if (auto cell = store.get_cell(d)) {
            auto v = decode_value(*cell);
            if (v) {
                std::cout << render_value(*v, store) << "\n";
                return 0;
            }
        }
        std::cerr << "NotFound: " << what << "\n";
        return 1;
    }
    if (auto addr = store.address_of(what)) {
        return cmd_inspect(opt, to_hex(*addr));
    }
    std::cerr << "NotFound: " << what << "\n";
    return 1;
}

int cmd_corpus(const Options& opt, const std::string& dir) {
    Store store(opt.storePath);
    Engine engine(store);
    std::string signer = opt.signer.empty() ? "alice" : opt.signer;
    const char* files[] = {"token.mdl", "purse.mdl", "purse_storage.mdl",
                           "my_fix_supply_token.mdl"};
    Digest storageAddr;
    for (const char* f : files) {
        auto text = read_text_file((fs::path(dir) / f).string());
        if (!text) return io_error(std::string("cannot read ") + f);
        auto built = build_source(*text, store);
        if (!built.ok()) {
            for (const auto& d : built.diags) std::cerr << d.line(f) << "\n";
            return 1;
        }
        try {
            auto r = engine.deploy(*built.bytes, signer);
            if (!opt.machine)
                std::cout << "deployed " << built.moduleName << " @ " << to_hex_short(r.address)
                          << " gas " << r.gasUsed << "/" << r.gasBound << "\n";
            if (built.moduleName == "PurseStorage") storageAddr = r.address;
        } catch (const DuplicateModule&) {
            std::cerr << "REJECT DuplicateModule for " << f << "\n";
            return 1;
        }
    }
    std::vector<Value> args;
    args.push_back(parse_value_literal("id:" + signer, store));
    args.push_back(parse_value_literal("id:bob", store));
    args.push_back(parse_value_literal("val:MyFixSupplyToken.defaultStore", store));
    args.push_back(parse_value_literal("uint:250", store));
    auto r = engine.call(storageAddr, "transfer", {parse_type_literal("MyToken", store)},
                         std::move(args), signer, std::nullopt);
    if (!opt.machine) std::cout << "transfer: " << r.line() << "\n";
    if (!opt.machine) {
        std::cout << "cells:\n";
        for (const auto& [key, bytes] : store.cells()) {
            auto v = decode_value(bytes);
            std::cout << "  " << to_hex_short(key) << " = "
                      << (v ? render_value(*v, store) : std::string("?")) << "\n";
        }
    }
    std::cout << (opt.machine ? to_hex(store.state_digest())
                              : "final state " + to_hex(store.state_digest()))
              << "\n";
    return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mandala smart-contract toolchain"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--store", opt.storePath, "store directory")->envname("MANDALA_STORE");
    app.add_option("--signer", opt.signer, "transaction signer name");
    auto* gasOpt = app.add_option("--gas", opt.gas, "gas limit for call");
    app.add_flag("--machine", opt.machine, "line-oriented machine output");

    std::vector<std::string> files;
    auto* check = app.add_subcommand("check", "elaborate modules against the store");
    check->add_option("files", files)->required();

    std::string compileFile, outPath;
    auto* comp = app.add_subcommand("compile", "compile a module to canonical bytecode");
    comp->add_option("file", compileFile)->required();
    comp->add_option("-o,--out", outPath, "output .mdlc path");

    std::string deployFile;
    auto* dep = app.add_subcommand("deploy", "validate and deploy compiled bytecode");
    dep->add_option("file", deployFile)->required();

    std::string target;
    std::vector<std::string> callArgs;
    auto* call = app.add_subcommand("call", "execute a public function");
    call->add_option("target", target, "Module.fn or <addr>.fn")->required();
    call->add_option("args", callArgs, "[TypeArgs] then value literals");

    std::string what;
    auto* insp = app.add_subcommand("inspect", "show a module, cell or val");
    insp->add_option("what", what)->required();

    std::string corpusDir = "corpus";
    auto* corp = app.add_subcommand("corpus", "deploy the token corpus and run a transfer");
    corp->add_option("--dir", corpusDir, "corpus directory");

    CLI11_PARSE(app, argc, argv);
    opt.gasSet = gasOpt->count() > 0;

    try {
        if (check->parsed()) return cmd_check(opt, files);
        if (comp->parsed()) return cmd_compile(opt, compileFile, outPath);
        if (dep->parsed()) return cmd_deploy(opt, deployFile);
        if (call->parsed()) return cmd_call(opt, target, callArgs);
        if (insp->parsed()) return cmd_inspect(opt, what);
        if (corp->parsed()) return cmd_corpus(opt, corpusDir);
    } catch (const StoreCorrupt& e) {
        std::cerr << "StoreCorrupt: " << e.what() << "\n";
        return 1;
    } catch (const InternalFault& e) {
        std::cerr << "InternalFault: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
