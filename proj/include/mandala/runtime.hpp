#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "mandala/ledger.hpp"
#include "mandala/validator.hpp"
#include "mandala/value.hpp"

namespace mandala {

struct TransactionReceipt {
    bool ok = true;
    std::string riskName;  // set when !ok
    uint64_t gasUsed = 0;
    uint64_t gasBound = 0;
    Digest stateDigest;
    std::string returnRendering = "()";

    std::string status() const { return ok ? "ok" : "error:" + riskName; }
    // `status gasUsed gasBound digest return`
    std::string line() const;
};

// Pre-execution rejection: the state is untouched.
struct TxRejected : std::runtime_error {
    std::string reason;  // MissingSigner, InsufficientGasLimit, TypeMismatch, ...
    TxRejected(std::string r, const std::string& detail)
        : std::runtime_error(r + ": " + detail), reason(std::move(r)) {}
};

// A risk failure during deployment discards the whole deployment.
struct DeployError : std::runtime_error {
    std::string riskName;
    explicit DeployError(const std::string& risk)
        : std::runtime_error("deployment failed with " + risk), riskName(risk) {}
};

struct DuplicateModule : std::runtime_error {
    DuplicateModule() : std::runtime_error("module already deployed") {}
};

// Raised only when a validator-accepted module misbehaves dynamically;
// any occurrence is a soundness bug and fails the test suite.
struct InternalFault : std::runtime_error {
    explicit InternalFault(const std::string& what) : std::runtime_error(what) {}
};

struct RuntimeCounters {
    uint64_t reentrancyFaults = 0;
    uint64_t effectGuardFaults = 0;
    uint64_t mirrorFaults = 0;  // dynamic copy/drop/persist assertions

    uint64_t total() const { return reentrancyFaults + effectGuardFaults + mirrorFaults; }
};

struct DeployResult {
    Digest address;
    uint64_t gasUsed = 0;
    uint64_t gasBound = 0;
    Digest stateDigest;
};

class Engine {
public:
    explicit Engine(Store& store, const CostTable& table = CostTable::v1())
        : store_(store), table_(table) {}

    // Validates, runs vals and init, and registers the module atomically.
    DeployResult deploy(const Bytes& bytes, const std::optional<std::string>& signer);

    TransactionReceipt call(const Digest& module, const std::string& function,
                            std::vector<SemType> typeArgs, std::vector<Value> args,
                            const std::optional<std::string>& signer,
                            std::optional<uint64_t> gasLimit);

    const RuntimeCounters& counters() const { return counters_; }
    Store& store() { return store_; }

    // digest("external:" || name); what --signer asserts control of
    static Digest external_id(const std::string& name);
    static Digest cell_key(const Digest& context, const Digest& id);

private:
    Store& store_;
    const CostTable& table_;
    RuntimeCounters counters_;
};

// Textual transaction argument forms: uint:5, int:-3, id:alice,
// val:<Module>.<val>, unit.
Value parse_value_literal(const std::string& text, const Store& store);

// Type argument literals for calls: UInt, Int, Unit, ID, <TypeName> or
// <Module>.<TypeName> over the deployed universe.
SemType parse_type_literal(const std::string& text, const Store& store);

}  // namespace mandala
