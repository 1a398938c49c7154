#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mandala/bytecode.hpp"
#include "mandala/digest.hpp"

namespace mandala {

// Read-only view over the deployed universe. Inside a stored module the
// zero digest means "that module itself"; helpers here normalize.
inline Digest resolve_owner(const Digest& m, const Digest& self) {
    return m.is_zero() ? self : m;
}

SemType absolutize(const SemType& t, const Digest& self);
RiskRef absolutize(const RiskRef& r, const Digest& self);
CapRef absolutize(const CapRef& c, const Digest& self);

struct DefaultEntry {
    Digest module;
    uint32_t fnIndex = 0;
};

class DeployedRegistry {
public:
    virtual ~DeployedRegistry() = default;
    virtual const BytecodeModule* module_at(const Digest& addr) const = 0;
    virtual std::optional<Digest> address_of(const std::string& name) const = 0;
    virtual std::optional<DefaultEntry> default_for(const Digest& typeModule,
                                                    uint32_t typeIndex) const = 0;
    // Gas bound attached at validation; functions of deployed modules
    // always have one.
    virtual uint64_t function_bound(const Digest& addr, uint32_t fnIndex) const = 0;
    virtual std::vector<Digest> addresses() const = 0;
};

// In-memory registry used by the toolchain front end and tests.
class MemoryRegistry : public DeployedRegistry {
public:
    // Registers a verified module. Fails (returns false) on a duplicate
    // default-value provider for a type that already has one.
    bool add(const Digest& addr, BytecodeModule module, std::vector<uint64_t> bounds,
             std::string* whyNot = nullptr);

    const BytecodeModule* module_at(const Digest& addr) const override;
    std::optional<Digest> address_of(const std::string& name) const override;
    std::optional<DefaultEntry> default_for(const Digest& typeModule,
                                            uint32_t typeIndex) const override;
    uint64_t function_bound(const Digest& addr, uint32_t fnIndex) const override;
    std::vector<Digest> addresses() const override;

    bool contains(const Digest& addr) const { return modules_.count(addr) != 0; }

private:
    struct Entry {
        BytecodeModule module;
        std::vector<uint64_t> bounds;
    };
    std::map<Digest, Entry> modules_;
    std::map<std::string, Digest> byName_;
    std::map<std::pair<Digest, uint32_t>, DefaultEntry> defaults_;
};

}  // namespace mandala
