#include "mandala/registry.hpp"

namespace mandala {

SemType absolutize(const SemType& t, const Digest& self) {
    SemType out = t;
    if (out.kind == TypeK::Adt) out.module = resolve_owner(out.module, self);
    CapSet caps;
    for (int bit = 0; bit < 6; bit++)
        if (out.caps.builtin_mask() & (1 << bit)) caps.add(BuiltinCap(1 << bit));
    for (auto u : out.caps.user()) {
        u.module = resolve_owner(u.module, self);
        caps.add(u);
    }
    out.caps = caps;
    for (auto& a : out.args) a = absolutize(a, self);
    return out;
}

RiskRef absolutize(const RiskRef& r, const Digest& self) {
    RiskRef out = r;
    if (!out.builtin) out.module = resolve_owner(out.module, self);
    return out;
}

CapRef absolutize(const CapRef& c, const Digest& self) {
    CapRef out = c;
    if (!out.builtin) out.module = resolve_owner(out.module, self);
    return out;
}

bool MemoryRegistry::add(const Digest& addr, BytecodeModule module,
                         std::vector<uint64_t> bounds, std::string* whyNot) {
    if (modules_.count(addr)) {
        if (whyNot) *whyNot = "module already deployed";
        return false;
    }
    for (size_t i = 0; i < module.functions.size(); i++) {
        const auto& f = module.functions[i];
        if (f.defaultFor == UINT32_MAX) continue;
        auto key = std::make_pair(addr, f.defaultFor);
        if (defaults_.count(key)) {
            if (whyNot) *whyNot = "duplicate default for type";
            return false;
        }
        defaults_[key] = DefaultEntry{addr, uint32_t(i)};
    }
    byName_[module.name] = addr;
    modules_.emplace(addr, Entry{std::move(module), std::move(bounds)});
    return true;
}

const BytecodeModule* MemoryRegistry::module_at(const Digest& addr) const {
    auto it = modules_.find(addr);
    return it == modules_.end() ? nullptr : &it->second.module;
}

uint64_t MemoryRegistry::function_bound(const Digest& addr, uint32_t fnIndex) const {
    auto it = modules_.find(addr);
    if (it == modules_.end() || fnIndex >= it->second.bounds.size()) return 0;
    return it->second.bounds[fnIndex];
}

std::optional<Digest> MemoryRegistry::address_of(const std::string& name) const {
    auto it = byName_.find(name);
    if (it == byName_.end()) return std::nullopt;
    return it->second;
}

std::optional<DefaultEntry> MemoryRegistry::default_for(const Digest& typeModule,
                                                        uint32_t typeIndex) const {
    auto it = defaults_.find({typeModule, typeIndex});
    if (it == defaults_.end()) return std::nullopt;
    return it->second;
}

std::vector<Digest> MemoryRegistry::addresses() const {
    std::vector<Digest> out;
    for (const auto& [addr, _] : modules_) out.push_back(addr);
    return out;
}

}  // namespace mandala
