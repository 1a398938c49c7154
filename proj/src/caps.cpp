#include "mandala/caps.hpp"

#include <algorithm>

namespace mandala {

const char* builtin_cap_name(BuiltinCap c) {
    switch (c) {
        case BuiltinCap::Drop: return "Drop";
        case BuiltinCap::Copy: return "Copy";
        case BuiltinCap::Persist: return "Persist";
        case BuiltinCap::Modify: return "Modify";
        case BuiltinCap::Inspect: return "Inspect";
        case BuiltinCap::Master: return "Master";
    }
    return "?";
}

std::optional<BuiltinCap> builtin_cap_by_name(const std::string& name) {
    if (name == "Drop") return BuiltinCap::Drop;
    if (name == "Copy") return BuiltinCap::Copy;
    if (name == "Persist") return BuiltinCap::Persist;
    if (name == "Modify") return BuiltinCap::Modify;
    if (name == "Inspect") return BuiltinCap::Inspect;
    if (name == "Master") return BuiltinCap::Master;
    return std::nullopt;
}

CapSet CapSet::of(std::initializer_list<BuiltinCap> caps) {
    CapSet s;
    for (auto c : caps) s.add(c);
    return s;
}

bool CapSet::has(const UserCap& c) const {
    return std::binary_search(user_.begin(), user_.end(), c);
}

void CapSet::add(const UserCap& c) {
    auto it = std::lower_bound(user_.begin(), user_.end(), c);
    if (it == user_.end() || *it != c) user_.insert(it, c);
}

void CapSet::remove(const UserCap& c) {
    auto it = std::lower_bound(user_.begin(), user_.end(), c);
    if (it != user_.end() && *it == c) user_.erase(it);
}

bool CapSet::covers(const CapSet& required) const {
    if ((mask_ & required.mask_) != required.mask_) return false;
    for (const auto& u : required.user_)
        if (!has(u)) return false;
    return true;
}

CapSet CapSet::intersect(const CapSet& other) const {
    CapSet out;
    out.mask_ = mask_ & other.mask_;
    for (const auto& u : user_)
        if (other.has(u)) out.user_.push_back(u);
    return out;
}

CapSet CapSet::unite(const CapSet& other) const {
    CapSet out = *this;
    out.mask_ |= other.mask_;
    for (const auto& u : other.user_) out.add(u);
    return out;
}

}  // namespace mandala
