#include "mandala/ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace mandala {

namespace fs = std::filesystem;

namespace {

constexpr uint32_t kRecMagic = 0x4345524du;  // "MREC"
constexpr uint32_t kSnapMagic = 0x504e534du;      // 'MSNP'
constexpr uint64_t kSnapshotEvery = 16;

void put_u32(Bytes& b, uint32_t v) {
    for (int i = 0; i < 4; i++) b.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(Bytes& b, uint64_t v) {
    for (int i = 0; i < 8; i++) b.push_back(uint8_t(v >> (8 * i)));
}
void put_digest(Bytes& b, const Digest& d) {
    b.insert(b.end(), d.bytes.begin(), d.bytes.end());
}
void put_bytes(Bytes& b, const Bytes& v) {
    put_u32(b, uint32_t(v.size()));
    b.insert(b.end(), v.begin(), v.end());
}
void put_str(Bytes& b, const std::string& s) {
    put_u32(b, uint32_t(s.size()));
    b.insert(b.end(), s.begin(), s.end());
}

struct SReader {
    const Bytes& b;
    size_t i = 0;

    void need(size_t n) const {
        if (b.size() - i < n) throw StoreCorrupt("truncated store data");
    }
    uint8_t u8() {
        need(1);
        return b[i++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int k = 0; k < 4; k++) v |= uint32_t(b[i + k]) << (8 * k);
        i += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int k = 0; k < 8; k++) v |= uint64_t(b[i + k]) << (8 * k);
        i += 8;
        return v;
    }
    Digest digest() {
        need(32);
        Digest d;
        std::memcpy(d.bytes.data(), b.data() + i, 32);
        i += 32;
        return d;
    }
    Bytes bytes() {
        uint32_t n = u32();
        need(n);
        Bytes v(b.begin() + i, b.begin() + i + n);
        i += n;
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(b.data() + i), n);
        i += n;
        return s;
    }
};

Digest record_checksum(uint64_t seq, const Bytes& payload) {
    Hasher h;
    h.update("mandala-wal-record");
    h.update_u64(seq);
    h.update(payload.data(), payload.size());
    return h.finish();
}

Bytes read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    Bytes out;
    if (!f) return out;
    f.seekg(0, std::ios::end);
    auto n = f.tellg();
    f.seekg(0);
    out.resize(size_t(n));
    f.read(reinterpret_cast<char*>(out.data()), n);
    return out;
}

void append_file(const fs::path& p, const Bytes& data) {
    std::ofstream f(p, std::ios::binary | std::ios::app);
    f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    f.flush();
}

void write_file(const fs::path& p, const Bytes& data) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
        f.flush();
    }
    fs::rename(tmp, p);
}

}  // namespace

Store::Store(const fs::path& path) : dir_(path) {
    fs::create_directories(dir_ / "modules");
    lockFd_ = ::open((dir_ / "LOCK").c_str(), O_CREAT | O_RDWR, 0644);
    if (lockFd_ < 0 || flock(lockFd_, LOCK_EX | LOCK_NB) != 0)
        throw StoreCorrupt("store is locked by another process");
    load();
}

Store::~Store() {
    if (lockFd_ >= 0) {
        flock(lockFd_, LOCK_UN);
        ::close(lockFd_);
    }
}

void Store::register_defaults(const Digest& addr, const BytecodeModule& m) {
    for (size_t i = 0; i < m.functions.size(); i++)
        if (m.functions[i].defaultFor != UINT32_MAX)
            defaults_[{addr, m.functions[i].defaultFor}] =
                DefaultEntry{addr, uint32_t(i)};
}

void Store::load() {
    uint64_t walFrom = 0;
    Bytes snap = read_file(dir_ / "snapshot.bin");
    if (!snap.empty()) {
        if (snap.size() < 36) throw StoreCorrupt("snapshot too short");
        Digest stored;
        std::memcpy(stored.bytes.data(), snap.data() + snap.size() - 32, 32);
        Bytes content(snap.begin(), snap.end() - 32);
        if (!(sha256(content) == stored)) throw StoreCorrupt("snapshot checksum mismatch");
        SReader r{content};
        if (r.u32() != kSnapMagic) throw StoreCorrupt("snapshot has a bad magic");
        txCount_ = r.u64();
        walSeq_ = r.u64();
        walFrom = r.u64();
        uint32_t nm = r.u32();
        for (uint32_t i = 0; i < nm; i++) {
            Digest addr = r.digest();
            Bytes bytes = r.bytes();
            uint32_t nb = r.u32();
            std::vector<uint64_t> bounds;
            for (uint32_t j = 0; j < nb; j++) bounds.push_back(r.u64());
            auto dec = decode(bytes);
            auto* mod = std::get_if<BytecodeModule>(&dec);
            if (!mod) throw StoreCorrupt("snapshot holds an undecodable module");
            byName_[mod->name] = addr;
            register_defaults(addr, *mod);
            modules_.emplace(addr, ModuleEntry{std::move(bytes), std::move(*mod),
                                               std::move(bounds)});
        }
        uint32_t nc = r.u32();
        for (uint32_t i = 0; i < nc; i++) {
            Digest key = r.digest();
            cells_[key] = r.bytes();
        }
        uint32_t nv = r.u32();
        for (uint32_t i = 0; i < nv; i++) {
            Digest mod = r.digest();
            uint32_t idx = r.u32();
            vals_[{mod, idx}] = r.bytes();
        }
        if (r.i != content.size()) throw StoreCorrupt("snapshot has trailing bytes");
    }
    replay_wal(walFrom);
}

void Store::replay_wal(uint64_t fromOffset) {
    Bytes wal = read_file(dir_ / "wal.log");
    if (wal.size() < fromOffset)
        throw StoreCorrupt("log shorter than the snapshot watermark");
    size_t i = fromOffset;
    while (i < wal.size()) {
        // header: magic u32, seq u64, len u32, payload, checksum 32
        if (wal.size() - i < 16) return;  // torn tail
        uint32_t magic = 0;
        for (int k = 0; k < 4; k++) magic |= uint32_t(wal[i + k]) << (8 * k);
        if (magic != kRecMagic) throw StoreCorrupt("log record has a bad magic");
        uint64_t seq = 0;
        for (int k = 0; k < 8; k++) seq |= uint64_t(wal[i + 4 + k]) << (8 * k);
        uint32_t len = 0;
        for (int k = 0; k < 4; k++) len |= uint32_t(wal[i + 12 + k]) << (8 * k);
        if (wal.size() - i - 16 < uint64_t(len) + 32) return;  // torn tail
        Bytes payload(wal.begin() + i + 16, wal.begin() + i + 16 + len);
        Digest stored;
        std::memcpy(stored.bytes.data(), wal.data() + i + 16 + len, 32);
        if (!(record_checksum(seq, payload) == stored))
            throw StoreCorrupt("log record checksum mismatch");
        if (seq != walSeq_ + 1) throw StoreCorrupt("log sequence gap");
        apply_payload(payload, i);
        walSeq_ = seq;
        i += 16 + len + 32;
    }
}

void Store::apply_payload(const Bytes& payload, size_t) {
    SReader r{payload};
    txCount_ = r.u64();
    uint32_t nm = r.u32();
    for (uint32_t i = 0; i < nm; i++) {
        Digest addr = r.digest();
        Bytes bytes = r.bytes();
        uint32_t nb = r.u32();
        std::vector<uint64_t> bounds;
        for (uint32_t j = 0; j < nb; j++) bounds.push_back(r.u64());
        auto dec = decode(bytes);
        auto* mod = std::get_if<BytecodeModule>(&dec);
        if (!mod) throw StoreCorrupt("log holds an undecodable module");
        byName_[mod->name] = addr;
        register_defaults(addr, *mod);
        modules_.emplace(addr,
                         ModuleEntry{std::move(bytes), std::move(*mod), std::move(bounds)});
    }
    uint32_t nc = r.u32();
    for (uint32_t i = 0; i < nc; i++) {
        Digest key = r.digest();
        cells_[key] = r.bytes();
    }
    uint32_t nv = r.u32();
    for (uint32_t i = 0; i < nv; i++) {
        Digest mod = r.digest();
        uint32_t idx = r.u32();
        vals_[{mod, idx}] = r.bytes();
    }
}

void Store::begin() {
    if (inTx_) throw StoreCorrupt("nested transaction");
    inTx_ = true;
    stagedCells_.clear();
    stagedCellErased_.clear();
    stagedVals_.clear();
    stagedModules_.clear();
}

void Store::abort() {
    inTx_ = false;
    stagedCells_.clear();
    stagedCellErased_.clear();
    stagedVals_.clear();
    stagedModules_.clear();
}

Bytes Store::build_record_payload() const {
    Bytes p;
    put_u64(p, txCount_ + 1);
    put_u32(p, uint32_t(stagedModules_.size()));
    for (const auto& [addr, me] : stagedModules_) {
        put_digest(p, addr);
        put_bytes(p, me.bytes);
        put_u32(p, uint32_t(me.bounds.size()));
        for (auto b : me.bounds) put_u64(p, b);
    }
    // net cell writes only
    std::vector<std::pair<Digest, const Bytes*>> net;
    for (const auto& [k, v] : stagedCells_) {
        auto it = cells_.find(k);
        if (it != cells_.end() && it->second == v) continue;
        net.push_back({k, &v});
    }
    put_u32(p, uint32_t(net.size()));
    for (const auto& [k, v] : net) {
        put_digest(p, k);
        put_bytes(p, *v);
    }
    put_u32(p, uint32_t(stagedVals_.size()));
    for (const auto& [key, v] : stagedVals_) {
        put_digest(p, key.first);
        put_u32(p, key.second);
        put_bytes(p, v);
    }
    return p;
}

void Store::commit() {
    if (!inTx_) throw StoreCorrupt("commit outside a transaction");
    Bytes payload = build_record_payload();
    uint64_t seq = walSeq_ + 1;
    Bytes rec;
    put_u32(rec, kRecMagic);
    put_u64(rec, seq);
    put_u32(rec, uint32_t(payload.size()));
    rec.insert(rec.end(), payload.begin(), payload.end());
    put_digest(rec, record_checksum(seq, payload));
    append_file(dir_ / "wal.log", rec);
    walSeq_ = seq;
    apply_payload(payload, 0);

    for (const auto& [addr, me] : stagedModules_) {
        write_file(dir_ / "modules" / (to_hex(addr) + ".mdlc"), me.bytes);
    }
    if (!stagedModules_.empty()) {
        std::string mf;
        for (const auto& [name, addr] : byName_) mf += name + " " + to_hex(addr) + "\n";
        Bytes b(mf.begin(), mf.end());
        write_file(dir_ / "manifest.txt", b);
    }
    abort();  // clears the overlay
    if (++commitsSinceSnapshot_ >= kSnapshotEvery) write_snapshot();
}

void Store::write_snapshot() {
    commitsSinceSnapshot_ = 0;
    Bytes c;
    put_u32(c, kSnapMagic);
    put_u64(c, txCount_);
    put_u64(c, walSeq_);
    put_u64(c, uint64_t(fs::exists(dir_ / "wal.log") ? fs::file_size(dir_ / "wal.log") : 0));
    put_u32(c, uint32_t(modules_.size()));
    for (const auto& [addr, me] : modules_) {
        put_digest(c, addr);
        put_bytes(c, me.bytes);
        put_u32(c, uint32_t(me.bounds.size()));
        for (auto b : me.bounds) put_u64(c, b);
    }
    put_u32(c, uint32_t(cells_.size()));
    for (const auto& [k, v] : cells_) {
        put_digest(c, k);
        put_bytes(c, v);
    }
    put_u32(c, uint32_t(vals_.size()));
    for (const auto& [key, v] : vals_) {
        put_digest(c, key.first);
        put_u32(c, key.second);
        put_bytes(c, v);
    }
    Digest sum = sha256(c);
    put_digest(c, sum);
    write_file(dir_ / "snapshot.bin", c);
}

void Store::snapshot_now() { write_snapshot(); }

std::optional<Bytes> Store::get_cell(const Digest& key) const {
    if (inTx_) {
        if (stagedCellErased_.count(key)) return std::nullopt;
        auto it = stagedCells_.find(key);
        if (it != stagedCells_.end()) return it->second;
    }
    auto it = cells_.find(key);
    if (it == cells_.end()) return std::nullopt;
    return it->second;
}

void Store::put_cell(const Digest& key, Bytes value) {
    stagedCellErased_.erase(key);
    stagedCells_[key] = std::move(value);
}

void Store::rollback_cell(const Digest& key, const std::optional<Bytes>& prev) {
    if (prev) {
        stagedCellErased_.erase(key);
        stagedCells_[key] = *prev;
    } else {
        stagedCells_.erase(key);
        if (cells_.count(key)) stagedCellErased_[key] = true;
    }
}

std::optional<Bytes> Store::get_val(const Digest& module, uint32_t idx) const {
    if (inTx_) {
        auto it = stagedVals_.find({module, idx});
        if (it != stagedVals_.end()) return it->second;
    }
    auto it = vals_.find({module, idx});
    if (it == vals_.end()) return std::nullopt;
    return it->second;
}

void Store::put_val(const Digest& module, uint32_t idx, Bytes value) {
    stagedVals_[{module, idx}] = std::move(value);
}

bool Store::put_module(const Digest& addr, Bytes bytes, BytecodeModule decoded,
                       std::vector<uint64_t> bounds, std::string* whyNot) {
    if (modules_.count(addr) || stagedModules_.count(addr)) {
        if (whyNot) *whyNot = "module already deployed";
        return false;
    }
    for (size_t i = 0; i < decoded.functions.size(); i++) {
        if (decoded.functions[i].defaultFor == UINT32_MAX) continue;
        if (defaults_.count({addr, decoded.functions[i].defaultFor})) {
            if (whyNot) *whyNot = "duplicate default provider";
            return false;
        }
    }
    stagedModules_.emplace(addr,
                           ModuleEntry{std::move(bytes), std::move(decoded), std::move(bounds)});
    return true;
}

Digest Store::state_digest() const {
    Hasher h;
    h.update("mandala-state-v1");
    h.update_u64(modules_.size());
    for (const auto& [addr, me] : modules_) {
        h.update(addr);
        h.update(sha256(me.bytes));
    }
    h.update_u64(cells_.size());
    for (const auto& [k, v] : cells_) {
        h.update(k);
        h.update(sha256(v));
    }
    h.update_u64(vals_.size());
    for (const auto& [key, v] : vals_) {
        h.update(key.first);
        h.update_u32(key.second);
        h.update(sha256(v));
    }
    return h.finish();
}

std::vector<std::pair<Digest, Bytes>> Store::cells() const {
    std::vector<std::pair<Digest, Bytes>> out;
    for (const auto& [k, v] : cells_) out.push_back({k, v});
    return out;
}

const BytecodeModule* Store::module_at(const Digest& addr) const {
    if (inTx_) {
        auto it = stagedModules_.find(addr);
        if (it != stagedModules_.end()) return &it->second.decoded;
    }
    auto it = modules_.find(addr);
    return it == modules_.end() ? nullptr : &it->second.decoded;
}

std::optional<Digest> Store::address_of(const std::string& name) const {
    if (inTx_) {
        for (const auto& [addr, me] : stagedModules_)
            if (me.decoded.name == name) return addr;
    }
    auto it = byName_.find(name);
    if (it == byName_.end()) return std::nullopt;
    return it->second;
}

std::optional<DefaultEntry> Store::default_for(const Digest& typeModule,
                                               uint32_t typeIndex) const {
    if (inTx_) {
        for (const auto& [addr, me] : stagedModules_)
            for (size_t i = 0; i < me.decoded.functions.size(); i++)
                if (me.decoded.functions[i].defaultFor == typeIndex && addr == typeModule)
                    return DefaultEntry{addr, uint32_t(i)};
    }
    auto it = defaults_.find({typeModule, typeIndex});
    if (it == defaults_.end()) return std::nullopt;
    return it->second;
}

uint64_t Store::function_bound(const Digest& addr, uint32_t fnIndex) const {
    if (inTx_) {
        auto it = stagedModules_.find(addr);
        if (it != stagedModules_.end())
            return fnIndex < it->second.bounds.size() ? it->second.bounds[fnIndex] : 0;
    }
    auto it = modules_.find(addr);
    if (it == modules_.end() || fnIndex >= it->second.bounds.size()) return 0;
    return it->second.bounds[fnIndex];
}

std::vector<Digest> Store::addresses() const {
    std::vector<Digest> out;
    for (const auto& [addr, _] : modules_) out.push_back(addr);
    return out;
}

}  // namespace mandala
