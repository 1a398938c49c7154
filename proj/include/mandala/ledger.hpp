#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>

#include "mandala/registry.hpp"
#include "mandala/value.hpp"

namespace mandala {

struct StoreCorrupt : std::runtime_error {
    explicit StoreCorrupt(const std::string& what) : std::runtime_error(what) {}
};

// Persistent world state. An append-only write-ahead log holds one record
// per committed transaction; a periodic snapshot bounds replay. One writer
// per store path (advisory lock); the genesis digest of an empty store is
// fixed.
//
// Layout: modules/<address>.mdlc, wal.log, snapshot.bin, manifest.txt, LOCK
class Store : public DeployedRegistry {
public:
    explicit Store(const std::filesystem::path& path);  // throws StoreCorrupt
    ~Store() override;

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // --- transaction scope (no nesting) ---
    void begin();
    void commit();
    void abort();
    bool in_tx() const { return inTx_; }

    // staged world access; reads see the overlay first
    std::optional<Bytes> get_cell(const Digest& key) const;
    void put_cell(const Digest& key, Bytes value);
    void rollback_cell(const Digest& key, const std::optional<Bytes>& prev);
    std::optional<Bytes> get_val(const Digest& module, uint32_t idx) const;
    void put_val(const Digest& module, uint32_t idx, Bytes value);
    bool put_module(const Digest& addr, Bytes bytes, BytecodeModule decoded,
                    std::vector<uint64_t> bounds, std::string* whyNot = nullptr);

    uint64_t committed_tx_count() const { return txCount_; }

    // --- committed state ---
    Digest state_digest() const;
    std::vector<std::pair<Digest, Bytes>> cells() const;
    const std::map<std::string, Digest>& manifest() const { return byName_; }

    // --- DeployedRegistry ---
    const BytecodeModule* module_at(const Digest& addr) const override;
    std::optional<Digest> address_of(const std::string& name) const override;
    std::optional<DefaultEntry> default_for(const Digest& typeModule,
                                            uint32_t typeIndex) const override;
    uint64_t function_bound(const Digest& addr, uint32_t fnIndex) const override;
    std::vector<Digest> addresses() const override;

    // test hook: snapshot immediately
    void snapshot_now();

private:
    struct ModuleEntry {
        Bytes bytes;
        BytecodeModule decoded;
        std::vector<uint64_t> bounds;
    };

    std::filesystem::path dir_;
    int lockFd_ = -1;

    // committed state
    std::map<Digest, ModuleEntry> modules_;
    std::map<std::string, Digest> byName_;
    std::map<Digest, Bytes> cells_;
    std::map<std::pair<Digest, uint32_t>, Bytes> vals_;
    std::map<std::pair<Digest, uint32_t>, DefaultEntry> defaults_;
    uint64_t txCount_ = 0;
    uint64_t walSeq_ = 0;
    uint64_t commitsSinceSnapshot_ = 0;

    // transaction overlay
    bool inTx_ = false;
    std::map<Digest, Bytes> stagedCells_;
    std::map<Digest, bool> stagedCellErased_;
    std::map<std::pair<Digest, uint32_t>, Bytes> stagedVals_;
    std::map<Digest, ModuleEntry> stagedModules_;

    void load();
    void replay_wal(uint64_t fromOffset);
    Bytes build_record_payload() const;
    void apply_payload(const Bytes& payload, size_t at);
    void register_defaults(const Digest& addr, const BytecodeModule& m);
    void write_snapshot();
};

}  // namespace mandala
