#include "mandala/runtime.hpp"

#include <algorithm>
#include <cassert>

namespace mandala {

std::string TransactionReceipt::line() const {
    return status() + " " + std::to_string(gasUsed) + " " + std::to_string(gasBound) +
           " " + to_hex(stateDigest) + " " + returnRendering;
}

Digest Engine::external_id(const std::string& name) {
    Hasher h;
    h.update("external:");
    h.update(name);
    return h.finish();
}

Digest Engine::cell_key(const Digest& context, const Digest& id) {
    Hasher h;
    h.update(context);
    h.update(id);
    return h.finish();
}

namespace {

struct RiskSignal {
    RiskRef risk;
    std::vector<Value> args;  // the failing function's original arguments
};

CapSet abs_caps_rt(const CapSet& c, const Digest& owner) {
    CapSet out;
    for (int bit = 0; bit < 6; bit++)
        if (c.builtin_mask() & (1 << bit)) out.add(BuiltinCap(1 << bit));
    for (auto u : c.user()) {
        u.module = resolve_owner(u.module, owner);
        out.add(u);
    }
    return out;
}

class Interp {
public:
    Interp(Store& store, const CostTable& tab, RuntimeCounters& counters,
           uint64_t txIndex)
        : store_(store), tab_(tab), counters_(counters) {
        Hasher h;
        h.update("tx:");
        h.update_u64(txIndex);
        txDigest_ = h.finish();
    }

    uint64_t gas_used() const { return gas_; }

    Value run_public(const Digest& module, uint32_t fnIdx, std::vector<Value> args,
                     const std::vector<SemType>& typeArgs) {
        return run_function(module, fnIdx, std::move(args), typeArgs);
    }

    Value run_val(const Digest& module, const BVal& val) {
        Frame fr;
        fr.mod = store_.module_at(module);
        fr.self = module;
        fr.effect = Effect::Init;
        fr.slots.assign(val.slotCount, std::nullopt);
        return eval(val.init, fr);
    }

    void run_init(const Digest& module, const BInit& init, Value deployer) {
        Frame fr;
        fr.mod = store_.module_at(module);
        fr.self = module;
        fr.effect = Effect::Active;
        fr.slots.assign(init.slotCount, std::nullopt);
        std::vector<Value> orig{deployer};
        fr.slots[0] = std::move(deployer);
        size_t mark = journal_.size();
        push_stack(module, UINT32_MAX);
        try {
            for (uint32_t d : init.entryDrops) drop_slot(fr, d);
            (void)eval(init.body, fr);
            pop_stack();
        } catch (RiskSignal& s) {
            pop_stack();
            revert_to(mark);
            s.args = std::move(orig);
            throw;
        }
    }

private:
    Store& store_;
    const CostTable& tab_;
    RuntimeCounters& counters_;
    Digest txDigest_;
    uint64_t gas_ = 0;
    uint64_t freshCounter_ = 0;
    std::vector<std::pair<Digest, uint32_t>> stack_;
    struct JournalEntry {
        Digest key;
        std::optional<Bytes> prev;
    };
    std::vector<JournalEntry> journal_;

    struct Frame {
        const BytecodeModule* mod = nullptr;
        Digest self;
        Effect effect = Effect::Pure;
        bool inTransition = false;
        std::vector<std::optional<Value>> slots;
        std::vector<SemType> typeBindings;      // concrete, absolute
        std::optional<Value>* pendingWrite = nullptr;
    };

    [[noreturn]] void fault_mirror(const std::string& what) {
        counters_.mirrorFaults++;
        throw InternalFault("value discipline fault: " + what);
    }
    [[noreturn]] void fault_effect(const std::string& what) {
        counters_.effectGuardFaults++;
        throw InternalFault("effect guard fault: " + what);
    }

    void push_stack(const Digest& m, uint32_t fn) {
        for (const auto& [pm, pf] : stack_)
            if (pm == m && pf == fn) {
                counters_.reentrancyFaults++;
                throw InternalFault("reentrant call detected");
            }
        stack_.push_back({m, fn});
    }
    void pop_stack() { stack_.pop_back(); }

    void charge(uint64_t c) { gas_ += c; }

    void revert_to(size_t mark) {
        while (journal_.size() > mark) {
            auto& e = journal_.back();
            store_.rollback_cell(e.key, e.prev);
            journal_.pop_back();
        }
    }

    SemType subst_rt(const SemType& t, const Frame& fr) {
        SemType out = substitute(t, fr.typeBindings);
        return absolutize(out, fr.self);
    }

    Value take_slot(Frame& fr, uint32_t s) {
        if (s >= fr.slots.size() || !fr.slots[s])
            throw InternalFault("use of an empty slot");
        Value v = std::move(*fr.slots[s]);
        fr.slots[s].reset();
        return v;
    }

    Value copy_slot(Frame& fr, uint32_t s) {
        if (s >= fr.slots.size() || !fr.slots[s])
            throw InternalFault("copy of an empty slot");
        if (!fr.slots[s]->caps.has(BuiltinCap::Copy))
            fault_mirror("copy of a value without Copy");
        return *fr.slots[s];
    }

    void drop_slot(Frame& fr, uint32_t s) {
        charge(tab_.drop);
        if (s >= fr.slots.size() || !fr.slots[s])
            throw InternalFault("drop of an empty slot");
        if (!fr.slots[s]->caps.has(BuiltinCap::Drop))
            fault_mirror("drop of a value without Drop");
        fr.slots[s].reset();
    }

    const BytecodeModule* module_of(const Digest& addr) {
        const auto* m = store_.module_at(addr);
        if (!m) throw InternalFault("dangling module reference");
        return m;
    }

    [[noreturn]] void raise(BuiltinRisk r) {
        throw RiskSignal{RiskRef{true, r, {}, builtin_risk_name(r)}, {}};
    }

    Value run_function(const Digest& module, uint32_t fnIdx, std::vector<Value> args,
                       const std::vector<SemType>& typeArgs) {
        const BytecodeModule* mod = module_of(module);
        if (fnIdx >= mod->functions.size())
            throw InternalFault("call target out of range");
        const BFunction& f = mod->functions[fnIdx];
        charge(tab_.call);
        push_stack(module, fnIdx);
        Frame fr;
        fr.mod = mod;
        fr.self = module;
        fr.effect = f.effect;
        fr.typeBindings = typeArgs;
        fr.slots.assign(f.slotCount, std::nullopt);
        std::vector<Value> orig = args;  // returned to the caller on failure
        for (size_t i = 0; i < args.size(); i++) fr.slots[i] = std::move(args[i]);
        size_t mark = journal_.size();
        try {
            for (uint32_t d : f.entryDrops) drop_slot(fr, d);
            Value out = eval(f.body, fr);
            pop_stack();
            return out;
        } catch (RiskSignal& s) {
            pop_stack();
            revert_to(mark);  // the callee's progress is rolled back
            s.args = std::move(orig);
            throw;
        }
    }

    Value default_value(const SemType& cell) {
        auto def = cell.kind == TypeK::Adt
                       ? store_.default_for(cell.module, cell.index)
                       : std::nullopt;
        if (!def) raise(BuiltinRisk::EmptyCell);
        const BytecodeModule* mod = module_of(def->module);
        const BFunction& f = mod->functions[def->fnIndex];
        // materializing a default is part of the read cost; run unmetered
        uint64_t saved = gas_;
        Frame fr;
        fr.mod = mod;
        fr.self = def->module;
        fr.effect = Effect::Pure;
        fr.typeBindings = cell.args;
        fr.slots.assign(f.slotCount, std::nullopt);
        Value v = eval(f.body, fr);
        gas_ = saved;
        return v;
    }

    Value read_cell(Frame& fr, const Value& ref) {
        charge(tab_.cellRead);
        if (fr.inTransition) fault_effect("cell read inside a transition");
        if (fr.effect < Effect::Dependent) fault_effect("cell read in a non-reading frame");
        auto bytes = store_.get_cell(ref.bytes32);
        if (!bytes) return default_value(*ref.inner);
        auto v = decode_value(*bytes);
        if (!v) throw InternalFault("stored cell does not decode");
        return *v;
    }

    void write_cell(Frame& fr, const Value& ref, Value v) {
        charge(tab_.cellWrite);
        if (fr.inTransition) fault_effect("cell write inside a transition");
        if (fr.effect < Effect::Active) fault_effect("cell write in a non-active frame");
        const SemType& want = *ref.inner;
        SemType got = value_type(v);
        if (got.kind != want.kind ||
            (want.kind == TypeK::Adt &&
             (got.module != want.module || got.index != want.index)))
            throw InternalFault("cell write with a mismatched type");
        if (!v.caps.covers(want.caps)) fault_mirror("cell write loses capabilities");
        if (!v.caps.has(BuiltinCap::Persist)) fault_mirror("persisting a non-Persist value");
        v.caps = want.caps;  // canonical stored form
        auto prev = store_.get_cell(ref.bytes32);
        journal_.push_back({ref.bytes32, prev});
        store_.put_cell(ref.bytes32, encode_value(v));
    }

    Digest fresh_digest() {
        Hasher h;
        h.update("fresh:");
        h.update(txDigest_);
        h.update_u64(freshCounter_++);
        return h.finish();
    }

    Value eval(const IrNode& n, Frame& fr) {
        switch (n.k) {
            case NodeK::LitU:
                charge(tab_.lit);
                return Value::make_uint(n.lit);
            case NodeK::LitI:
                charge(tab_.lit);
                return Value::make_int(int64_t(n.lit));
            case NodeK::LitUnit:
                charge(tab_.lit);
                return Value::make_unit();
            case NodeK::UseMove:
                charge(tab_.move);
                return take_slot(fr, n.slot);
            case NodeK::UseCopy:
                charge(tab_.copy);
                return copy_slot(fr, n.slot);
            case NodeK::Drop:
                drop_slot(fr, n.slot);
                return eval(n.kids[0], fr);
            case NodeK::Let: {
                charge(tab_.let);
                Value v = eval(n.kids[0], fr);
                fr.slots[n.slot] = std::move(v);
                return eval(n.kids[1], fr);
            }
            case NodeK::Construct: {
                charge(tab_.constructBase + n.kids.size());
                Digest owner = resolve_owner(n.module, fr.self);
                const BytecodeModule* mod = module_of(owner);
                const BTypeDecl& td = mod->types.at(n.index);
                Value v;
                v.k = ValK::Adt;
                v.module = owner;
                v.typeIndex = n.index;
                v.ctorIndex = n.index2;
                for (const auto& a : n.typeArgs) v.typeArgs.push_back(subst_rt(a, fr));
                for (const auto& k : n.kids) v.fields.push_back(eval(k, fr));
                v.caps = abs_caps_rt(td.declaredCaps, owner);
                return v;
            }
            case NodeK::MakeTuple: {
                charge(tab_.constructBase + n.kids.size());
                Value v;
                v.k = ValK::Tuple;
                for (const auto& k : n.kids) v.fields.push_back(eval(k, fr));
                v.caps = kCopyDropPersist;
                for (const auto& f : v.fields) v.caps = v.caps.intersect(f.caps);
                return v;
            }
            case NodeK::Call: {
                std::vector<Value> args;
                for (const auto& k : n.kids) args.push_back(eval(k, fr));
                std::vector<SemType> targs;
                for (const auto& a : n.typeArgs) targs.push_back(subst_rt(a, fr));
                Digest target = resolve_owner(n.module, fr.self);
                if (fr.inTransition) {
                    const BFunction& callee = module_of(target)->functions.at(n.index);
                    if (callee.effect != Effect::Pure)
                        fault_effect("impure call inside a transition");
                }
                return run_function(target, n.index, std::move(args), targs);
            }
            case NodeK::LoadVal: {
                charge(tab_.valRead);
                Digest owner = resolve_owner(n.module, fr.self);
                auto bytes = store_.get_val(owner, n.index);
                if (!bytes) throw InternalFault("val is not initialized");
                auto v = decode_value(*bytes);
                if (!v) throw InternalFault("stored val does not decode");
                if (!v->caps.has(BuiltinCap::Copy)) fault_mirror("val copy without Copy");
                return *v;
            }
            case NodeK::Arith: {
                charge(tab_.arith);
                Value l = eval(n.kids[0], fr);
                Value r = eval(n.kids[1], fr);
                if (l.k == ValK::UInt) {
                    if (n.op == 0) {
                        if (l.u > UINT64_MAX - r.u) raise(BuiltinRisk::NumericOverflow);
                        return Value::make_uint(l.u + r.u);
                    }
                    if (l.u < r.u) raise(BuiltinRisk::NumericUnderflow);
                    return Value::make_uint(l.u - r.u);
                }
                // two's-complement 64-bit with explicit range checks
                __int128 a = l.i, b = r.i;
                __int128 res = n.op == 0 ? a + b : a - b;
                if (res > INT64_MAX) raise(BuiltinRisk::NumericOverflow);
                if (res < INT64_MIN) raise(BuiltinRisk::NumericUnderflow);
                return Value::make_int(int64_t(res));
            }
            case NodeK::Match: {
                charge(tab_.matchBase + n.arms.size());
                Value scrut = eval(n.kids[0], fr);
                if (scrut.k != ValK::Adt) throw InternalFault("match on a non-ADT value");
                for (const auto& a : n.arms) {
                    if (a.ctorIndex != scrut.ctorIndex) continue;
                    if (a.slots.size() != scrut.fields.size())
                        throw InternalFault("match binder arity mismatch");
                    for (size_t i = 0; i < a.slots.size(); i++)
                        fr.slots[a.slots[i]] = std::move(scrut.fields[i]);
                    for (uint32_t d : a.dropsAtEntry) drop_slot(fr, d);
                    return eval(a.body[0], fr);
                }
                throw InternalFault("no arm matches the constructor");
            }
            case NodeK::MatchTuple: {
                charge(tab_.matchBase + n.arms.size());
                Value scrut = eval(n.kids[0], fr);
                if (scrut.k != ValK::Tuple)
                    throw InternalFault("tuple match on a non-tuple value");
                const auto& a = n.arms[0];
                if (a.slots.size() != scrut.fields.size())
                    throw InternalFault("tuple binder arity mismatch");
                for (size_t i = 0; i < a.slots.size(); i++)
                    fr.slots[a.slots[i]] = std::move(scrut.fields[i]);
                for (uint32_t d : a.dropsAtEntry) drop_slot(fr, d);
                return eval(a.body[0], fr);
            }
            case NodeK::Modify: {
                Value ref = eval(n.kids[0], fr);
                if (ref.k != ValK::Ref) throw InternalFault("modify on a non-reference");
                if (!ref.caps.has(BuiltinCap::Modify))
                    fault_mirror("modify through a reference without Modify");
                Value cell = read_cell(fr, ref);
                fr.slots[n.slot] = std::move(cell);
                std::optional<Value> pending;
                auto* savedPending = fr.pendingWrite;
                bool savedTransition = fr.inTransition;
                fr.pendingWrite = &pending;
                fr.inTransition = true;
                Value result = eval(n.kids[1], fr);
                fr.inTransition = savedTransition;
                fr.pendingWrite = savedPending;
                if (pending) {
                    write_cell(fr, ref, std::move(*pending));
                    return result;
                }
                write_cell(fr, ref, std::move(result));
                return Value::make_unit();
            }
            case NodeK::AndReturn: {
                charge(tab_.andReturn);
                if (!fr.pendingWrite) throw InternalFault("'& return' outside a modify");
                Value cellValue = eval(n.kids[0], fr);
                auto* pending = fr.pendingWrite;
                Value result = eval(n.kids[1], fr);
                *pending = std::move(cellValue);
                return result;
            }
            case NodeK::Attach: {
                charge(tab_.attach);
                Value v = eval(n.kids[0], fr);
                CapRef cap = absolutize(n.cap, fr.self);
                if (cap.builtin) v.caps.add(cap.b);
                else v.caps.add(UserCap{cap.module, cap.index});
                return v;
            }
            case NodeK::Detach: {
                charge(tab_.detach);
                Value v = eval(n.kids[0], fr);
                CapRef cap = absolutize(n.cap, fr.self);
                bool had = cap.builtin ? v.caps.has(cap.b)
                                       : v.caps.has(UserCap{cap.module, cap.index});
                if (!had) fault_mirror("detach of an absent capability");
                if (cap.builtin) v.caps.remove(cap.b);
                else v.caps.remove(UserCap{cap.module, cap.index});
                return v;
            }
            case NodeK::Try: {
                charge(tab_.tryGuard);
                try {
                    Value ok = eval(n.kids[0], fr);
                    for (uint32_t d : n.extraSlots) drop_slot(fr, d);
                    return ok;
                } catch (RiskSignal& s) {
                    for (const auto& a : n.arms) {
                        RiskRef want = absolutize(a.risk, fr.self);
                        if (!(want == s.risk)) continue;
                        if (a.slots.size() != s.args.size())
                            throw InternalFault("handler arity mismatch");
                        for (size_t i = 0; i < a.slots.size(); i++)
                            fr.slots[a.slots[i]] = std::move(s.args[i]);
                        for (uint32_t d : a.dropsAtEntry) drop_slot(fr, d);
                        return eval(a.body[0], fr);
                    }
                    throw;
                }
            }
            case NodeK::Cycle: {
                charge(tab_.cycleBase);
                Value acc = eval(n.kids[0], fr);
                for (uint64_t i = 0; i < n.lit; i++) {
                    fr.slots[n.slot] = std::move(acc);
                    acc = eval(n.kids[1], fr);
                }
                return acc;
            }
            case NodeK::NewId: {
                charge(tab_.newId);
                if (fr.inTransition) fault_effect("ID.new inside a transition");
                if (fr.effect < Effect::Init) fault_effect("ID.new in a pure frame");
                return Value::make_id(fresh_digest(), true);
            }
            case NodeK::NewContext: {
                charge(tab_.newContext);
                if (fr.inTransition) fault_effect("Context.new inside a transition");
                if (fr.effect < Effect::Init) fault_effect("Context.new in a pure frame");
                Value v;
                v.k = ValK::Context;
                v.bytes32 = fresh_digest();
                v.inner = subst_rt(n.typeArgs[0], fr);
                v.caps = kCopyDropPersist;
                return v;
            }
            case NodeK::Derive: {
                charge(tab_.derive);
                Value ctx = eval(n.kids[0], fr);
                Value id = eval(n.kids[1], fr);
                if (ctx.k != ValK::Context || id.k != ValK::Id)
                    throw InternalFault("derive takes a Context and an ID");
                Value v;
                v.k = ValK::Ref;
                v.bytes32 = Engine::cell_key(ctx.bytes32, id.bytes32);
                v.inner = ctx.inner;
                v.caps = kCopyDropPersist;
                v.caps.add(BuiltinCap::Modify);
                return v;
            }
        }
        throw InternalFault("unreachable instruction");
    }
};

}  // namespace

DeployResult Engine::deploy(const Bytes& bytes, const std::optional<std::string>& signer) {
    auto verdict = validate(bytes, store_, table_);
    if (auto* err = std::get_if<VError>(&verdict))
        throw TxRejected(err->code, err->detail);
    auto& vm = std::get<VerifiedModule>(verdict);

    if (store_.module_at(vm.address)) throw DuplicateModule();
    if (vm.module.init && !signer)
        throw TxRejected("MissingSigner", "the module has an init function");

    uint64_t boundSum = vm.initBound;
    for (auto b : vm.valBounds) boundSum += b;

    store_.begin();
    std::string whyNot;
    if (!store_.put_module(vm.address, bytes, vm.module, vm.functionBounds, &whyNot)) {
        store_.abort();
        throw TxRejected(vcode::DefaultDup, whyNot);
    }
    Interp interp(store_, table_, counters_, store_.committed_tx_count() + 1);
    try {
        const BytecodeModule* mod = store_.module_at(vm.address);
        for (uint32_t i = 0; i < mod->vals.size(); i++) {
            Value v = interp.run_val(vm.address, mod->vals[i]);
            if (!v.caps.has(BuiltinCap::Copy) || !v.caps.has(BuiltinCap::Persist)) {
                counters_.mirrorFaults++;
                throw InternalFault("val without Copy and Persist");
            }
            store_.put_val(vm.address, i, encode_value(v));
        }
        if (mod->init) {
            Value deployer = Value::make_id(external_id(*signer), true);
            interp.run_init(vm.address, *mod->init, std::move(deployer));
        }
    } catch (const RiskSignal& s) {
        store_.abort();
        throw DeployError(s.risk.display());
    } catch (...) {
        store_.abort();
        throw;
    }
    store_.commit();
    DeployResult out;
    out.address = vm.address;
    out.gasUsed = interp.gas_used();
    out.gasBound = boundSum;
    out.stateDigest = store_.state_digest();
    return out;
}

TransactionReceipt Engine::call(const Digest& module, const std::string& function,
                                std::vector<SemType> typeArgs, std::vector<Value> args,
                                const std::optional<std::string>& signer,
                                std::optional<uint64_t> gasLimit) {
    const BytecodeModule* mod = store_.module_at(module);
    if (!mod) throw TxRejected("UnknownModule", to_hex_short(module));
    int fnIdx = mod->function_index(function);
    if (fnIdx < 0) throw TxRejected("UnknownFunction", function);
    const BFunction& f = mod->functions[fnIdx];
    if (f.vis != Visibility::Public)
        throw TxRejected("NotPublic", "'" + function + "' is not public");
    if (typeArgs.size() != f.typeParams.size())
        throw TxRejected("TypeMismatch", "wrong number of type arguments");
    if (args.size() != f.params.size())
        throw TxRejected("TypeMismatch", "wrong number of arguments");

    for (size_t i = 0; i < args.size(); i++) {
        SemType want = substitute(absolutize(f.params[i].type, module), typeArgs);
        if (want.caps.has(BuiltinCap::Master) &&
            !args[i].caps.has(BuiltinCap::Master)) {
            // --signer stands in for a signature with the matching key
            if (args[i].k == ValK::Id && signer &&
                args[i].bytes32 == external_id(*signer)) {
                args[i].caps.add(BuiltinCap::Master);
            } else {
                throw TxRejected("MissingSigner",
                                 "argument " + std::to_string(i + 1) +
                                     " needs a Master ID; sign as its owner");
            }
        }
        SemType got = value_type(args[i]);
        bool baseOk = got.kind == want.kind;
        if (baseOk && want.kind == TypeK::Adt)
            baseOk = got.module == want.module && got.index == want.index &&
                     got.args.size() == want.args.size();
        if (baseOk && want.kind == TypeK::Adt)
            for (size_t a = 0; a < want.args.size(); a++)
                baseOk &= got.args[a].equals(want.args[a]);
        if (!baseOk || !got.caps.covers(want.caps))
            throw TxRejected("TypeMismatch",
                             "argument " + std::to_string(i + 1) + " has the wrong type");
    }

    uint64_t bound = store_.function_bound(module, uint32_t(fnIdx));
    uint64_t limit = gasLimit.value_or(bound);
    if (limit < bound)
        throw TxRejected("InsufficientGasLimit",
                         "limit " + std::to_string(limit) + " below the stored bound " +
                             std::to_string(bound));

    TransactionReceipt r;
    r.gasBound = bound;
    store_.begin();
    Interp interp(store_, table_, counters_, store_.committed_tx_count() + 1);
    try {
        Value out = interp.run_public(module, uint32_t(fnIdx), std::move(args), typeArgs);
        r.gasUsed = interp.gas_used();
        r.returnRendering = render_value(out, store_);
        store_.commit();
        r.ok = true;
        r.stateDigest = store_.state_digest();
        return r;
    } catch (const RiskSignal& s) {
        r.gasUsed = interp.gas_used();
        store_.abort();
        // the transaction still happened: record it for replay determinism
        store_.begin();
        store_.commit();
        r.ok = false;
        r.riskName = s.risk.display();
        r.returnRendering = "-";
        r.stateDigest = store_.state_digest();
        return r;
    } catch (...) {
        store_.abort();
        throw;
    }
}

Value parse_value_literal(const std::string& text, const Store& store) {
    auto fail = [&](const std::string& why) -> Value {
        throw TxRejected("BadArgument", "'" + text + "': " + why);
    };
    if (text == "unit") return Value::make_unit();
    auto colon = text.find(':');
    if (colon == std::string::npos) return fail("expected kind:payload or unit");
    std::string kind = text.substr(0, colon);
    std::string payload = text.substr(colon + 1);
    if (kind == "uint") {
        try {
            return Value::make_uint(std::stoull(payload));
        } catch (...) {
            return fail("not a 64-bit unsigned integer");
        }
    }
    if (kind == "int") {
        try {
            return Value::make_int(std::stoll(payload));
        } catch (...) {
            return fail("not a 64-bit integer");
        }
    }
    if (kind == "id") return Value::make_id(Engine::external_id(payload), false);
    if (kind == "val") {
        auto dot = payload.find('.');
        if (dot == std::string::npos) return fail("val:<Module>.<name>");
        auto addr = store.address_of(payload.substr(0, dot));
        if (!addr) return fail("unknown module");
        const auto* mod = store.module_at(*addr);
        int vi = mod->val_index(payload.substr(dot + 1));
        if (vi < 0) return fail("unknown val");
        auto bytes = store.get_val(*addr, uint32_t(vi));
        if (!bytes) return fail("val is not initialized");
        auto v = decode_value(*bytes);
        if (!v) return fail("stored val does not decode");
        return *v;
    }
    return fail("unknown argument kind '" + kind + "'");
}

SemType parse_type_literal(const std::string& text, const Store& store) {
    if (text == "UInt") return make_prim(TypeK::UInt);
    if (text == "Int") return make_prim(TypeK::Int);
    if (text == "Unit") return make_prim(TypeK::Unit);
    if (text == "ID") return make_prim(TypeK::Id);
    std::string moduleName, typeName = text;
    auto dot = text.find('.');
    if (dot != std::string::npos) {
        moduleName = text.substr(0, dot);
        typeName = text.substr(dot + 1);
    }
    std::optional<Digest> found;
    int typeIdx = -1;
    for (const auto& [name, addr] : store.manifest()) {
        if (!moduleName.empty() && name != moduleName) continue;
        const auto* mod = store.module_at(addr);
        if (!mod) continue;
        int ti = mod->type_index(typeName);
        if (ti < 0) continue;
        if (found)
            throw TxRejected("BadArgument", "type '" + typeName + "' is ambiguous");
        found = addr;
        typeIdx = ti;
    }
    if (!found) throw TxRejected("BadArgument", "unknown type '" + text + "'");
    const auto* mod = store.module_at(*found);
    const auto& td = mod->types[typeIdx];
    if (!td.typeParams.empty())
        throw TxRejected("BadArgument", "type '" + typeName + "' is generic");
    CapSet caps;
    for (int bit = 0; bit < 6; bit++)
        if (td.declaredCaps.builtin_mask() & (1 << bit)) caps.add(BuiltinCap(1 << bit));
    for (auto u : td.declaredCaps.user()) {
        u.module = resolve_owner(u.module, *found);
        caps.add(u);
    }
    return make_adt(*found, uint32_t(typeIdx), typeName, {}, caps);
}

}  // namespace mandala
