#include <algorithm>

#include "sema_internal.hpp"

namespace mandala {

namespace {

// Lowers one function/val/init body; may allocate helper slots.
class Lowerer {
public:
    explicit Lowerer(const std::vector<TBinding>& bindings) {
        for (const auto& b : bindings) names_.push_back(b.name);
    }

    uint32_t slot_count() const { return uint32_t(names_.size()); }
    std::vector<std::string> names() const { return names_; }

    IrNode lower(const TExpr& e) {
        IrNode n;
        switch (e.k) {
            case TK::LitU:
                n.k = NodeK::LitU;
                n.lit = e.litu;
                break;
            case TK::LitI:
                n.k = NodeK::LitI;
                n.lit = uint64_t(e.liti);
                break;
            case TK::Unit:
                n.k = NodeK::LitUnit;
                break;
            case TK::Var:
                n.k = e.use == UseMode::Copy ? NodeK::UseCopy : NodeK::UseMove;
                n.slot = e.slot;
                break;
            case TK::ValRef:
                n.k = NodeK::LoadVal;
                n.module = e.module;
                n.index = e.index;
                break;
            case TK::Ctor:
                n.k = NodeK::Construct;
                n.module = e.module;
                n.index = e.index;
                n.index2 = e.index2;
                n.typeArgs = e.typeArgs;
                for (const auto& k : e.kids) n.kids.push_back(lower(*k));
                break;
            case TK::Call:
                n.k = NodeK::Call;
                n.module = e.module;
                n.index = e.index;
                n.typeArgs = e.typeArgs;
                for (const auto& k : e.kids) n.kids.push_back(lower(*k));
                break;
            case TK::BuiltinCall: {
                switch (e.builtin) {
                    case BuiltinFn::Derive: n.k = NodeK::Derive; break;
                    case BuiltinFn::NewId: n.k = NodeK::NewId; break;
                    case BuiltinFn::NewContext: n.k = NodeK::NewContext; break;
                }
                n.typeArgs = e.typeArgs;
                for (const auto& k : e.kids) n.kids.push_back(lower(*k));
                break;
            }
            case TK::Tuple:
                n.k = NodeK::MakeTuple;
                for (const auto& k : e.kids) n.kids.push_back(lower(*k));
                break;
            case TK::Binary:
                n.k = NodeK::Arith;
                n.op = e.op == '+' ? 0 : 1;
                n.kids.push_back(lower(*e.kids[0]));
                n.kids.push_back(lower(*e.kids[1]));
                break;
            case TK::Let:
                n.k = NodeK::Let;
                n.slot = e.slot;
                n.kids.push_back(lower(*e.kids[0]));
                n.kids.push_back(wrap_drops(e.dropsAtEntry, lower(*e.kids[1])));
                break;
            case TK::Case: {
                bool tuple = e.arms.at(0).isTuple;
                n.k = tuple ? NodeK::MatchTuple : NodeK::Match;
                n.kids.push_back(lower(*e.kids[0]));
                for (const auto& a : e.arms) {
                    IrArm arm;
                    arm.ctorIndex = a.ctorIndex;
                    arm.slots = a.slots;
                    arm.dropsAtEntry = sorted(a.dropsAtEntry);
                    arm.body.push_back(lower(*a.body));
                    n.arms.push_back(std::move(arm));
                }
                break;
            }
            case TK::Modify:
                n.k = NodeK::Modify;
                n.slot = e.slot;
                n.kids.push_back(lower(*e.kids[0]));
                n.kids.push_back(wrap_drops(e.dropsAtEntry, lower(*e.kids[1])));
                break;
            case TK::AndReturn:
                n.k = NodeK::AndReturn;
                n.kids.push_back(lower(*e.kids[0]));
                n.kids.push_back(lower(*e.kids[1]));
                break;
            case TK::Attach:
            case TK::Detach:
                n.k = e.k == TK::Attach ? NodeK::Attach : NodeK::Detach;
                n.cap = e.cap;
                n.kids.push_back(lower(*e.kids[0]));
                break;
            case TK::Cycle: {
                n.k = NodeK::Cycle;
                n.lit = e.cycleN;
                n.slot = e.slot;
                n.kids.push_back(lower(*e.kids[0]));
                n.kids.push_back(wrap_drops(e.dropsAtEntry, lower(*e.kids[1])));
                if (!e.dropsAfter.empty()) {
                    // keep leftovers alive through the loop, drop them after
                    uint32_t tmp = fresh_slot("cycle$out");
                    IrNode let;
                    let.k = NodeK::Let;
                    let.slot = tmp;
                    let.kids.push_back(std::move(n));
                    IrNode use;
                    use.k = NodeK::UseMove;
                    use.slot = tmp;
                    let.kids.push_back(wrap_drops(e.dropsAfter, std::move(use)));
                    return let;
                }
                break;
            }
            case TK::Try: {
                n.k = NodeK::Try;
                n.extraSlots = sorted(e.dropsAfter);
                n.kids.push_back(lower(*e.kids[0]));
                for (const auto& a : e.arms) {
                    IrArm arm;
                    arm.risk = a.risk;
                    arm.slots = a.slots;
                    arm.dropsAtEntry = sorted(a.dropsAtEntry);
                    arm.body.push_back(lower(*a.body));
                    n.arms.push_back(std::move(arm));
                }
                break;
            }
        }
        return n;
    }

private:
    std::vector<std::string> names_;

    uint32_t fresh_slot(const std::string& name) {
        names_.push_back(name);
        return uint32_t(names_.size() - 1);
    }

    static std::vector<uint32_t> sorted(std::vector<uint32_t> v) {
        std::sort(v.begin(), v.end());
        return v;
    }

    IrNode wrap_drops(const std::vector<uint32_t>& drops, IrNode inner) {
        for (uint32_t s : sorted(drops)) {
            IrNode d;
            d.k = NodeK::Drop;
            d.slot = s;
            d.kids.push_back(std::move(inner));
            inner = std::move(d);
        }
        return inner;
    }
};

std::vector<RiskRef> sorted_risks(std::vector<RiskRef> rs) {
    std::sort(rs.begin(), rs.end());
    return rs;
}

std::vector<uint32_t> sorted_slots(std::vector<uint32_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

BytecodeModule compile(const TypedModule& tm) {
    BytecodeModule m;
    m.name = tm.name;
    m.types = tm.types;
    m.caps = tm.caps;
    m.imports = tm.imports;

    for (const auto& f : tm.functions) {
        BFunction bf;
        bf.name = f.name;
        bf.vis = f.vis;
        bf.protectedParam = f.protectedParam;
        bf.effect = f.effect;
        bf.defaultFor = f.defaultFor;
        bf.risks = sorted_risks(f.declaredRisks);
        bf.typeParams = f.typeParams;
        bf.params = f.params;
        bf.ret = f.ret;
        Lowerer lo(f.slots);
        bf.body = lo.lower(*f.body);
        bf.slotCount = lo.slot_count();
        bf.slotNames = lo.names();
        bf.entryDrops = sorted_slots(f.entryDrops);
        m.functions.push_back(std::move(bf));
    }
    for (const auto& v : tm.vals) {
        BVal bv;
        bv.name = v.name;
        bv.type = v.type;
        Lowerer lo(v.slots);
        bv.init = lo.lower(*v.init);
        bv.slotCount = lo.slot_count();
        bv.slotNames = lo.names();
        m.vals.push_back(std::move(bv));
    }
    if (tm.init) {
        BInit bi;
        bi.risks = sorted_risks(tm.init->risks);
        bi.param = tm.init->param;
        Lowerer lo(tm.init->slots);
        bi.body = lo.lower(*tm.init->body);
        bi.slotCount = lo.slot_count();
        bi.slotNames = lo.names();
        bi.entryDrops = sorted_slots(tm.init->entryDrops);
        m.init = std::move(bi);
    }
    return m;
}

}  // namespace mandala
