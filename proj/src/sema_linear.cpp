#include <algorithm>
#include <functional>

#include "sema_internal.hpp"

namespace mandala {

using namespace detail;

namespace {

// Occurrence bounds of one slot across all control-flow paths.
struct MM {
    uint64_t mn = 0, mx = 0;
};

uint64_t sat_add(uint64_t a, uint64_t b) { return a > UINT64_MAX - b ? UINT64_MAX : a + b; }
uint64_t sat_mul(uint64_t a, uint64_t b) {
    if (a == 0 || b == 0) return 0;
    return a > UINT64_MAX / b ? UINT64_MAX : a * b;
}

MM usage(const TExpr& e, uint32_t s) {
    switch (e.k) {
        case TK::Var:
            return e.slot == s ? MM{1, 1} : MM{};
        case TK::Case:
        case TK::Try: {
            MM base = usage(*e.kids[0], s);
            bool first = true;
            uint64_t amn = 0, amx = 0;
            if (e.k == TK::Try) first = false;  // success path uses nothing more
            for (const auto& a : e.arms) {
                MM u = usage(*a.body, s);
                if (first) {
                    amn = u.mn;
                    amx = u.mx;
                    first = false;
                } else {
                    amn = std::min(amn, u.mn);
                    amx = std::max(amx, u.mx);
                }
            }
            return {sat_add(base.mn, amn), sat_add(base.mx, amx)};
        }
        case TK::Cycle: {
            MM init = usage(*e.kids[0], s);
            MM body = usage(*e.kids[1], s);
            uint64_t n = e.cycleN == 0 ? 1 : e.cycleN;  // a zero cycle accounts as one
            return {sat_add(init.mn, sat_mul(n, body.mn)),
                    sat_add(init.mx, sat_mul(n, body.mx))};
        }
        default: {
            MM m;
            for (const auto& k : e.kids) {
                MM u = usage(*k, s);
                m.mn = sat_add(m.mn, u.mn);
                m.mx = sat_add(m.mx, u.mx);
            }
            return m;
        }
    }
}

bool uses(const TExpr& e, uint32_t s) { return usage(e, s).mx > 0; }

struct Lin {
    const std::vector<TBinding>* slots;
};

struct LR {
    bool used = false;
    bool live = false;
};

void need_drop_cap(const Lin& L, uint32_t s, Pos pos) {
    if (!(*L.slots)[s].type.caps.has(BuiltinCap::Drop))
        bail(diag::LinDrop, pos,
             "'" + (*L.slots)[s].name + "' cannot be dropped on some path (no Drop)");
}

// Decides move/copy per occurrence and inserts drops where a path leaves
// a value unconsumed. liveIn/after describe the slot relative to this
// subtree on the current path.
LR lower(TExpr& e, uint32_t s, bool liveIn, bool after, const Lin& L) {
    switch (e.k) {
        case TK::Var: {
            if (e.slot != s) return {false, liveIn};
            e.use = after ? UseMode::Copy : UseMode::Move;
            return {true, after ? liveIn : false};
        }
        case TK::Case:
        case TK::Try: {
            bool anyArm = false;
            for (const auto& a : e.arms) anyArm |= uses(*a.body, s);
            LR sc = lower(*e.kids[0], s, liveIn, after || anyArm, L);
            bool liveAtArms = sc.live;
            bool anyUsed = sc.used;
            if (e.k == TK::Try && liveAtArms && !after) {
                // the success path continues with the call's value only
                need_drop_cap(L, s, e.pos);
                e.dropsAfter.push_back(s);
            }
            for (auto& a : e.arms) {
                LR ar = lower(*a.body, s, liveAtArms, after, L);
                anyUsed |= ar.used;
                if (liveAtArms && !ar.used && !after) {
                    need_drop_cap(L, s, a.body->pos);
                    a.dropsAtEntry.push_back(s);
                }
            }
            return {anyUsed, after ? liveAtArms : false};
        }
        case TK::Cycle: {
            bool bodyUses = uses(*e.kids[1], s);
            if (e.cycleN <= 1) {
                LR in = lower(*e.kids[0], s, liveIn, after || bodyUses, L);
                LR bd = lower(*e.kids[1], s, in.live, after, L);
                return {in.used || bd.used, bd.live};
            }
            LR in = lower(*e.kids[0], s, liveIn, after || bodyUses, L);
            // every iteration but the last would otherwise lose the value
            LR bd = lower(*e.kids[1], s, in.live, true, L);
            bool live = in.live;
            if (bodyUses && !after) {
                need_drop_cap(L, s, e.pos);
                e.dropsAfter.push_back(s);
                live = false;
            }
            return {in.used || bd.used, bodyUses ? live : in.live};
        }
        default: {
            bool used = false;
            bool live = liveIn;
            for (size_t i = 0; i < e.kids.size(); i++) {
                bool afterI = after;
                for (size_t j = i + 1; j < e.kids.size() && !afterI; j++)
                    afterI = uses(*e.kids[j], s);
                LR r = lower(*e.kids[i], s, live, afterI, L);
                used |= r.used;
                live = r.live;
            }
            return {used, live};
        }
    }
}

struct Job {
    uint32_t slot;
    TExpr* scope;
    std::vector<uint32_t>* dropSite;
    Pos pos;
};

void collect_jobs(TExpr& e, std::vector<Job>& jobs, const std::vector<TBinding>& slots) {
    switch (e.k) {
        case TK::Let:
            jobs.push_back({e.slot, e.kids[1].get(), &e.dropsAtEntry, slots[e.slot].pos});
            break;
        case TK::Modify:
            jobs.push_back({e.slot, e.kids[1].get(), &e.dropsAtEntry, slots[e.slot].pos});
            break;
        case TK::Cycle:
            jobs.push_back({e.slot, e.kids[1].get(), &e.dropsAtEntry, slots[e.slot].pos});
            break;
        case TK::Case:
        case TK::Try:
            for (auto& a : e.arms)
                for (uint32_t s : a.slots)
                    jobs.push_back({s, a.body.get(), &a.dropsAtEntry, slots[s].pos});
            break;
        default:
            break;
    }
    for (auto& k : e.kids) collect_jobs(*k, jobs, slots);
    for (auto& a : e.arms) collect_jobs(*a.body, jobs, slots);
}

void run_binding(const Job& j, const Lin& L) {
    const TBinding& b = (*L.slots)[j.slot];
    MM m = usage(*j.scope, j.slot);
    if (!b.type.caps.has(BuiltinCap::Copy) && m.mx > 1)
        bail(diag::LinCopy, j.pos,
             "'" + b.name + "' of type " + type_to_string(b.type) +
                 " is used more than once on some path (no Copy)");
    if (!b.type.caps.has(BuiltinCap::Drop) && m.mn < 1)
        bail(diag::LinDrop, j.pos,
             "'" + b.name + "' of type " + type_to_string(b.type) +
                 " is unused on some path (no Drop)");
    if (m.mx == 0) {
        j.dropSite->push_back(j.slot);
        return;
    }
    lower(*j.scope, j.slot, true, false, L);
}

// Unpacking rights: matching on a foreign ADT needs the Inspect capability.
void check_inspect(const TExpr& e) {
    if (e.k == TK::Case && !e.arms.empty() && !e.arms[0].isTuple) {
        const SemType& st = e.kids[0]->type;
        if (st.kind == TypeK::Adt && !st.module.is_zero() &&
            !st.caps.has(BuiltinCap::Inspect))
            bail(diag::Inspect, e.pos,
                 "cannot unpack " + type_to_string(st) +
                     " here: not its defining module and no Inspect capability");
    }
    for (const auto& k : e.kids) check_inspect(*k);
    for (const auto& a : e.arms) check_inspect(*a.body);
}

void run_scope(std::vector<TBinding>& slots, size_t paramCount, TExpr& body,
               std::vector<uint32_t>& entryDrops) {
    Lin L{&slots};
    std::vector<Job> jobs;
    for (size_t i = 0; i < paramCount; i++)
        jobs.push_back({uint32_t(i), &body, &entryDrops, slots[i].pos});
    collect_jobs(body, jobs, slots);
    for (const auto& j : jobs) run_binding(j, L);
    check_inspect(body);
}

}  // namespace

Diagnostics check_substructural(TypedModule& tm) {
    Diagnostics diags;
    try {
        for (auto& f : tm.functions)
            run_scope(f.slots, f.params.size(), *f.body, f.entryDrops);
        for (auto& v : tm.vals) {
            std::vector<uint32_t> entry;
            run_scope(v.slots, 0, *v.init, entry);
        }
        if (tm.init) {
            run_scope(tm.init->slots, 1, *tm.init->body, tm.init->entryDrops);
        }
    } catch (const SemaErr& e) {
        diags.push_back(e.d);
    }
    return diags;
}

}  // namespace mandala
