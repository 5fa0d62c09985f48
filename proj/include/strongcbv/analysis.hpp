#pragma once

// Runtime audits for the substitution-based machine: decoding configurations
// back to plain terms, the shape invariants of reachable configurations, the
// potential function used for amortized step counting, per-step lemma checks
// against the reference oracle, and lockstep comparison with the
// environment-based machine.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "strongcbv/machine_env.hpp"
#include "strongcbv/machine_subst.hpp"
#include "strongcbv/oracle.hpp"
#include "strongcbv/sharing.hpp"
#include "strongcbv/syntax.hpp"

namespace scbv::analysis {

using machine::Config;
using machine::Frame;
using machine::Location;
using machine::Mode;
using machine::MTerm;
using machine::MTermNode;
using machine::MValue;
using machine::MValueNode;

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Maps machine syntax back to plain terms: delimiters and annotations are
/// erased, memo frames vanish, normal forms are unfolded. Results are
/// memoized by node so that shared machine structure stays shared.
class Decoder {
public:
    explicit Decoder(std::uint64_t unfold_cap = 1'000'000) : cap_(unfold_cap) {}

    Term term(const MTerm& t) {
        if (auto it = terms_.find(t.get()); it != terms_.end()) return it->second.second;
        Term out;
        switch (t->kind) {
        case MTermNode::Kind::var: out = var(t->id); break;
        case MTermNode::Kind::app: out = app(term(t->left), term(t->right)); break;
        case MTermNode::Kind::lam: out = lam(t->id, term(t->left)); break;
        case MTermNode::Kind::delim: out = value(t->value); break;
        }
        terms_.emplace(t.get(), std::make_pair(t, out));
        return out;
    }

    Term value(const MValue& v) {
        if (auto it = values_.find(v.get()); it != values_.end()) return it->second.second;
        Term out;
        switch (v->kind) {
        case MValueNode::Kind::avar: out = var(v->id); break;
        case MValueNode::Kind::vapp: out = app(value(v->left), value(v->right)); break;
        case MValueNode::Kind::vlam: out = lam(v->id, term(v->body)); break;
        case MValueNode::Kind::annot: out = value(v->left); break;
        }
        values_.emplace(v.get(), std::make_pair(v, out));
        return out;
    }

    Term normal_form(const TermGraph& g, NodeId n) {
        if (graph_ != &g) {
            graph_ = &g;
            nodes_.clear();
        }
        if (auto it = nodes_.find(n); it != nodes_.end()) return it->second;
        Term out = unfold(g, n, cap_);
        nodes_.emplace(n, out);
        return out;
    }

    /// Plugs `focus` into the context denoted by `stack`, skipping the top
    /// `skip_top` frames.
    Term plug_stack(const Config& k, Term focus, std::size_t skip_top = 0) {
        for (std::size_t i = k.stack.size() - skip_top; i-- > 0;) {
            const Frame& f = k.stack[i];
            if (auto* a = std::get_if<machine::FunTerm>(&f)) focus = app(term(a->term), focus);
            else if (auto* b = std::get_if<machine::ArgVal>(&f)) focus = app(focus, value(b->value));
            else if (auto* c = std::get_if<machine::FunVal>(&f)) focus = app(value(c->value), focus);
            else if (auto* d = std::get_if<machine::ArgNF>(&f)) focus = app(focus, normal_form(k.graph, d->nf));
            else if (auto* e = std::get_if<machine::Binder>(&f)) focus = lam(e->x, focus);
        }
        return focus;
    }

    Term context(const Config& k, std::size_t skip_top = 0) { return plug_stack(k, var(Ident::hole()), skip_top); }

    Term config(const Config& k) {
        switch (k.mode) {
        case Mode::E: return plug_stack(k, term(k.term));
        case Mode::C:
        case Mode::M: return plug_stack(k, value(k.value));
        case Mode::S: return plug_stack(k, normal_form(k.graph, k.nf));
        }
        throw std::logic_error("unreachable mode");
    }

private:
    std::uint64_t cap_;
    std::unordered_map<const MTermNode*, std::pair<MTerm, Term>> terms_;
    std::unordered_map<const MValueNode*, std::pair<MValue, Term>> values_;
    const TermGraph* graph_ = nullptr;
    std::unordered_map<NodeId, Term> nodes_;
};

inline Term decode_config(const Config& k) { return Decoder{}.config(k); }

// ---------------------------------------------------------------------------
// Configuration scan
// ---------------------------------------------------------------------------

/// Every annotated value occurring anywhere in a configuration, plus
/// violations of the two local annotation invariants: delimiters always
/// carry an annotated value, and annotations never nest.
struct ScanResult {
    std::map<Location, MValue> annotated; // location -> inner value
    std::vector<std::string> problems;
};

inline ScanResult scan_config(const Config& k) {
    ScanResult out;
    std::unordered_set<const void*> seen;
    std::vector<const MTermNode*> terms;
    std::vector<const MValueNode*> values;

    auto push_term = [&](const MTerm& t) { if (t && seen.insert(t.get()).second) terms.push_back(t.get()); };
    auto push_value = [&](const MValue& v) { if (v && seen.insert(v.get()).second) values.push_back(v.get()); };

    push_term(k.term);
    push_value(k.value);
    for (const auto& f : k.stack) {
        if (auto* a = std::get_if<machine::FunTerm>(&f)) push_term(a->term);
        else if (auto* b = std::get_if<machine::ArgVal>(&f)) push_value(b->value);
        else if (auto* c = std::get_if<machine::FunVal>(&f)) push_value(c->value);
    }
    while (!terms.empty() || !values.empty()) {
        if (!terms.empty()) {
            auto t = terms.back();
            terms.pop_back();
            switch (t->kind) {
            case MTermNode::Kind::var: break;
            case MTermNode::Kind::app: push_term(t->left); push_term(t->right); break;
            case MTermNode::Kind::lam: push_term(t->left); break;
            case MTermNode::Kind::delim:
                if (!machine::is_annot(t->value)) out.problems.push_back("delimiter without annotation: [" + machine::render(t->value) + "]");
                push_value(t->value);
                break;
            }
            continue;
        }
        auto v = values.back();
        values.pop_back();
        switch (v->kind) {
        case MValueNode::Kind::avar: break;
        case MValueNode::Kind::vapp: push_value(v->left); push_value(v->right); break;
        case MValueNode::Kind::vlam: push_term(v->body); break;
        case MValueNode::Kind::annot: {
            if (machine::is_annot(v->left)) out.problems.push_back("nested annotation at location " + std::to_string(v->loc));
            auto [it, inserted] = out.annotated.emplace(v->loc, v->left);
            if (!inserted && it->second != v->left) {
                machine::ConfigComparer cmp;
                if (!cmp.equal(it->second, v->left))
                    out.problems.push_back("location " + std::to_string(v->loc) + " annotates two different values");
            }
            push_value(v->left);
            break;
        }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape invariants
// ---------------------------------------------------------------------------

/// The seven well-formed configuration shapes.
enum class ShapeClass : std::uint8_t { E_S1, C_S1_vw, C_S2_vi, M_n_S3_vw, M_a_S2_vi, S_S2_a, S_S3_n };

inline const char* shape_name(ShapeClass c) {
    switch (c) {
    case ShapeClass::E_S1: return "E.S1";
    case ShapeClass::C_S1_vw: return "C.S1.vw";
    case ShapeClass::C_S2_vi: return "C.S2.vi";
    case ShapeClass::M_n_S3_vw: return "M.n?.S3.vw";
    case ShapeClass::M_a_S2_vi: return "M.a?.S2.vi";
    case ShapeClass::S_S2_a: return "S.S2.a";
    case ShapeClass::S_S3_n: return "S.S3.n";
    }
    return "?";
}

struct ShapeResult {
    std::optional<ShapeClass> shape;
    std::string violation; // empty iff `shape` is set

    explicit operator bool() const noexcept { return shape.has_value(); }
};

/// Classifies configurations by the value, stack and normal-form grammars:
///
///   vw ::= \x.t | vi | vw^l        vi ::= x | vi vw | vi^l
///   S1 ::= (t [])::S1 | ([] vw)::S1 | S3
///   S2 ::= <l>::S2 | ([] n)::S2 | S3
///   S3 ::= <l>::S3 | (vi [])::S2 | (\x.[])::S3 | empty
///
/// Value and node classifications are cached across calls.
class ShapeChecker {
public:
    ShapeResult check(const Config& k) {
        auto scan = scan_config(k);
        if (!scan.problems.empty()) return fail(scan.problems.front());

        const std::size_t n = k.stack.size();
        std::vector<bool> in1(n + 1), in2(n + 1), in3(n + 1);
        in1[0] = in2[0] = in3[0] = true;
        for (std::size_t j = 1; j <= n; ++j) {
            const Frame& f = k.stack[j - 1];
            bool s1 = false, s2 = false, s3 = false;
            if (std::holds_alternative<machine::Memo>(f)) {
                s3 = in3[j - 1];
                s2 = in2[j - 1];
            } else if (auto* fv = std::get_if<machine::FunVal>(&f)) {
                s3 = is_vi(fv->value) && in2[j - 1];
            } else if (std::holds_alternative<machine::Binder>(f)) {
                s3 = in3[j - 1];
            } else if (auto* an = std::get_if<machine::ArgNF>(&f)) {
                s2 = is_normal(k.graph, an->nf) && in2[j - 1];
            } else if (std::holds_alternative<machine::FunTerm>(f)) {
                s1 = in1[j - 1];
            } else if (auto* av = std::get_if<machine::ArgVal>(&f)) {
                s1 = is_vw(av->value) && in1[j - 1];
            }
            in3[j] = s3;
            in2[j] = s2 || s3;
            in1[j] = s1 || s3;
        }

        switch (k.mode) {
        case Mode::E:
            if (in1[n]) return ok(ShapeClass::E_S1);
            return fail("E-configuration stack is not S1");
        case Mode::C:
            if (in1[n] && is_vw(k.value)) return ok(ShapeClass::C_S1_vw);
            if (in2[n] && is_vi(k.value)) return ok(ShapeClass::C_S2_vi);
            if (!is_vw(k.value)) return fail("C-configuration value is not a weak value: " + machine::render(k.value));
            return fail("C-configuration stack is neither S1 with vw nor S2 with vi");
        case Mode::M: {
            bool empty = !k.found;
            if (in3[n] && is_vw(k.value) && (empty || is_normal(k.graph, *k.found))) return ok(ShapeClass::M_n_S3_vw);
            if (in2[n] && is_vi(k.value) && (empty || is_neutral(k.graph, *k.found))) return ok(ShapeClass::M_a_S2_vi);
            return fail("M-configuration matches neither M.n?.S3.vw nor M.a?.S2.vi");
        }
        case Mode::S:
            if (in2[n] && is_neutral(k.graph, k.nf)) return ok(ShapeClass::S_S2_a);
            if (in3[n] && is_normal(k.graph, k.nf)) return ok(ShapeClass::S_S3_n);
            return fail("S-configuration matches neither S.S2.a nor S.S3.n");
        }
        return fail("unknown mode");
    }

    bool is_vw(const MValue& v) { return classify(v).first; }
    bool is_vi(const MValue& v) { return classify(v).second; }

    bool is_normal(const TermGraph& g, NodeId n) { return node_class(g, n).first; }
    bool is_neutral(const TermGraph& g, NodeId n) { return node_class(g, n).second; }

private:
    // value -> (is vw, is vi)
    std::unordered_map<const MValueNode*, std::pair<MValue, std::pair<bool, bool>>> values_;
    const TermGraph* graph_ = nullptr;
    std::vector<std::pair<bool, bool>> nodes_; // node -> (normal, neutral)

    static ShapeResult ok(ShapeClass c) { return {c, {}}; }
    static ShapeResult fail(std::string why) { return {std::nullopt, std::move(why)}; }

    std::pair<bool, bool> classify(const MValue& v) {
        if (auto it = values_.find(v.get()); it != values_.end()) return it->second.second;
        std::pair<bool, bool> r{false, false};
        switch (v->kind) {
        case MValueNode::Kind::vlam: r = {true, false}; break;
        case MValueNode::Kind::avar: r = {true, true}; break;
        case MValueNode::Kind::vapp: {
            bool vi = classify(v->left).second && classify(v->right).first;
            r = {vi, vi};
            break;
        }
        case MValueNode::Kind::annot: r = classify(v->left); break;
        }
        values_.emplace(v.get(), std::make_pair(v, r));
        return r;
    }

    std::pair<bool, bool> node_class(const TermGraph& g, NodeId n) {
        if (graph_ != &g) {
            graph_ = &g;
            nodes_.clear();
        }
        // Nodes only refer to earlier nodes, so classify forward.
        while (nodes_.size() < g.table_size()) {
            const auto& node = g.node(static_cast<NodeId>(nodes_.size()));
            std::pair<bool, bool> r{false, false};
            switch (node.kind) {
            case GraphNode::Kind::var: r = {true, true}; break;
            case GraphNode::Kind::lam: r = {nodes_[node.left].first, false}; break;
            case GraphNode::Kind::app: {
                bool a = nodes_[node.left].second && nodes_[node.right].first;
                r = {a, a};
                break;
            }
            }
            nodes_.push_back(r);
        }
        return nodes_.at(n);
    }
};

inline ShapeResult check_shape(const Config& k) { return ShapeChecker{}.check(k); }

// ---------------------------------------------------------------------------
// Potential
// ---------------------------------------------------------------------------

struct PotentialBreakdown {
    std::int64_t phi_term = 0;  // focus term (E) or value (C)
    std::int64_t phi_value = 0;
    std::int64_t phi_stack = 0;
    std::int64_t phi_heap = 0;
    std::int64_t iverson_discount = 0; // 0 or 9
    std::int64_t total = 0;
};

/// Potential of terms, values, stacks, heaps and whole configurations:
///
///   term:  t1 t2 -> 6 + .. + ..   \x.t -> 4 + ..   x -> 4   [v] -> 4
///   value: v1 v2 -> 3 + .. + ..   \x.t -> 3 + term   x -> 1   v^l -> 3
///   stack: (t [])   5 + term      ([] v) 4 + value    (v []) 2 + value
///          ([] n)   1             (\x.[]) 1           <l> 1
///   heap:  sum of value potentials over pending locations, i.e. those whose
///          annotation occurs in the configuration, whose cell is empty and
///          which are not on the stack as a memo frame, plus the location an
///          M-configuration with an empty cell is about to normalize.
///   E: term + stack + heap      C: value + stack + heap - 9 [rule 5 next]
///   M: 2 + stack + heap         S: stack + heap
class Potential {
public:
    std::int64_t term(const MTerm& t) {
        if (auto it = terms_.find(t.get()); it != terms_.end()) return it->second.second;
        std::int64_t p = 0;
        switch (t->kind) {
        case MTermNode::Kind::app: p = 6 + term(t->left) + term(t->right); break;
        case MTermNode::Kind::lam: p = 4 + term(t->left); break;
        case MTermNode::Kind::var:
        case MTermNode::Kind::delim: p = 4; break;
        }
        terms_.emplace(t.get(), std::make_pair(t, p));
        return p;
    }

    std::int64_t term(const Term& t) {
        switch (t->kind) {
        case TermNode::Kind::app: return 6 + term(t->left) + term(t->right);
        case TermNode::Kind::lam: return 4 + term(t->left);
        case TermNode::Kind::var: return 4;
        }
        return 0;
    }

    std::int64_t value(const MValue& v) {
        if (auto it = values_.find(v.get()); it != values_.end()) return it->second.second;
        std::int64_t p = 0;
        switch (v->kind) {
        case MValueNode::Kind::vapp: p = 3 + value(v->left) + value(v->right); break;
        case MValueNode::Kind::vlam: p = 3 + term(v->body); break;
        case MValueNode::Kind::avar: p = 1; break;
        case MValueNode::Kind::annot: p = 3; break;
        }
        values_.emplace(v.get(), std::make_pair(v, p));
        return p;
    }

    std::int64_t stack(const std::vector<Frame>& s) {
        std::int64_t p = 0;
        for (const auto& f : s) {
            if (auto* a = std::get_if<machine::FunTerm>(&f)) p += 5 + term(a->term);
            else if (auto* b = std::get_if<machine::ArgVal>(&f)) p += 4 + value(b->value);
            else if (auto* c = std::get_if<machine::FunVal>(&f)) p += 2 + value(c->value);
            else p += 1;
        }
        return p;
    }

    std::int64_t heap(const Config& k) {
        auto scan = scan_config(k);
        std::unordered_set<Location> on_stack;
        for (const auto& f : k.stack)
            if (auto* m = std::get_if<machine::Memo>(&f)) on_stack.insert(m->loc);
        std::map<Location, MValue> pending;
        for (const auto& [l, v] : scan.annotated)
            if (!k.heap.read(l) && !on_stack.contains(l)) pending.emplace(l, v);
        if (k.mode == Mode::M && !k.found) pending.emplace(k.loc, k.value);
        std::int64_t p = 0;
        for (const auto& [l, v] : pending) p += value(v);
        return p;
    }

    static bool beta_next(const Config& k) {
        if (k.mode != Mode::C || k.stack.empty() || !machine::is_vlam(k.value)) return false;
        auto* a = std::get_if<machine::ArgVal>(&k.stack.back());
        return a && machine::is_annot(a->value);
    }

    PotentialBreakdown config(const Config& k) {
        PotentialBreakdown b;
        b.phi_stack = stack(k.stack);
        b.phi_heap = heap(k);
        switch (k.mode) {
        case Mode::E: b.phi_term = term(k.term); break;
        case Mode::C:
            b.phi_value = value(k.value);
            b.iverson_discount = beta_next(k) ? 9 : 0;
            break;
        case Mode::M: b.phi_value = 2; break;
        case Mode::S: break;
        }
        b.total = b.phi_term + b.phi_value + b.phi_stack + b.phi_heap - b.iverson_discount;
        return b;
    }

private:
    std::unordered_map<const MTermNode*, std::pair<MTerm, std::int64_t>> terms_;
    std::unordered_map<const MValueNode*, std::pair<MValue, std::int64_t>> values_;
};

inline std::int64_t phi_term(const Term& t) { return Potential{}.term(t); }
inline std::int64_t phi_term(const MTerm& t) { return Potential{}.term(t); }
inline std::int64_t phi_value(const MValue& v) { return Potential{}.value(v); }
inline std::int64_t phi_stack(const std::vector<Frame>& s) { return Potential{}.stack(s); }
inline std::int64_t phi_heap(const Config& k) { return Potential{}.heap(k); }
inline PotentialBreakdown phi_config(const Config& k) { return Potential{}.config(k); }

// ---------------------------------------------------------------------------
// Trace audit
// ---------------------------------------------------------------------------

struct AuditOptions {
    std::uint64_t fuel = machine::default_fuel;
    bool shape = true;
    bool decode = true;
    bool potential = true;
    /// Check memo hits (rule 13) against the oracle only when the oracle
    /// normalizes the input within this many steps; 0 disables the check.
    std::uint64_t bypass_gate = 10'000;
};

struct Violation {
    std::uint64_t step = 0;
    int rule = 0;
    std::string what;
    std::string before;
    std::string after;
};

inline std::string to_string(const Violation& v) {
    std::ostringstream os;
    os << "violation at step " << v.step << " (rule " << v.rule << "): " << v.what;
    if (!v.before.empty()) os << "\n  before: " << v.before;
    if (!v.after.empty()) os << "\n  after:  " << v.after;
    return os.str();
}

struct AuditReport {
    std::uint64_t steps = 0;
    std::array<std::uint64_t, 19> rule_counts{};
    bool completed = false;             // reached a final configuration within fuel
    std::int64_t phi_initial_term = 0;  // potential of the input term
    std::vector<std::int64_t> potentials; // potential after each step, [0] = initial
    std::int64_t trace_bound = 0;       // (rule-7 count + 1) * potential of the input
    std::int64_t trace_bound_margin = 0;
    std::uint64_t decode_checks = 0;
    std::uint64_t beta_checks = 0;
    std::uint64_t bypass_checks = 0;
    bool bypass_enabled = false;
    std::optional<Violation> violation; // first violation; the audit stops there

    bool ok() const noexcept { return !violation.has_value(); }
};

namespace detail {

// Whether some oracle reduct of `from` within `budget` steps is
// alpha-equivalent to `target`.
inline bool reaches(const Term& from, const Term& target, std::uint64_t budget) {
    oracle::Reducer r(from);
    Term cur = from;
    for (std::uint64_t i = 0;; ++i) {
        if (alpha_eq(cur, target)) return true;
        if (i == budget) return false;
        auto next = r.step_rrcbv(cur);
        if (!next) return false;
        cur = std::move(*next);
    }
}

} // namespace detail

/// Runs the substitution-based machine on `t` and checks, step by step:
/// strict potential decrease except at rule 7; bounded increase at rule 7;
/// the abstraction-potential bound; the shape invariants; decoding
/// invariance for administrative rules; oracle agreement for rules 5, 9
/// and (when gated in) 13; and finally the overall trace bound. Decoding
/// checks apply to closed inputs only.
inline AuditReport audit_trace(const Term& t, const AuditOptions& opts = {}) {
    AuditReport rep;
    Potential pot;
    ShapeChecker shapes;
    Decoder dec;
    Config k = machine::load(t);

    const std::int64_t phi0 = pot.term(t);
    rep.phi_initial_term = phi0;
    const bool closed = free_vars(t).empty();
    const bool decode_on = opts.decode && closed;

    std::uint64_t bypass_budget = 0;
    if (decode_on && opts.bypass_gate > 0) {
        try {
            bypass_budget = oracle::normalize_rrcbv(t, opts.bypass_gate).beta_count;
            rep.bypass_enabled = true;
        } catch (const FuelExhausted&) {
        }
    }

    auto violate = [&](std::uint64_t step, int rule, std::string what, std::string before = {}) {
        rep.violation = Violation{step, rule, std::move(what), std::move(before), machine::render(k)};
    };

    std::int64_t phi = pot.config(k).total;
    rep.potentials.push_back(phi);
    if (opts.potential && phi != phi0) violate(0, 0, "initial potential differs from the input term's potential");
    Term decoded;
    if (decode_on) decoded = dec.config(k);

    while (!rep.violation && !k.is_final()) {
        if (rep.steps == opts.fuel) break;
        std::string before = machine::render(k);

        // Rule 5 fires exactly when the discount applies; its redex sits in
        // the context below the argument frame.
        std::optional<Term> beta_context;
        if (decode_on && Potential::beta_next(k)) beta_context = dec.context(k, 1);

        auto rule = machine::step(k);
        if (!rule) break;
        const int r = *rule;
        const std::uint64_t i = ++rep.steps;
        ++rep.rule_counts[r];

        if (opts.potential) {
            std::int64_t next = pot.config(k).total;
            rep.potentials.push_back(next);
            if (next < 0) {
                violate(i, r, "negative potential", before);
            } else if (r != 7 && next >= phi) {
                violate(i, r, "potential did not decrease (" + std::to_string(phi) + " -> " + std::to_string(next) + ")", before);
            } else if (r == 7 && next - phi >= phi0) {
                violate(i, r, "rule-7 increase " + std::to_string(next - phi) + " not below " + std::to_string(phi0), before);
            }
            phi = next;
            if (!rep.violation && k.mode == Mode::C && machine::is_vlam(k.value) && pot.value(k.value) >= phi0)
                violate(i, r, "abstraction potential " + std::to_string(pot.value(k.value)) + " not below the input's", before);
        }
        if (rep.violation) break;

        if (opts.shape) {
            auto s = shapes.check(k);
            if (!s) {
                violate(i, r, "shape invariant: " + s.violation, before);
                break;
            }
        }

        if (decode_on) {
            Term next = dec.config(k);
            ++rep.decode_checks;
            if (r == 5) {
                ++rep.beta_checks;
                auto redex = oracle::decompose_rrcbv(decoded);
                if (!redex) {
                    violate(i, r, "rule 5 fired on a decoded normal form", before);
                } else if (!beta_context || !same_term(redex->context, *beta_context)) {
                    violate(i, r, "oracle redex context differs from the machine's stack", before);
                } else {
                    auto reduct = oracle::step_rrcbv(decoded);
                    if (!alpha_eq(*reduct, next)) violate(i, r, "rule 5 disagrees with the oracle's beta step", before);
                }
            } else if (r == 9) {
                if (!alpha_eq(decoded, next)) violate(i, r, "rule 9 changed the decoding beyond renaming", before);
            } else if (r == 13) {
                if (rep.bypass_enabled) {
                    ++rep.bypass_checks;
                    if (!detail::reaches(decoded, next, bypass_budget))
                        violate(i, r, "memoized normal form not reachable by oracle steps", before);
                }
            } else if (!same_term(decoded, next)) {
                violate(i, r, "administrative rule changed the decoding", before);
            }
            decoded = std::move(next);
        }
    }

    rep.completed = k.is_final();
    rep.trace_bound = static_cast<std::int64_t>(rep.rule_counts[7] + 1) * phi0;
    rep.trace_bound_margin = rep.trace_bound - static_cast<std::int64_t>(rep.steps);
    if (!rep.violation && opts.potential && rep.trace_bound_margin < 0)
        rep.violation = Violation{rep.steps, 0, "trace bound exceeded: " + std::to_string(rep.steps) + " > " + std::to_string(rep.trace_bound), {}, {}};
    return rep;
}

// ---------------------------------------------------------------------------
// Bisimulation
// ---------------------------------------------------------------------------

struct BisimReport {
    bool ok = true;
    bool completed = false;
    std::uint64_t steps = 0;
    std::vector<int> rules;
    std::string mismatch;
};

/// Runs both machines in lockstep and checks at every step that they fire
/// the same rule and that the translated environment-machine configuration
/// equals the substitution-machine configuration.
inline BisimReport bisim_check(const Term& t, std::uint64_t fuel = machine::default_fuel) {
    BisimReport rep;
    env_machine::Config ke = env_machine::load(t);
    Config ks = machine::load(t);
    env_machine::Translator tr;
    machine::ConfigComparer cmp;

    if (!cmp.equal(tr.config(ke), ks)) {
        rep.ok = false;
        rep.mismatch = "initial configurations differ";
        return rep;
    }
    while (!ks.is_final() || !ke.is_final()) {
        if (rep.steps == fuel) return rep;
        auto re = env_machine::step(ke);
        auto rs = machine::step(ks);
        ++rep.steps;
        if (re != rs) {
            rep.ok = false;
            rep.mismatch = "step " + std::to_string(rep.steps) + ": environment machine fired rule " +
                           (re ? std::to_string(*re) : "none") + ", substitution machine fired " +
                           (rs ? std::to_string(*rs) : "none");
            return rep;
        }
        rep.rules.push_back(*rs);
        auto translated = tr.config(ke);
        if (!cmp.equal(translated, ks)) {
            rep.ok = false;
            rep.mismatch = "step " + std::to_string(rep.steps) + " (rule " + std::to_string(*rs) +
                           "): translation does not commute\n  env:   " + machine::render(translated) +
                           "\n  subst: " + machine::render(ks);
            return rep;
        }
    }
    rep.completed = true;
    return rep;
}

// ---------------------------------------------------------------------------
// Potential trace
// ---------------------------------------------------------------------------

struct TraceRow {
    std::uint64_t step;
    int rule;
    char mode;
    std::int64_t phi_total;
    std::int64_t phi_heap;
    std::size_t stack_depth;
    std::size_t heap_size;
};

inline constexpr const char* trace_csv_header = "step,rule,mode,phi_total,phi_heap,stack_depth,heap_size";

/// One row per transition, describing the configuration it produced.
inline std::vector<TraceRow> emit_trace(const Term& t, std::uint64_t fuel = machine::default_fuel) {
    std::vector<TraceRow> rows;
    Potential pot;
    machine::run(t, fuel, [&](const machine::StepEvent& ev, const Config& k) {
        auto b = pot.config(k);
        rows.push_back({ev.index, ev.rule, machine::mode_char(ev.mode), b.total, b.phi_heap, k.stack.size(), k.heap.size()});
    });
    return rows;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    os << trace_csv_header << '\n';
    for (const auto& r : rows)
        os << r.step << ',' << r.rule << ',' << r.mode << ',' << r.phi_total << ',' << r.phi_heap << ','
           << r.stack_depth << ',' << r.heap_size << '\n';
}

} // namespace scbv::analysis
