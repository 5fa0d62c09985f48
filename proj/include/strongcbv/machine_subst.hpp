#pragma once

// Substitution-based strong call-by-value machine with delimited substitution
// and a write-once heap of memoized normal forms.
//
// Configurations come in four modes:
//   E  evaluate a term to a weak normal form
//   C  continue with a weak value
//   S  continue with a strong normal form
//   M  consult the heap for a memoized normal form
// Transitions are numbered 1..18 and tried in that order; the first rule
// whose pattern matches fires.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <boost/functional/hash.hpp>

#include "strongcbv/error.hpp"
#include "strongcbv/sharing.hpp"
#include "strongcbv/syntax.hpp"

namespace scbv::machine {

inline constexpr std::uint64_t default_fuel = 10'000'000;

using Location = std::uint32_t;

struct MTermNode;
struct MValueNode;
using MTerm = std::shared_ptr<const MTermNode>;
using MValue = std::shared_ptr<const MValueNode>;

/// t ::= x | t t | \x.t | [v]   where [v] is a substitution delimiter.
struct MTermNode {
    enum class Kind : std::uint8_t { var, app, lam, delim };

    Kind kind;
    Ident id;     // var, lam binder
    MTerm left;   // app function, lam body
    MTerm right;  // app argument
    MValue value; // delim
};

/// v ::= abstract variable | v v | \x.t | v annotated with a heap location.
struct MValueNode {
    enum class Kind : std::uint8_t { avar, vapp, vlam, annot };

    Kind kind;
    Ident id;       // avar, vlam binder
    MValue left;    // vapp function, annot inner
    MValue right;   // vapp argument
    MTerm body;     // vlam
    Location loc = 0;
};

inline MTerm mvar(Ident x) { return std::make_shared<const MTermNode>(MTermNode{MTermNode::Kind::var, std::move(x), {}, {}, {}}); }
inline MTerm mapp(MTerm f, MTerm a) { return std::make_shared<const MTermNode>(MTermNode{MTermNode::Kind::app, {}, std::move(f), std::move(a), {}}); }
inline MTerm mlam(Ident x, MTerm b) { return std::make_shared<const MTermNode>(MTermNode{MTermNode::Kind::lam, std::move(x), std::move(b), {}, {}}); }
inline MTerm delim(MValue v) { return std::make_shared<const MTermNode>(MTermNode{MTermNode::Kind::delim, {}, {}, {}, std::move(v)}); }

inline MValue avar(Ident x) { return std::make_shared<const MValueNode>(MValueNode{MValueNode::Kind::avar, std::move(x), {}, {}, {}}); }
inline MValue vapp(MValue f, MValue a) { return std::make_shared<const MValueNode>(MValueNode{MValueNode::Kind::vapp, {}, std::move(f), std::move(a), {}}); }
inline MValue vlam(Ident x, MTerm b) { return std::make_shared<const MValueNode>(MValueNode{MValueNode::Kind::vlam, std::move(x), {}, {}, std::move(b)}); }
inline MValue annot(Location l, MValue v) { return std::make_shared<const MValueNode>(MValueNode{MValueNode::Kind::annot, {}, std::move(v), {}, {}, l}); }

inline bool is_annot(const MValue& v) { return v->kind == MValueNode::Kind::annot; }
inline bool is_vlam(const MValue& v) { return v->kind == MValueNode::Kind::vlam; }

inline MTerm embed(const Term& t) {
    switch (t->kind) {
    case TermNode::Kind::var: return mvar(t->id);
    case TermNode::Kind::app: return mapp(embed(t->left), embed(t->right));
    case TermNode::Kind::lam: return mlam(t->id, embed(t->left));
    }
    throw std::logic_error("unreachable term kind");
}

/// strip(x) = abstract x, strip([v]) = v.
inline MValue strip(const MTerm& t) {
    if (t->kind == MTermNode::Kind::var) return avar(t->id);
    if (t->kind == MTermNode::Kind::delim) return t->value;
    throw MachineStuck("strip applied to an application or abstraction");
}

/// t[x := d] for a delimiter d. Stops at binders of x and at delimiters;
/// unchanged subterms are shared with the input.
inline MTerm msubst(const Ident& x, const MTerm& d, const MTerm& t) {
    switch (t->kind) {
    case MTermNode::Kind::var: return t->id == x ? d : t;
    case MTermNode::Kind::delim: return t;
    case MTermNode::Kind::lam: {
        if (t->id == x) return t;
        MTerm b = msubst(x, d, t->left);
        return b == t->left ? t : mlam(t->id, std::move(b));
    }
    case MTermNode::Kind::app: {
        MTerm l = msubst(x, d, t->left);
        MTerm r = msubst(x, d, t->right);
        return (l == t->left && r == t->right) ? t : mapp(std::move(l), std::move(r));
    }
    }
    return t;
}

// Stack frames, written as the elementary context each one stands for.
struct FunTerm { MTerm term; };  // t []
struct ArgVal { MValue value; }; // [] v
struct FunVal { MValue value; }; // v []   (v inert)
struct ArgNF { NodeId nf; };     // [] n
struct Binder { Ident x; };      // \x.[]
struct Memo { Location loc; };   // store the normal form at loc
using Frame = std::variant<FunTerm, ArgVal, FunVal, ArgNF, Binder, Memo>;

/// Append-only table of optional normal forms; cells go from empty to
/// filled exactly once.
class Heap {
public:
    Location alloc() {
        cells_.emplace_back();
        return static_cast<Location>(cells_.size() - 1);
    }

    const std::optional<NodeId>& read(Location l) const { return cells_.at(l); }

    void fill(Location l, NodeId n) {
        auto& c = cells_.at(l);
        if (c) throw std::logic_error("heap location " + std::to_string(l) + " written twice");
        c = n;
    }

    std::size_t size() const noexcept { return cells_.size(); }
    friend bool operator==(const Heap&, const Heap&) = default;

private:
    std::vector<std::optional<NodeId>> cells_;
};

enum class Mode : std::uint8_t { E, C, S, M };

inline char mode_char(Mode m) {
    switch (m) {
    case Mode::E: return 'E';
    case Mode::C: return 'C';
    case Mode::S: return 'S';
    case Mode::M: return 'M';
    }
    return '?';
}

/// A machine configuration. Which focus fields are meaningful depends on the
/// mode: E uses `term`; C uses `value`; S uses `nf`; M uses `found`, `loc`
/// and `value`. Normal forms live in `graph`; the top of `stack` is its back.
struct Config {
    Mode mode = Mode::E;
    MTerm term;
    MValue value;
    NodeId nf = no_node;
    std::optional<NodeId> found;
    Location loc = 0;
    std::vector<Frame> stack;
    Heap heap;
    std::uint64_t counter = 0;
    TermGraph graph;

    bool is_final() const noexcept { return mode == Mode::S && stack.empty(); }
};

inline Config load(const Term& t) {
    Config k;
    k.mode = Mode::E;
    k.term = embed(t);
    return k;
}

/// Performs one transition in place and returns its number, or nothing if
/// `k` is final.
inline std::optional<int> step(Config& k) {
    auto& S = k.stack;
    switch (k.mode) {
    case Mode::E: {
        MTerm t = k.term;
        switch (t->kind) {
        case MTermNode::Kind::app:
            S.push_back(FunTerm{t->left});
            k.term = t->right;
            return 1;
        case MTermNode::Kind::lam:
            k.value = vlam(t->id, t->left);
            k.term = nullptr;
            k.mode = Mode::C;
            return 2;
        case MTermNode::Kind::var:
        case MTermNode::Kind::delim:
            k.value = strip(t);
            k.term = nullptr;
            k.mode = Mode::C;
            return 3;
        }
        break;
    }
    case Mode::C: {
        const MValue v = k.value;
        if (!S.empty()) {
            if (auto* f = std::get_if<FunTerm>(&S.back())) {
                MTerm t = f->term;
                S.back() = ArgVal{v};
                k.term = std::move(t);
                k.value = nullptr;
                k.mode = Mode::E;
                return 4;
            }
            if (auto* a = std::get_if<ArgVal>(&S.back())) {
                if (is_vlam(v) && is_annot(a->value)) {
                    MTerm d = delim(a->value);
                    S.pop_back();
                    k.term = msubst(v->id, d, v->body);
                    k.value = nullptr;
                    k.mode = Mode::E;
                    return 5;
                }
                if (is_vlam(v)) {
                    a->value = annot(k.heap.alloc(), a->value);
                    return 6;
                }
                if (is_annot(v) && is_vlam(v->left)) {
                    k.value = v->left;
                    return 7;
                }
                MValue arg = a->value;
                S.pop_back();
                k.value = vapp(v, std::move(arg));
                return 8;
            }
        }
        switch (v->kind) {
        case MValueNode::Kind::vlam: {
            Ident fresh = Ident::generated("x", k.counter++);
            Location l = k.heap.alloc();
            k.term = msubst(v->id, delim(annot(l, avar(fresh))), v->body);
            k.value = nullptr;
            S.push_back(Binder{std::move(fresh)});
            k.mode = Mode::E;
            return 9;
        }
        case MValueNode::Kind::avar:
            k.nf = k.graph.add_var(v->id);
            k.value = nullptr;
            k.mode = Mode::S;
            return 10;
        case MValueNode::Kind::vapp:
            S.push_back(FunVal{v->left});
            k.value = v->right;
            return 11;
        case MValueNode::Kind::annot:
            k.found = k.heap.read(v->loc);
            k.loc = v->loc;
            k.value = v->left;
            k.mode = Mode::M;
            return 12;
        }
        break;
    }
    case Mode::M:
        if (k.found) {
            k.nf = *k.found;
            k.found.reset();
            k.value = nullptr;
            k.mode = Mode::S;
            return 13;
        }
        S.push_back(Memo{k.loc});
        k.mode = Mode::C;
        return 14;
    case Mode::S: {
        if (S.empty()) return std::nullopt;
        Frame& top = S.back();
        if (auto* m = std::get_if<Memo>(&top)) {
            k.heap.fill(m->loc, k.nf);
            S.pop_back();
            return 15;
        }
        if (auto* f = std::get_if<FunVal>(&top)) {
            MValue v = f->value;
            top = ArgNF{k.nf};
            k.value = std::move(v);
            k.nf = no_node;
            k.mode = Mode::C;
            return 16;
        }
        if (auto* a = std::get_if<ArgNF>(&top)) {
            k.nf = k.graph.add_app(k.nf, a->nf);
            S.pop_back();
            return 17;
        }
        if (auto* b = std::get_if<Binder>(&top)) {
            k.nf = k.graph.add_lam(b->x, k.nf);
            S.pop_back();
            return 18;
        }
        break;
    }
    }
    throw MachineStuck(std::string("no transition applies in mode ") + mode_char(k.mode));
}

/// The normal form of a final configuration. Memoized normal forms are
/// shared nodes of the result; nothing is unfolded.
inline TermGraph unload(Config&& k) {
    if (!k.is_final()) throw std::logic_error("unload of a non-final configuration");
    TermGraph g = std::move(k.graph);
    g.set_root(k.nf);
    return g;
}

struct StepEvent {
    std::uint64_t index; // 1-based
    int rule;
    Mode mode;           // mode after the transition
};

/// Called after every transition with the resulting configuration.
using StepHook = std::function<void(const StepEvent&, const Config&)>;

struct RunResult {
    TermGraph nf;
    std::array<std::uint64_t, 19> rule_counts{}; // index 0 unused
    std::uint64_t steps = 0;
    std::size_t heap_size = 0;
    std::size_t max_stack_depth = 0;

    std::uint64_t beta() const noexcept { return rule_counts[5]; }
};

/// Shared driver for both machines: steps `k` to completion under a fuel
/// budget counting numbered transitions only.
template <class Cfg, class StepFn, class Hook>
RunResult drive(Cfg& k, std::uint64_t fuel, StepFn&& step_fn, Hook&& hook, std::vector<int>* rules_out = nullptr) {
    RunResult r;
    for (;;) {
        if (k.is_final()) break;
        if (r.steps == fuel) throw FuelExhausted(r.steps);
        auto rule = step_fn(k);
        if (!rule) break;
        ++r.steps;
        ++r.rule_counts[*rule];
        r.max_stack_depth = std::max(r.max_stack_depth, k.stack.size());
        if (rules_out) rules_out->push_back(*rule);
        hook(StepEvent{r.steps, *rule, k.mode}, k);
    }
    r.heap_size = k.heap.size();
    return r;
}

inline RunResult run(const Term& t, std::uint64_t fuel = default_fuel, const StepHook& hook = {},
                     std::vector<int>* rules_out = nullptr) {
    Config k = load(t);
    auto noop = [](const StepEvent&, const Config&) {};
    RunResult r = hook ? drive(k, fuel, step, hook, rules_out) : drive(k, fuel, step, noop, rules_out);
    r.nf = unload(std::move(k));
    return r;
}

// ---------------------------------------------------------------------------
// Rendering (diagnostics only)
// ---------------------------------------------------------------------------

// Values are shared only through annotations, so printing each location's
// value once, and `{@l}` at later occurrences, keeps output linear in the
// size of the configuration graph.
class Renderer {
public:
    std::string operator()(const MTerm& t) { std::string s; term(s, t); return s; }
    std::string operator()(const MValue& v) { std::string s; value(s, v); return s; }
    std::string operator()(const Frame& f) { std::string s; frame(s, f); return s; }

    std::string operator()(const Config& k) {
        std::string s;
        s += mode_char(k.mode);
        s += ' ';
        switch (k.mode) {
        case Mode::E: term(s, k.term); break;
        case Mode::C: value(s, k.value); break;
        case Mode::S: s += "@" + std::to_string(k.nf); break;
        case Mode::M:
            s += (k.found ? "@" + std::to_string(*k.found) : std::string("none")) + " loc " + std::to_string(k.loc) + " ";
            value(s, k.value);
            break;
        }
        s += " | stack:";
        for (auto it = k.stack.rbegin(); it != k.stack.rend(); ++it) {
            s += ' ';
            frame(s, *it);
            s += " ::";
        }
        s += " . | heap " + std::to_string(k.heap.size()) + " | counter " + std::to_string(k.counter);
        return s;
    }

private:
    std::unordered_set<Location> shown_;

    void term(std::string& s, const MTerm& t) {
        switch (t->kind) {
        case MTermNode::Kind::var: s += to_string(t->id); return;
        case MTermNode::Kind::delim: s += '['; value(s, t->value); s += ']'; return;
        case MTermNode::Kind::lam: s += "(\\" + to_string(t->id) + ". "; term(s, t->left); s += ')'; return;
        case MTermNode::Kind::app: s += '('; term(s, t->left); s += ' '; term(s, t->right); s += ')'; return;
        }
    }

    void value(std::string& s, const MValue& v) {
        switch (v->kind) {
        case MValueNode::Kind::avar: s += "~" + to_string(v->id); return;
        case MValueNode::Kind::vapp: s += '('; value(s, v->left); s += ' '; value(s, v->right); s += ')'; return;
        case MValueNode::Kind::vlam: s += "(\\" + to_string(v->id) + ". "; term(s, v->body); s += ')'; return;
        case MValueNode::Kind::annot:
            if (!shown_.insert(v->loc).second) {
                s += "{@" + std::to_string(v->loc) + "}";
                return;
            }
            s += '{';
            value(s, v->left);
            s += "}@" + std::to_string(v->loc);
            return;
        }
    }

    void frame(std::string& s, const Frame& f) {
        std::visit([&](const auto& fr) {
            using F = std::decay_t<decltype(fr)>;
            if constexpr (std::is_same_v<F, FunTerm>) { term(s, fr.term); s += " []"; }
            else if constexpr (std::is_same_v<F, ArgVal>) { s += "[] "; value(s, fr.value); }
            else if constexpr (std::is_same_v<F, FunVal>) { value(s, fr.value); s += " []"; }
            else if constexpr (std::is_same_v<F, ArgNF>) s += "[] @" + std::to_string(fr.nf);
            else if constexpr (std::is_same_v<F, Binder>) s += "\\" + to_string(fr.x) + ". []";
            else s += "<" + std::to_string(fr.loc) + ">";
        }, f);
    }
};

inline std::string render(const MTerm& t) { return Renderer{}(t); }
inline std::string render(const MValue& v) { return Renderer{}(v); }
inline std::string render(const Frame& f) { return Renderer{}(f); }
inline std::string render(const Config& k) { return Renderer{}(k); }

// ---------------------------------------------------------------------------
// Structural equality of configurations
// ---------------------------------------------------------------------------

/// Compares configurations structurally. Pairs of nodes found equal are
/// remembered (and kept alive), so repeated comparisons along a run only
/// pay for what changed.
class ConfigComparer {
public:
    bool equal(const MTerm& a, const MTerm& b) {
        if (a == b) return true;
        if (!a || !b || a->kind != b->kind) return false;
        if (known(a.get(), b.get())) return true;
        bool r = false;
        switch (a->kind) {
        case MTermNode::Kind::var: r = a->id == b->id; break;
        case MTermNode::Kind::delim: r = equal(a->value, b->value); break;
        case MTermNode::Kind::lam: r = a->id == b->id && equal(a->left, b->left); break;
        case MTermNode::Kind::app: r = equal(a->left, b->left) && equal(a->right, b->right); break;
        }
        if (r) remember(a, b);
        return r;
    }

    bool equal(const MValue& a, const MValue& b) {
        if (a == b) return true;
        if (!a || !b || a->kind != b->kind) return false;
        if (known(a.get(), b.get())) return true;
        bool r = false;
        switch (a->kind) {
        case MValueNode::Kind::avar: r = a->id == b->id; break;
        case MValueNode::Kind::vapp: r = equal(a->left, b->left) && equal(a->right, b->right); break;
        case MValueNode::Kind::vlam: r = a->id == b->id && equal(a->body, b->body); break;
        case MValueNode::Kind::annot: r = a->loc == b->loc && equal(a->left, b->left); break;
        }
        if (r) remember(a, b);
        return r;
    }

    bool equal(const Frame& a, const Frame& b) {
        if (a.index() != b.index()) return false;
        return std::visit([&](const auto& fa) -> bool {
            using F = std::decay_t<decltype(fa)>;
            const auto& fb = std::get<F>(b);
            if constexpr (std::is_same_v<F, FunTerm>) return equal(fa.term, fb.term);
            else if constexpr (std::is_same_v<F, ArgVal> || std::is_same_v<F, FunVal>) return equal(fa.value, fb.value);
            else if constexpr (std::is_same_v<F, ArgNF>) return fa.nf == fb.nf;
            else if constexpr (std::is_same_v<F, Binder>) return fa.x == fb.x;
            else return fa.loc == fb.loc;
        }, a);
    }

    bool equal(const Config& a, const Config& b) {
        if (a.mode != b.mode || a.counter != b.counter || a.stack.size() != b.stack.size()) return false;
        switch (a.mode) {
        case Mode::E: if (!equal(a.term, b.term)) return false; break;
        case Mode::C: if (!equal(a.value, b.value)) return false; break;
        case Mode::S: if (a.nf != b.nf) return false; break;
        case Mode::M:
            if (a.found != b.found || a.loc != b.loc || !equal(a.value, b.value)) return false;
            break;
        }
        for (std::size_t i = 0; i < a.stack.size(); ++i)
            if (!equal(a.stack[i], b.stack[i])) return false;
        if (!(a.heap == b.heap)) return false;
        return equal_graphs(a.graph, b.graph);
    }

private:
    struct PairHash {
        std::size_t operator()(const std::pair<const void*, const void*>& p) const {
            std::size_t h = 0;
            boost::hash_combine(h, p.first);
            boost::hash_combine(h, p.second);
            return h;
        }
    };
    std::unordered_set<std::pair<const void*, const void*>, PairHash> seen_;
    std::vector<std::shared_ptr<const void>> keep_;
    std::size_t graph_checked_ = 0;

    bool known(const void* a, const void* b) const { return seen_.contains({a, b}); }

    template <class P>
    void remember(const P& a, const P& b) {
        seen_.insert({a.get(), b.get()});
        keep_.push_back(a);
        keep_.push_back(b);
    }

    // Graphs are append-only, so a verified prefix stays verified.
    bool equal_graphs(const TermGraph& a, const TermGraph& b) {
        if (a.table_size() != b.table_size()) return false;
        if (graph_checked_ > a.table_size()) graph_checked_ = 0;
        for (std::size_t i = graph_checked_; i < a.table_size(); ++i)
            if (!(a.node(static_cast<NodeId>(i)) == b.node(static_cast<NodeId>(i)))) return false;
        graph_checked_ = a.table_size();
        return true;
    }
};

} // namespace scbv::machine
