#pragma once

// Environment-based variant of the strong call-by-value machine. Closures
// pair source subterms with persistent environments; rules 3, 5 and 9 read
// or extend environments where the substitution-based machine substitutes.
// `translate_config` maps its configurations onto the substitution-based
// machine's, and the two run in lockstep.

#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "strongcbv/machine_subst.hpp"
#include "strongcbv/persistent_map.hpp"

namespace scbv::env_machine {

using machine::Heap;
using machine::Location;
using machine::Mode;
using machine::RunResult;
using machine::StepEvent;

struct EValueNode;
using EValue = std::shared_ptr<const EValueNode>;
using Env = PersistentMap<Ident, EValue>;

/// v ::= abstract variable | v v | closure \x.t[E] | v annotated with a location.
struct EValueNode {
    enum class Kind : std::uint8_t { avar, vapp, clo, annot };

    Kind kind;
    Ident id;     // avar, closure binder
    EValue left;  // vapp function, annot inner
    EValue right; // vapp argument
    Term body;    // closure
    Env env;      // closure
    Location loc = 0;
};

inline EValue avar(Ident x) { return std::make_shared<const EValueNode>(EValueNode{EValueNode::Kind::avar, std::move(x), {}, {}, {}, {}}); }
inline EValue vapp(EValue f, EValue a) { return std::make_shared<const EValueNode>(EValueNode{EValueNode::Kind::vapp, {}, std::move(f), std::move(a), {}, {}}); }
inline EValue clo(Ident x, Term body, Env env) { return std::make_shared<const EValueNode>(EValueNode{EValueNode::Kind::clo, std::move(x), {}, {}, std::move(body), std::move(env)}); }
inline EValue annot(Location l, EValue v) { return std::make_shared<const EValueNode>(EValueNode{EValueNode::Kind::annot, {}, std::move(v), {}, {}, {}, l}); }

inline bool is_annot(const EValue& v) { return v->kind == EValueNode::Kind::annot; }
inline bool is_clo(const EValue& v) { return v->kind == EValueNode::Kind::clo; }

/// Unbound identifiers denote abstract variables marked as free.
inline EValue lookup(const Env& e, const Ident& x) {
    if (const EValue* v = e.find(x)) return *v;
    return avar(Ident::free_marker(x.name));
}

struct FunClo { Term term; Env env; };   // t[E] []
struct ArgVal { EValue value; };         // [] v
struct FunVal { EValue value; };         // v []
using machine::ArgNF;
using machine::Binder;
using machine::Memo;
using Frame = std::variant<FunClo, ArgVal, FunVal, ArgNF, Binder, Memo>;

struct Config {
    Mode mode = Mode::E;
    Term term;
    Env env;
    EValue value;
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
    k.term = t;
    return k;
}

inline std::optional<int> step(Config& k) {
    auto& S = k.stack;
    switch (k.mode) {
    case Mode::E: {
        Term t = k.term;
        switch (t->kind) {
        case TermNode::Kind::app:
            S.push_back(FunClo{t->left, k.env});
            k.term = t->right;
            return 1;
        case TermNode::Kind::lam:
            k.value = clo(t->id, t->left, std::move(k.env));
            k.env = {};
            k.term = nullptr;
            k.mode = Mode::C;
            return 2;
        case TermNode::Kind::var:
            k.value = lookup(k.env, t->id);
            k.env = {};
            k.term = nullptr;
            k.mode = Mode::C;
            return 3;
        }
        break;
    }
    case Mode::C: {
        const EValue v = k.value;
        if (!S.empty()) {
            if (auto* f = std::get_if<FunClo>(&S.back())) {
                Term t = f->term;
                Env e = f->env;
                S.back() = ArgVal{v};
                k.term = std::move(t);
                k.env = std::move(e);
                k.value = nullptr;
                k.mode = Mode::E;
                return 4;
            }
            if (auto* a = std::get_if<ArgVal>(&S.back())) {
                if (is_clo(v) && is_annot(a->value)) {
                    k.env = v->env.insert(v->id, a->value);
                    k.term = v->body;
                    S.pop_back();
                    k.value = nullptr;
                    k.mode = Mode::E;
                    return 5;
                }
                if (is_clo(v)) {
                    a->value = annot(k.heap.alloc(), a->value);
                    return 6;
                }
                if (is_annot(v) && is_clo(v->left)) {
                    k.value = v->left;
                    return 7;
                }
                EValue arg = a->value;
                S.pop_back();
                k.value = vapp(v, std::move(arg));
                return 8;
            }
        }
        switch (v->kind) {
        case EValueNode::Kind::clo: {
            Ident fresh = Ident::generated("x", k.counter++);
            Location l = k.heap.alloc();
            k.env = v->env.insert(v->id, annot(l, avar(fresh)));
            k.term = v->body;
            k.value = nullptr;
            S.push_back(Binder{std::move(fresh)});
            k.mode = Mode::E;
            return 9;
        }
        case EValueNode::Kind::avar:
            k.nf = k.graph.add_var(v->id);
            k.value = nullptr;
            k.mode = Mode::S;
            return 10;
        case EValueNode::Kind::vapp:
            S.push_back(FunVal{v->left});
            k.value = v->right;
            return 11;
        case EValueNode::Kind::annot:
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
            EValue v = f->value;
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
    throw MachineStuck(std::string("no transition applies in mode ") + machine::mode_char(k.mode));
}

inline TermGraph unload(Config&& k) {
    if (!k.is_final()) throw std::logic_error("unload of a non-final configuration");
    TermGraph g = std::move(k.graph);
    g.set_root(k.nf);
    return g;
}

using StepHook = std::function<void(const StepEvent&, const Config&)>;

inline RunResult run(const Term& t, std::uint64_t fuel = machine::default_fuel, const StepHook& hook = {},
                     std::vector<int>* rules_out = nullptr) {
    Config k = load(t);
    auto noop = [](const StepEvent&, const Config&) {};
    RunResult r = hook ? machine::drive(k, fuel, step, hook, rules_out) : machine::drive(k, fuel, step, noop, rules_out);
    r.nf = unload(std::move(k));
    return r;
}

// ---------------------------------------------------------------------------
// Closure translation
//
//   <E, x>     = [E(x)]  if x is bound in E, else x
//   <E, t1 t2> = <E, t1> <E, t2>
//   <E, \x.t>  = \x. <E \ x, t>
//
// Free-marked abstract variables map back to plain source names, since the
// substitution-based machine strips an unbound x to the abstract variable x.
// ---------------------------------------------------------------------------

class Translator {
public:
    machine::MTerm term(const Env& e, const Term& t) {
        std::vector<Ident> shadowed;
        return term_rec(e, t, shadowed);
    }

    machine::MValue value(const EValue& v) {
        if (auto it = values_.find(v.get()); it != values_.end()) return it->second.second;
        machine::MValue out;
        switch (v->kind) {
        case EValueNode::Kind::avar: out = machine::avar(strip_free_marker(v->id)); break;
        case EValueNode::Kind::vapp: out = machine::vapp(value(v->left), value(v->right)); break;
        case EValueNode::Kind::annot: out = machine::annot(v->loc, value(v->left)); break;
        case EValueNode::Kind::clo: {
            std::vector<Ident> shadowed{v->id};
            out = machine::vlam(v->id, term_rec(v->env, v->body, shadowed));
            break;
        }
        }
        values_.emplace(v.get(), std::make_pair(v, out));
        return out;
    }

    machine::Frame frame(const Frame& f) {
        return std::visit([&](const auto& fr) -> machine::Frame {
            using F = std::decay_t<decltype(fr)>;
            if constexpr (std::is_same_v<F, FunClo>) return machine::FunTerm{closure_term(fr.env, fr.term)};
            else if constexpr (std::is_same_v<F, ArgVal>) return machine::ArgVal{value(fr.value)};
            else if constexpr (std::is_same_v<F, FunVal>) return machine::FunVal{value(fr.value)};
            else return fr;
        }, f);
    }

    machine::Config config(const Config& k) {
        machine::Config out;
        out.mode = k.mode;
        switch (k.mode) {
        case Mode::E: out.term = closure_term(k.env, k.term); break;
        case Mode::C: out.value = value(k.value); break;
        case Mode::S: out.nf = k.nf; break;
        case Mode::M:
            out.found = k.found;
            out.loc = k.loc;
            out.value = value(k.value);
            break;
        }
        out.stack.reserve(k.stack.size());
        for (const auto& f : k.stack) out.stack.push_back(frame(f));
        out.heap = k.heap;
        out.counter = k.counter;
        for (const auto& n : k.graph.nodes()) {
            switch (n.kind) {
            case GraphNode::Kind::var: out.graph.add_var(strip_free_marker(n.id)); break;
            case GraphNode::Kind::app: out.graph.add_app(n.left, n.right); break;
            case GraphNode::Kind::lam: out.graph.add_lam(n.id, n.left); break;
            }
        }
        return out;
    }

private:
    // Keyed by node address; the stored pointer keeps the key alive.
    std::unordered_map<const EValueNode*, std::pair<EValue, machine::MValue>> values_;
    std::map<std::pair<const TermNode*, const void*>, std::tuple<Term, Env, machine::MTerm>> closures_;

    machine::MTerm closure_term(const Env& e, const Term& t) {
        auto key = std::make_pair(t.get(), e.id());
        if (auto it = closures_.find(key); it != closures_.end()) return std::get<2>(it->second);
        machine::MTerm out = term(e, t);
        closures_.emplace(key, std::make_tuple(t, e, out));
        return out;
    }

    machine::MTerm term_rec(const Env& e, const Term& t, std::vector<Ident>& shadowed) {
        switch (t->kind) {
        case TermNode::Kind::var: {
            bool hidden = std::find(shadowed.begin(), shadowed.end(), t->id) != shadowed.end();
            if (!hidden)
                if (const EValue* v = e.find(t->id)) return machine::delim(value(*v));
            return machine::mvar(t->id);
        }
        case TermNode::Kind::app: {
            auto l = term_rec(e, t->left, shadowed);
            auto r = term_rec(e, t->right, shadowed);
            return machine::mapp(std::move(l), std::move(r));
        }
        case TermNode::Kind::lam: {
            shadowed.push_back(t->id);
            auto b = term_rec(e, t->left, shadowed);
            shadowed.pop_back();
            return machine::mlam(t->id, std::move(b));
        }
        }
        throw std::logic_error("unreachable term kind");
    }
};

inline machine::MTerm translate_term(const Env& e, const Term& t) { return Translator{}.term(e, t); }
inline machine::Config translate_config(const Config& k) { return Translator{}.config(k); }

} // namespace scbv::env_machine
