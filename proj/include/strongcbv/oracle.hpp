#pragma once

// Reference reduction semantics for twice right-to-left strong call-by-value
// (rrCbV) and its weak right-to-left fragment. Deliberately naive: every step
// re-searches the whole term, which keeps it independent of the machines.

#include <cstdint>
#include <optional>
#include <vector>

#include "strongcbv/error.hpp"
#include "strongcbv/syntax.hpp"

namespace scbv::oracle {

inline constexpr std::uint64_t default_fuel = 1'000'000;

// Grammar membership:
//   w ::= \x.t | i      i ::= i w | x
//   n ::= \x.n | a      a ::= a n | x
inline bool is_inert(const Term& t);

inline bool is_wnf(const Term& t) { return is_lam(t) || is_inert(t); }

inline bool is_inert(const Term& t) {
    const TermNode* n = t.get();
    while (n->kind == TermNode::Kind::app) {
        if (!is_wnf(n->right)) return false;
        n = n->left.get();
    }
    return n->kind == TermNode::Kind::var;
}

inline bool is_neutral(const Term& t);

inline bool is_normal(const Term& t) {
    const TermNode* n = t.get();
    while (n->kind == TermNode::Kind::lam) n = n->left.get();
    while (n->kind == TermNode::Kind::app) {
        if (!is_normal(n->right)) return false;
        n = n->left.get();
    }
    return n->kind == TermNode::Kind::var;
}

inline bool is_neutral(const Term& t) { return !is_lam(t) && is_normal(t); }

enum class TermClass : std::uint8_t { normal, neutral, wnf, inert, reducible };

class ClassSet {
public:
    void insert(TermClass c) { bits_ |= bit(c); }
    bool contains(TermClass c) const { return (bits_ & bit(c)) != 0; }
    friend bool operator==(const ClassSet&, const ClassSet&) = default;

private:
    std::uint8_t bits_ = 0;
    static std::uint8_t bit(TermClass c) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c)); }
};

/// `reducible` is the complement of `normal`: the term has an rrCbV redex.
inline ClassSet classify(const Term& t) {
    ClassSet s;
    if (is_normal(t)) s.insert(TermClass::normal);
    else s.insert(TermClass::reducible);
    if (is_neutral(t)) s.insert(TermClass::neutral);
    if (is_wnf(t)) s.insert(TermClass::wnf);
    if (is_inert(t)) s.insert(TermClass::inert);
    return s;
}

/// Path from the root to a subterm.
enum class Dir : std::uint8_t { fun, arg, body };
using Path = std::vector<Dir>;

namespace detail {

inline bool is_redex(const Term& t) { return is_app(t) && is_lam(t->left) && is_wnf(t->right); }

// F ::= t F | F w | []
inline bool find_F(const Term& t, Path& p) {
    if (!is_app(t)) return false;
    if (!is_wnf(t->right)) {
        p.push_back(Dir::arg);
        return find_F(t->right, p);
    }
    if (!is_wnf(t->left)) {
        p.push_back(Dir::fun);
        return find_F(t->left, p);
    }
    return is_lam(t->left);
}

inline bool find_R(const Term& t, Path& p);

// H ::= i R | H n, applied to an inert term.
inline bool find_H(const Term& t, Path& p) {
    if (!is_app(t)) return false;
    if (!is_normal(t->right)) {
        p.push_back(Dir::arg);
        return find_R(t->right, p);
    }
    p.push_back(Dir::fun);
    return find_H(t->left, p);
}

// R ::= \x.R | H | F
inline bool find_R(const Term& t, Path& p) {
    if (!is_wnf(t)) return find_F(t, p);
    if (is_lam(t)) {
        p.push_back(Dir::body);
        return find_R(t->left, p);
    }
    return find_H(t, p);
}

inline const Term& at(const Term& t, const Path& p) {
    const Term* cur = &t;
    for (Dir d : p) cur = d == Dir::arg ? &(*cur)->right : &(*cur)->left;
    return *cur;
}

inline Term replace_at(const Term& t, const Path& p, std::size_t i, const Term& with) {
    if (i == p.size()) return with;
    switch (p[i]) {
    case Dir::fun: return app(replace_at(t->left, p, i + 1, with), t->right);
    case Dir::arg: return app(t->left, replace_at(t->right, p, i + 1, with));
    case Dir::body: return lam(t->id, replace_at(t->left, p, i + 1, with));
    }
    return t;
}

} // namespace detail

/// Context `c` with its hole filled by `t`.
inline Term plug(const Term& c, const Term& t) {
    switch (c->kind) {
    case TermNode::Kind::var: return c->id == Ident::hole() ? t : c;
    case TermNode::Kind::lam: return lam(c->id, plug(c->left, t));
    case TermNode::Kind::app: return app(plug(c->left, t), plug(c->right, t));
    }
    return c;
}

struct Redex {
    Term context; // exactly one hole
    Ident bound;
    Term body;
    Term argument;
    Path path;
};

namespace detail {

inline Redex make_redex(const Term& t, Path path) {
    const Term& r = at(t, path);
    return {replace_at(t, path, 0, var(Ident::hole())), r->left->id, r->left->left, r->right, std::move(path)};
}

} // namespace detail

/// The unique rrCbV decomposition, or nothing if `t` is normal.
inline std::optional<Redex> decompose_rrcbv(const Term& t) {
    Path p;
    if (!detail::find_R(t, p)) return std::nullopt;
    return detail::make_redex(t, std::move(p));
}

/// The weak right-to-left decomposition, or nothing if `t` is a wnf.
inline std::optional<Redex> decompose_weak(const Term& t) {
    Path p;
    if (!detail::find_F(t, p)) return std::nullopt;
    return detail::make_redex(t, std::move(p));
}

/// One contraction step. Fresh names for renaming come from `names`.
class Reducer {
public:
    explicit Reducer(const Term& initial) : names_{next_generated_index(initial)} {}

    std::optional<Term> step_rrcbv(const Term& t) { return contract(t, decompose_rrcbv(t)); }
    std::optional<Term> step_weak(const Term& t) { return contract(t, decompose_weak(t)); }

private:
    NameSupply names_;

    std::optional<Term> contract(const Term& t, const std::optional<Redex>& r) {
        if (!r) return std::nullopt;
        Term reduct = subst_capture_avoiding(r->bound, r->argument, r->body, names_);
        return detail::replace_at(t, r->path, 0, reduct);
    }
};

inline std::optional<Term> step_rrcbv(const Term& t) { return Reducer(t).step_rrcbv(t); }

struct Normalized {
    Term term;
    std::uint64_t beta_count = 0;
};

inline Normalized normalize_rrcbv(const Term& t, std::uint64_t fuel = default_fuel) {
    Reducer r(t);
    Normalized out{t, 0};
    while (auto next = r.step_rrcbv(out.term)) {
        if (out.beta_count == fuel) throw FuelExhausted(out.beta_count);
        out.term = std::move(*next);
        ++out.beta_count;
    }
    return out;
}

inline Normalized weak_normalize_f(const Term& t, std::uint64_t fuel = default_fuel) {
    Reducer r(t);
    Normalized out{t, 0};
    while (auto next = r.step_weak(out.term)) {
        if (out.beta_count == fuel) throw FuelExhausted(out.beta_count);
        out.term = std::move(*next);
        ++out.beta_count;
    }
    return out;
}

} // namespace scbv::oracle
