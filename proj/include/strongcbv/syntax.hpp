#pragma once

// Named lambda terms: representation, concrete syntax, variable analysis,
// capture-avoiding substitution, alpha-equivalence and the standard term
// families used throughout the test corpus.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "strongcbv/error.hpp"

namespace scbv {

/// Identifier with a namespace tag. Generated names never collide with
/// source names because the tag takes part in comparison.
struct Ident {
    enum class Tag : std::uint8_t { source, free_marker, generated, hole };

    std::string name;
    Tag tag = Tag::source;
    std::uint64_t index = 0;

    static Ident source(std::string n) { return {std::move(n), Tag::source, 0}; }
    static Ident free_marker(std::string n) { return {std::move(n), Tag::free_marker, 0}; }
    static Ident generated(std::string base, std::uint64_t i) { return {std::move(base), Tag::generated, i}; }
    static Ident hole() { return {"[]", Tag::hole, 0}; }

    bool is_generated() const noexcept { return tag == Tag::generated; }

    friend auto operator<=>(const Ident&, const Ident&) = default;
    friend bool operator==(const Ident&, const Ident&) = default;
};

inline std::string to_string(const Ident& id) {
    switch (id.tag) {
    case Ident::Tag::source: return id.name;
    case Ident::Tag::free_marker: return id.name + "_free";
    case Ident::Tag::generated: return id.name + "_" + std::to_string(id.index);
    case Ident::Tag::hole: return "[]";
    }
    return id.name;
}

/// Drops the free marker, leaving every other identifier untouched.
inline Ident strip_free_marker(const Ident& id) {
    return id.tag == Ident::Tag::free_marker ? Ident::source(id.name) : id;
}

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

struct TermNode {
    enum class Kind : std::uint8_t { var, app, lam };

    Kind kind;
    Ident id;     // var, lam binder
    Term left;    // app function, lam body
    Term right;   // app argument
};

inline Term var(Ident x) { return std::make_shared<const TermNode>(TermNode{TermNode::Kind::var, std::move(x), nullptr, nullptr}); }
inline Term var(std::string x) { return var(Ident::source(std::move(x))); }
inline Term app(Term f, Term a) { return std::make_shared<const TermNode>(TermNode{TermNode::Kind::app, {}, std::move(f), std::move(a)}); }
inline Term lam(Ident x, Term body) { return std::make_shared<const TermNode>(TermNode{TermNode::Kind::lam, std::move(x), std::move(body), nullptr}); }
inline Term lam(std::string x, Term body) { return lam(Ident::source(std::move(x)), std::move(body)); }

inline bool is_var(const Term& t) { return t->kind == TermNode::Kind::var; }
inline bool is_app(const Term& t) { return t->kind == TermNode::Kind::app; }
inline bool is_lam(const Term& t) { return t->kind == TermNode::Kind::lam; }

/// Structural identity, names included.
inline bool same_term(const Term& a, const Term& b) {
    if (a == b) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case TermNode::Kind::var: return a->id == b->id;
    case TermNode::Kind::lam: return a->id == b->id && same_term(a->left, b->left);
    case TermNode::Kind::app: return same_term(a->left, b->left) && same_term(a->right, b->right);
    }
    return false;
}

/// Number of constructors.
inline std::uint64_t term_size(const Term& t) {
    switch (t->kind) {
    case TermNode::Kind::var: return 1;
    case TermNode::Kind::lam: return 1 + term_size(t->left);
    case TermNode::Kind::app: return 1 + term_size(t->left) + term_size(t->right);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------

struct ParseOptions {
    /// Read `name_<digits>` as a generated identifier and `name_free` as a
    /// free marker instead of rejecting them. Used to read back printed output.
    bool read_reserved = false;
};

namespace detail {

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

// Splits `base_<digits>`; returns false if the name has no such suffix.
inline bool split_generated(std::string_view s, std::string& base, std::uint64_t& index) {
    auto us = s.rfind('_');
    if (us == std::string_view::npos || us == 0 || us + 1 == s.size()) return false;
    auto digits = s.substr(us + 1);
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return false;
    if (digits.size() > 18) return false;
    base = std::string(s.substr(0, us));
    index = std::stoull(std::string(digits));
    return true;
}

inline bool ends_with_free(std::string_view s) {
    constexpr std::string_view suffix = "_free";
    return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

class Parser {
public:
    Parser(std::string_view text, ParseOptions opts) : text_(text), opts_(opts) {}

    Term parse_all() {
        skip();
        if (at_end()) fail("empty input");
        Term t = term();
        skip();
        if (!at_end()) fail(std::string("unexpected '") + peek() + "'");
        return t;
    }

private:
    std::string_view text_;
    ParseOptions opts_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip() {
        while (!at_end()) {
            char c = peek();
            if (c == '#') {
                while (!at_end() && peek() != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }

    Ident ident() {
        skip();
        if (at_end() || !ident_start(peek())) fail(at_end() ? "expected identifier, found end of input" : std::string("expected identifier, found '") + peek() + "'");
        std::size_t l = line_, c = col_;
        std::size_t start = pos_;
        while (!at_end() && ident_char(peek())) advance();
        std::string s(text_.substr(start, pos_ - start));

        std::string base;
        std::uint64_t index = 0;
        if (ends_with_free(s)) {
            if (!opts_.read_reserved) throw ParseError("reserved suffix '_free' in identifier '" + s + "'", l, c);
            return Ident::free_marker(s.substr(0, s.size() - 5));
        }
        if (split_generated(s, base, index)) {
            if (!opts_.read_reserved) throw ParseError("identifier '" + s + "' clashes with generated names", l, c);
            return Ident::generated(base, index);
        }
        return Ident::source(s);
    }

    Term term() {
        skip();
        if (!at_end() && peek() == '\\') {
            advance();
            std::vector<Ident> binders;
            binders.push_back(ident());
            skip();
            while (!at_end() && ident_start(peek())) {
                binders.push_back(ident());
                skip();
            }
            if (at_end() || peek() != '.') fail("expected '.' after binders");
            advance();
            Term body = term();
            for (auto it = binders.rbegin(); it != binders.rend(); ++it) body = lam(*it, body);
            return body;
        }
        Term t = atom();
        for (;;) {
            skip();
            if (at_end() || peek() == ')') break;
            if (peek() == '\\') {
                // A trailing abstraction extends to the right as far as possible.
                t = app(t, term());
                break;
            }
            t = app(t, atom());
        }
        return t;
    }

    Term atom() {
        skip();
        if (at_end()) fail("unexpected end of input");
        if (peek() == '(') {
            advance();
            Term t = term();
            skip();
            if (at_end() || peek() != ')') fail("expected ')'");
            advance();
            return t;
        }
        return var(ident());
    }
};

inline void print_into(std::ostringstream& os, const Term& t, bool parens_lam, bool parens_app) {
    switch (t->kind) {
    case TermNode::Kind::var:
        os << to_string(t->id);
        return;
    case TermNode::Kind::lam:
        if (parens_lam) os << '(';
        os << '\\' << to_string(t->id) << ". ";
        print_into(os, t->left, false, false);
        if (parens_lam) os << ')';
        return;
    case TermNode::Kind::app:
        if (parens_app) os << '(';
        print_into(os, t->left, true, false);
        os << ' ';
        print_into(os, t->right, true, true);
        if (parens_app) os << ')';
        return;
    }
}

} // namespace detail

inline Term parse(std::string_view text, ParseOptions opts = {}) {
    return detail::Parser(text, opts).parse_all();
}

/// Minimal-parenthesis rendering; `parse(print(t), {.read_reserved = true})`
/// reproduces `t` exactly.
inline std::string print(const Term& t) {
    std::ostringstream os;
    detail::print_into(os, t, false, false);
    return os.str();
}

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

inline void collect_free(const Term& t, std::multiset<Ident>& bound, std::set<Ident>& out) {
    switch (t->kind) {
    case TermNode::Kind::var:
        if (!bound.contains(t->id)) out.insert(t->id);
        return;
    case TermNode::Kind::lam: {
        auto it = bound.insert(t->id);
        collect_free(t->left, bound, out);
        bound.erase(it);
        return;
    }
    case TermNode::Kind::app:
        collect_free(t->left, bound, out);
        collect_free(t->right, bound, out);
        return;
    }
}

inline std::set<Ident> free_vars(const Term& t) {
    std::multiset<Ident> bound;
    std::set<Ident> out;
    collect_free(t, bound, out);
    return out;
}

inline std::set<Ident> bound_vars(const Term& t) {
    std::set<Ident> out;
    std::vector<const TermNode*> todo{t.get()};
    while (!todo.empty()) {
        auto n = todo.back();
        todo.pop_back();
        if (n->kind == TermNode::Kind::lam) {
            out.insert(n->id);
            todo.push_back(n->left.get());
        } else if (n->kind == TermNode::Kind::app) {
            todo.push_back(n->left.get());
            todo.push_back(n->right.get());
        }
    }
    return out;
}

inline bool occurs_free(const Ident& x, const Term& t) {
    switch (t->kind) {
    case TermNode::Kind::var: return t->id == x;
    case TermNode::Kind::lam: return t->id != x && occurs_free(x, t->left);
    case TermNode::Kind::app: return occurs_free(x, t->left) || occurs_free(x, t->right);
    }
    return false;
}

/// Largest generated index occurring in `t`, plus one (0 if none).
inline std::uint64_t next_generated_index(const Term& t) {
    std::uint64_t next = 0;
    std::vector<const TermNode*> todo{t.get()};
    while (!todo.empty()) {
        auto n = todo.back();
        todo.pop_back();
        if (n->kind != TermNode::Kind::app && n->id.is_generated()) next = std::max(next, n->id.index + 1);
        if (n->left) todo.push_back(n->left.get());
        if (n->right) todo.push_back(n->right.get());
    }
    return next;
}

/// Supply of generated identifiers; `next` must exceed every generated index
/// already in play.
struct NameSupply {
    std::uint64_t next = 0;

    Ident fresh(const std::string& base) { return Ident::generated(base, next++); }
};

namespace detail {

inline Term subst_rec(const Ident& x, const Term& s, const std::set<Ident>& fv_s, const Term& t, NameSupply& names) {
    switch (t->kind) {
    case TermNode::Kind::var:
        return t->id == x ? s : t;
    case TermNode::Kind::app: {
        Term l = subst_rec(x, s, fv_s, t->left, names);
        Term r = subst_rec(x, s, fv_s, t->right, names);
        if (l == t->left && r == t->right) return t;
        return app(std::move(l), std::move(r));
    }
    case TermNode::Kind::lam: {
        if (t->id == x || !occurs_free(x, t->left)) return t;
        if (!fv_s.contains(t->id)) {
            Term body = subst_rec(x, s, fv_s, t->left, names);
            return lam(t->id, std::move(body));
        }
        // Binder would capture a free variable of s: rename it first.
        Ident fresh = names.fresh(t->id.name);
        Term fresh_var = var(fresh);
        Term renamed = subst_rec(t->id, fresh_var, {fresh}, t->left, names);
        return lam(fresh, subst_rec(x, s, fv_s, renamed, names));
    }
    }
    return t;
}

} // namespace detail

/// t[x := s], renaming binders of t that would capture free variables of s.
inline Term subst_capture_avoiding(const Ident& x, const Term& s, const Term& t, NameSupply& names) {
    auto fv_s = free_vars(s);
    return detail::subst_rec(x, s, fv_s, t, names);
}

inline Term subst_capture_avoiding(const Ident& x, const Term& s, const Term& t) {
    NameSupply names{std::max(next_generated_index(s), next_generated_index(t))};
    return subst_capture_avoiding(x, s, t, names);
}

// ---------------------------------------------------------------------------
// Alpha-equivalence
// ---------------------------------------------------------------------------

namespace detail {

// Binder depth of the innermost binding of each identifier.
using BinderScopes = std::map<Ident, std::vector<std::uint32_t>>;

inline bool alpha_rec(const Term& a, const Term& b, BinderScopes& sa, BinderScopes& sb, std::uint32_t depth) {
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case TermNode::Kind::var: {
        auto ia = sa.find(a->id);
        auto ib = sb.find(b->id);
        bool bound_a = ia != sa.end() && !ia->second.empty();
        bool bound_b = ib != sb.end() && !ib->second.empty();
        if (bound_a != bound_b) return false;
        if (!bound_a) return a->id == b->id;
        return ia->second.back() == ib->second.back();
    }
    case TermNode::Kind::app:
        return alpha_rec(a->left, b->left, sa, sb, depth) && alpha_rec(a->right, b->right, sa, sb, depth);
    case TermNode::Kind::lam: {
        sa[a->id].push_back(depth);
        sb[b->id].push_back(depth);
        bool r = alpha_rec(a->left, b->left, sa, sb, depth + 1);
        sa[a->id].pop_back();
        sb[b->id].pop_back();
        return r;
    }
    }
    return false;
}

} // namespace detail

/// Equality up to renaming of bound variables. Free variables compare by
/// identity (a bound variable is never equal to a free one).
inline bool alpha_eq(const Term& a, const Term& b) {
    detail::BinderScopes sa, sb;
    return detail::alpha_rec(a, b, sa, sb, 0);
}

/// Replaces every free-marker identifier by its source name.
inline Term erase_free_markers(const Term& t) {
    switch (t->kind) {
    case TermNode::Kind::var:
        return t->id.tag == Ident::Tag::free_marker ? var(strip_free_marker(t->id)) : t;
    case TermNode::Kind::lam: {
        Term b = erase_free_markers(t->left);
        return b == t->left ? t : lam(t->id, b);
    }
    case TermNode::Kind::app: {
        Term l = erase_free_markers(t->left);
        Term r = erase_free_markers(t->right);
        return (l == t->left && r == t->right) ? t : app(l, r);
    }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Term families
// ---------------------------------------------------------------------------

enum class Family { church, omega, dub, identity, e, A, B, Q };

inline Family family_from_name(std::string_view name) {
    static const std::pair<std::string_view, Family> table[] = {
        {"church", Family::church}, {"omega", Family::omega}, {"dub", Family::dub},
        {"identity", Family::identity}, {"e", Family::e}, {"A", Family::A},
        {"B", Family::B}, {"Q", Family::Q},
    };
    for (auto& [n, f] : table)
        if (n == name) return f;
    throw std::invalid_argument("unknown term family '" + std::string(name) + "'");
}

inline Term church(std::uint64_t n) {
    Term body = var("x");
    for (std::uint64_t i = 0; i < n; ++i) body = app(var("f"), body);
    return lam("f", lam("x", body));
}

inline Term omega() { return lam("x", app(var("x"), var("x"))); }
inline Term dub() { return lam("x", lam("p", app(app(var("p"), var("x")), var("x")))); }
inline Term identity() { return lam("x", var("x")); }

/// (x (\y. y)) x iterated; x free.
inline Term family_A(std::uint64_t n) {
    Term t = var("x");
    for (std::uint64_t i = 0; i < n; ++i) t = app(app(t, lam("y", var("y"))), var("x"));
    return t;
}

/// z (\w. z (\w. ... z)); z free.
inline Term family_B(std::uint64_t n) {
    Term t = var("z");
    for (std::uint64_t i = 0; i < n; ++i) t = app(var("z"), lam("w", t));
    return t;
}

inline Term gen_family(Family f, std::uint64_t n) {
    switch (f) {
    case Family::church: return church(n);
    case Family::omega: return omega();
    case Family::dub: return dub();
    case Family::identity: return identity();
    case Family::e: return lam("x", app(app(church(n), omega()), var("x")));
    case Family::A: return family_A(n);
    case Family::B: return family_B(n);
    case Family::Q: return lam("x", app(lam("z", family_B(n)), family_A(n)));
    }
    return identity();
}

inline Term gen_family(std::string_view name, std::uint64_t n) { return gen_family(family_from_name(name), n); }

} // namespace scbv
