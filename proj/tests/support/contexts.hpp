#pragma once

// Reference membership tests for the context grammars, written directly
// from the productions and independent of the oracle's search:
//   F ::= t F | F w | []     R ::= \x.R | H | F     H ::= i R | H n

#include "strongcbv/oracle.hpp"

namespace scbv::testkit {

inline bool is_hole(const Term& c) { return is_var(c) && c->id == Ident::hole(); }

inline bool hole_in(const Term& c) {
    if (is_var(c)) return is_hole(c);
    if (is_lam(c)) return hole_in(c->left);
    return hole_in(c->left) || hole_in(c->right);
}

inline bool ctx_R(const Term& c);

inline bool ctx_F(const Term& c) {
    if (is_hole(c)) return true;
    if (!is_app(c)) return false;
    if (hole_in(c->right)) return ctx_F(c->right);
    return ctx_F(c->left) && oracle::is_wnf(c->right);
}

inline bool ctx_H(const Term& c) {
    if (!is_app(c)) return false;
    if (hole_in(c->right)) return oracle::is_inert(c->left) && ctx_R(c->right);
    return ctx_H(c->left) && oracle::is_normal(c->right);
}

inline bool ctx_R(const Term& c) {
    if (is_lam(c)) return ctx_R(c->left);
    return ctx_H(c) || ctx_F(c);
}

} // namespace scbv::testkit
