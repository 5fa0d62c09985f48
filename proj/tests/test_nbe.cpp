#include <gtest/gtest.h>

#include "strongcbv/machine_subst.hpp"
#include "strongcbv/nbe.hpp"
#include "strongcbv/oracle.hpp"
#include "support/random_terms.hpp"

using namespace scbv;
using namespace scbv::nbe;

namespace {

Term P(std::string_view s) { return parse(s); }

Term nf_term(const Term& t) { return unfold(nbe_normalize(t), 1'000'000); }

} // namespace

TEST(Eval, AbstractionsEvaluateToAbs) {
    Evaluator ev;
    Sem v = ev.eval(P(R"(\x.x)"), Env{});
    EXPECT_TRUE(std::holds_alternative<Abs>(v->v));
}

TEST(Eval, UnboundVariablesAreFreeMarkedNeutrals) {
    Evaluator ev;
    Sem v = ev.eval(P("y"), Env{});
    ASSERT_TRUE(std::holds_alternative<Neutral>(v->v));
    NodeId n = ev.reify(v);
    EXPECT_EQ(ev.graph()->node(n).id, Ident::free_marker("y"));
}

TEST(Eval, IdentityApplicationBehavesAsIdentity) {
    Evaluator ev;
    // The result is the argument itself, wrapped in the cache it got when bound.
    Sem f = ev.eval(P(R"((\x.x)(\y.y))"), Env{});
    auto* c = std::get_if<Cached>(&f->v);
    ASSERT_TRUE(c);
    ASSERT_TRUE(std::holds_alternative<Abs>(c->inner->v));
    Sem probe = ev.eval(P("probe"), Env{});
    Sem out = ev.apply(f, probe);
    EXPECT_EQ(ev.graph()->node(ev.reify(out)).id, Ident::free_marker("probe"));
}

TEST(Reify, IdentityUsesFirstFreshName) {
    Term t = nf_term(P(R"(\x.x)"));
    EXPECT_EQ(print(t), R"(\x_0. x_0)");
}

TEST(Reify, CachedValueReifiesToTheSameNode) {
    Evaluator ev;
    Sem inner = ev.eval(P("z w"), Env{});
    Sem cached = Evaluator::mount_cache(inner);
    NodeId a = ev.reify(cached);
    std::size_t table = ev.graph()->table_size();
    NodeId b = ev.reify(cached);
    EXPECT_EQ(a, b);
    EXPECT_EQ(ev.graph()->table_size(), table);
    EXPECT_EQ(ev.cache_hits(), 1u);
}

TEST(Reify, MountCacheIsIdempotent) {
    Evaluator ev;
    Sem c = Evaluator::mount_cache(ev.eval(P("z"), Env{}));
    EXPECT_EQ(Evaluator::mount_cache(c), c);
}

TEST(Reify, SizeExplosionStaysShared) {
    TermGraph g = nbe_normalize(gen_family(Family::e, 3));
    EXPECT_LT(BigNat(node_count(g)), unfolded_size(g));
    EXPECT_GE(unfolded_size(g), BigNat(8));
}

TEST(CacheCell, WriteOnce) {
    CacheCell c;
    c.fill(3);
    EXPECT_EQ(c.content(), std::optional<NodeId>(3));
    EXPECT_THROW(c.fill(4), std::logic_error);
    EXPECT_EQ(c.content(), std::optional<NodeId>(3));
}

TEST(Apply, AbstractionCachesAreBypassed) {
    // The argument (\y. y) is bound to f and hence wrapped in a cache; f is
    // then applied twice, each time recomputing through the abstraction.
    Evaluator ev;
    Sem v = ev.eval(P(R"((\f. \z. f (f z)) (\y. y))"), Env{});
    NodeId n = ev.reify(v);
    EXPECT_EQ(print(unfold(*ev.graph(), n, 1000)), R"(\x_0. x_0)");
    EXPECT_EQ(ev.abstraction_cache_bypasses(), 2u);
}

TEST(Apply, AnnotatedAbstractionRecomputesBeta) {
    // Reifying f first fills its cache; applying f afterwards must still
    // substitute rather than reuse the cached body.
    Evaluator ev;
    Sem v = ev.eval(P(R"((\f. f (\q. q) f) (\y. y))"), Env{});
    Term out = unfold(*ev.graph(), ev.reify(v), 1000);
    EXPECT_TRUE(alpha_eq(out, P(R"(\y. y)")));
}

TEST(Normalize, Examples) {
    EXPECT_EQ(print(nf_term(P(R"((\x.x)(\y.y))"))), R"(\x_0. x_0)");
    EXPECT_TRUE(alpha_eq(nf_term(app(church(2), church(2))), church(4)));
    auto m = machine::run(gen_family(Family::e, 2));
    EXPECT_TRUE(shared_alpha_eq(nbe_normalize(gen_family(Family::e, 2)), m.nf));
}

TEST(Normalize, FuelBoundsDivergence) {
    EXPECT_THROW(nbe_normalize(app(omega(), omega()), 10'000), FuelExhausted);
}

TEST(Normalize, NestingBeyondTheLimitThrowsInsteadOfCrashing) {
    EXPECT_THROW(nbe_normalize(app(omega(), omega())), RecursionLimit);
    EXPECT_THROW(nbe_normalize(church(50), unlimited_fuel, 20), RecursionLimit);
}

TEST(Normalize, DeepButFiniteRecursionFits) {
    // Reifying c_n nests n applications below two abstractions; both bound
    // variables are single shared nodes.
    TermGraph g = nbe_normalize(church(20'000));
    EXPECT_EQ(node_count(g), 20'000u + 4);
}

TEST(Normalize, AgreesWithOracleOnRandomClosedTerms) {
    testkit::TermGen gen(31);
    int checked = 0;
    for (int i = 0; i < 1500; ++i) {
        Term t = gen.closed(25);
        oracle::Normalized o;
        try {
            o = oracle::normalize_rrcbv(t, 500);
        } catch (const FuelExhausted&) {
            continue;
        }
        TermGraph g = nbe_normalize(t, 1'000'000);
        EXPECT_TRUE(alpha_eq(unfold(g, 10'000'000), o.term)) << print(t);
        ++checked;
    }
    EXPECT_GT(checked, 1000);
}

TEST(Normalize, AgreesWithOracleOnOpenTerms) {
    testkit::TermGen gen(37);
    for (int i = 0; i < 500; ++i) {
        Term t = gen.open(20);
        oracle::Normalized o;
        try {
            o = oracle::normalize_rrcbv(t, 500);
        } catch (const FuelExhausted&) {
            continue;
        }
        Term n = erase_free_markers(unfold(nbe_normalize(t, 1'000'000), 10'000'000));
        EXPECT_TRUE(alpha_eq(n, o.term)) << print(t);
    }
}
