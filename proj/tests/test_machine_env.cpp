#include <gtest/gtest.h>

#include <map>
#include <set>
#include <unordered_set>

#include "strongcbv/analysis.hpp"
#include "strongcbv/corpus.hpp"
#include "strongcbv/machine_env.hpp"
#include "support/random_terms.hpp"

using namespace scbv;
using namespace scbv::env_machine;

namespace {

Term P(std::string_view s) { return parse(s); }

// Binder names above every subterm of the initial term; pointers reached
// under two different binder sets are dropped from the map.
class BindersAbove {
public:
    explicit BindersAbove(const Term& t) {
        std::set<Ident> scope;
        walk(t, scope);
    }

    const std::set<Ident>* find(const TermNode* n) const {
        auto it = above_.find(n);
        return it == above_.end() || ambiguous_.contains(n) ? nullptr : &it->second;
    }

private:
    std::map<const TermNode*, std::set<Ident>> above_;
    std::set<const TermNode*> ambiguous_;

    void walk(const Term& t, std::set<Ident>& scope) {
        auto [it, fresh] = above_.emplace(t.get(), scope);
        if (!fresh && it->second != scope) ambiguous_.insert(t.get());
        if (is_app(t)) {
            walk(t->left, scope);
            walk(t->right, scope);
        } else if (is_lam(t)) {
            bool added = scope.insert(t->id).second;
            walk(t->left, scope);
            if (added) scope.erase(t->id);
        }
    }
};

std::set<Ident> domain(const Env& e) {
    std::set<Ident> out;
    e.for_each([&](const Ident& k, const EValue&) { out.insert(k); });
    return out;
}

// Checks that every closure pairs its code with an environment binding
// exactly the names bound above that code in the initial term.
class EnvSizeAudit {
public:
    explicit EnvSizeAudit(const Term& t0) : above_(t0) {}

    void closure(const Term& t, const Env& e, const Ident* binder) {
        const std::set<Ident>* expect = above_.find(t.get());
        if (!expect) return;
        std::set<Ident> dom = domain(e);
        if (binder) dom.insert(*binder);
        EXPECT_EQ(dom, *expect) << print(t);
        e.for_each([&](const Ident&, const EValue& v) { value(v); });
    }

    void value(const EValue& v) {
        if (!seen_.insert(v.get()).second) return;
        keep_.push_back(v);
        switch (v->kind) {
        case EValueNode::Kind::clo: closure(v->body, v->env, &v->id); break;
        case EValueNode::Kind::vapp: value(v->left); value(v->right); break;
        case EValueNode::Kind::annot: value(v->left); break;
        case EValueNode::Kind::avar: break;
        }
    }

    void config(const Config& k) {
        if (k.mode == machine::Mode::E) closure(k.term, k.env, nullptr);
        if (k.value) value(k.value);
        for (const auto& f : k.stack) {
            if (auto* a = std::get_if<FunClo>(&f)) closure(a->term, a->env, nullptr);
            else if (auto* b = std::get_if<ArgVal>(&f)) value(b->value);
            else if (auto* c = std::get_if<FunVal>(&f)) value(c->value);
        }
    }

private:
    BindersAbove above_;
    std::unordered_set<const EValueNode*> seen_;
    std::vector<EValue> keep_;
};

} // namespace

TEST(EnvMachine, IdentityApplication) {
    std::vector<int> rules;
    auto r = run(P(R"((\x.x)(\y.y))"), machine::default_fuel, {}, &rules);
    EXPECT_EQ(rules, (std::vector<int>{1, 2, 4, 2, 6, 5, 3, 12, 14, 9, 3, 12, 14, 10, 15, 18, 15}));
    EXPECT_EQ(r.steps, 17u);
    EXPECT_EQ(r.beta(), 1u);
    EXPECT_EQ(print(unfold(r.nf, 100)), R"(\x_0. x_0)");
}

TEST(EnvMachine, UnboundLookupGivesFreeMarker) {
    Config k = load(P("z"));
    EXPECT_EQ(step(k), 3);
    EXPECT_EQ(k.mode, machine::Mode::C);
    ASSERT_EQ(k.value->kind, EValueNode::Kind::avar);
    EXPECT_EQ(k.value->id, Ident::free_marker("z"));
}

TEST(EnvMachine, OpenTermsPrintFreeMarkers) {
    auto r = run(P(R"((\x. x) (y z))"));
    EXPECT_EQ(print(unfold(r.nf, 100)), "y_free z_free");
}

TEST(EnvMachine, ChurchRunCounts) {
    auto a = run(church_dub_identity(6));
    EXPECT_EQ(a.steps, 217u);
    EXPECT_EQ(a.beta(), 8u);
    auto b = run(church_two_identity(6));
    EXPECT_EQ(b.steps, 817u);
    EXPECT_EQ(b.beta(), 134u);
}

TEST(EnvMachine, FuelIsExplicit) { EXPECT_THROW(run(app(omega(), omega()), 10'000), FuelExhausted); }

TEST(Translate, Examples) {
    Ident x = Ident::source("x");
    EValue v = annot(0, avar(Ident::source("q")));
    Env e = Env{}.insert(x, v);
    Translator tr;
    EXPECT_TRUE(machine::ConfigComparer{}.equal(tr.term(e, P("x")), machine::delim(tr.value(v))));
    EXPECT_TRUE(machine::ConfigComparer{}.equal(tr.term(e, P(R"(\x. x)")), machine::embed(P(R"(\x. x)"))));
    Term t = church_two_identity(3);
    EXPECT_TRUE(machine::ConfigComparer{}.equal(tr.term(Env{}, t), machine::embed(t)));
}

TEST(Translate, ClosuresBecomeAbstractions) {
    Ident x = Ident::source("x"), y = Ident::source("y");
    EValue arg = annot(2, avar(Ident::source("q")));
    EValue c = clo(x, P("x y"), Env{}.insert(y, arg).insert(x, arg));
    Translator tr;
    machine::MValue m = tr.value(c);
    ASSERT_EQ(m->kind, machine::MValueNode::Kind::vlam);
    EXPECT_TRUE(machine::ConfigComparer{}.equal(
        m->body, machine::mapp(machine::mvar(x), machine::delim(tr.value(arg)))));
}

TEST(Translate, LoadCommutes) {
    Term t = church_dub_identity(3);
    EXPECT_TRUE(machine::ConfigComparer{}.equal(translate_config(load(t)), machine::load(t)));
}

TEST(Translate, OneStepCommutes) {
    Term t = P(R"((\x.x)(\y.y))");
    Config ke = load(t);
    machine::Config ks = machine::load(t);
    EXPECT_EQ(step(ke), machine::step(ks));
    EXPECT_TRUE(machine::ConfigComparer{}.equal(translate_config(ke), ks));
}

TEST(Bisimulation, LockstepOnCorpus) {
    for (const auto& e : standard_corpus()) {
        auto rep = analysis::bisim_check(e.term);
        EXPECT_TRUE(rep.ok) << e.name << ": " << rep.mismatch;
        EXPECT_TRUE(rep.completed) << e.name;
    }
    auto long_run = analysis::bisim_check(church_two_identity(6));
    EXPECT_TRUE(long_run.ok);
    EXPECT_EQ(long_run.steps, 817u);
}

TEST(Bisimulation, LockstepOnRandomTerms) {
    testkit::TermGen gen(53);
    for (int i = 0; i < 500; ++i) {
        Term t = i % 5 ? gen.closed(25) : gen.open(25);
        auto rep = analysis::bisim_check(t, 20'000);
        EXPECT_TRUE(rep.ok) << print(t) << ": " << rep.mismatch;
    }
}

TEST(Environments, DomainMatchesBindersAbove) {
    std::vector<Term> terms;
    for (const auto& e : standard_corpus()) terms.push_back(e.term);
    testkit::TermGen gen(59);
    for (int i = 0; i < 300; ++i) terms.push_back(gen.closed(25));
    for (const Term& t : terms) {
        EnvSizeAudit audit(t);
        try {
            run(t, 20'000, [&](const machine::StepEvent&, const Config& k) { audit.config(k); });
        } catch (const FuelExhausted&) {
        }
    }
}

TEST(Environments, SizeEqualsLambdaCountWithDistinctBinders) {
    // With pairwise distinct binder names, the domain size is exactly the
    // number of abstractions above the code.
    Term t = testkit::rename_binders(church_dub_identity(4));
    BindersAbove above(t);
    run(t, machine::default_fuel, [&](const machine::StepEvent&, const Config& k) {
        if (k.mode != machine::Mode::E) return;
        const auto* expect = above.find(k.term.get());
        ASSERT_TRUE(expect);
        EXPECT_EQ(k.env.size(), expect->size());
    });
}
