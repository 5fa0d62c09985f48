#include <gtest/gtest.h>

#include <sstream>

#include "strongcbv/analysis.hpp"
#include "strongcbv/corpus.hpp"
#include "support/contexts.hpp"
#include "support/random_terms.hpp"

using namespace scbv;
using namespace scbv::analysis;
using machine::Config;
using machine::Mode;

namespace {

Term P(std::string_view s) { return parse(s); }

machine::MValue id_value(const std::string& x) {
    return machine::vlam(Ident::source(x), machine::mvar(Ident::source(x)));
}

// Potential of a plain term straight from the clauses, for cross-checking
// the memoized implementation.
std::int64_t reference_phi(const Term& t) {
    switch (t->kind) {
    case TermNode::Kind::app: return 6 + reference_phi(t->left) + reference_phi(t->right);
    case TermNode::Kind::lam: return 4 + reference_phi(t->left);
    case TermNode::Kind::var: return 4;
    }
    return 0;
}

} // namespace

TEST(Decode, LoadDecodesToInput) {
    for (const auto& e : standard_corpus()) EXPECT_TRUE(same_term(decode_config(machine::load(e.term)), e.term));
}

TEST(Decode, AnnotationsAreErased) {
    Config k;
    k.mode = Mode::C;
    k.value = machine::annot(k.heap.alloc(), id_value("x"));
    EXPECT_EQ(print(decode_config(k)), R"(\x. x)");
}

TEST(Decode, RuleFourLeavesDecodingUnchanged) {
    Config k = machine::load(P(R"((\x.x)(\y.y))"));
    machine::step(k); // 1
    machine::step(k); // 2
    Term before = decode_config(k);
    EXPECT_EQ(machine::step(k), 4);
    EXPECT_TRUE(same_term(decode_config(k), before));
}

TEST(Decode, MemoFramesAreErased) {
    Config k;
    k.mode = Mode::C;
    k.value = id_value("x");
    k.stack.push_back(machine::Memo{k.heap.alloc()});
    EXPECT_EQ(print(decode_config(k)), R"(\x. x)");
}

TEST(Shape, Examples) {
    auto s = check_shape(machine::load(P(R"((\x.x)(\y.y))")));
    ASSERT_TRUE(s);
    EXPECT_EQ(*s.shape, ShapeClass::E_S1);

    Config k;
    k.mode = Mode::C;
    k.value = id_value("x");
    k.stack.push_back(machine::ArgVal{id_value("y")});
    auto c = check_shape(k);
    ASSERT_TRUE(c);
    EXPECT_EQ(*c.shape, ShapeClass::C_S1_vw);
}

TEST(Shape, NestedAnnotationIsAViolation) {
    Config k;
    k.mode = Mode::C;
    Location a = k.heap.alloc(), b = k.heap.alloc();
    k.value = machine::annot(a, machine::annot(b, id_value("x")));
    auto s = check_shape(k);
    EXPECT_FALSE(s);
    EXPECT_NE(s.violation.find("nested annotation"), std::string::npos);
}

TEST(Shape, BareDelimiterIsAViolation) {
    Config k;
    k.term = machine::delim(id_value("x"));
    auto s = check_shape(k);
    EXPECT_FALSE(s);
    EXPECT_NE(s.violation.find("delimiter"), std::string::npos);
}

TEST(Shape, ArgumentNormalFormOverAbstractionIsAViolation) {
    // ([] n) may only sit above a neutral focus.
    Config k;
    k.mode = Mode::C;
    k.value = id_value("x");
    k.stack.push_back(machine::ArgNF{k.graph.add_var(Ident::source("z"))});
    EXPECT_FALSE(check_shape(k));
}

TEST(Shape, EveryStepOfEveryCorpusRun) {
    for (const auto& e : standard_corpus()) {
        ShapeChecker checker;
        machine::run(e.term, machine::default_fuel, [&](const machine::StepEvent& ev, const Config& k) {
            auto s = checker.check(k);
            EXPECT_TRUE(s) << e.name << " step " << ev.index << ": " << s.violation;
        });
    }
}

TEST(Shape, DecodedContextsOfEvaluationConfigurationsAreStrategyContexts) {
    // In E mode and in C mode over an S1 stack the stack decodes to an
    // rrCbV context.
    std::vector<Term> terms;
    for (const auto& e : standard_corpus())
        if (term_size(e.term) < 60) terms.push_back(e.term);
    testkit::TermGen gen(61);
    for (int i = 0; i < 200; ++i) terms.push_back(gen.closed(20));
    for (const Term& t : terms) {
        ShapeChecker checker;
        Decoder dec;
        try {
            machine::run(t, 5'000, [&](const machine::StepEvent&, const Config& k) {
                auto s = checker.check(k);
                if (!s || (*s.shape != ShapeClass::E_S1 && *s.shape != ShapeClass::C_S1_vw)) return;
                EXPECT_TRUE(testkit::ctx_R(dec.context(k))) << print(t);
            });
        } catch (const FuelExhausted&) {
        }
    }
}

TEST(Potential, Examples) {
    EXPECT_EQ(phi_term(P(R"(\x.x)")), 8);
    EXPECT_EQ(phi_term(P(R"((\x.x)(\y.y))")), 22);
    EXPECT_EQ(phi_term(church_dub_identity(6)), 124);
    EXPECT_EQ(phi_value(machine::annot(0, id_value("x"))), 3);
    EXPECT_EQ(phi_value(machine::annot(0, machine::vapp(machine::avar(Ident::source("a")), id_value("b")))), 3);
}

TEST(Potential, MatchesReferenceOnRandomTerms) {
    testkit::TermGen gen(67);
    for (int i = 0; i < 500; ++i) {
        Term t = gen.open(40);
        EXPECT_EQ(phi_term(t), reference_phi(t));
        EXPECT_EQ(phi_term(machine::embed(t)), reference_phi(t));
    }
}

TEST(Potential, LoadedConfigurationHasTheTermsPotential) {
    for (const auto& e : standard_corpus()) EXPECT_EQ(phi_config(machine::load(e.term)).total, phi_term(e.term));
}

TEST(Potential, DelimitedSubstitutionPreservesTermPotential) {
    testkit::TermGen gen(71);
    machine::MTerm d = machine::delim(machine::annot(0, id_value("q")));
    for (int i = 0; i < 500; ++i) {
        machine::MTerm t = machine::embed(gen.open(30));
        EXPECT_EQ(phi_term(machine::msubst(Ident::source("a"), d, t)), phi_term(t));
    }
}

TEST(Potential, IversonDiscountOnlyBeforeRuleFive) {
    Config k;
    k.mode = Mode::C;
    k.value = id_value("x");
    k.stack.push_back(machine::ArgVal{machine::annot(k.heap.alloc(), id_value("y"))});
    auto b = phi_config(k);
    EXPECT_EQ(b.iverson_discount, 9);
    EXPECT_EQ(b.total, b.phi_value + b.phi_stack + b.phi_heap - 9);
    EXPECT_EQ(machine::step(k), 5);

    Config j;
    j.mode = Mode::C;
    j.value = id_value("x");
    j.stack.push_back(machine::ArgVal{id_value("y")});
    EXPECT_EQ(phi_config(j).iverson_discount, 0);
}

TEST(Potential, HeapCountsPendingLocationsOnce) {
    Config k;
    k.mode = Mode::C;
    Location l = k.heap.alloc();
    machine::MValue inner = id_value("y");
    machine::MValue v = machine::annot(l, inner);
    k.value = machine::vapp(machine::avar(Ident::source("z")), v);
    k.stack.push_back(machine::FunVal{machine::vapp(machine::avar(Ident::source("z")), v)});
    EXPECT_EQ(phi_heap(k), phi_value(inner));
    k.stack.push_back(machine::Memo{l});
    EXPECT_EQ(phi_heap(k), 0);
}

TEST(Audit, IdentityApplication) {
    auto rep = audit_trace(P(R"((\x.x)(\y.y))"));
    EXPECT_TRUE(rep.ok()) << to_string(*rep.violation);
    EXPECT_EQ(rep.steps, 17u);
    ASSERT_EQ(rep.potentials.size(), 18u);
    for (std::size_t i = 1; i < rep.potentials.size(); ++i) EXPECT_LT(rep.potentials[i], rep.potentials[i - 1]);
}

TEST(Audit, ChurchRuns) {
    auto a = audit_trace(church_dub_identity(6));
    EXPECT_TRUE(a.ok()) << to_string(*a.violation);
    EXPECT_EQ(a.steps, 217u);
    auto b = audit_trace(church_two_identity(6));
    EXPECT_TRUE(b.ok()) << to_string(*b.violation);
    EXPECT_EQ(b.steps, 817u);
}

TEST(Audit, WholeCorpus) {
    for (const auto& e : standard_corpus()) {
        auto rep = audit_trace(e.term);
        EXPECT_TRUE(rep.ok()) << e.name << ": " << to_string(*rep.violation);
        EXPECT_TRUE(rep.completed) << e.name;
        EXPECT_GE(rep.trace_bound_margin, 0) << e.name;
        EXPECT_EQ(rep.decode_checks, rep.steps) << e.name;
    }
}

TEST(Audit, RandomClosedTermsIncludingDivergentPrefixes) {
    testkit::TermGen gen(73);
    for (int i = 0; i < 300; ++i) {
        Term t = gen.closed(25);
        AuditOptions opts;
        opts.fuel = 5'000;
        opts.bypass_gate = 500;
        auto rep = audit_trace(t, opts);
        EXPECT_TRUE(rep.ok()) << print(t) << ": " << to_string(*rep.violation);
    }
}

TEST(Audit, OpenTermsSkipDecodingButCheckPotential) {
    auto rep = audit_trace(P(R"((\x. x x) (y (\z. z)))"));
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.decode_checks, 0u);
    EXPECT_GT(rep.steps, 0u);
}

TEST(Audit, PotentialRisesOnlyAtRuleSeven) {
    Term t = church_two_identity(3);
    auto rep = audit_trace(t);
    ASSERT_TRUE(rep.ok());
    EXPECT_LE(static_cast<std::int64_t>(rep.steps), rep.trace_bound);
    auto rows = emit_trace(t);
    ASSERT_EQ(rows.size() + 1, rep.potentials.size());
    std::uint64_t rises = 0;
    for (std::size_t i = 1; i < rep.potentials.size(); ++i) {
        EXPECT_EQ(rows[i - 1].phi_total, rep.potentials[i]);
        if (rep.potentials[i] <= rep.potentials[i - 1]) continue;
        ++rises;
        EXPECT_EQ(rows[i - 1].rule, 7) << "step " << i;
        EXPECT_LT(rep.potentials[i] - rep.potentials[i - 1], phi_term(t));
    }
    EXPECT_GT(rises, 0u);
    EXPECT_LE(rises, rep.rule_counts[7]);
}

TEST(Bisim, Examples) {
    EXPECT_TRUE(bisim_check(P(R"((\x.x)(\y.y))")).ok);
    auto r = bisim_check(church_dub_identity(6));
    EXPECT_TRUE(r.ok) << r.mismatch;
    EXPECT_EQ(r.steps, 217u);
}

TEST(Trace, Examples) {
    auto rows = emit_trace(church_dub_identity(6));
    EXPECT_EQ(rows.size(), 217u);
    std::size_t rises = 0, sevens = 0;
    std::int64_t prev = phi_term(church_dub_identity(6));
    for (const auto& r : rows) {
        if (r.phi_total > prev) {
            ++rises;
            EXPECT_EQ(r.rule, 7) << "step " << r.step;
        }
        if (r.rule == 7) ++sevens;
        prev = r.phi_total;
    }
    EXPECT_GT(rises, 0u);
    EXPECT_LE(rises, sevens);

    auto id = emit_trace(P(R"((\x.x)(\y.y))"));
    ASSERT_EQ(id.size(), 17u);
    for (std::size_t i = 1; i < id.size(); ++i) EXPECT_LT(id[i].phi_total, id[i - 1].phi_total);
    EXPECT_EQ(id.back().phi_total, 0);
    EXPECT_EQ(id.back().stack_depth, 0u);

    std::ostringstream os;
    write_trace_csv(os, id);
    std::string header = os.str().substr(0, os.str().find('\n'));
    EXPECT_EQ(header, "step,rule,mode,phi_total,phi_heap,stack_depth,heap_size");
    EXPECT_NE(os.str().find("\n1,1,E,"), std::string::npos);
}
