// Command-line front end: normalize, trace, gen, convert, audit, bench.
//
// Exit codes: 0 success, 1 parse or input error, 2 fuel exhausted,
// 3 audit violation, 10 terms not convertible.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "strongcbv/analysis.hpp"
#include "strongcbv/convert.hpp"
#include "strongcbv/corpus.hpp"
#include "strongcbv/machine_env.hpp"
#include "strongcbv/machine_subst.hpp"
#include "strongcbv/nbe.hpp"
#include "strongcbv/sharing.hpp"
#include "strongcbv/syntax.hpp"

namespace {

using namespace scbv;

constexpr int exit_input = 1;
constexpr int exit_fuel = 2;
constexpr int exit_audit = 3;
constexpr int exit_not_convertible = 10;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AuditFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Audit { shape, decode, potential, bisim };

struct RunConfig {
    std::string machine = "subst";
    std::uint64_t fuel = machine::default_fuel;
    std::string audit = "shape";
    std::string out = "term";
    std::uint64_t cap = 100'000;
    bool stats = false;
    unsigned jobs = 1;
    bool corpus = false;
    std::string output_file;
};

std::set<Audit> parse_audits(const std::string& list) {
    if (list == "none") return {};
    if (list == "all") return {Audit::shape, Audit::decode, Audit::potential, Audit::bisim};
    std::set<Audit> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "shape") out.insert(Audit::shape);
        else if (item == "decode") out.insert(Audit::decode);
        else if (item == "potential") out.insert(Audit::potential);
        else if (item == "bisim") out.insert(Audit::bisim);
        else throw InputError("unknown audit '" + item + "' (expected none, all, or a list of shape, decode, potential, bisim)");
    }
    return out;
}

const char* audit_name(Audit a) {
    switch (a) {
    case Audit::shape: return "shape";
    case Audit::decode: return "decode";
    case Audit::potential: return "potential";
    case Audit::bisim: return "bisim";
    }
    return "?";
}

std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") {
        return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Term read_term(const std::string& path) { return parse(read_input(path)); }

/// Outcome of one normalization, independent of which normalizer produced it.
struct Normal {
    TermGraph nf;
    std::optional<machine::RunResult> run; // absent for nbe
    std::uint64_t applications = 0;
    std::uint64_t cache_hits = 0;
};

Normal normalize_with(const Term& t, const RunConfig& cfg) {
    Normal out;
    if (cfg.machine == "nbe") {
        nbe::detail::run_on_large_stack(
            [&] {
                nbe::Evaluator ev(cfg.fuel);
                NodeId root = ev.reify(ev.eval(t, nbe::Env{}));
                out.nf = *ev.graph();
                out.nf.set_root(root);
                out.applications = ev.applications();
                out.cache_hits = ev.cache_hits();
            },
            nbe::worker_stack_bytes);
        return out;
    }
    auto r = cfg.machine == "env" ? env_machine::run(t, cfg.fuel) : machine::run(t, cfg.fuel);
    out.nf = r.nf;
    out.run = std::move(r);
    return out;
}

/// Runs the requested audits against `t`; throws AuditFailure on the first
/// violation.
void run_audits(const Term& t, const RunConfig& cfg) {
    auto audits = parse_audits(cfg.audit);
    if (audits.empty()) return;
    if (cfg.machine == "nbe") {
        for (Audit a : audits) std::cerr << "audit " << audit_name(a) << ": inapplicable to the nbe machine\n";
        return;
    }
    analysis::AuditOptions opts;
    opts.fuel = cfg.fuel;
    opts.shape = audits.contains(Audit::shape);
    opts.decode = audits.contains(Audit::decode);
    opts.potential = audits.contains(Audit::potential);
    opts.bypass_gate = opts.decode ? 10'000 : 0;
    if (opts.shape || opts.decode || opts.potential) {
        auto rep = analysis::audit_trace(t, opts);
        if (rep.violation) throw AuditFailure(to_string(*rep.violation));
    }
    if (audits.contains(Audit::bisim)) {
        auto rep = analysis::bisim_check(t, cfg.fuel);
        if (!rep.ok) throw AuditFailure("bisimulation: " + rep.mismatch);
    }
}

void print_stats(std::ostream& os, const Normal& n, const RunConfig& cfg) {
    os << "machine: " << cfg.machine << '\n';
    if (n.run) {
        os << "steps: " << n.run->steps << '\n';
        os << "beta: " << n.run->beta() << '\n';
        os << "rules:";
        for (int r = 1; r <= 18; ++r) os << ' ' << r << '=' << n.run->rule_counts[r];
        os << '\n';
        os << "heap_size: " << n.run->heap_size << '\n';
        os << "max_stack_depth: " << n.run->max_stack_depth << '\n';
    } else {
        os << "applications: " << n.applications << '\n';
        os << "cache_hits: " << n.cache_hits << '\n';
    }
    os << "node_count: " << node_count(n.nf) << '\n';
    os << "unfolded_size: " << unfolded_size(n.nf) << '\n';
}

void print_normal_form(std::ostream& os, const TermGraph& nf, const RunConfig& cfg, bool force_dag) {
    if (force_dag) {
        write_dag(os, nf);
        return;
    }
    BigNat size = unfolded_size(nf);
    if (size > cfg.cap) {
        std::cerr << "note: unfolded normal form has " << size << " nodes, above the cap of " << cfg.cap
                  << "; printing the shared graph instead\n";
        write_dag(os, nf);
        return;
    }
    os << print(unfold(nf, cfg.cap)) << '\n';
}

int cmd_normalize(const std::string& file, const RunConfig& cfg) {
    Term t = read_term(file);
    if (cfg.out == "csv") {
        if (cfg.machine == "nbe") throw InputError("csv traces need an abstract machine, not nbe");
        run_audits(t, cfg);
        analysis::write_trace_csv(std::cout, analysis::emit_trace(t, cfg.fuel));
        return 0;
    }
    Normal n = normalize_with(t, cfg);
    run_audits(t, cfg);
    if (cfg.out == "term" || cfg.out == "dag") print_normal_form(std::cout, n.nf, cfg, cfg.out == "dag");
    if (cfg.out == "stats" || cfg.stats) print_stats(std::cout, n, cfg);
    return 0;
}

int cmd_trace(const std::string& file, const RunConfig& cfg) {
    if (cfg.machine == "nbe") throw InputError("trace needs an abstract machine, not nbe");
    Term t = read_term(file);
    // Both machines fire identical rule sequences, so the trace is taken on
    // the substitution machine where the potential is defined.
    auto rows = analysis::emit_trace(t, cfg.fuel);
    if (cfg.output_file.empty()) {
        analysis::write_trace_csv(std::cout, rows);
    } else {
        std::ofstream f(cfg.output_file, std::ios::binary);
        if (!f) throw InputError("cannot write '" + cfg.output_file + "'");
        analysis::write_trace_csv(f, rows);
    }
    return 0;
}

int cmd_gen(const std::string& family, std::uint64_t n) {
    std::cout << print(gen_family(family, n)) << '\n';
    return 0;
}

int cmd_convert(const std::string& a, const std::string& b, const RunConfig& cfg) {
    Term ta = read_term(a);
    Term tb = read_term(b);
    Normal na = normalize_with(ta, cfg);
    Normal nb = normalize_with(tb, cfg);
    if (shared_alpha_eq(na.nf, nb.nf)) {
        std::cout << "convertible\n";
        return 0;
    }
    std::cout << "not convertible\n";
    return exit_not_convertible;
}

std::vector<CorpusEntry> batch_inputs(const std::string& file, const RunConfig& cfg) {
    if (cfg.corpus) return standard_corpus();
    return {{file.empty() || file == "-" ? "stdin" : file, read_term(file)}};
}

/// Applies `job` to every entry on `jobs` workers; results come back in
/// input order.
template <class Result, class Job>
std::vector<Result> fan_out(const std::vector<CorpusEntry>& entries, unsigned jobs, Job job) {
    std::vector<Result> results(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < entries.size();) results[i] = job(entries[i]);
    };
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return results;
}

int cmd_audit(const std::string& file, const RunConfig& cfg) {
    auto entries = batch_inputs(file, cfg);
    struct Outcome {
        std::string line;
        std::string violation;
        bool fuel = false;
    };
    auto results = fan_out<Outcome>(entries, cfg.jobs, [&](const CorpusEntry& e) {
        Outcome o;
        analysis::AuditOptions opts;
        opts.fuel = cfg.fuel;
        auto rep = analysis::audit_trace(e.term, opts);
        auto bis = analysis::bisim_check(e.term, cfg.fuel);
        std::ostringstream os;
        os << e.name << " steps=" << rep.steps << " beta=" << rep.rule_counts[5] << " rule7=" << rep.rule_counts[7]
           << " phi0=" << rep.phi_initial_term << " margin=" << rep.trace_bound_margin
           << " memo_checks=" << rep.bypass_checks;
        if (rep.violation) {
            os << " VIOLATION";
            o.violation = e.name + ": " + to_string(*rep.violation);
        } else if (!bis.ok) {
            os << " VIOLATION";
            o.violation = e.name + ": bisimulation: " + bis.mismatch;
        } else if (!rep.completed) {
            os << " FUEL";
            o.fuel = true;
        } else {
            os << " ok";
        }
        o.line = os.str();
        return o;
    });
    bool violated = false, fuel = false;
    for (const auto& o : results) {
        std::cout << o.line << '\n';
        if (!o.violation.empty()) {
            std::cerr << o.violation << '\n';
            violated = true;
        }
        fuel = fuel || o.fuel;
    }
    if (violated) return exit_audit;
    return fuel ? exit_fuel : 0;
}

int cmd_bench(const std::string& file, const RunConfig& cfg) {
    auto entries = batch_inputs(file, cfg);
    struct Outcome {
        std::string line;
        double seconds = 0;
        bool fuel = false;
    };
    auto results = fan_out<Outcome>(entries, cfg.jobs, [&](const CorpusEntry& e) {
        Outcome o;
        std::ostringstream os;
        os << e.name;
        auto start = std::chrono::steady_clock::now();
        try {
            Normal n = normalize_with(e.term, cfg);
            o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (n.run) os << " steps=" << n.run->steps << " beta=" << n.run->beta();
            else os << " applications=" << n.applications;
            os << " nodes=" << node_count(n.nf) << " unfolded=" << unfolded_size(n.nf);
        } catch (const FuelExhausted&) {
            os << " FUEL";
            o.fuel = true;
        } catch (const RecursionLimit&) {
            os << " DEPTH";
            o.fuel = true;
        }
        o.line = os.str();
        return o;
    });
    bool fuel = false;
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::cout << results[i].line << '\n';
        std::cerr << entries[i].name << ' ' << results[i].seconds << "s\n";
        fuel = fuel || results[i].fuel;
    }
    return fuel ? exit_fuel : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strong call-by-value normalization with abstract machines"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    if (const char* env = std::getenv("STRONGCBV_FUEL")) {
        try {
            cfg.fuel = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "error: STRONGCBV_FUEL is not a natural number: " << env << '\n';
            return exit_input;
        }
    }
    app.add_option("--machine", cfg.machine, "Normalizer")->check(CLI::IsMember({"subst", "env", "nbe"}));
    app.add_option("--fuel", cfg.fuel, "Transition budget (default 10^7, or $STRONGCBV_FUEL)");
    app.add_option("--audit", cfg.audit, "none, all, or a comma list of shape, decode, potential, bisim");
    app.add_option("--out", cfg.out, "Output format")->check(CLI::IsMember({"term", "dag", "stats", "csv"}));
    app.add_option("--cap", cfg.cap, "Largest unfolded size printed as a term");
    app.add_flag("--stats", cfg.stats, "Append run statistics");
    app.add_option("--jobs", cfg.jobs, "Worker threads for corpus commands")->check(CLI::PositiveNumber);

    std::string file, file_b, family;
    std::uint64_t n = 0;

    auto* normalize = app.add_subcommand("normalize", "Print the normal form of a term");
    normalize->add_option("file", file, "Term file (default stdin)");

    auto* trace = app.add_subcommand("trace", "Per-step potential trace as CSV");
    trace->add_option("file", file, "Term file (default stdin)");
    trace->add_option("-o,--output", cfg.output_file, "CSV destination (default stdout)");

    auto* gen = app.add_subcommand("gen", "Print a member of a term family");
    gen->add_option("family", family, "church, omega, dub, identity, e, A, B or Q")->required();
    gen->add_option("n", n, "Index")->required();

    auto* convert = app.add_subcommand("convert", "Decide beta-convertibility of two terms");
    convert->add_option("a", file, "First term file")->required();
    convert->add_option("b", file_b, "Second term file")->required();

    auto* audit = app.add_subcommand("audit", "Run every runtime lemma check");
    audit->add_option("file", file, "Term file (default stdin)");
    audit->add_flag("--corpus", cfg.corpus, "Audit the built-in corpus");

    auto* bench = app.add_subcommand("bench", "Normalize and report sizes; timings go to stderr");
    bench->add_option("file", file, "Term file (default stdin)");
    bench->add_flag("--corpus", cfg.corpus, "Benchmark the built-in corpus");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_input;
    }

    try {
        if (*normalize) return cmd_normalize(file, cfg);
        if (*trace) return cmd_trace(file, cfg);
        if (*gen) return cmd_gen(family, n);
        if (*convert) return cmd_convert(file, file_b, cfg);
        if (*audit) return cmd_audit(file, cfg);
        if (*bench) return cmd_bench(file, cfg);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return exit_input;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const FuelExhausted& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fuel;
    } catch (const RecursionLimit& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fuel;
    } catch (const AuditFailure& e) {
        std::cerr << "audit failure: " << e.what() << '\n';
        return exit_audit;
    }
    return exit_input;
}
