#pragma once

// Memoizing normalization by evaluation for strong call-by-value. Values that
// get bound to variables carry a write-once cache for their normal form, and
// reification writes into a shared node graph so cached normal forms are
// reused rather than copied.

#include <pthread.h>

#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <system_error>
#include <variant>

#include "strongcbv/error.hpp"
#include "strongcbv/persistent_map.hpp"
#include "strongcbv/sharing.hpp"
#include "strongcbv/syntax.hpp"

namespace scbv::nbe {

class CacheCell {
public:
    const std::optional<NodeId>& content() const noexcept { return content_; }

    void fill(NodeId n) {
        if (content_) throw std::logic_error("normal-form cache written twice");
        content_ = n;
    }

private:
    std::optional<NodeId> content_;
};

struct SemNode;
using Sem = std::shared_ptr<const SemNode>;

struct Abs {
    std::function<Sem(const Sem&)> apply;
};
struct Neutral {
    std::function<NodeId()> force;
};
struct Cached {
    std::shared_ptr<CacheCell> cache;
    Sem inner;
};

struct SemNode {
    using Repr = std::variant<Abs, Neutral, Cached>;
    Repr v;
};

using Env = PersistentMap<Ident, Sem>;

inline constexpr std::uint64_t unlimited_fuel = ~std::uint64_t{0};

// Each nested eval or reify costs about 1 KiB of native stack; the limit keeps
// nbe_normalize inside its dedicated stack with room to spare.
inline constexpr std::size_t worker_stack_bytes = std::size_t{512} << 20;
inline constexpr std::uint64_t default_max_depth = 200'000;

/// One normalization's worth of state: the output graph, the fresh-name
/// counter and every cache created along the way. Fuel bounds the number of
/// semantic function applications.
class Evaluator {
public:
    explicit Evaluator(std::uint64_t fuel = unlimited_fuel, std::uint64_t max_depth = default_max_depth)
        : graph_(std::make_shared<TermGraph>()), fuel_(fuel), max_depth_(max_depth) {}

    Sem eval(const Term& t, const Env& env) {
        DepthGuard guard(*this);
        switch (t->kind) {
        case TermNode::Kind::var:
            if (const Sem* v = env.find(t->id)) return *v;
            return abstract_variable(Ident::free_marker(t->id.name));
        case TermNode::Kind::lam: {
            Ident x = t->id;
            Term body = t->left;
            return make(Abs{[this, x, body, env](const Sem& v) { return eval(body, env.insert(x, mount_cache(v))); }});
        }
        case TermNode::Kind::app: {
            // Right to left.
            Sem arg = eval(t->right, env);
            Sem fun = eval(t->left, env);
            return apply(fun, arg);
        }
        }
        throw std::logic_error("unreachable term kind");
    }

    NodeId reify(const Sem& v) {
        DepthGuard guard(*this);
        if (auto* a = std::get_if<Abs>(&v->v)) {
            Ident x = Ident::generated("x", counter_++);
            NodeId body = reify(a->apply(abstract_variable(x)));
            return graph_->add_lam(x, body);
        }
        if (auto* n = std::get_if<Neutral>(&v->v)) return n->force();
        const auto& c = std::get<Cached>(v->v);
        return cached_call(*c.cache, [&] { return reify(c.inner); });
    }

    /// Application of a semantic function value.
    Sem apply(const Sem& fun, const Sem& arg) {
        if (auto* a = std::get_if<Abs>(&fun->v)) {
            if (applications_ == fuel_) throw FuelExhausted(applications_);
            ++applications_;
            return a->apply(arg);
        }
        if (auto* n = std::get_if<Neutral>(&fun->v)) return apply_neutral(n->force, arg);
        const auto& c = std::get<Cached>(fun->v);
        if (auto* n = std::get_if<Neutral>(&c.inner->v)) {
            auto cache = c.cache;
            auto force = n->force;
            return apply_neutral([this, cache, force] { return cached_call(*cache, force); }, arg);
        }
        // Abstractions change under application, so their cache is not consulted.
        if (!std::holds_alternative<Abs>(c.inner->v)) throw std::logic_error("cache wraps a cache");
        ++abstraction_cache_bypasses_;
        return apply(c.inner, arg);
    }

    static Sem mount_cache(const Sem& v) {
        if (std::holds_alternative<Cached>(v->v)) return v;
        return make(Cached{std::make_shared<CacheCell>(), v});
    }

    std::shared_ptr<TermGraph> graph() const { return graph_; }
    std::uint64_t counter() const noexcept { return counter_; }
    std::uint64_t applications() const noexcept { return applications_; }
    std::uint64_t cache_hits() const noexcept { return cache_hits_; }
    std::uint64_t abstraction_cache_bypasses() const noexcept { return abstraction_cache_bypasses_; }

private:
    std::shared_ptr<TermGraph> graph_;
    std::uint64_t fuel_;
    std::uint64_t max_depth_;
    std::uint64_t depth_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t applications_ = 0;
    std::uint64_t cache_hits_ = 0;
    std::uint64_t abstraction_cache_bypasses_ = 0;

    struct DepthGuard {
        Evaluator& ev;
        explicit DepthGuard(Evaluator& e) : ev(e) {
            if (ev.depth_ == ev.max_depth_) throw RecursionLimit(ev.max_depth_);
            ++ev.depth_;
        }
        ~DepthGuard() { --ev.depth_; }
    };

    static Sem make(SemNode::Repr v) { return std::make_shared<const SemNode>(SemNode{std::move(v)}); }

    Sem abstract_variable(Ident x) {
        NodeId node = graph_->add_var(std::move(x));
        return make(Neutral{[node] { return node; }});
    }

    Sem apply_neutral(std::function<NodeId()> head, const Sem& arg) {
        return make(Neutral{[this, head = std::move(head), arg] {
            NodeId n = reify(arg);
            NodeId h = head();
            return graph_->add_app(h, n);
        }});
    }

    template <class Thunk>
    NodeId cached_call(CacheCell& c, Thunk&& compute) {
        if (c.content()) {
            ++cache_hits_;
            return *c.content();
        }
        NodeId y = compute();
        c.fill(y);
        return y;
    }
};

namespace detail {

// Runs `f` to completion on a fresh thread with a stack of `bytes` bytes and
// rethrows whatever it threw.
template <class F>
void run_on_large_stack(F&& f, std::size_t bytes) {
    struct Job {
        F* f;
        std::exception_ptr error;
    } job{&f, nullptr};
    auto entry = [](void* p) -> void* {
        auto* j = static_cast<Job*>(p);
        try {
            (*j->f)();
        } catch (...) {
            j->error = std::current_exception();
        }
        return nullptr;
    };
    pthread_attr_t attr;
    pthread_attr_init(&attr);
    pthread_attr_setstacksize(&attr, bytes);
    pthread_t th;
    int rc = pthread_create(&th, &attr, entry, &job);
    pthread_attr_destroy(&attr);
    if (rc != 0) throw std::system_error(rc, std::generic_category(), "pthread_create");
    pthread_join(th, nullptr);
    if (job.error) std::rethrow_exception(job.error);
}

} // namespace detail

/// Evaluation in the empty environment followed by reification, on a
/// worker thread whose stack fits `max_depth` nested calls.
inline TermGraph nbe_normalize(const Term& t, std::uint64_t fuel = unlimited_fuel,
                               std::uint64_t max_depth = default_max_depth) {
    TermGraph g;
    detail::run_on_large_stack(
        [&] {
            Evaluator ev(fuel, max_depth);
            NodeId root = ev.reify(ev.eval(t, Env{}));
            g = *ev.graph();
            g.set_root(root);
        },
        worker_stack_bytes);
    return g;
}

} // namespace scbv::nbe
