#pragma once

// Shared (DAG) representation of normal forms. Nodes are appended to a table
// and only ever point at earlier entries, so every graph is acyclic by
// construction.

#include <boost/functional/hash.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "strongcbv/error.hpp"
#include "strongcbv/syntax.hpp"

namespace scbv {

using NodeId = std::uint32_t;
using BigNat = boost::multiprecision::cpp_int;

inline constexpr NodeId no_node = std::numeric_limits<NodeId>::max();

struct GraphNode {
    enum class Kind : std::uint8_t { var, app, lam };

    Kind kind;
    Ident id;              // var, lam binder
    NodeId left = no_node; // app function, lam body
    NodeId right = no_node;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

class TermGraph {
public:
    NodeId add_var(Ident x) { return push({GraphNode::Kind::var, std::move(x)}); }

    NodeId add_app(NodeId f, NodeId a) {
        check_child(f);
        check_child(a);
        return push({GraphNode::Kind::app, {}, f, a});
    }

    NodeId add_lam(Ident x, NodeId body) {
        check_child(body);
        return push({GraphNode::Kind::lam, std::move(x), body});
    }

    const GraphNode& node(NodeId i) const { return nodes_.at(i); }
    std::span<const GraphNode> nodes() const { return nodes_; }
    std::size_t table_size() const { return nodes_.size(); }

    NodeId root() const { return root_; }
    void set_root(NodeId r) {
        check_child(r);
        root_ = r;
    }

private:
    std::vector<GraphNode> nodes_;
    NodeId root_ = no_node;

    NodeId push(GraphNode n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void check_child(NodeId i) const {
        if (i >= nodes_.size()) throw std::out_of_range("graph node @" + std::to_string(i) + " does not exist");
    }
};

/// Nodes reachable from `from`, in ascending index order.
inline std::vector<NodeId> reachable(const TermGraph& g, NodeId from) {
    std::vector<bool> seen(g.table_size(), false);
    seen.at(from) = true;
    // Children have smaller indices, so one descending sweep marks everything.
    for (NodeId i = from + 1; i-- > 0;) {
        if (!seen[i]) continue;
        const auto& n = g.node(i);
        if (n.left != no_node) seen[n.left] = true;
        if (n.right != no_node) seen[n.right] = true;
    }
    std::vector<NodeId> out;
    for (NodeId i = 0; i <= from; ++i)
        if (seen[i]) out.push_back(i);
    return out;
}

inline std::size_t node_count(const TermGraph& g) { return reachable(g, g.root()).size(); }

/// Size of the unfolded tree under `from`, without building it.
inline BigNat unfolded_size(const TermGraph& g, NodeId from) {
    std::vector<BigNat> size(from + 1);
    for (NodeId i : reachable(g, from)) {
        const auto& n = g.node(i);
        switch (n.kind) {
        case GraphNode::Kind::var: size[i] = 1; break;
        case GraphNode::Kind::lam: size[i] = 1 + size[n.left]; break;
        case GraphNode::Kind::app: size[i] = 1 + size[n.left] + size[n.right]; break;
        }
    }
    return size[from];
}

inline BigNat unfolded_size(const TermGraph& g) { return unfolded_size(g, g.root()); }

/// Plain term for the subgraph at `from`; refuses when it would exceed `cap`
/// constructors. Shared nodes map to shared term pointers.
inline Term unfold(const TermGraph& g, NodeId from, std::uint64_t cap) {
    if (unfolded_size(g, from) > cap) throw OverCap("unfolded term exceeds cap of " + std::to_string(cap) + " constructors");
    std::unordered_map<NodeId, Term> built;
    for (NodeId i : reachable(g, from)) {
        const auto& n = g.node(i);
        switch (n.kind) {
        case GraphNode::Kind::var: built[i] = var(n.id); break;
        case GraphNode::Kind::lam: built[i] = lam(n.id, built.at(n.left)); break;
        case GraphNode::Kind::app: built[i] = app(built.at(n.left), built.at(n.right)); break;
        }
    }
    return built.at(from);
}

inline Term unfold(const TermGraph& g, std::uint64_t cap) { return unfold(g, g.root(), cap); }

/// Graph with one node per constructor of `t` (no sharing beyond what the
/// term pointers already share).
inline TermGraph graph_of(const Term& t) {
    TermGraph g;
    std::unordered_map<const TermNode*, NodeId> done;
    auto go = [&](auto& self, const Term& u) -> NodeId {
        if (auto it = done.find(u.get()); it != done.end()) return it->second;
        NodeId id = no_node;
        switch (u->kind) {
        case TermNode::Kind::var: id = g.add_var(u->id); break;
        case TermNode::Kind::lam: {
            NodeId b = self(self, u->left);
            id = g.add_lam(u->id, b);
            break;
        }
        case TermNode::Kind::app: {
            NodeId f = self(self, u->left);
            NodeId a = self(self, u->right);
            id = g.add_app(f, a);
            break;
        }
        }
        done.emplace(u.get(), id);
        return id;
    };
    g.set_root(go(go, t));
    return g;
}

// ---------------------------------------------------------------------------
// Alpha-equivalence on shared graphs
// ---------------------------------------------------------------------------

namespace detail {

// Free identifiers of every node, computed bottom-up and shared by pointer
// between nodes with equal sets.
class FreeVarTable {
public:
    explicit FreeVarTable(const TermGraph& g) : sets_(g.table_size()) {
        for (NodeId i = 0; i < g.table_size(); ++i) {
            const auto& n = g.node(i);
            switch (n.kind) {
            case GraphNode::Kind::var:
                sets_[i] = std::make_shared<const std::vector<Ident>>(std::vector<Ident>{n.id});
                break;
            case GraphNode::Kind::lam: {
                const auto& body = *sets_[n.left];
                auto it = std::lower_bound(body.begin(), body.end(), n.id);
                if (it == body.end() || *it != n.id) {
                    sets_[i] = sets_[n.left];
                } else {
                    std::vector<Ident> s;
                    s.reserve(body.size() - 1);
                    s.insert(s.end(), body.begin(), it);
                    s.insert(s.end(), it + 1, body.end());
                    sets_[i] = std::make_shared<const std::vector<Ident>>(std::move(s));
                }
                break;
            }
            case GraphNode::Kind::app: {
                const auto& l = sets_[n.left];
                const auto& r = sets_[n.right];
                if (l == r || std::includes(l->begin(), l->end(), r->begin(), r->end())) {
                    sets_[i] = l;
                } else if (std::includes(r->begin(), r->end(), l->begin(), l->end())) {
                    sets_[i] = r;
                } else {
                    std::vector<Ident> s;
                    std::set_union(l->begin(), l->end(), r->begin(), r->end(), std::back_inserter(s));
                    sets_[i] = std::make_shared<const std::vector<Ident>>(std::move(s));
                }
                break;
            }
            }
        }
    }

    const std::vector<Ident>& operator[](NodeId i) const { return *sets_[i]; }

private:
    std::vector<std::shared_ptr<const std::vector<Ident>>> sets_;
};

class SharedAlphaEq {
public:
    SharedAlphaEq(const TermGraph& a, const TermGraph& b) : ga_(a), gb_(b), fva_(a), fvb_(b) {}

    bool run(NodeId ra, NodeId rb) { return eq(ra, rb, 0); }

private:
    static constexpr std::uint32_t free_level = std::numeric_limits<std::uint32_t>::max();

    const TermGraph& ga_;
    const TermGraph& gb_;
    FreeVarTable fva_;
    FreeVarTable fvb_;
    std::map<Ident, std::vector<std::uint32_t>> scope_a_;
    std::map<Ident, std::vector<std::uint32_t>> scope_b_;

    // A node pair's verdict depends only on where its free identifiers are
    // bound, so that binding profile is part of the memo key.
    struct Key {
        NodeId a, b;
        std::vector<std::uint32_t> profile;
        friend bool operator==(const Key&, const Key&) = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = 0;
            boost::hash_combine(h, k.a);
            boost::hash_combine(h, k.b);
            boost::hash_range(h, k.profile.begin(), k.profile.end());
            return h;
        }
    };
    std::unordered_map<Key, bool, KeyHash> memo_;

    static std::uint32_t level(const std::map<Ident, std::vector<std::uint32_t>>& scope, const Ident& x) {
        auto it = scope.find(x);
        return (it == scope.end() || it->second.empty()) ? free_level : it->second.back();
    }

    Key key(NodeId a, NodeId b) const {
        Key k{a, b, {}};
        const auto& fa = fva_[a];
        const auto& fb = fvb_[b];
        k.profile.reserve(fa.size() + fb.size() + 1);
        for (const auto& x : fa) k.profile.push_back(level(scope_a_, x));
        k.profile.push_back(free_level - 1);
        for (const auto& x : fb) k.profile.push_back(level(scope_b_, x));
        return k;
    }

    bool eq(NodeId a, NodeId b, std::uint32_t depth) {
        const auto& na = ga_.node(a);
        const auto& nb = gb_.node(b);
        if (na.kind != nb.kind) return false;
        if (na.kind == GraphNode::Kind::var) {
            auto la = level(scope_a_, na.id);
            auto lb = level(scope_b_, nb.id);
            if (la != lb) return false;
            return la != free_level || na.id == nb.id;
        }
        if (fva_[a].size() != fvb_[b].size()) return false;
        Key k = key(a, b);
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        bool r;
        if (na.kind == GraphNode::Kind::app) {
            r = eq(na.left, nb.left, depth) && eq(na.right, nb.right, depth);
        } else {
            scope_a_[na.id].push_back(depth);
            scope_b_[nb.id].push_back(depth);
            r = eq(na.left, nb.left, depth + 1);
            scope_a_[na.id].pop_back();
            scope_b_[nb.id].pop_back();
        }
        memo_.emplace(std::move(k), r);
        return r;
    }
};

} // namespace detail

/// Alpha-equivalence of the unfoldings, computed on the shared graphs.
inline bool shared_alpha_eq(const TermGraph& a, NodeId ra, const TermGraph& b, NodeId rb) {
    return detail::SharedAlphaEq(a, b).run(ra, rb);
}

inline bool shared_alpha_eq(const TermGraph& a, const TermGraph& b) {
    return shared_alpha_eq(a, a.root(), b, b.root());
}

// ---------------------------------------------------------------------------
// Textual DAG format
//
//   @<idx> = var <ident> | app @i @j | lam <ident> @i
//   root @<idx>
//
// Reachable nodes only, renumbered densely in ascending table order.
// ---------------------------------------------------------------------------

inline void write_dag(std::ostream& os, const TermGraph& g) {
    auto live = reachable(g, g.root());
    std::unordered_map<NodeId, std::size_t> renumber;
    for (std::size_t k = 0; k < live.size(); ++k) renumber[live[k]] = k;
    for (std::size_t k = 0; k < live.size(); ++k) {
        const auto& n = g.node(live[k]);
        os << '@' << k << " = ";
        switch (n.kind) {
        case GraphNode::Kind::var: os << "var " << to_string(n.id); break;
        case GraphNode::Kind::app: os << "app @" << renumber[n.left] << " @" << renumber[n.right]; break;
        case GraphNode::Kind::lam: os << "lam " << to_string(n.id) << " @" << renumber[n.left]; break;
        }
        os << '\n';
    }
    os << "root @" << renumber[g.root()] << '\n';
}

inline std::string dag_string(const TermGraph& g) {
    std::ostringstream os;
    write_dag(os, g);
    return os.str();
}

inline TermGraph read_dag(std::istream& is) {
    TermGraph g;
    std::string line;
    std::size_t lineno = 0;
    bool have_root = false;
    auto ref = [&](std::istringstream& ls) -> NodeId {
        std::string tok;
        ls >> tok;
        if (tok.size() < 2 || tok[0] != '@') throw ParseError("expected node reference", lineno, 1);
        return static_cast<NodeId>(std::stoul(tok.substr(1)));
    };
    auto ident = [&](std::istringstream& ls) -> Ident {
        std::string tok;
        ls >> tok;
        Term v = parse(tok, {.read_reserved = true});
        if (!is_var(v)) throw ParseError("expected identifier", lineno, 1);
        return v->id;
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        try {
            if (head == "root") {
                g.set_root(ref(ls));
                have_root = true;
                continue;
            }
            if (head.empty() || head[0] != '@' || std::stoul(head.substr(1)) != g.table_size())
                throw ParseError("node lines must be numbered consecutively from @0", lineno, 1);
            std::string eq, kind;
            ls >> eq >> kind;
            if (eq != "=") throw ParseError("expected '='", lineno, 1);
            if (kind == "var") {
                g.add_var(ident(ls));
            } else if (kind == "app") {
                NodeId f = ref(ls);
                NodeId a = ref(ls);
                g.add_app(f, a);
            } else if (kind == "lam") {
                Ident x = ident(ls);
                g.add_lam(x, ref(ls));
            } else {
                throw ParseError("unknown node kind '" + kind + "'", lineno, 1);
            }
        } catch (const std::out_of_range&) {
            throw ParseError("reference to a node not yet defined", lineno, 1);
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed node reference", lineno, 1);
        }
    }
    if (!have_root) throw ParseError("missing root line", lineno + 1, 1);
    return g;
}

} // namespace scbv
