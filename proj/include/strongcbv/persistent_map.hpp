#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>

namespace scbv {

/// Immutable AVL tree. `insert` copies O(log n) nodes and shares the rest,
/// so old versions stay valid and cheap to keep.
template <class Key, class Value, class Compare = std::less<Key>>
class PersistentMap {
    struct Node;
    using Ptr = std::shared_ptr<const Node>;

    struct Node {
        Key key;
        Value value;
        Ptr left;
        Ptr right;
        int height;
        std::size_t size;
    };

public:
    PersistentMap() = default;

    bool empty() const noexcept { return root_ == nullptr; }
    std::size_t size() const noexcept { return size_of(root_); }

    const Value* find(const Key& k) const {
        const Node* n = root_.get();
        Compare less;
        while (n) {
            if (less(k, n->key)) n = n->left.get();
            else if (less(n->key, k)) n = n->right.get();
            else return &n->value;
        }
        return nullptr;
    }

    bool contains(const Key& k) const { return find(k) != nullptr; }

    [[nodiscard]] PersistentMap insert(const Key& k, Value v) const { return PersistentMap(insert(root_, k, std::move(v))); }

    /// In-order traversal.
    template <class F>
    void for_each(F&& f) const { walk(root_.get(), f); }

    /// Identity of the underlying tree; equal ids imply equal contents.
    const void* id() const noexcept { return root_.get(); }

private:
    Ptr root_;

    explicit PersistentMap(Ptr r) : root_(std::move(r)) {}

    static int height(const Ptr& n) { return n ? n->height : 0; }
    static std::size_t size_of(const Ptr& n) { return n ? n->size : 0; }

    static Ptr make(const Key& k, const Value& v, Ptr l, Ptr r) {
        int h = 1 + std::max(height(l), height(r));
        std::size_t s = 1 + size_of(l) + size_of(r);
        return std::make_shared<const Node>(Node{k, v, std::move(l), std::move(r), h, s});
    }

    static Ptr balance(const Key& k, const Value& v, Ptr l, Ptr r) {
        int hl = height(l), hr = height(r);
        if (hl > hr + 1) {
            if (height(l->left) >= height(l->right))
                return make(l->key, l->value, l->left, make(k, v, l->right, std::move(r)));
            return make(l->right->key, l->right->value,
                        make(l->key, l->value, l->left, l->right->left),
                        make(k, v, l->right->right, std::move(r)));
        }
        if (hr > hl + 1) {
            if (height(r->right) >= height(r->left))
                return make(r->key, r->value, make(k, v, std::move(l), r->left), r->right);
            return make(r->left->key, r->left->value,
                        make(k, v, std::move(l), r->left->left),
                        make(r->key, r->value, r->left->right, r->right));
        }
        return make(k, v, std::move(l), std::move(r));
    }

    static Ptr insert(const Ptr& n, const Key& k, Value v) {
        if (!n) return make(k, v, nullptr, nullptr);
        Compare less;
        if (less(k, n->key)) return balance(n->key, n->value, insert(n->left, k, std::move(v)), n->right);
        if (less(n->key, k)) return balance(n->key, n->value, n->left, insert(n->right, k, std::move(v)));
        return make(k, v, n->left, n->right);
    }

    template <class F>
    static void walk(const Node* n, F& f) {
        if (!n) return;
        walk(n->left.get(), f);
        f(n->key, n->value);
        walk(n->right.get(), f);
    }
};

} // namespace scbv
