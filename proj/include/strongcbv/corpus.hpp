#pragma once

// Named benchmark terms: identity applications, Church-numeral iterations of
// a duplicator and of c_2 on the identity, and the two size-explosion
// families.

#include <string>
#include <vector>

#include "strongcbv/syntax.hpp"

namespace scbv {

struct CorpusEntry {
    std::string name;
    Term term;
};

/// `(c_k dub) I`
inline Term church_dub_identity(std::uint64_t k) { return app(app(church(k), dub()), identity()); }

/// `(c_k c_2) I`
inline Term church_two_identity(std::uint64_t k) { return app(app(church(k), church(2)), identity()); }

inline std::vector<CorpusEntry> standard_corpus() {
    std::vector<CorpusEntry> out;
    out.push_back({"id-id", parse(R"t((\x.x) (\y.y))t")});
    out.push_back({"id-id-id", parse(R"t(((\x.x) (\y.y)) (\z.z))t")});
    out.push_back({"id-under-lambda", parse(R"t(\z. (\x.x) z)t")});
    out.push_back({"id-inert", parse(R"t(\z. (\x.x) (z z))t")});
    for (std::uint64_t k = 0; k <= 10; ++k) out.push_back({"dub-" + std::to_string(k), church_dub_identity(k)});
    for (std::uint64_t k = 0; k <= 8; ++k) out.push_back({"c2-" + std::to_string(k), church_two_identity(k)});
    for (std::uint64_t n = 0; n <= 12; ++n) out.push_back({"e-" + std::to_string(n), gen_family(Family::e, n)});
    for (std::uint64_t n = 0; n <= 10; ++n) out.push_back({"Q-" + std::to_string(n), gen_family(Family::Q, n)});
    return out;
}

} // namespace scbv
