#pragma once

// Beta-convertibility: normalize both sides with the substitution machine
// and compare the shared outputs up to renaming of bound variables.

#include "strongcbv/machine_subst.hpp"
#include "strongcbv/sharing.hpp"

namespace scbv {

inline bool convertible(const Term& a, const Term& b, std::uint64_t fuel = machine::default_fuel) {
    auto ra = machine::run(a, fuel);
    auto rb = machine::run(b, fuel);
    return shared_alpha_eq(ra.nf, rb.nf);
}

} // namespace scbv
