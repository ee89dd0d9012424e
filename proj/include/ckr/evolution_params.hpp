#pragma once

#include <cmath>
#include <string>

#include "ckr/errors.hpp"

namespace ckr {

// Kick strengths, coupling, and the scaled Planck constant of the pair.
// xi12 = 0 is the exactly uncoupled limit.
struct SystemParams {
    double k1 = 0.0;
    double k2 = 0.0;
    double xi12 = 0.0;
    double hbar_s = 1.0;

    void validate() const {
        if (!std::isfinite(k1) || !std::isfinite(k2))
            throw ConfigError("SystemParams: kick strengths must be finite");
        if (!(xi12 >= 0.0) || !std::isfinite(xi12))
            throw ConfigError("SystemParams: xi12 must be finite and >= 0");
        if (!(hbar_s > 0.0) || !std::isfinite(hbar_s))
            throw ConfigError("SystemParams: hbar_s must be positive");
    }

    bool operator==(const SystemParams&) const = default;
};

} // namespace ckr
