// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "meta_atom.hpp"

namespace rpems {

// Anything that maps (layout, state) to the cell response.
class AtomTwin {
public:
    virtual ~AtomTwin() = default;
    virtual AtomResponse response(const AtomDescriptor& g, int s) const = 0;
};

// Exact twin backed by the analytic resonator model.
class OracleTwin final : public AtomTwin {
public:
    explicit OracleTwin(IncidentWave wave, AtomBounds bounds = AtomBounds::standard())
        : wave_(std::move(wave)), bounds_(bounds)
    {
    }

    AtomResponse response(const AtomDescriptor& g, int s) const override
    {
        return oracle_response(g, s, wave_, bounds_);
    }

private:
    IncidentWave wave_;
    AtomBounds bounds_;
};

} // namespace rpems
