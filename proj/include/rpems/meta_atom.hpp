// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>

#include "gstc.hpp"

namespace rpems {

// Sixteen geometric parameters [m]. Entries come in tied pairs
// (x-polarised half, y-polarised half); see tie_pairs.
struct AtomDescriptor {
    std::array<double, 16> g{};

    static constexpr std::array<std::array<int, 2>, 8> tie_pairs{
        {{0, 1}, {2, 3}, {4, 10}, {5, 11}, {6, 12}, {7, 13}, {8, 14}, {9, 15}}};

    static AtomDescriptor nominal()
    {
        return from_free({3.854e-2, 2.191e-2, 1.616e-4, 2.488e-3, 3.300e-4, 1.777e-3, 2.000e-4, 6.000e-4});
    }

    static AtomDescriptor from_free(const std::array<double, 8>& v)
    {
        AtomDescriptor d;
        for (std::size_t k = 0; k < 8; ++k) {
            d.g[tie_pairs[k][0]] = v[k];
            d.g[tie_pairs[k][1]] = v[k];
        }
        return d;
    }

    std::array<double, 8> free_params() const
    {
        std::array<double, 8> v{};
        for (std::size_t k = 0; k < 8; ++k) v[k] = g[tie_pairs[k][0]];
        return v;
    }

    bool tied() const
    {
        for (const auto& p : tie_pairs)
            if (g[p[0]] != g[p[1]]) return false;
        return true;
    }

    // Resonator parameters driving one polarisation: 0 = x (par), 1 = y (perp).
    std::array<double, 8> half(int which) const
    {
        std::array<double, 8> v{};
        for (std::size_t k = 0; k < 8; ++k) v[k] = g[tie_pairs[k][which]];
        return v;
    }

    bool operator==(const AtomDescriptor&) const = default;
};

struct AtomBounds {
    std::array<double, 16> lower{};
    std::array<double, 16> upper{};

    static AtomBounds around(const AtomDescriptor& d, double lo_factor, double hi_factor)
    {
        AtomBounds b;
        for (std::size_t u = 0; u < 16; ++u) {
            b.lower[u] = d.g[u] * lo_factor;
            b.upper[u] = d.g[u] * hi_factor;
        }
        return b;
    }

    // Nominal layout +-20 %.
    static AtomBounds standard() { return around(AtomDescriptor::nominal(), 0.8, 1.2); }

    bool contains(const AtomDescriptor& d) const
    {
        for (std::size_t u = 0; u < 16; ++u)
            if (!(d.g[u] >= lower[u] && d.g[u] <= upper[u])) return false;
        return true;
    }

    // Box over the 8 tied parameters.
    std::pair<std::array<double, 8>, std::array<double, 8>> free_box() const
    {
        std::array<double, 8> lo{}, hi{};
        for (std::size_t k = 0; k < 8; ++k) {
            const auto [a, b] = AtomDescriptor::tie_pairs[k];
            lo[k] = std::max(lower[a], lower[b]);
            hi[k] = std::min(upper[a], upper[b]);
            if (!(lo[k] <= hi[k])) throw ValidationError("atom bounds box is empty for parameter pair " + std::to_string(k));
        }
        return {lo, hi};
    }
};

// ---------------------------------------------------------------------------
// Analytic resonator model of the two-state cell.

namespace atom_model {

inline constexpr double substrate_h = 1.524e-3;
inline constexpr double substrate_er = 3.66;
inline constexpr double substrate_tand = 4e-3;
inline constexpr double on_shift = 0.07;      // relative resonance shift of the ON state at nominal geometry
inline constexpr double on_extra_loss = 0.04; // extra loss of the forward-biased diode
inline constexpr double cross_level = 0.1;    // -20 dB

struct Resonance {
    double f_res = 0;
    double q_ext = 0; // external quality factor
    double loss = 0;  // ratio of unloaded to external damping
};

inline double effective_permittivity(double patch)
{
    const double h = substrate_h, er = substrate_er;
    return (er + 1) / 2 + (er - 1) / 2 / std::sqrt(1 + 12 * h / patch);
}

inline Resonance off_state(const std::array<double, 8>& p)
{
    const double period = p[0], patch = p[1], slot = p[2];
    const double h = substrate_h;
    const double ee = effective_permittivity(patch);
    const double dl = 0.412 * h * (ee + 0.3) * (patch / h + 0.264) / ((ee - 0.258) * (patch / h + 0.8));
    const double leff = patch + 2 * dl + 2 * slot;
    Resonance r;
    r.f_res = c0 / (2 * leff * std::sqrt(ee));
    r.q_ext = c0 * std::sqrt(ee) / (4 * r.f_res * h) * std::sqrt(patch / (0.5685 * period));
    r.loss = r.q_ext * substrate_tand;
    return r;
}

// Geometry-dependent part of the ON-state shift (1 at the nominal layout).
inline double shift_factor(const std::array<double, 8>& p)
{
    const auto n = AtomDescriptor::nominal().half(0);
    return std::pow(p[3] / n[3], 0.5) * std::pow(n[4] / p[4], 0.25) * std::pow(p[5] / n[5], 0.3) *
           std::pow(n[6] / p[6], 0.15) * std::pow(p[7] / n[7], 0.1);
}

inline double on_loss_increment(const std::array<double, 8>& p)
{
    const auto n = AtomDescriptor::nominal().half(0);
    return on_extra_loss * std::pow(n[7] / p[7], 0.5) * std::pow(n[5] / p[5], 0.2);
}

inline Resonance state(const std::array<double, 8>& p, int s)
{
    Resonance r = off_state(p);
    if (s == 1) {
        r.f_res *= 1 + on_shift * shift_factor(p);
        r.loss += on_loss_increment(p);
    }
    return r;
}

inline cplx reflection(const Resonance& r, double f)
{
    const double x = r.q_ext * (f / r.f_res - r.f_res / f);
    return cplx(1 - r.loss, -x) / cplx(1 + r.loss, x);
}

} // namespace atom_model

inline ReflectionTensor oracle_reflection(const AtomDescriptor& d, int s, double f,
                                          const AtomBounds& bounds = AtomBounds::standard())
{
    require(f > 0, "frequency must be > 0");
    require(s == 0 || s == 1, "state must be 0 or 1");
    require(bounds.contains(d), "atom descriptor lies outside its bounds");
    ReflectionTensor t;
    t.gamma_ll = atom_model::reflection(atom_model::state(d.half(0), s), f);
    t.gamma_pp = atom_model::reflection(atom_model::state(d.half(1), s), f);
    t.gamma_pl = atom_model::cross_level * t.gamma_pp / std::abs(t.gamma_pp);
    t.gamma_lp = atom_model::cross_level * t.gamma_ll / std::abs(t.gamma_ll);
    return t;
}

// Wrapped co-polar gaps in [0, pi] at f0: {perp, par}.
inline std::array<double, 2> phase_gaps(const ReflectionTensor& off, const ReflectionTensor& on)
{
    return {std::abs(wrap_phase(std::arg(on.gamma_pp) - std::arg(off.gamma_pp))),
            std::abs(wrap_phase(std::arg(on.gamma_ll) - std::arg(off.gamma_ll)))};
}

inline double design_cost(const AtomDescriptor& d, double f0, const AtomBounds& bounds = AtomBounds::standard())
{
    const auto gaps = phase_gaps(oracle_reflection(d, 0, f0, bounds), oracle_reflection(d, 1, f0, bounds));
    return ((gaps[0] - pi) * (gaps[0] - pi) + (gaps[1] - pi) * (gaps[1] - pi)) / (pi * pi);
}

// Exact-gap layout: nominal geometry with the stub length solved in closed form
// so that the ON reflection sits exactly opposite the OFF one at f0.
inline AtomDescriptor calibrated_descriptor(double f0)
{
    const auto nom = AtomDescriptor::nominal();
    auto p = nom.half(0);
    const auto off = atom_model::off_state(p);
    const cplx g0 = atom_model::reflection(off, f0);
    const double target = wrap_phase(std::arg(g0) + pi);

    // arg((a - jx)/(b + jx)) = target  =>  T x^2 + (a+b) x - T a b = 0, T = tan(-target).
    const double q1 = off.loss + atom_model::on_loss_increment(p);
    const double a = 1 - q1, b = 1 + q1;
    const double t = std::tan(-target);
    double x = 0;
    if (std::abs(t) < 1e-300) {
        x = 0;
    } else {
        const double disc = std::sqrt((a + b) * (a + b) + 4 * t * t * a * b);
        double best = std::numeric_limits<double>::infinity();
        for (double root : {(-(a + b) + disc) / (2 * t), (-(a + b) - disc) / (2 * t)}) {
            const double err = std::abs(wrap_phase(std::arg(cplx(a, -root) / cplx(b, root)) - target));
            if (err < best) {
                best = err;
                x = root;
            }
        }
    }
    const double xr = x / off.q_ext;
    const double f_on = f0 * (-xr + std::sqrt(xr * xr + 4)) / 2;
    const double shift = f_on / off.f_res - 1;
    require(shift > 0, "calibration requires an upward ON-state shift");
    // shift = on_shift * (l / l_nom)^0.5 with every other factor at nominal.
    auto v = nom.free_params();
    v[3] = nom.free_params()[3] * std::pow(shift / atom_model::on_shift, 2);
    return AtomDescriptor::from_free(v);
}

struct AtomDesign {
    AtomDescriptor g;
    double phi = 0;
    int evaluations = 0;
};

// Differential evolution (rand/1/bin) over the 8 tied parameters.
inline AtomDesign optimize_atom(const AtomBounds& bounds, int budget, std::uint64_t seed, double f0 = 3.5e9,
                                int population = 24)
{
    require(budget >= 1, "budget must be >= 1");
    const auto [lo, hi] = bounds.free_box();
    Rng rng(seed);
    auto decode = [&](const std::array<double, 8>& u) {
        std::array<double, 8> v{};
        for (std::size_t k = 0; k < 8; ++k) v[k] = std::clamp(lo[k] + u[k] * (hi[k] - lo[k]), lo[k], hi[k]);
        return AtomDescriptor::from_free(v);
    };
    int evals = 0;
    auto cost = [&](const std::array<double, 8>& u) {
        ++evals;
        return design_cost(decode(u), f0, bounds);
    };

    const int np = std::max(4, std::min(population, budget));
    std::vector<std::array<double, 8>> pop(np);
    std::vector<double> fit(np, std::numeric_limits<double>::infinity());
    AtomDesign best;
    best.phi = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::array<double, 8>& u, double phi) {
        if (phi < best.phi) {
            best.phi = phi;
            best.g = decode(u);
        }
    };
    for (int i = 0; i < np && evals < budget; ++i) {
        for (auto& c : pop[i]) c = uniform01(rng);
        fit[i] = cost(pop[i]);
        consider(pop[i], fit[i]);
    }
    const double fw = 0.7, cr = 0.9;
    while (evals < budget) {
        for (int i = 0; i < np && evals < budget; ++i) {
            int r1, r2, r3;
            do r1 = static_cast<int>(uniform_index(rng, np)); while (r1 == i);
            do r2 = static_cast<int>(uniform_index(rng, np)); while (r2 == i || r2 == r1);
            do r3 = static_cast<int>(uniform_index(rng, np)); while (r3 == i || r3 == r1 || r3 == r2);
            const auto jr = uniform_index(rng, 8);
            std::array<double, 8> trial = pop[i];
            for (std::size_t k = 0; k < 8; ++k) {
                if (k == jr || uniform01(rng) < cr) {
                    double v = pop[r1][k] + fw * (pop[r2][k] - pop[r3][k]);
                    if (v < 0) v = uniform01(rng) * pop[i][k];
                    if (v > 1) v = pop[i][k] + uniform01(rng) * (1 - pop[i][k]);
                    trial[k] = v;
                }
            }
            const double ft = cost(trial);
            consider(trial, ft);
            if (ft <= fit[i]) {
                pop[i] = trial;
                fit[i] = ft;
            }
        }
    }
    best.evaluations = evals;
    return best;
}

// ---------------------------------------------------------------------------
// Reflection <-> susceptibility. Co-polar terms map linearly:
//   ke = j (1 + G) / k0,  kh = j (1 - G) / k0,
// with the y-directed electric / x-directed magnetic terms driven by the perp
// reflection and the others by the par reflection. PEC (G = -1) gives ke = 0.

inline SusceptibilityTensor gamma_to_susceptibility(const ReflectionTensor& g, const IncidentWave& w)
{
    require(w.k0 > 0, "wave number must be > 0");
    SusceptibilityTensor k;
    k.ke_yy = jj * (1.0 + g.gamma_pp) / w.k0;
    k.kh_xx = jj * (1.0 - g.gamma_pp) / w.k0;
    k.ke_xx = jj * (1.0 + g.gamma_ll) / w.k0;
    k.kh_yy = jj * (1.0 - g.gamma_ll) / w.k0;
    return k;
}

// Co-polar inverse; cross-polar terms are not carried by a diagonal tensor.
inline ReflectionTensor susceptibility_to_gamma(const SusceptibilityTensor& k, const IncidentWave& w)
{
    ReflectionTensor g;
    g.gamma_pp = -1.0 - jj * w.k0 * k.ke_yy;
    g.gamma_ll = -1.0 - jj * w.k0 * k.ke_xx;
    return g;
}

inline AtomResponse oracle_response(const AtomDescriptor& d, int s, const IncidentWave& w,
                                    const AtomBounds& bounds = AtomBounds::standard())
{
    AtomResponse r;
    r.gamma = oracle_reflection(d, s, w.frequency, bounds);
    r.kappa = gamma_to_susceptibility(r.gamma, w);
    return r;
}

// ---------------------------------------------------------------------------

struct Alphabet {
    std::array<double, 2> mags{};
    std::array<double, 2> phases{};
    Vec3 iota = Vec3::UnitY();

    cplx value(int s) const { return std::polar(mags[s], phases[s]); }
    cplx combination(int mag_index, int phase_index) const { return std::polar(mags[mag_index], phases[phase_index]); }

    void validate() const
    {
        for (int s = 0; s < 2; ++s) {
            require(std::isfinite(mags[s]) && mags[s] >= 0, "alphabet magnitudes must be finite and >= 0");
            require(std::isfinite(phases[s]), "alphabet phases must be finite");
        }
        require(std::abs(iota.norm() - 1) < 1e-9, "alphabet polarisation must be a unit vector");
    }
};

// Dominant real direction of a set of complex vectors, sign fixed so the
// largest component is positive.
inline Vec3 dominant_polarization(std::span<const Vec3c> currents)
{
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (const auto& j : currents) m += (j * j.adjoint()).real();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
    Vec3 v = es.eigenvectors().col(2);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    return v;
}

// Cell current of one state at a reference cell centred on the origin.
inline Vec3c reference_cell_current(const AtomResponse& r, const IncidentWave& w, double dx, double dy)
{
    return cell_current(r.kappa, averaged_fields_at(r.gamma, w, 0, 0, dx, dy), w);
}

inline Alphabet derive_alphabet(const std::array<AtomResponse, 2>& states, const IncidentWave& w, double dx,
                                double dy)
{
    const std::array<Vec3c, 2> js{reference_cell_current(states[0], w, dx, dy),
                                  reference_cell_current(states[1], w, dx, dy)};
    if (js[0].norm() == 0 && js[1].norm() == 0) throw Error("degenerate alphabet: zero current in both states");
    Alphabet a;
    a.iota = dominant_polarization(js);
    for (int s = 0; s < 2; ++s) {
        const cplx c = a.iota.cast<cplx>().dot(js[s]); // dot() conjugates the (real) first operand only
        a.mags[s] = std::abs(c);
        a.phases[s] = phase_of(c);
    }
    return a;
}

inline Alphabet derive_alphabet(const AtomDescriptor& d, const IncidentWave& w, double dx = c0 / 3.5e9 / 2,
                                double dy = c0 / 3.5e9 / 2, const AtomBounds& bounds = AtomBounds::standard())
{
    return derive_alphabet({oracle_response(d, 0, w, bounds), oracle_response(d, 1, w, bounds)}, w, dx, dy);
}

} // namespace rpems
