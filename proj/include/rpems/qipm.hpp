// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "forward_em.hpp"

namespace rpems {

namespace detail {
inline void check_same(std::size_t a, std::size_t b)
{
    if (a != b) throw ValidationError("grid mismatch: " + std::to_string(a) + " vs " + std::to_string(b) + " samples");
}
} // namespace detail

// Area-weighted ramp of the power deficit.
inline double macro_cost(std::span<const double> power, std::span<const double> desired, double area_element)
{
    detail::check_same(power.size(), desired.size());
    double phi = 0;
    for (std::size_t s = 0; s < power.size(); ++s) phi += std::max(desired[s] - power[s], 0.0);
    return phi * area_element;
}

inline std::vector<double> project_footprint(std::span<const double> power, std::span<const double> desired)
{
    detail::check_same(power.size(), desired.size());
    std::vector<double> r(power.size());
    for (std::size_t s = 0; s < r.size(); ++s) r[s] = power[s] < desired[s] ? desired[s] : power[s];
    return r;
}

inline double convergence_index(std::span<const double> projected, std::span<const double> power,
                                double area_element = 1.0)
{
    detail::check_same(projected.size(), power.size());
    double num = 0, den = 0;
    for (std::size_t s = 0; s < power.size(); ++s) {
        num += std::abs(projected[s] - power[s]);
        den += std::abs(power[s]);
    }
    if (!(den > 0)) throw Error("convergence index undefined for an identically zero footprint");
    return (num * area_element) / (den * area_element);
}

// Minimum-norm coefficients whose field matches sqrt(R) with the phase of phase_ref.
inline SurfaceCurrent min_norm_current(std::span<const double> projected, std::span<const cplx> phase_ref,
                                       const RadiationOperator& op, const QipmConfig& cfg, const Vec3& iota = Vec3::UnitY())
{
    detail::check_same(projected.size(), op.samples());
    detail::check_same(phase_ref.size(), op.samples());
    Eigen::VectorXcd b(static_cast<Eigen::Index>(projected.size()));
    bool any = false;
    for (std::size_t s = 0; s < projected.size(); ++s) {
        require(projected[s] >= 0, "projected footprint must be non-negative");
        const double mag = std::sqrt(projected[s]);
        const cplx ref = phase_ref[s];
        b[static_cast<Eigen::Index>(s)] = ref == cplx(0, 0) ? cplx(mag, 0) : std::polar(mag, std::arg(ref));
        any = any || mag > 0;
    }
    SurfaceCurrent j(op.rows(), op.cols(), iota);
    if (!any) return j;
    const Eigen::VectorXcd c = op.pinv(b, cfg.svd_rel_threshold);
    for (std::size_t k = 0; k < j.size(); ++k) j.coeffs[k] = c[static_cast<Eigen::Index>(k)];
    return j;
}

struct QuantizedCurrent {
    std::vector<cplx> coeffs;
    std::vector<std::uint8_t> symbols; // paired: state s; product: 2*mag_index + phase_index
    double rho = 0;
};

// Candidate (magnitude, phase) index pairs in tie-break order.
inline std::span<const std::array<int, 2>> quantizer_candidates(QuantizerMode mode)
{
    static constexpr std::array<std::array<int, 2>, 4> order{{{0, 0}, {1, 1}, {0, 1}, {1, 0}}};
    return {order.data(), mode == QuantizerMode::paired ? std::size_t{2} : std::size_t{4}};
}

inline std::uint8_t symbol_of(std::array<int, 2> mp, QuantizerMode mode)
{
    return static_cast<std::uint8_t>(mode == QuantizerMode::paired ? mp[0] : 2 * mp[0] + mp[1]);
}

inline cplx symbol_value(const Alphabet& a, std::uint8_t sym, QuantizerMode mode, cplx rotation = {1, 0})
{
    const cplx v = mode == QuantizerMode::paired ? a.value(sym) : a.combination(sym / 2, sym % 2);
    return rotation == cplx(1, 0) ? v : v * rotation;
}

// Nearest feasible value per cell; rotation holds optional per-cell illumination phases.
inline QuantizedCurrent quantize_current(std::span<const cplx> target, const Alphabet& a,
                                         QuantizerMode mode = QuantizerMode::paired,
                                         std::span<const cplx> rotation = {})
{
    a.validate();
    require(rotation.empty() || rotation.size() == target.size(), "rotation size must match the target");
    double norm2 = 0;
    for (const auto& t : target) norm2 += std::norm(t);
    if (!(norm2 > 0)) throw Error("quantization mismatch undefined for a zero-norm target current");
    const auto cands = quantizer_candidates(mode);
    QuantizedCurrent q;
    q.coeffs.resize(target.size());
    q.symbols.resize(target.size());
    double err = 0;
    for (std::size_t c = 0; c < target.size(); ++c) {
        const cplx rot = rotation.empty() ? cplx(1, 0) : rotation[c];
        double best = std::numeric_limits<double>::infinity();
        for (const auto& mp : cands) {
            const std::uint8_t sym = symbol_of(mp, mode);
            const cplx v = symbol_value(a, sym, mode, rot);
            const double e = std::norm(v - target[c]);
            if (e < best) {
                best = e;
                q.coeffs[c] = v;
                q.symbols[c] = sym;
            }
        }
        err += best;
    }
    q.rho = err / norm2;
    return q;
}

enum class StopReason { converged, exhausted };

inline const char* to_string(StopReason r) { return r == StopReason::converged ? "converged" : "exhausted"; }

struct IterationRecord {
    int p = 0;
    double phi = 0;
    double xi = 0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    StopReason stop = StopReason::exhausted;
};

struct ReferenceCurrent {
    SurfaceCurrent current;
    std::vector<std::uint8_t> symbols; // empty for the unquantized solver
    QuantizerMode mode = QuantizerMode::paired;
    IterationTrace trace;
    int best_iteration = 0;
    double phi_best = 0;
};

namespace detail {

inline ReferenceCurrent projection_loop(const RadiationOperator& op, std::span<const double> desired, double area_element,
                                        const Alphabet& a, const QipmConfig& cfg, std::span<const cplx> rotation,
                                        bool quantize)
{
    cfg.validate();
    a.validate();
    check_same(desired.size(), op.samples());
    require(rotation.empty() || rotation.size() == op.cells(), "rotation size must match the aperture");
    const auto cands = quantizer_candidates(cfg.quantizer);
    Rng rng(cfg.seed);

    ReferenceCurrent out;
    out.mode = cfg.quantizer;
    SurfaceCurrent cur(op.rows(), op.cols(), a.iota);
    std::vector<std::uint8_t> syms(op.cells());
    for (std::size_t c = 0; c < op.cells(); ++c) {
        const auto& mp = cands[uniform_index(rng, cands.size())];
        syms[c] = symbol_of(mp, cfg.quantizer);
        cur.coeffs[c] = symbol_value(a, syms[c], cfg.quantizer, rotation.empty() ? cplx(1, 0) : rotation[c]);
    }

    out.phi_best = std::numeric_limits<double>::infinity();
    for (int p = 1;; ++p) {
        const Eigen::VectorXcd y = op.apply(cur);
        std::vector<double> power(static_cast<std::size_t>(y.size()));
        for (std::size_t s = 0; s < power.size(); ++s) power[s] = std::norm(y[static_cast<Eigen::Index>(s)]);
        const double phi = macro_cost(power, desired, area_element);
        const auto r = project_footprint(power, desired);
        double num = 0, den = 0;
        for (std::size_t s = 0; s < power.size(); ++s) {
            num += std::abs(r[s] - power[s]);
            den += power[s];
        }
        // A silent skin makes the index undefined; treat it as maximally unconverged.
        const double xi = den > 0 ? num / den : (num > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        out.trace.records.push_back({p, phi, xi});
        if (phi < out.phi_best) {
            out.phi_best = phi;
            out.best_iteration = p;
            out.current = cur;
            out.symbols = quantize ? syms : std::vector<std::uint8_t>{};
        }
        if (xi <= cfg.conv_threshold) {
            out.trace.stop = StopReason::converged;
            break;
        }
        if (p == cfg.max_iters) {
            out.trace.stop = StopReason::exhausted;
            break;
        }
        const std::vector<cplx> phase(y.data(), y.data() + y.size());
        SurfaceCurrent next = min_norm_current(r, phase, op, cfg, a.iota);
        if (quantize) {
            if (next.norm() == 0) next.coeffs.assign(next.size(), cplx(1, 0));
            auto q = quantize_current(next.coeffs, a, cfg.quantizer, rotation);
            cur.coeffs = std::move(q.coeffs);
            syms = std::move(q.symbols);
        } else {
            cur = std::move(next);
        }
    }
    return out;
}

} // namespace detail

inline ReferenceCurrent run_qipm(const RadiationOperator& op, std::span<const double> desired, double area_element,
                                 const Alphabet& a, const QipmConfig& cfg, std::span<const cplx> rotation = {})
{
    return detail::projection_loop(op, desired, area_element, a, cfg, rotation, true);
}

// Same loop without quantization; the alphabet only seeds the initial iterate.
inline ReferenceCurrent run_ipm(const RadiationOperator& op, std::span<const double> desired, double area_element,
                                const Alphabet& a, const QipmConfig& cfg, std::span<const cplx> rotation = {})
{
    return detail::projection_loop(op, desired, area_element, a, cfg, rotation, false);
}

// Exact membership of every coefficient in the magnitude x phase product set.
inline bool is_feasible(const SurfaceCurrent& j, const Alphabet& a, std::span<const cplx> rotation = {})
{
    const auto cands = quantizer_candidates(QuantizerMode::product);
    for (std::size_t c = 0; c < j.size(); ++c) {
        const cplx rot = rotation.empty() ? cplx(1, 0) : rotation[c];
        bool hit = false;
        for (const auto& mp : cands)
            hit = hit || j.coeffs[c] == symbol_value(a, symbol_of(mp, QuantizerMode::product), QuantizerMode::product, rot);
        if (!hit) return false;
    }
    return true;
}

} // namespace rpems
