// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scenario.hpp"
#include "tensors.hpp"

namespace rpems {

inline Eigen::Matrix3cd reflection_dyadic(const ReflectionTensor& g, const IncidentWave& w)
{
    const Vec3c p = w.perp_hat.cast<cplx>(), l = w.par_hat.cast<cplx>();
    return g.gamma_pp * p * p.transpose() + g.gamma_ll * l * l.transpose() + g.gamma_pl * p * l.transpose() +
           g.gamma_lp * l * p.transpose();
}

// Cell average of exp(-j k_inc . r) over a dx x dy box centred at (xc, yc).
inline cplx cell_phase_average(const IncidentWave& w, double xc, double yc, double dx, double dy)
{
    const double kx = w.k_inc.x(), ky = w.k_inc.y();
    return std::exp(-jj * (kx * xc + ky * yc)) * sinc(kx * dx / 2) * sinc(ky * dy / 2);
}

struct CellFields {
    Vec3c e = Vec3c::Zero();
    Vec3c h = Vec3c::Zero();
};

// Surface-averaged fields of a cell centred at (xc, yc).
inline CellFields averaged_fields_at(const ReflectionTensor& g, const IncidentWave& w, double xc, double yc,
                                     double dx, double dy)
{
    const cplx avg = cell_phase_average(w, xc, yc, dx, dy);
    const Vec3c e0 = w.amplitude();
    const Vec3c re0 = reflection_dyadic(g, w) * e0;
    CellFields f;
    f.e = 0.5 * (e0 + re0) * avg;
    const Vec3c kinc = w.k_inc.cast<cplx>(), kref = w.k_ref.cast<cplx>();
    f.h = (cross(kinc, e0) + cross(kref, re0)) * avg / (2.0 * eta0 * w.k0);
    return f;
}

// 1-based cell indices.
inline CellFields averaged_fields(const ReflectionTensor& g, const IncidentWave& w, int m, int n,
                                  const ScenarioSpec& spec)
{
    const Point2 c = cell_center(m, n, spec);
    return averaged_fields_at(g, w, c.x, c.y, spec.cell_dx, spec.cell_dy);
}

inline Vec3c tangential(const Vec3c& v) { return {v.x(), v.y(), cplx{}}; }

// Cellwise GSTC currents composed into a single tangential radiating current,
// evaluated along the skin normal. Gradient terms vanish for cellwise-constant fields.
inline Vec3c cell_current(const SusceptibilityTensor& k, const CellFields& f, const IncidentWave& w)
{
    const Vec3c je = jj * w.omega * eps0 * tangential(k.electric() * f.e);
    const Vec3c jm = jj * w.omega * mu0 * tangential(k.magnetic() * f.h);
    const Vec3c nz = w.normal.cast<cplx>();
    return cross(nz, eta0 * cross(nz, je) + jm);
}

} // namespace rpems
