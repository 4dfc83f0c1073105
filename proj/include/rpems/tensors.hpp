// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "common.hpp"

namespace rpems {

// Reflection in the (perp, par) incidence basis.
struct ReflectionTensor {
    cplx gamma_pp{};
    cplx gamma_ll{};
    cplx gamma_pl{}; // par in, perp out
    cplx gamma_lp{}; // perp in, par out

    bool passive(double tol = 1e-9) const
    {
        return std::abs(gamma_pp) <= 1 + tol && std::abs(gamma_ll) <= 1 + tol && std::abs(gamma_pl) <= 1 + tol &&
               std::abs(gamma_lp) <= 1 + tol;
    }
    bool operator==(const ReflectionTensor&) const = default;
};

// Diagonal surface susceptibilities [m].
struct SusceptibilityTensor {
    cplx ke_xx{}, ke_yy{}, ke_zz{};
    cplx kh_xx{}, kh_yy{}, kh_zz{};

    Eigen::Matrix3cd electric() const { return Vec3c(ke_xx, ke_yy, ke_zz).asDiagonal(); }
    Eigen::Matrix3cd magnetic() const { return Vec3c(kh_xx, kh_yy, kh_zz).asDiagonal(); }
    bool operator==(const SusceptibilityTensor&) const = default;
};

struct AtomResponse {
    ReflectionTensor gamma;
    SusceptibilityTensor kappa;
};

inline constexpr std::size_t response_outputs = 20;

// Real/imaginary channels in a fixed order.
inline std::array<double, response_outputs> to_outputs(const AtomResponse& r)
{
    const std::array<cplx, 10> c{r.gamma.gamma_pp, r.gamma.gamma_ll, r.gamma.gamma_pl, r.gamma.gamma_lp,
                                 r.kappa.ke_xx,    r.kappa.ke_yy,    r.kappa.ke_zz,    r.kappa.kh_xx,
                                 r.kappa.kh_yy,    r.kappa.kh_zz};
    std::array<double, response_outputs> out{};
    for (std::size_t k = 0; k < c.size(); ++k) {
        out[2 * k] = c[k].real();
        out[2 * k + 1] = c[k].imag();
    }
    return out;
}

inline AtomResponse from_outputs(const std::array<double, response_outputs>& v)
{
    auto c = [&](std::size_t k) { return cplx(v[2 * k], v[2 * k + 1]); };
    AtomResponse r;
    r.gamma = {c(0), c(1), c(2), c(3)};
    r.kappa = {c(4), c(5), c(6), c(7), c(8), c(9)};
    return r;
}

inline const std::array<const char*, response_outputs>& output_names()
{
    static const std::array<const char*, response_outputs> names{
        "re_gamma_pp", "im_gamma_pp", "re_gamma_ll", "im_gamma_ll", "re_gamma_pl", "im_gamma_pl", "re_gamma_lp",
        "im_gamma_lp", "re_ke_xx",    "im_ke_xx",    "re_ke_yy",    "im_ke_yy",    "re_ke_zz",    "im_ke_zz",
        "re_kh_xx",    "im_kh_xx",    "re_kh_yy",    "im_kh_yy",    "re_kh_zz",    "im_kh_zz"};
    return names;
}

} // namespace rpems
