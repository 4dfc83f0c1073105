// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace rpems {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double c0 = 299792458.0;
inline constexpr double mu0 = 1.25663706212e-6;
inline constexpr double eps0 = 1.0 / (mu0 * c0 * c0);
inline const double eta0 = std::sqrt(mu0 / eps0);
inline constexpr cplx jj{0.0, 1.0};

// Base error; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input or violated invariant; the CLI maps it to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}

// Plain bilinear cross product (Eigen conjugates complex cross products).
inline Vec3c cross(const Vec3c& a, const Vec3c& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double deg2rad(double d) { return d * pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / pi; }

inline double sinc(double x)
{
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

// Wraps an angle to (-pi, pi].
inline double wrap_phase(double a)
{
    double w = std::remainder(a, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

// Phase in (-pi, pi].
inline double phase_of(cplx z)
{
    double a = std::arg(z);
    if (a == -pi) a = pi;
    return a;
}

inline double db10(double p) { return 10.0 * std::log10(p); }

inline unsigned& thread_count()
{
    static unsigned n = 1;
    return n;
}

inline void set_threads(unsigned n) { thread_count() = std::max(1u, n); }

// Static chunked parallel loop; body(i) must only write to slots owned by i.
template <class F>
void parallel_for(std::size_t n, F&& body)
{
    const unsigned t = std::min<std::size_t>(thread_count(), n == 0 ? 1 : n);
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(t);
    for (unsigned k = 0; k < t; ++k) {
        pool.emplace_back([&, k] {
            try {
                for (std::size_t i = n * k / t; i < n * (k + 1) / t; ++i) body(i);
            } catch (...) {
                errs[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

} // namespace rpems

#include <random>

namespace rpems {

using Rng = std::mt19937_64;

// Portable uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Portable uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

} // namespace rpems
