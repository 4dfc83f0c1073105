// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>

#include "twin.hpp"

namespace rpems {

struct StateMatrix {
    int m = 0;
    int n = 0;
    std::vector<std::uint8_t> s; // row-major, index i*n + j

    StateMatrix() = default;
    StateMatrix(int rows, int cols, std::uint8_t fill = 0)
        : m(rows), n(cols), s(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill)
    {
        require(rows >= 1 && cols >= 1, "state matrix dimensions must be >= 1");
    }

    std::size_t size() const { return s.size(); }
    std::uint8_t operator()(int i, int j) const { return s[static_cast<std::size_t>(i) * n + j]; }
    std::uint8_t& operator()(int i, int j) { return s[static_cast<std::size_t>(i) * n + j]; }
    bool operator==(const StateMatrix&) const = default;
};

struct SurfaceCurrent {
    int m = 0;
    int n = 0;
    std::vector<cplx> coeffs; // row-major, index i*n + j
    Vec3 iota = Vec3::UnitY();

    SurfaceCurrent() = default;
    SurfaceCurrent(int rows, int cols, Vec3 pol = Vec3::UnitY())
        : m(rows), n(cols), coeffs(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)), iota(pol)
    {
    }

    std::size_t size() const { return coeffs.size(); }
    double norm() const
    {
        double s = 0;
        for (const auto& c : coeffs) s += std::norm(c);
        return std::sqrt(s);
    }
};

inline void check_dims(const SurfaceCurrent& j, const ScenarioSpec& spec)
{
    require(j.m == spec.m_cells && j.n == spec.n_cells && j.size() == spec.cells(),
            "surface current dimensions do not match the scenario");
    for (const auto& c : j.coeffs) require(std::isfinite(c.real()) && std::isfinite(c.imag()), "non-finite current coefficient");
}

// Unit-magnitude illumination phase exp(-j k_inc . r) at each cell centre.
inline std::vector<cplx> illumination_phase(const ScenarioSpec& spec)
{
    std::vector<cplx> w(spec.cells());
    const auto& wave = spec.incident;
    for (int i = 0; i < spec.m_cells; ++i)
        for (int j = 0; j < spec.n_cells; ++j) {
            const Point2 c = cell_center(i + 1, j + 1, spec);
            const double arg = wave.k_inc.x() * c.x + wave.k_inc.y() * c.y;
            w[static_cast<std::size_t>(i) * spec.n_cells + j] = arg == 0 ? cplx(1, 0) : std::polar(1.0, -arg);
        }
    return w;
}

// Per-cell current coefficient of each state, projected on a fixed polarisation.
class CellCurrentModel {
public:
    CellCurrentModel(const AtomTwin& twin, const AtomDescriptor& g, const ScenarioSpec& spec, const Vec3& iota)
        : m_(spec.m_cells), n_(spec.n_cells), iota_(iota)
    {
        const std::array<AtomResponse, 2> resp{twin.response(g, 0), twin.response(g, 1)};
        for (int s = 0; s < 2; ++s) table_[s].resize(spec.cells());
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int s = 0; s < 2; ++s) {
                    const auto f = averaged_fields(resp[s].gamma, spec.incident, i + 1, j + 1, spec);
                    const Vec3c jv = cell_current(resp[s].kappa, f, spec.incident);
                    table_[s][static_cast<std::size_t>(i) * n_ + j] = iota_.cast<cplx>().dot(jv);
                }
    }

    int rows() const { return m_; }
    int cols() const { return n_; }
    std::size_t cells() const { return table_[0].size(); }
    const Vec3& iota() const { return iota_; }
    cplx coefficient(std::size_t cell, int s) const { return table_[s][cell]; }
    const std::vector<cplx>& state_table(int s) const { return table_[s]; }

    SurfaceCurrent current(const StateMatrix& st) const
    {
        require(st.m == m_ && st.n == n_, "state matrix dimensions do not match the aperture");
        SurfaceCurrent j(m_, n_, iota_);
        for (std::size_t c = 0; c < j.size(); ++c) {
            require(st.s[c] <= 1, "state entries must be 0 or 1");
            j.coeffs[c] = table_[st.s[c]][c];
        }
        return j;
    }

private:
    int m_, n_;
    Vec3 iota_;
    std::array<std::vector<cplx>, 2> table_;
};

inline SurfaceCurrent states_to_current(const StateMatrix& st, const AtomTwin& twin, const AtomDescriptor& g,
                                        const ScenarioSpec& spec, const Vec3& iota)
{
    return CellCurrentModel(twin, g, spec, iota).current(st);
}

// ---------------------------------------------------------------------------
// Far field

struct Direction {
    double theta = 0;
    double phi = 0;
};

// Per-sample factor (jk0/4pi) e^{-jk0 r}/r dx dy sinc sinc.
inline cplx far_field_kernel(double k0, double r, double u, double v, double dx, double dy)
{
    return jj * k0 / (4 * pi) * std::exp(-jj * k0 * r) / r * dx * dy * sinc(k0 * u * dx / 2) *
           sinc(k0 * v * dy / 2);
}

// Scalar far field along the current polarisation.
inline std::vector<cplx> radiate(const SurfaceCurrent& j, std::span<const Direction> dirs, double r,
                                 const ScenarioSpec& spec)
{
    require(r > 0, "range must be > 0");
    check_dims(j, spec);
    const double k0 = spec.incident.k0;
    std::vector<cplx> out(dirs.size());
    std::vector<double> xm(j.m), yn(j.n);
    for (int i = 0; i < j.m; ++i) xm[i] = cell_center(i + 1, 1, spec).x;
    for (int k = 0; k < j.n; ++k) yn[k] = cell_center(1, k + 1, spec).y;
    parallel_for(dirs.size(), [&](std::size_t d) {
        const double u = std::sin(dirs[d].theta) * std::cos(dirs[d].phi);
        const double v = std::sin(dirs[d].theta) * std::sin(dirs[d].phi);
        std::vector<cplx> ey(j.n);
        for (int k = 0; k < j.n; ++k) ey[k] = std::polar(1.0, k0 * v * yn[k]);
        cplx acc = 0;
        for (int i = 0; i < j.m; ++i) {
            cplx row = 0;
            for (int k = 0; k < j.n; ++k) row += j.coeffs[static_cast<std::size_t>(i) * j.n + k] * ey[k];
            acc += row * std::polar(1.0, k0 * u * xm[i]);
        }
        out[d] = far_field_kernel(k0, r, u, v, spec.cell_dx, spec.cell_dy) * acc;
    });
    return out;
}

struct FootprintField {
    ObservationGrid grid;
    std::vector<cplx> field;

    std::vector<double> power() const
    {
        std::vector<double> p(field.size());
        for (std::size_t s = 0; s < p.size(); ++s) p[s] = std::norm(field[s]);
        return p;
    }
};

inline FootprintField footprint(const SurfaceCurrent& j, const ScenarioSpec& spec)
{
    check_dims(j, spec);
    FootprintField f{spec.obs, std::vector<cplx>(spec.obs.size())};
    parallel_for(f.field.size(), [&](std::size_t s) {
        const Point2 p = spec.obs.sample(s);
        const Spherical sp = global_to_local(Vec3(p.x, p.y, 0.0), spec.height_d);
        const Direction d{sp.theta, sp.phi};
        f.field[s] = radiate(j, std::span<const Direction>(&d, 1), sp.r, spec)[0];
    });
    return f;
}

// ---------------------------------------------------------------------------
// Radiation operator in separable form A[s, (m,n)] = K_s X[s,m] Y[s,n],
// with its singular system taken from the smaller Gram matrix.

class RadiationOperator {
public:
    enum class Side { cells, samples };

    static RadiationOperator assemble(const ScenarioSpec& spec)
    {
        const std::size_t ns = spec.obs.size(), nc = spec.cells();
        const std::size_t gram = std::min(ns, nc);
        const double mb = (16.0 * static_cast<double>(ns) * (spec.m_cells + spec.n_cells + 1) +
                           16.0 * 3.0 * static_cast<double>(gram) * static_cast<double>(gram)) /
                          (1024.0 * 1024.0);
        if (mb > spec.op.memory_budget_mb) {
            throw ValidationError("radiation operator needs about " + std::to_string(static_cast<long>(mb)) +
                                  " MB but the budget is " + std::to_string(static_cast<long>(spec.op.memory_budget_mb)) +
                                  " MB; reduce min(observation samples, cells) to about " +
                                  std::to_string(static_cast<long>(static_cast<double>(gram) *
                                                                   std::sqrt(spec.op.memory_budget_mb / mb))));
        }

        RadiationOperator op;
        op.m_ = spec.m_cells;
        op.n_ = spec.n_cells;
        op.k0_ = spec.incident.k0;
        op.dx_ = spec.cell_dx;
        op.dy_ = spec.cell_dy;
        op.grid_ = spec.obs;
        const auto n_obs = static_cast<Eigen::Index>(ns);
        op.kernel_.resize(n_obs);
        op.u_.resize(n_obs);
        op.v_.resize(n_obs);
        op.ex_.resize(n_obs, op.m_);
        op.ey_.resize(n_obs, op.n_);
        parallel_for(ns, [&](std::size_t si) {
            const auto s = static_cast<Eigen::Index>(si);
            const Point2 p = spec.obs.sample(si);
            const Spherical sp = global_to_local(Vec3(p.x, p.y, 0.0), spec.height_d);
            const double u = std::sin(sp.theta) * std::cos(sp.phi), v = std::sin(sp.theta) * std::sin(sp.phi);
            op.u_[s] = u;
            op.v_[s] = v;
            op.kernel_[s] = far_field_kernel(op.k0_, sp.r, u, v, op.dx_, op.dy_);
            for (int i = 0; i < op.m_; ++i) op.ex_(s, i) = std::polar(1.0, op.k0_ * u * cell_center(i + 1, 1, spec).x);
            for (int k = 0; k < op.n_; ++k) op.ey_(s, k) = std::polar(1.0, op.k0_ * v * cell_center(1, k + 1, spec).y);
        });
        op.decompose();
        return op;
    }

    int rows() const { return m_; }
    int cols() const { return n_; }
    std::size_t cells() const { return static_cast<std::size_t>(m_) * static_cast<std::size_t>(n_); }
    std::size_t samples() const { return static_cast<std::size_t>(kernel_.size()); }
    const ObservationGrid& grid() const { return grid_; }
    Side side() const { return side_; }
    const Eigen::VectorXd& singular_values() const { return sigma_; }

    Eigen::VectorXcd apply(std::span<const cplx> c) const
    {
        require(c.size() == cells(), "coefficient vector size does not match the operator");
        using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::Map<const RowMat> cm(c.data(), m_, n_);
        const Eigen::MatrixXcd z = ey_ * cm.transpose(); // samples x M
        return kernel_.cwiseProduct(ex_.cwiseProduct(z).rowwise().sum());
    }

    Eigen::VectorXcd apply(const SurfaceCurrent& j) const { return apply(std::span<const cplx>(j.coeffs)); }

    // A^H y, row-major cell order.
    Eigen::VectorXcd adjoint(const Eigen::VectorXcd& y) const
    {
        require(static_cast<std::size_t>(y.size()) == samples(), "field vector size does not match the operator");
        const Eigen::VectorXcd w = kernel_.conjugate().cwiseProduct(y);
        const Eigen::MatrixXcd t = w.asDiagonal() * ey_.conjugate(); // samples x N
        const Eigen::MatrixXcd c = ex_.adjoint() * t;                // M x N
        Eigen::VectorXcd out(static_cast<Eigen::Index>(cells()));
        for (int i = 0; i < m_; ++i)
            for (int k = 0; k < n_; ++k) out[static_cast<Eigen::Index>(i) * n_ + k] = c(i, k);
        return out;
    }

    Eigen::VectorXcd column(std::size_t cell) const
    {
        const auto i = static_cast<Eigen::Index>(cell / n_), k = static_cast<Eigen::Index>(cell % n_);
        return kernel_.cwiseProduct(ex_.col(i)).cwiseProduct(ey_.col(k));
    }

    Eigen::MatrixXcd dense(double budget_mb = 1024.0) const
    {
        const double mb = 16.0 * static_cast<double>(samples()) * static_cast<double>(cells()) / (1024.0 * 1024.0);
        if (mb > budget_mb) throw ValidationError("dense operator needs " + std::to_string(static_cast<long>(mb)) + " MB");
        Eigen::MatrixXcd a(static_cast<Eigen::Index>(samples()), static_cast<Eigen::Index>(cells()));
        for (std::size_t c = 0; c < cells(); ++c) a.col(static_cast<Eigen::Index>(c)) = column(c);
        return a;
    }

    // Number of singular values at or above rel * sigma_1.
    int rank(double rel) const
    {
        if (sigma_.size() == 0 || !(sigma_[0] > 0)) return 0;
        int r = 0;
        while (r < sigma_.size() && sigma_[r] >= rel * sigma_[0]) ++r;
        return r;
    }

    // Truncated pseudo-inverse A_r^+ b (minimum-norm solution on the retained subspace).
    Eigen::VectorXcd pinv(const Eigen::VectorXcd& b, double rel) const
    {
        const int r = rank(rel);
        if (r == 0) throw Error("all singular values fall below the truncation cutoff");
        const Eigen::ArrayXd inv = sigma_.head(r).array().square().inverse();
        if (side_ == Side::cells) {
            const auto v = vecs_.leftCols(r);
            return v * (inv * (v.adjoint() * adjoint(b)).array()).matrix();
        }
        const auto u = vecs_.leftCols(r);
        return adjoint(u * (inv * (u.adjoint() * b).array()).matrix());
    }

    // U_r^H x.
    Eigen::VectorXcd retained_coordinates(const Eigen::VectorXcd& x, double rel) const
    {
        const int r = rank(rel);
        if (side_ == Side::samples) return vecs_.leftCols(r).adjoint() * x;
        return (vecs_.leftCols(r).adjoint() * adjoint(x)).array() / sigma_.head(r).array();
    }

    // Explicit V_r (cells x r).
    Eigen::MatrixXcd right_vectors(double rel) const
    {
        const int r = rank(rel);
        if (side_ == Side::cells) return vecs_.leftCols(r);
        Eigen::MatrixXcd v(static_cast<Eigen::Index>(cells()), r);
        for (int k = 0; k < r; ++k) v.col(k) = adjoint(vecs_.col(k)) / sigma_[k];
        return v;
    }

    // V_r V_r^H z.
    Eigen::VectorXcd project_right(const Eigen::VectorXcd& z, double rel) const
    {
        const int r = rank(rel);
        if (side_ == Side::cells) {
            const auto v = vecs_.leftCols(r);
            return v * (v.adjoint() * z);
        }
        const auto u = vecs_.leftCols(r);
        const Eigen::ArrayXd inv = sigma_.head(r).array().square().inverse();
        return adjoint(u * (inv * (u.adjoint() * apply(std::span<const cplx>(z.data(), cells()))).array()).matrix());
    }

    // Gram matrix on the decomposed side, for verification.
    Eigen::MatrixXcd gram() const { return side_ == Side::cells ? cell_gram() : sample_gram(); }

private:
    int m_ = 0, n_ = 0;
    double k0_ = 0, dx_ = 0, dy_ = 0;
    ObservationGrid grid_;
    Eigen::VectorXcd kernel_;
    Eigen::VectorXd u_, v_;
    Eigen::MatrixXcd ex_, ey_;
    Side side_ = Side::cells;
    Eigen::VectorXd sigma_;
    Eigen::MatrixXcd vecs_;

    // sum_k exp(j t (k - (count-1)/2)), k = 0..count-1
    static double dirichlet(double t, int count)
    {
        const double s = std::sin(t / 2);
        if (std::abs(s) < 1e-3) {
            double acc = 0;
            for (int k = 0; k < count; ++k) acc += std::cos(t * (k - (count - 1) / 2.0));
            return acc;
        }
        return std::sin(count * t / 2) / s;
    }

    // Entries depend on the index offsets only.
    Eigen::MatrixXcd cell_gram() const
    {
        const auto ns = static_cast<Eigen::Index>(samples());
        const int na = 2 * m_ - 1, nb = 2 * n_ - 1;
        Eigen::MatrixXcd pa(ns, na), pb(ns, nb);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const double w = std::norm(kernel_[s]);
            for (int a = 0; a < na; ++a) pa(s, a) = w * std::polar(1.0, k0_ * u_[s] * (a - (m_ - 1)) * dx_);
            for (int b = 0; b < nb; ++b) pb(s, b) = std::polar(1.0, k0_ * v_[s] * (b - (n_ - 1)) * dy_);
        }
        const Eigen::MatrixXcd t = pa.transpose() * pb;
        const auto nc = static_cast<Eigen::Index>(cells());
        Eigen::MatrixXcd g(nc, nc);
        for (int i = 0; i < m_; ++i)
            for (int k = 0; k < n_; ++k)
                for (int i2 = 0; i2 < m_; ++i2)
                    for (int k2 = 0; k2 < n_; ++k2)
                        g(static_cast<Eigen::Index>(i) * n_ + k, static_cast<Eigen::Index>(i2) * n_ + k2) =
                            t(i2 - i + m_ - 1, k2 - k + n_ - 1);
        return g;
    }

    Eigen::MatrixXcd sample_gram() const
    {
        const auto ns = static_cast<Eigen::Index>(samples());
        Eigen::MatrixXcd g(ns, ns);
        parallel_for(static_cast<std::size_t>(ns), [&](std::size_t si) {
            const auto s = static_cast<Eigen::Index>(si);
            for (Eigen::Index t = 0; t <= s; ++t) {
                const double d = dirichlet(k0_ * (u_[s] - u_[t]) * dx_, m_) * dirichlet(k0_ * (v_[s] - v_[t]) * dy_, n_);
                g(s, t) = kernel_[s] * std::conj(kernel_[t]) * d;
            }
        });
        for (Eigen::Index s = 0; s < ns; ++s)
            for (Eigen::Index t = s + 1; t < ns; ++t) g(s, t) = std::conj(g(t, s));
        return g;
    }

    void decompose()
    {
        side_ = cells() <= samples() ? Side::cells : Side::samples;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram());
        if (es.info() != Eigen::Success) throw Error("eigen-decomposition of the operator Gram matrix failed");
        const Eigen::Index n = es.eigenvalues().size();
        sigma_.resize(n);
        vecs_.resize(es.eigenvectors().rows(), n);
        for (Eigen::Index k = 0; k < n; ++k) {
            sigma_[k] = std::sqrt(std::max(0.0, es.eigenvalues()[n - 1 - k]));
            vecs_.col(k) = es.eigenvectors().col(n - 1 - k);
        }
    }
};

inline RadiationOperator assemble_operator(const ScenarioSpec& spec) { return RadiationOperator::assemble(spec); }

inline FootprintField footprint(const SurfaceCurrent& j, const RadiationOperator& op)
{
    const Eigen::VectorXcd y = op.apply(j);
    return {op.grid(), std::vector<cplx>(y.data(), y.data() + y.size())};
}

// ---------------------------------------------------------------------------

struct Coverage {
    double gamma = 0;
    double w_cov = 0;
    double w_ext = 0;
    bool unbounded = false; // W_ext == 0
};

inline Coverage coverage_index(std::span<const double> power, const DesiredFootprint& fp)
{
    require(power.size() == fp.inside.size(), "footprint grid does not match the desired footprint");
    const std::size_t nin = fp.inside_count();
    require(nin > 0, "coverage region contains no samples");
    require(nin < power.size(), "coverage region contains every sample");
    const double da = fp.grid.area_element();
    Coverage c;
    for (std::size_t s = 0; s < power.size(); ++s) (fp.inside[s] ? c.w_cov : c.w_ext) += power[s];
    c.w_cov *= da / (2 * eta0);
    c.w_ext *= da / (2 * eta0);
    if (c.w_ext == 0) {
        c.unbounded = true;
        c.gamma = std::numeric_limits<double>::infinity();
    } else {
        c.gamma = c.w_cov / c.w_ext;
    }
    return c;
}

inline Coverage coverage_index(const FootprintField& f, const DesiredFootprint& fp)
{
    require(f.grid == fp.grid, "footprint grid does not match the desired footprint");
    const auto p = f.power();
    return coverage_index(std::span<const double>(p), fp);
}

// Peak footprint power of the all-ON skin: the 0 dB reference of target masks.
inline double reference_power(const CellCurrentModel& model, const RadiationOperator& op)
{
    const StateMatrix on(model.rows(), model.cols(), 1);
    const Eigen::VectorXcd y = op.apply(model.current(on));
    const double p = y.cwiseAbs2().maxCoeff();
    if (!(p > 0)) throw Error("all-ON reference footprint is identically zero");
    return p;
}

} // namespace rpems
