#pragma once

#include "lbno/field.hpp"

namespace lbno {

/// Cells with density below this are treated as vacuum when dividing.
inline constexpr double kDensityEps = 1e-12;

struct MacroFields {
    ScalarField rho;
    VectorField momentum;
    VectorField velocity;
};

/// rho(x) = sum_i f_i(x)
inline ScalarField density(const DistributionField& f) {
    ScalarField rho(f.shape);
    const std::int64_t n = f.cells();
    for (int i = 0; i < f.q(); ++i) {
        const double* fi = f.data.data() + std::int64_t(i) * n;
        for (std::int64_t c = 0; c < n; ++c) rho[c] += fi[c];
    }
    return rho;
}

/// rho*u(x) = sum_i f_i(x) c_i
inline VectorField momentum(const DistributionField& f, const VelocitySet& vs) {
    VectorField m(f.shape);
    const std::int64_t n = f.cells();
    for (int i = 0; i < f.q(); ++i) {
        const double* fi = f.data.data() + std::int64_t(i) * n;
        for (int a = 0; a < f.shape.dims; ++a) {
            const int ca = vs.velocities[i][a];
            if (ca == 0) continue;
            double* ma = m.data.data() + std::int64_t(a) * n;
            for (std::int64_t c = 0; c < n; ++c) ma[c] += ca * fi[c];
        }
    }
    return m;
}

/// u = momentum/density where rho > eps, else 0.
inline VectorField velocity(const DistributionField& f, const VelocitySet& vs) {
    ScalarField rho = density(f);
    VectorField u = momentum(f, vs);
    const std::int64_t n = f.cells();
    for (std::int64_t c = 0; c < n; ++c) {
        const double inv = rho[c] > kDensityEps ? 1.0 / rho[c] : 0.0;
        for (int a = 0; a < f.shape.dims; ++a) u.comp(a, c) *= inv;
    }
    return u;
}

inline MacroFields macro_fields(const DistributionField& f, const VelocitySet& vs) {
    MacroFields m;
    m.rho = density(f);
    m.momentum = momentum(f, vs);
    m.velocity = VectorField(f.shape);
    for (std::int64_t c = 0; c < f.cells(); ++c) {
        const double inv = m.rho[c] > kDensityEps ? 1.0 / m.rho[c] : 0.0;
        for (int a = 0; a < f.shape.dims; ++a)
            m.velocity.comp(a, c) = m.momentum.comp(a, c) * inv;
    }
    return m;
}

/// Lattice-to-physical scaling: dx physical length per lattice spacing,
/// dt physical time per step, rho0 physical density per lattice density.
struct UnitScale {
    double dx = 1.0;
    double dt = 1.0;
    double rho0 = 1.0;

    void validate() const {
        if (!(dx > 0.0 && dt > 0.0 && rho0 > 0.0))
            throw ConfigError("unit scale factors must be positive");
    }
};

inline MacroFields to_physical(const MacroFields& m, const UnitScale& s) {
    s.validate();
    MacroFields out = m;
    const double vel = s.dx / s.dt;
    for (double& x : out.rho.data) x *= s.rho0;
    for (double& x : out.velocity.data) x *= vel;
    for (double& x : out.momentum.data) x *= s.rho0 * vel;
    return out;
}

inline MacroFields from_physical(const MacroFields& m, const UnitScale& s) {
    s.validate();
    return to_physical(m, UnitScale{1.0 / s.dx, 1.0 / s.dt, 1.0 / s.rho0});
}

}  // namespace lbno
