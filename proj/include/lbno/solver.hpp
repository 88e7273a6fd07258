#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>

#include "lbno/field.hpp"
#include "lbno/moments.hpp"

namespace lbno {

struct DivergenceError : NumericError {
    using NumericError::NumericError;
};
struct StabilityError : NumericError {
    using NumericError::NumericError;
};

enum class BoundaryKind { Periodic, Inlet, Outflow, FreeSlip, NoSlip };

inline const char* to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::Periodic: return "periodic";
        case BoundaryKind::Inlet: return "inlet";
        case BoundaryKind::Outflow: return "outflow";
        case BoundaryKind::FreeSlip: return "freeslip";
        case BoundaryKind::NoSlip: return "noslip";
    }
    return "?";
}

struct BoundarySpec {
    BoundaryKind kind = BoundaryKind::Periodic;
    std::array<double, 3> velocity{0, 0, 0};  // inlet only
};

struct SolverConfig {
    double tau = 0.8;                      // BGK relaxation time, > 0.5
    std::optional<double> smagorinsky_c;   // LES closure constant, >= 0
    std::optional<std::array<double, 3>> force;  // constant body force
    // boundary[axis][0] = min side, boundary[axis][1] = max side
    std::array<std::array<BoundarySpec, 2>, 3> boundary{};
    std::vector<std::uint8_t> obstacle;    // per-cell solid mask; empty = none

    bool periodic_axis(int a) const {
        return boundary[a][0].kind == BoundaryKind::Periodic &&
               boundary[a][1].kind == BoundaryKind::Periodic;
    }
    bool solid(std::int64_t cell) const {
        return !obstacle.empty() && obstacle[cell] != 0;
    }

    void validate(const VelocitySet& vs, const GridShape& shape) const {
        if (!(tau > 0.5)) throw ConfigError("tau must exceed 0.5");
        if (smagorinsky_c && *smagorinsky_c < 0.0)
            throw ConfigError("smagorinsky constant must be non-negative");
        const double cs = std::sqrt(vs.cs2_f64());
        for (int a = 0; a < shape.dims; ++a) {
            const bool p0 = boundary[a][0].kind == BoundaryKind::Periodic;
            const bool p1 = boundary[a][1].kind == BoundaryKind::Periodic;
            if (p0 != p1)
                throw ConfigError("periodic boundary must be paired on axis " +
                                  std::to_string(a));
            for (int s = 0; s < 2; ++s) {
                const auto& b = boundary[a][s];
                if (b.kind == BoundaryKind::Inlet) {
                    double u2 = 0.0;
                    for (int d = 0; d < 3; ++d) u2 += b.velocity[d] * b.velocity[d];
                    if (!(std::sqrt(u2) < cs))
                        throw ConfigError("inlet speed must be subsonic (< cs)");
                }
            }
        }
        if (!obstacle.empty() && std::int64_t(obstacle.size()) != shape.cells())
            throw ConfigError("obstacle mask size does not match grid");
    }
};

/// nu = cs2 * (tau - 1/2), lattice units.
inline double kinematic_viscosity(double tau, const VelocitySet& vs) {
    return vs.cs2_f64() * (tau - 0.5);
}

inline std::vector<std::uint8_t> cylinder_mask(const GridShape& shape, double cx,
                                               double cy, double radius) {
    std::vector<std::uint8_t> mask(shape.cells(), 0);
    std::array<int, 3> p{};
    for (std::int64_t c = 0; c < shape.cells(); ++c) {
        shape.coords(c, p);
        const double dx = p[0] + 0.5 - cx;
        const double dy = p[1] + 0.5 - cy;
        if (dx * dx + dy * dy <= radius * radius) mask[c] = 1;  // axisized along z in 3D
    }
    return mask;
}

namespace detail {

/// Second-order equilibrium, one cell:
/// feq_i = w_i rho (1 + ciu/cs2 + ciu^2/(2 cs2^2) - u^2/(2 cs2))
inline void cell_equilibrium(const VelocitySet& vs, double rho, const double* u,
                             double* feq) {
    const double cs2 = vs.cs2_f64();
    double usq = 0.0;
    for (int a = 0; a < vs.dims(); ++a) usq += u[a] * u[a];
    for (int i = 0; i < vs.q(); ++i) {
        double cu = 0.0;
        for (int a = 0; a < vs.dims(); ++a) cu += vs.velocities[i][a] * u[a];
        feq[i] = vs.weight(i) * rho *
                 (1.0 + cu / cs2 + cu * cu / (2.0 * cs2 * cs2) - usq / (2.0 * cs2));
    }
}

}  // namespace detail

inline DistributionField equilibrium(const ScalarField& rho, const VectorField& u,
                                     const VelocitySet& vs) {
    if (!all_finite(rho.data) || !all_finite(u.data))
        throw NumericError("equilibrium: non-finite macroscopic input");
    DistributionField f(vs.model, rho.shape);
    const std::int64_t n = f.cells();
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n; ++c) {
        double uc[3] = {0, 0, 0};
        for (int a = 0; a < vs.dims(); ++a) uc[a] = u.comp(a, c);
        double feq[19];
        detail::cell_equilibrium(vs, rho[c], uc, feq);
        for (int i = 0; i < vs.q(); ++i) f.at(i, c) = feq[i];
    }
    return f;
}

inline DistributionField uniform_equilibrium(const VelocitySet& vs, const GridShape& shape,
                                             double rho0, std::array<double, 3> u0) {
    ScalarField rho(shape);
    VectorField u(shape);
    for (auto& r : rho.data) r = rho0;
    for (int a = 0; a < shape.dims; ++a)
        for (std::int64_t c = 0; c < shape.cells(); ++c) u.comp(a, c) = u0[a];
    return equilibrium(rho, u, vs);
}

/// BGK relaxation toward local equilibrium, optional Smagorinsky effective
/// relaxation time and Guo forcing. Solid cells are left untouched.
inline DistributionField collide(const DistributionField& f, const SolverConfig& cfg,
                                 const VelocitySet& vs) {
    DistributionField out(f.model, f.shape);
    const std::int64_t n = f.cells();
    const int q = f.q();
    const int d = f.shape.dims;
    const double cs2 = vs.cs2_f64();
    const bool les = cfg.smagorinsky_c.has_value();
    const double csmag = les ? *cfg.smagorinsky_c : 0.0;
    const double* force = cfg.force ? cfg.force->data() : nullptr;

    std::int64_t bad_cell = -1;
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n; ++c) {
        if (cfg.solid(c)) {
            for (int i = 0; i < q; ++i) out.at(i, c) = f.at(i, c);
            continue;
        }
        double fi[19], feq[19];
        for (int i = 0; i < q; ++i) fi[i] = f.at(i, c);

        double rho = 0.0;
        for (int i = 0; i < q; ++i) rho += fi[i];
        double u[3] = {0, 0, 0};
        for (int i = 0; i < q; ++i)
            for (int a = 0; a < d; ++a) u[a] += fi[i] * vs.velocities[i][a];
        const double inv_rho = rho > kDensityEps ? 1.0 / rho : 0.0;
        for (int a = 0; a < d; ++a) {
            if (force) u[a] += 0.5 * force[a];  // Guo velocity shift
            u[a] *= inv_rho;
        }

        detail::cell_equilibrium(vs, rho, u, feq);

        double tau_eff = cfg.tau;
        if (les) {
            // non-equilibrium momentum flux norm |Pi|
            double pi2 = 0.0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double pab = 0.0;
                    for (int i = 0; i < q; ++i)
                        pab += (fi[i] - feq[i]) * vs.velocities[i][a] * vs.velocities[i][b];
                    pi2 += pab * pab;
                }
            const double pin = std::sqrt(pi2);
            tau_eff = 0.5 * (cfg.tau +
                             std::sqrt(cfg.tau * cfg.tau +
                                       2.0 * std::sqrt(2.0) * csmag * csmag * pin /
                                           (std::max(rho, kDensityEps) * cs2 * cs2)));
        }
        if (!(tau_eff > 0.5)) {
#pragma omp critical
            bad_cell = c;
            continue;
        }
        const double omega = 1.0 / tau_eff;
        for (int i = 0; i < q; ++i) out.at(i, c) = fi[i] - omega * (fi[i] - feq[i]);

        if (force) {
            const double guo = 1.0 - 0.5 * omega;
            for (int i = 0; i < q; ++i) {
                double cu = 0.0, cf = 0.0, uf = 0.0;
                for (int a = 0; a < d; ++a) {
                    cu += vs.velocities[i][a] * u[a];
                    cf += vs.velocities[i][a] * force[a];
                    uf += u[a] * force[a];
                }
                out.at(i, c) += guo * vs.weight(i) *
                                (cf / cs2 + cu * cf / (cs2 * cs2) - uf / cs2);
            }
        }
    }
    if (bad_cell >= 0) {
        std::array<int, 3> p{};
        f.shape.coords(bad_cell, p);
        std::ostringstream os;
        os << "effective relaxation time <= 0.5 at cell (" << p[0] << "," << p[1] << ","
           << p[2] << ")";
        throw StabilityError(os.str());
    }
    return out;
}

/// Propagation with boundary handling. Pull form: the population arriving at
/// x with velocity c_i left x - c_i. Walls use half-way bounce-back (no-slip)
/// or specular reflection (free-slip); the inlet layer is re-imposed at
/// equilibrium(rho=1, u_in); outflow copies missing populations from the
/// inward neighbor (zero normal gradient). Obstacle cells bounce back.
inline DistributionField stream(const DistributionField& f, const SolverConfig& cfg,
                                const VelocitySet& vs) {
    DistributionField out(f.model, f.shape);
    const GridShape& shape = f.shape;
    const std::int64_t n = f.cells();
    const int q = f.q();
    const int d = shape.dims;

    std::array<bool, 3> periodic{};
    for (int a = 0; a < d; ++a) periodic[a] = cfg.periodic_axis(a);

#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n; ++c) {
        std::array<int, 3> x{};
        shape.coords(c, x);
        if (cfg.solid(c)) {
            for (int i = 0; i < q; ++i) out.at(i, c) = 0.0;
            continue;
        }
        for (int i = 0; i < q; ++i) {
            const IVec3& ci = vs.velocities[i];
            std::array<int, 3> src = x;
            // axes crossed through a non-periodic face
            int wall_axis[3], n_wall = 0;
            bool inout = false;
            BoundaryKind inout_kind = BoundaryKind::Periodic;
            for (int a = 0; a < d; ++a) {
                int s = x[a] - ci[a];
                if (s < 0 || s >= shape.extent[a]) {
                    if (periodic[a]) {
                        s = (s + shape.extent[a]) % shape.extent[a];
                    } else {
                        const auto kind = cfg.boundary[a][s < 0 ? 0 : 1].kind;
                        if (kind == BoundaryKind::Inlet || kind == BoundaryKind::Outflow) {
                            inout = true;
                            inout_kind = kind;
                        } else {
                            wall_axis[n_wall++] = a;
                        }
                        s = x[a];  // wall reflections re-use the same layer
                    }
                }
                src[a] = s;
            }
            if (inout) {
                // filled by the post-pass below
                out.at(i, c) = 0.0;
                (void)inout_kind;
                continue;
            }
            int j = i;
            if (n_wall > 0) {
                IVec3 cj = ci;
                bool noslip = false;
                for (int k = 0; k < n_wall; ++k) {
                    const int a = wall_axis[k];
                    if (cfg.boundary[a][ci[a] < 0 ? 1 : 0].kind == BoundaryKind::NoSlip)
                        noslip = true;
                    cj[a] = -cj[a];
                }
                if (noslip) {
                    j = vs.opposite(i);  // full reversal, same cell
                    src = x;
                } else {
                    // specular: flip wall-normal components; tangential source
                    // offsets are unchanged and already wrapped above
                    j = vs.find(cj);
                }
            }
            const std::int64_t sc = shape.index(src[0], src[1], src[2]);
            if (cfg.solid(sc)) {
                out.at(i, c) = f.at(vs.opposite(i), c);  // obstacle bounce-back
            } else {
                out.at(i, c) = f.at(j, sc);
            }
        }
    }

    // inlet / outflow layers
    for (int a = 0; a < d; ++a)
        for (int side = 0; side < 2; ++side) {
            const auto& b = cfg.boundary[a][side];
            if (b.kind != BoundaryKind::Inlet && b.kind != BoundaryKind::Outflow) continue;
            const int layer = side == 0 ? 0 : shape.extent[a] - 1;
            const int inward = side == 0 ? 1 : -1;

            double feq[19];
            if (b.kind == BoundaryKind::Inlet)
                detail::cell_equilibrium(vs, 1.0, b.velocity.data(), feq);

            std::array<int, 3> x{};
            for (std::int64_t c = 0; c < n; ++c) {
                shape.coords(c, x);
                if (x[a] != layer || cfg.solid(c)) continue;
                if (b.kind == BoundaryKind::Inlet) {
                    for (int i = 0; i < q; ++i) out.at(i, c) = feq[i];
                } else {
                    std::array<int, 3> nb = x;
                    nb[a] += inward;
                    const std::int64_t nc = shape.index(nb[0], nb[1], nb[2]);
                    for (int i = 0; i < q; ++i)
                        if (vs.velocities[i][a] * inward > 0)  // population from outside
                            out.at(i, c) = out.at(i, nc);
                }
            }
        }
    return out;
}

/// One full update: collide, then stream. Snapshots elsewhere are post-stream.
inline DistributionField step(const DistributionField& f, const SolverConfig& cfg,
                              const VelocitySet& vs) {
    return stream(collide(f, cfg, vs), cfg, vs);
}

/// Snapshots equally spaced in time, stride steps apart.
struct Trajectory {
    LatticeModel model;
    GridShape shape;
    std::vector<DistributionField> snapshots;
    int stride = 1;
    std::int64_t t0 = 0;  // step index of snapshots[0]
    std::string provenance;

    std::int64_t time_of(std::size_t k) const { return t0 + std::int64_t(k) * stride; }
};

inline void check_divergence(const DistributionField& f, std::int64_t step_index) {
    for (double v : f.data)
        if (!std::isfinite(v) || std::abs(v) > 1e3)
            throw DivergenceError("solver diverged at step " + std::to_string(step_index));
}

/// Advance `steps` steps, recording every `stride` steps once `warmup` steps
/// have passed. The first snapshot is taken at step warmup + stride.
inline Trajectory run(const DistributionField& f0, const SolverConfig& cfg,
                      const VelocitySet& vs, std::int64_t steps, int stride,
                      std::int64_t warmup = 0) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    cfg.validate(vs, f0.shape);
    Trajectory traj;
    traj.model = f0.model;
    traj.shape = f0.shape;
    traj.stride = stride;
    traj.t0 = warmup + stride;

    DistributionField f = f0;
    for (std::int64_t k = 1; k <= steps; ++k) {
        f = step(f, cfg, vs);
        check_divergence(f, k);
        if (k > warmup && (k - warmup) % stride == 0) traj.snapshots.push_back(f);
    }
    return traj;
}

}  // namespace lbno
