#pragma once

#include <functional>

#include "lbno/field.hpp"
#include "lbno/lattice.hpp"

namespace lbno {

// Field-level group action
//
//   [R.f]_i(x) = f_{perm(i)}(R^-1 x)
//
// realized as an exact index permutation of cells: grids are cell-centered
// and R acts about the grid center, so a signed-permutation map sends cell
// centers to cell centers whenever the permuted axes have equal extents.
// No interpolation anywhere.

/// Precomputed gather realizing x -> R^-1 x on a concrete grid:
/// out[cell] = in[source[cell]].
struct GroupActionPlan {
    SymmetryElement element;
    GridShape shape;
    std::vector<std::int64_t> source;

    GroupActionPlan(const SymmetryElement& e, const GridShape& s) : element(e), shape(s) {
        const SpatialMap& R = e.spatial;
        // output axis a draws from source axis src_axis[a] (sign flip optional)
        std::array<int, 3> src_axis{0, 1, 2};
        std::array<int, 3> src_sign{1, 1, 1};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (R.m[a][b] != 0) {
                    src_axis[a] = b;
                    src_sign[a] = R.m[a][b];
                }
        for (int a = 0; a < s.dims; ++a)
            if (s.extent[a] != s.extent[src_axis[a]])
                throw SymmetryError("grid extents incompatible with symmetry element '" +
                                    e.label + "'");

        source.resize(s.cells());
        std::array<int, 3> o{};
        for (std::int64_t cell = 0; cell < s.cells(); ++cell) {
            shape.coords(cell, o);
            std::array<int, 3> x{0, 0, 0};
            for (int a = 0; a < s.dims; ++a)
                x[src_axis[a]] = src_sign[a] > 0 ? o[a] : s.extent[a] - 1 - o[a];
            source[cell] = shape.index(x[0], x[1], x[2]);
        }
    }
};

inline ScalarField apply_group_action(const GroupActionPlan& plan, const ScalarField& s) {
    ScalarField out(s.shape);
    for (std::int64_t c = 0; c < s.shape.cells(); ++c) out[c] = s[plan.source[c]];
    return out;
}

/// Vector fields transform as (R.u)(x) = R u(R^-1 x).
inline VectorField apply_group_action(const GroupActionPlan& plan, const VectorField& u) {
    VectorField out(u.shape);
    const SpatialMap& R = plan.element.spatial;
    for (int a = 0; a < u.shape.dims; ++a)
        for (int b = 0; b < u.shape.dims; ++b) {
            if (R.m[a][b] == 0) continue;
            for (std::int64_t c = 0; c < u.shape.cells(); ++c)
                out.comp(a, c) = R.m[a][b] * u.comp(b, plan.source[c]);
        }
    return out;
}

inline DistributionField apply_group_action(const GroupActionPlan& plan,
                                            const DistributionField& f) {
    DistributionField out(f.model, f.shape);
    const auto& perm = plan.element.perm;
    const std::int64_t n = f.cells();
    for (int i = 0; i < f.q(); ++i) {
        const double* src = f.data.data() + std::int64_t(perm[i]) * n;
        double* dst = out.data.data() + std::int64_t(i) * n;
        for (std::int64_t c = 0; c < n; ++c) dst[c] = src[plan.source[c]];
    }
    return out;
}

inline DistributionField apply_group_action(const SymmetryElement& e,
                                            const DistributionField& f) {
    return apply_group_action(GroupActionPlan(e, f.shape), f);
}

using FieldOperator = std::function<DistributionField(const DistributionField&)>;

/// ||G(R.f) - R.G(f)||_2^2, the violation of global equivariance for one
/// group element. Zero iff G commutes with the action of R on this input.
inline double equivariance_residual(const FieldOperator& G, const DistributionField& f,
                                    const SymmetryElement& R) {
    GroupActionPlan plan(R, f.shape);
    DistributionField lhs = G(apply_group_action(plan, f));
    DistributionField rhs = apply_group_action(plan, G(f));
    if (!lhs.same_layout(rhs)) throw SymmetryError("operator changed field layout");
    double s = 0.0;
    for (std::size_t k = 0; k < lhs.data.size(); ++k) {
        double d = lhs.data[k] - rhs.data[k];
        s += d * d;
    }
    return s;
}

/// Mean equivariance residual over a set of group elements; empty set -> 0.
/// Training samples a single random non-identity element per batch; the full
/// group sum is available by passing every element.
inline double equivariance_loss(const FieldOperator& G, const DistributionField& f,
                                std::span<const SymmetryElement> elements) {
    if (elements.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : elements) s += equivariance_residual(G, f, e);
    return s / double(elements.size());
}

}  // namespace lbno
