#pragma once

#include "lbno/core.hpp"
#include "lbno/lattice.hpp"

namespace lbno {

/// The full population state {f_i(x)} on a rectangular grid.
/// Storage is structure-of-arrays: one contiguous scalar field per velocity
/// index, data[i*cells + cell].
struct DistributionField {
    LatticeModel model;
    GridShape shape;
    std::vector<double> data;

    DistributionField() = default;
    DistributionField(const LatticeModel& m, const GridShape& s)
        : model(m), shape(s), data(std::size_t(m.q) * s.cells(), 0.0) {
        if (m.dimension != s.dims)
            throw ConfigError("lattice dimension does not match grid dims");
    }

    std::int64_t cells() const { return shape.cells(); }
    int q() const { return model.q; }

    double& at(int i, std::int64_t cell) { return data[i * cells() + cell]; }
    double at(int i, std::int64_t cell) const { return data[i * cells() + cell]; }
    std::span<double> channel(int i) {
        return {data.data() + i * cells(), std::size_t(cells())};
    }
    std::span<const double> channel(int i) const {
        return {data.data() + i * cells(), std::size_t(cells())};
    }

    bool same_layout(const DistributionField& o) const {
        return model == o.model && shape == o.shape;
    }
    bool finite() const { return all_finite(data); }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

inline double norm2_squared(const DistributionField& f) { return sum_squares(f.data); }

}  // namespace lbno
