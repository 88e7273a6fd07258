#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbno {

// Error taxonomy. The CLI maps these onto process exit codes:
//   ConfigError -> 2, NumericError -> 3, InvariantError -> 4, IoError -> 5.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
// Invalid spatial map / grid-incompatible symmetry request.
struct SymmetryError : ConfigError {
    using ConfigError::ConfigError;
};
// Non-finite values, solver blow-up, training divergence.
struct NumericError : Error {
    using Error::Error;
};
struct InvariantError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

/// Rectangular grid extents in lattice units. Memory layout of all fields is
/// x-fastest: cell = x + nx*(y + ny*z). Unused extents are 1.
struct GridShape {
    int dims = 2;
    std::array<int, 3> extent{1, 1, 1};

    static GridShape d2(int nx, int ny) { return {2, {nx, ny, 1}}; }
    static GridShape d3(int nx, int ny, int nz) { return {3, {nx, ny, nz}}; }

    std::int64_t cells() const {
        return std::int64_t(extent[0]) * extent[1] * extent[2];
    }
    std::int64_t index(int x, int y, int z = 0) const {
        return x + std::int64_t(extent[0]) * (y + std::int64_t(extent[1]) * z);
    }
    void coords(std::int64_t cell, std::array<int, 3>& xyz) const {
        xyz[0] = int(cell % extent[0]);
        cell /= extent[0];
        xyz[1] = int(cell % extent[1]);
        xyz[2] = int(cell / extent[1]);
    }
    bool operator==(const GridShape& o) const {
        return dims == o.dims && extent == o.extent;
    }
};

/// One double per cell.
struct ScalarField {
    GridShape shape;
    std::vector<double> data;

    ScalarField() = default;
    explicit ScalarField(const GridShape& s) : shape(s), data(s.cells(), 0.0) {}

    double& operator[](std::int64_t cell) { return data[cell]; }
    double operator[](std::int64_t cell) const { return data[cell]; }
    double& at(int x, int y, int z = 0) { return data[shape.index(x, y, z)]; }
    double at(int x, int y, int z = 0) const { return data[shape.index(x, y, z)]; }
};

/// dims doubles per cell, stored component-major: data[c*cells + cell].
struct VectorField {
    GridShape shape;
    std::vector<double> data;

    VectorField() = default;
    explicit VectorField(const GridShape& s)
        : shape(s), data(std::size_t(s.dims) * s.cells(), 0.0) {}

    double& comp(int c, std::int64_t cell) { return data[c * shape.cells() + cell]; }
    double comp(int c, std::int64_t cell) const { return data[c * shape.cells() + cell]; }
    std::span<double> component(int c) {
        return {data.data() + c * shape.cells(), std::size_t(shape.cells())};
    }
    std::span<const double> component(int c) const {
        return {data.data() + c * shape.cells(), std::size_t(shape.cells())};
    }
};

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double sum_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace lbno
