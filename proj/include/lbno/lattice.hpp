#pragma once

#include <algorithm>
#include <boost/rational.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lbno/core.hpp"

namespace lbno {

using Rational = boost::rational<long long>;

enum class LatticeTag { D2Q9, D3Q19 };

inline const char* to_string(LatticeTag t) {
    return t == LatticeTag::D2Q9 ? "D2Q9" : "D3Q19";
}

struct LatticeModel {
    LatticeTag tag = LatticeTag::D2Q9;
    int dimension = 2;
    int q = 9;

    static LatticeModel from_tag(LatticeTag t) {
        switch (t) {
            case LatticeTag::D2Q9: return {t, 2, 9};
            case LatticeTag::D3Q19: return {t, 3, 19};
        }
        throw ConfigError("unsupported lattice tag");
    }
    bool operator==(const LatticeModel& o) const {
        return tag == o.tag && dimension == o.dimension && q == o.q;
    }
};

using IVec3 = std::array<int, 3>;

inline IVec3 ivec_neg(const IVec3& v) { return {-v[0], -v[1], -v[2]}; }

/// Discrete velocities, weights (exact rationals) and lattice sound speed.
/// Canonical index order: 0 = rest, then axis-aligned, then diagonal.
struct VelocitySet {
    LatticeModel model;
    std::vector<IVec3> velocities;
    std::vector<Rational> weights;
    Rational cs2{1, 3};

    int q() const { return model.q; }
    int dims() const { return model.dimension; }
    double weight(int i) const { return boost::rational_cast<double>(weights[i]); }
    double cs2_f64() const { return boost::rational_cast<double>(cs2); }

    int find(const IVec3& c) const {
        for (int i = 0; i < q(); ++i)
            if (velocities[i] == c) return i;
        return -1;
    }
    /// Index of -c_i. Every supported lattice is closed under negation.
    int opposite(int i) const {
        int j = find(ivec_neg(velocities[i]));
        if (j < 0) throw InvariantError("velocity set not closed under negation");
        return j;
    }
};

inline VelocitySet velocity_set(LatticeTag tag) {
    VelocitySet vs;
    vs.model = LatticeModel::from_tag(tag);
    vs.cs2 = Rational(1, 3);
    if (tag == LatticeTag::D2Q9) {
        vs.velocities = {{0, 0, 0},  {1, 0, 0},  {0, 1, 0},   {-1, 0, 0}, {0, -1, 0},
                         {1, 1, 0},  {-1, 1, 0}, {-1, -1, 0}, {1, -1, 0}};
        vs.weights.assign(9, Rational(1, 36));
        vs.weights[0] = Rational(4, 9);
        for (int i = 1; i <= 4; ++i) vs.weights[i] = Rational(1, 9);
    } else {
        vs.velocities.push_back({0, 0, 0});
        vs.weights.push_back(Rational(1, 3));
        for (int a = 0; a < 3; ++a)
            for (int s : {1, -1}) {
                IVec3 c{0, 0, 0};
                c[a] = s;
                vs.velocities.push_back(c);
                vs.weights.push_back(Rational(1, 18));
            }
        // face diagonals |c|^2 = 2, each followed by its opposite
        static constexpr std::array<IVec3, 6> diag{
            IVec3{1, 1, 0}, IVec3{1, -1, 0}, IVec3{1, 0, 1},
            IVec3{1, 0, -1}, IVec3{0, 1, 1}, IVec3{0, 1, -1}};
        for (const auto& d : diag)
            for (const IVec3& c : {d, ivec_neg(d)}) {
                vs.velocities.push_back(c);
                vs.weights.push_back(Rational(1, 36));
            }
    }
    return vs;
}

/// d x d integer orthogonal matrix with entries in {-1,0,1}; only signed
/// permutation matrices are admitted. Stored padded to 3x3 (identity outside
/// the active dims).
struct SpatialMap {
    int dims = 2;
    std::array<std::array<int, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static SpatialMap identity(int dims) {
        SpatialMap r;
        r.dims = dims;
        return r;
    }
    IVec3 apply(const IVec3& v) const {
        IVec3 out{0, 0, 0};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) out[a] += m[a][b] * v[b];
        return out;
    }
    SpatialMap compose(const SpatialMap& o) const {
        SpatialMap r;
        r.dims = dims;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                int s = 0;
                for (int k = 0; k < 3; ++k) s += m[a][k] * o.m[k][b];
                r.m[a][b] = s;
            }
        return r;
    }
    SpatialMap transpose() const {
        SpatialMap r;
        r.dims = dims;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) r.m[a][b] = m[b][a];
        return r;
    }
    // For orthogonal integer maps the inverse is the transpose.
    SpatialMap inverse() const { return transpose(); }

    bool is_signed_permutation() const {
        for (int a = 0; a < 3; ++a) {
            int nz = 0;
            for (int b = 0; b < 3; ++b) {
                int e = m[a][b];
                if (e < -1 || e > 1) return false;
                if (e != 0) ++nz;
            }
            if (nz != 1) return false;
        }
        SpatialMap rrt = compose(transpose());
        return rrt.m == SpatialMap::identity(3).m;
    }
    bool operator==(const SpatialMap& o) const { return dims == o.dims && m == o.m; }
};

/// A spatial orthogonal map paired with its velocity-index permutation:
/// spatial * c[perm[i]] == c[i] for every i.
struct SymmetryElement {
    SpatialMap spatial;
    std::vector<int> perm;
    std::string label;
};

/// sigma with R*c[sigma(i)] == c[i]. Throws SymmetryError when R does not map
/// the velocity set onto itself (e.g. a 45-degree rotation on D2Q9).
inline std::vector<int> velocity_permutation(const SpatialMap& R, const VelocitySet& vs) {
    if (!R.is_signed_permutation())
        throw SymmetryError("spatial map is not an integer signed permutation matrix");
    const SpatialMap Rinv = R.inverse();
    std::vector<int> perm(vs.q());
    std::vector<bool> used(vs.q(), false);
    for (int i = 0; i < vs.q(); ++i) {
        int j = vs.find(Rinv.apply(vs.velocities[i]));
        if (j < 0 || used[j])
            throw SymmetryError("spatial map does not permute the velocity set");
        perm[i] = j;
        used[j] = true;
    }
    return perm;
}

namespace detail {

inline std::string element_label(const SpatialMap& R) {
    if (R.dims == 2) {
        const auto& m = R.m;
        auto is = [&](int a, int b, int c, int d) {
            return m[0][0] == a && m[0][1] == b && m[1][0] == c && m[1][1] == d;
        };
        if (is(1, 0, 0, 1)) return "identity";
        if (is(0, -1, 1, 0)) return "rot90";
        if (is(-1, 0, 0, -1)) return "rot180";
        if (is(0, 1, -1, 0)) return "rot270";
        if (is(-1, 0, 0, 1)) return "reflect-x";
        if (is(1, 0, 0, -1)) return "reflect-y";
        if (is(0, 1, 1, 0)) return "reflect-diag";
        if (is(0, -1, -1, 0)) return "reflect-antidiag";
    }
    std::string s = "map(";
    const char* axes = "xyz";
    for (int a = 0; a < R.dims; ++a) {
        for (int b = 0; b < R.dims; ++b)
            if (R.m[a][b] != 0) {
                s += (R.m[a][b] > 0 ? '+' : '-');
                s += axes[b];
            }
    }
    s += ')';
    return s;
}

inline std::vector<SpatialMap> signed_permutation_matrices(int dims) {
    std::vector<int> axes(dims);
    for (int a = 0; a < dims; ++a) axes[a] = a;
    std::vector<SpatialMap> out;
    std::sort(axes.begin(), axes.end());
    do {
        for (int signs = 0; signs < (1 << dims); ++signs) {
            SpatialMap r;
            r.dims = dims;
            r.m = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
            for (int a = 0; a < 3; ++a) r.m[a][a] = a < dims ? 0 : 1;
            for (int a = 0; a < dims; ++a)
                r.m[a][axes[a]] = (signs >> a) & 1 ? -1 : 1;
            out.push_back(r);
        }
    } while (std::next_permutation(axes.begin(), axes.end()));
    return out;
}

}  // namespace detail

/// Full lattice symmetry group: D4 (8 elements) for D2Q9, Oh (48) for D3Q19.
/// Composition convention: compose(a, b) is the element whose spatial map is
/// spatial(a)*spatial(b); the induced index map satisfies
/// perm(ab) = perm(b) o perm(a), and the field action defined in symmetry.hpp
/// then obeys (ab).f = a.(b.f).
struct SymmetryGroup {
    LatticeModel model;
    std::vector<SymmetryElement> elements;
    std::vector<std::vector<int>> compose_table;  // [a][b] -> index of a*b
    std::vector<int> inverse_table;
    int identity = 0;

    int size() const { return int(elements.size()); }
    int compose(int a, int b) const { return compose_table[a][b]; }
    int inverse(int a) const { return inverse_table[a]; }
};

inline SymmetryGroup symmetry_group(const VelocitySet& vs) {
    SymmetryGroup g;
    g.model = vs.model;
    for (const SpatialMap& R : detail::signed_permutation_matrices(vs.dims())) {
        SymmetryElement e;
        e.spatial = R;
        e.perm = velocity_permutation(R, vs);
        e.label = detail::element_label(R);
        g.elements.push_back(std::move(e));
    }

    auto find_spatial = [&](const SpatialMap& R) {
        for (int k = 0; k < g.size(); ++k)
            if (g.elements[k].spatial == R) return k;
        throw InvariantError("symmetry group not closed under composition");
    };

    g.identity = find_spatial(SpatialMap::identity(vs.dims()));
    g.compose_table.assign(g.size(), std::vector<int>(g.size()));
    g.inverse_table.assign(g.size(), -1);
    for (int a = 0; a < g.size(); ++a)
        for (int b = 0; b < g.size(); ++b) {
            int ab = find_spatial(g.elements[a].spatial.compose(g.elements[b].spatial));
            g.compose_table[a][b] = ab;
            if (ab == g.identity) g.inverse_table[a] = b;
        }
    for (int a = 0; a < g.size(); ++a)
        if (g.inverse_table[a] < 0) throw InvariantError("group element has no inverse");
    return g;
}

inline SymmetryGroup symmetry_group(LatticeTag tag) {
    return symmetry_group(velocity_set(tag));
}

}  // namespace lbno
