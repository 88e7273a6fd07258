#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>

#include "lbno/field.hpp"

namespace lbno::fft {

using cplx = std::complex<double>;

namespace detail {

// FFTW planning is not thread-safe; new-array execution is. Plans are created
// once per (shape, sign) with FFTW_UNALIGNED so they run on any buffer.
class PlanCache {
  public:
    fftw_plan get(const GridShape& shape, int sign) {
        const std::array<std::int64_t, 4> key{shape.extent[0], shape.extent[1],
                                              shape.extent[2], sign};
        std::scoped_lock lock(mu_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        // FFTW wants the slowest-varying dimension first; our layout is
        // x-fastest, so pass extents reversed.
        int n[3];
        int rank = shape.dims;
        for (int a = 0; a < rank; ++a) n[a] = shape.extent[rank - 1 - a];
        std::vector<cplx> dummy(shape.cells());
        fftw_plan p = fftw_plan_dft(
            rank, n, reinterpret_cast<fftw_complex*>(dummy.data()),
            reinterpret_cast<fftw_complex*>(dummy.data()), sign,
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw NumericError("fftw plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

  private:
    std::mutex mu_;
    std::map<std::array<std::int64_t, 4>, fftw_plan> plans_;
};

inline PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

}  // namespace detail

/// Unnormalized transform, in place allowed:
///   sign=-1: X_k = sum_x x e^{-i k.x}      sign=+1: x = sum_k X e^{+i k.x}
inline void transform(const GridShape& shape, const cplx* in, cplx* out, int sign) {
    fftw_plan p = detail::plan_cache().get(shape, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

/// Retained-mode window: signed frequencies |f_a| <= modes-1 on every axis.
/// The ordinal ordering (x-frequency fastest) is grid-independent, which is
/// what lets spectral weights transfer across resolutions.
struct ModeSet {
    int dims = 2;
    int modes = 1;
    std::vector<std::int64_t> index;  // per retained mode: linear spectral index

    ModeSet() = default;
    ModeSet(const GridShape& shape, int m) : dims(shape.dims), modes(m) {
        if (m < 1) throw ConfigError("modes must be >= 1");
        for (int a = 0; a < shape.dims; ++a)
            if (shape.extent[a] < 2 * m)
                throw ConfigError("grid extent " + std::to_string(shape.extent[a]) +
                                  " too small for " + std::to_string(m) + " modes");
        const int w = 2 * m - 1;
        const int fz_lo = shape.dims == 3 ? -(m - 1) : 0;
        const int fz_hi = shape.dims == 3 ? m - 1 : 0;
        index.reserve(std::size_t(w) * w * (shape.dims == 3 ? w : 1));
        for (int fz = fz_lo; fz <= fz_hi; ++fz)
            for (int fy = -(m - 1); fy <= m - 1; ++fy)
                for (int fx = -(m - 1); fx <= m - 1; ++fx) {
                    const int kx = (fx + shape.extent[0]) % shape.extent[0];
                    const int ky = (fy + shape.extent[1]) % shape.extent[1];
                    const int kz = (fz + shape.extent[2]) % shape.extent[2];
                    index.push_back(shape.index(kx, ky, kz));
                }
    }
    std::size_t count() const { return index.size(); }
};

/// Number of retained modes for a (dims, modes) pair, grid-independent.
inline std::size_t mode_count(int dims, int modes) {
    std::size_t w = std::size_t(2 * modes - 1);
    std::size_t n = w * w;
    if (dims == 3) n *= w;
    return n;
}

/// Exact spectral zero-padding: the output grid samples the same band-limited
/// interpolant. Nyquist bins on even extents are split conjugate-symmetrically
/// so real fields stay real.
inline std::vector<double> spectral_upsample(const GridShape& from, const GridShape& to,
                                             std::span<const double> data) {
    if (from.dims != to.dims) throw ConfigError("spectral_upsample: dims mismatch");
    for (int a = 0; a < from.dims; ++a)
        if (to.extent[a] < from.extent[a])
            throw ConfigError("spectral_upsample: target grid must not be coarser");

    std::vector<cplx> in(from.cells()), spec(from.cells());
    for (std::int64_t c = 0; c < from.cells(); ++c) in[c] = data[c];
    transform(from, in.data(), spec.data(), FFTW_FORWARD);

    std::vector<cplx> pad(to.cells(), cplx{0.0, 0.0});
    std::array<int, 3> k{};
    for (std::int64_t c = 0; c < from.cells(); ++c) {
        from.coords(c, k);
        // split each source bin across its aliases on the fine grid
        struct Alias {
            int f;
            double w;
        };
        std::array<std::array<Alias, 2>, 3> alias{};
        std::array<int, 3> counts{1, 1, 1};
        for (int a = 0; a < from.dims; ++a) {
            const int n = from.extent[a];
            const int s = k[a] <= n / 2 ? k[a] : k[a] - n;
            if (2 * s == n || 2 * s == -n) {
                alias[a] = {{{n / 2, 0.5}, {-n / 2, 0.5}}};
                counts[a] = 2;
            } else {
                alias[a] = {{{s, 1.0}, {0, 0.0}}};
            }
        }
        for (int az = 0; az < counts[2]; ++az)
            for (int ay = 0; ay < counts[1]; ++ay)
                for (int ax = 0; ax < counts[0]; ++ax) {
                    const double w = alias[0][ax].w * alias[1][ay].w *
                                     (from.dims == 3 ? alias[2][az].w : 1.0);
                    const int tx = (alias[0][ax].f + to.extent[0]) % to.extent[0];
                    const int ty = (alias[1][ay].f + to.extent[1]) % to.extent[1];
                    const int tz = from.dims == 3
                                       ? (alias[2][az].f + to.extent[2]) % to.extent[2]
                                       : 0;
                    pad[to.index(tx, ty, tz)] += w * spec[c];
                }
    }

    std::vector<cplx> out(to.cells());
    transform(to, pad.data(), out.data(), FFTW_BACKWARD);
    const double scale = 1.0 / double(from.cells());  // value-preserving
    std::vector<double> res(to.cells());
    for (std::int64_t c = 0; c < to.cells(); ++c) res[c] = out[c].real() * scale;
    return res;
}

inline DistributionField spectral_upsample(const DistributionField& f, const GridShape& to) {
    DistributionField out(f.model, to);
    for (int i = 0; i < f.q(); ++i) {
        auto up = spectral_upsample(f.shape, to, f.channel(i));
        std::copy(up.begin(), up.end(), out.channel(i).begin());
    }
    return out;
}

}  // namespace lbno::fft
