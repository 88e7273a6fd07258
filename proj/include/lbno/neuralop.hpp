#pragma once

#include <chrono>
#include <numbers>
#include <random>

#include "lbno/fft.hpp"
#include "lbno/symmetry.hpp"

namespace lbno {

enum class Activation : std::uint8_t { GELU = 0, ReLU = 1 };

/// Architecture of the forward operator: pointwise lift Q -> width, `layers`
/// spectral blocks (truncated Fourier mixing + pointwise skip + bias,
/// activation between blocks), pointwise projection width -> Q.
struct OperatorConfig {
    int width = 32;
    int layers = 4;
    int modes = 12;  // retained non-negative frequencies per axis
    Activation activation = Activation::GELU;
    LatticeTag lattice = LatticeTag::D2Q9;

    void validate() const {
        if (width < 1) throw ConfigError("width must be >= 1");
        if (layers < 1) throw ConfigError("layers must be >= 1");
        if (modes < 1) throw ConfigError("modes must be >= 1");
    }
    LatticeModel model() const { return LatticeModel::from_tag(lattice); }
    int q() const { return model().q; }
    int dims() const { return model().dimension; }
};

/// Offsets into the flat parameter vector.
struct ParamLayout {
    int q = 9, width = 32, layers = 4;
    std::size_t n_modes = 0;
    std::size_t lift_w = 0, lift_b = 0;
    std::size_t layer_stride = 0, spec_w = 0, skip_w = 0, bias = 0;
    std::size_t proj_w = 0, proj_b = 0;
    std::size_t total = 0;

    ParamLayout() = default;
    explicit ParamLayout(const OperatorConfig& cfg)
        : q(cfg.q()), width(cfg.width), layers(cfg.layers) {
        n_modes = fft::mode_count(cfg.dims(), cfg.modes);
        std::size_t at = 0;
        lift_w = at;
        at += std::size_t(width) * q;
        lift_b = at;
        at += width;
        spec_w = at;  // offsets below are relative to a layer's base
        const std::size_t spec_sz = n_modes * width * width * 2;
        skip_w = spec_w + spec_sz;
        bias = skip_w + std::size_t(width) * width;
        layer_stride = spec_sz + std::size_t(width) * width + width;
        at += std::size_t(layers) * layer_stride;
        proj_w = at;
        at += std::size_t(q) * width;
        proj_b = at;
        at += q;
        total = at;
    }
    std::size_t layer_base(int l) const { return spec_w + std::size_t(l) * layer_stride; }
};

struct SpectralOperatorModel {
    OperatorConfig config;
    ParamLayout layout;
    std::uint64_t seed = 0;
    std::vector<double> params;
    // per-channel input statistics, fixed at training time
    std::vector<double> norm_mean, norm_scale;
    std::array<int, 3> train_extent{0, 0, 0};  // 0 = not trained yet

    LatticeModel model() const { return config.model(); }
    bool finite() const { return all_finite(params); }
};

inline SpectralOperatorModel init_model(const OperatorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SpectralOperatorModel m;
    m.config = cfg;
    m.layout = ParamLayout(cfg);
    m.seed = seed;
    m.params.assign(m.layout.total, 0.0);
    m.norm_mean.assign(cfg.q(), 0.0);
    m.norm_scale.assign(cfg.q(), 1.0);

    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double a) {
        std::uniform_real_distribution<double> d(-a, a);
        return [&rng, d]() mutable { return d(rng); };
    };
    auto fill = [&](std::size_t at, std::size_t n, double a) {
        auto g = uniform(a);
        for (std::size_t k = 0; k < n; ++k) m.params[at + k] = g();
    };
    const auto& L = m.layout;
    fill(L.lift_w, std::size_t(L.width) * L.q, 1.0 / std::sqrt(double(L.q)));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::size_t base = L.layer_base(l);
        fill(base, L.n_modes * L.width * L.width * 2, 1.0 / (double(L.width) * L.width));
        fill(base + (L.skip_w - L.spec_w), std::size_t(L.width) * L.width,
             1.0 / std::sqrt(double(L.width)));
    }
    fill(L.proj_w, std::size_t(L.q) * L.width, 1.0 / std::sqrt(double(L.width)));
    return m;
}

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_grad(double x) {
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * phi;
}

inline double activate(Activation a, double x) {
    return a == Activation::GELU ? gelu(x) : (x > 0.0 ? x : 0.0);
}
inline double activate_grad(Activation a, double x) {
    return a == Activation::GELU ? gelu_grad(x) : (x > 0.0 ? 1.0 : 0.0);
}

}  // namespace detail

/// Intermediate state of one forward pass, kept for the backward sweep.
struct ForwardCache {
    GridShape grid;
    fft::ModeSet mode_set;
    std::vector<double> xn;                        // normalized input [q][cell]
    std::vector<std::vector<double>> h;            // block inputs, layers+1 entries
    std::vector<std::vector<fft::cplx>> spectrum;  // per layer [mode][ci]
    std::vector<std::vector<double>> z;            // per layer pre-activation
    std::vector<double> yn;                        // normalized output [q][cell]
};

namespace detail {

/// y[co][cell] = sum_ci W[co][ci] x[ci][cell] (+ b[co]); W row-major [co][ci].
inline void pointwise_affine(const double* W, const double* b, int co_n, int ci_n,
                             std::int64_t cells, const double* x, double* y) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < co_n; ++co) {
        double* yc = y + std::int64_t(co) * cells;
        const double bias = b ? b[co] : 0.0;
        for (std::int64_t c = 0; c < cells; ++c) yc[c] = bias;
        for (int ci = 0; ci < ci_n; ++ci) {
            const double w = W[std::size_t(co) * ci_n + ci];
            if (w == 0.0) continue;
            const double* xc = x + std::int64_t(ci) * cells;
            for (std::int64_t c = 0; c < cells; ++c) yc[c] += w * xc[c];
        }
    }
}

/// Accumulates gradients of pointwise_affine. Slot-exclusive writes keep the
/// result bitwise independent of thread count.
inline void pointwise_affine_backward(const double* W, int co_n, int ci_n,
                                      std::int64_t cells, const double* x,
                                      const double* ybar, double* Wgrad, double* bgrad,
                                      double* xbar) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < co_n; ++co) {
        const double* yc = ybar + std::int64_t(co) * cells;
        if (bgrad) {
            double s = 0.0;
            for (std::int64_t c = 0; c < cells; ++c) s += yc[c];
            bgrad[co] += s;
        }
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* xc = x + std::int64_t(ci) * cells;
            double s = 0.0;
            for (std::int64_t c = 0; c < cells; ++c) s += yc[c] * xc[c];
            Wgrad[std::size_t(co) * ci_n + ci] += s;
        }
    }
    if (xbar) {
#pragma omp parallel for schedule(static)
        for (int ci = 0; ci < ci_n; ++ci) {
            double* xc = xbar + std::int64_t(ci) * cells;
            for (int co = 0; co < co_n; ++co) {
                const double w = W[std::size_t(co) * ci_n + ci];
                const double* yc = ybar + std::int64_t(co) * cells;
                for (std::int64_t c = 0; c < cells; ++c) xc[c] += w * yc[c];
            }
        }
    }
}

/// Truncated forward transform of a channel-major real block:
/// out[mode*width + ci] = FFT(x[ci])[mode index].
inline void spectral_gather(const GridShape& grid, const fft::ModeSet& ms, int width,
                            const double* x, fft::cplx* out) {
    const std::int64_t n = grid.cells();
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < width; ++ci) {
        std::vector<fft::cplx> buf(n), spec(n);
        const double* xc = x + std::int64_t(ci) * n;
        for (std::int64_t c = 0; c < n; ++c) buf[c] = xc[c];
        fft::transform(grid, buf.data(), spec.data(), FFTW_FORWARD);
        for (std::size_t k = 0; k < ms.count(); ++k)
            out[k * std::size_t(width) + ci] = spec[ms.index[k]];
    }
}

/// Real part of the (optionally normalized) inverse transform of a truncated
/// spectrum laid out as [mode][co]; accumulate==true adds into y.
inline void spectral_scatter(const GridShape& grid, const fft::ModeSet& ms, int width,
                             const fft::cplx* t, double scale, bool accumulate,
                             double* y) {
    const std::int64_t n = grid.cells();
#pragma omp parallel for schedule(static)
    for (int co = 0; co < width; ++co) {
        std::vector<fft::cplx> pad(n, fft::cplx{0, 0}), out(n);
        for (std::size_t k = 0; k < ms.count(); ++k)
            pad[ms.index[k]] = t[k * std::size_t(width) + co];
        fft::transform(grid, pad.data(), out.data(), FFTW_BACKWARD);
        double* yc = y + std::int64_t(co) * n;
        if (accumulate)
            for (std::int64_t c = 0; c < n; ++c) yc[c] += scale * out[c].real();
        else
            for (std::int64_t c = 0; c < n; ++c) yc[c] = scale * out[c].real();
    }
}

/// t[k][co] = sum_ci W[k][co][ci] s[k][ci], complex weights stored re,im.
inline void mode_mix(const double* W, std::size_t n_modes, int width, const fft::cplx* s,
                     fft::cplx* t) {
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < n_modes; ++k) {
        const fft::cplx* sk = s + k * std::size_t(width);
        fft::cplx* tk = t + k * std::size_t(width);
        const double* wk = W + k * std::size_t(width) * width * 2;
        for (int co = 0; co < width; ++co) {
            fft::cplx acc{0, 0};
            const double* wrow = wk + std::size_t(co) * width * 2;
            for (int ci = 0; ci < width; ++ci)
                acc += fft::cplx{wrow[2 * ci], wrow[2 * ci + 1]} * sk[ci];
            tk[co] = acc;
        }
    }
}

inline void mode_mix_backward(const double* W, std::size_t n_modes, int width,
                              const fft::cplx* s, const fft::cplx* tbar, double* Wgrad,
                              fft::cplx* sbar) {
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < n_modes; ++k) {
        const fft::cplx* sk = s + k * std::size_t(width);
        const fft::cplx* tk = tbar + k * std::size_t(width);
        const double* wk = W + k * std::size_t(width) * width * 2;
        double* gk = Wgrad + k * std::size_t(width) * width * 2;
        fft::cplx* sb = sbar + k * std::size_t(width);
        for (int ci = 0; ci < width; ++ci) sb[ci] = {0, 0};
        for (int co = 0; co < width; ++co) {
            const double* wrow = wk + std::size_t(co) * width * 2;
            double* grow = gk + std::size_t(co) * width * 2;
            for (int ci = 0; ci < width; ++ci) {
                const fft::cplx g = tk[co] * std::conj(sk[ci]);
                grow[2 * ci] += g.real();
                grow[2 * ci + 1] += g.imag();
                sb[ci] += std::conj(fft::cplx{wrow[2 * ci], wrow[2 * ci + 1]}) * tk[co];
            }
        }
    }
}

}  // namespace detail

/// Full operator evaluation; the cache keeps what the backward sweep needs.
inline DistributionField forward(const SpectralOperatorModel& m, const DistributionField& f,
                                 ForwardCache* cache = nullptr) {
    const OperatorConfig& cfg = m.config;
    if (f.model.tag != cfg.lattice)
        throw ConfigError("input lattice does not match operator config");
    for (int a = 0; a < f.shape.dims; ++a)
        if (f.shape.extent[a] < 2 * cfg.modes)
            throw ConfigError("grid extent too small for retained modes");

    const std::int64_t n = f.cells();
    const int q = cfg.q(), width = cfg.width;
    const auto& L = m.layout;
    const double* P = m.params.data();

    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    fc.grid = f.shape;
    fc.mode_set = fft::ModeSet(f.shape, cfg.modes);
    fc.h.assign(std::size_t(cfg.layers) + 1, {});
    fc.spectrum.assign(cfg.layers, {});
    fc.z.assign(cfg.layers, {});

    fc.xn.resize(std::size_t(q) * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < q; ++i) {
        const double inv = 1.0 / m.norm_scale[i];
        const double mean = m.norm_mean[i];
        const double* src = f.data.data() + std::int64_t(i) * n;
        double* dst = fc.xn.data() + std::int64_t(i) * n;
        for (std::int64_t c = 0; c < n; ++c) dst[c] = (src[c] - mean) * inv;
    }

    fc.h[0].resize(std::size_t(width) * n);
    detail::pointwise_affine(P + L.lift_w, P + L.lift_b, width, q, n, fc.xn.data(),
                             fc.h[0].data());

    std::vector<fft::cplx> mixed(fc.mode_set.count() * std::size_t(width));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::size_t base = L.layer_base(l);
        fc.spectrum[l].resize(fc.mode_set.count() * std::size_t(width));
        detail::spectral_gather(fc.grid, fc.mode_set, width, fc.h[l].data(),
                                fc.spectrum[l].data());
        detail::mode_mix(P + base, fc.mode_set.count(), width, fc.spectrum[l].data(),
                         mixed.data());

        fc.z[l].resize(std::size_t(width) * n);
        detail::pointwise_affine(P + base + (L.skip_w - L.spec_w),
                                 P + base + (L.bias - L.spec_w), width, width, n,
                                 fc.h[l].data(), fc.z[l].data());
        detail::spectral_scatter(fc.grid, fc.mode_set, width, mixed.data(), 1.0 / double(n),
                                 true, fc.z[l].data());

        fc.h[l + 1].resize(std::size_t(width) * n);
        const bool last = l == cfg.layers - 1;
        double* dst = fc.h[l + 1].data();
        const double* src = fc.z[l].data();
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < std::int64_t(width) * n; ++k)
            dst[k] = last ? src[k] : detail::activate(cfg.activation, src[k]);
    }

    fc.yn.resize(std::size_t(q) * n);
    detail::pointwise_affine(P + L.proj_w, P + L.proj_b, q, width, n,
                             fc.h[cfg.layers].data(), fc.yn.data());

    DistributionField out(f.model, f.shape);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < q; ++i) {
        const double s = m.norm_scale[i], mean = m.norm_mean[i];
        const double* src = fc.yn.data() + std::int64_t(i) * n;
        double* dst = out.data.data() + std::int64_t(i) * n;
        for (std::int64_t c = 0; c < n; ++c) dst[c] = src[c] * s + mean;
    }
    if (!out.finite()) throw NumericError("operator produced non-finite output");
    return out;
}

/// Reverse sweep: accumulates d(loss)/d(params) into `grad` given the
/// cotangent of the normalized output.
inline void backward(const SpectralOperatorModel& m, const ForwardCache& fc,
                     const std::vector<double>& yn_bar, std::vector<double>& grad) {
    const OperatorConfig& cfg = m.config;
    const std::int64_t n = fc.grid.cells();
    const int q = cfg.q(), width = cfg.width;
    const auto& L = m.layout;
    const double* P = m.params.data();

    std::vector<double> hbar(std::size_t(width) * n, 0.0);
    detail::pointwise_affine_backward(P + L.proj_w, q, width, n, fc.h[cfg.layers].data(),
                                      yn_bar.data(), grad.data() + L.proj_w,
                                      grad.data() + L.proj_b, hbar.data());

    std::vector<double> zbar(std::size_t(width) * n);
    std::vector<double> hbar_prev(std::size_t(width) * n);
    std::vector<fft::cplx> tbar(fc.mode_set.count() * std::size_t(width));
    std::vector<fft::cplx> sbar(fc.mode_set.count() * std::size_t(width));
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const std::size_t base = L.layer_base(l);
        const bool last = l == cfg.layers - 1;
        const double* z = fc.z[l].data();
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < std::int64_t(width) * n; ++k)
            zbar[k] = last ? hbar[k]
                           : hbar[k] * detail::activate_grad(cfg.activation, z[k]);

        std::fill(hbar_prev.begin(), hbar_prev.end(), 0.0);
        detail::pointwise_affine_backward(P + base + (L.skip_w - L.spec_w), width, width, n,
                                          fc.h[l].data(), zbar.data(),
                                          grad.data() + base + (L.skip_w - L.spec_w),
                                          grad.data() + base + (L.bias - L.spec_w),
                                          hbar_prev.data());

        // spectral path: tbar = (1/n) * truncated FFT(zbar)
        detail::spectral_gather(fc.grid, fc.mode_set, width, zbar.data(), tbar.data());
        for (auto& v : tbar) v *= 1.0 / double(n);
        detail::mode_mix_backward(P + base, fc.mode_set.count(), width,
                                  fc.spectrum[l].data(), tbar.data(), grad.data() + base,
                                  sbar.data());
        // adjoint of the truncated forward transform: unnormalized inverse
        detail::spectral_scatter(fc.grid, fc.mode_set, width, sbar.data(), 1.0, true,
                                 hbar_prev.data());
        std::swap(hbar, hbar_prev);
    }

    detail::pointwise_affine_backward(P + L.lift_w, width, q, n, fc.xn.data(), hbar.data(),
                                      grad.data() + L.lift_w, grad.data() + L.lift_b,
                                      nullptr);
}

}  // namespace lbno
