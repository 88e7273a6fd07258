#pragma once

#include "lbno/dataset.hpp"
#include "lbno/moments.hpp"
#include "lbno/neuralop.hpp"

namespace lbno {

/// Non-negative coefficients of the composite training loss
///   L = mse*L_mse + mom0*L_mom0 + mom1*L_mom1 + equiv*L_equiv.
struct LossWeights {
    double mse = 1.0;
    double mom0 = 0.1;
    double mom1 = 0.1;
    double equiv = 0.01;

    void validate() const {
        if (mse < 0 || mom0 < 0 || mom1 < 0 || equiv < 0)
            throw ConfigError("loss weights must be non-negative");
    }
    static LossWeights mse_only() { return {1.0, 0.0, 0.0, 0.0}; }
};

struct LossComponents {
    double mse = 0.0;
    double mom0 = 0.0;
    double mom1 = 0.0;
    double equiv = 0.0;
};

inline double total_loss(const LossComponents& c, const LossWeights& w) {
    return w.mse * c.mse + w.mom0 * c.mom0 + w.mom1 * c.mom1 + w.equiv * c.equiv;
}

/// Data-side components from explicit fields, no operator involved:
/// mse over all cells/channels, squared moment mismatches per Eq-style sums,
/// both normalized by cell count.
inline LossComponents data_loss_components(const DistributionField& pred,
                                           const DistributionField& target,
                                           const VelocitySet& vs) {
    if (!pred.same_layout(target)) throw ConfigError("loss: field layout mismatch");
    const std::int64_t n = pred.cells();
    const int q = pred.q(), d = pred.shape.dims;
    LossComponents out;
    double mse = 0.0;
    for (std::size_t k = 0; k < pred.data.size(); ++k) {
        const double e = pred.data[k] - target.data[k];
        mse += e * e;
    }
    out.mse = mse / double(std::int64_t(q) * n);

    double m0 = 0.0, m1 = 0.0;
    for (std::int64_t c = 0; c < n; ++c) {
        double d0 = 0.0, da[3] = {0, 0, 0};
        for (int i = 0; i < q; ++i) {
            const double e = pred.at(i, c) - target.at(i, c);
            d0 += e;
            for (int a = 0; a < d; ++a) da[a] += e * vs.velocities[i][a];
        }
        m0 += d0 * d0;
        for (int a = 0; a < d; ++a) m1 += da[a] * da[a];
    }
    out.mom0 = m0 / double(n);
    out.mom1 = m1 / double(n);
    return out;
}

namespace detail {

inline SymmetryElement inverse_element(const SymmetryElement& e) {
    SymmetryElement inv;
    inv.spatial = e.spatial.inverse();
    inv.perm.resize(e.perm.size());
    for (std::size_t i = 0; i < e.perm.size(); ++i) inv.perm[e.perm[i]] = int(i);
    inv.label = element_label(inv.spatial);
    return inv;
}

}  // namespace detail

/// All four components of the composite loss for one sample, and optionally
/// the accumulated parameter gradient of the weighted total. The mse term is
/// evaluated on normalized populations, the moment terms on raw populations,
/// and the equivariance term compares the operator against itself on the
/// transformed input (no target involved).
inline LossComponents sample_loss(const SpectralOperatorModel& m, const KineticSample& s,
                                  const VelocitySet& vs,
                                  std::span<const SymmetryElement> equiv_elements,
                                  const LossWeights& lw, std::vector<double>* grad) {
    if (s.input.model.tag != m.config.lattice)
        throw ConfigError("sample lattice does not match operator");
    const std::int64_t n = s.input.cells();
    const int q = s.input.q(), d = s.input.shape.dims;
    const double inv_qn = 1.0 / double(std::int64_t(q) * n);
    const double inv_n = 1.0 / double(n);

    ForwardCache fc;
    DistributionField pred = forward(m, s.input, &fc);

    LossComponents comps;
    std::vector<double> yn_bar;
    if (grad) yn_bar.assign(std::size_t(q) * n, 0.0);

    // mse on normalized populations
    {
        double acc = 0.0;
        for (int i = 0; i < q; ++i) {
            const double inv_sc = 1.0 / m.norm_scale[i];
            const double mean = m.norm_mean[i];
            const double* yn = fc.yn.data() + std::int64_t(i) * n;
            const double* tg = s.target.data.data() + std::int64_t(i) * n;
            double* yb = grad ? yn_bar.data() + std::int64_t(i) * n : nullptr;
            for (std::int64_t c = 0; c < n; ++c) {
                const double e = yn[c] - (tg[c] - mean) * inv_sc;
                acc += e * e;
                if (yb) yb[c] += lw.mse * 2.0 * inv_qn * e;
            }
        }
        comps.mse = acc * inv_qn;
    }

    // moment mismatches on raw populations
    {
        std::vector<double> d0(n, 0.0), d1(std::size_t(d) * n, 0.0);
        for (int i = 0; i < q; ++i) {
            const double* pr = pred.data.data() + std::int64_t(i) * n;
            const double* tg = s.target.data.data() + std::int64_t(i) * n;
            for (std::int64_t c = 0; c < n; ++c) {
                const double e = pr[c] - tg[c];
                d0[c] += e;
                for (int a = 0; a < d; ++a)
                    d1[std::size_t(a) * n + c] += e * vs.velocities[i][a];
            }
        }
        double m0 = 0.0, m1 = 0.0;
        for (std::int64_t c = 0; c < n; ++c) m0 += d0[c] * d0[c];
        for (std::size_t k = 0; k < d1.size(); ++k) m1 += d1[k] * d1[k];
        comps.mom0 = m0 * inv_n;
        comps.mom1 = m1 * inv_n;
        if (grad) {
            for (int i = 0; i < q; ++i) {
                const double sc = m.norm_scale[i];
                double* yb = yn_bar.data() + std::int64_t(i) * n;
                for (std::int64_t c = 0; c < n; ++c) {
                    double g = lw.mom0 * 2.0 * inv_n * d0[c];
                    for (int a = 0; a < d; ++a)
                        g += lw.mom1 * 2.0 * inv_n * d1[std::size_t(a) * n + c] *
                             vs.velocities[i][a];
                    yb[c] += g * sc;  // raw -> normalized output space
                }
            }
        }
    }

    // global equivariance, averaged over the supplied group elements
    if (!equiv_elements.empty() && (lw.equiv != 0.0 || !grad)) {
        const double inv_e = 1.0 / double(equiv_elements.size());
        for (const SymmetryElement& R : equiv_elements) {
            GroupActionPlan plan(R, s.input.shape);
            ForwardCache fc2;
            DistributionField out2 = forward(m, apply_group_action(plan, s.input), &fc2);
            DistributionField rot1 = apply_group_action(plan, pred);

            DistributionField diff(out2.model, out2.shape);
            double acc = 0.0;
            for (std::size_t k = 0; k < out2.data.size(); ++k) {
                diff.data[k] = out2.data[k] - rot1.data[k];
                acc += diff.data[k] * diff.data[k];
            }
            comps.equiv += acc * inv_qn * inv_e;

            if (grad && lw.equiv != 0.0) {
                const double w = lw.equiv * 2.0 * inv_qn * inv_e;
                std::vector<double> yn_bar2(std::size_t(q) * n);
                for (int i = 0; i < q; ++i) {
                    const double sc = m.norm_scale[i];
                    const double* df = diff.data.data() + std::int64_t(i) * n;
                    double* yb = yn_bar2.data() + std::int64_t(i) * n;
                    for (std::int64_t c = 0; c < n; ++c) yb[c] = w * df[c] * sc;
                }
                backward(m, fc2, yn_bar2, *grad);

                // pull the -R.G(f) branch back through the base pass
                DistributionField back =
                    apply_group_action(detail::inverse_element(R), diff);
                for (int i = 0; i < q; ++i) {
                    const double sc = m.norm_scale[i];
                    const double* bk = back.data.data() + std::int64_t(i) * n;
                    double* yb = yn_bar.data() + std::int64_t(i) * n;
                    for (std::int64_t c = 0; c < n; ++c) yb[c] -= w * bk[c] * sc;
                }
            }
        }
    }

    if (grad) backward(m, fc, yn_bar, *grad);
    return comps;
}

struct GradientResult {
    LossComponents components;
    double total = 0.0;
    std::vector<double> grad;
};

/// Mean loss and exact reverse-mode gradient over a batch. Deterministic for
/// a fixed choice of equivariance elements.
inline GradientResult gradients(const SpectralOperatorModel& m,
                                std::span<const KineticSample* const> batch,
                                const LossWeights& lw, const VelocitySet& vs,
                                std::span<const SymmetryElement> equiv_elements) {
    if (batch.empty()) throw ConfigError("gradients: empty batch");
    lw.validate();
    GradientResult r;
    r.grad.assign(m.layout.total, 0.0);
    for (const KineticSample* s : batch) {
        LossComponents c = sample_loss(m, *s, vs, equiv_elements, lw, &r.grad);
        r.components.mse += c.mse;
        r.components.mom0 += c.mom0;
        r.components.mom1 += c.mom1;
        r.components.equiv += c.equiv;
    }
    const double inv_b = 1.0 / double(batch.size());
    r.components.mse *= inv_b;
    r.components.mom0 *= inv_b;
    r.components.mom1 *= inv_b;
    r.components.equiv *= inv_b;
    for (double& g : r.grad) g *= inv_b;
    r.total = total_loss(r.components, lw);
    return r;
}

}  // namespace lbno
