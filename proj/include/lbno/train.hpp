#pragma once

#include "lbno/loss.hpp"

namespace lbno {

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& st, double lr, double beta1, double beta2, double eps) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(beta2, double(st.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        st.m[k] = beta1 * st.m[k] + (1.0 - beta1) * grad[k];
        st.v[k] = beta2 * st.v[k] + (1.0 - beta2) * grad[k] * grad[k];
        params[k] -= lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + eps);
    }
}

struct TrainParams {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int batch = 8;
    int epochs = 100;
    std::uint64_t seed = 0;
    bool cosine_decay = true;
    // false: one random non-identity element per batch; true: every
    // non-identity element every step (|group|-1 extra passes)
    bool equiv_full_group = false;
};

struct TrainReport {
    std::vector<LossComponents> epoch_loss;
    std::vector<double> epoch_total;
    std::vector<double> val_rel_l2;  // population-space relative L2
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::string provenance;
};

struct TrainDivergence : NumericError {
    TrainReport report;
    TrainDivergence(const std::string& what, TrainReport r)
        : NumericError(what), report(std::move(r)) {}
};

namespace detail {

inline void set_normalization(SpectralOperatorModel& m, const KineticDataset& ds) {
    const int q = m.config.q();
    const std::int64_t n = ds.shape.cells();
    std::vector<double> mean(q, 0.0), var(q, 0.0);
    const double inv = 1.0 / double(2 * std::int64_t(ds.samples.size()) * n);
    for (const auto& s : ds.samples)
        for (int i = 0; i < q; ++i) {
            for (double v : s.input.channel(i)) mean[i] += v;
            for (double v : s.target.channel(i)) mean[i] += v;
        }
    for (int i = 0; i < q; ++i) mean[i] *= inv;
    for (const auto& s : ds.samples)
        for (int i = 0; i < q; ++i) {
            for (double v : s.input.channel(i)) var[i] += (v - mean[i]) * (v - mean[i]);
            for (double v : s.target.channel(i)) var[i] += (v - mean[i]) * (v - mean[i]);
        }
    m.norm_mean = mean;
    for (int i = 0; i < q; ++i)
        m.norm_scale[i] = std::max(std::sqrt(var[i] * inv), 1e-12);
}

inline double population_rel_l2(const DistributionField& pred,
                                const DistributionField& ref) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pred.data.size(); ++k) {
        const double e = pred.data[k] - ref.data[k];
        num += e * e;
        den += ref.data[k] * ref.data[k];
    }
    if (den == 0.0) throw NumericError("relative L2 against a zero-norm reference");
    return std::sqrt(num / den);
}

}  // namespace detail

/// Adam training with the composite loss; retains the best-validation
/// checkpoint. Deterministic given (datasets, weights, params) on a fixed
/// thread count.
inline TrainReport train(SpectralOperatorModel& model, const KineticDataset& train_ds,
                         const KineticDataset& val_ds, const LossWeights& lw,
                         const TrainParams& tp, const SymmetryGroup& group) {
    lw.validate();
    if (train_ds.samples.empty()) throw ConfigError("train: empty training set");
    if (train_ds.model.tag != model.config.lattice)
        throw ConfigError("train: dataset lattice does not match model");
    if (tp.batch < 1 || tp.epochs < 0) throw ConfigError("train: bad batch/epochs");

    const auto t_start = std::chrono::steady_clock::now();
    detail::set_normalization(model, train_ds);
    model.train_extent = train_ds.shape.extent;

    const VelocitySet vs = velocity_set(model.config.lattice);
    AdamState adam(model.params.size());
    std::mt19937_64 rng(tp.seed);

    TrainReport report;
    report.seed = tp.seed;
    report.provenance = train_ds.config_hash;

    std::vector<std::size_t> order(train_ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<SymmetryElement> non_identity;
    for (int k = 0; k < group.size(); ++k)
        if (k != group.identity) non_identity.push_back(group.elements[k]);

    std::vector<double> best_params = model.params;
    auto best_mean = model.norm_mean;
    auto best_scale = model.norm_scale;

    for (int epoch = 0; epoch < tp.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng() % (i + 1)]);

        const double lr =
            tp.cosine_decay
                ? tp.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * double(epoch) /
                                                double(tp.epochs)))
                : tp.lr;

        LossComponents mean_comps;
        double mean_total = 0.0;
        std::size_t steps = 0;
        for (std::size_t at = 0; at < order.size(); at += std::size_t(tp.batch)) {
            std::vector<const KineticSample*> batch;
            for (std::size_t k = at; k < std::min(at + tp.batch, order.size()); ++k)
                batch.push_back(&train_ds.samples[order[k]]);

            std::span<const SymmetryElement> elems;
            SymmetryElement sampled;
            if (lw.equiv > 0.0 && !non_identity.empty()) {
                if (tp.equiv_full_group) {
                    elems = {non_identity.data(), non_identity.size()};
                } else {
                    sampled = non_identity[rng() % non_identity.size()];
                    elems = {&sampled, 1};
                }
            }

            GradientResult g = gradients(model, batch, lw, vs, elems);
            if (!std::isfinite(g.total)) {
                report.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                        .count();
                throw TrainDivergence(
                    "training loss diverged at epoch " + std::to_string(epoch), report);
            }
            adam_step(model.params, g.grad, adam, lr, tp.beta1, tp.beta2, tp.eps);

            mean_comps.mse += g.components.mse;
            mean_comps.mom0 += g.components.mom0;
            mean_comps.mom1 += g.components.mom1;
            mean_comps.equiv += g.components.equiv;
            mean_total += g.total;
            ++steps;
        }
        const double inv_steps = steps ? 1.0 / double(steps) : 0.0;
        mean_comps.mse *= inv_steps;
        mean_comps.mom0 *= inv_steps;
        mean_comps.mom1 *= inv_steps;
        mean_comps.equiv *= inv_steps;
        report.epoch_loss.push_back(mean_comps);
        report.epoch_total.push_back(mean_total * inv_steps);

        double val = 0.0;
        if (!val_ds.samples.empty()) {
            for (const auto& s : val_ds.samples)
                val += detail::population_rel_l2(forward(model, s.input), s.target);
            val /= double(val_ds.samples.size());
        }
        report.val_rel_l2.push_back(val);
        if (val_ds.samples.empty() || val < report.best_val) {
            report.best_val = val;
            report.best_epoch = epoch;
            best_params = model.params;
            best_mean = model.norm_mean;
            best_scale = model.norm_scale;
        }
    }

    model.params = std::move(best_params);
    model.norm_mean = std::move(best_mean);
    model.norm_scale = std::move(best_scale);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

/// Autoregressive rollout: snapshots [f0, G(f0), G(G(f0)), ...].
inline Trajectory rollout(const SpectralOperatorModel& model, const DistributionField& f0,
                          int steps) {
    if (steps < 1) throw ConfigError("rollout: steps must be >= 1");
    Trajectory traj;
    traj.model = f0.model;
    traj.shape = f0.shape;
    traj.stride = 1;
    traj.t0 = 0;
    traj.provenance = "rollout";
    traj.snapshots.push_back(f0);
    for (int k = 1; k <= steps; ++k) {
        try {
            traj.snapshots.push_back(forward(model, traj.snapshots.back()));
        } catch (const NumericError&) {
            throw DivergenceError("rollout diverged at step " + std::to_string(k));
        }
    }
    return traj;
}

/// Apply spectral weights trained at a coarse resolution on a finer grid.
/// Retained modes are addressed by signed frequency, so the weights transfer
/// unchanged; higher modes pass only through the pointwise skip path.
inline DistributionField infer_at_resolution(const SpectralOperatorModel& model,
                                             const DistributionField& f) {
    if (f.model.tag != model.config.lattice)
        throw ConfigError("infer: lattice mismatch");
    for (int a = 0; a < f.shape.dims; ++a)
        if (model.train_extent[a] > 0 && f.shape.extent[a] < model.train_extent[a])
            throw ConfigError("infer: grid coarser than the training resolution");
    return forward(model, f);
}

// -- checkpoint serialization ------------------------------------------------

namespace detail {

constexpr char kCheckpointMagic[4] = {'L', 'B', 'N', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void buf_pod(std::vector<std::uint8_t>& buf, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

struct BufReader {
    const std::uint8_t* p;
    const std::uint8_t* end;
    template <typename T>
    T pod() {
        if (p + sizeof(T) > end) throw IoError("truncated checkpoint");
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
};

}  // namespace detail

/// Layout: magic "LBNC", then a CRC-protected payload of version u32,
/// lattice tag u8, width/layers/modes u32, activation u8, seed u64,
/// train extents u32 x 3, normalization stats, parameter count u64 and the
/// raw parameter vector; trailing CRC32 u32.
inline void save_checkpoint(const SpectralOperatorModel& m, const std::string& path) {
    std::vector<std::uint8_t> buf;
    detail::buf_pod(buf, detail::kCheckpointVersion);
    detail::buf_pod<std::uint8_t>(buf, m.config.lattice == LatticeTag::D2Q9 ? 0 : 1);
    detail::buf_pod<std::uint16_t>(buf, std::uint16_t(m.config.q()));
    detail::buf_pod<std::uint32_t>(buf, std::uint32_t(m.config.width));
    detail::buf_pod<std::uint32_t>(buf, std::uint32_t(m.config.layers));
    detail::buf_pod<std::uint32_t>(buf, std::uint32_t(m.config.modes));
    detail::buf_pod<std::uint8_t>(buf, std::uint8_t(m.config.activation));
    detail::buf_pod<std::uint64_t>(buf, m.seed);
    for (int a = 0; a < 3; ++a)
        detail::buf_pod<std::uint32_t>(buf, std::uint32_t(m.train_extent[a]));
    for (double v : m.norm_mean) detail::buf_pod(buf, v);
    for (double v : m.norm_scale) detail::buf_pod(buf, v);
    detail::buf_pod<std::uint64_t>(buf, m.params.size());
    const auto* pp = reinterpret_cast<const std::uint8_t*>(m.params.data());
    buf.insert(buf.end(), pp, pp + m.params.size() * sizeof(double));

    detail::Writer w(path);
    w.bytes(detail::kCheckpointMagic, 4);
    w.bytes(buf.data(), buf.size());
    w.pod<std::uint32_t>(std::uint32_t(crc32(0, buf.data(), uInt(buf.size()))));
}

inline SpectralOperatorModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::vector<std::uint8_t> all((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
    if (all.size() < 8 || std::memcmp(all.data(), detail::kCheckpointMagic, 4) != 0)
        throw IoError("bad magic: '" + path + "' is not a checkpoint");
    const std::size_t payload = all.size() - 8;
    std::uint32_t stored;
    std::memcpy(&stored, all.data() + 4 + payload, 4);
    if (stored != std::uint32_t(crc32(0, all.data() + 4, uInt(payload))))
        throw IoError("checkpoint checksum mismatch");

    detail::BufReader r{all.data() + 4, all.data() + 4 + payload};
    const auto version = r.pod<std::uint32_t>();
    if (version != detail::kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    OperatorConfig cfg;
    const auto tag = r.pod<std::uint8_t>();
    if (tag > 1) throw IoError("unknown lattice tag in checkpoint");
    cfg.lattice = tag == 0 ? LatticeTag::D2Q9 : LatticeTag::D3Q19;
    const auto q = r.pod<std::uint16_t>();
    if (q != cfg.q()) throw IoError("checkpoint Q does not match its lattice");
    cfg.width = int(r.pod<std::uint32_t>());
    cfg.layers = int(r.pod<std::uint32_t>());
    cfg.modes = int(r.pod<std::uint32_t>());
    const auto act = r.pod<std::uint8_t>();
    if (act > 1) throw IoError("unknown activation in checkpoint");
    cfg.activation = Activation(act);

    SpectralOperatorModel m;
    m.config = cfg;
    m.layout = ParamLayout(cfg);
    m.seed = r.pod<std::uint64_t>();
    for (int a = 0; a < 3; ++a) m.train_extent[a] = int(r.pod<std::uint32_t>());
    m.norm_mean.resize(q);
    m.norm_scale.resize(q);
    for (auto& v : m.norm_mean) v = r.pod<double>();
    for (auto& v : m.norm_scale) v = r.pod<double>();
    const auto nparams = r.pod<std::uint64_t>();
    if (nparams != m.layout.total)
        throw IoError("checkpoint parameter count does not match its config");
    m.params.resize(nparams);
    for (auto& v : m.params) v = r.pod<double>();
    return m;
}

}  // namespace lbno
