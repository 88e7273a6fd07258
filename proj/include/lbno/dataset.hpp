#pragma once

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "lbno/solver.hpp"

namespace lbno {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

enum class DType : std::uint8_t { F64 = 0, F32 = 1 };

/// One supervised pair: state at t_in mapped to the state jump steps later.
struct KineticSample {
    DistributionField input;
    DistributionField target;
    std::int64_t t_in = 0;
    std::uint32_t jump = 0;
};

struct KineticDataset {
    LatticeModel model;
    GridShape shape;
    std::uint32_t jump = 0;
    std::vector<KineticSample> samples;
    // provenance travels in a JSON sidecar, not the binary payload
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string split_tag;

    std::size_t size() const { return samples.size(); }
};

/// Sliding-window pairs over all valid offsets; jump must be a multiple of
/// the trajectory stride.
inline KineticDataset generate(const Trajectory& traj, std::uint32_t jump) {
    if (traj.stride < 1) throw ConfigError("trajectory stride must be >= 1");
    if (jump % std::uint32_t(traj.stride) != 0)
        throw ConfigError("jump must be a multiple of the trajectory stride");
    const std::size_t m = jump / traj.stride;
    KineticDataset ds;
    ds.model = traj.model;
    ds.shape = traj.shape;
    ds.jump = jump;
    ds.config_hash = traj.provenance;
    for (std::size_t k = 0; k + m < traj.snapshots.size(); ++k)
        ds.samples.push_back(
            {traj.snapshots[k], traj.snapshots[k + m], traj.time_of(k), jump});
    return ds;
}

/// Deterministic shuffled split. Boundaries are cumulative floors of the
/// fractions, so remainders fall into the later splits:
/// 496 -> 396/50/50, 2000 -> 1600/200/200.
inline std::array<KineticDataset, 3> split(const KineticDataset& ds,
                                           std::array<double, 3> fractions,
                                           std::uint64_t seed) {
    if (ds.samples.empty()) throw ConfigError("cannot split an empty dataset");
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9 || fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0)
        throw ConfigError("split fractions must be non-negative and sum to 1");

    const std::size_t n = ds.samples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    // explicit Fisher-Yates so the shuffle is stable across standard libraries
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = std::size_t(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }

    const std::size_t b1 = std::size_t(std::floor(fractions[0] * double(n)));
    const std::size_t b2 = std::size_t(std::floor((fractions[0] + fractions[1]) * double(n)));

    std::array<KineticDataset, 3> out;
    const char* tags[3] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
        out[s].model = ds.model;
        out[s].shape = ds.shape;
        out[s].jump = ds.jump;
        out[s].config_hash = ds.config_hash;
        out[s].seed = seed;
        out[s].split_tag = tags[s];
    }
    for (std::size_t k = 0; k < n; ++k) {
        int s = k < b1 ? 0 : (k < b2 ? 1 : 2);
        out[s].samples.push_back(ds.samples[order[k]]);
    }
    return out;
}

namespace detail {

constexpr char kDatasetMagic[4] = {'L', 'B', 'N', 'O'};
constexpr std::uint32_t kDatasetVersion = 1;

struct Writer {
    std::ofstream os;
    explicit Writer(const std::string& path) : os(path, std::ios::binary) {
        if (!os) throw IoError("cannot open '" + path + "' for writing");
    }
    void bytes(const void* p, std::size_t len) {
        os.write(static_cast<const char*>(p), std::streamsize(len));
        if (!os) throw IoError("write failure");
    }
    template <typename T>
    void pod(T v) {
        bytes(&v, sizeof(T));
    }
};

struct Reader {
    std::ifstream is;
    explicit Reader(const std::string& path) : is(path, std::ios::binary) {
        if (!is) throw IoError("cannot open '" + path + "' for reading");
    }
    void bytes(void* p, std::size_t len) {
        is.read(static_cast<char*>(p), std::streamsize(len));
        if (std::size_t(is.gcount()) != len) throw IoError("truncated file");
    }
    template <typename T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
};

inline void append_field_bytes(std::vector<std::uint8_t>& buf, const DistributionField& f,
                               DType dtype) {
    if (dtype == DType::F64) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(f.data.data());
        buf.insert(buf.end(), p, p + f.data.size() * sizeof(double));
    } else {
        std::vector<float> tmp(f.data.begin(), f.data.end());
        const auto* p = reinterpret_cast<const std::uint8_t*>(tmp.data());
        buf.insert(buf.end(), p, p + tmp.size() * sizeof(float));
    }
}

inline void read_field_values(Reader& r, DistributionField& f, DType dtype,
                              std::vector<std::uint8_t>& raw) {
    const std::size_t count = f.data.size();
    const std::size_t bytes = count * (dtype == DType::F64 ? 8 : 4);
    const std::size_t at = raw.size();
    raw.resize(at + bytes);
    r.bytes(raw.data() + at, bytes);
    if (dtype == DType::F64) {
        std::memcpy(f.data.data(), raw.data() + at, bytes);
    } else {
        std::vector<float> tmp(count);
        std::memcpy(tmp.data(), raw.data() + at, bytes);
        for (std::size_t k = 0; k < count; ++k) f.data[k] = double(tmp[k]);
    }
}

}  // namespace detail

/// Binary layout (little-endian): magic "LBNO", version u32, model tag u8,
/// dims u8, extents u32 x dims, Q u16, dtype u8, jump u32, sample count u64;
/// then per sample: t_in u64, input payload, target payload, CRC32 u32 over
/// the sample's bytes.
inline void save(const KineticDataset& ds, const std::string& path,
                 DType dtype = DType::F64) {
    detail::Writer w(path);
    w.bytes(detail::kDatasetMagic, 4);
    w.pod<std::uint32_t>(detail::kDatasetVersion);
    w.pod<std::uint8_t>(ds.model.tag == LatticeTag::D2Q9 ? 0 : 1);
    w.pod<std::uint8_t>(std::uint8_t(ds.shape.dims));
    for (int a = 0; a < ds.shape.dims; ++a) w.pod<std::uint32_t>(ds.shape.extent[a]);
    w.pod<std::uint16_t>(std::uint16_t(ds.model.q));
    w.pod<std::uint8_t>(std::uint8_t(dtype));
    w.pod<std::uint32_t>(ds.jump);
    w.pod<std::uint64_t>(ds.samples.size());

    std::vector<std::uint8_t> buf;
    for (const auto& s : ds.samples) {
        buf.clear();
        std::uint64_t t_in = std::uint64_t(s.t_in);
        const auto* tp = reinterpret_cast<const std::uint8_t*>(&t_in);
        buf.insert(buf.end(), tp, tp + 8);
        detail::append_field_bytes(buf, s.input, dtype);
        detail::append_field_bytes(buf, s.target, dtype);
        w.bytes(buf.data(), buf.size());
        w.pod<std::uint32_t>(std::uint32_t(crc32(0, buf.data(), uInt(buf.size()))));
    }
}

inline KineticDataset load(const std::string& path) {
    detail::Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, detail::kDatasetMagic, 4) != 0)
        throw IoError("bad magic: '" + path + "' is not a dataset file");
    const auto version = r.pod<std::uint32_t>();
    if (version != detail::kDatasetVersion)
        throw IoError("unsupported dataset version " + std::to_string(version));

    KineticDataset ds;
    const auto tag = r.pod<std::uint8_t>();
    if (tag > 1) throw IoError("unknown lattice tag in dataset header");
    ds.model = LatticeModel::from_tag(tag == 0 ? LatticeTag::D2Q9 : LatticeTag::D3Q19);
    const auto dims = r.pod<std::uint8_t>();
    if (dims != ds.model.dimension) throw IoError("dims/model mismatch in dataset header");
    ds.shape.dims = dims;
    ds.shape.extent = {1, 1, 1};
    for (int a = 0; a < dims; ++a) ds.shape.extent[a] = int(r.pod<std::uint32_t>());
    const auto q = r.pod<std::uint16_t>();
    if (q != ds.model.q) throw IoError("Q/model mismatch in dataset header");
    const auto dtype_raw = r.pod<std::uint8_t>();
    if (dtype_raw > 1) throw IoError("unknown dtype in dataset header");
    const DType dtype = DType(dtype_raw);
    ds.jump = r.pod<std::uint32_t>();
    const auto count = r.pod<std::uint64_t>();

    std::vector<std::uint8_t> raw;
    for (std::uint64_t k = 0; k < count; ++k) {
        raw.clear();
        KineticSample s;
        s.jump = ds.jump;
        std::uint64_t t_in;
        r.bytes(&t_in, 8);
        const auto* tp = reinterpret_cast<const std::uint8_t*>(&t_in);
        raw.insert(raw.end(), tp, tp + 8);
        s.t_in = std::int64_t(t_in);
        s.input = DistributionField(ds.model, ds.shape);
        s.target = DistributionField(ds.model, ds.shape);
        detail::read_field_values(r, s.input, dtype, raw);
        detail::read_field_values(r, s.target, dtype, raw);
        const auto stored = r.pod<std::uint32_t>();
        const auto computed = std::uint32_t(crc32(0, raw.data(), uInt(raw.size())));
        if (stored != computed)
            throw IoError("checksum mismatch in sample " + std::to_string(k));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

/// A trajectory is stored as the dataset of its consecutive snapshot pairs
/// (jump == stride), so one container format covers both file roles.
inline void save_trajectory(const Trajectory& traj, const std::string& path,
                            DType dtype = DType::F64) {
    KineticDataset ds = generate(traj, std::uint32_t(traj.stride));
    save(ds, path, dtype);
}

inline Trajectory load_trajectory(const std::string& path) {
    KineticDataset ds = load(path);
    Trajectory traj;
    traj.model = ds.model;
    traj.shape = ds.shape;
    traj.stride = int(ds.jump);
    traj.provenance = ds.config_hash;
    if (ds.samples.empty()) return traj;
    traj.t0 = ds.samples.front().t_in;
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        if (ds.samples[k].t_in != traj.t0 + std::int64_t(k) * traj.stride)
            throw IoError("file does not hold a contiguous trajectory");
        traj.snapshots.push_back(ds.samples[k].input);
    }
    traj.snapshots.push_back(ds.samples.back().target);
    return traj;
}

inline std::uint32_t file_crc32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::vector<char> buf(1 << 16);
    uLong crc = crc32(0, nullptr, 0);
    while (is) {
        is.read(buf.data(), std::streamsize(buf.size()));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), uInt(is.gcount()));
    }
    return std::uint32_t(crc);
}

}  // namespace lbno
