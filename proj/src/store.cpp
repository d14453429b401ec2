#include "qs/store.hpp"

#include <cstring>
#include <fstream>
#include <memory>

#include "qs/errors.hpp"
#include "qs/hashing.hpp"

namespace qs::store {

namespace {

// Serialization happens into a memory buffer so integrity checksums cover
// the exact bytes written.
struct Writer {
    std::string buf;

    template <typename T>
    void pod(const T& v) {
        buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
    void str(const std::string& s) {
        pod(static_cast<uint32_t>(s.size()));
        buf.append(s);
    }
    void f64s(const std::vector<double>& v) {
        pod(static_cast<uint64_t>(v.size()));
        bytes(v.data(), v.size() * sizeof(double));
    }
};

struct Reader {
    const char* p;
    const char* end;
    std::string context;

    template <typename T>
    T pod() {
        if (p + sizeof(T) > end)
            throw Error(ErrorClass::Integrity, context + ": truncated file");
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
    std::string str() {
        auto n = pod<uint32_t>();
        if (p + n > end)
            throw Error(ErrorClass::Integrity, context + ": truncated string");
        std::string s(p, p + n);
        p += n;
        return s;
    }
    std::vector<double> f64s() {
        auto n = pod<uint64_t>();
        if (p + n * sizeof(double) > end)
            throw Error(ErrorClass::Integrity, context + ": truncated array");
        std::vector<double> v(n);
        std::memcpy(v.data(), p, n * sizeof(double));
        p += n * sizeof(double);
        return v;
    }
};

void write_file(const std::filesystem::path& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorClass::Dependency, "store: cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw Error(ErrorClass::Dependency, "store: write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorClass::Dependency, "store: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

std::filesystem::path index_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".index.csv";
    return p;
}

void write_index(const std::filesystem::path& path, const std::vector<std::string>& ids) {
    std::ofstream out(index_path(path), std::ios::trunc);
    out << "record,motion_id\n";
    for (size_t i = 0; i < ids.size(); ++i) out << i << "," << ids[i] << "\n";
}

std::vector<std::string> read_index(const std::filesystem::path& path, size_t count) {
    std::vector<std::string> ids(count);
    std::ifstream in(index_path(path));
    if (!in) {
        for (size_t i = 0; i < count; ++i) ids[i] = "rec" + std::to_string(i);
        return ids;
    }
    std::string line;
    std::getline(in, line); // header
    size_t row = 0;
    while (std::getline(in, line) && row < count) {
        auto comma = line.find(',');
        if (comma != std::string::npos) ids[row] = line.substr(comma + 1);
        ++row;
    }
    return ids;
}

constexpr uint32_t kStoreVersion = 1;

} // namespace

void save_waveforms(const std::filesystem::path& path,
                    const std::vector<signals::Waveform>& waveforms) {
    uint64_t n_steps = waveforms.empty() ? 0 : waveforms[0].samples.size();
    double dt = waveforms.empty() ? 0.0 : waveforms[0].dt_s;
    for (const auto& w : waveforms)
        if (w.samples.size() != n_steps || w.dt_s != dt)
            throw Error(ErrorClass::Domain, "save_waveforms: non-uniform shapes");

    Writer w;
    w.bytes("QSWF", 4);
    w.pod(kStoreVersion);
    w.pod(static_cast<uint64_t>(waveforms.size()));
    w.pod(n_steps);
    w.pod(dt);
    std::vector<float> rec(n_steps);
    std::vector<std::string> ids;
    ids.reserve(waveforms.size());
    for (const auto& wf : waveforms) {
        for (size_t i = 0; i < n_steps; ++i) rec[i] = static_cast<float>(wf.samples[i]);
        w.bytes(rec.data(), rec.size() * sizeof(float));
        ids.push_back(wf.id);
    }
    write_file(path, w.buf);
    write_index(path, ids);
}

std::vector<signals::Waveform> load_waveforms(const std::filesystem::path& path) {
    std::string buf = read_file(path);
    if (buf.size() < 4 + sizeof(uint32_t) + 2 * sizeof(uint64_t) + sizeof(double) ||
        std::memcmp(buf.data(), "QSWF", 4) != 0)
        throw Error(ErrorClass::Format, "load_waveforms: bad magic in " + path.string());
    Reader r{buf.data() + 4, buf.data() + buf.size(), "load_waveforms"};
    auto version = r.pod<uint32_t>();
    if (version != kStoreVersion)
        throw Error(ErrorClass::Format, "load_waveforms: unsupported version");
    auto count = r.pod<uint64_t>();
    auto n_steps = r.pod<uint64_t>();
    auto dt = r.pod<double>();

    size_t expected = 4 + sizeof(uint32_t) + 2 * sizeof(uint64_t) + sizeof(double) +
                      count * n_steps * sizeof(float);
    if (buf.size() != expected)
        throw Error(ErrorClass::Integrity,
                    "load_waveforms: size mismatch (corrupt or truncated) in " + path.string());

    auto ids = read_index(path, count);
    std::vector<signals::Waveform> out(count);
    for (uint64_t i = 0; i < count; ++i) {
        out[i].dt_s = dt;
        out[i].id = ids[i];
        out[i].samples.resize(n_steps);
        for (uint64_t t = 0; t < n_steps; ++t) {
            float f;
            std::memcpy(&f, r.p, sizeof(float));
            r.p += sizeof(float);
            out[i].samples[t] = static_cast<double>(f);
        }
    }
    return out;
}

void save_histories(const std::filesystem::path& path,
                    const std::vector<HistoryRecord>& records, double dt_s) {
    uint64_t channels = records.empty() ? 0 : records[0].channels.size();
    uint64_t steps = records.empty() || channels == 0 ? 0 : records[0].channels[0].size();
    for (const auto& rec : records) {
        if (rec.channels.size() != channels)
            throw Error(ErrorClass::Domain, "save_histories: non-uniform channel count");
        for (const auto& c : rec.channels)
            if (c.size() != steps)
                throw Error(ErrorClass::Domain, "save_histories: non-uniform length");
    }

    Writer w;
    w.bytes("QSRH", 4);
    w.pod(kStoreVersion);
    w.pod(static_cast<uint64_t>(records.size()));
    w.pod(channels);
    w.pod(steps);
    w.pod(dt_s);
    std::vector<float> buf(steps);
    std::vector<std::string> ids;
    for (const auto& rec : records) {
        ids.push_back(rec.id);
        for (const auto& c : rec.channels) {
            for (size_t i = 0; i < steps; ++i) buf[i] = static_cast<float>(c[i]);
            w.bytes(buf.data(), buf.size() * sizeof(float));
        }
    }
    write_file(path, w.buf);
    write_index(path, ids);
}

HistoryStore load_histories(const std::filesystem::path& path) {
    std::string buf = read_file(path);
    if (buf.size() < 4 || std::memcmp(buf.data(), "QSRH", 4) != 0)
        throw Error(ErrorClass::Format, "load_histories: bad magic in " + path.string());
    Reader r{buf.data() + 4, buf.data() + buf.size(), "load_histories"};
    auto version = r.pod<uint32_t>();
    if (version != kStoreVersion)
        throw Error(ErrorClass::Format, "load_histories: unsupported version");
    auto count = r.pod<uint64_t>();
    auto channels = r.pod<uint64_t>();
    auto steps = r.pod<uint64_t>();
    HistoryStore store;
    store.dt_s = r.pod<double>();

    size_t expected = 4 + sizeof(uint32_t) + 3 * sizeof(uint64_t) + sizeof(double) +
                      count * channels * steps * sizeof(float);
    if (buf.size() != expected)
        throw Error(ErrorClass::Integrity,
                    "load_histories: size mismatch (corrupt or truncated) in " + path.string());

    auto ids = read_index(path, count);
    store.records.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        store.records[i].id = ids[i];
        store.records[i].channels.assign(channels, std::vector<double>(steps));
        for (uint64_t c = 0; c < channels; ++c) {
            for (uint64_t t = 0; t < steps; ++t) {
                float f;
                std::memcpy(&f, r.p, sizeof(float));
                r.p += sizeof(float);
                store.records[i].channels[c][t] = static_cast<double>(f);
            }
        }
    }
    return store;
}

namespace {

void write_tensor(Writer& w, const net::Tensor& t) {
    w.str(t.name);
    w.pod(static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) w.pod(static_cast<int32_t>(d));
    w.pod(static_cast<uint8_t>(t.band.has_value()));
    if (t.band) {
        w.pod(static_cast<int32_t>(t.band->past));
        w.pod(static_cast<int32_t>(t.band->future));
    }
    w.pod(static_cast<uint8_t>(t.trainable));
    w.f64s(t.value);
}

constexpr uint32_t kCheckpointVersion = 1;

} // namespace

void save_checkpoint(const std::filesystem::path& path, const net::MaskedNetwork& network,
                     const net::Adam* adam, const CheckpointExtras& extras) {
    Writer w;
    w.bytes("QSCK", 4);
    w.pod(kCheckpointVersion);
    const auto& cfg = network.config();
    w.pod(static_cast<int32_t>(cfg.t_step));
    w.pod(static_cast<int32_t>(cfg.band.past));
    w.pod(static_cast<int32_t>(cfg.band.future));
    w.pod(static_cast<int32_t>(cfg.response_channels));
    w.pod(static_cast<int32_t>(cfg.single_channel_layers));
    w.pod(static_cast<int32_t>(cfg.backbone_layers));
    w.pod(static_cast<int32_t>(cfg.n_floors));
    w.pod(static_cast<int32_t>(cfg.conv_kernel));
    w.pod(static_cast<uint8_t>(network.has_head()));
    w.pod(extras.config_hash);

    w.pod(extras.norm_stats.input_scale);
    w.pod(static_cast<uint32_t>(extras.norm_stats.response_scales.size()));
    for (double s : extras.norm_stats.response_scales) w.pod(s);

    w.f64s(extras.curves.train);
    w.f64s(extras.curves.val);
    w.pod(static_cast<int32_t>(extras.curves.best_epoch));

    auto params = network.parameters();
    w.pod(static_cast<uint32_t>(params.size()));
    for (const net::Tensor* t : params) write_tensor(w, *t);

    w.pod(static_cast<uint8_t>(adam != nullptr));
    if (adam) {
        w.pod(static_cast<int64_t>(adam->step_count()));
        for (const auto& m : adam->moment1()) w.f64s(m);
        for (const auto& v : adam->moment2()) w.f64s(v);
    }

    w.pod(hash_string(w.buf));
    write_file(path, w.buf);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::string buf = read_file(path);
    if (buf.size() < 4 + sizeof(uint32_t) + sizeof(uint64_t) ||
        std::memcmp(buf.data(), "QSCK", 4) != 0)
        throw Error(ErrorClass::Format, "load_checkpoint: bad magic in " + path.string());

    uint64_t stored_sum;
    std::memcpy(&stored_sum, buf.data() + buf.size() - sizeof(uint64_t), sizeof(uint64_t));
    if (hash_bytes(buf.data(), buf.size() - sizeof(uint64_t)) != stored_sum)
        throw Error(ErrorClass::Integrity,
                    "load_checkpoint: checksum mismatch in " + path.string());

    Reader r{buf.data() + 4, buf.data() + buf.size() - sizeof(uint64_t), "load_checkpoint"};
    auto version = r.pod<uint32_t>();
    if (version != kCheckpointVersion)
        throw Error(ErrorClass::Format, "load_checkpoint: unsupported version");

    LoadedCheckpoint out;
    out.config.t_step = r.pod<int32_t>();
    out.config.band.past = r.pod<int32_t>();
    out.config.band.future = r.pod<int32_t>();
    out.config.response_channels = r.pod<int32_t>();
    out.config.single_channel_layers = r.pod<int32_t>();
    out.config.backbone_layers = r.pod<int32_t>();
    out.config.n_floors = r.pod<int32_t>();
    out.config.conv_kernel = r.pod<int32_t>();
    out.has_head = r.pod<uint8_t>() != 0;
    out.extras.config_hash = r.pod<uint64_t>();

    out.extras.norm_stats.input_scale = r.pod<double>();
    auto n_scales = r.pod<uint32_t>();
    out.extras.norm_stats.response_scales.resize(n_scales);
    for (auto& s : out.extras.norm_stats.response_scales) s = r.pod<double>();

    out.extras.curves.train = r.f64s();
    out.extras.curves.val = r.f64s();
    out.extras.curves.best_epoch = r.pod<int32_t>();

    out.network = std::make_unique<net::MaskedNetwork>(out.config, /*init_seed=*/0);
    if (out.has_head) out.network->attach_head(/*init_seed=*/0);
    auto params = out.network->parameters();

    auto tensor_count = r.pod<uint32_t>();
    if (tensor_count != params.size())
        throw Error(ErrorClass::Compatibility,
                    "load_checkpoint: tensor count mismatch in " + path.string());
    for (net::Tensor* t : params) {
        auto name = r.str();
        if (name != t->name)
            throw Error(ErrorClass::Compatibility,
                        "load_checkpoint: tensor order mismatch at " + name);
        auto ndim = r.pod<uint32_t>();
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = r.pod<int32_t>();
        if (shape != t->shape)
            throw Error(ErrorClass::Compatibility,
                        "load_checkpoint: shape mismatch for " + name);
        bool has_band = r.pod<uint8_t>() != 0;
        if (has_band != t->band.has_value())
            throw Error(ErrorClass::Compatibility,
                        "load_checkpoint: band metadata mismatch for " + name);
        if (has_band) {
            int past = r.pod<int32_t>();
            int future = r.pod<int32_t>();
            if (past != t->band->past || future != t->band->future)
                throw Error(ErrorClass::Compatibility,
                            "load_checkpoint: band mismatch for " + name);
        }
        t->trainable = r.pod<uint8_t>() != 0;
        auto value = r.f64s();
        if (value.size() != t->value.size())
            throw Error(ErrorClass::Compatibility,
                        "load_checkpoint: value size mismatch for " + name);
        t->value = std::move(value);
        t->zero_grad();
    }

    out.has_adam = r.pod<uint8_t>() != 0;
    if (out.has_adam) {
        out.adam_step = r.pod<int64_t>();
        out.adam_m.resize(params.size());
        out.adam_v.resize(params.size());
        for (auto& m : out.adam_m) m = r.f64s();
        for (auto& v : out.adam_v) v = r.f64s();
    }
    return out;
}

} // namespace qs::store
