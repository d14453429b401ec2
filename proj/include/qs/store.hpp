#ifndef QS_STORE_HPP
#define QS_STORE_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "qs/masked_net.hpp"
#include "qs/waveform.hpp"

namespace qs::store {

// Binary waveform store: "QSWF" magic, version, count, n_steps, dt, then
// count records of n_steps little-endian float32. Motion ids live in a
// sidecar CSV "<path>.index.csv".
void save_waveforms(const std::filesystem::path& path,
                    const std::vector<signals::Waveform>& waveforms);
std::vector<signals::Waveform> load_waveforms(const std::filesystem::path& path);

// Response-history store: "QSRH" magic, then records of [channels x steps]
// float32 with shared dt. Record ids in "<path>.index.csv".
struct HistoryRecord {
    std::string id;
    std::vector<std::vector<double>> channels; // [channel][step]
};

void save_histories(const std::filesystem::path& path,
                    const std::vector<HistoryRecord>& records, double dt_s);
struct HistoryStore {
    double dt_s = 0.0;
    std::vector<HistoryRecord> records;
};
HistoryStore load_histories(const std::filesystem::path& path);

// Network checkpoint: "QSCK" magic, config block, named tensors with band
// metadata and trainability flags (float64), optional Adam state,
// normalization stats, config hash, loss curves, FNV-1a integrity footer.
struct CheckpointExtras {
    signals::NormalizationStats norm_stats;
    uint64_t config_hash = 0;
    net::TrainCurves curves;
};

void save_checkpoint(const std::filesystem::path& path, const net::MaskedNetwork& network,
                     const net::Adam* adam, const CheckpointExtras& extras);

struct LoadedCheckpoint {
    net::NetworkConfig config;
    bool has_head = false;
    std::unique_ptr<net::MaskedNetwork> network;
    // Adam state aligned with network->parameters() order; empty when absent.
    std::vector<std::vector<double>> adam_m, adam_v;
    int64_t adam_step = 0;
    bool has_adam = false;
    CheckpointExtras extras;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace qs::store

#endif // QS_STORE_HPP
