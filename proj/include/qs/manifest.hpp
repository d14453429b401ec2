#ifndef QS_MANIFEST_HPP
#define QS_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qs::pipeline {

struct StageRecord {
    std::string stage;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::map<std::string, std::string> inputs;  // path -> hash hex
    std::map<std::string, std::string> outputs; // path -> hash hex
    std::map<std::string, std::string> info;    // free-form stage metadata
    double wall_time_s = 0.0;
    std::string timestamp;
};

// Append-only JSON run manifest; one latest record per stage is authoritative.
class Manifest {
public:
    static Manifest load_or_create(const std::filesystem::path& out_dir);

    void record(StageRecord rec);
    const StageRecord* find(const std::string& stage) const;

    // Dependency gate: the stage must exist, carry the same config hash, and
    // its outputs must still match their recorded hashes.
    const StageRecord& require(const std::string& stage, uint64_t current_config_hash) const;

    void save() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::filesystem::path out_dir_;
    std::vector<StageRecord> records_;
};

} // namespace qs::pipeline

#endif // QS_MANIFEST_HPP
