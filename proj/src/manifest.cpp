#include "qs/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "qs/errors.hpp"
#include "qs/hashing.hpp"

namespace qs::pipeline {

using nlohmann::json;

Manifest Manifest::load_or_create(const std::filesystem::path& out_dir) {
    Manifest m;
    m.out_dir_ = out_dir;
    m.path_ = out_dir / "manifest.json";
    if (!std::filesystem::exists(m.path_)) return m;

    std::ifstream in(m.path_);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(ErrorClass::Format, "manifest: parse failure: " + std::string(e.what()));
    }
    for (const auto& jr : doc["stages"]) {
        StageRecord rec;
        rec.stage = jr.at("stage").get<std::string>();
        rec.config_hash = std::stoull(jr.at("config_hash").get<std::string>(), nullptr, 16);
        rec.seed = jr.at("seed").get<uint64_t>();
        rec.wall_time_s = jr.at("wall_time_s").get<double>();
        rec.timestamp = jr.value("timestamp", "");
        for (auto& [k, v] : jr.at("inputs").items()) rec.inputs[k] = v.get<std::string>();
        for (auto& [k, v] : jr.at("outputs").items()) rec.outputs[k] = v.get<std::string>();
        if (jr.contains("info"))
            for (auto& [k, v] : jr.at("info").items()) rec.info[k] = v.get<std::string>();
        m.records_.push_back(std::move(rec));
    }
    return m;
}

void Manifest::record(StageRecord rec) {
    records_.push_back(std::move(rec));
    save();
}

const StageRecord* Manifest::find(const std::string& stage) const {
    const StageRecord* latest = nullptr;
    for (const auto& r : records_)
        if (r.stage == stage) latest = &r;
    return latest;
}

const StageRecord& Manifest::require(const std::string& stage,
                                     uint64_t current_config_hash) const {
    const StageRecord* rec = find(stage);
    if (!rec)
        throw Error(ErrorClass::Dependency,
                    "stage '" + stage + "' has not been run (missing upstream artifact)");
    if (rec->config_hash != current_config_hash)
        throw Error(ErrorClass::Staleness,
                    "stage '" + stage + "' was produced with a different configuration");
    for (const auto& [file, hash] : rec->outputs) {
        std::filesystem::path p = out_dir_ / file;
        if (!std::filesystem::exists(p))
            throw Error(ErrorClass::Dependency,
                        "stage '" + stage + "': missing artifact " + file);
        if (hash_hex(hash_file(p)) != hash)
            throw Error(ErrorClass::Staleness,
                        "stage '" + stage + "': artifact " + file + " changed on disk");
    }
    return *rec;
}

void Manifest::save() const {
    json doc;
    doc["format"] = "qs-manifest";
    doc["version"] = 1;
    json stages = json::array();
    for (const auto& r : records_) {
        json jr;
        jr["stage"] = r.stage;
        jr["config_hash"] = hash_hex(r.config_hash);
        jr["seed"] = r.seed;
        jr["wall_time_s"] = r.wall_time_s;
        jr["timestamp"] = r.timestamp;
        jr["inputs"] = json(r.inputs);
        jr["outputs"] = json(r.outputs);
        jr["info"] = json(r.info);
        stages.push_back(jr);
    }
    doc["stages"] = stages;
    std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::trunc);
    out << doc.dump(2) << "\n";
}

} // namespace qs::pipeline
