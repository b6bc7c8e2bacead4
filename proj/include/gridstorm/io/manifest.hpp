#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gridstorm/io/config.hpp"

namespace gridstorm {

inline constexpr const char* kToolVersion = "0.1.0";

/// Seconds since the epoch; SOURCE_DATE_EPOCH wins when set so that
/// reproducible builds of the manifest are possible.
inline std::int64_t manifest_clock() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0') return v;
    }
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

inline std::string iso8601_utc(std::int64_t secs) {
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// FNV-1a of a file's bytes.
inline std::uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_path;
    std::uint64_t config_file_hash = 0;
    std::uint64_t grid_hash = 0;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::uint64_t> stage_streams;
    std::int64_t started = 0;
    std::int64_t finished = 0;
    std::vector<std::string> outputs;  ///< file names relative to the output directory
    int exit_code = 0;

    [[nodiscard]] json to_json() const {
        json doc;
        doc["tool"] = "gridstorm";
        doc["version"] = kToolVersion;
        doc["command"] = command;
        doc["argv"] = argv;
        doc["config"] = {{"path", config_path}, {"file_hash", hex64(config_file_hash)}, {"grid_hash", hex64(grid_hash)}};
        json streams = json::object();
        for (const auto& [stage, id] : stage_streams) streams[stage] = id;
        doc["seeds"] = {{"master", master_seed}, {"streams", streams}};
        doc["started"] = iso8601_utc(started);
        doc["finished"] = iso8601_utc(finished);
        doc["outputs"] = outputs;
        doc["exit_code"] = exit_code;
        return doc;
    }
};

/// Writes `text` to `path` through a sibling temporary and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

/// Writes manifest.json into `dir`. Every listed output must exist.
inline void write_manifest(const std::filesystem::path& dir, RunManifest m) {
    for (const auto& name : m.outputs)
        if (!std::filesystem::exists(dir / name))
            throw IoError("manifest lists missing output " + (dir / name).string());
    m.finished = manifest_clock();
    write_file_atomic(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

}  // namespace gridstorm
