#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace geoalign::cli {

// Run manifest: config echo, stage timings, and the SHA-256 of every file read or written.
class Manifest {
public:
    explicit Manifest(std::string command);

    void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }
    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    void stage(const std::string& name, double seconds);

    // Writes manifest.json into dir (the manifest itself is not listed).
    std::filesystem::path write(const std::filesystem::path& dir) const;

private:
    nlohmann::json doc_;
};

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace geoalign::cli
