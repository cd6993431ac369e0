#include "manifest.hpp"

#include <fstream>

#include "geoalign/digest.hpp"
#include "geoalign/errors.hpp"

namespace geoalign::cli {

Manifest::Manifest(std::string command) {
    doc_["tool"] = "geoalign";
    doc_["version"] = GEOALIGN_VERSION;
    doc_["command"] = std::move(command);
    doc_["inputs"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::object();
    doc_["stages"] = nlohmann::json::array();
}

void Manifest::add_input(const std::filesystem::path& path) {
    doc_["inputs"][path.string()] = sha256_file(path);
}

void Manifest::add_output(const std::filesystem::path& path) {
    doc_["outputs"][path.filename().string()] = sha256_file(path);
}

void Manifest::stage(const std::string& name, double seconds) {
    doc_["stages"].push_back({{"name", name}, {"seconds", seconds}});
}

std::filesystem::path Manifest::write(const std::filesystem::path& dir) const {
    const auto path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
    return path;
}

} // namespace geoalign::cli
