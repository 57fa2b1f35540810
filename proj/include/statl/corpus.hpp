#pragma once

// Loader for the bundled program corpus.  The manifest is a JSON array of
// {name, file, kind, digest} entries; file paths are relative to the
// manifest's directory.

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace statl {

struct CorpusEntry {
    std::string name;
    std::string file;    // relative to the manifest directory
    std::string kind;    // expected kind of the program ("p1")
    std::string digest;  // canonical-print digest
};

inline std::vector<CorpusEntry> corpus_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open corpus manifest " + manifest_path);
    nlohmann::json doc = nlohmann::json::parse(in);
    std::vector<CorpusEntry> out;
    for (const auto& e : doc) {
        CorpusEntry entry;
        entry.name = e.at("name").get<std::string>();
        entry.file = e.at("file").get<std::string>();
        entry.kind = e.at("kind").get<std::string>();
        entry.digest = e.at("digest").get<std::string>();
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace statl
