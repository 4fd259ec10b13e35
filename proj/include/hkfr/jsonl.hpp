#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hkfr {

using json = nlohmann::json;

class JsonlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads a UTF-8 line-delimited JSON file. Blank lines are skipped;
// a malformed line is a hard error carrying path and line number.
inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw JsonlError("cannot open " + path.string());
    }
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw JsonlError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed JSON record");
        }
        records.push_back(std::move(j));
    }
    return records;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw JsonlError("cannot write " + path.string());
    }
    for (const auto& j : records) {
        out << j.dump() << '\n';
    }
    out.flush();
    if (!out) {
        throw JsonlError("write failed for " + path.string());
    }
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw JsonlError("cannot open " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace hkfr
