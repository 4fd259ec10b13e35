#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hkfr/instruction_builder.hpp"
#include "hkfr/jsonl.hpp"
#include "hkfr/sha256.hpp"

namespace hkfr {

struct BackendConfig {
    std::string kind = "mock";  // "mock" | "http"
    std::string endpoint;       // required for http
    std::string model_name = "mock";
};

struct RunConfig {
    std::string store_path = "store";
    BackendConfig backend;
    std::size_t concurrency = 4;
    std::size_t sequence_cap = 300;
    std::int64_t cutoff_timestamp = 0;
    std::vector<std::size_t> ks = {5, 10};
    Variant variant = Variant::full;
    std::uint64_t seed = 0;
};

inline void validate_config(const RunConfig& c) {
    if (c.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
    if (c.sequence_cap < 1) throw std::invalid_argument("sequence_cap must be >= 1");
    if (c.backend.kind != "mock" && c.backend.kind != "http") {
        throw std::invalid_argument("backend.kind must be mock or http");
    }
    if (c.backend.kind == "http" && c.backend.endpoint.empty()) {
        throw std::invalid_argument("http backend requires an endpoint");
    }
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["store_path"] = c.store_path;
    j["backend"] = {{"kind", c.backend.kind},
                    {"endpoint", c.backend.endpoint},
                    {"model_name", c.backend.model_name}};
    j["concurrency"] = c.concurrency;
    j["sequence_cap"] = c.sequence_cap;
    j["cutoff_timestamp"] = c.cutoff_timestamp;
    j["ks"] = c.ks;
    j["variant"] = to_string(c.variant);
    j["seed"] = c.seed;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.store_path = j.value("store_path", c.store_path);
    if (j.contains("backend")) {
        const json& b = j.at("backend");
        c.backend.kind = b.value("kind", c.backend.kind);
        c.backend.endpoint = b.value("endpoint", c.backend.endpoint);
        c.backend.model_name = b.value("model_name", c.backend.model_name);
    }
    c.concurrency = j.value("concurrency", c.concurrency);
    c.sequence_cap = j.value("sequence_cap", c.sequence_cap);
    c.cutoff_timestamp = j.value("cutoff_timestamp", c.cutoff_timestamp);
    if (j.contains("ks")) c.ks = j.at("ks").get<std::vector<std::size_t>>();
    if (j.contains("variant")) {
        auto v = parse_variant(j.at("variant").get<std::string>());
        if (!v) throw std::invalid_argument("bad variant in config");
        c.variant = *v;
    }
    c.seed = j.value("seed", c.seed);
    validate_config(c);
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    json j = json::parse(read_file_bytes(path), nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("config is not valid JSON: " + path.string());
    return config_from_json(j);
}

inline std::string config_digest(const RunConfig& c) {
    return sha256_hex(config_to_json(c).dump());
}

}  // namespace hkfr
