#pragma once

#include <ctime>
#include <map>
#include <string>
#include <vector>

#include "hkfr/behavior.hpp"
#include "hkfr/chat_client.hpp"
#include "hkfr/facets.hpp"
#include "hkfr/prompt_engine.hpp"
#include "hkfr/text_util.hpp"

namespace hkfr {

// Fixed fusion prompt; keeping it constant keeps prompt_sha256 stable.
inline constexpr const char* kFusionSystemPrompt =
    "Summarize this user's dining preferences: top categories, price range, favorite merchants, "
    "usage scenarios.";

inline constexpr const char* kEmptyBehaviorSentinel = "no recorded behavior";

struct Provenance {
    std::string backend_id;
    std::string model_name;
    std::string prompt_sha256;
    std::int64_t created_at = 0;
    std::string input_sha256;  // digest of the behavior sequence, the cache key
};

struct KnowledgeDocument {
    std::string user_id;
    std::string text;
    FacetSummary facets;
    Provenance provenance;
};

class FusionError : public std::runtime_error {
public:
    FusionError(std::string user_id, const std::string& why)
        : std::runtime_error("fusion failed for user " + user_id + ": " + why),
          user_id_(std::move(user_id)) {}
    const std::string& user_id() const { return user_id_; }

private:
    std::string user_id_;
};

class FusionBackend {
public:
    virtual ~FusionBackend() = default;
    virtual std::string backend_id() const = 0;
    virtual std::string model_name() const = 0;
    virtual bool deterministic() const = 0;
    virtual std::string fuse_text(const std::string& behavior_text, const BehaviorSequence& seq,
                                  const FacetSummary& facets) = 0;
};

// Deterministic rule-based stand-in for the fusion model; doubles as the
// test oracle. Text is assembled from the top-3 categories, the price band,
// and the top-3 merchants.
class MockFusionBackend : public FusionBackend {
public:
    std::string backend_id() const override { return "mock"; }
    std::string model_name() const override { return "mock-fusion-v1"; }
    bool deterministic() const override { return true; }

    std::string fuse_text(const std::string&, const BehaviorSequence& seq,
                          const FacetSummary& facets) override {
        std::map<std::string, std::string> merchant_names;
        for (const auto& e : seq.events) {
            if (e.subject_kind == SubjectKind::merchant) {
                merchant_names.emplace(e.subject_id, e.subject_name);
            }
        }

        std::string text = "This user favors ";
        text += join_top(facets.top_categories, 3, nullptr);
        text += ".";
        if (facets.price_stats) {
            text += " Typical order price " + format_price_major(facets.price_stats->median_minor);
            text += " (quartiles " + format_price_major(facets.price_stats->p25_minor) + " to " +
                    format_price_major(facets.price_stats->p75_minor) + ").";
        } else {
            text += " No completed orders with prices on record.";
        }
        text += " Frequent merchants: " + join_top(facets.top_merchants, 3, &merchant_names) + ".";
        text += " Mostly active via " + dominant_scenario(facets) + ".";
        return text;
    }

private:
    static std::string join_top(const std::vector<std::pair<std::string, std::int64_t>>& ranked,
                                std::size_t n,
                                const std::map<std::string, std::string>* names) {
        if (ranked.empty()) return "nothing in particular";
        std::string out;
        for (std::size_t i = 0; i < ranked.size() && i < n; ++i) {
            if (i > 0) out += ", ";
            if (names) {
                auto it = names->find(ranked[i].first);
                out += it != names->end() ? it->second : ranked[i].first;
            } else {
                out += ranked[i].first;
            }
        }
        return out;
    }

    static std::string dominant_scenario(const FacetSummary& facets) {
        Scenario best = Scenario::other;
        double best_frac = -1.0;
        for (Scenario s : kScenarioOrder) {
            auto it = facets.scenario_mix.find(s);
            if (it != facets.scenario_mix.end() && it->second > best_frac) {
                best = s;
                best_frac = it->second;
            }
        }
        return best_frac < 0 ? "no channel" : scenario_display(best);
    }
};

// Sends the fixed fusion prompt plus the behavior text to a chat backend.
class HttpFusionBackend : public FusionBackend {
public:
    HttpFusionBackend(ChatClient client, std::string model)
        : client_(std::move(client)), model_(std::move(model)) {}

    std::string backend_id() const override { return "http:" + client_.endpoint(); }
    std::string model_name() const override { return model_; }
    bool deterministic() const override { return false; }

    std::string fuse_text(const std::string& behavior_text, const BehaviorSequence&,
                          const FacetSummary&) override {
        ChatRequest req;
        req.model = model_;
        req.messages = {{"system", kFusionSystemPrompt}, {"user", behavior_text}};
        req.temperature = 0.0;
        return client_.chat(req).content;
    }

private:
    ChatClient client_;
    std::string model_;
};

struct FusionConfig {
    std::size_t max_input_chars = 8000;
};

inline std::string fusion_input_text(const BehaviorText& behavior_text, std::size_t max_chars) {
    return assemble_text(truncate_oldest(behavior_text, max_chars));
}

inline std::string fusion_prompt(const std::string& input_text) {
    return std::string(kFusionSystemPrompt) + "\n" + input_text;
}

// Facets are always computed locally by deterministic aggregation, so the
// downstream structure never depends on free-form model output; only the
// text comes from the backend.
inline KnowledgeDocument fuse(const BehaviorText& behavior_text, const BehaviorSequence& seq,
                              FusionBackend& backend, const FusionConfig& config = {}) {
    KnowledgeDocument doc;
    doc.user_id = seq.user_id;
    doc.facets = compute_facets(seq);

    std::string input_text = fusion_input_text(behavior_text, config.max_input_chars);
    std::string prompt = fusion_prompt(input_text);

    doc.provenance.backend_id = backend.backend_id();
    doc.provenance.model_name = backend.model_name();
    doc.provenance.prompt_sha256 = sha256_hex(prompt);
    doc.provenance.input_sha256 = sequence_digest(seq);
    doc.provenance.created_at =
        backend.deterministic() ? 0 : static_cast<std::int64_t>(std::time(nullptr));

    if (seq.events.empty()) {
        doc.text = kEmptyBehaviorSentinel;
        return doc;
    }
    try {
        doc.text = backend.fuse_text(input_text, seq, doc.facets);
    } catch (const std::exception& ex) {
        throw FusionError(seq.user_id, ex.what());
    }
    if (doc.text.empty()) {
        throw FusionError(seq.user_id, "backend returned empty text");
    }
    return doc;
}

inline KnowledgeDocument mock_fuse(const BehaviorText& behavior_text,
                                   const BehaviorSequence& seq) {
    MockFusionBackend backend;
    return fuse(behavior_text, seq, backend);
}

inline json knowledge_to_json(const KnowledgeDocument& doc) {
    json j;
    j["user_id"] = doc.user_id;
    j["text"] = doc.text;
    j["facets"] = facets_to_json(doc.facets);
    j["provenance"] = {{"backend_id", doc.provenance.backend_id},
                       {"model_name", doc.provenance.model_name},
                       {"prompt_sha256", doc.provenance.prompt_sha256},
                       {"created_at", doc.provenance.created_at},
                       {"input_sha256", doc.provenance.input_sha256}};
    return j;
}

inline KnowledgeDocument knowledge_from_json(const json& j) {
    KnowledgeDocument doc;
    doc.user_id = j.at("user_id").get<std::string>();
    doc.text = j.at("text").get<std::string>();
    doc.facets = facets_from_json(j.at("facets"));
    const json& p = j.at("provenance");
    doc.provenance.backend_id = p.at("backend_id").get<std::string>();
    doc.provenance.model_name = p.at("model_name").get<std::string>();
    doc.provenance.prompt_sha256 = p.at("prompt_sha256").get<std::string>();
    doc.provenance.created_at = p.at("created_at").get<std::int64_t>();
    doc.provenance.input_sha256 = p.value("input_sha256", std::string());
    return doc;
}

}  // namespace hkfr
