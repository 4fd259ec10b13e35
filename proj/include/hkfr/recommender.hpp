#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "hkfr/catalog.hpp"
#include "hkfr/instruction_builder.hpp"
#include "hkfr/text_util.hpp"

namespace hkfr {

struct RankedItem {
    std::optional<std::string> item_id;
    std::string display;
};

enum class ParseStatus { parsed, fuzzy_matched, failed };

inline const char* to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::parsed: return "parsed";
        case ParseStatus::fuzzy_matched: return "fuzzy_matched";
        case ParseStatus::failed: return "failed";
    }
    return "?";
}

inline std::optional<ParseStatus> parse_parse_status(const std::string& s) {
    if (s == "parsed") return ParseStatus::parsed;
    if (s == "fuzzy_matched") return ParseStatus::fuzzy_matched;
    if (s == "failed") return ParseStatus::failed;
    return std::nullopt;
}

struct RankedRecommendation {
    std::string user_id;
    std::string task_id;
    std::vector<RankedItem> items;  // distinct by display, at most k
    std::string raw_output;
    ParseStatus parse_status = ParseStatus::failed;
};

inline std::optional<std::string> resolve_item_id(const std::string& display,
                                                  const std::vector<CatalogEntry>* candidates) {
    if (!candidates) return std::nullopt;
    std::string key = normalize_ws(display);
    for (const auto& c : *candidates) {
        if (normalize_ws(c.display) == key) return c.id;
    }
    return std::nullopt;
}

// Primary grammar: numbered-list lines, deduplicated case-insensitively and
// truncated to k. With zero matching lines and a catalog at hand, falls back
// to scanning the raw text for catalog names (longest match first, ordered by
// first occurrence). Failure is a status, not an exception.
inline std::pair<std::vector<RankedItem>, ParseStatus> parse_ranked_list(
    const std::string& raw, std::size_t k, const std::vector<CatalogEntry>* candidates) {
    std::vector<RankedItem> items;
    std::set<std::string> seen;
    static const std::regex line_re(R"(^\s*\d+[.)]\s+(.+)$)");

    std::size_t start = 0;
    while (start <= raw.size() && items.size() < k) {
        std::size_t end = raw.find('\n', start);
        std::string line =
            end == std::string::npos ? raw.substr(start) : raw.substr(start, end - start);
        std::smatch m;
        if (std::regex_match(line, m, line_re)) {
            std::string display = trim(m[1].str());
            std::string key = normalize_ws(display);
            if (!key.empty() && !seen.count(key)) {
                seen.insert(key);
                items.push_back({resolve_item_id(display, candidates), display});
            }
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    if (!items.empty()) return {items, ParseStatus::parsed};

    if (candidates) {
        std::string haystack = to_lower(raw);
        // (first occurrence, name length desc, catalog order) per candidate
        struct Hit {
            std::size_t pos;
            std::size_t len;
            std::size_t catalog_index;
            const CatalogEntry* entry;
        };
        std::vector<Hit> hits;
        for (std::size_t i = 0; i < candidates->size(); ++i) {
            const auto& c = (*candidates)[i];
            std::string needle = to_lower(c.display);
            if (needle.empty()) continue;
            std::size_t pos = haystack.find(needle);
            if (pos != std::string::npos) {
                hits.push_back({pos, needle.size(), i, &c});
            }
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            if (a.pos != b.pos) return a.pos < b.pos;
            if (a.len != b.len) return a.len > b.len;
            return a.catalog_index < b.catalog_index;
        });
        for (const auto& h : hits) {
            if (items.size() >= k) break;
            std::string key = normalize_ws(h.entry->display);
            if (seen.count(key)) continue;
            seen.insert(key);
            items.push_back({h.entry->id, h.entry->display});
        }
        if (!items.empty()) return {items, ParseStatus::fuzzy_matched};
    }
    return {{}, ParseStatus::failed};
}

// Everything a backend may need about one user. `input_text` is the knowledge
// text (full variant) or the raw behavior text (no_hkf); the recency lists
// come from the newest-first event sequence.
struct UserContext {
    std::string user_id;
    std::string input_text;
    FacetSummary facets;
    std::vector<std::string> recent_categories;   // by first occurrence, newest first
    std::vector<std::string> recent_merchant_ids;
    std::optional<std::int64_t> recent_order_price;
};

inline UserContext make_user_context(const KnowledgeDocument& doc, const BehaviorSequence& seq) {
    UserContext ctx;
    ctx.user_id = doc.user_id;
    ctx.input_text = doc.text.substr(0, kMaxInputChars);
    ctx.facets = doc.facets;
    std::set<std::string> seen_cat, seen_merchant;
    for (const auto& e : seq.events) {
        if (!e.category.empty() && !seen_cat.count(e.category)) {
            seen_cat.insert(e.category);
            ctx.recent_categories.push_back(e.category);
        }
        if (e.subject_kind == SubjectKind::merchant && !seen_merchant.count(e.subject_id)) {
            seen_merchant.insert(e.subject_id);
            ctx.recent_merchant_ids.push_back(e.subject_id);
        }
        if (!ctx.recent_order_price && e.content_kind == ContentKind::order && e.price_minor) {
            ctx.recent_order_price = *e.price_minor;
        }
    }
    return ctx;
}

class RecommendBackend {
public:
    virtual ~RecommendBackend() = default;
    virtual std::string backend_id() const = 0;
    virtual std::string model_name() const = 0;
    virtual std::string complete(const std::string& prompt, const UserContext& ctx,
                                 const std::vector<CatalogEntry>& candidates, std::size_t k) = 0;
};

// Scoring weights for the deterministic mock ranker (full variant):
// score = 3*category_match + 2*price_proximity + 1*merchant_match.
constexpr double kMockCategoryWeight = 3.0;
constexpr double kMockPriceWeight = 2.0;
constexpr double kMockMerchantWeight = 1.0;

// Deterministic mock model. The full variant ranks candidates from the
// fused facets; the no_hkf variant ranks by recency only. Output is a
// numbered list so it flows through the same parser as real model output.
class MockRecommendBackend : public RecommendBackend {
public:
    explicit MockRecommendBackend(Variant variant = Variant::full) : variant_(variant) {}

    std::string backend_id() const override { return "mock"; }
    std::string model_name() const override {
        return variant_ == Variant::full ? "mock-recommender-v1" : "mock-recommender-recency-v1";
    }

    std::string complete(const std::string&, const UserContext& ctx,
                         const std::vector<CatalogEntry>& candidates, std::size_t k) override {
        std::vector<std::size_t> order(candidates.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        if (variant_ == Variant::full) {
            std::vector<double> scores(candidates.size());
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                scores[i] = score_candidate(ctx, candidates[i]);
            }
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return scores[a] > scores[b];
            });
        } else {
            std::vector<double> ranks(candidates.size());
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                ranks[i] = recency_rank(ctx, candidates[i]);
            }
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return ranks[a] < ranks[b];
            });
        }

        std::string out;
        for (std::size_t i = 0; i < order.size() && i < k; ++i) {
            out += std::to_string(i + 1) + ". " + candidates[order[i]].display + "\n";
        }
        return out;
    }

private:
    static double normalized_count(
        const std::vector<std::pair<std::string, std::int64_t>>& ranked, const std::string& key) {
        if (ranked.empty() || key.empty()) return 0.0;
        double max_count = static_cast<double>(ranked.front().second);
        if (max_count <= 0) return 0.0;
        for (const auto& [name, count] : ranked) {
            if (name == key) return static_cast<double>(count) / max_count;
        }
        return 0.0;
    }

    static double score_candidate(const UserContext& ctx, const CatalogEntry& c) {
        double category_match = normalized_count(ctx.facets.top_categories, c.category);
        double price_proximity = 0.0;
        if (c.price_minor && ctx.facets.price_stats) {
            double diff = std::abs(static_cast<double>(*c.price_minor) -
                                   static_cast<double>(ctx.facets.price_stats->median_minor));
            price_proximity = 1.0 / (1.0 + diff / 1000.0);
        }
        double merchant_match = normalized_count(ctx.facets.top_merchants, c.id);
        return kMockCategoryWeight * category_match + kMockPriceWeight * price_proximity +
               kMockMerchantWeight * merchant_match;
    }

    // Lower is better; candidates without any recency signal sort last in
    // catalog order.
    static double recency_rank(const UserContext& ctx, const CatalogEntry& c) {
        if (c.kind == "price_band") {
            if (ctx.recent_order_price && c.price_minor) {
                return std::abs(static_cast<double>(*c.price_minor) -
                                static_cast<double>(*ctx.recent_order_price));
            }
            return 1e18;
        }
        const auto& list = c.kind == "category" ? ctx.recent_categories : ctx.recent_merchant_ids;
        const std::string& key = c.kind == "category" ? c.category : c.id;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i] == key) return static_cast<double>(i);
        }
        return 1e18;
    }

    Variant variant_;
};

// Real model over the chat protocol; ranking comes back as text.
class HttpRecommendBackend : public RecommendBackend {
public:
    HttpRecommendBackend(ChatClient client, std::string model)
        : client_(std::move(client)), model_(std::move(model)) {}

    std::string backend_id() const override { return "http:" + client_.endpoint(); }
    std::string model_name() const override { return model_; }

    std::string complete(const std::string& prompt, const UserContext&,
                         const std::vector<CatalogEntry>&, std::size_t) override {
        ChatRequest req;
        req.model = model_;
        req.messages = {{"user", prompt}};
        req.temperature = 0.0;
        return client_.chat(req).content;
    }

private:
    ChatClient client_;
    std::string model_;
};

class MissingKnowledgeError : public std::runtime_error {
public:
    explicit MissingKnowledgeError(const std::string& user_id)
        : std::runtime_error("no knowledge available for user " + user_id) {}
};

inline std::string build_recommend_prompt(const TaskTemplate& task, const UserContext& ctx,
                                          std::size_t k) {
    return task.instruction_text + "\n\n" + ctx.input_text + "\n\nAnswer with a numbered list of exactly " +
           std::to_string(k) + " items.";
}

inline RankedRecommendation recommend(const std::string& user_id, const TaskTemplate& task,
                                      std::size_t k, RecommendBackend& backend,
                                      const std::vector<CatalogEntry>& candidates,
                                      const UserContext& ctx) {
    if (ctx.input_text.empty()) throw MissingKnowledgeError(user_id);
    RankedRecommendation rec;
    rec.user_id = user_id;
    rec.task_id = task.task_id;
    rec.raw_output = backend.complete(build_recommend_prompt(task, ctx, k), ctx, candidates, k);
    auto [items, status] = parse_ranked_list(rec.raw_output, k, &candidates);
    rec.items = std::move(items);
    rec.parse_status = status;
    return rec;
}

inline json recommendation_to_json(const RankedRecommendation& rec) {
    json j;
    j["user_id"] = rec.user_id;
    j["task_id"] = rec.task_id;
    j["items"] = json::array();
    for (const auto& item : rec.items) j["items"].push_back(item.display);
    j["raw_output"] = rec.raw_output;
    j["parse_status"] = to_string(rec.parse_status);
    return j;
}

inline RankedRecommendation recommendation_from_json(const json& j) {
    RankedRecommendation rec;
    rec.user_id = j.at("user_id").get<std::string>();
    rec.task_id = j.at("task_id").get<std::string>();
    for (const auto& d : j.at("items")) {
        rec.items.push_back({std::nullopt, d.get<std::string>()});
    }
    rec.raw_output = j.value("raw_output", std::string());
    auto status = parse_parse_status(j.at("parse_status").get<std::string>());
    if (!status) throw JsonlError("bad parse_status in prediction record");
    rec.parse_status = *status;
    return rec;
}

struct SemanticFeatureRow {
    std::string user_id;
    std::vector<std::string> feature_names;
    std::vector<double> feature_values;
};

inline std::string feature_safe_name(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(c == ' ' || c == ',' ? '_' : c);
    return out;
}

// Fixed schema per export: one-hot of the top-1 predicted category in catalog
// order, normalized price midpoint, the four scenario fractions, and
// presence-based reciprocal ranks of the top-3 recommended items.
inline std::vector<std::string> semantic_feature_names(const Catalog& catalog) {
    std::vector<std::string> names;
    names.reserve(catalog.categories.size() + 8);
    for (const auto& c : catalog.categories) {
        names.push_back("cat_top1_is_" + feature_safe_name(c));
    }
    names.push_back("price_mid_norm");
    for (Scenario s : kScenarioOrder) {
        names.push_back(std::string("scenario_frac_") + to_string(s));
    }
    names.push_back("rec_rr_1");
    names.push_back("rec_rr_2");
    names.push_back("rec_rr_3");
    return names;
}

inline std::vector<SemanticFeatureRow> export_semantic_features(
    const std::vector<KnowledgeDocument>& docs, const std::vector<RankedRecommendation>& recs,
    const Catalog& catalog) {
    std::map<std::string, const KnowledgeDocument*> doc_by_user;
    for (const auto& d : docs) doc_by_user[d.user_id] = &d;
    // First recommendation per user by task_id order.
    std::map<std::string, const RankedRecommendation*> rec_by_user;
    for (const auto& r : recs) {
        auto it = rec_by_user.find(r.user_id);
        if (it == rec_by_user.end() || r.task_id < it->second->task_id) {
            rec_by_user[r.user_id] = &r;
        }
    }

    const std::vector<std::string> names = semantic_feature_names(catalog);
    const double max_price = static_cast<double>(catalog.max_price_minor());

    std::vector<SemanticFeatureRow> rows;
    for (const auto& [user_id, rec] : rec_by_user) {
        auto doc_it = doc_by_user.find(user_id);
        if (doc_it == doc_by_user.end()) {
            std::cerr << "warning: user " << user_id
                      << " has predictions but no knowledge document; skipped\n";
            continue;
        }
        const KnowledgeDocument& doc = *doc_it->second;
        SemanticFeatureRow row;
        row.user_id = user_id;
        row.feature_names = names;
        row.feature_values.assign(names.size(), 0.0);

        if (!rec->items.empty()) {
            std::string top = normalize_ws(rec->items.front().display);
            for (std::size_t i = 0; i < catalog.categories.size(); ++i) {
                if (normalize_ws(catalog.categories[i]) == top) {
                    row.feature_values[i] = 1.0;
                    break;
                }
            }
        }
        std::size_t offset = catalog.categories.size();
        if (doc.facets.price_stats) {
            double mid = (static_cast<double>(doc.facets.price_stats->p25_minor) +
                          static_cast<double>(doc.facets.price_stats->p75_minor)) /
                         2.0;
            row.feature_values[offset] = mid / max_price;
        }
        ++offset;
        for (Scenario s : kScenarioOrder) {
            auto it = doc.facets.scenario_mix.find(s);
            row.feature_values[offset++] = it == doc.facets.scenario_mix.end() ? 0.0 : it->second;
        }
        for (std::size_t r = 0; r < 3; ++r) {
            row.feature_values[offset + r] =
                r < rec->items.size() ? 1.0 / static_cast<double>(r + 1) : 0.0;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// Header of feature names, then one comma-separated numeric row per user.
inline void write_features_csv(const std::vector<SemanticFeatureRow>& rows,
                               const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw JsonlError("cannot write " + path.string());
    if (rows.empty()) return;
    out << "user_id";
    for (const auto& name : rows.front().feature_names) out << ',' << name;
    out << '\n';
    char buf[32];
    for (const auto& row : rows) {
        out << row.user_id;
        for (double v : row.feature_values) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace hkfr
