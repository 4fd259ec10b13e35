#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hkfr/behavior.hpp"

namespace hkfr {

// Behavior weights: orders dominate clicks dominate exposures.
constexpr std::int64_t kOrderWeight = 10;
constexpr std::int64_t kClickWeight = 3;
constexpr std::int64_t kExposureWeight = 1;

inline std::int64_t content_weight(ContentKind k) {
    switch (k) {
        case ContentKind::order: return kOrderWeight;
        case ContentKind::click: return kClickWeight;
        case ContentKind::exposure: return kExposureWeight;
    }
    return 0;
}

struct PriceStats {
    std::int64_t median_minor = 0;
    std::int64_t p25_minor = 0;
    std::int64_t p75_minor = 0;
};

struct FacetSummary {
    // Sorted by weighted_count descending, ties by name ascending.
    std::vector<std::pair<std::string, std::int64_t>> top_categories;
    std::optional<PriceStats> price_stats;  // over order prices only; absent without priced orders
    std::vector<std::pair<std::string, std::int64_t>> top_merchants;
    std::map<Scenario, double> scenario_mix;  // fractions summing to 1 when any events exist
};

inline std::vector<std::pair<std::string, std::int64_t>> sorted_counts(
    const std::map<std::string, std::int64_t>& counts) {
    std::vector<std::pair<std::string, std::int64_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

// Nearest-rank quantile over ascending values: rank = ceil(q*n), 1-indexed.
inline std::int64_t nearest_rank(const std::vector<std::int64_t>& sorted_values, double q) {
    std::size_t n = sorted_values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted_values[rank - 1];
}

inline FacetSummary compute_facets(const BehaviorSequence& seq) {
    FacetSummary f;
    std::map<std::string, std::int64_t> category_counts;
    std::map<std::string, std::int64_t> merchant_counts;
    std::map<Scenario, std::size_t> scenario_counts;
    std::vector<std::int64_t> order_prices;

    for (const auto& e : seq.events) {
        std::int64_t w = content_weight(e.content_kind);
        if (!e.category.empty()) category_counts[e.category] += w;
        if (e.subject_kind == SubjectKind::merchant) merchant_counts[e.subject_id] += w;
        ++scenario_counts[e.scenario];
        if (e.content_kind == ContentKind::order && e.price_minor) {
            order_prices.push_back(*e.price_minor);
        }
    }

    f.top_categories = sorted_counts(category_counts);
    f.top_merchants = sorted_counts(merchant_counts);

    if (!order_prices.empty()) {
        std::sort(order_prices.begin(), order_prices.end());
        PriceStats stats;
        stats.p25_minor = nearest_rank(order_prices, 0.25);
        stats.median_minor = nearest_rank(order_prices, 0.50);
        stats.p75_minor = nearest_rank(order_prices, 0.75);
        f.price_stats = stats;
    }

    if (!seq.events.empty()) {
        double total = static_cast<double>(seq.events.size());
        for (const auto& [s, n] : scenario_counts) {
            f.scenario_mix[s] = static_cast<double>(n) / total;
        }
    }
    return f;
}

inline json facets_to_json(const FacetSummary& f) {
    json j;
    j["top_categories"] = json::array();
    for (const auto& [name, count] : f.top_categories) {
        j["top_categories"].push_back(json::array({name, count}));
    }
    j["top_merchants"] = json::array();
    for (const auto& [name, count] : f.top_merchants) {
        j["top_merchants"].push_back(json::array({name, count}));
    }
    if (f.price_stats) {
        j["price_stats"] = {{"median_minor", f.price_stats->median_minor},
                            {"p25_minor", f.price_stats->p25_minor},
                            {"p75_minor", f.price_stats->p75_minor}};
    }
    json mix = json::object();
    for (const auto& [s, frac] : f.scenario_mix) {
        mix[to_string(s)] = frac;
    }
    j["scenario_mix"] = std::move(mix);
    return j;
}

inline FacetSummary facets_from_json(const json& j) {
    FacetSummary f;
    for (const auto& pair : j.at("top_categories")) {
        f.top_categories.emplace_back(pair.at(0).get<std::string>(),
                                      pair.at(1).get<std::int64_t>());
    }
    for (const auto& pair : j.at("top_merchants")) {
        f.top_merchants.emplace_back(pair.at(0).get<std::string>(),
                                     pair.at(1).get<std::int64_t>());
    }
    if (j.contains("price_stats")) {
        PriceStats stats;
        stats.median_minor = j.at("price_stats").at("median_minor").get<std::int64_t>();
        stats.p25_minor = j.at("price_stats").at("p25_minor").get<std::int64_t>();
        stats.p75_minor = j.at("price_stats").at("p75_minor").get<std::int64_t>();
        f.price_stats = stats;
    }
    for (auto it = j.at("scenario_mix").begin(); it != j.at("scenario_mix").end(); ++it) {
        auto s = parse_scenario(it.key());
        if (s) f.scenario_mix[*s] = it.value().get<double>();
    }
    return f;
}

}  // namespace hkfr
