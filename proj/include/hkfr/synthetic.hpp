#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hkfr/behavior.hpp"
#include "hkfr/catalog.hpp"

namespace hkfr {

struct SyntheticProfile {
    std::string user_id;
    std::map<std::string, double> category_weights;  // > 0, sum to 1, pairwise distinct
    std::pair<std::int64_t, std::int64_t> price_band;
    std::vector<std::string> preferred_merchants;  // ranked merchant ids
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

enum class LabelKind { category, poi, merchant, price_band };

inline const char* to_string(LabelKind k) {
    switch (k) {
        case LabelKind::category: return "category";
        case LabelKind::poi: return "poi";
        case LabelKind::merchant: return "merchant";
        case LabelKind::price_band: return "price_band";
    }
    return "?";
}

inline std::optional<LabelKind> parse_label_kind(const std::string& s) {
    if (s == "category") return LabelKind::category;
    if (s == "poi") return LabelKind::poi;
    if (s == "merchant") return LabelKind::merchant;
    if (s == "price_band") return LabelKind::price_band;
    return std::nullopt;
}

// Ground truth for "the next order": one record per label kind per user.
// task_id carries the kind name; tasks are matched to labels by kind.
struct LabelRecord {
    std::string user_id;
    std::string task_id;
    LabelKind label_kind = LabelKind::category;
    std::string label_value;
    std::int64_t cutoff_timestamp = 0;
};

inline json label_to_json(const LabelRecord& l) {
    json j;
    j["user_id"] = l.user_id;
    j["task_id"] = l.task_id;
    j["label_kind"] = to_string(l.label_kind);
    j["label_value"] = l.label_value;
    j["cutoff_timestamp"] = l.cutoff_timestamp;
    return j;
}

inline LabelRecord label_from_json(const json& j) {
    LabelRecord l;
    l.user_id = j.at("user_id").get<std::string>();
    l.task_id = j.at("task_id").get<std::string>();
    auto kind = parse_label_kind(j.at("label_kind").get<std::string>());
    if (!kind) throw JsonlError("bad label_kind: " + j.at("label_kind").get<std::string>());
    l.label_kind = *kind;
    l.label_value = j.at("label_value").get<std::string>();
    l.cutoff_timestamp = j.at("cutoff_timestamp").get<std::int64_t>();
    if (l.label_value.empty()) throw JsonlError("label_value must be non-empty");
    return l;
}

inline json profile_to_json(const SyntheticProfile& p) {
    json j;
    j["user_id"] = p.user_id;
    j["category_weights"] = p.category_weights;
    j["price_band"] = json::array({p.price_band.first, p.price_band.second});
    j["preferred_merchants"] = p.preferred_merchants;
    j["noise_rate"] = p.noise_rate;
    j["seed"] = p.seed;
    return j;
}

namespace detail {

inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Apportions `total` order bundles across weights (given in descending-weight
// order) so that counts sum to total, every slot gets at least one, and the
// counts are strictly decreasing. Strictness makes the per-user argmax of
// order counts recover the planted argmax exactly.
inline std::vector<std::size_t> apportion_strict(std::size_t total,
                                                 const std::vector<double>& weights_desc) {
    std::size_t k = weights_desc.size();
    std::vector<std::size_t> counts(k, 0);
    if (k == 0 || total == 0) return counts;
    std::size_t ladder_sum = k * (k + 1) / 2;
    if (total < ladder_sum) {
        // Too few bundles for a strict ladder: hand them out top-weight first.
        std::size_t left = total;
        for (std::size_t i = 0; i < k && left > 0; ++i) {
            std::size_t take = std::min(left, k - i);
            counts[i] = take;
            left -= take;
        }
        return counts;
    }
    // Base ladder k, k-1, ..., 1 guarantees strictness. The remainder is
    // spread by floored proportional shares (non-increasing, since the
    // weights are), with leftover units going to the top slots; the per-slot
    // extras therefore never invert and the ladder stays strict.
    for (std::size_t i = 0; i < k; ++i) counts[i] = k - i;
    std::size_t rest = total - ladder_sum;
    double wsum = std::accumulate(weights_desc.begin(), weights_desc.end(), 0.0);
    std::vector<std::size_t> extra(k, 0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        extra[i] = static_cast<std::size_t>(static_cast<double>(rest) * weights_desc[i] / wsum);
        assigned += extra[i];
    }
    for (std::size_t u = 0; u < rest - assigned; ++u) {
        ++extra[u % k];
    }
    for (std::size_t i = 0; i < k; ++i) counts[i] += extra[i];
    return counts;
}

}  // namespace detail

// Deterministic profiles: category weights drawn distinct from the fixed
// 30-category catalog, normalized to sum 1.
inline std::vector<SyntheticProfile> generate_profiles(std::size_t n, std::uint64_t seed,
                                                       double noise_rate = 0.0,
                                                       const Catalog& catalog = default_catalog()) {
    if (n == 0) throw std::invalid_argument("profile count must be >= 1");
    if (noise_rate < 0.0 || noise_rate >= 1.0) {
        throw std::invalid_argument("noise_rate must lie in [0, 1)");
    }
    std::vector<SyntheticProfile> profiles;
    profiles.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = detail::seeded_rng(seed, i);
        SyntheticProfile p;
        p.user_id = "user_" + zero_pad(i, 6);
        p.noise_rate = noise_rate;
        p.seed = seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));

        std::size_t n_cats = 1 + rng() % 5;
        std::vector<std::size_t> cat_indices(catalog.categories.size());
        std::iota(cat_indices.begin(), cat_indices.end(), 0);
        std::shuffle(cat_indices.begin(), cat_indices.end(), rng);

        // Distinct integer raw weights keep the normalized weights distinct,
        // so the planted argmax is unambiguous.
        std::vector<int> raw(90);
        std::iota(raw.begin(), raw.end(), 10);
        std::shuffle(raw.begin(), raw.end(), rng);
        double total = 0;
        for (std::size_t c = 0; c < n_cats; ++c) total += raw[c];
        for (std::size_t c = 0; c < n_cats; ++c) {
            p.category_weights[catalog.categories[cat_indices[c]]] =
                static_cast<double>(raw[c]) / total;
        }

        std::int64_t band_min = 800 + 100 * static_cast<std::int64_t>(rng() % 15);
        std::int64_t band_max = band_min + 600 + 100 * static_cast<std::int64_t>(rng() % 20);
        p.price_band = {band_min, band_max};

        std::string top_category;
        double top_weight = -1;
        for (const auto& [cat, w] : p.category_weights) {
            if (w > top_weight) {
                top_weight = w;
                top_category = cat;
            }
        }
        auto merchants = catalog.merchants_of_category(top_category);
        std::vector<std::size_t> order(merchants.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t m = 0; m < merchants.size() && p.preferred_merchants.size() < 3; ++m) {
            p.preferred_merchants.push_back(merchants[order[m]]->id);
        }
        profiles.push_back(std::move(p));
    }
    return profiles;
}

struct GeneratedStream {
    std::vector<BehaviorEvent> events;  // pre- and post-cutoff, chronological
    std::vector<LabelRecord> labels;    // from the first post-cutoff order
};

namespace detail {

struct BundleSpec {
    std::string category;
    bool on_preference = false;
    bool pin_top_merchant = false;  // label bundles use preferred_merchants[0]
};

inline Scenario draw_scenario(std::mt19937_64& rng) {
    double u = uniform01(rng);
    if (u < 0.70) return Scenario::app_homepage;
    if (u < 0.90) return Scenario::mini_program;
    return Scenario::search;
}

// One order plus its funnel: 5 same-category exposures (3 merchants, 2
// products), 2 clicks on the ordered merchant, 3 exposures on random
// products. Exposures precede clicks precede the order in time.
inline void emit_bundle(std::vector<BehaviorEvent>& out, const SyntheticProfile& profile,
                        const Catalog& catalog, std::mt19937_64& rng, const BundleSpec& spec,
                        std::int64_t base_ts, const CatalogEntry** ordered_merchant,
                        std::int64_t* order_price, std::int64_t* order_ts) {
    auto category_merchants = catalog.merchants_of_category(spec.category);
    const CatalogEntry* merchant = nullptr;
    if (spec.on_preference && !profile.preferred_merchants.empty()) {
        // Rank-weighted pick over the top-3 preferred merchants (3:2:1);
        // label bundles pin the top one so ground truth stays recoverable.
        std::size_t idx = 0;
        if (!spec.pin_top_merchant) {
            double u = uniform01(rng);
            idx = u < 0.5 ? 0 : (u < 0.8334 ? 1 : 2);
            idx = std::min(idx, profile.preferred_merchants.size() - 1);
        }
        const std::string& id = profile.preferred_merchants[idx];
        for (const auto* m : category_merchants) {
            if (m->id == id) {
                merchant = m;
                break;
            }
        }
    }
    if (!merchant && !category_merchants.empty()) {
        merchant = category_merchants[rng() % category_merchants.size()];
    }

    auto products = catalog.products_of_category(spec.category);
    std::int64_t ts = base_ts;
    auto push = [&](SubjectKind sk, const CatalogEntry& subject, ContentKind ck,
                    std::optional<std::int64_t> price) {
        BehaviorEvent e;
        e.user_id = profile.user_id;
        e.subject_kind = sk;
        e.subject_id = subject.id;
        e.subject_name = subject.display;
        e.category = subject.category;
        e.price_minor = price;
        e.content_kind = ck;
        e.scenario = draw_scenario(rng);
        e.timestamp = ts;
        ts += 60;
        out.push_back(std::move(e));
    };

    for (int i = 0; i < 3 && merchant; ++i) {
        const CatalogEntry* m =
            i == 0 ? merchant : category_merchants[rng() % category_merchants.size()];
        push(SubjectKind::merchant, *m, ContentKind::exposure, std::nullopt);
    }
    for (int i = 0; i < 2 && !products.empty(); ++i) {
        const CatalogEntry* p = products[rng() % products.size()];
        push(SubjectKind::product, *p, ContentKind::exposure, p->price_minor);
    }
    for (int i = 0; i < 3 && !catalog.products.empty(); ++i) {
        const CatalogEntry& p = catalog.products[rng() % catalog.products.size()];
        push(SubjectKind::product, p, ContentKind::exposure, p.price_minor);
    }
    for (int i = 0; i < 2 && merchant; ++i) {
        push(SubjectKind::merchant, *merchant, ContentKind::click, std::nullopt);
    }
    std::int64_t price;
    if (spec.on_preference) {
        price = profile.price_band.first +
                static_cast<std::int64_t>(
                    rng() % static_cast<std::uint64_t>(
                                profile.price_band.second - profile.price_band.first + 1));
    } else {
        price = 600 + static_cast<std::int64_t>(rng() % 3601);
    }
    if (merchant) {
        push(SubjectKind::merchant, *merchant, ContentKind::order, price);
        if (ordered_merchant) *ordered_merchant = merchant;
        if (order_price) *order_price = price;
        if (order_ts) *order_ts = ts - 60;
    }
}

}  // namespace detail

// Generates the user's full stream: `horizon_days` order bundles before the
// cutoff whose on-preference categories follow the planted weights exactly
// (strict apportionment), plus two post-cutoff bundles within the 7-day label
// horizon. Each order is independently replaced by a uniform catalog draw
// with probability noise_rate. Labels encode the first post-cutoff order.
inline GeneratedStream generate_events(const SyntheticProfile& profile, std::size_t horizon_days,
                                       std::int64_t cutoff_timestamp,
                                       const Catalog& catalog = default_catalog()) {
    if (horizon_days == 0) throw std::invalid_argument("horizon_days must be >= 1");
    auto rng = detail::seeded_rng(profile.seed, 0xabcdef12);

    std::vector<std::pair<std::string, double>> weights(profile.category_weights.begin(),
                                                        profile.category_weights.end());
    std::sort(weights.begin(), weights.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<double> weight_values;
    weight_values.reserve(weights.size());
    for (const auto& [_, w] : weights) weight_values.push_back(w);

    std::vector<std::size_t> counts = detail::apportion_strict(horizon_days, weight_values);
    std::vector<detail::BundleSpec> bundles;
    bundles.reserve(horizon_days);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (std::size_t c = 0; c < counts[i]; ++c) {
            bundles.push_back({weights[i].first, true});
        }
    }
    std::shuffle(bundles.begin(), bundles.end(), rng);
    for (auto& b : bundles) {
        if (profile.noise_rate > 0 && detail::uniform01(rng) < profile.noise_rate) {
            b.category = catalog.categories[rng() % catalog.categories.size()];
            b.on_preference = false;
        }
    }

    GeneratedStream stream;
    for (std::size_t day = 0; day < bundles.size(); ++day) {
        std::int64_t base_ts =
            cutoff_timestamp - static_cast<std::int64_t>(bundles.size() - day) * 86400 + 43200;
        if (base_ts <= 0) base_ts = static_cast<std::int64_t>(day) * 86400 + 1;
        detail::emit_bundle(stream.events, profile, catalog, rng, bundles[day], base_ts, nullptr,
                            nullptr, nullptr);
    }

    // Post-cutoff bundles: the first one sources every label. Without a
    // noise draw the label order follows the strongest planted preference
    // (argmax category, top preferred merchant), which keeps ground truth
    // exactly recoverable from the pre-cutoff weighted counts.
    auto draw_post_category = [&](bool label_bundle) -> detail::BundleSpec {
        if (profile.noise_rate > 0 && detail::uniform01(rng) < profile.noise_rate) {
            return {catalog.categories[rng() % catalog.categories.size()], false, false};
        }
        if (label_bundle) return {weights.front().first, true, true};
        double u = detail::uniform01(rng);
        double acc = 0;
        for (const auto& [cat, w] : weights) {
            acc += w;
            if (u <= acc) return {cat, true, false};
        }
        return {weights.back().first, true, false};
    };

    const CatalogEntry* label_merchant = nullptr;
    std::int64_t label_price = 0;
    std::int64_t label_order_ts = 0;
    std::string label_category;
    for (int post = 0; post < 2; ++post) {
        detail::BundleSpec spec = draw_post_category(post == 0);
        std::int64_t base_ts = cutoff_timestamp + 3600 + post * 90000;
        const CatalogEntry* merchant = nullptr;
        std::int64_t price = 0;
        std::int64_t order_ts = 0;
        detail::emit_bundle(stream.events, profile, catalog, rng, spec, base_ts, &merchant,
                            &price, &order_ts);
        if (post == 0 && merchant) {
            label_merchant = merchant;
            label_price = price;
            label_order_ts = order_ts;
            label_category = spec.category;
        }
    }

    if (label_merchant) {
        (void)label_order_ts;
        auto add_label = [&](LabelKind kind, const std::string& value) {
            LabelRecord l;
            l.user_id = profile.user_id;
            l.task_id = to_string(kind);
            l.label_kind = kind;
            l.label_value = value;
            l.cutoff_timestamp = cutoff_timestamp;
            stream.labels.push_back(std::move(l));
        };
        add_label(LabelKind::category, label_category);
        add_label(LabelKind::poi, label_merchant->display);
        add_label(LabelKind::merchant, label_merchant->display);
        add_label(LabelKind::price_band, catalog.band_for_price(label_price).display);
    }
    return stream;
}

}  // namespace hkfr
