#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hkfr/jsonl.hpp"
#include "hkfr/sha256.hpp"

namespace hkfr {

enum class SubjectKind { merchant, product };
enum class ContentKind { exposure, click, order };
enum class Scenario { app_homepage, mini_program, search, other };

inline const char* to_string(SubjectKind k) {
    switch (k) {
        case SubjectKind::merchant: return "merchant";
        case SubjectKind::product: return "product";
    }
    return "?";
}

inline const char* to_string(ContentKind k) {
    switch (k) {
        case ContentKind::exposure: return "exposure";
        case ContentKind::click: return "click";
        case ContentKind::order: return "order";
    }
    return "?";
}

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::app_homepage: return "app_homepage";
        case Scenario::mini_program: return "mini_program";
        case Scenario::search: return "search";
        case Scenario::other: return "other";
    }
    return "?";
}

inline std::optional<SubjectKind> parse_subject_kind(const std::string& s) {
    if (s == "merchant") return SubjectKind::merchant;
    if (s == "product") return SubjectKind::product;
    return std::nullopt;
}

inline std::optional<ContentKind> parse_content_kind(const std::string& s) {
    if (s == "exposure") return ContentKind::exposure;
    if (s == "click") return ContentKind::click;
    if (s == "order") return ContentKind::order;
    return std::nullopt;
}

inline std::optional<Scenario> parse_scenario(const std::string& s) {
    if (s == "app_homepage") return Scenario::app_homepage;
    if (s == "mini_program") return Scenario::mini_program;
    if (s == "search") return Scenario::search;
    if (s == "other") return Scenario::other;
    return std::nullopt;
}

constexpr Scenario kScenarioOrder[] = {Scenario::app_homepage, Scenario::mini_program,
                                       Scenario::search, Scenario::other};

// One heterogeneous interaction: subject x content x scenario x time.
struct BehaviorEvent {
    std::string user_id;
    SubjectKind subject_kind = SubjectKind::merchant;
    std::string subject_id;
    std::string subject_name;
    std::string category;
    std::optional<std::int64_t> price_minor;
    ContentKind content_kind = ContentKind::exposure;
    Scenario scenario = Scenario::app_homepage;
    std::int64_t timestamp = 0;
    std::map<std::string, std::string> attributes;
};

// Empty string means the event satisfies all invariants.
inline std::string validate_event(const BehaviorEvent& e) {
    if (e.timestamp <= 0) return "nonpositive timestamp";
    if (e.price_minor && *e.price_minor < 0) return "negative price";
    if (e.content_kind == ContentKind::order && e.subject_kind == SubjectKind::product &&
        !e.price_minor) {
        return "missing price for product order";
    }
    if (e.user_id.empty()) return "empty user_id";
    if (e.subject_id.empty()) return "empty subject_id";
    return {};
}

inline json event_to_json(const BehaviorEvent& e) {
    json j;
    j["user_id"] = e.user_id;
    j["subject_kind"] = to_string(e.subject_kind);
    j["subject_id"] = e.subject_id;
    j["subject_name"] = e.subject_name;
    j["category"] = e.category;
    if (e.price_minor) j["price_minor"] = *e.price_minor;
    j["content_kind"] = to_string(e.content_kind);
    j["scenario"] = to_string(e.scenario);
    j["timestamp"] = e.timestamp;
    j["attributes"] = e.attributes;
    return j;
}

// Strict parse of the stored line format: unknown keys are rejected,
// required keys must be present with the right types.
inline std::optional<BehaviorEvent> event_from_json(const json& j, std::string* error) {
    auto fail = [&](const std::string& why) -> std::optional<BehaviorEvent> {
        if (error) *error = why;
        return std::nullopt;
    };
    if (!j.is_object()) return fail("record is not an object");

    static const std::set<std::string> known = {
        "user_id",  "subject_kind", "subject_id", "subject_name", "category",
        "price_minor", "content_kind", "scenario", "timestamp",   "attributes"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) return fail("unknown key: " + it.key());
    }
    for (const char* key :
         {"user_id", "subject_kind", "subject_id", "subject_name", "category",
          "content_kind", "scenario", "timestamp"}) {
        if (!j.contains(key)) return fail(std::string("missing key: ") + key);
    }

    BehaviorEvent e;
    try {
        e.user_id = j.at("user_id").get<std::string>();
        e.subject_id = j.at("subject_id").get<std::string>();
        e.subject_name = j.at("subject_name").get<std::string>();
        e.category = j.at("category").get<std::string>();
        auto sk = parse_subject_kind(j.at("subject_kind").get<std::string>());
        if (!sk) return fail("bad subject_kind");
        e.subject_kind = *sk;
        auto ck = parse_content_kind(j.at("content_kind").get<std::string>());
        if (!ck) return fail("bad content_kind");
        e.content_kind = *ck;
        auto sc = parse_scenario(j.at("scenario").get<std::string>());
        if (!sc) return fail("bad scenario");
        e.scenario = *sc;
        if (!j.at("timestamp").is_number_integer()) return fail("timestamp must be an integer");
        e.timestamp = j.at("timestamp").get<std::int64_t>();
        if (j.contains("price_minor")) {
            if (!j.at("price_minor").is_number_integer()) {
                return fail("price_minor must be an integer");
            }
            e.price_minor = j.at("price_minor").get<std::int64_t>();
        }
        if (j.contains("attributes")) {
            e.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
        }
    } catch (const json::exception& ex) {
        return fail(std::string("type error: ") + ex.what());
    }

    std::string why = validate_event(e);
    if (!why.empty()) return fail(why);
    return e;
}

// Canonical serialized form; identical events produce identical lines
// (nlohmann objects keep keys sorted), which is the dedup identity.
inline std::string canonical_event_line(const BehaviorEvent& e) {
    return event_to_json(e).dump();
}

// Sequence ordering: newest first, ties by (subject_id, content_kind)
// lexicographic ascending ("click" < "exposure" < "order").
inline bool sequence_order_less(const BehaviorEvent& a, const BehaviorEvent& b) {
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
    return std::string_view(to_string(a.content_kind)) <
           std::string_view(to_string(b.content_kind));
}

struct BehaviorSequence {
    std::string user_id;
    std::vector<BehaviorEvent> events;  // sorted by sequence_order_less, length <= cap
    std::size_t cap = 300;
};

inline BehaviorSequence make_sequence(std::string user_id, std::vector<BehaviorEvent> events,
                                      std::size_t cap = 300) {
    if (cap == 0) throw std::invalid_argument("sequence cap must be positive");
    std::sort(events.begin(), events.end(), sequence_order_less);
    if (events.size() > cap) events.resize(cap);
    BehaviorSequence seq;
    seq.user_id = std::move(user_id);
    seq.events = std::move(events);
    seq.cap = cap;
    return seq;
}

// Digest over the canonical lines of the sequence, used as the fusion cache key.
inline std::string sequence_digest(const BehaviorSequence& seq) {
    std::string buf;
    for (const auto& e : seq.events) {
        buf += canonical_event_line(e);
        buf += '\n';
    }
    return sha256_hex(buf);
}

struct AnonymizationPolicy {
    std::string salt;
    std::set<std::string> fields_to_mask = {"user_id", "subject_id"};
};

// Masks each selected field with the first 16 hex chars of SHA-256(salt || value).
// Maskable fields: user_id, subject_id, subject_name, category. Other names are ignored.
inline BehaviorEvent anonymize_event(const BehaviorEvent& event,
                                     const AnonymizationPolicy& policy) {
    if (policy.salt.empty()) throw std::invalid_argument("anonymization salt must be non-empty");
    BehaviorEvent out = event;
    auto mask = [&](const std::string& value) { return sha256_hex16(policy.salt + value); };
    if (policy.fields_to_mask.count("user_id")) out.user_id = mask(event.user_id);
    if (policy.fields_to_mask.count("subject_id")) out.subject_id = mask(event.subject_id);
    if (policy.fields_to_mask.count("subject_name")) out.subject_name = mask(event.subject_name);
    if (policy.fields_to_mask.count("category")) out.category = mask(event.category);
    return out;
}

}  // namespace hkfr
