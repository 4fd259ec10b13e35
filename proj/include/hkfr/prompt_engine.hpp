#pragma once

#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hkfr/behavior.hpp"
#include "hkfr/text_util.hpp"

namespace hkfr {

class TemplateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// nullopt on an axis means wildcard (matches every value).
struct BehaviorTemplate {
    std::string template_id;
    std::optional<SubjectKind> subject_kind;
    std::optional<ContentKind> content_kind;
    std::optional<Scenario> scenario;
    std::string pattern;

    int specificity() const {
        return (subject_kind ? 1 : 0) + (content_kind ? 1 : 0) + (scenario ? 1 : 0);
    }

    bool matches(const BehaviorEvent& e) const {
        if (subject_kind && *subject_kind != e.subject_kind) return false;
        if (content_kind && *content_kind != e.content_kind) return false;
        if (scenario && *scenario != e.scenario) return false;
        return true;
    }
};

inline std::vector<std::string> pattern_placeholders(const std::string& pattern) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = pattern.find('{', pos)) != std::string::npos) {
        std::size_t end = pattern.find('}', pos);
        if (end == std::string::npos) break;
        names.push_back(pattern.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return names;
}

inline void validate_template(const BehaviorTemplate& t) {
    static const std::set<std::string> declared = {"date", "scenario", "subject_name",
                                                   "category", "price"};
    bool has_subject = false;
    for (const auto& name : pattern_placeholders(t.pattern)) {
        if (!declared.count(name)) {
            throw TemplateError("template " + t.template_id + ": unknown placeholder {" + name +
                                "}");
        }
        if (name == "subject_name") has_subject = true;
    }
    if (!has_subject) {
        throw TemplateError("template " + t.template_id + ": pattern must contain {subject_name}");
    }
}

class TemplateRegistry {
public:
    explicit TemplateRegistry(std::vector<BehaviorTemplate> templates)
        : templates_(std::move(templates)) {
        bool has_fallback = false;
        for (const auto& t : templates_) {
            validate_template(t);
            if (t.specificity() == 0) has_fallback = true;
        }
        if (templates_.empty() || !has_fallback) {
            throw TemplateError("registry must contain a full-wildcard fallback template");
        }
    }

    const std::vector<BehaviorTemplate>& templates() const { return templates_; }

    static TemplateRegistry defaults();
    static TemplateRegistry load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<BehaviorTemplate> templates_;
};

// Most specific match wins; ties go to the earlier registry entry.
inline const BehaviorTemplate& select_template(const TemplateRegistry& registry,
                                               const BehaviorEvent& event) {
    const BehaviorTemplate* best = nullptr;
    for (const auto& t : registry.templates()) {
        if (!t.matches(event)) continue;
        if (!best || t.specificity() > best->specificity()) best = &t;
    }
    // The fallback guarantees a match.
    return *best;
}

inline std::string format_date_utc(std::int64_t timestamp) {
    std::time_t tt = static_cast<std::time_t>(timestamp);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday);
    return buf;
}

inline const char* scenario_display(Scenario s) {
    switch (s) {
        case Scenario::app_homepage: return "the app homepage";
        case Scenario::mini_program: return "a mini-program";
        case Scenario::search: return "search";
        case Scenario::other: return "another channel";
    }
    return "?";
}

inline std::string render_event(const BehaviorEvent& event, const BehaviorTemplate& tmpl) {
    std::string out;
    out.reserve(tmpl.pattern.size() + 32);
    const std::string& p = tmpl.pattern;
    std::size_t pos = 0;
    while (pos < p.size()) {
        if (p[pos] != '{') {
            out.push_back(p[pos++]);
            continue;
        }
        std::size_t end = p.find('}', pos);
        if (end == std::string::npos) {
            out.append(p.substr(pos));
            break;
        }
        std::string name = p.substr(pos + 1, end - pos - 1);
        if (name == "date") {
            out += format_date_utc(event.timestamp);
        } else if (name == "scenario") {
            out += scenario_display(event.scenario);
        } else if (name == "subject_name") {
            out += event.subject_name;
        } else if (name == "category") {
            out += event.category;
        } else if (name == "price") {
            out += event.price_minor ? format_price_major(*event.price_minor) : "n/a";
        }
        pos = end + 1;
    }
    return out;
}

enum class RenderMode { grouped, flat };

struct BehaviorText {
    std::string user_id;
    std::vector<std::string> lines;  // one per rendered event
    std::map<Scenario, std::string> section_headers;
    // Layout info parallel to `lines`, needed for assembly and truncation.
    std::vector<Scenario> line_scenarios;
    std::vector<std::int64_t> line_timestamps;
};

inline const char* section_header(Scenario s) {
    switch (s) {
        case Scenario::app_homepage: return "[App homepage activity]";
        case Scenario::mini_program: return "[Mini-program activity]";
        case Scenario::search: return "[Search activity]";
        case Scenario::other: return "[Other activity]";
    }
    return "?";
}

// Groups events by scenario in the fixed order (homepage, mini-program, search,
// other), newest first within each group. Flat mode renders one newest-first
// stream without headers.
inline BehaviorText render_sequence(const BehaviorSequence& seq, const TemplateRegistry& registry,
                                    RenderMode mode = RenderMode::grouped) {
    BehaviorText text;
    text.user_id = seq.user_id;
    auto render_one = [&](const BehaviorEvent& e) {
        text.lines.push_back(render_event(e, select_template(registry, e)));
        text.line_scenarios.push_back(e.scenario);
        text.line_timestamps.push_back(e.timestamp);
    };
    if (mode == RenderMode::flat) {
        for (const auto& e : seq.events) render_one(e);
        return text;
    }
    for (Scenario s : kScenarioOrder) {
        bool any = false;
        for (const auto& e : seq.events) {
            if (e.scenario != s) continue;
            if (!any) {
                text.section_headers[s] = section_header(s);
                any = true;
            }
            render_one(e);
        }
    }
    return text;
}

inline std::string assemble_text(const BehaviorText& text) {
    std::string out;
    if (text.section_headers.empty()) {
        for (const auto& line : text.lines) {
            out += line;
            out += '\n';
        }
        return out;
    }
    for (Scenario s : kScenarioOrder) {
        auto it = text.section_headers.find(s);
        if (it == text.section_headers.end()) continue;
        bool any = false;
        for (std::size_t i = 0; i < text.lines.size(); ++i) {
            if (text.line_scenarios[i] != s) continue;
            if (!any) {
                out += it->second;
                out += '\n';
                any = true;
            }
            out += text.lines[i];
            out += '\n';
        }
    }
    return out;
}

// Drops the oldest rendered events until the assembled text fits the budget.
inline BehaviorText truncate_oldest(BehaviorText text, std::size_t max_chars) {
    while (!text.lines.empty() && assemble_text(text).size() > max_chars) {
        std::size_t oldest = 0;
        for (std::size_t i = 1; i < text.lines.size(); ++i) {
            if (text.line_timestamps[i] < text.line_timestamps[oldest]) oldest = i;
        }
        Scenario dropped = text.line_scenarios[oldest];
        text.lines.erase(text.lines.begin() + static_cast<std::ptrdiff_t>(oldest));
        text.line_scenarios.erase(text.line_scenarios.begin() +
                                  static_cast<std::ptrdiff_t>(oldest));
        text.line_timestamps.erase(text.line_timestamps.begin() +
                                   static_cast<std::ptrdiff_t>(oldest));
        bool scenario_remains = false;
        for (Scenario s : text.line_scenarios) {
            if (s == dropped) {
                scenario_remains = true;
                break;
            }
        }
        if (!scenario_remains) text.section_headers.erase(dropped);
    }
    return text;
}

inline TemplateRegistry TemplateRegistry::defaults() {
    using SK = SubjectKind;
    using CK = ContentKind;
    using SC = Scenario;
    std::vector<BehaviorTemplate> t = {
        {"order_merchant", SK::merchant, CK::order, std::nullopt,
         "On {date}, ordered from '{subject_name}' (category: {category}, price: {price}) via "
         "{scenario}."},
        {"order_product", SK::product, CK::order, std::nullopt,
         "On {date}, ordered '{subject_name}' (category: {category}, price: {price}) via "
         "{scenario}."},
        {"order_search", std::nullopt, CK::order, SC::search,
         "On {date}, searched and ordered '{subject_name}' (category: {category}, price: "
         "{price})."},
        {"click_merchant", SK::merchant, CK::click, std::nullopt,
         "On {date}, clicked into '{subject_name}' (category: {category}) via {scenario}."},
        {"click_product", SK::product, CK::click, std::nullopt,
         "On {date}, clicked '{subject_name}' (category: {category}) via {scenario}."},
        {"click_search", std::nullopt, CK::click, SC::search,
         "On {date}, clicked search result '{subject_name}' (category: {category})."},
        {"exposure_merchant", SK::merchant, CK::exposure, std::nullopt,
         "On {date}, saw '{subject_name}' (category: {category}) on {scenario}."},
        {"exposure_product", SK::product, CK::exposure, std::nullopt,
         "On {date}, was shown '{subject_name}' (category: {category}, price: {price}) on "
         "{scenario}."},
        {"exposure_search", std::nullopt, CK::exposure, SC::search,
         "On {date}, saw '{subject_name}' (category: {category}) in search results."},
        {"fallback", std::nullopt, std::nullopt, std::nullopt,
         "On {date}, interacted with '{subject_name}' (category: {category}, price: {price}) via "
         "{scenario}."},
    };
    return TemplateRegistry(std::move(t));
}

inline json template_to_json(const BehaviorTemplate& t) {
    json j;
    j["template_id"] = t.template_id;
    j["subject_kind"] = t.subject_kind ? to_string(*t.subject_kind) : "*";
    j["content_kind"] = t.content_kind ? to_string(*t.content_kind) : "*";
    j["scenario"] = t.scenario ? to_string(*t.scenario) : "*";
    j["pattern"] = t.pattern;
    return j;
}

inline TemplateRegistry TemplateRegistry::load(const std::filesystem::path& path) {
    std::vector<BehaviorTemplate> templates;
    for (const auto& j : read_jsonl(path)) {
        BehaviorTemplate t;
        t.template_id = j.at("template_id").get<std::string>();
        std::string sk = j.at("subject_kind").get<std::string>();
        std::string ck = j.at("content_kind").get<std::string>();
        std::string sc = j.at("scenario").get<std::string>();
        if (sk != "*") {
            auto v = parse_subject_kind(sk);
            if (!v) throw TemplateError("template " + t.template_id + ": bad subject_kind " + sk);
            t.subject_kind = *v;
        }
        if (ck != "*") {
            auto v = parse_content_kind(ck);
            if (!v) throw TemplateError("template " + t.template_id + ": bad content_kind " + ck);
            t.content_kind = *v;
        }
        if (sc != "*") {
            auto v = parse_scenario(sc);
            if (!v) throw TemplateError("template " + t.template_id + ": bad scenario " + sc);
            t.scenario = *v;
        }
        t.pattern = j.at("pattern").get<std::string>();
        templates.push_back(std::move(t));
    }
    return TemplateRegistry(std::move(templates));
}

inline void TemplateRegistry::save(const std::filesystem::path& path) const {
    std::vector<json> records;
    records.reserve(templates_.size());
    for (const auto& t : templates_) records.push_back(template_to_json(t));
    write_jsonl(path, records);
}

}  // namespace hkfr
