#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "hkfr/fusion.hpp"
#include "hkfr/synthetic.hpp"

namespace hkfr {

enum class Variant { full, no_hkf };

inline const char* to_string(Variant v) {
    return v == Variant::full ? "full" : "no_hkf";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no_hkf") return Variant::no_hkf;
    return std::nullopt;
}

struct TaskTemplate {
    std::string task_id;
    LabelKind label_kind = LabelKind::category;
    std::string instruction_text;
};

// The default recommendation-task registry: 8 category-preference phrasings,
// 6 POI/merchant next-click phrasings, 4 price-band phrasings, and 2
// combined-preference phrasings. Exactly 20 tasks.
inline const std::vector<TaskTemplate>& default_task_registry() {
    static const std::vector<TaskTemplate> tasks = {
        {"task_category_next", LabelKind::category,
         "Predict which food categories this user will order from next. Rank the most likely "
         "categories first."},
        {"task_category_pref", LabelKind::category,
         "List this user's preferred meal categories, ranked from strongest to weakest "
         "preference."},
        {"task_category_reorder", LabelKind::category,
         "Which categories is this user most likely to reorder from soon? Rank them."},
        {"task_category_weekend", LabelKind::category,
         "Rank the categories this user would most plausibly pick for a weekend order."},
        {"task_category_craving", LabelKind::category,
         "Based on this user's history, rank the categories that best match their cravings."},
        {"task_category_homepage", LabelKind::category,
         "Rank the categories to feature on this user's personalized homepage."},
        {"task_category_push", LabelKind::category,
         "Choose categories for a promotional push notification to this user, ranked by likely "
         "interest."},
        {"task_category_longterm", LabelKind::category,
         "Rank the categories that define this user's long-term dining taste."},
        {"task_poi_next_click", LabelKind::poi,
         "Predict the POIs (restaurants) this user will click next. Rank the most likely first."},
        {"task_poi_revisit", LabelKind::poi,
         "Rank the POIs this user is most likely to revisit for an order."},
        {"task_poi_discover", LabelKind::poi,
         "Rank the POIs this user would most enjoy ordering from next."},
        {"task_merchant_next_order", LabelKind::merchant,
         "Predict which merchants this user will order from next. Rank them."},
        {"task_merchant_favorite", LabelKind::merchant,
         "Rank this user's favorite merchants based on their behavior."},
        {"task_merchant_lunch", LabelKind::merchant,
         "Rank the merchants this user would most likely pick for lunch today."},
        {"task_price_band_next", LabelKind::price_band,
         "Predict the price band of this user's next order. Rank the bands from most to least "
         "likely."},
        {"task_price_band_comfort", LabelKind::price_band,
         "Rank the price bands this user is most comfortable ordering in."},
        {"task_price_band_promo", LabelKind::price_band,
         "For a discount campaign, rank the price bands that best fit this user."},
        {"task_price_band_dinner", LabelKind::price_band,
         "Rank the likely price bands for this user's next dinner order."},
        {"task_combined_taste_budget", LabelKind::category,
         "Considering both taste and budget, rank the categories this user is most likely to "
         "order next."},
        {"task_combined_context", LabelKind::category,
         "Using this user's preferred merchants and price range as context, rank their most "
         "likely next-order categories."},
    };
    return tasks;
}

inline json task_to_json(const TaskTemplate& t) {
    json j;
    j["task_id"] = t.task_id;
    j["label_kind"] = to_string(t.label_kind);
    j["instruction_text"] = t.instruction_text;
    return j;
}

inline TaskTemplate task_from_json(const json& j) {
    TaskTemplate t;
    t.task_id = j.at("task_id").get<std::string>();
    auto kind = parse_label_kind(j.at("label_kind").get<std::string>());
    if (!kind) throw JsonlError("bad label_kind in task: " + j.dump());
    t.label_kind = *kind;
    t.instruction_text = j.at("instruction_text").get<std::string>();
    return t;
}

inline std::vector<TaskTemplate> load_task_registry(const std::filesystem::path& path) {
    std::vector<TaskTemplate> tasks;
    std::map<std::string, bool> seen;
    for (const auto& j : read_jsonl(path)) {
        TaskTemplate t = task_from_json(j);
        if (seen.count(t.task_id)) throw JsonlError("duplicate task_id: " + t.task_id);
        seen[t.task_id] = true;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline void save_task_registry(const std::vector<TaskTemplate>& tasks,
                               const std::filesystem::path& path) {
    std::vector<json> records;
    records.reserve(tasks.size());
    for (const auto& t : tasks) records.push_back(task_to_json(t));
    write_jsonl(path, records);
}

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct InstructionExample {
    std::string example_id;
    std::string task_id;
    std::string instruction;
    std::string input;
    std::string output;
    std::string user_id;
    Split split = Split::train;
};

struct BuildSkips {
    std::size_t users_without_knowledge = 0;
    std::vector<std::string> skipped_users;
};

inline constexpr std::size_t kMaxInputChars = 8000;

// One example per (user, task) where a label of the task's kind exists.
// Input is the knowledge text (or raw behavior text under no_hkf — the
// caller materializes that variant in the documents). Split follows the
// label's cutoff against the given boundary. Output order: (user_id, task_id).
inline std::vector<InstructionExample> build_examples(
    const std::vector<KnowledgeDocument>& knowledge, const std::vector<LabelRecord>& labels,
    const std::vector<TaskTemplate>& tasks, std::int64_t cutoff_timestamp, Variant variant,
    BuildSkips* skips = nullptr) {
    (void)variant;  // the variant lives in the documents' text; tracked for provenance
    std::map<std::string, const KnowledgeDocument*> doc_by_user;
    for (const auto& doc : knowledge) doc_by_user[doc.user_id] = &doc;

    // First label per (user, kind) wins.
    std::map<std::pair<std::string, LabelKind>, const LabelRecord*> label_by_user_kind;
    for (const auto& l : labels) {
        label_by_user_kind.emplace(std::make_pair(l.user_id, l.label_kind), &l);
    }

    std::vector<InstructionExample> examples;
    std::map<std::string, bool> skipped;
    for (const auto& [key, label] : label_by_user_kind) {
        const auto& [user_id, kind] = key;
        auto doc_it = doc_by_user.find(user_id);
        if (doc_it == doc_by_user.end()) {
            if (!skipped.count(user_id)) {
                skipped[user_id] = true;
                if (skips) {
                    ++skips->users_without_knowledge;
                    skips->skipped_users.push_back(user_id);
                }
            }
            continue;
        }
        for (const auto& task : tasks) {
            if (task.label_kind != kind) continue;
            InstructionExample ex;
            ex.example_id = user_id + ":" + task.task_id;
            ex.task_id = task.task_id;
            ex.instruction = task.instruction_text;
            ex.input = doc_it->second->text.substr(0, kMaxInputChars);
            ex.output = label->label_value;
            ex.user_id = user_id;
            ex.split = label->cutoff_timestamp < cutoff_timestamp ? Split::train : Split::test;
            examples.push_back(std::move(ex));
        }
    }
    std::sort(examples.begin(), examples.end(),
              [](const InstructionExample& a, const InstructionExample& b) {
                  return std::tie(a.user_id, a.task_id) < std::tie(b.user_id, b.task_id);
              });
    return examples;
}

struct ExportSummary {
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::string sha256;  // over the exact bytes, train file then test file
};

// Trainer hand-off: line-delimited records with exactly
// {instruction, input, output}, split into train.jsonl and test.jsonl.
inline ExportSummary export_dataset(const std::vector<InstructionExample>& examples,
                                    const std::filesystem::path& out_dir) {
    if (examples.empty()) throw std::invalid_argument("cannot export an empty dataset");
    std::vector<json> train, test;
    for (const auto& ex : examples) {
        json j;
        j["instruction"] = ex.instruction;
        j["input"] = ex.input;
        j["output"] = ex.output;
        (ex.split == Split::train ? train : test).push_back(std::move(j));
    }
    std::filesystem::create_directories(out_dir);
    write_jsonl(out_dir / "train.jsonl", train);
    write_jsonl(out_dir / "test.jsonl", test);

    ExportSummary summary;
    summary.train_count = train.size();
    summary.test_count = test.size();
    summary.sha256 = sha256_hex(read_file_bytes(out_dir / "train.jsonl") +
                                read_file_bytes(out_dir / "test.jsonl"));
    return summary;
}

struct DatasetTriple {
    std::string instruction;
    std::string input;
    std::string output;
};

inline std::vector<DatasetTriple> parse_dataset_file(const std::filesystem::path& path) {
    std::vector<DatasetTriple> out;
    for (const auto& j : read_jsonl(path)) {
        DatasetTriple t;
        t.instruction = j.at("instruction").get<std::string>();
        t.input = j.at("input").get<std::string>();
        t.output = j.at("output").get<std::string>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace hkfr
