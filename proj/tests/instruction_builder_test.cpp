#include "hkfr/instruction_builder.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

namespace {

using namespace hkfr;

namespace fs = std::filesystem;

KnowledgeDocument doc_for(const std::string& user, const std::string& text) {
    KnowledgeDocument doc;
    doc.user_id = user;
    doc.text = text;
    doc.provenance.backend_id = "mock";
    return doc;
}

LabelRecord label_for(const std::string& user, LabelKind kind, const std::string& value,
                      std::int64_t cutoff) {
    LabelRecord l;
    l.user_id = user;
    l.task_id = to_string(kind);
    l.label_kind = kind;
    l.label_value = value;
    l.cutoff_timestamp = cutoff;
    return l;
}

std::vector<TaskTemplate> two_tasks() {
    return {{"task_a_category", LabelKind::category, "Rank likely categories."},
            {"task_b_category", LabelKind::category, "Rank favorite categories."}};
}

TEST(TaskRegistry, DefaultHasExactlyTwentyUniqueTasks) {
    const auto& tasks = default_task_registry();
    EXPECT_EQ(tasks.size(), 20u);
    std::set<std::string> ids;
    std::map<LabelKind, int> by_kind;
    for (const auto& t : tasks) {
        ids.insert(t.task_id);
        ++by_kind[t.label_kind];
        EXPECT_FALSE(t.instruction_text.empty());
    }
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_EQ(by_kind[LabelKind::category], 10);  // 8 category + 2 combined
    EXPECT_EQ(by_kind[LabelKind::poi], 3);
    EXPECT_EQ(by_kind[LabelKind::merchant], 3);
    EXPECT_EQ(by_kind[LabelKind::price_band], 4);
}

TEST(TaskRegistry, SaveLoadRoundTripAndDuplicateRejection) {
    fs::path path = fs::temp_directory_path() / "hkfr_tasks_test.jsonl";
    save_task_registry(default_task_registry(), path);
    auto loaded = load_task_registry(path);
    ASSERT_EQ(loaded.size(), 20u);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(task_to_json(loaded[i]).dump(), task_to_json(default_task_registry()[i]).dump());
    }
    std::vector<TaskTemplate> dup = {default_task_registry()[0], default_task_registry()[0]};
    save_task_registry(dup, path);
    EXPECT_THROW(load_task_registry(path), JsonlError);
    fs::remove(path);
}

TEST(BuildExamples, CardinalityUsersTimesMatchingTasks) {
    std::vector<KnowledgeDocument> docs;
    std::vector<LabelRecord> labels;
    for (int i = 0; i < 10; ++i) {
        std::string user = "u" + std::to_string(i);
        docs.push_back(doc_for(user, "prefers spicy food"));
        labels.push_back(label_for(user, LabelKind::category, "Sichuan", 100));
    }
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full);
    EXPECT_EQ(examples.size(), 20u);  // 10 users x 2 applicable tasks
    for (const auto& ex : examples) {
        EXPECT_FALSE(ex.instruction.empty());
        EXPECT_FALSE(ex.input.empty());
        EXPECT_EQ(ex.output, "Sichuan");
        EXPECT_EQ(ex.split, Split::train);
    }
}

TEST(BuildExamples, KindMismatchEmitsNothing) {
    std::vector<KnowledgeDocument> docs = {doc_for("u1", "text")};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "Sichuan", 100)};
    std::vector<TaskTemplate> poi_task = {
        {"task_poi", LabelKind::poi, "Rank POIs this user will click."}};
    auto examples = build_examples(docs, labels, poi_task, 200, Variant::full);
    EXPECT_TRUE(examples.empty());
}

TEST(BuildExamples, CutoffSplitsStraddlingLabels) {
    std::vector<KnowledgeDocument> docs = {doc_for("u_early", "a"), doc_for("u_late", "b")};
    std::vector<LabelRecord> labels = {
        label_for("u_early", LabelKind::category, "Sichuan", 100),
        label_for("u_late", LabelKind::category, "Dessert", 300)};
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full);
    ASSERT_EQ(examples.size(), 4u);
    for (const auto& ex : examples) {
        if (ex.user_id == "u_early") EXPECT_EQ(ex.split, Split::train);
        if (ex.user_id == "u_late") EXPECT_EQ(ex.split, Split::test);
    }
}

TEST(BuildExamples, MissingKnowledgeIsASkipNotAFailure) {
    std::vector<KnowledgeDocument> docs = {doc_for("u1", "text")};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "Sichuan", 100),
                                       label_for("ghost", LabelKind::category, "Dessert", 100)};
    BuildSkips skips;
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full, &skips);
    EXPECT_EQ(examples.size(), 2u);
    EXPECT_EQ(skips.users_without_knowledge, 1u);
    ASSERT_EQ(skips.skipped_users.size(), 1u);
    EXPECT_EQ(skips.skipped_users[0], "ghost");
}

TEST(BuildExamples, DeterministicOrderByUserThenTask) {
    std::vector<KnowledgeDocument> docs = {doc_for("u2", "x"), doc_for("u1", "y")};
    std::vector<LabelRecord> labels = {label_for("u2", LabelKind::category, "A", 100),
                                       label_for("u1", LabelKind::category, "B", 100)};
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full);
    ASSERT_EQ(examples.size(), 4u);
    EXPECT_EQ(examples[0].user_id, "u1");
    EXPECT_EQ(examples[0].task_id, "task_a_category");
    EXPECT_EQ(examples[1].user_id, "u1");
    EXPECT_EQ(examples[1].task_id, "task_b_category");
    EXPECT_EQ(examples[2].user_id, "u2");
}

TEST(BuildExamples, InputIsCappedAt8000Chars) {
    std::string huge(20000, 'x');
    std::vector<KnowledgeDocument> docs = {doc_for("u1", huge)};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "A", 100)};
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full);
    ASSERT_FALSE(examples.empty());
    EXPECT_EQ(examples[0].input.size(), kMaxInputChars);
}

TEST(ExportDataset, SplitCountsAndDigestStability) {
    fs::path dir = fs::temp_directory_path() / "hkfr_export_test";
    fs::remove_all(dir);
    std::vector<KnowledgeDocument> docs = {doc_for("u1", "a"), doc_for("u2", "b"),
                                           doc_for("u3", "c")};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "A", 100),
                                       label_for("u2", LabelKind::category, "B", 100),
                                       label_for("u3", LabelKind::category, "C", 300)};
    std::vector<TaskTemplate> one_task = {two_tasks()[0]};
    auto examples = build_examples(docs, labels, one_task, 200, Variant::full);
    ASSERT_EQ(examples.size(), 3u);

    auto first = export_dataset(examples, dir);
    EXPECT_EQ(first.train_count, 2u);
    EXPECT_EQ(first.test_count, 1u);
    auto second = export_dataset(examples, dir);
    EXPECT_EQ(second.sha256, first.sha256);

    EXPECT_THROW(export_dataset({}, dir), std::invalid_argument);
    fs::remove_all(dir);
}

TEST(ExportDataset, RoundTripIsLossless) {
    fs::path dir = fs::temp_directory_path() / "hkfr_roundtrip_test";
    fs::remove_all(dir);
    std::vector<KnowledgeDocument> docs = {
        doc_for("u1", "line with \"quotes\" and\nnewlines and unicode 白菜")};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "Bubble Tea", 100)};
    auto examples = build_examples(docs, labels, two_tasks(), 200, Variant::full);
    export_dataset(examples, dir);

    auto parsed = parse_dataset_file(dir / "train.jsonl");
    ASSERT_EQ(parsed.size(), examples.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        EXPECT_EQ(parsed[i].instruction, examples[i].instruction);
        EXPECT_EQ(parsed[i].input, examples[i].input);
        EXPECT_EQ(parsed[i].output, examples[i].output);
    }
    fs::remove_all(dir);
}

TEST(BuildExamples, VariantChangesOnlyTheInputField) {
    std::vector<KnowledgeDocument> fused = {doc_for("u1", "fused summary")};
    std::vector<KnowledgeDocument> raw = {doc_for("u1", "raw behavior lines")};
    std::vector<LabelRecord> labels = {label_for("u1", LabelKind::category, "Sichuan", 100)};
    auto full = build_examples(fused, labels, two_tasks(), 200, Variant::full);
    auto no_hkf = build_examples(raw, labels, two_tasks(), 200, Variant::no_hkf);
    ASSERT_EQ(full.size(), no_hkf.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        EXPECT_NE(full[i].input, no_hkf[i].input);
        EXPECT_EQ(full[i].instruction, no_hkf[i].instruction);
        EXPECT_EQ(full[i].output, no_hkf[i].output);
        EXPECT_EQ(full[i].split, no_hkf[i].split);
        EXPECT_EQ(full[i].task_id, no_hkf[i].task_id);
    }
}

TEST(BuildExamples, NoSplitLeakagePerUserTask) {
    // same task never lands in both splits for one user
    std::vector<KnowledgeDocument> docs;
    std::vector<LabelRecord> labels;
    for (int i = 0; i < 30; ++i) {
        std::string user = "u" + std::to_string(i);
        docs.push_back(doc_for(user, "t"));
        labels.push_back(label_for(user, LabelKind::category, "A", 100 + i * 10));
    }
    auto examples = build_examples(docs, labels, two_tasks(), 250, Variant::full);
    std::map<std::pair<std::string, std::string>, std::set<Split>> splits;
    for (const auto& ex : examples) {
        splits[{ex.user_id, ex.task_id}].insert(ex.split);
    }
    for (const auto& [key, set] : splits) {
        EXPECT_EQ(set.size(), 1u);
    }
}

}  // namespace
