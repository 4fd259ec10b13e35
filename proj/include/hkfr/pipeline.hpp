#pragma once

#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hkfr/behavior_store.hpp"
#include "hkfr/config.hpp"
#include "hkfr/metrics.hpp"
#include "hkfr/parallel.hpp"
#include "hkfr/prompt_engine.hpp"
#include "hkfr/recommender.hpp"
#include "hkfr/synthetic.hpp"

namespace hkfr {

// 2023-05-09 00:00:00 UTC, the default corpus cutoff.
inline constexpr std::int64_t kDefaultBaseCutoff = 1683590400;

struct SynthParams {
    std::size_t users = 100;
    std::uint64_t seed = 0;
    double noise_rate = 0.0;
    // 27 bundles x 11 events = 297 pre-cutoff events per user, so the whole
    // planted signal survives the 300-event sequence cap downstream.
    std::size_t horizon_days = 27;
    std::int64_t base_cutoff = kDefaultBaseCutoff;
    // Per-user cutoffs are staggered backwards over this many days so a
    // single split boundary lands between users (time-based train/test).
    std::size_t stagger_days = 14;
    fs::path out_dir;
};

struct SynthSummary {
    std::size_t users = 0;
    std::size_t events_written = 0;
    std::size_t labels_written = 0;
    std::string events_sha256;
};

// Writes events.jsonl (pre-cutoff only), labels.jsonl, profiles.jsonl, and
// catalog.jsonl. Post-cutoff events exist only to derive labels and are not
// part of the observable corpus.
inline SynthSummary run_synth(const SynthParams& params,
                              const Catalog& catalog = default_catalog()) {
    auto profiles = generate_profiles(params.users, params.seed, params.noise_rate, catalog);
    std::vector<json> event_records, label_records, profile_records;
    SynthSummary summary;
    summary.users = profiles.size();
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& profile = profiles[i];
        std::int64_t cutoff =
            params.base_cutoff -
            static_cast<std::int64_t>(params.stagger_days ? i % params.stagger_days : 0) * 86400;
        GeneratedStream stream = generate_events(profile, params.horizon_days, cutoff, catalog);
        for (const auto& e : stream.events) {
            if (e.timestamp > cutoff) continue;
            event_records.push_back(event_to_json(e));
            ++summary.events_written;
        }
        for (const auto& l : stream.labels) {
            label_records.push_back(label_to_json(l));
            ++summary.labels_written;
        }
        profile_records.push_back(profile_to_json(profile));
    }
    fs::create_directories(params.out_dir);
    write_jsonl(params.out_dir / "events.jsonl", event_records);
    write_jsonl(params.out_dir / "labels.jsonl", label_records);
    write_jsonl(params.out_dir / "profiles.jsonl", profile_records);
    save_catalog(catalog, params.out_dir / "catalog.jsonl");
    summary.events_sha256 = sha256_hex(read_file_bytes(params.out_dir / "events.jsonl"));
    return summary;
}

inline IngestSummary run_ingest(const fs::path& events_path, const fs::path& store_dir) {
    BehaviorStore store(store_dir);
    return store.ingest_file(events_path);
}

// Raw behavior text as the knowledge text: the no-HKF ablation.
class IdentityFusionBackend : public FusionBackend {
public:
    std::string backend_id() const override { return "identity"; }
    std::string model_name() const override { return "no-hkf-raw-text"; }
    bool deterministic() const override { return true; }
    std::string fuse_text(const std::string& behavior_text, const BehaviorSequence&,
                          const FacetSummary&) override {
        return behavior_text;
    }
};

inline std::unique_ptr<FusionBackend> make_fusion_backend(const BackendConfig& backend,
                                                          Variant variant,
                                                          RetryPolicy retry = {}) {
    if (variant == Variant::no_hkf) return std::make_unique<IdentityFusionBackend>();
    if (backend.kind == "mock") return std::make_unique<MockFusionBackend>();
    return std::make_unique<HttpFusionBackend>(ChatClient::from_env(backend.endpoint, retry),
                                               backend.model_name);
}

struct FuseParams {
    fs::path store_dir;
    fs::path out_path;
    BackendConfig backend;
    Variant variant = Variant::full;
    std::size_t concurrency = 4;
    std::size_t sequence_cap = 300;
    std::size_t max_input_chars = kMaxInputChars;
    std::string anonymize_salt;  // empty = no anonymization before rendering
    std::set<std::string> mask_fields = {"user_id", "subject_id"};
    RetryPolicy retry;
};

struct FuseSummary {
    std::size_t users = 0;
    std::size_t fused = 0;
    std::size_t cached = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (user_id, error)
};

// Fuses every stored user. Facets always come from the raw sequence; the
// rendered text sent to the backend is anonymized when a salt is set.
// Results are cached per (user, prompt, sequence digest) across reruns and
// written sorted by user_id regardless of completion order.
inline FuseSummary run_fuse(const FuseParams& params,
                            const TemplateRegistry& registry = TemplateRegistry::defaults()) {
    BehaviorStore store(params.store_dir);
    std::vector<std::string> users = store.list_users();

    std::map<std::string, KnowledgeDocument> cache;
    if (fs::exists(params.out_path)) {
        for (const auto& j : read_jsonl(params.out_path)) {
            KnowledgeDocument doc = knowledge_from_json(j);
            cache.emplace(doc.user_id, std::move(doc));
        }
    }

    auto backend = make_fusion_backend(params.backend, params.variant, params.retry);
    FusionConfig fusion_config{params.max_input_chars};

    FuseSummary summary;
    summary.users = users.size();
    std::vector<std::optional<KnowledgeDocument>> results(users.size());
    std::mutex summary_mutex;

    parallel_for_index(users.size(), params.concurrency, [&](std::size_t i) {
        const std::string& user_id = users[i];
        BehaviorSequence seq = store.get_user_sequence(user_id, params.sequence_cap);

        BehaviorSequence render_seq = seq;
        if (!params.anonymize_salt.empty()) {
            AnonymizationPolicy policy{params.anonymize_salt, params.mask_fields};
            for (auto& e : render_seq.events) e = anonymize_event(e, policy);
        }
        BehaviorText text = render_sequence(render_seq, registry);
        text.user_id = user_id;

        auto cached = cache.find(user_id);
        std::string expected_prompt_sha256 =
            sha256_hex(fusion_prompt(fusion_input_text(text, params.max_input_chars)));
        if (cached != cache.end() &&
            cached->second.provenance.prompt_sha256 == expected_prompt_sha256 &&
            cached->second.provenance.input_sha256 == sequence_digest(seq) &&
            cached->second.provenance.backend_id == backend->backend_id() &&
            cached->second.provenance.model_name == backend->model_name()) {
            std::lock_guard<std::mutex> lock(summary_mutex);
            ++summary.cached;
            results[i] = cached->second;
            return;
        }
        try {
            KnowledgeDocument doc = fuse(text, seq, *backend, fusion_config);
            std::lock_guard<std::mutex> lock(summary_mutex);
            ++summary.fused;
            results[i] = std::move(doc);
        } catch (const FusionError& ex) {
            std::lock_guard<std::mutex> lock(summary_mutex);
            summary.failures.emplace_back(user_id, ex.what());
        }
    });

    std::vector<json> records;
    for (const auto& doc : results) {
        if (doc) records.push_back(knowledge_to_json(*doc));
    }
    // users list is sorted, so records already are; keep it explicit anyway
    write_jsonl(params.out_path, records);
    return summary;
}

struct BuildDatasetSummary {
    std::size_t examples = 0;
    BuildSkips skips;
    ExportSummary export_summary;
};

inline BuildDatasetSummary run_build_dataset(const fs::path& knowledge_path,
                                             const fs::path& labels_path,
                                             const std::vector<TaskTemplate>& tasks,
                                             std::int64_t cutoff_timestamp, Variant variant,
                                             const fs::path& out_dir) {
    std::vector<KnowledgeDocument> knowledge;
    for (const auto& j : read_jsonl(knowledge_path)) knowledge.push_back(knowledge_from_json(j));
    std::vector<LabelRecord> labels;
    for (const auto& j : read_jsonl(labels_path)) labels.push_back(label_from_json(j));

    BuildDatasetSummary summary;
    auto examples = build_examples(knowledge, labels, tasks, cutoff_timestamp, variant,
                                   &summary.skips);
    summary.examples = examples.size();
    summary.export_summary = export_dataset(examples, out_dir);
    return summary;
}

inline std::unique_ptr<RecommendBackend> make_recommend_backend(const BackendConfig& backend,
                                                                Variant variant,
                                                                RetryPolicy retry = {}) {
    if (backend.kind == "mock") return std::make_unique<MockRecommendBackend>(variant);
    return std::make_unique<HttpRecommendBackend>(ChatClient::from_env(backend.endpoint, retry),
                                                  backend.model_name);
}

struct InferParams {
    fs::path store_dir;
    fs::path knowledge_path;
    fs::path labels_path;
    fs::path out_path;
    fs::path features_path;  // empty = no feature export
    std::vector<TaskTemplate> tasks;
    Catalog catalog = default_catalog();
    std::size_t k = 5;
    BackendConfig backend;
    Variant variant = Variant::full;
    std::size_t concurrency = 4;
    std::size_t sequence_cap = 300;
    std::int64_t cutoff_timestamp = kDefaultBaseCutoff;
    bool test_split_only = true;
    std::string features_task = "task_category_next";
    RetryPolicy retry;
};

struct InferSummary {
    std::size_t predictions = 0;
    std::size_t parse_failures = 0;
    std::size_t skipped_users = 0;
    std::vector<std::pair<std::string, std::string>> failures;
};

inline std::vector<CatalogEntry> candidates_for_kind(const Catalog& catalog, LabelKind kind) {
    switch (kind) {
        case LabelKind::category: return catalog.category_entries();
        case LabelKind::poi:
        case LabelKind::merchant: return catalog.merchants;
        case LabelKind::price_band: return catalog.price_band_entries();
    }
    return {};
}

// Runs inference for every labeled (user, task) pair in the chosen split.
// Predictions are written sorted by (user_id, task_id); optionally exports
// semantic feature rows for the configured category task.
inline InferSummary run_infer(const InferParams& params) {
    BehaviorStore store(params.store_dir);
    std::map<std::string, KnowledgeDocument> docs;
    for (const auto& j : read_jsonl(params.knowledge_path)) {
        KnowledgeDocument doc = knowledge_from_json(j);
        docs.emplace(doc.user_id, std::move(doc));
    }
    std::vector<LabelRecord> labels;
    for (const auto& j : read_jsonl(params.labels_path)) labels.push_back(label_from_json(j));

    // (user, kinds with labels) in the requested split
    std::map<std::string, std::set<LabelKind>> kinds_by_user;
    for (const auto& l : labels) {
        bool is_test = l.cutoff_timestamp >= params.cutoff_timestamp;
        if (params.test_split_only && !is_test) continue;
        kinds_by_user[l.user_id].insert(l.label_kind);
    }

    std::map<LabelKind, std::vector<CatalogEntry>> candidates;
    for (LabelKind kind : {LabelKind::category, LabelKind::poi, LabelKind::merchant,
                           LabelKind::price_band}) {
        candidates[kind] = candidates_for_kind(params.catalog, kind);
    }

    auto backend = make_recommend_backend(params.backend, params.variant, params.retry);

    std::vector<std::string> users;
    users.reserve(kinds_by_user.size());
    for (const auto& [user_id, _] : kinds_by_user) users.push_back(user_id);

    InferSummary summary;
    std::vector<std::vector<RankedRecommendation>> per_user(users.size());
    std::mutex summary_mutex;
    parallel_for_index(users.size(), params.concurrency, [&](std::size_t i) {
        const std::string& user_id = users[i];
        auto doc_it = docs.find(user_id);
        if (doc_it == docs.end()) {
            std::lock_guard<std::mutex> lock(summary_mutex);
            ++summary.skipped_users;
            std::cerr << "warning: no knowledge document for labeled user " << user_id
                      << "; skipped\n";
            return;
        }
        BehaviorSequence seq = store.get_user_sequence(user_id, params.sequence_cap);
        UserContext ctx = make_user_context(doc_it->second, seq);
        const auto& kinds = kinds_by_user.at(user_id);
        for (const auto& task : params.tasks) {
            if (!kinds.count(task.label_kind)) continue;
            try {
                per_user[i].push_back(recommend(user_id, task, params.k, *backend,
                                                candidates.at(task.label_kind), ctx));
            } catch (const BackendError& ex) {
                std::lock_guard<std::mutex> lock(summary_mutex);
                summary.failures.emplace_back(user_id + "/" + task.task_id, ex.what());
            }
        }
    });

    std::vector<RankedRecommendation> recs;
    for (auto& batch : per_user) {
        for (auto& r : batch) recs.push_back(std::move(r));
    }
    std::sort(recs.begin(), recs.end(),
              [](const RankedRecommendation& a, const RankedRecommendation& b) {
                  return std::tie(a.user_id, a.task_id) < std::tie(b.user_id, b.task_id);
              });
    std::vector<json> records;
    records.reserve(recs.size());
    for (const auto& r : recs) {
        if (r.parse_status == ParseStatus::failed) ++summary.parse_failures;
        records.push_back(recommendation_to_json(r));
    }
    summary.predictions = recs.size();
    write_jsonl(params.out_path, records);

    if (!params.features_path.empty()) {
        std::vector<KnowledgeDocument> doc_list;
        for (const auto& [_, d] : docs) doc_list.push_back(d);
        std::vector<RankedRecommendation> feature_recs;
        for (const auto& r : recs) {
            if (r.task_id == params.features_task) feature_recs.push_back(r);
        }
        auto rows = export_semantic_features(doc_list, feature_recs, params.catalog);
        write_features_csv(rows, params.features_path);
    }
    return summary;
}

struct EvalFilesResult {
    EvalReport report;
    std::string table;
};

inline EvalFilesResult run_eval_files(const std::vector<EvalInput>& inputs,
                                      const fs::path& labels_path,
                                      const std::vector<std::size_t>& ks,
                                      const std::vector<TaskTemplate>& tasks,
                                      const fs::path& report_json_path,
                                      const fs::path& report_table_path) {
    EvalFilesResult result;
    result.report = run_eval(inputs, labels_path, ks, tasks);
    result.table = render_report_table(result.report);
    if (!report_json_path.empty()) {
        if (report_json_path.has_parent_path()) {
            fs::create_directories(report_json_path.parent_path());
        }
        std::ofstream out(report_json_path, std::ios::trunc);
        out << report_to_json(result.report).dump(2) << '\n';
    }
    if (!report_table_path.empty()) {
        if (report_table_path.has_parent_path()) {
            fs::create_directories(report_table_path.parent_path());
        }
        std::ofstream out(report_table_path, std::ios::trunc);
        out << result.table;
    }
    return result;
}

struct AblateParams {
    fs::path store_dir;
    fs::path labels_path;
    fs::path out_dir;
    std::vector<TaskTemplate> tasks;
    Catalog catalog = default_catalog();
    std::size_t k = 5;
    BackendConfig backend;
    // Optional second backend (base model without tuning): enables the
    // no-IT axis alongside {full, no_hkf}.
    std::optional<BackendConfig> no_it_backend;
    std::size_t concurrency = 4;
    std::size_t sequence_cap = 300;
    std::int64_t cutoff_timestamp = kDefaultBaseCutoff;
    std::vector<std::size_t> ks = {5, 10};
    RetryPolicy retry;
};

// Fuse + infer per ablation variant, then one combined report.
inline EvalFilesResult run_ablate(const AblateParams& params) {
    struct Axis {
        std::string name;
        Variant variant;
        BackendConfig backend;
    };
    std::vector<Axis> axes = {{"full", Variant::full, params.backend},
                              {"no_hkf", Variant::no_hkf, params.backend}};
    if (params.no_it_backend) {
        axes.push_back({"no_it", Variant::full, *params.no_it_backend});
    }

    std::vector<EvalInput> inputs;
    for (const auto& axis : axes) {
        fs::path knowledge_path = params.out_dir / ("knowledge_" + axis.name + ".jsonl");
        fs::path predictions_path = params.out_dir / ("predictions_" + axis.name + ".jsonl");

        FuseParams fuse_params;
        fuse_params.store_dir = params.store_dir;
        fuse_params.out_path = knowledge_path;
        fuse_params.backend = axis.backend;
        fuse_params.variant = axis.variant;
        fuse_params.concurrency = params.concurrency;
        fuse_params.sequence_cap = params.sequence_cap;
        fuse_params.retry = params.retry;
        run_fuse(fuse_params);

        InferParams infer_params;
        infer_params.store_dir = params.store_dir;
        infer_params.knowledge_path = knowledge_path;
        infer_params.labels_path = params.labels_path;
        infer_params.out_path = predictions_path;
        infer_params.tasks = params.tasks;
        infer_params.catalog = params.catalog;
        infer_params.k = params.k;
        infer_params.backend = axis.backend;
        infer_params.variant = axis.variant;
        infer_params.concurrency = params.concurrency;
        infer_params.sequence_cap = params.sequence_cap;
        infer_params.cutoff_timestamp = params.cutoff_timestamp;
        infer_params.retry = params.retry;
        run_infer(infer_params);

        inputs.push_back({axis.name, predictions_path});
    }
    return run_eval_files(inputs, params.labels_path, params.ks, params.tasks,
                          params.out_dir / "report.json", params.out_dir / "report.txt");
}

}  // namespace hkfr
