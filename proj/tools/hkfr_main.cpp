// hkfr — batch pipeline for heterogeneous-knowledge-fusion recommendation:
// synth, ingest, fuse, build-dataset, infer, eval, ablate. Stage boundaries
// are files; every stage can be inspected, diffed, and rerun.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "hkfr/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConsistency = 2;
constexpr int kExitBackendUnavailable = 3;

struct CommonOpts {
    std::string config_path;
    hkfr::RunConfig config;
};

void add_config_option(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run-config file; flags override it");
}

void load_config_if_set(CommonOpts& opts) {
    if (!opts.config_path.empty()) {
        opts.config = hkfr::load_config(opts.config_path);
    }
}

void log_run_header(const hkfr::RunConfig& config) {
    std::cout << "config sha256=" << hkfr::config_digest(config) << " seed=" << config.seed
              << "\n";
}

std::vector<hkfr::TaskTemplate> resolve_tasks(const std::string& tasks_path) {
    if (tasks_path.empty()) return hkfr::default_task_registry();
    return hkfr::load_task_registry(tasks_path);
}

hkfr::Catalog resolve_catalog(const std::string& catalog_path) {
    if (catalog_path.empty()) return hkfr::default_catalog();
    return hkfr::load_catalog(catalog_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HKFR pipeline: heterogeneous user-behavior fusion and recommendation"};
    app.require_subcommand(1);

    CommonOpts opts;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic behavior corpus with labels");
    std::size_t synth_users = 100;
    std::uint64_t synth_seed = 0;
    double synth_noise = 0.0;
    std::size_t synth_horizon = 27;
    std::size_t synth_stagger = 14;
    std::int64_t synth_cutoff = hkfr::kDefaultBaseCutoff;
    std::string synth_out = "data";
    add_config_option(synth, opts);
    synth->add_option("--users", synth_users, "number of users")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "corpus seed");
    synth->add_option("--noise", synth_noise, "noise rate in [0,1)")
        ->check(CLI::Range(0.0, 0.999));
    synth->add_option("--horizon-days", synth_horizon, "pre-cutoff days (one order bundle per day)")
        ->check(CLI::PositiveNumber);
    synth->add_option("--stagger-days", synth_stagger, "per-user cutoff stagger window");
    synth->add_option("--cutoff", synth_cutoff, "base cutoff epoch seconds");
    synth->add_option("--out", synth_out, "output directory");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Ingest an events JSONL file into the store");
    std::string ingest_events = "data/events.jsonl";
    std::string ingest_store;
    add_config_option(ingest, opts);
    ingest->add_option("--events", ingest_events, "events.jsonl path");
    ingest->add_option("--store", ingest_store, "store directory");

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Fuse stored behavior into knowledge documents");
    std::string fuse_store, fuse_out = "data/knowledge.jsonl", fuse_variant, fuse_backend,
                fuse_endpoint, fuse_model, fuse_salt, fuse_templates;
    std::vector<std::string> fuse_mask;
    add_config_option(fuse, opts);
    fuse->add_option("--store", fuse_store, "store directory");
    fuse->add_option("--out", fuse_out, "knowledge output path");
    fuse->add_option("--variant", fuse_variant, "full|no_hkf");
    fuse->add_option("--backend", fuse_backend, "mock|http");
    fuse->add_option("--endpoint", fuse_endpoint, "http backend endpoint");
    fuse->add_option("--model", fuse_model, "backend model name");
    fuse->add_option("--anonymize-salt", fuse_salt,
                     "mask id fields in rendered text before the backend sees it");
    fuse->add_option("--mask", fuse_mask, "fields to mask (default user_id subject_id)");
    fuse->add_option("--templates", fuse_templates, "template registry JSONL (default built-in)");

    // build-dataset
    auto* build = app.add_subcommand("build-dataset",
                                     "Build the instruction dataset and export train/test files");
    std::string build_knowledge = "data/knowledge.jsonl", build_labels = "data/labels.jsonl",
                build_out = "data/dataset", build_variant, build_tasks;
    std::int64_t build_cutoff = 0;
    bool build_cutoff_set = false;
    add_config_option(build, opts);
    build->add_option("--knowledge", build_knowledge, "knowledge.jsonl path");
    build->add_option("--labels", build_labels, "labels.jsonl path");
    build->add_option("--tasks", build_tasks, "task registry JSONL (default built-in 20)");
    build->add_option("--cutoff", build_cutoff, "train/test split boundary (epoch seconds)")
        ->each([&](const std::string&) { build_cutoff_set = true; });
    build->add_option("--variant", build_variant, "full|no_hkf");
    build->add_option("--out", build_out, "dataset output directory");

    // infer
    auto* infer = app.add_subcommand("infer", "Run recommendation inference over labeled users");
    std::string infer_store, infer_knowledge = "data/knowledge.jsonl",
                infer_labels = "data/labels.jsonl", infer_out = "data/predictions.jsonl",
                infer_features, infer_catalog, infer_tasks_path, infer_variant, infer_backend,
                infer_endpoint, infer_model, infer_task_filter;
    std::size_t infer_k = 5;
    std::int64_t infer_cutoff = 0;
    bool infer_cutoff_set = false;
    bool infer_all_splits = false;
    add_config_option(infer, opts);
    infer->add_option("--store", infer_store, "store directory");
    infer->add_option("--knowledge", infer_knowledge, "knowledge.jsonl path");
    infer->add_option("--labels", infer_labels, "labels.jsonl path");
    infer->add_option("--out", infer_out, "predictions output path");
    infer->add_option("--features", infer_features, "semantic features CSV output path");
    infer->add_option("--catalog", infer_catalog, "candidate catalog JSONL (default built-in)");
    infer->add_option("--tasks", infer_tasks_path, "task registry JSONL (default built-in 20)");
    infer->add_option("--task", infer_task_filter, "restrict inference to one task_id");
    infer->add_option("--k", infer_k, "ranked list size")->check(CLI::PositiveNumber);
    infer->add_option("--cutoff", infer_cutoff, "split boundary (epoch seconds)")
        ->each([&](const std::string&) { infer_cutoff_set = true; });
    infer->add_flag("--all-splits", infer_all_splits, "infer for train and test labels");
    infer->add_option("--variant", infer_variant, "full|no_hkf");
    infer->add_option("--backend", infer_backend, "mock|http");
    infer->add_option("--endpoint", infer_endpoint, "http backend endpoint");
    infer->add_option("--model", infer_model, "backend model name");

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against labels (HR@k, NDCG@k)");
    std::vector<std::string> eval_predictions;
    std::vector<std::string> eval_variants;
    std::string eval_labels = "data/labels.jsonl", eval_tasks, eval_report = "data/report.json",
                eval_table = "data/report.txt";
    std::vector<std::size_t> eval_ks;
    add_config_option(eval, opts);
    eval->add_option("--predictions", eval_predictions, "prediction file(s)")->required();
    eval->add_option("--variant-names", eval_variants,
                     "variant name per predictions file (default full, ...)");
    eval->add_option("--labels", eval_labels, "labels.jsonl path");
    eval->add_option("--tasks", eval_tasks, "task registry JSONL (default built-in 20)");
    eval->add_option("--ks", eval_ks, "cutoffs (default 5 10)");
    eval->add_option("--report", eval_report, "machine-readable report output");
    eval->add_option("--table", eval_table, "rendered table output");

    // ablate
    auto* ablate = app.add_subcommand(
        "ablate", "Run fuse+infer+eval for {full, no_hkf} (and no_it with a second backend)");
    std::string ablate_store, ablate_labels = "data/labels.jsonl", ablate_out = "data/ablation",
                ablate_catalog, ablate_tasks, ablate_backend, ablate_endpoint, ablate_model,
                ablate_no_it_endpoint, ablate_no_it_model;
    std::size_t ablate_k = 5;
    std::int64_t ablate_cutoff = 0;
    bool ablate_cutoff_set = false;
    add_config_option(ablate, opts);
    ablate->add_option("--store", ablate_store, "store directory");
    ablate->add_option("--labels", ablate_labels, "labels.jsonl path");
    ablate->add_option("--out", ablate_out, "ablation output directory");
    ablate->add_option("--catalog", ablate_catalog, "candidate catalog JSONL");
    ablate->add_option("--tasks", ablate_tasks, "task registry JSONL");
    ablate->add_option("--k", ablate_k, "ranked list size");
    ablate->add_option("--cutoff", ablate_cutoff, "split boundary (epoch seconds)")
        ->each([&](const std::string&) { ablate_cutoff_set = true; });
    ablate->add_option("--backend", ablate_backend, "mock|http");
    ablate->add_option("--endpoint", ablate_endpoint, "http backend endpoint");
    ablate->add_option("--model", ablate_model, "backend model name");
    ablate->add_option("--no-it-endpoint", ablate_no_it_endpoint,
                       "base-model endpoint for the no_it axis");
    ablate->add_option("--no-it-model", ablate_no_it_model, "base-model name for the no_it axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        load_config_if_set(opts);
        hkfr::RunConfig& cfg = opts.config;

        auto apply_backend_flags = [&](const std::string& kind, const std::string& endpoint,
                                       const std::string& model) {
            if (!kind.empty()) cfg.backend.kind = kind;
            if (!endpoint.empty()) {
                cfg.backend.endpoint = endpoint;
                if (kind.empty()) cfg.backend.kind = "http";
            }
            if (!model.empty()) cfg.backend.model_name = model;
        };
        auto apply_variant_flag = [&](const std::string& v) {
            if (v.empty()) return;
            auto parsed = hkfr::parse_variant(v);
            if (!parsed) throw std::invalid_argument("bad variant: " + v);
            cfg.variant = *parsed;
        };

        if (synth->parsed()) {
            cfg.seed = synth_seed;
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            hkfr::SynthParams params;
            params.users = synth_users;
            params.seed = synth_seed;
            params.noise_rate = synth_noise;
            params.horizon_days = synth_horizon;
            params.stagger_days = synth_stagger;
            params.base_cutoff = synth_cutoff;
            params.out_dir = synth_out;
            auto summary = hkfr::run_synth(params);
            std::cout << "synth: users=" << summary.users << " events=" << summary.events_written
                      << " labels=" << summary.labels_written
                      << " events_sha256=" << summary.events_sha256 << "\n";
        } else if (ingest->parsed()) {
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            std::string store = ingest_store.empty() ? cfg.store_path : ingest_store;
            auto summary = hkfr::run_ingest(ingest_events, store);
            std::cout << "ingest: accepted=" << summary.accepted
                      << " rejected=" << summary.rejected
                      << " duplicates=" << summary.duplicates;
            for (const auto& [reason, count] : summary.reject_reasons) {
                std::cout << " [" << reason << "=" << count << "]";
            }
            std::cout << "\n";
        } else if (fuse->parsed()) {
            apply_backend_flags(fuse_backend, fuse_endpoint, fuse_model);
            apply_variant_flag(fuse_variant);
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            hkfr::FuseParams params;
            params.store_dir = fuse_store.empty() ? cfg.store_path : fuse_store;
            params.out_path = fuse_out;
            params.backend = cfg.backend;
            params.variant = cfg.variant;
            params.concurrency = cfg.concurrency;
            params.sequence_cap = cfg.sequence_cap;
            params.anonymize_salt = fuse_salt;
            if (!fuse_mask.empty()) {
                params.mask_fields = std::set<std::string>(fuse_mask.begin(), fuse_mask.end());
            }
            auto registry = fuse_templates.empty() ? hkfr::TemplateRegistry::defaults()
                                                   : hkfr::TemplateRegistry::load(fuse_templates);
            auto summary = hkfr::run_fuse(params, registry);
            std::cout << "fuse: users=" << summary.users << " fused=" << summary.fused
                      << " cached=" << summary.cached << " failures=" << summary.failures.size()
                      << " variant=" << to_string(params.variant) << "\n";
            for (const auto& [user, err] : summary.failures) {
                std::cerr << "fuse failure: " << user << ": " << err << "\n";
            }
            if (!summary.failures.empty() && summary.fused == 0 && summary.cached == 0) {
                return kExitBackendUnavailable;
            }
        } else if (build->parsed()) {
            apply_variant_flag(build_variant);
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            std::int64_t cutoff = build_cutoff_set ? build_cutoff : cfg.cutoff_timestamp;
            auto summary = hkfr::run_build_dataset(build_knowledge, build_labels,
                                                   resolve_tasks(build_tasks), cutoff,
                                                   cfg.variant, build_out);
            std::cout << "build-dataset: examples=" << summary.examples
                      << " train=" << summary.export_summary.train_count
                      << " test=" << summary.export_summary.test_count
                      << " skipped_users=" << summary.skips.users_without_knowledge
                      << " sha256=" << summary.export_summary.sha256 << "\n";
        } else if (infer->parsed()) {
            apply_backend_flags(infer_backend, infer_endpoint, infer_model);
            apply_variant_flag(infer_variant);
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            hkfr::InferParams params;
            params.store_dir = infer_store.empty() ? cfg.store_path : infer_store;
            params.knowledge_path = infer_knowledge;
            params.labels_path = infer_labels;
            params.out_path = infer_out;
            params.features_path = infer_features;
            params.tasks = resolve_tasks(infer_tasks_path);
            if (!infer_task_filter.empty()) {
                std::vector<hkfr::TaskTemplate> filtered;
                for (const auto& t : params.tasks) {
                    if (t.task_id == infer_task_filter) filtered.push_back(t);
                }
                if (filtered.empty()) {
                    throw std::invalid_argument("unknown task: " + infer_task_filter);
                }
                params.tasks = filtered;
            }
            params.catalog = resolve_catalog(infer_catalog);
            params.k = infer_k;
            params.backend = cfg.backend;
            params.variant = cfg.variant;
            params.concurrency = cfg.concurrency;
            params.sequence_cap = cfg.sequence_cap;
            params.cutoff_timestamp = infer_cutoff_set ? infer_cutoff : cfg.cutoff_timestamp;
            params.test_split_only = !infer_all_splits;
            auto summary = hkfr::run_infer(params);
            std::cout << "infer: predictions=" << summary.predictions
                      << " parse_failures=" << summary.parse_failures
                      << " skipped_users=" << summary.skipped_users
                      << " backend_failures=" << summary.failures.size() << "\n";
            if (!summary.failures.empty() && summary.predictions == 0) {
                return kExitBackendUnavailable;
            }
        } else if (eval->parsed()) {
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            std::vector<hkfr::EvalInput> inputs;
            for (std::size_t i = 0; i < eval_predictions.size(); ++i) {
                std::string name = i < eval_variants.size()
                                       ? eval_variants[i]
                                       : (i == 0 ? std::string(to_string(cfg.variant))
                                                 : "variant" + std::to_string(i));
                inputs.push_back({name, eval_predictions[i]});
            }
            auto ks = eval_ks.empty() ? cfg.ks : eval_ks;
            auto result = hkfr::run_eval_files(inputs, eval_labels, ks,
                                               resolve_tasks(eval_tasks), eval_report,
                                               eval_table);
            std::cout << result.table;
        } else if (ablate->parsed()) {
            apply_backend_flags(ablate_backend, ablate_endpoint, ablate_model);
            hkfr::validate_config(cfg);
            log_run_header(cfg);
            hkfr::AblateParams params;
            params.store_dir = ablate_store.empty() ? cfg.store_path : ablate_store;
            params.labels_path = ablate_labels;
            params.out_dir = ablate_out;
            params.tasks = resolve_tasks(ablate_tasks);
            params.catalog = resolve_catalog(ablate_catalog);
            params.k = ablate_k;
            params.backend = cfg.backend;
            if (!ablate_no_it_endpoint.empty()) {
                hkfr::BackendConfig base;
                base.kind = "http";
                base.endpoint = ablate_no_it_endpoint;
                base.model_name =
                    ablate_no_it_model.empty() ? cfg.backend.model_name : ablate_no_it_model;
                params.no_it_backend = base;
            }
            params.concurrency = cfg.concurrency;
            params.sequence_cap = cfg.sequence_cap;
            params.cutoff_timestamp = ablate_cutoff_set ? ablate_cutoff : cfg.cutoff_timestamp;
            params.ks = cfg.ks;
            auto result = hkfr::run_ablate(params);
            std::cout << result.table;
        }
        return kExitOk;
    } catch (const hkfr::BackendUnavailable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackendUnavailable;
    } catch (const hkfr::ConsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConsistency;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConsistency;
    }
}
