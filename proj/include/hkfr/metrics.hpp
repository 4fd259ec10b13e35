#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hkfr/recommender.hpp"

namespace hkfr {

class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalCase {
    std::string user_id;
    std::string task_id;
    std::string label_value;
    std::vector<std::string> predicted;  // ordered display strings; empty = failed parse
};

// 1-indexed rank of the first prediction matching the label under
// case-insensitive, whitespace-normalized comparison.
inline std::optional<std::size_t> hit_rank(const EvalCase& c) {
    std::string target = normalize_ws(c.label_value);
    for (std::size_t i = 0; i < c.predicted.size(); ++i) {
        if (normalize_ws(c.predicted[i]) == target) return i + 1;
    }
    return std::nullopt;
}

inline double hr_at_k(const std::vector<EvalCase>& cases, std::size_t k) {
    if (cases.empty()) throw std::invalid_argument("hr_at_k over empty case set");
    std::size_t hits = 0;
    for (const auto& c : cases) {
        auto rank = hit_rank(c);
        if (rank && *rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(cases.size());
}

// Single-relevant-item NDCG: gain 1/log2(1+rank) inside the cutoff, else 0;
// the ideal DCG is 1, so this is already normalized.
inline double ndcg_at_k(const std::vector<EvalCase>& cases, std::size_t k) {
    if (cases.empty()) throw std::invalid_argument("ndcg_at_k over empty case set");
    double sum = 0.0;
    for (const auto& c : cases) {
        auto rank = hit_rank(c);
        if (rank && *rank <= k) {
            sum += 1.0 / std::log2(1.0 + static_cast<double>(*rank));
        }
    }
    return sum / static_cast<double>(cases.size());
}

struct MetricsCell {
    std::map<std::size_t, double> hr_at;
    std::map<std::size_t, double> ndcg_at;
    std::size_t n_cases = 0;
    std::size_t n_parse_failures = 0;
};

struct EvalReport {
    // keyed by (task_id, variant)
    std::map<std::pair<std::string, std::string>, MetricsCell> cells;
    std::vector<std::size_t> ks;
};

inline EvalReport evaluate(
    const std::map<std::string, std::map<std::string, std::vector<EvalCase>>>& cases_by_variant_task,
    const std::vector<std::size_t>& ks) {
    EvalReport report;
    report.ks = ks;
    for (const auto& [variant, by_task] : cases_by_variant_task) {
        for (const auto& [task_id, cases] : by_task) {
            if (cases.empty()) continue;
            MetricsCell cell;
            cell.n_cases = cases.size();
            for (const auto& c : cases) {
                if (c.predicted.empty()) ++cell.n_parse_failures;
            }
            for (std::size_t k : ks) {
                cell.hr_at[k] = hr_at_k(cases, k);
                cell.ndcg_at[k] = ndcg_at_k(cases, k);
            }
            report.cells[{task_id, variant}] = std::move(cell);
        }
    }
    return report;
}

struct EvalInput {
    std::string variant;
    std::filesystem::path predictions_path;
};

inline std::map<LabelKind, std::string> label_values_for_user(
    const std::vector<LabelRecord>& labels, const std::string& user_id) {
    std::map<LabelKind, std::string> out;
    for (const auto& l : labels) {
        if (l.user_id == user_id) out.emplace(l.label_kind, l.label_value);
    }
    return out;
}

// Joins prediction files with the labels file. Tasks map predictions to the
// label kind they are scored against; a prediction without a matching label
// is a fatal consistency error listing the offenders.
inline EvalReport run_eval(const std::vector<EvalInput>& inputs,
                           const std::filesystem::path& labels_path,
                           const std::vector<std::size_t>& ks,
                           const std::vector<TaskTemplate>& tasks) {
    std::map<std::string, LabelKind> kind_by_task;
    for (const auto& t : tasks) kind_by_task[t.task_id] = t.label_kind;

    std::map<std::pair<std::string, LabelKind>, std::string> label_by_user_kind;
    for (const auto& j : read_jsonl(labels_path)) {
        LabelRecord l = label_from_json(j);
        label_by_user_kind.emplace(std::make_pair(l.user_id, l.label_kind), l.label_value);
    }

    std::map<std::string, std::map<std::string, std::vector<EvalCase>>> cases;
    std::vector<std::string> offenders;
    for (const auto& input : inputs) {
        for (const auto& j : read_jsonl(input.predictions_path)) {
            RankedRecommendation rec = recommendation_from_json(j);
            auto kind_it = kind_by_task.find(rec.task_id);
            if (kind_it == kind_by_task.end()) {
                offenders.push_back("(" + rec.user_id + ", " + rec.task_id + "): unknown task");
                continue;
            }
            auto label_it = label_by_user_kind.find({rec.user_id, kind_it->second});
            if (label_it == label_by_user_kind.end()) {
                offenders.push_back("(" + rec.user_id + ", " + rec.task_id + "): no label");
                continue;
            }
            EvalCase c;
            c.user_id = rec.user_id;
            c.task_id = rec.task_id;
            c.label_value = label_it->second;
            for (const auto& item : rec.items) c.predicted.push_back(item.display);
            cases[input.variant][rec.task_id].push_back(std::move(c));
        }
    }
    if (!offenders.empty()) {
        std::string msg = "predictions without matching labels:";
        for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) msg += " " + offenders[i];
        if (offenders.size() > 20) {
            msg += " ... (" + std::to_string(offenders.size()) + " total)";
        }
        throw ConsistencyError(msg);
    }
    return evaluate(cases, ks);
}

inline json report_to_json(const EvalReport& report) {
    json j;
    j["ks"] = report.ks;
    j["cells"] = json::array();
    for (const auto& [key, cell] : report.cells) {
        json c;
        c["task_id"] = key.first;
        c["variant"] = key.second;
        c["n_cases"] = cell.n_cases;
        c["n_parse_failures"] = cell.n_parse_failures;
        json hr = json::object(), ndcg = json::object();
        for (const auto& [k, v] : cell.hr_at) hr[std::to_string(k)] = v;
        for (const auto& [k, v] : cell.ndcg_at) ndcg[std::to_string(k)] = v;
        c["hr_at"] = std::move(hr);
        c["ndcg_at"] = std::move(ndcg);
        j["cells"].push_back(std::move(c));
    }
    return j;
}

// Fixed-width table: one block per task, variants as rows, HR@k/NDCG@k
// columns in ascending k.
inline std::string render_report_table(const EvalReport& report) {
    std::map<std::string, std::vector<std::pair<std::string, const MetricsCell*>>> by_task;
    for (const auto& [key, cell] : report.cells) {
        by_task[key.first].emplace_back(key.second, &cell);
    }
    std::ostringstream out;
    for (const auto& [task_id, rows] : by_task) {
        out << "Task: " << task_id << '\n';
        out << std::left << std::setw(12) << "variant";
        for (std::size_t k : report.ks) {
            out << std::right << std::setw(10) << ("HR@" + std::to_string(k)) << std::setw(10)
                << ("NDCG@" + std::to_string(k));
        }
        out << std::right << std::setw(10) << "cases" << std::setw(10) << "failures" << '\n';
        for (const auto& [variant, cell] : rows) {
            out << std::left << std::setw(12) << variant;
            out << std::fixed << std::setprecision(4);
            for (std::size_t k : report.ks) {
                out << std::right << std::setw(10) << cell->hr_at.at(k) << std::setw(10)
                    << cell->ndcg_at.at(k);
            }
            out.unsetf(std::ios_base::floatfield);
            out << std::right << std::setw(10) << cell->n_cases << std::setw(10)
                << cell->n_parse_failures << '\n';
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace hkfr
