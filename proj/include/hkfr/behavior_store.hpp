#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hkfr/behavior.hpp"

namespace hkfr {

namespace fs = std::filesystem;

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IngestSummary {
    std::size_t accepted = 0;    // newly appended events
    std::size_t rejected = 0;    // invalid records
    std::size_t duplicates = 0;  // exact duplicates of already-stored events
    std::map<std::string, std::size_t> reject_reasons;

    IngestSummary& operator+=(const IngestSummary& o) {
        accepted += o.accepted;
        rejected += o.rejected;
        duplicates += o.duplicates;
        for (const auto& [k, v] : o.reject_reasons) reject_reasons[k] += v;
        return *this;
    }
};

// Append-only per-user partitions: one line-delimited record file per user
// under a two-level fan-out derived from the (sanitized) user id.
// Reads may run concurrently; writes are serialized per partition.
class BehaviorStore {
public:
    explicit BehaviorStore(fs::path root) : root_(std::move(root)) {
        fs::create_directories(root_);
    }

    // Filesystem-safe, injective encoding of an opaque user id.
    static std::string sanitize_id(const std::string& user_id) {
        static constexpr char hex[] = "0123456789abcdef";
        std::string out;
        out.reserve(user_id.size());
        for (unsigned char c : user_id) {
            bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
            if (safe) {
                out.push_back(static_cast<char>(c));
            } else {
                out.push_back('%');
                out.push_back(hex[c >> 4]);
                out.push_back(hex[c & 0x0f]);
            }
        }
        return out;
    }

    static std::string unsanitize_id(const std::string& token) {
        std::string out;
        out.reserve(token.size());
        for (std::size_t i = 0; i < token.size(); ++i) {
            if (token[i] == '%' && i + 2 < token.size()) {
                out.push_back(static_cast<char>(
                    std::stoi(token.substr(i + 1, 2), nullptr, 16)));
                i += 2;
            } else {
                out.push_back(token[i]);
            }
        }
        return out;
    }

    fs::path partition_path(const std::string& user_id) const {
        std::string token = sanitize_id(user_id);
        std::string padded = token;
        while (padded.size() < 4) padded.push_back('_');
        return root_ / padded.substr(0, 2) / padded.substr(2, 2) / (token + ".jsonl");
    }

    IngestSummary ingest_events(const std::vector<BehaviorEvent>& events) {
        IngestSummary summary;
        std::map<std::string, std::vector<const BehaviorEvent*>> by_user;
        for (const auto& e : events) {
            std::string why = validate_event(e);
            if (!why.empty()) {
                ++summary.rejected;
                ++summary.reject_reasons[why];
                continue;
            }
            by_user[e.user_id].push_back(&e);
        }
        for (const auto& [user_id, user_events] : by_user) {
            std::lock_guard<std::mutex> lock(partition_mutex(user_id));
            fs::path path = partition_path(user_id);
            std::unordered_set<std::string> existing;
            if (fs::exists(path)) {
                std::ifstream in(path);
                std::string line;
                while (std::getline(in, line)) {
                    if (!line.empty()) existing.insert(line);
                }
            }
            fs::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::app);
            if (!out) throw StorageError("cannot open partition for append: " + path.string());
            for (const BehaviorEvent* e : user_events) {
                std::string line = canonical_event_line(*e);
                if (existing.count(line)) {
                    ++summary.duplicates;
                    continue;
                }
                out << line << '\n';
                existing.insert(std::move(line));
                ++summary.accepted;
            }
            out.flush();
            if (!out) throw StorageError("append failed: " + path.string());
        }
        return summary;
    }

    // Parses a JSONL stream of event records; malformed records are counted
    // and skipped, an unreadable file is fatal.
    IngestSummary ingest_file(const fs::path& events_path) {
        std::ifstream in(events_path);
        if (!in) throw StorageError("cannot open input: " + events_path.string());
        std::vector<BehaviorEvent> batch;
        IngestSummary parse_summary;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                ++parse_summary.rejected;
                ++parse_summary.reject_reasons["malformed JSON"];
                continue;
            }
            std::string err;
            auto e = event_from_json(j, &err);
            if (!e) {
                ++parse_summary.rejected;
                ++parse_summary.reject_reasons[err];
                continue;
            }
            batch.push_back(std::move(*e));
        }
        IngestSummary summary = ingest_events(batch);
        summary += parse_summary;
        return summary;
    }

    // Most recent <= cap events, newest first. Unknown user -> empty sequence.
    // A corrupt partition is an explicit error, never a silent empty result.
    BehaviorSequence get_user_sequence(const std::string& user_id, std::size_t cap = 300) const {
        if (cap == 0) throw std::invalid_argument("sequence cap must be positive");
        fs::path path = partition_path(user_id);
        std::vector<BehaviorEvent> events;
        if (fs::exists(path)) {
            std::lock_guard<std::mutex> lock(partition_mutex(user_id));
            std::ifstream in(path);
            if (!in) throw StorageError("cannot open partition: " + path.string());
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                json j = json::parse(line, nullptr, false);
                std::string err;
                std::optional<BehaviorEvent> e;
                if (!j.is_discarded()) e = event_from_json(j, &err);
                if (!e) {
                    throw StorageError("corrupt partition " + path.string() + ":" +
                                       std::to_string(line_no) + (err.empty() ? "" : ": " + err));
                }
                if (e->user_id != user_id) {
                    throw StorageError("partition " + path.string() +
                                       " holds foreign user record: " + e->user_id);
                }
                events.push_back(std::move(*e));
            }
        }
        return make_sequence(user_id, std::move(events), cap);
    }

    std::vector<std::string> list_users() const {
        std::vector<std::string> users;
        if (!fs::exists(root_)) return users;
        for (const auto& entry : fs::recursive_directory_iterator(root_)) {
            if (!entry.is_regular_file()) continue;
            if (entry.path().extension() != ".jsonl") continue;
            users.push_back(unsanitize_id(entry.path().stem().string()));
        }
        std::sort(users.begin(), users.end());
        return users;
    }

    const fs::path& root() const { return root_; }

private:
    std::mutex& partition_mutex(const std::string& user_id) const {
        std::lock_guard<std::mutex> lock(table_mutex_);
        auto& slot = partition_mutexes_[user_id];
        if (!slot) slot = std::make_unique<std::mutex>();
        return *slot;
    }

    fs::path root_;
    mutable std::mutex table_mutex_;
    mutable std::unordered_map<std::string, std::unique_ptr<std::mutex>> partition_mutexes_;
};

}  // namespace hkfr
