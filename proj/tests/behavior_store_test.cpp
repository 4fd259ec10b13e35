#include "hkfr/behavior_store.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

namespace {

using namespace hkfr;

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("hkfr_store_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

BehaviorEvent make_event(const std::string& user, std::int64_t ts,
                         ContentKind ck = ContentKind::click) {
    BehaviorEvent e;
    e.user_id = user;
    e.subject_kind = SubjectKind::merchant;
    e.subject_id = "m001";
    e.subject_name = "Sichuan House 001";
    e.category = "Sichuan";
    e.content_kind = ck;
    e.scenario = Scenario::app_homepage;
    e.timestamp = ts;
    return e;
}

TEST(BehaviorEvent, ValidationCatchesInvariantViolations) {
    BehaviorEvent e = make_event("u1", 100);
    EXPECT_TRUE(validate_event(e).empty());

    e.timestamp = 0;
    EXPECT_EQ(validate_event(e), "nonpositive timestamp");

    e = make_event("u1", 100);
    e.price_minor = -5;
    EXPECT_EQ(validate_event(e), "negative price");

    e = make_event("u1", 100, ContentKind::order);
    e.subject_kind = SubjectKind::product;
    e.price_minor.reset();
    EXPECT_EQ(validate_event(e), "missing price for product order");
    e.price_minor = 2550;
    EXPECT_TRUE(validate_event(e).empty());

    // merchant orders may omit a price
    e = make_event("u1", 100, ContentKind::order);
    EXPECT_TRUE(validate_event(e).empty());
}

TEST(BehaviorEvent, JsonRoundTripIsLossless) {
    BehaviorEvent e = make_event("u1", 123, ContentKind::order);
    e.price_minor = 2550;
    e.attributes["merchant_id"] = "m001";
    std::string err;
    auto parsed = event_from_json(event_to_json(e), &err);
    ASSERT_TRUE(parsed.has_value()) << err;
    EXPECT_EQ(canonical_event_line(e), canonical_event_line(*parsed));
}

TEST(BehaviorEvent, UnknownKeysAreRejected) {
    json j = event_to_json(make_event("u1", 100));
    j["extra_field"] = 1;
    std::string err;
    EXPECT_FALSE(event_from_json(j, &err).has_value());
    EXPECT_EQ(err, "unknown key: extra_field");
}

TEST(BehaviorEvent, MissingAndMalformedFieldsAreRejected) {
    json j = event_to_json(make_event("u1", 100));
    j.erase("category");
    std::string err;
    EXPECT_FALSE(event_from_json(j, &err).has_value());

    j = event_to_json(make_event("u1", 100));
    j["scenario"] = "living_room";
    EXPECT_FALSE(event_from_json(j, &err).has_value());
    EXPECT_EQ(err, "bad scenario");

    j = event_to_json(make_event("u1", 100));
    j["timestamp"] = 12.5;
    EXPECT_FALSE(event_from_json(j, &err).has_value());
}

TEST(BehaviorStore, IngestCountsAcceptedAndRejected) {
    BehaviorStore store(temp_dir("ingest_counts"));
    std::vector<BehaviorEvent> events = {make_event("u1", 10), make_event("u1", 20),
                                         make_event("u2", 30), make_event("u3", 0)};
    auto summary = store.ingest_events(events);
    EXPECT_EQ(summary.accepted, 3u);
    EXPECT_EQ(summary.rejected, 1u);
    EXPECT_EQ(summary.reject_reasons.at("nonpositive timestamp"), 1u);
}

TEST(BehaviorStore, EmptyStreamIsANoop) {
    BehaviorStore store(temp_dir("ingest_empty"));
    auto summary = store.ingest_events({});
    EXPECT_EQ(summary.accepted, 0u);
    EXPECT_EQ(summary.rejected, 0u);
}

TEST(BehaviorStore, DuplicateIngestIsIdempotent) {
    auto dir = temp_dir("ingest_dup");
    BehaviorStore store(dir);
    BehaviorEvent e = make_event("u1", 10);
    auto first = store.ingest_events({e});
    auto second = store.ingest_events({e});
    EXPECT_EQ(first.accepted, 1u);
    EXPECT_EQ(second.accepted, 0u);
    EXPECT_EQ(second.duplicates, 1u);

    // store holds exactly one copy
    std::ifstream in(store.partition_path("u1"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++lines;
    }
    EXPECT_EQ(lines, 1u);
}

TEST(BehaviorStore, SequenceIsNewestFirstWithTieBreaks) {
    BehaviorStore store(temp_dir("sequence_order"));
    BehaviorEvent a = make_event("u1", 100);
    a.subject_id = "zzz";
    BehaviorEvent b = make_event("u1", 100, ContentKind::order);
    b.subject_id = "aaa";
    BehaviorEvent c = make_event("u1", 100);
    c.subject_id = "aaa";
    BehaviorEvent d = make_event("u1", 200);
    BehaviorEvent x = make_event("u1", 100, ContentKind::exposure);
    x.subject_id = "aaa";
    store.ingest_events({a, b, c, d, x});

    // ties are lexicographic on the kind name: click < exposure < order
    auto seq = store.get_user_sequence("u1", 300);
    ASSERT_EQ(seq.events.size(), 5u);
    EXPECT_EQ(seq.events[0].timestamp, 200);
    EXPECT_EQ(seq.events[1].subject_id, "aaa");
    EXPECT_EQ(seq.events[1].content_kind, ContentKind::click);
    EXPECT_EQ(seq.events[2].subject_id, "aaa");
    EXPECT_EQ(seq.events[2].content_kind, ContentKind::exposure);
    EXPECT_EQ(seq.events[3].subject_id, "aaa");
    EXPECT_EQ(seq.events[3].content_kind, ContentKind::order);
    EXPECT_EQ(seq.events[4].subject_id, "zzz");
}

TEST(BehaviorStore, CapKeepsTheNewestEvents) {
    BehaviorStore store(temp_dir("sequence_cap"));
    std::vector<BehaviorEvent> events;
    for (int i = 1; i <= 350; ++i) events.push_back(make_event("u1", i));
    store.ingest_events(events);

    auto seq = store.get_user_sequence("u1", 300);
    ASSERT_EQ(seq.events.size(), 300u);
    EXPECT_EQ(seq.events.front().timestamp, 350);
    EXPECT_EQ(seq.events.back().timestamp, 51);  // 350..51 inclusive
}

TEST(BehaviorStore, SmallerCapYieldsAPrefix) {
    BehaviorStore store(temp_dir("cap_prefix"));
    std::vector<BehaviorEvent> events;
    std::mt19937 rng(7);
    for (int i = 0; i < 120; ++i) {
        events.push_back(make_event("u1", static_cast<std::int64_t>(rng() % 1000 + 1)));
    }
    store.ingest_events(events);

    auto small = store.get_user_sequence("u1", 40);
    auto large = store.get_user_sequence("u1", 100);
    ASSERT_LE(small.events.size(), 40u);
    for (std::size_t i = 0; i < small.events.size(); ++i) {
        EXPECT_EQ(canonical_event_line(small.events[i]), canonical_event_line(large.events[i]));
    }
}

TEST(BehaviorStore, UnknownUserIsEmptyAndZeroCapThrows) {
    BehaviorStore store(temp_dir("unknown_user"));
    auto seq = store.get_user_sequence("nobody", 300);
    EXPECT_TRUE(seq.events.empty());
    EXPECT_THROW(store.get_user_sequence("nobody", 0), std::invalid_argument);
}

TEST(BehaviorStore, CorruptPartitionIsAnExplicitError) {
    auto dir = temp_dir("corrupt");
    BehaviorStore store(dir);
    store.ingest_events({make_event("u1", 10)});
    std::ofstream out(store.partition_path("u1"), std::ios::app);
    out << "this is not json\n";
    out.close();
    EXPECT_THROW(store.get_user_sequence("u1", 300), StorageError);
}

TEST(BehaviorStore, IngestThenRetrieveRoundTripsEvents) {
    BehaviorStore store(temp_dir("roundtrip"));
    std::vector<BehaviorEvent> events;
    for (int i = 1; i <= 25; ++i) {
        BehaviorEvent e = make_event("u1", i * 10, i % 3 == 0 ? ContentKind::order : ContentKind::exposure);
        e.subject_id = "m" + std::to_string(i % 5);
        if (e.content_kind == ContentKind::order) e.price_minor = 1000 + i;
        e.attributes["idx"] = std::to_string(i);
        events.push_back(e);
    }
    store.ingest_events(events);
    auto seq = store.get_user_sequence("u1", 300);
    ASSERT_EQ(seq.events.size(), events.size());

    std::set<std::string> sent, got;
    for (const auto& e : events) sent.insert(canonical_event_line(e));
    for (const auto& e : seq.events) got.insert(canonical_event_line(e));
    EXPECT_EQ(sent, got);
}

TEST(BehaviorStore, IngestFileSkipsMalformedRecords) {
    auto dir = temp_dir("ingest_file");
    fs::path input = dir / "events.jsonl";
    {
        std::ofstream out(input);
        out << event_to_json(make_event("u1", 10)).dump() << "\n";
        out << "{not json}\n";
        out << event_to_json(make_event("u1", 0)).dump() << "\n";
        out << event_to_json(make_event("u2", 20)).dump() << "\n";
    }
    BehaviorStore store(dir / "store");
    auto summary = store.ingest_file(input);
    EXPECT_EQ(summary.accepted, 2u);
    EXPECT_EQ(summary.rejected, 2u);
    EXPECT_EQ(summary.reject_reasons.at("malformed JSON"), 1u);
    EXPECT_EQ(summary.reject_reasons.at("nonpositive timestamp"), 1u);
    EXPECT_THROW(store.ingest_file(dir / "missing.jsonl"), StorageError);
}

TEST(BehaviorStore, SanitizeIdIsInjectiveAndReversible) {
    std::vector<std::string> ids = {"user_1", "user/with/slashes", "u%percent", "白菜",
                                    "dots.and spaces", "UPPER-lower_09"};
    std::set<std::string> tokens;
    for (const auto& id : ids) {
        std::string token = BehaviorStore::sanitize_id(id);
        EXPECT_EQ(BehaviorStore::unsanitize_id(token), id);
        tokens.insert(token);
    }
    EXPECT_EQ(tokens.size(), ids.size());
}

TEST(Anonymize, MatchesFrozenSha256Vectors) {
    // Frozen oracle: sha256("pepper" + id), first 16 hex chars.
    AnonymizationPolicy policy{"pepper", {"user_id", "subject_id"}};
    BehaviorEvent e = make_event("user-alice", 100);
    e.subject_id = "m042";
    BehaviorEvent masked = anonymize_event(e, policy);
    EXPECT_EQ(masked.user_id, "4b210b41c1af6c4d");
    EXPECT_EQ(masked.subject_id, "4363dc6a7fec64f1");
    EXPECT_EQ(masked.subject_name, e.subject_name);
    EXPECT_EQ(masked.category, e.category);
    EXPECT_EQ(masked.timestamp, e.timestamp);

    BehaviorEvent bob = make_event("user-bob", 100);
    EXPECT_EQ(anonymize_event(bob, policy).user_id, "7947bf018f6dfeed");

    AnonymizationPolicy other_salt{"salt2", {"user_id"}};
    EXPECT_EQ(anonymize_event(e, other_salt).user_id, "3a0a18cf5c4b1de0");
}

TEST(Anonymize, DeterministicAndSaltSensitive) {
    AnonymizationPolicy policy{"pepper"};
    BehaviorEvent e = make_event("user-alice", 100);
    EXPECT_EQ(anonymize_event(e, policy).user_id, anonymize_event(e, policy).user_id);
    EXPECT_NE(anonymize_event(e, policy).user_id,
              anonymize_event(e, AnonymizationPolicy{"other"}).user_id);
    EXPECT_THROW(anonymize_event(e, AnonymizationPolicy{""}), std::invalid_argument);
}

TEST(Anonymize, NoCollisionsAcrossManyIds) {
    AnonymizationPolicy policy{"pepper"};
    std::set<std::string> masked;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        BehaviorEvent e = make_event("user_" + std::to_string(i), 100);
        masked.insert(anonymize_event(e, policy).user_id);
    }
    EXPECT_EQ(masked.size(), static_cast<std::size_t>(n));
}

TEST(Anonymize, FieldsOutsidePolicyUnchanged) {
    AnonymizationPolicy policy{"pepper", {"subject_name", "category"}};
    BehaviorEvent e = make_event("user-alice", 100);
    BehaviorEvent masked = anonymize_event(e, policy);
    EXPECT_EQ(masked.user_id, e.user_id);
    EXPECT_EQ(masked.subject_id, e.subject_id);
    EXPECT_NE(masked.subject_name, e.subject_name);
    EXPECT_NE(masked.category, e.category);
}

TEST(BehaviorStore, ConcurrentIngestAcrossUsers) {
    auto dir = temp_dir("concurrent");
    BehaviorStore store(dir);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&store, t] {
            std::vector<BehaviorEvent> events;
            for (int i = 1; i <= 50; ++i) {
                events.push_back(make_event("user_" + std::to_string(t % 4), i + t * 1000));
            }
            store.ingest_events(events);
        });
    }
    for (auto& t : threads) t.join();
    std::size_t total = 0;
    for (const auto& user : store.list_users()) {
        total += store.get_user_sequence(user, 1000).events.size();
    }
    EXPECT_EQ(total, 400u);
}

}  // namespace
