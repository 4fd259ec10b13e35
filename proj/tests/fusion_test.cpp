#include "hkfr/fusion.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

namespace {

using namespace hkfr;

BehaviorEvent event_of(const std::string& category, ContentKind ck,
                       std::optional<std::int64_t> price = std::nullopt,
                       const std::string& merchant_id = "m001",
                       Scenario scenario = Scenario::app_homepage) {
    static std::int64_t ts = 1000;
    BehaviorEvent e;
    e.user_id = "u1";
    e.subject_kind = SubjectKind::merchant;
    e.subject_id = merchant_id;
    e.subject_name = "House of " + category;
    e.category = category;
    e.price_minor = price;
    e.content_kind = ck;
    e.scenario = scenario;
    e.timestamp = ++ts;
    return e;
}

TEST(ComputeFacets, WeightedCountsHandExample) {
    // 5 Sichuan orders and 2 Dessert clicks: 5*10=50 and 2*3=6.
    std::vector<BehaviorEvent> events;
    for (int i = 0; i < 5; ++i) events.push_back(event_of("Sichuan", ContentKind::order, 2000));
    for (int i = 0; i < 2; ++i) events.push_back(event_of("Dessert", ContentKind::click));
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    ASSERT_EQ(facets.top_categories.size(), 2u);
    EXPECT_EQ(facets.top_categories[0], (std::pair<std::string, std::int64_t>{"Sichuan", 50}));
    EXPECT_EQ(facets.top_categories[1], (std::pair<std::string, std::int64_t>{"Dessert", 6}));
}

TEST(ComputeFacets, TiesBreakByNameAscending) {
    std::vector<BehaviorEvent> events;
    events.push_back(event_of("Zebra Fusion", ContentKind::click));
    events.push_back(event_of("Apple Pies", ContentKind::click));
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    ASSERT_EQ(facets.top_categories.size(), 2u);
    EXPECT_EQ(facets.top_categories[0].first, "Apple Pies");
    EXPECT_EQ(facets.top_categories[1].first, "Zebra Fusion");
}

TEST(ComputeFacets, NearestRankQuartiles) {
    std::vector<BehaviorEvent> events = {
        event_of("Sichuan", ContentKind::order, 3000),
        event_of("Sichuan", ContentKind::order, 1000),
        event_of("Sichuan", ContentKind::order, 2000),
    };
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    ASSERT_TRUE(facets.price_stats.has_value());
    EXPECT_EQ(facets.price_stats->p25_minor, 1000);
    EXPECT_EQ(facets.price_stats->median_minor, 2000);
    EXPECT_EQ(facets.price_stats->p75_minor, 3000);
}

TEST(ComputeFacets, SingleOrderCollapsesQuartiles) {
    std::vector<BehaviorEvent> events = {event_of("Sichuan", ContentKind::order, 2000)};
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    ASSERT_TRUE(facets.price_stats.has_value());
    EXPECT_EQ(facets.price_stats->median_minor, 2000);
    EXPECT_EQ(facets.price_stats->p25_minor, 2000);
    EXPECT_EQ(facets.price_stats->p75_minor, 2000);
}

TEST(ComputeFacets, NoOrdersMeansNoPriceStats) {
    std::vector<BehaviorEvent> events = {event_of("Sichuan", ContentKind::click),
                                         event_of("Dessert", ContentKind::click)};
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    EXPECT_FALSE(facets.price_stats.has_value());
    EXPECT_FALSE(facets.top_categories.empty());
}

TEST(ComputeFacets, ScenarioMixSumsToOne) {
    std::vector<BehaviorEvent> events;
    std::mt19937 rng(3);
    for (int i = 0; i < 97; ++i) {
        events.push_back(event_of("Sichuan", ContentKind::exposure, std::nullopt, "m001",
                                  kScenarioOrder[rng() % 4]));
    }
    auto facets = compute_facets(make_sequence("u1", std::move(events)));
    double sum = 0;
    for (const auto& [s, frac] : facets.scenario_mix) sum += frac;
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(ComputeFacets, BruteForceRecountMatches) {
    std::mt19937 rng(17);
    const char* cats[] = {"A", "B", "C", "D"};
    std::vector<BehaviorEvent> events;
    for (int i = 0; i < 500; ++i) {
        ContentKind ck = static_cast<ContentKind>(rng() % 3);
        events.push_back(event_of(cats[rng() % 4], ck,
                                  ck == ContentKind::order
                                      ? std::optional<std::int64_t>(1000 + rng() % 3000)
                                      : std::nullopt,
                                  "m" + std::to_string(rng() % 7)));
    }
    auto seq = make_sequence("u1", events);
    auto facets = compute_facets(seq);

    // independent recount: 10*orders + 3*clicks + 1*exposures per category
    std::map<std::string, std::int64_t> expected;
    for (const auto& e : seq.events) {
        std::int64_t w = e.content_kind == ContentKind::order
                             ? 10
                             : (e.content_kind == ContentKind::click ? 3 : 1);
        expected[e.category] += w;
    }
    ASSERT_EQ(facets.top_categories.size(), expected.size());
    for (const auto& [cat, count] : facets.top_categories) {
        EXPECT_EQ(count, expected.at(cat)) << cat;
    }
    for (std::size_t i = 1; i < facets.top_categories.size(); ++i) {
        EXPECT_GE(facets.top_categories[i - 1].second, facets.top_categories[i].second);
    }
}

BehaviorSequence rich_sequence() {
    std::vector<BehaviorEvent> events;
    for (int i = 0; i < 5; ++i)
        events.push_back(event_of("Sichuan", ContentKind::order, 2000 + i * 100, "m001"));
    for (int i = 0; i < 2; ++i) events.push_back(event_of("Dessert", ContentKind::click, std::nullopt, "m007"));
    for (int i = 0; i < 4; ++i)
        events.push_back(
            event_of("Sichuan", ContentKind::exposure, std::nullopt, "m001", Scenario::search));
    return make_sequence("u1", std::move(events));
}

TEST(MockFuse, DeterministicDocument) {
    auto seq = rich_sequence();
    auto text = render_sequence(seq, TemplateRegistry::defaults());
    auto a = mock_fuse(text, seq);
    auto b = mock_fuse(text, seq);
    EXPECT_EQ(knowledge_to_json(a).dump(), knowledge_to_json(b).dump());
    EXPECT_EQ(a.provenance.created_at, 0);
    EXPECT_EQ(a.provenance.backend_id, "mock");
    EXPECT_FALSE(a.text.empty());
    EXPECT_NE(a.text.find("Sichuan"), std::string::npos);
}

TEST(MockFuse, EmptyInputYieldsSentinel) {
    auto seq = make_sequence("u1", {});
    auto text = render_sequence(seq, TemplateRegistry::defaults());
    auto doc = mock_fuse(text, seq);
    EXPECT_EQ(doc.text, "no recorded behavior");
    EXPECT_TRUE(doc.facets.top_categories.empty());
    EXPECT_FALSE(doc.facets.price_stats.has_value());
    EXPECT_TRUE(doc.facets.scenario_mix.empty());
}

TEST(Fuse, FacetsAreBackendIndependent) {
    class CannedBackend : public FusionBackend {
    public:
        std::string backend_id() const override { return "canned"; }
        std::string model_name() const override { return "canned-v1"; }
        bool deterministic() const override { return true; }
        std::string fuse_text(const std::string&, const BehaviorSequence&,
                              const FacetSummary&) override {
            return "some free-form model text";
        }
    };
    auto seq = rich_sequence();
    auto text = render_sequence(seq, TemplateRegistry::defaults());
    CannedBackend canned;
    auto doc = fuse(text, seq, canned);
    auto mock_doc = mock_fuse(text, seq);
    EXPECT_EQ(facets_to_json(doc.facets).dump(), facets_to_json(mock_doc.facets).dump());
    EXPECT_NE(doc.text, mock_doc.text);
}

TEST(Fuse, BackendFailureCarriesUserId) {
    class FailingBackend : public FusionBackend {
    public:
        std::string backend_id() const override { return "failing"; }
        std::string model_name() const override { return "failing-v1"; }
        bool deterministic() const override { return true; }
        std::string fuse_text(const std::string&, const BehaviorSequence&,
                              const FacetSummary&) override {
            throw std::runtime_error("boom");
        }
    };
    auto seq = rich_sequence();
    auto text = render_sequence(seq, TemplateRegistry::defaults());
    FailingBackend failing;
    try {
        fuse(text, seq, failing);
        FAIL() << "expected FusionError";
    } catch (const FusionError& e) {
        EXPECT_EQ(e.user_id(), "u1");
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
}

TEST(Fuse, ProvenanceTracksPromptAndInput) {
    auto seq = rich_sequence();
    auto text = render_sequence(seq, TemplateRegistry::defaults());
    auto doc = mock_fuse(text, seq);
    std::string expected_prompt =
        fusion_prompt(fusion_input_text(text, FusionConfig{}.max_input_chars));
    EXPECT_EQ(doc.provenance.prompt_sha256, sha256_hex(expected_prompt));
    EXPECT_EQ(doc.provenance.input_sha256, sequence_digest(seq));
}

TEST(Sha256, MatchesKnownVector) {
    EXPECT_EQ(sha256_hex("abc"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex16("abc"), "ba7816bf8f01cfea");
}

TEST(KnowledgeDocument, JsonRoundTrip) {
    auto seq = rich_sequence();
    auto doc = mock_fuse(render_sequence(seq, TemplateRegistry::defaults()), seq);
    auto parsed = knowledge_from_json(knowledge_to_json(doc));
    EXPECT_EQ(knowledge_to_json(parsed).dump(), knowledge_to_json(doc).dump());
}

}  // namespace
