#include "dermcascade/review.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dermcascade;
using testing_support::corpus_with_counts;
using testing_support::random_corpus;
using testing_support::TempDir;

namespace {

LabeledCorpus large_corpus() { return testing_support::release_shaped_corpus(); }

// Kappa straight from the definition, written without the library's helpers.
double kappa_oracle(const std::vector<std::pair<int, int>>& pairs, int categories) {
    const double n = static_cast<double>(pairs.size());
    double agree = 0;
    std::vector<double> a(static_cast<std::size_t>(categories), 0), b(static_cast<std::size_t>(categories), 0);
    for (const auto& [x, y] : pairs) {
        if (x == y) agree += 1;
        a[static_cast<std::size_t>(x)] += 1;
        b[static_cast<std::size_t>(y)] += 1;
    }
    double pe = 0;
    for (int c = 0; c < categories; ++c) pe += a[static_cast<std::size_t>(c)] * b[static_cast<std::size_t>(c)];
    pe /= n * n;
    const double po = agree / n;
    return (po - pe) / (1 - pe);
}

std::vector<Verdict> verdicts_for(const ReviewPartition& p, const std::vector<Judgment>& a,
                                  const std::vector<Judgment>& b) {
    std::vector<Verdict> out;
    std::size_t i = 0;
    for (const auto& id : p.shared_ids) {
        out.push_back({id, "ana", a[i], std::nullopt, "t"});
        out.push_back({id, "beto", b[i], std::nullopt, "t"});
        ++i;
    }
    return out;
}

} // namespace

TEST(ReviewPartition, ReleaseSampleSizes) {
    const auto corpus = large_corpus();
    ASSERT_EQ(corpus.size(), 8881u);
    const auto p = generate_review_partition(corpus, 0.10, 0.126, 42);
    // round(0.10 * 8881) = 888, round(0.126 * 888) = 112; (888 - 112) is even
    EXPECT_EQ(p.sample.size(), 888u);
    EXPECT_EQ(p.shared_ids.size(), 112u);
    EXPECT_EQ(p.subset_a.size(), p.subset_b.size());
    EXPECT_EQ(p.subset_a.size(), 112u + 388u);
}

TEST(ReviewPartition, FullSampleNoOverlapGivesDisjointHalves) {
    const auto corpus = corpus_with_counts({{"a", 10}, {"b", 6}});
    const auto p = generate_review_partition(corpus, 1.0, 0.0, 1);
    EXPECT_EQ(p.sample.size(), 16u);
    EXPECT_TRUE(p.shared_ids.empty());
    EXPECT_EQ(p.subset_a.size(), 8u);
    EXPECT_EQ(p.subset_b.size(), 8u);
    std::set<std::string> all(p.subset_a);
    all.insert(p.subset_b.begin(), p.subset_b.end());
    EXPECT_EQ(all.size(), 16u);
}

TEST(ReviewPartition, OddRemainderDropsOneRecord) {
    const auto corpus = corpus_with_counts({{"a", 9}});
    const auto p = generate_review_partition(corpus, 1.0, 0.0, 1);
    EXPECT_EQ(p.sample.size(), 8u);
    EXPECT_EQ(p.subset_a.size(), 4u);
}

TEST(ReviewPartition, ErrorsOnBadInput) {
    const auto corpus = corpus_with_counts({{"a", 3}});
    EXPECT_THROW(generate_review_partition(corpus, 1.0, 0.9, 1), Error);
    EXPECT_THROW(generate_review_partition(corpus, 0.0, 0.1, 1), Error);
    EXPECT_THROW(generate_review_partition(corpus, 0.1, 0.1, 1), Error);
}

TEST(ReviewPartition, JsonRoundTrip) {
    const auto corpus = corpus_with_counts({{"a", 20}, {"b", 20}});
    const auto p = generate_review_partition(corpus, 0.5, 0.2, 9);
    const auto back = partition_from_json(nlohmann::json::parse(partition_to_json(p).dump()), corpus);
    EXPECT_EQ(back.sample, p.sample);
    EXPECT_EQ(back.subset_a, p.subset_a);
    EXPECT_EQ(back.subset_b, p.subset_b);
    EXPECT_EQ(back.shared_ids, p.shared_ids);
}

TEST(ReviewPartitionProperty, StratifiedWithinOneRecord) {
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        const auto corpus = random_corpus(rng, 15, 60);
        const double fraction = 0.1 + 0.8 * rng.uniform();
        if (std::llround(fraction * static_cast<double>(corpus.size())) < 4) continue;
        const auto p = generate_review_partition(corpus, fraction, 0.1, rng.next());
        for (const auto& [label, count] : corpus.label_counts()) {
            const double expected = fraction * static_cast<double>(count);
            EXPECT_LE(std::abs(static_cast<double>(p.sample.count(label)) - expected), 1.0 + 1e-9);
        }
        EXPECT_EQ(p.subset_a.size(), p.subset_b.size());
        for (const auto& id : p.shared_ids) {
            EXPECT_TRUE(p.subset_a.count(id));
            EXPECT_TRUE(p.subset_b.count(id));
        }
        EXPECT_EQ(p.subset_a.size() + p.subset_b.size() - p.shared_ids.size(), p.sample.size());
    }
}

TEST(Agreement, ReleaseCounts) {
    const auto p = generate_review_partition(large_corpus(), 0.10, 0.126, 42);
    std::vector<Judgment> a(112, Judgment::correct), b(112, Judgment::correct);
    for (std::size_t i : {3u, 40u, 77u, 100u}) b[i] = Judgment::under_masked;
    const auto r = compute_agreement(verdicts_for(p, a, b), p);
    EXPECT_EQ(r.shared, 112u);
    EXPECT_EQ(r.disagreements.size(), 4u);
    EXPECT_DOUBLE_EQ(r.raw_agreement, 108.0 / 112.0);
    EXPECT_NEAR(r.raw_agreement, 0.9643, 1e-4);
}

TEST(Agreement, PerfectAgreement) {
    const auto p = generate_review_partition(corpus_with_counts({{"a", 50}}), 1.0, 0.2, 3);
    std::vector<Judgment> a;
    for (std::size_t i = 0; i < p.shared_ids.size(); ++i) a.push_back(static_cast<Judgment>(i % 3));
    const auto r = compute_agreement(verdicts_for(p, a, a), p);
    EXPECT_DOUBLE_EQ(r.raw_agreement, 1.0);
    EXPECT_DOUBLE_EQ(r.kappa, 1.0);
    EXPECT_TRUE(r.disagreements.empty());
}

TEST(Agreement, HandBuiltKappa) {
    const auto p = generate_review_partition(corpus_with_counts({{"a", 30}}), 1.0, 0.34, 3);
    ASSERT_EQ(p.shared_ids.size(), 10u);
    using J = Judgment;
    const std::vector<J> a{J::correct, J::correct, J::correct, J::correct, J::over_masked,
                           J::over_masked, J::under_masked, J::under_masked, J::correct, J::over_masked};
    const std::vector<J> b{J::correct, J::correct, J::correct, J::over_masked, J::over_masked,
                           J::under_masked, J::under_masked, J::under_masked, J::correct, J::correct};
    // table rows a, cols b: correct (4,1,0) over (1,1,1) under (0,0,2)
    // po = 7/10, pe = (5*5 + 3*2 + 2*3) / 100 = 0.37, kappa = 0.33 / 0.63
    const auto r = compute_agreement(verdicts_for(p, a, b), p);
    EXPECT_NEAR(r.raw_agreement, 0.7, 1e-12);
    EXPECT_NEAR(r.kappa, 0.33 / 0.63, 1e-12);
    EXPECT_EQ(r.disagreements.size(), 3u);
}

TEST(Agreement, MissingVerdictNamesId) {
    const auto p = generate_review_partition(corpus_with_counts({{"a", 20}}), 1.0, 0.2, 3);
    std::vector<Judgment> a(p.shared_ids.size(), Judgment::correct);
    auto v = verdicts_for(p, a, a);
    const auto dropped = v.back().record_id;
    v.pop_back();
    try {
        compute_agreement(v, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos);
    }
}

TEST(AgreementProperty, KappaMatchesOracleAndBounds) {
    Rng rng(606);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.index(40);
        std::vector<std::pair<int, int>> pairs;
        std::vector<std::vector<std::size_t>> table(3, std::vector<std::size_t>(3, 0));
        std::size_t agree = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int x = static_cast<int>(rng.index(3));
            const int y = rng.bernoulli(0.6) ? x : static_cast<int>(rng.index(3));
            pairs.emplace_back(x, y);
            ++table[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
            if (x == y) ++agree;
        }
        const double k = cohen_kappa(table);
        EXPECT_GE(k, -1.0 - 1e-12);
        EXPECT_LE(k, 1.0 + 1e-12);
        const double po = static_cast<double>(agree) / static_cast<double>(n);
        EXPECT_LE(k, po + 1e-12);
        bool single_category = true;
        for (const auto& [x, y] : pairs)
            if (x != pairs[0].first || y != pairs[0].first) single_category = false;
        if (!single_category) {
            EXPECT_NEAR(k, kappa_oracle(pairs, 3), 1e-12);
        }
    }
    EXPECT_DOUBLE_EQ(cohen_kappa({{5, 0}, {0, 0}}), 1.0);
}

TEST(VerdictStore, ConflictSupersedeAndReplay) {
    TempDir dir;
    const auto path = dir.file("verdicts.jsonl");
    {
        VerdictStore store(path);
        EXPECT_EQ(store.submit({"r1", "ana", Judgment::correct, std::nullopt, "t1"}), VerdictStore::Outcome::stored);
        EXPECT_EQ(store.submit({"r1", "ana", Judgment::over_masked, std::nullopt, "t2"}),
                  VerdictStore::Outcome::conflict);
        EXPECT_EQ(store.submit({"r2", "ana", Judgment::correct, std::nullopt, "t2"}, true),
                  VerdictStore::Outcome::conflict);
        EXPECT_EQ(store.submit({"r1", "ana", Judgment::under_masked, std::string("fecha"), "t3"}, true),
                  VerdictStore::Outcome::stored);
        EXPECT_EQ(store.submit({"r2", "beto", Judgment::correct, std::nullopt, "t4"}), VerdictStore::Outcome::stored);
    }
    VerdictStore replayed(path);
    EXPECT_EQ(replayed.history().size(), 3u);
    const auto current = replayed.current();
    ASSERT_EQ(current.size(), 2u);
    EXPECT_EQ(current[0].record_id, "r1");
    EXPECT_EQ(current[0].judgment, Judgment::under_masked);
    EXPECT_EQ(current[0].note, std::optional<std::string>("fecha"));

    detail::write_file(dir.file("bad.jsonl"), "{\"record_id\":\"x\"}\nnot json\n");
    try {
        VerdictStore bad(dir.file("bad.jsonl"));
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}
