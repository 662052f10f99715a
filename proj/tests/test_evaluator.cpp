#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "gcnbert/evaluator.hpp"
#include "gcnbert/kernels.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace gcnbert;

namespace {

std::vector<std::size_t> ranking_with(std::size_t classes, std::size_t first, std::size_t second = SIZE_MAX) {
    std::vector<std::size_t> r;
    r.push_back(first);
    if (second != SIZE_MAX) r.push_back(second);
    for (std::size_t c = 0; c < classes; ++c)
        if (c != first && c != second) r.push_back(c);
    return r;
}

std::vector<SampleOutcome> random_outcomes(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
    std::vector<SampleOutcome> out(n);
    for (auto& s : out) {
        s.target = rng() % classes;
        s.ranking.resize(classes);
        std::iota(s.ranking.begin(), s.ranking.end(), 0);
        std::shuffle(s.ranking.begin(), s.ranking.end(), rng);
    }
    return out;
}

}  // namespace

TEST_CASE("perfect ranking scores 100 at every k") {
    std::vector<SampleOutcome> outcomes;
    for (std::size_t i = 0; i < 12; ++i) outcomes.push_back({i % 4, ranking_with(4, i % 4)});
    const EvalReport r = summarize(outcomes, 4);
    CHECK(r.top_k_accuracy.at(1) == 100.0);
    CHECK(r.top_k_accuracy.at(5) == 100.0);
    CHECK(r.top_k_accuracy.at(10) == 100.0);
    CHECK(r.confusion_pairs.empty());
    CHECK(r.sample_count == 12);
}

TEST_CASE("four samples with two top-1 and three top-5 hits") {
    const std::size_t g = 10;
    std::vector<SampleOutcome> outcomes{
        {0, ranking_with(g, 0)},
        {1, ranking_with(g, 1)},
        {2, ranking_with(g, 5, 2)},
        {3, {9, 8, 7, 6, 5, 4, 3, 2, 1, 0}},  // target at rank 7
    };
    const EvalReport r = summarize(outcomes, g);
    CHECK(r.top_k_accuracy.at(1) == 50.0);
    CHECK(r.top_k_accuracy.at(5) == 75.0);
    CHECK(r.top_k_accuracy.at(10) == 100.0);
    CHECK(r.per_class_top1[0] == 100.0);
    CHECK(r.per_class_top1[2] == 0.0);
    CHECK(r.per_class_top1[7] == 0.0);
    CHECK(r.per_class_count[7] == 0);
    REQUIRE(r.confusion_pairs.size() == 2);
}

TEST_CASE("k larger than the class count counts every sample") {
    std::vector<SampleOutcome> outcomes{{2, {0, 1, 2}}};
    const EvalReport r = summarize(outcomes, 3);
    CHECK(r.top_k_accuracy.at(1) == 0.0);
    CHECK(r.top_k_accuracy.at(5) == 100.0);
}

TEST_CASE("uniform random ranking over 100 classes lands near k percent") {
    std::mt19937_64 rng(2024);
    const EvalReport r = summarize(random_outcomes(1000, 100, rng), 100);
    CHECK(std::abs(r.top_k_accuracy.at(1) - 1.0) <= 2.0);
    CHECK(std::abs(r.top_k_accuracy.at(5) - 5.0) <= 2.0);
    CHECK(std::abs(r.top_k_accuracy.at(10) - 10.0) <= 2.0);
}

TEST_CASE("summaries agree with a brute-force recount and are monotone in k") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t classes = 2 + seed % 15;
        const std::size_t n = 1 + rng() % 50;
        const auto outcomes = random_outcomes(n, classes, rng);
        const EvalReport r = summarize(outcomes, classes);
        for (std::size_t k : {1u, 5u, 10u}) {
            std::size_t hits = 0;
            for (const auto& s : outcomes)
                for (std::size_t pos = 0; pos < std::min<std::size_t>(k, classes); ++pos)
                    if (s.ranking[pos] == s.target) ++hits;
            CHECK(r.top_k_accuracy.at(k) == doctest::Approx(100.0 * hits / n).epsilon(1e-12));
        }
        CHECK(r.top_k_accuracy.at(1) <= r.top_k_accuracy.at(5));
        CHECK(r.top_k_accuracy.at(5) <= r.top_k_accuracy.at(10));
        CHECK(r.top_k_accuracy.at(10) <= 100.0);
        CHECK(r.sample_count == n);

        std::size_t mistakes = 0;
        for (const auto& s : outcomes) mistakes += s.ranking[0] != s.target;
        std::size_t counted = 0;
        for (std::size_t i = 0; i < r.confusion_pairs.size(); ++i) {
            counted += r.confusion_pairs[i].count;
            if (i > 0) CHECK(r.confusion_pairs[i - 1].count >= r.confusion_pairs[i].count);
        }
        CHECK(counted == mistakes);
    }
}

TEST_CASE("summarize rejects bad input") {
    CHECK_THROWS_AS(summarize({}, 3), DataError);
    std::vector<SampleOutcome> bad{{5, {0, 1, 2}}};
    CHECK_THROWS_AS(summarize(bad, 3), DataError);
}

TEST_CASE("report JSON round trip and two-decimal formatting") {
    std::mt19937_64 rng(7);
    const EvalReport r = summarize(random_outcomes(7, 4, rng), 4);
    const std::vector<std::string> vocab{"apple", "book", "cat", "dog"};
    const auto doc = r.to_json(vocab);
    const EvalReport back = EvalReport::from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back.sample_count == r.sample_count);
    for (const auto& [k, acc] : r.top_k_accuracy) CHECK(back.top_k_accuracy.at(k) == round_to_hundredths(acc));
    CHECK(back.per_class_count == r.per_class_count);
    CHECK(back.confusion_pairs.size() == r.confusion_pairs.size());
    CHECK(round_to_hundredths(100.0 / 7.0) == 14.29);
    CHECK(doc.at("per_class").at(1).at("gloss") == "book");
    CHECK(r.to_table(vocab).find("top-1") != std::string::npos);
}

TEST_CASE("evaluate is repeatable and independent of the thread count") {
    const RunConfig config = testing::tiny_run_config(3);
    const GcnBertModel model(config.model, 1);
    const auto clips = testing::synth_clips(testing::tiny_synth(3, 3, 12));
    const EvalReport a = evaluate(model, clips);
    const int saved = kernels::max_threads();
    kernels::set_threads(3);
    const EvalReport b = evaluate(model, clips);
    kernels::set_threads(saved);
    CHECK(a.to_json({}) == b.to_json({}));
    CHECK(a.sample_count == clips.size());

    auto wrong = clips;
    wrong[0].gloss_id = 9;
    CHECK_THROWS_AS(evaluate(model, wrong), DataError);
    CHECK_THROWS_AS(evaluate(model, std::vector<LoadedClip>{}), DataError);
}
