#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "ssmtkrd/metrics.hpp"
#include "ssmtkrd/rng.hpp"

using namespace ssmtkrd;

namespace {

HiddenStates from_rows(const std::vector<std::vector<float>>& rows) {
    HiddenStates h = HiddenStates::zeros(int(rows.size()), int(rows[0].size()));
    for (size_t t = 0; t < rows.size(); ++t)
        std::copy(rows[t].begin(), rows[t].end(), h.row(int(t)));
    return h;
}

}  // namespace

TEST_CASE("importance: hand-evaluated rows") {
    const HiddenStates h = from_rows({{-3.0f, -1.0f}, {1.0f, -1.0f}, {2.0f, 2.0f}});

    const auto clip = importance(h, MetricKind::Clip);
    CHECK(clip.s[0] == 0.0f);  // all-negative clips to zero
    CHECK(clip.s[1] == doctest::Approx(0.5));
    CHECK(clip.s[2] == doctest::Approx(2.0));

    const auto raw = importance(h, MetricKind::Unclipped);
    CHECK(raw.s[0] == doctest::Approx(-2.0));
    CHECK(raw.s[1] == doctest::Approx(0.0));

    const auto l1 = importance(h, MetricKind::L1);
    CHECK(l1.s[0] == doctest::Approx(2.0));
    CHECK(l1.s[1] == doctest::Approx(1.0));
    CHECK(l1.s[2] == doctest::Approx(2.0));

    const auto l2 = importance(h, MetricKind::L2);
    CHECK(l2.s[1] == doctest::Approx(1.0));
    CHECK(l2.s[2] == doctest::Approx(2.0));
}

TEST_CASE("importance rejects NaN") {
    HiddenStates h = HiddenStates::zeros(2, 2);
    h.y[1] = std::nanf("");
    CHECK_THROWS_AS(importance(h, MetricKind::Clip), std::invalid_argument);
}

TEST_CASE("rank_tokens: ascending, ties by position") {
    ImportanceScores s;
    s.s = {3, 1, 4, 2};
    CHECK(rank_tokens(s) == std::vector<int>{1, 3, 0, 2});

    s.s = {5, 5, 5};
    CHECK(rank_tokens(s) == std::vector<int>{0, 1, 2});

    s.s = {0, 0, 5};
    CHECK(rank_tokens(s) == std::vector<int>{0, 1, 2});
}

TEST_CASE("metric properties over random tensors") {
    Xoshiro256pp rng(404);
    for (int trial = 0; trial < 30; ++trial) {
        const int L = 3 + int(rng.next() % 12), dp = 1 + int(rng.next() % 16);
        HiddenStates h = HiddenStates::zeros(L, dp);
        for (auto& v : h.y) v = rng.uniform(-2.f, 2.f);

        const auto clip = importance(h, MetricKind::Clip);
        const auto l1 = importance(h, MetricKind::L1);

        // clip <= l1 elementwise, both nonnegative
        for (int t = 0; t < L; ++t) {
            CHECK(clip.s[t] >= 0.0f);
            CHECK(l1.s[t] >= 0.0f);
            CHECK(clip.s[t] <= l1.s[t] + 1e-6f);
        }

        // clip ignores perturbations that keep negative channels negative
        HiddenStates h2 = h;
        for (auto& v : h2.y)
            if (v < 0.0f) v *= rng.uniform(0.1f, 2.0f);
        const auto clip2 = importance(h2, MetricKind::Clip);
        for (int t = 0; t < L; ++t) CHECK(clip.s[t] == clip2.s[t]);

        // positive rescaling scales every metric by c, so rankings persist
        HiddenStates h3 = h;
        const float c = rng.uniform(0.5f, 3.0f);
        for (auto& v : h3.y) v *= c;
        for (MetricKind mk :
             {MetricKind::Clip, MetricKind::L1, MetricKind::L2, MetricKind::Unclipped}) {
            const auto base_scores = importance(h, mk);
            const auto scaled_scores = importance(h3, mk);
            for (int t = 0; t < L; ++t)
                CHECK(scaled_scores.s[t] ==
                      doctest::Approx(c * base_scores.s[t]).epsilon(1e-4));
            // float rounding can reorder near-exact ties, so compare the
            // score profile along the two rankings rather than the indices
            const auto base = rank_tokens(base_scores);
            const auto scaled = rank_tokens(scaled_scores);
            for (size_t i = 0; i < base.size(); ++i)
                CHECK(base_scores.s[base[i]] ==
                      doctest::Approx(base_scores.s[scaled[i]]).epsilon(1e-4));
        }
    }
}
