#include <gtest/gtest.h>

#include <cmath>

#include "dmlann/search.hpp"
#include "test_support.hpp"

namespace dmlann {
namespace {

using testing::random_histogram;
using testing::random_refs;

FeatureVector pair_vec(double p) {
    FeatureVector f;
    f.values = {p, 1.0 - p};
    f.geometry = Geometry{1, 1, 2};
    return f;
}

struct HandIndex {
    ReferenceSet refs;
    DistanceMatrix matrix;
    FeatureVector query = pair_vec(0.5);

    HandIndex() {
        std::vector<FeatureVector> v;
        std::vector<std::string> labels;
        int i = 0;
        for (double p : {0.1, 0.3, 0.45, 0.8, 0.95}) {
            v.push_back(pair_vec(p));
            labels.push_back("c" + std::to_string(i++));
        }
        refs = ReferenceSet(std::move(v), std::move(labels));
        matrix = build_distance_matrix(refs);
    }
};

std::vector<std::size_t> references(const QueryTrace& t) {
    std::vector<std::size_t> out;
    for (const auto& c : t.candidate_order) out.push_back(c.reference);
    return out;
}

TEST(Accept, IsStrict) {
    EXPECT_TRUE(accept(0.084, 0.085));
    EXPECT_FALSE(accept(0.085, 0.085));
    EXPECT_FALSE(accept(0.0, 0.0));
}

TEST(ConditionalDensity, ReferenceValues) {
    const Geometry g{10, 10, 9};
    EXPECT_NEAR(conditional_density(0.13, 0.05, g), 6.649038006690545, 1e-12);
    EXPECT_NEAR(conditional_density(0.20, 0.05, g), 3.3666447592343136, 1e-12);
}

TEST(ConditionalDensity, UnimodalAroundShiftedMean) {
    const Geometry g{10, 10, 9};
    const double mode = 0.05 + 8.0 / 100.0;
    double prev = 0.0;
    for (double rho = 0.0; rho <= mode; rho += 0.005) {
        const double v = conditional_density(rho, 0.05, g);
        EXPECT_GE(v, prev);
        prev = v;
    }
    prev = INFINITY;
    for (double rho = mode; rho <= 0.5; rho += 0.005) {
        const double v = conditional_density(rho, 0.05, g);
        EXPECT_LE(v, prev + 1e-12);
        prev = v;
    }
}

TEST(ConditionalDensity, RejectsBadInput) {
    const Geometry g{10, 10, 9};
    EXPECT_THROW(conditional_density(-0.1, 0.05, g), std::invalid_argument);
    EXPECT_THROW(conditional_density(0.1, NAN, g), std::invalid_argument);
    EXPECT_THROW(conditional_density(0.1, 0.05, Geometry{0, 10, 9}), std::invalid_argument);
}

TEST(Phi, Values) {
    EXPECT_DOUBLE_EQ(phi(0.4, 0.1), 0.9);
    EXPECT_EQ(phi(0.0, 0.0), 0.0);
    EXPECT_EQ(phi(0.3, 0.0), kPhiSentinel);
    EXPECT_EQ(phi(0.2, 0.2), 0.0);
}

TEST(Score, IncrementalEvidenceMatchesDirectSum) {
    HandIndex h;
    QueueState state(h.matrix, 1);
    SearchParams params;
    for (std::size_t r : {0u, 3u}) state.add(0, r, chi_square(h.query, h.refs.vector(r)));
    for (std::size_t mu = 0; mu < 5; ++mu) {
        double expected = std::log(5.0);
        for (std::size_t r : {0u, 3u}) {
            const double q = chi_square(h.query, h.refs.vector(r));
            const double m = h.matrix(mu, r);
            expected += m < kPhiEpsilon ? (q * q < 1e-24 ? 0.0 : kPhiSentinel) : (q - m) * (q - m) / m;
        }
        EXPECT_EQ(score(mu, state, h.matrix, params), state.evidence(mu) + std::log(5.0));
        EXPECT_NEAR(score(mu, state, h.matrix, params), expected, 1e-12);
    }
}

TEST(Score, PriorsShiftScores) {
    HandIndex h;
    QueueState state(h.matrix, 1);
    state.add(0, 0, 0.2);
    SearchParams params;
    params.priors = {0.1, 0.1, 0.6, 0.1, 0.1};
    EXPECT_NEAR(score(2, state, h.matrix, params), state.evidence(2) - std::log(0.6), 1e-15);
    params.priors = {0.5, 0.5};
    EXPECT_THROW(validate(params, 5), std::invalid_argument);
    params.priors = {0.1, 0.1, 0.0, 0.1, 0.1};
    EXPECT_THROW(validate(params, 5), std::invalid_argument);
}

TEST(SelectNext, TiesGoToLowestIndexAndExhaustionIsNullopt) {
    // Two identical references have identical scores.
    std::vector<FeatureVector> v{pair_vec(0.2), pair_vec(0.7), pair_vec(0.7)};
    const ReferenceSet refs(v, {"a", "b", "b"});
    const auto matrix = build_distance_matrix(refs);
    ClusterModel model;
    model.k = 1;
    model.assignment = {0, 0, 0};
    model.members = {{0, 1, 2}};
    model.medoid = {0};
    model.centroids = {{0.5, 0.5}};
    QueueState state(matrix, 1);
    SearchParams params;
    state.add(0, 0, 0.3);
    EXPECT_EQ(select_next(state, 0, model, params), std::optional<std::size_t>(1));
    state.add(0, 1, 0.1);
    state.add(0, 2, 0.1);
    EXPECT_FALSE(select_next(state, 0, model, params).has_value());
}

TEST(MlAnn, HandTrace) {
    HandIndex h;
    SearchParams params;
    params.rho0 = 0.0;
    params.max_iterations = 10;
    const auto t = search_mlann(h.query, h.refs, h.matrix, params, 0);
    EXPECT_EQ(references(t), (std::vector<std::size_t>{0, 2, 1, 3, 4}));
    EXPECT_EQ(t.result_reference, 2u);
    EXPECT_EQ(t.result_label, "c2");
    EXPECT_NEAR(t.result_distance, 0.005012531328320805, 1e-15);
    EXPECT_EQ(t.terminated_by, Termination::budget);
    EXPECT_EQ(t.distance_computations, 5u);
    for (std::size_t i = 0; i < t.candidate_order.size(); ++i) EXPECT_EQ(t.candidate_order[i].iteration, i);
}

TEST(MlAnn, HandTraceStopsOnThreshold) {
    HandIndex h;
    SearchParams params;
    params.rho0 = 0.01;
    const auto t = search_mlann(h.query, h.refs, h.matrix, params, 0);
    EXPECT_EQ(references(t), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(t.terminated_by, Termination::threshold);
    EXPECT_EQ(t.distance_computations, 2u);
    EXPECT_EQ(t.iterations, 1u);
}

TEST(MlAnn, BudgetCapsSelections) {
    HandIndex h;
    SearchParams params;
    params.rho0 = 0.0;
    params.max_iterations = 2;
    const auto t = search_mlann(h.query, h.refs, h.matrix, params, 0);
    EXPECT_EQ(references(t), (std::vector<std::size_t>{0, 2, 1}));
    EXPECT_EQ(t.iterations, 2u);
}

class SearchFixture : public ::testing::Test {
protected:
    void SetUp() override {
        Rng rng(21);
        refs = random_refs(rng, 60, 12, 6);
        matrix = build_distance_matrix(refs);
        for (int i = 0; i < 10; ++i) queries.push_back(random_histogram(rng, 12));
    }
    ReferenceSet refs;
    DistanceMatrix matrix;
    std::vector<FeatureVector> queries;
};

TEST_F(SearchFixture, ExhaustiveBudgetRecoversLinearScan) {
    SearchParams params;
    params.rho0 = 0.0;
    params.max_iterations = refs.size();
    for (std::size_t k : {1u, 2u, 3u, 5u}) {
        const auto model = kmeans(refs, k, 42);
        for (const auto& x : queries) {
            std::size_t best = 0;
            for (std::size_t r = 1; r < refs.size(); ++r)
                if (chi_square(x, refs.vector(r)) < chi_square(x, refs.vector(best))) best = r;
            const auto t = search_dmlann(x, refs, matrix, model, params);
            EXPECT_EQ(t.result_reference, best);
            EXPECT_EQ(t.distance_computations, refs.size());
            EXPECT_EQ(search_bruteforce(x, refs).result_reference, best);
        }
    }
}

TEST_F(SearchFixture, SingleClusterMatchesMlAnn) {
    const auto model = kmeans(refs, 1, 42);
    for (double rho0 : {0.0, 0.3, 0.5}) {
        for (std::size_t budget : {1u, 5u, 100u}) {
            SearchParams params;
            params.rho0 = rho0;
            params.max_iterations = budget;
            for (const auto& x : queries) {
                const auto a = search_dmlann(x, refs, matrix, model, params);
                const auto b = search_mlann(x, refs, matrix, params, model.medoid[0]);
                EXPECT_EQ(a.candidate_order, b.candidate_order);
                EXPECT_EQ(a.result_reference, b.result_reference);
                EXPECT_EQ(a.distance_computations, b.distance_computations);
                EXPECT_EQ(a.terminated_by, b.terminated_by);
            }
        }
    }
}

TEST_F(SearchFixture, MedoidsAreConsideredFirst) {
    const auto model = kmeans(refs, 4, 42);
    SearchParams params;
    params.rho0 = 0.0;
    params.max_iterations = 3;
    const auto t = search_dmlann(queries[0], refs, matrix, model, params);
    ASSERT_GE(t.candidate_order.size(), 4u);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(t.candidate_order[c], (CandidateRecord{0, c, model.medoid[c]}));
    }
    for (std::size_t i = 4; i < t.candidate_order.size(); ++i) EXPECT_GE(t.candidate_order[i].iteration, 1u);
    EXPECT_EQ(t.iterations, 3u);
    EXPECT_EQ(t.terminated_by, Termination::budget);
}

TEST_F(SearchFixture, LargerBudgetNeverCostsLessOrLosesTheAnswer) {
    const auto model = kmeans(refs, 3, 42);
    for (const auto& x : queries) {
        std::size_t prev_cost = 0;
        double prev_best = INFINITY;
        std::vector<CandidateRecord> prev_order;
        for (std::size_t budget : {1u, 2u, 4u, 8u, 16u, 32u}) {
            SearchParams params;
            params.rho0 = 0.0;
            params.max_iterations = budget;
            const auto t = search_dmlann(x, refs, matrix, model, params);
            EXPECT_GE(t.distance_computations, prev_cost);
            EXPECT_LE(t.result_distance, prev_best);
            ASSERT_GE(t.candidate_order.size(), prev_order.size());
            EXPECT_TRUE(std::equal(prev_order.begin(), prev_order.end(), t.candidate_order.begin()));
            prev_cost = t.distance_computations;
            prev_best = t.result_distance;
            prev_order = t.candidate_order;
        }
    }
}

TEST_F(SearchFixture, ThresholdTerminationIsSound) {
    const auto model = kmeans(refs, 3, 42);
    SearchParams params;
    params.rho0 = 0.4;
    for (const auto& x : queries) {
        const auto t = search_dmlann(x, refs, matrix, model, params);
        if (t.terminated_by == Termination::threshold) {
            EXPECT_LT(t.result_distance, params.rho0);
            const auto& last = t.candidate_order.back();
            if (last.iteration > 0) EXPECT_LT(chi_square(x, refs.vector(last.reference)), params.rho0);
            for (std::size_t i = 0; i + 1 < t.candidate_order.size(); ++i) {
                if (t.candidate_order[i].iteration == 0) continue;
                EXPECT_GE(chi_square(x, refs.vector(t.candidate_order[i].reference)), params.rho0);
            }
        }
    }
}

TEST_F(SearchFixture, TraceJsonRoundTrip) {
    const auto model = kmeans(refs, 2, 42);
    SearchParams params;
    params.max_iterations = 4;
    const auto t = search_dmlann(queries[1], refs, matrix, model, params);
    const auto back = trace_from_json(trace_to_json(t));
    EXPECT_EQ(back.candidate_order, t.candidate_order);
    EXPECT_EQ(back.result_label, t.result_label);
    EXPECT_EQ(back.result_distance, t.result_distance);
    EXPECT_EQ(back.distance_computations, t.distance_computations);
    EXPECT_EQ(back.terminated_by, t.terminated_by);
    EXPECT_EQ(back.iterations, t.iterations);
}

TEST_F(SearchFixture, RejectsBadParameters) {
    const auto model = kmeans(refs, 2, 42);
    SearchParams params;
    params.rho0 = -1.0;
    EXPECT_THROW(search_dmlann(queries[0], refs, matrix, model, params), std::invalid_argument);
    params.rho0 = 0.1;
    params.max_iterations = 0;
    EXPECT_THROW(search_dmlann(queries[0], refs, matrix, model, params), std::invalid_argument);
    params.max_iterations = 5;
    EXPECT_THROW(search_mlann(queries[0], refs, matrix, params, refs.size()), std::out_of_range);
    const auto other = kmeans(ReferenceSet({refs.vector(0), refs.vector(1)}, {"a", "b"}), 1, 1);
    EXPECT_THROW(search_dmlann(queries[0], refs, matrix, other, params), std::invalid_argument);
}

TEST(BruteForce, CountsEveryReference) {
    HandIndex h;
    const auto t = search_bruteforce(h.query, h.refs);
    EXPECT_EQ(t.distance_computations, 5u);
    EXPECT_EQ(t.iterations, 5u);
    EXPECT_EQ(t.result_reference, 2u);
}

}  // namespace
}  // namespace dmlann
