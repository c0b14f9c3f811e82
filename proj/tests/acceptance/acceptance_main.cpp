// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "dmlann/bench.hpp"
#include "dmlann/bundle.hpp"
#include "dmlann/features.hpp"
#include "dmlann/parallel.hpp"
#include "dmlann/search.hpp"
#include "dmlann/synthetic.hpp"
#include "test_support.hpp"

using namespace dmlann;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("%s C%d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Synthetic default classes with 9 images each; 4 per class are held out,
// leaving 5 references per class (R = 250) and 200 queries.
struct Desk {
    DatasetSplit split;
    DistanceMatrix matrix;
    std::map<std::size_t, ClusterModel> models;
    std::vector<LabeledQuery> queries50;
    double rho0 = 0.0;
};

Desk make_desk() {
    SyntheticSpec spec;
    spec.refs_per_class = 9;
    Desk d;
    d.split = split_dataset(generate_synthetic(spec), 4, 7);
    d.matrix = build_distance_matrix(d.split.refs, default_threads());
    for (std::size_t k : {1u, 2u, 3u}) d.models[k] = kmeans(d.split.refs, k, 42);
    for (std::size_t i = 0; i < d.split.queries.size(); i += 4) d.queries50.push_back(d.split.queries[i]);

    // Acceptance radius: 5th percentile of each reference's nearest
    // wrong-class neighbour, fixed before any query is run.
    const auto& refs = d.split.refs;
    std::vector<double> nearest_other;
    for (std::size_t r = 0; r < refs.size(); ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < refs.size(); ++s)
            if (refs.label(s) != refs.label(r)) best = std::min(best, d.matrix(r, s));
        nearest_other.push_back(best);
    }
    std::sort(nearest_other.begin(), nearest_other.end());
    d.rho0 = nearest_other[nearest_other.size() / 20];
    return d;
}

double accuracy(const std::vector<QueryTrace>& traces, const std::vector<LabeledQuery>& queries) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) ok += traces[i].result_label == queries[i].label;
    return static_cast<double>(ok) / static_cast<double>(traces.size());
}

double mean_cost(const std::vector<QueryTrace>& traces) {
    double sum = 0.0;
    for (const auto& t : traces) sum += static_cast<double>(t.distance_computations);
    return sum / static_cast<double>(traces.size());
}

struct Collected {
    std::vector<QueryTrace> traces;
    std::vector<double> rho0;
    void add(const QueryTrace& t, double r) {
        traces.push_back(t);
        rho0.push_back(r);
    }
};

void c1_oracle(const Desk& d, Collected& all) {
    const auto start = Clock::now();
    SearchParams params;
    params.rho0 = 0.0;
    params.max_iterations = d.split.refs.size();
    std::size_t match = 0;
    for (const auto& q : d.split.queries) {
        const auto t = search_dmlann(q.features, d.split.refs, d.matrix, d.models.at(3), params);
        all.add(t, params.rho0);
        match += t.result_reference == search_bruteforce(q.features, d.split.refs).result_reference;
    }
    const double elapsed = seconds_since(start);
    report(1, "oracle exactness", match == d.split.queries.size() && elapsed < 30.0,
           fmt("%zu/%zu match brute force, %.2f s", match, d.split.queries.size(), elapsed));
}

void c2_reduction(const Desk& d, Collected& all) {
    SearchParams params;
    params.rho0 = d.rho0;
    const std::size_t first = global_medoid(d.split.refs);
    std::size_t equal = 0;
    for (const auto& q : d.queries50) {
        const auto a = search_dmlann(q.features, d.split.refs, d.matrix, d.models.at(1), params);
        const auto b = search_mlann(q.features, d.split.refs, d.matrix, params, first);
        all.add(a, params.rho0);
        all.add(b, params.rho0);
        equal += a.candidate_order == b.candidate_order;
    }
    report(2, "reduction to ML-ANN", equal == d.queries50.size() && d.models.at(1).medoid[0] == first,
           fmt("%zu/%zu identical candidate orders", equal, d.queries50.size()));
}

void c3_reduction(const Desk& d, Collected& all) {
    const auto start = Clock::now();
    const auto& refs = d.split.refs;
    const auto& qs = d.queries50;
    SearchParams params;
    params.rho0 = d.rho0;
    params.max_iterations = refs.size();
    std::vector<QueryTrace> brute, dml, ml;
    const std::size_t first = global_medoid(refs);
    for (const auto& q : qs) {
        brute.push_back(search_bruteforce(q.features, refs));
        dml.push_back(search_dmlann(q.features, refs, d.matrix, d.models.at(3), params));
        ml.push_back(search_mlann(q.features, refs, d.matrix, params, first));
        all.add(dml.back(), params.rho0);
        all.add(ml.back(), params.rho0);
    }
    const double elapsed = seconds_since(start);
    const double r = static_cast<double>(refs.size());
    const double brute_acc = accuracy(brute, qs);
    const double dml_cost = mean_cost(dml);
    const double ml_cost = mean_cost(ml);
    const bool ok = brute_acc >= 0.95 && dml_cost < 0.5 * r && dml_cost < ml_cost && elapsed < 60.0;
    report(3, "distance-computation reduction", ok,
           fmt("rho0=%.6g brute acc %.3f; D-ML-ANN-Cl3 %.2f (acc %.3f) vs 0.5R=%.1f and ML-ANN %.2f (acc %.3f); "
               "%.2f s",
               d.rho0, brute_acc, dml_cost, accuracy(dml, qs), 0.5 * r, ml_cost, accuracy(ml, qs), elapsed));
}

void c4_monotone(const Desk& d, Collected& all) {
    std::size_t violations = 0, runs = 0;
    for (const auto& q : d.queries50) {
        for (int variant = 0; variant < 4; ++variant) {
            double prev = std::numeric_limits<double>::infinity();
            for (std::size_t budget : {1u, 2u, 4u, 8u, 16u, 32u}) {
                SearchParams params;
                params.rho0 = d.rho0;
                params.max_iterations = budget;
                const auto t = variant < 3
                                   ? search_dmlann(q.features, d.split.refs, d.matrix, d.models.at(variant + 1), params)
                                   : search_mlann(q.features, d.split.refs, d.matrix, params,
                                                  global_medoid(d.split.refs));
                all.add(t, params.rho0);
                violations += t.result_distance > prev;
                prev = t.result_distance;
                ++runs;
            }
        }
    }
    report(4, "budget monotonicity", violations == 0,
           fmt("%zu violations over %zu runs (K=1,2,3 and ML-ANN)", violations, runs));
}

void c5_weights() {
    Rng rng(5);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.below(8);
        std::vector<std::vector<double>> queues(k);
        std::size_t total = 0;
        for (auto& queue : queues) {
            const std::size_t len = 1 + rng.below(5);
            for (std::size_t i = 0; i < len; ++i) {
                const auto pick = rng.below(10);
                queue.push_back(pick == 0 ? 0.0 : pick == 1 ? 0.25 : rng.uniform());
            }
            total += len;
        }
        DistanceMatrix matrix(total);
        QueueState state(matrix, k);
        std::size_t ref = 0;
        for (std::size_t c = 0; c < k; ++c)
            for (double dist : queues[c]) state.add(c, ref++, dist);
        const auto weights = update_weights(state);

        std::vector<double> avg(k);
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (double x : queues[c]) s += x;
            avg[c] = s / static_cast<double>(queues[c].size());
        }
        const double max_avg = *std::max_element(avg.begin(), avg.end());
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t expected;
            if (avg[c] == max_avg) {
                expected = 1;
            } else if (avg[c] == 0.0) {
                expected = total;
            } else {
                expected = std::min<std::size_t>(total, static_cast<std::size_t>(std::ceil(max_avg / avg[c])));
            }
            if (weights[c] != expected || weights[c] < 1) ++mismatches;
        }
    }
    report(5, "weight law", mismatches == 0, fmt("%zu mismatches over 1000 queue states", mismatches));
}

double oracle_phi(double q, double m) {
    if (m < 1e-12) return (q - m) * (q - m) < 1e-24 ? 0.0 : 1e18;
    return (q - m) * (q - m) / m;
}

void c6_score() {
    Rng rng(6);
    std::size_t mismatches = 0, checks = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 2 + rng.below(11);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(3, r));
        const auto refs = dmlann::testing::random_refs(rng, r, 6, 3);
        const auto matrix = build_distance_matrix(refs);
        const auto model = kmeans(refs, k, trial);
        const auto query = dmlann::testing::random_histogram(rng, 6);
        SearchParams params;
        if (trial % 3 == 0) {
            for (std::size_t i = 0; i < r; ++i) params.priors.push_back(0.1 + rng.uniform());
        }
        QueueState state(matrix, k);
        std::vector<std::size_t> order(r);
        for (std::size_t i = 0; i < r; ++i) order[i] = i;
        for (std::size_t i = r; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t step = 0; step <= r; ++step) {
            for (std::size_t c = 0; c < k; ++c) {
                double best = std::numeric_limits<double>::infinity();
                std::size_t best_mu = r;
                for (std::size_t mu : model.members[c]) {
                    if (state.is_considered(mu)) continue;
                    double s = params.priors.empty() ? std::log(static_cast<double>(r)) : -std::log(params.priors[mu]);
                    for (std::size_t seen : state.considered())
                        s += oracle_phi(chi_square(query, refs.vector(seen)), matrix(mu, seen));
                    if (s < best - 1e-9 || (std::abs(s - best) <= 1e-9 && mu < best_mu)) {
                        best = s;
                        best_mu = mu;
                    }
                }
                const auto chosen = select_next(state, c, model, params);
                ++checks;
                if (best_mu == r) {
                    mismatches += chosen.has_value();
                } else if (!chosen) {
                    ++mismatches;
                } else {
                    const double s = score(*chosen, state, matrix, params);
                    mismatches += std::abs(s - best) > 1e-9 * std::max(1.0, std::abs(best));
                }
            }
            if (step == r) break;
            const std::size_t next = order[step];
            state.add(cluster_of(model, next), next, chi_square(query, refs.vector(next)));
        }
    }
    report(6, "score oracle", mismatches == 0, fmt("%zu mismatches over %zu selections", mismatches, checks));
}

void c7_chi_square() {
    Rng rng(7);
    std::size_t failures7 = 0;
    const int cases = 10000;
    for (int i = 0; i < cases; ++i) {
        const std::size_t dim = 1 + rng.below(64);
        auto a = dmlann::testing::random_histogram(rng, dim);
        auto b = dmlann::testing::random_histogram(rng, dim);
        const double ab = chi_square(a, b);
        const double ba = chi_square(b, a);
        double oracle = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double s = a.values[j] + b.values[j];
            if (s != 0.0) oracle += (a.values[j] - b.values[j]) * (a.values[j] - b.values[j]) / s;
        }
        bool ok = ab == ba && ab >= 0.0 && std::isfinite(ab) && std::abs(chi_square(a, a)) <= 1e-12 &&
                  std::abs(ab - oracle) <= 1e-12 && ab <= 2.0 + 1e-12;
        if (i % 100 == 0) {
            std::vector<FeatureVector> vs;
            std::vector<std::string> labels;
            for (int v = 0; v < 8; ++v) {
                vs.push_back(dmlann::testing::random_histogram(rng, dim));
                labels.push_back("x");
            }
            const ReferenceSet refs(vs, labels);
            const auto m = build_distance_matrix(refs, 2);
            for (std::size_t p = 0; p < 8; ++p) {
                ok &= m(p, p) == 0.0;
                for (std::size_t q = 0; q < 8; ++q) ok &= m(p, q) == m(q, p) && m(p, q) >= 0.0;
            }
        }
        failures7 += !ok;
    }
    // All-zero pairs contribute nothing.
    const std::vector<double> z1{0.0, 0.5, 0.5}, z2{0.0, 0.25, 0.75};
    const bool zero_ok = chi_square(z1, z2) == 0.0625 / 0.75 + 0.0625 / 1.25;
    report(7, "chi-square properties", failures7 == 0 && zero_ok,
           fmt("%zu failures over %d cases; zero-denominator convention %s", failures7, cases,
               zero_ok ? "holds" : "broken"));
}

void c8_density() {
    Rng rng(8);
    std::size_t misses = 0;
    for (int i = 0; i < 100; ++i) {
        const double rho_ref = 0.5 * rng.uniform();
        const Geometry g{1 + static_cast<int>(rng.below(20)), 1 + static_cast<int>(rng.below(20)),
                         2 + static_cast<int>(rng.below(15))};
        const double mode = rho_ref + (g.bins - 1.0) / (static_cast<double>(g.width) * g.height);
        const std::size_t steps = static_cast<std::size_t>(std::ceil((mode + 1.0) / 1e-3));
        double best = -1.0, best_rho = 0.0;
        for (std::size_t s = 0; s <= steps; ++s) {
            const double rho = static_cast<double>(s) * 1e-3;
            const double v = conditional_density(rho, rho_ref, g);
            if (v > best) {
                best = v;
                best_rho = rho;
            }
        }
        misses += std::abs(best_rho - mode) > 1e-3 + 1e-12;
    }
    report(8, "density mode", misses == 0, fmt("%zu of 100 tuples peak away from the expected mode", misses));
}

void c9_threshold(const Collected& all) {
    std::size_t violations = 0, accepted = 0;
    for (std::size_t i = 0; i < all.traces.size(); ++i) {
        if (all.traces[i].terminated_by != Termination::threshold) continue;
        ++accepted;
        violations += !(all.traces[i].result_distance < all.rho0[i]);
    }
    report(9, "threshold soundness", violations == 0,
           fmt("%zu violations among %zu threshold stops (%zu traces)", violations, accepted, all.traces.size()));
}

void c10_determinism(const Desk& d) {
    BenchConfig config;
    config.algorithms = {{Algorithm::brute, 0}, {Algorithm::mlann, 1}, {Algorithm::dmlann, 3}};
    config.thresholds = {d.rho0};
    config.max_iteration_sweep = {1, 2, 4, 8, 16, 32, d.split.refs.size()};
    config.query_count = d.queries50.size();
    config.threads = 1;
    const auto serial = run_bench(config, d.split.refs, d.matrix, d.models, d.queries50);
    const unsigned many = std::max(4u, default_threads());
    config.threads = many;
    const auto parallel = run_bench(config, d.split.refs, d.matrix, d.models, d.queries50);
    bool orders = serial.traces.size() == parallel.traces.size();
    for (std::size_t i = 0; orders && i < serial.traces.size(); ++i)
        orders = serial.traces[i].trace.candidate_order == parallel.traces[i].trace.candidate_order;
    const bool csv = bench_csv(serial.rows, false) == bench_csv(parallel.rows, false);
    report(10, "determinism under parallelism", csv && orders,
           fmt("1 vs %u threads: bench.csv %s, candidate orders %s", many, csv ? "identical" : "differ",
               orders ? "identical" : "differ"));
}

void c11_images() {
    dmlann::testing::TempDir tmp;
    std::filesystem::path dir;
    if (const char* env = std::getenv("FACE_DIR"); env && *env) {
        dir = env;
    } else {
        dir = tmp / "faces";
        dmlann::testing::write_image_classes(dir, 12, 6, 48, 11);
    }
    try {
        const auto records = extract_directory(dir, HogParams{}, default_threads());
        std::map<std::string, std::size_t> per_class;
        for (const auto& r : records) ++per_class[r.label];
        IndexOptions options;
        options.query_count = per_class.size();
        build_index(records, options, tmp / "index");
        const auto bundle = load_index(tmp / "index");

        BenchConfig config;
        config.algorithms = {{Algorithm::brute, 0}, {Algorithm::dmlann, 3}};
        config.thresholds = {0.083, 0.085};
        config.max_iteration_sweep = {1, 2, 4, 8, 16, 32, bundle.refs.size()};
        config.query_count = bundle.queries.size();
        const auto result = run_bench(config, bundle.refs, bundle.matrix, bundle.models, bundle.queries);

        bool ok = per_class.size() >= 10;
        for (const auto& [label, count] : per_class) ok &= count >= 5;
        std::string detail = fmt("%zu classes, R=%zu, %zu queries;", per_class.size(), bundle.refs.size(),
                                 bundle.queries.size());
        for (double rho0 : config.thresholds) {
            double brute = -1.0, dml = -2.0;
            for (const auto& row : result.rows) {
                if (row.rho0 != rho0) continue;
                if (row.algorithm == "NN") brute = row.accuracy;
                if (row.algorithm == "D-ML-ANN-Cl3" && row.max_iterations == bundle.refs.size()) dml = row.accuracy;
            }
            ok &= brute == dml;
            detail += fmt(" rho0=%.3f NN %.4f vs D-ML-ANN-Cl3 %.4f;", rho0, brute, dml);
        }
        detail.pop_back();
        report(11, "end-to-end image smoke", ok, detail);
    } catch (const std::exception& e) {
        report(11, "end-to-end image smoke", false, std::string("pipeline error: ") + e.what());
    }
}

}  // namespace

int main() {
    const auto start = Clock::now();
    const Desk desk = make_desk();
    Collected all;
    c1_oracle(desk, all);
    c2_reduction(desk, all);
    c3_reduction(desk, all);
    c4_monotone(desk, all);
    c5_weights();
    c6_score();
    c7_chi_square();
    c8_density();
    c9_threshold(all);
    c10_determinism(desk);
    c11_images();
    std::printf("%d of 11 criteria failed (%.1f s)\n", failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}
