#include "dmlann/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace dmlann {

using json = nlohmann::json;

void validate(const SearchParams& params, std::size_t reference_count) {
    if (!(params.rho0 >= 0.0) || !std::isfinite(params.rho0))
        throw std::invalid_argument("rho0 must be a finite value >= 0");
    if (params.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!params.priors.empty()) {
        if (params.priors.size() != reference_count)
            throw std::invalid_argument("one prior per reference is required");
        for (double p : params.priors)
            if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("priors must be positive");
    }
}

std::string_view to_string(Termination t) {
    return t == Termination::threshold ? "threshold" : "budget";
}

std::string trace_to_json(const QueryTrace& trace) {
    json order = json::array();
    for (const auto& c : trace.candidate_order) order.push_back({c.iteration, c.cluster, c.reference});
    json j = {
        {"result_label", trace.result_label},
        {"result_reference", trace.result_reference},
        {"result_distance", trace.result_distance},
        {"terminated_by", to_string(trace.terminated_by)},
        {"iterations", trace.iterations},
        {"distance_computations", trace.distance_computations},
        {"elapsed_seconds", trace.elapsed_seconds},
        {"candidate_order", std::move(order)},
    };
    return j.dump();
}

QueryTrace trace_from_json(std::string_view text) {
    const json j = json::parse(text);
    QueryTrace t;
    t.result_label = j.at("result_label").get<std::string>();
    t.result_reference = j.at("result_reference").get<std::size_t>();
    t.result_distance = j.at("result_distance").get<double>();
    const auto term = j.at("terminated_by").get<std::string>();
    if (term == "threshold") {
        t.terminated_by = Termination::threshold;
    } else if (term == "budget") {
        t.terminated_by = Termination::budget;
    } else {
        throw std::runtime_error("unknown terminated_by value: " + term);
    }
    t.iterations = j.at("iterations").get<std::size_t>();
    t.distance_computations = j.at("distance_computations").get<std::size_t>();
    t.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    for (const auto& c : j.at("candidate_order"))
        t.candidate_order.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(),
                                     c.at(2).get<std::size_t>()});
    return t;
}

double conditional_density(double rho, double rho_nu_ri, const Geometry& geometry) {
    if (!std::isfinite(rho) || !std::isfinite(rho_nu_ri))
        throw std::invalid_argument("conditional_density: non-finite input");
    if (rho < 0.0 || rho_nu_ri < 0.0) throw std::invalid_argument("conditional_density: negative distance");
    if (geometry.width <= 0 || geometry.height <= 0 || geometry.bins < 2)
        throw std::invalid_argument("conditional_density: invalid geometry");
    const double uv = static_cast<double>(geometry.width) * static_cast<double>(geometry.height);
    const double dof = static_cast<double>(geometry.bins - 1);
    const double norm = uv / std::sqrt(2.0 * std::numbers::pi * (4.0 * uv * rho_nu_ri + 2.0 * dof));
    const double offset = rho - rho_nu_ri - dof / uv;
    const double exponent = -uv * offset * offset / (8.0 * rho_nu_ri + 4.0 * dof / uv);
    return norm * std::exp(exponent);
}

double phi(double query_dist, double matrix_dist) {
    const double diff = query_dist - matrix_dist;
    const double numerator = diff * diff;
    if (matrix_dist < kPhiEpsilon)
        return numerator < kPhiEpsilon * kPhiEpsilon ? 0.0 : kPhiSentinel;
    return numerator / matrix_dist;
}

QueueState::QueueState(const DistanceMatrix& matrix, std::size_t cluster_count)
    : matrix_(matrix),
      queues_(cluster_count),
      sums_(cluster_count, 0.0),
      considered_mask_(matrix.size(), 0),
      distances_(matrix.size(), std::numeric_limits<double>::quiet_NaN()),
      evidence_(matrix.size(), 0.0) {
    if (cluster_count == 0) throw std::invalid_argument("at least one queue is required");
}

void QueueState::add(std::size_t cluster, std::size_t reference, double query_distance) {
    if (cluster >= queues_.size()) throw std::out_of_range("cluster index out of range");
    if (reference >= considered_mask_.size()) throw std::out_of_range("reference index out of range");
    if (considered_mask_[reference]) throw std::logic_error("reference already considered");
    considered_mask_[reference] = 1;
    distances_[reference] = query_distance;
    order_.push_back(reference);
    queues_[cluster].push_back(reference);
    sums_[cluster] += query_distance;

    const auto row = matrix_.row(reference);
    for (std::size_t mu = 0; mu < evidence_.size(); ++mu) evidence_[mu] += phi(query_distance, row[mu]);
}

double neg_log_prior(const SearchParams& params, std::size_t mu, std::size_t reference_count) {
    if (params.priors.empty()) return std::log(static_cast<double>(reference_count));
    return -std::log(params.priors.at(mu));
}

double score(std::size_t mu, const QueueState& state, const DistanceMatrix& matrix,
             const SearchParams& params) {
    double sum = 0.0;
    for (std::size_t r : state.considered()) sum += phi(state.recorded_distance(r), matrix(mu, r));
    return sum + neg_log_prior(params, mu, matrix.size());
}

std::optional<std::size_t> select_next(const QueueState& state, std::size_t cluster,
                                       const ClusterModel& model, const SearchParams& params) {
    if (cluster >= model.k) throw std::out_of_range("cluster index out of range");
    std::optional<std::size_t> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t mu : model.members[cluster]) {
        if (state.is_considered(mu)) continue;
        const double s = state.evidence(mu) + neg_log_prior(params, mu, state.reference_count());
        if (!best || s < best_score || (s == best_score && mu < *best)) {
            best = mu;
            best_score = s;
        }
    }
    return best;
}

std::vector<std::size_t> weights_from_averages(std::span<const double> averages, std::size_t cap) {
    cap = std::max<std::size_t>(cap, 1);
    const double max_avg = averages.empty() ? 0.0 : *std::max_element(averages.begin(), averages.end());
    std::vector<std::size_t> weights(averages.size(), 1);
    for (std::size_t i = 0; i < averages.size(); ++i) {
        const double avg = averages[i];
        if (avg == max_avg) continue;
        if (avg <= 0.0) {
            weights[i] = cap;
            continue;
        }
        const double ratio = std::ceil(max_avg / avg);
        weights[i] = ratio >= static_cast<double>(cap)
                         ? cap
                         : std::max<std::size_t>(1, static_cast<std::size_t>(ratio));
    }
    return weights;
}

const std::vector<std::size_t>& update_weights(QueueState& state) {
    std::vector<double> averages(state.cluster_count());
    for (std::size_t c = 0; c < averages.size(); ++c) {
        const auto count = state.queue(c).size();
        if (count == 0) throw std::logic_error("update_weights: empty queue");
        averages[c] = state.distance_sum(c) / static_cast<double>(count);
    }
    state.weights = weights_from_averages(averages, state.reference_count());
    return state.weights;
}

std::vector<std::size_t> allocate_selections(std::span<const std::size_t> weights,
                                             std::span<const std::size_t> remaining) {
    if (weights.size() != remaining.size())
        throw std::invalid_argument("allocate_selections: size mismatch");
    const std::size_t n = weights.size();
    std::vector<std::size_t> alloc(n);
    std::size_t excess = 0;
    for (std::size_t i = 0; i < n; ++i) {
        alloc[i] = std::min(weights[i], remaining[i]);
        excess += weights[i] - alloc[i];
    }
    while (excess > 0) {
        std::vector<std::size_t> open;
        std::size_t total_weight = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (alloc[i] < remaining[i]) {
                open.push_back(i);
                total_weight += weights[i];
            }
        }
        if (open.empty() || total_weight == 0) break;

        std::vector<std::size_t> share(n, 0);
        std::vector<std::size_t> rest(n, 0);
        std::size_t given = 0;
        for (std::size_t i : open) {
            share[i] = excess * weights[i] / total_weight;
            rest[i] = excess * weights[i] % total_weight;
            given += share[i];
        }
        std::vector<std::size_t> by_remainder = open;
        std::stable_sort(by_remainder.begin(), by_remainder.end(),
                         [&](std::size_t a, std::size_t b) { return rest[a] > rest[b]; });
        for (std::size_t j = 0; given < excess; ++j, ++given) ++share[by_remainder[j % by_remainder.size()]];

        excess = 0;
        for (std::size_t i : open) {
            const std::size_t room = remaining[i] - alloc[i];
            const std::size_t take = std::min(room, share[i]);
            alloc[i] += take;
            excess += share[i] - take;
        }
    }
    return alloc;
}

namespace {

using Clock = std::chrono::steady_clock;

void check_index(const ReferenceSet& refs, const DistanceMatrix& matrix) {
    if (refs.size() == 0) throw std::invalid_argument("reference set is empty");
    if (matrix.size() != refs.size())
        throw std::invalid_argument("distance matrix size does not match the reference set");
}

QueryTrace finish(QueryTrace trace, const QueueState& state, const ReferenceSet& refs,
                  const QueryDistances& distances, Termination how, Clock::time_point start) {
    std::size_t best = state.considered().front();
    for (std::size_t r : state.considered()) {
        const double d = state.recorded_distance(r);
        const double best_d = state.recorded_distance(best);
        if (d < best_d || (d == best_d && r < best)) best = r;
    }
    trace.result_reference = best;
    trace.result_distance = state.recorded_distance(best);
    trace.result_label = refs.label(best);
    trace.terminated_by = how;
    trace.iterations = state.iteration;
    trace.distance_computations = distances.computations();
    trace.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return trace;
}

}  // namespace

QueryTrace search_dmlann(const FeatureVector& query, const ReferenceSet& refs,
                         const DistanceMatrix& matrix, const ClusterModel& model,
                         const SearchParams& params) {
    const auto start = Clock::now();
    check_index(refs, matrix);
    if (model.reference_count() != refs.size())
        throw std::invalid_argument("cluster model size does not match the reference set");
    validate(params, refs.size());

    QueryDistances distances(query, refs);
    QueueState state(matrix, model.k);
    QueryTrace trace;

    bool accepted = false;
    for (std::size_t c = 0; c < model.k; ++c) {
        const std::size_t first = model.medoid[c];
        const double d = distances.get(first);
        state.add(c, first, d);
        trace.candidate_order.push_back({0, c, first});
        accepted |= accept(d, params);
    }
    if (accepted) return finish(std::move(trace), state, refs, distances, Termination::threshold, start);
    update_weights(state);

    std::vector<std::size_t> remaining(model.k);
    while (state.iteration < params.max_iterations) {
        std::size_t left = 0;
        for (std::size_t c = 0; c < model.k; ++c) {
            remaining[c] = model.members[c].size() - state.queue(c).size();
            left += remaining[c];
        }
        if (left == 0) break;
        ++state.iteration;

        const auto alloc = allocate_selections(state.weights, remaining);
        for (std::size_t c = 0; c < model.k; ++c) {
            for (std::size_t t = 0; t < alloc[c]; ++t) {
                const auto next = select_next(state, c, model, params);
                if (!next) throw std::logic_error("allocation exceeded cluster size");
                const double d = distances.get(*next);
                state.add(c, *next, d);
                trace.candidate_order.push_back({state.iteration, c, *next});
                if (accept(d, params))
                    return finish(std::move(trace), state, refs, distances, Termination::threshold, start);
            }
        }
        update_weights(state);
    }
    return finish(std::move(trace), state, refs, distances, Termination::budget, start);
}

QueryTrace search_mlann(const FeatureVector& query, const ReferenceSet& refs,
                        const DistanceMatrix& matrix, const SearchParams& params, std::size_t first) {
    const auto start = Clock::now();
    check_index(refs, matrix);
    validate(params, refs.size());
    if (first >= refs.size()) throw std::out_of_range("first reference index out of range");

    QueryDistances distances(query, refs);
    QueueState state(matrix, 1);
    QueryTrace trace;

    double d = distances.get(first);
    state.add(0, first, d);
    trace.candidate_order.push_back({0, 0, first});
    if (accept(d, params)) return finish(std::move(trace), state, refs, distances, Termination::threshold, start);

    const std::size_t n = refs.size();
    while (state.iteration < params.max_iterations) {
        std::size_t best = n;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t mu = 0; mu < n; ++mu) {
            if (state.is_considered(mu)) continue;
            const double s = state.evidence(mu) + neg_log_prior(params, mu, n);
            if (best == n || s < best_score) {
                best = mu;
                best_score = s;
            }
        }
        if (best == n) break;
        ++state.iteration;
        d = distances.get(best);
        state.add(0, best, d);
        trace.candidate_order.push_back({state.iteration, 0, best});
        if (accept(d, params))
            return finish(std::move(trace), state, refs, distances, Termination::threshold, start);
    }
    return finish(std::move(trace), state, refs, distances, Termination::budget, start);
}

QueryTrace search_bruteforce(const FeatureVector& query, const ReferenceSet& refs) {
    const auto start = Clock::now();
    if (refs.size() == 0) throw std::invalid_argument("reference set is empty");
    QueryDistances distances(query, refs);
    QueryTrace trace;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const double d = distances.get(r);
        trace.candidate_order.push_back({0, 0, r});
        if (d < best_d) {
            best = r;
            best_d = d;
        }
    }
    trace.result_reference = best;
    trace.result_distance = best_d;
    trace.result_label = refs.label(best);
    trace.terminated_by = Termination::budget;
    trace.iterations = refs.size();
    trace.distance_computations = distances.computations();
    trace.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return trace;
}

}  // namespace dmlann
