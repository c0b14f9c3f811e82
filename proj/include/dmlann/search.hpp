#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmlann/cluster.hpp"
#include "dmlann/distance.hpp"

namespace dmlann {

enum class TieBreak { lowest_index };

struct SearchParams {
    /// Acceptance radius: a candidate closer than this ends the search.
    double rho0 = 0.085;
    /// Outer sweeps for D-ML-ANN; score-ranked selections after the first instance
    /// for ML-ANN.
    std::size_t max_iterations = 100;
    /// Per-reference priors p_mu. Empty means uniform 1/R.
    std::vector<double> priors;
    TieBreak tie_break = TieBreak::lowest_index;
};

void validate(const SearchParams& params, std::size_t reference_count);

enum class Termination { threshold, budget };

std::string_view to_string(Termination t);

struct CandidateRecord {
    std::size_t iteration = 0;
    std::size_t cluster = 0;
    std::size_t reference = 0;

    friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

struct QueryTrace {
    std::string result_label;
    std::size_t result_reference = 0;
    double result_distance = 0.0;
    Termination terminated_by = Termination::budget;
    std::size_t iterations = 0;
    std::size_t distance_computations = 0;
    double elapsed_seconds = 0.0;
    std::vector<CandidateRecord> candidate_order;
};

std::string trace_to_json(const QueryTrace& trace);
QueryTrace trace_from_json(std::string_view text);

/// Termination test: strictly closer than rho0.
inline bool accept(double distance, double rho0) { return distance < rho0; }
inline bool accept(double distance, const SearchParams& params) {
    return accept(distance, params.rho0);
}

/// Normal approximation of the conditional density of the query distance
/// given a hypothesis whose reference-to-reference distance is `rho_nu_ri`.
/// Diagnostic only; the search ranks candidates with phi().
double conditional_density(double rho, double rho_nu_ri, const Geometry& geometry);

inline constexpr double kPhiEpsilon = 1e-12;
inline constexpr double kPhiSentinel = 1e18;

/// Evidence term (query_dist - matrix_dist)^2 / matrix_dist. A zero matrix
/// distance maps to 0 when the query distance is also ~0, else to 1e18.
double phi(double query_dist, double matrix_dist);

/// Cluster queues and the evidence gathered for one query.
///
/// Every considered candidate adds phi(query distance, matrix[mu][r]) to the
/// running evidence of every mu, in the order candidates are considered.
class QueueState {
public:
    QueueState(const DistanceMatrix& matrix, std::size_t cluster_count);

    void add(std::size_t cluster, std::size_t reference, double query_distance);

    std::size_t reference_count() const { return considered_mask_.size(); }
    std::size_t cluster_count() const { return queues_.size(); }
    bool is_considered(std::size_t r) const { return considered_mask_[r]; }
    const std::vector<std::size_t>& considered() const { return order_; }
    double recorded_distance(std::size_t r) const { return distances_[r]; }
    const std::vector<std::size_t>& queue(std::size_t cluster) const { return queues_[cluster]; }
    double distance_sum(std::size_t cluster) const { return sums_[cluster]; }
    double evidence(std::size_t mu) const { return evidence_[mu]; }

    std::vector<std::size_t> weights;
    std::size_t iteration = 0;

private:
    const DistanceMatrix& matrix_;
    std::vector<std::vector<std::size_t>> queues_;
    std::vector<double> sums_;
    std::vector<std::size_t> order_;
    std::vector<char> considered_mask_;
    std::vector<double> distances_;
    std::vector<double> evidence_;
};

/// -ln p_mu.
double neg_log_prior(const SearchParams& params, std::size_t mu, std::size_t reference_count);

/// Sum of phi over every considered candidate, minus ln p_mu, computed
/// directly from the matrix.
double score(std::size_t mu, const QueueState& state, const DistanceMatrix& matrix,
             const SearchParams& params);

/// Unconsidered member of `cluster` with the lowest score, ties to the lowest
/// reference index; nullopt when the cluster is exhausted.
std::optional<std::size_t> select_next(const QueueState& state, std::size_t cluster,
                                       const ClusterModel& model, const SearchParams& params);

/// ceil(max_avg / avg_i), capped at `cap`; an average of 0 takes the cap and
/// all-equal averages give all ones.
std::vector<std::size_t> weights_from_averages(std::span<const double> averages, std::size_t cap);

/// Recomputes per-queue averages and stores the resulting weights in `state`.
const std::vector<std::size_t>& update_weights(QueueState& state);

/// Per-cluster selection counts for one sweep. Allocations beyond a cluster's
/// remaining members move to clusters with room, proportionally to their
/// weights with largest-remainder rounding.
std::vector<std::size_t> allocate_selections(std::span<const std::size_t> weights,
                                             std::span<const std::size_t> remaining);

/// Distributed ML-ANN over one queue per cluster.
QueryTrace search_dmlann(const FeatureVector& query, const ReferenceSet& refs,
                         const DistanceMatrix& matrix, const ClusterModel& model,
                         const SearchParams& params);

/// Single-queue ML-ANN starting from reference `first`.
QueryTrace search_mlann(const FeatureVector& query, const ReferenceSet& refs,
                        const DistanceMatrix& matrix, const SearchParams& params,
                        std::size_t first);

/// Exact linear scan.
QueryTrace search_bruteforce(const FeatureVector& query, const ReferenceSet& refs);

}  // namespace dmlann
