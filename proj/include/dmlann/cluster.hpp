#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dmlann/distance.hpp"

namespace dmlann {

/// K-way partition of the reference set. `medoid[i]` is the member of
/// cluster i nearest (Euclidean) to its centroid, ties to the lowest index.
struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> medoid;
    std::vector<std::vector<std::size_t>> members;

    std::size_t reference_count() const { return assignment.size(); }

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct KMeansReport {
    int sweeps = 0;
    bool converged = false;
    /// Sum of squared distances to the assigned centroid after each sweep.
    std::vector<double> objective;
};

inline constexpr int kMaxKMeansSweeps = 300;

/// Lloyd's algorithm with k-means++ seeding. Deterministic in (refs, k, seed).
ClusterModel kmeans(const ReferenceSet& refs, std::size_t k, std::uint64_t seed,
                    KMeansReport* report = nullptr);

/// Reference nearest (Euclidean) to the mean of all references; the medoid of
/// the single-cluster model.
std::size_t global_medoid(const ReferenceSet& refs);

std::size_t cluster_of(const ClusterModel& model, std::size_t r);

/// Throws std::invalid_argument if the model violates its invariants for a
/// reference set of size `reference_count`.
void validate(const ClusterModel& model, std::size_t reference_count);

/// Fills `members` and `medoid` from `assignment` and `centroids`.
void finalize_members(ClusterModel& model, const ReferenceSet& refs);

/// `DMLANN-CLUSTERS v1,k,R`, then R rows `r,assignment`, K rows
/// `cluster,medoid_index`, K centroid rows at 17 significant digits.
void write_cluster_model(const std::filesystem::path& path, const ClusterModel& model);
ClusterModel read_cluster_model(const std::filesystem::path& path);

}  // namespace dmlann
