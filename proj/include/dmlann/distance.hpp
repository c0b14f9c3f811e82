#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmlann/types.hpp"

namespace dmlann {

/// Chi-square histogram distance: sum of (a_i - b_i)^2 / (a_i + b_i), where
/// terms with a_i + b_i == 0 contribute nothing.
double chi_square(std::span<const double> a, std::span<const double> b);

inline double chi_square(const FeatureVector& a, const FeatureVector& b) {
    return chi_square(a.view(), b.view());
}

/// Labeled reference vectors sharing one geometry.
class ReferenceSet {
public:
    ReferenceSet() = default;
    ReferenceSet(std::vector<FeatureVector> vectors, std::vector<std::string> labels);

    static ReferenceSet from_records(const std::vector<LabeledFeature>& records);

    std::size_t size() const { return vectors_.size(); }
    std::size_t dimension() const { return vectors_.empty() ? 0 : vectors_.front().size(); }
    const Geometry& geometry() const { return geometry_; }
    const FeatureVector& vector(std::size_t r) const { return vectors_.at(r); }
    const std::string& label(std::size_t r) const { return labels_.at(r); }
    const std::vector<FeatureVector>& vectors() const { return vectors_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t class_count() const { return class_count_; }

private:
    std::vector<FeatureVector> vectors_;
    std::vector<std::string> labels_;
    Geometry geometry_;
    std::size_t class_count_ = 0;
};

/// Symmetric R x R matrix of reference-to-reference distances.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}
    DistanceMatrix(std::size_t n, std::vector<double> entries);

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
    double& at(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
    const std::vector<double>& entries() const { return entries_; }

    /// Principal submatrix over `indices`, in that order.
    DistanceMatrix subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> entries_;
};

/// Computes the upper triangle and mirrors it. Rows are split across threads.
DistanceMatrix build_distance_matrix(const ReferenceSet& refs, unsigned threads = 1);

/// Binary layout: "DMLM", u16 version = 1, u32 R, R*R little-endian f64.
void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m);
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);
void write_distance_matrix_csv(const std::filesystem::path& path, const DistanceMatrix& m);

/// Number of query-time distance evaluations.
class DistanceCounter {
public:
    void increment() { count_.fetch_add(1, std::memory_order_relaxed); }
    std::size_t count() const { return count_.load(std::memory_order_relaxed); }

private:
    std::atomic<std::size_t> count_{0};
};

/// Per-query memo of input-to-reference distances. Each reference is
/// evaluated (and counted) at most once; concurrent requests are safe.
class QueryDistances {
public:
    QueryDistances(const FeatureVector& query, const ReferenceSet& refs);

    double get(std::size_t r);
    bool known(std::size_t r) const;
    std::size_t computations() const { return counter_.count(); }
    const DistanceCounter& counter() const { return counter_; }

private:
    const FeatureVector& query_;
    const ReferenceSet& refs_;
    std::vector<std::atomic<double>> memo_;
    DistanceCounter counter_;
};

/// Functional form of the memoized query distance.
double query_distance(QueryDistances& memo, std::size_t r);

}  // namespace dmlann
