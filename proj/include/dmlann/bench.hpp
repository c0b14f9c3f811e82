#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dmlann/cluster.hpp"
#include "dmlann/distance.hpp"
#include "dmlann/search.hpp"

namespace dmlann {

enum class Algorithm { brute, mlann, dmlann };

struct AlgorithmSpec {
    Algorithm algorithm = Algorithm::dmlann;
    std::size_t k = 1;

    /// "NN", "ML-ANN" or "D-ML-ANN-Cl<k>".
    std::string name() const;

    friend bool operator==(const AlgorithmSpec&, const AlgorithmSpec&) = default;
};

/// Accepts "NN"/"brute", "ML-ANN"/"mlann", "D-ML-ANN-Cl<k>", or
/// "D-ML-ANN"/"dmlann" together with `k`.
AlgorithmSpec parse_algorithm(std::string_view name, std::size_t k = 0);

struct BenchConfig {
    std::vector<AlgorithmSpec> algorithms;
    std::vector<double> thresholds{0.083, 0.085};
    std::vector<std::size_t> max_iteration_sweep{1, 2, 4, 8, 16, 32};
    std::size_t query_count = 50;
    std::uint64_t split_seed = 7;
    std::size_t repetitions = 1;
    bool resubstitution = false;
    /// Workers for the count/accuracy pass. Timing always runs on one thread.
    unsigned threads = 1;
};

void validate(const BenchConfig& config);

/// Keys mirror the BenchConfig field names.
BenchConfig read_bench_config(const std::filesystem::path& path);
BenchConfig parse_bench_config(std::string_view json_text);

struct LabeledQuery {
    std::string label;
    FeatureVector features;
};

struct DatasetSplit {
    ReferenceSet refs;
    std::vector<std::size_t> reference_rows;
    std::vector<LabeledQuery> queries;
    std::vector<std::size_t> query_rows;
};

/// Holds out `query_per_class` records from every class (seeded shuffle within
/// each class).
DatasetSplit split_dataset(const std::vector<LabeledFeature>& records, std::size_t query_per_class,
                           std::uint64_t seed);

/// Draws `query_count` records uniformly without replacement across all
/// classes, never taking the last remaining record of a class. With
/// `resubstitution`, the references keep every record.
DatasetSplit split_sample(const std::vector<LabeledFeature>& records, std::size_t query_count,
                          std::uint64_t seed, bool resubstitution = false);

struct BenchRow {
    std::string algorithm;
    std::size_t k = 0;
    double rho0 = 0.0;
    std::size_t max_iterations = 0;
    std::size_t correct = 0;
    std::size_t query_count = 0;
    double accuracy = 0.0;
    double avg_distance_computations = 0.0;
    double avg_recognition_time_seconds = 0.0;
};

struct TraceRecord {
    std::string algorithm;
    std::size_t k = 0;
    double rho0 = 0.0;
    std::size_t max_iterations = 0;
    std::size_t query = 0;
    std::string true_label;
    QueryTrace trace;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<TraceRecord> traces;
};

/// Full cartesian sweep over algorithms x thresholds x budgets. NN rows are
/// run once and reported per threshold with max_iterations = R. `models` must
/// hold a cluster model for every D-ML-ANN k.
BenchResult run_bench(const BenchConfig& config, const ReferenceSet& refs,
                      const DistanceMatrix& matrix,
                      const std::map<std::size_t, ClusterModel>& models,
                      const std::vector<LabeledQuery>& queries);

/// Rebuilds the rows from stored traces, in first-seen cell order.
std::vector<BenchRow> aggregate_traces(const std::vector<TraceRecord>& traces);

struct MinCostRow {
    std::string algorithm;
    std::size_t k = 0;
    double rho0 = 0.0;
    double accuracy = 0.0;
    double min_avg_distance_computations = 0.0;
    double min_avg_time_seconds = 0.0;
};

/// For every accuracy level reached within an (algorithm, k, rho0) group, the
/// cheapest rows reaching at least that accuracy.
std::vector<MinCostRow> min_cost_for_accuracy(const std::vector<BenchRow>& rows);

/// `algorithm,k,rho0,max_iterations,accuracy,avg_dist_comp,avg_time_s`
std::string bench_csv(const std::vector<BenchRow>& rows, bool include_timing = true);
/// `algorithm,k,rho0,accuracy,min_avg_dist_comp,min_avg_time_s`
std::string min_cost_csv(const std::vector<MinCostRow>& rows);
std::string traces_jsonl(const std::vector<TraceRecord>& traces);
std::vector<TraceRecord> parse_traces_jsonl(std::string_view text);

}  // namespace dmlann
