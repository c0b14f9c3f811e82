#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dmlann/bench.hpp"
#include "dmlann/cluster.hpp"
#include "dmlann/distance.hpp"
#include "dmlann/hog.hpp"

namespace dmlann {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct IndexOptions {
    std::vector<std::size_t> ks{1, 2, 3};
    std::uint64_t seed = 42;
    /// Held-out queries stored with the index; 0 keeps every record as a
    /// reference.
    std::size_t query_count = 0;
    std::uint64_t split_seed = 7;
    HogParams hog;
    unsigned threads = 1;
};

/// Index directory contents:
///   manifest.json, references.csv, queries.csv (optional),
///   distances.dmlm, clusters_k<k>.csv
struct IndexBundle {
    std::filesystem::path dir;
    IndexOptions options;
    Geometry geometry;
    std::size_t dimension = 0;
    ReferenceSet refs;
    DistanceMatrix matrix;
    std::map<std::size_t, ClusterModel> models;
    std::vector<LabeledQuery> queries;
};

IndexBundle build_index(const std::vector<LabeledFeature>& records, const IndexOptions& options,
                        const std::filesystem::path& out_dir);

/// Loads and verifies checksums and geometry of every artifact.
IndexBundle load_index(const std::filesystem::path& dir);

}  // namespace dmlann
