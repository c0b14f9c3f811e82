#include "dmlann/bundle.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "dmlann/features.hpp"
#include "json.hpp"

namespace dmlann {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kIndexFormat = "DMLANN-INDEX v1";

std::string cluster_file(std::size_t k) { return "clusters_k" + std::to_string(k) + ".csv"; }

json artifact(const fs::path& dir, const std::string& name) {
    return {{"file", name}, {"sha256", sha256_file(dir / name)}};
}

fs::path verified(const fs::path& dir, const json& entry) {
    const fs::path path = dir / entry.at("file").get<std::string>();
    if (!fs::exists(path)) throw std::runtime_error("index artifact missing: " + path.string());
    if (sha256_file(path) != entry.at("sha256").get<std::string>())
        throw std::runtime_error("checksum mismatch for index artifact: " + path.string());
    return path;
}

std::vector<LabeledQuery> to_queries(const std::vector<LabeledFeature>& records) {
    std::vector<LabeledQuery> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.label, r.features});
    return out;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for checksum: " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 init failed");
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

IndexBundle build_index(const std::vector<LabeledFeature>& records, const IndexOptions& options,
                        const fs::path& out_dir) {
    if (records.empty()) throw std::invalid_argument("no feature records to index");
    if (options.ks.empty()) throw std::invalid_argument("at least one cluster count is required");
    validate(options.hog);

    IndexBundle bundle;
    bundle.dir = out_dir;
    bundle.options = options;
    std::vector<LabeledFeature> reference_records;
    std::vector<LabeledFeature> query_records;
    if (options.query_count > 0) {
        const auto split = split_sample(records, options.query_count, options.split_seed);
        for (std::size_t r : split.reference_rows) reference_records.push_back(records[r]);
        for (std::size_t q : split.query_rows) query_records.push_back(records[q]);
        bundle.queries = split.queries;
    } else {
        reference_records = records;
    }
    bundle.refs = ReferenceSet::from_records(reference_records);
    bundle.geometry = bundle.refs.geometry();
    bundle.dimension = bundle.refs.dimension();
    for (std::size_t k : options.ks)
        if (k < 1 || k > bundle.refs.size())
            throw std::invalid_argument("k=" + std::to_string(k) + " outside [1, R=" +
                                        std::to_string(bundle.refs.size()) + "]");

    bundle.matrix = build_distance_matrix(bundle.refs, options.threads);
    for (std::size_t k : options.ks)
        if (!bundle.models.contains(k)) bundle.models.emplace(k, kmeans(bundle.refs, k, options.seed));

    fs::create_directories(out_dir);
    write_feature_file(out_dir / "references.csv", reference_records);
    if (!query_records.empty()) write_feature_file(out_dir / "queries.csv", query_records);
    write_distance_matrix(out_dir / "distances.dmlm", bundle.matrix);
    for (const auto& [k, model] : bundle.models) write_cluster_model(out_dir / cluster_file(k), model);

    json manifest;
    manifest["format"] = kIndexFormat;
    manifest["geometry"] = {{"U", bundle.geometry.width}, {"V", bundle.geometry.height}, {"N", bundle.geometry.bins}};
    manifest["dimension"] = bundle.dimension;
    manifest["reference_count"] = bundle.refs.size();
    json ks = json::array();
    for (const auto& [k, _] : bundle.models) ks.push_back(k);
    manifest["k"] = ks;
    manifest["seed"] = options.seed;
    manifest["query_count"] = query_records.size();
    manifest["split_seed"] = options.split_seed;
    manifest["hog"] = {{"cell_size", options.hog.cell_size},
                       {"block_size", options.hog.block_size},
                       {"bins", options.hog.bins},
                       {"signed_gradients", options.hog.signed_gradients}};
    json artifacts;
    artifacts["references"] = artifact(out_dir, "references.csv");
    if (!query_records.empty()) artifacts["queries"] = artifact(out_dir, "queries.csv");
    artifacts["distance_matrix"] = artifact(out_dir, "distances.dmlm");
    for (const auto& [k, _] : bundle.models)
        artifacts["clusters"][std::to_string(k)] = artifact(out_dir, cluster_file(k));
    manifest["artifacts"] = artifacts;

    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing manifest in " + out_dir.string());
    return bundle;
}

IndexBundle load_index(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("corrupt manifest: ") + e.what());
    }
    if (manifest.value("format", "") != kIndexFormat)
        throw std::runtime_error("unsupported index format in " + dir.string());

    IndexBundle bundle;
    bundle.dir = dir;
    const auto& g = manifest.at("geometry");
    bundle.geometry = Geometry{g.at("U").get<int>(), g.at("V").get<int>(), g.at("N").get<int>()};
    bundle.dimension = manifest.at("dimension").get<std::size_t>();
    bundle.options.seed = manifest.at("seed").get<std::uint64_t>();
    bundle.options.split_seed = manifest.at("split_seed").get<std::uint64_t>();
    bundle.options.query_count = manifest.at("query_count").get<std::size_t>();
    bundle.options.ks = manifest.at("k").get<std::vector<std::size_t>>();
    const auto& hog = manifest.at("hog");
    bundle.options.hog = HogParams{hog.at("cell_size").get<int>(), hog.at("block_size").get<int>(),
                                   hog.at("bins").get<int>(), hog.at("signed_gradients").get<bool>()};
    const auto& artifacts = manifest.at("artifacts");

    auto check_geometry = [&](const std::vector<LabeledFeature>& records, const char* what) {
        for (const auto& r : records)
            if (r.features.geometry != bundle.geometry || r.features.size() != bundle.dimension)
                throw std::runtime_error(std::string(what) + " geometry does not match the manifest");
    };
    const auto refs = read_feature_file(verified(dir, artifacts.at("references")));
    check_geometry(refs, "reference");
    bundle.refs = ReferenceSet::from_records(refs);
    if (bundle.refs.size() != manifest.at("reference_count").get<std::size_t>())
        throw std::runtime_error("reference count does not match the manifest");
    if (artifacts.contains("queries")) {
        const auto queries = read_feature_file(verified(dir, artifacts.at("queries")));
        check_geometry(queries, "query");
        bundle.queries = to_queries(queries);
    }
    bundle.matrix = read_distance_matrix(verified(dir, artifacts.at("distance_matrix")));
    if (bundle.matrix.size() != bundle.refs.size())
        throw std::runtime_error("distance matrix does not match the reference count");
    for (std::size_t k : bundle.options.ks) {
        const auto& entry = artifacts.at("clusters").at(std::to_string(k));
        auto model = read_cluster_model(verified(dir, entry));
        if (model.k != k) throw std::runtime_error("cluster file for k=" + std::to_string(k) + " holds another k");
        validate(model, bundle.refs.size());
        bundle.models.emplace(k, std::move(model));
    }
    return bundle;
}

}  // namespace dmlann
