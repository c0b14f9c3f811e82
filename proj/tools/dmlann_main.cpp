// dmlann: feature extraction, indexing, querying and benchmarking.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmlann/bench.hpp"
#include "dmlann/bundle.hpp"
#include "dmlann/features.hpp"
#include "dmlann/parallel.hpp"
#include "dmlann/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dmlann;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void add_hog_flags(CLI::App* cmd, HogParams& hog) {
    cmd->add_option("--cell-size", hog.cell_size, "HOG cell side in pixels")->capture_default_str();
    cmd->add_option("--block-size", hog.block_size, "HOG block side in cells")->capture_default_str();
    cmd->add_option("--bins", hog.bins, "orientation bins (N)")->capture_default_str();
    cmd->add_flag("--signed", hog.signed_gradients, "use signed gradient orientations");
}

struct SynthArgs {
    SyntheticSpec spec;
    std::string output;
};

void cmd_synth(const SynthArgs& a) {
    const auto records = generate_synthetic(a.spec);
    write_feature_file(a.output, records);
    std::cout << "wrote " << records.size() << " synthetic records (" << a.spec.class_count
              << " classes, seed " << a.spec.seed << ") to " << a.output << '\n';
}

struct ExtractArgs {
    std::string input;
    std::string output;
    HogParams hog;
    unsigned threads = default_threads();
};

void cmd_extract(const ExtractArgs& a) {
    const auto records = extract_directory(a.input, a.hog, a.threads);
    write_feature_file(a.output, records);
    const auto& g = records.front().features.geometry;
    std::cout << "extracted " << records.size() << " records, geometry " << g.width << 'x' << g.height
              << 'x' << g.bins << ", dim " << records.front().features.size() << " -> " << a.output
              << '\n';
}

struct IndexArgs {
    std::string features;
    std::string output;
    IndexOptions options;
    unsigned threads = default_threads();
};

void cmd_index(IndexArgs a) {
    a.options.threads = a.threads;
    const auto records = read_feature_file(a.features);
    const auto bundle = build_index(records, a.options, a.output);
    std::cout << "indexed R=" << bundle.refs.size() << " references (" << bundle.refs.class_count()
              << " classes), " << bundle.queries.size() << " held-out queries, k =";
    for (const auto& [k, _] : bundle.models) std::cout << ' ' << k;
    std::cout << ", seed " << a.options.seed << " -> " << a.output << '\n';
}

struct QueryArgs {
    std::string index;
    std::string image;
    std::string features;
    std::size_t row = 0;
    std::string algo = "dmlann";
    std::size_t k = 3;
    double rho0 = 0.085;
    std::size_t max_iter = 100;
    long first = -1;
    std::string trace;
};

void cmd_query(const QueryArgs& a) {
    const auto bundle = load_index(a.index);
    FeatureVector x;
    if (!a.image.empty()) {
        x = extract_hog(load_image(a.image), bundle.options.hog);
    } else {
        const auto records = read_feature_file(a.features);
        if (a.row >= records.size()) throw std::out_of_range("--row beyond the feature file");
        x = records[a.row].features;
    }
    if (x.geometry != bundle.geometry || x.size() != bundle.dimension)
        throw std::runtime_error("query feature geometry does not match the index");

    SearchParams params;
    params.rho0 = a.rho0;
    params.max_iterations = a.max_iter;
    QueryTrace trace;
    if (a.algo == "brute") {
        trace = search_bruteforce(x, bundle.refs);
    } else if (a.algo == "mlann") {
        std::size_t first;
        if (a.first >= 0) {
            first = static_cast<std::size_t>(a.first);
        } else {
            first = bundle.models.contains(1) ? bundle.models.at(1).medoid.front() : global_medoid(bundle.refs);
        }
        trace = search_mlann(x, bundle.refs, bundle.matrix, params, first);
    } else {
        const auto it = bundle.models.find(a.k);
        if (it == bundle.models.end())
            throw std::runtime_error("index has no cluster model for k=" + std::to_string(a.k));
        trace = search_dmlann(x, bundle.refs, bundle.matrix, it->second, params);
    }

    std::printf("label: %s\nreference: %zu\ndistance: %.17g\nterminated_by: %s\n"
                "iterations: %zu\ndistance_computations: %zu\ntime_s: %.9f\n",
                trace.result_label.c_str(), trace.result_reference, trace.result_distance,
                std::string(to_string(trace.terminated_by)).c_str(), trace.iterations,
                trace.distance_computations, trace.elapsed_seconds);
    if (!a.trace.empty()) write_text(a.trace, trace_to_json(trace) + "\n");
}

struct BenchArgs {
    std::string index;
    std::string config;
    std::string output = ".";
    std::vector<std::string> algorithms;
    std::vector<double> thresholds;
    std::vector<std::size_t> sweep;
    std::size_t query_count = 0;
    long split_seed = -1;
    std::size_t repetitions = 0;
    bool resubstitution = false;
    unsigned threads = default_threads();
};

void cmd_bench(const BenchArgs& a) {
    const auto bundle = load_index(a.index);
    BenchConfig config;
    if (!a.config.empty()) {
        config = read_bench_config(a.config);
    } else {
        config.algorithms = {parse_algorithm("NN"), parse_algorithm("ML-ANN"), parse_algorithm("D-ML-ANN-Cl2"),
                             parse_algorithm("D-ML-ANN-Cl3")};
        config.split_seed = bundle.options.split_seed;
        if (!bundle.queries.empty()) config.query_count = std::min<std::size_t>(50, bundle.queries.size());
    }
    if (!a.algorithms.empty()) {
        config.algorithms.clear();
        for (const auto& name : a.algorithms) config.algorithms.push_back(parse_algorithm(name));
    }
    if (!a.thresholds.empty()) config.thresholds = a.thresholds;
    if (!a.sweep.empty()) config.max_iteration_sweep = a.sweep;
    if (a.query_count) config.query_count = a.query_count;
    if (a.split_seed >= 0) config.split_seed = static_cast<std::uint64_t>(a.split_seed);
    if (a.repetitions) config.repetitions = a.repetitions;
    if (a.resubstitution) config.resubstitution = true;
    config.threads = a.threads;
    validate(config);

    std::vector<LabeledQuery> queries;
    if (config.resubstitution) {
        std::vector<LabeledFeature> records;
        for (std::size_t r = 0; r < bundle.refs.size(); ++r)
            records.push_back({bundle.refs.label(r), {}, bundle.refs.vector(r)});
        queries = split_sample(records, config.query_count, config.split_seed, true).queries;
    } else {
        if (bundle.queries.empty())
            throw std::runtime_error("index holds no held-out queries; rebuild it with --query-count or "
                                     "enable resubstitution");
        if (config.split_seed != bundle.options.split_seed)
            throw std::runtime_error("bench split_seed " + std::to_string(config.split_seed) +
                                     " differs from the index split seed " +
                                     std::to_string(bundle.options.split_seed));
        if (config.query_count > bundle.queries.size())
            throw std::runtime_error("index holds only " + std::to_string(bundle.queries.size()) +
                                     " held-out queries");
        queries.assign(bundle.queries.begin(), bundle.queries.begin() + static_cast<long>(config.query_count));
    }

    const auto result = run_bench(config, bundle.refs, bundle.matrix, bundle.models, queries);
    const auto min_cost = min_cost_for_accuracy(result.rows);

    const fs::path out(a.output);
    fs::create_directories(out);
    write_text(out / "bench.csv", bench_csv(result.rows));
    write_text(out / "min_cost.csv", min_cost_csv(min_cost));
    write_text(out / "traces.jsonl", traces_jsonl(result.traces));

    nlohmann::json meta;
    meta["index_seed"] = bundle.options.seed;
    meta["split_seed"] = config.split_seed;
    meta["query_count"] = config.query_count;
    meta["resubstitution"] = config.resubstitution;
    meta["repetitions"] = config.repetitions;
    meta["reference_count"] = bundle.refs.size();
    nlohmann::json algorithms = nlohmann::json::array();
    for (const auto& alg : config.algorithms) algorithms.push_back(alg.name());
    meta["algorithms"] = algorithms;
    meta["thresholds"] = config.thresholds;
    meta["max_iteration_sweep"] = config.max_iteration_sweep;
    write_text(out / "bench_meta.json", meta.dump(2) + "\n");

    std::cout << "bench: " << result.rows.size() << " rows over " << config.query_count
              << " queries (split seed " << config.split_seed << ", index seed " << bundle.options.seed
              << ") -> " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed maximum-likelihood approximate nearest neighbor search"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a seeded synthetic feature file");
    s->add_option("--output,-o", synth.output, "feature file to write")->required();
    s->add_option("--classes", synth.spec.class_count)->capture_default_str();
    s->add_option("--per-class", synth.spec.refs_per_class)->capture_default_str();
    s->add_option("--dim", synth.spec.dimension)->capture_default_str();
    s->add_option("--intra", synth.spec.intra_class_spread)->capture_default_str();
    s->add_option("--inter", synth.spec.inter_class_spread)->capture_default_str();
    s->add_option("--seed", synth.spec.seed)->capture_default_str();

    ExtractArgs extract;
    auto* e = app.add_subcommand("extract", "extract HOG features from <dir>/<class>/<image>");
    e->add_option("--input,-i", extract.input, "labeled image directory")->required();
    e->add_option("--output,-o", extract.output, "feature file to write")->required();
    add_hog_flags(e, extract.hog);
    e->add_option("--threads", extract.threads)->capture_default_str();

    IndexArgs index;
    auto* ix = app.add_subcommand("index", "build the distance matrix and cluster models");
    ix->add_option("--features,-f", index.features, "feature file")->required();
    ix->add_option("--output,-o", index.output, "index directory")->required();
    ix->add_option("--k", index.options.ks, "cluster counts, e.g. 1,2,3")->delimiter(',')->capture_default_str();
    ix->add_option("--seed", index.options.seed, "k-means seed")->capture_default_str();
    ix->add_option("--query-count", index.options.query_count, "records held out as queries")
        ->capture_default_str();
    ix->add_option("--split-seed", index.options.split_seed)->capture_default_str();
    add_hog_flags(ix, index.options.hog);
    ix->add_option("--threads", index.threads)->capture_default_str();

    QueryArgs query;
    auto* q = app.add_subcommand("query", "recognize one image");
    q->add_option("--index", query.index, "index directory")->required();
    auto* image_opt = q->add_option("--image", query.image, "PGM/PPM image");
    auto* feat_opt = q->add_option("--features", query.features, "feature file holding the query");
    image_opt->excludes(feat_opt);
    q->add_option("--row", query.row, "row of --features to use")->capture_default_str();
    q->add_option("--algo", query.algo)->check(CLI::IsMember({"brute", "mlann", "dmlann"}))->capture_default_str();
    q->add_option("--k", query.k, "cluster model for dmlann")->capture_default_str();
    q->add_option("--rho0", query.rho0, "acceptance threshold")->capture_default_str();
    q->add_option("--max-iter", query.max_iter)->capture_default_str();
    q->add_option("--first", query.first, "first reference for mlann (default: global medoid)");
    q->add_option("--trace", query.trace, "write the query trace as JSON");

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "run the benchmark sweep");
    b->add_option("--index", bench.index, "index directory")->required();
    b->add_option("--config", bench.config, "JSON bench config");
    b->add_option("--output,-o", bench.output, "output directory")->capture_default_str();
    b->add_option("--algorithms", bench.algorithms, "e.g. NN,ML-ANN,D-ML-ANN-Cl3")->delimiter(',');
    b->add_option("--thresholds", bench.thresholds)->delimiter(',');
    b->add_option("--sweep", bench.sweep, "max_iterations values")->delimiter(',');
    b->add_option("--query-count", bench.query_count);
    b->add_option("--split-seed", bench.split_seed);
    b->add_option("--repetitions", bench.repetitions);
    b->add_flag("--resubstitution", bench.resubstitution, "draw queries from the references");
    b->add_option("--threads", bench.threads, "workers for non-timing passes")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s) cmd_synth(synth);
        if (*e) cmd_extract(extract);
        if (*ix) cmd_index(index);
        if (*q) {
            if (query.image.empty() && query.features.empty())
                throw std::invalid_argument("query needs --image or --features");
            cmd_query(query);
        }
        if (*b) cmd_bench(bench);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
