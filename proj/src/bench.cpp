#include "dmlann/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "csv_util.hpp"
#include "dmlann/parallel.hpp"
#include "dmlann/random.hpp"
#include "json.hpp"

namespace dmlann {

using json = nlohmann::json;

std::string AlgorithmSpec::name() const {
    switch (algorithm) {
        case Algorithm::brute:
            return "NN";
        case Algorithm::mlann:
            return "ML-ANN";
        case Algorithm::dmlann:
            return "D-ML-ANN-Cl" + std::to_string(k);
    }
    return {};
}

AlgorithmSpec parse_algorithm(std::string_view name, std::size_t k) {
    if (name == "NN" || name == "brute" || name == "bruteforce") return {Algorithm::brute, 0};
    if (name == "ML-ANN" || name == "mlann") return {Algorithm::mlann, 1};
    constexpr std::string_view prefix = "D-ML-ANN-Cl";
    if (name.starts_with(prefix)) {
        const auto digits = name.substr(prefix.size());
        std::size_t parsed = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), parsed);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || parsed == 0)
            throw std::invalid_argument("bad cluster count in algorithm name: " + std::string(name));
        if (k != 0 && k != parsed)
            throw std::invalid_argument("algorithm name and k disagree: " + std::string(name));
        return {Algorithm::dmlann, parsed};
    }
    if (name == "D-ML-ANN" || name == "dmlann") {
        if (k == 0) throw std::invalid_argument("D-ML-ANN needs k >= 1");
        return {Algorithm::dmlann, k};
    }
    throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

void validate(const BenchConfig& config) {
    if (config.algorithms.empty()) throw std::invalid_argument("bench config lists no algorithms");
    for (const auto& a : config.algorithms)
        if (a.algorithm == Algorithm::dmlann && a.k < 1) throw std::invalid_argument("every k must be >= 1");
    if (config.thresholds.empty()) throw std::invalid_argument("bench config lists no thresholds");
    for (double t : config.thresholds)
        if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("thresholds must be finite and >= 0");
    if (config.max_iteration_sweep.empty()) throw std::invalid_argument("empty max_iteration_sweep");
    for (std::size_t i = 0; i < config.max_iteration_sweep.size(); ++i) {
        if (config.max_iteration_sweep[i] < 1) throw std::invalid_argument("max_iterations must be >= 1");
        if (i > 0 && config.max_iteration_sweep[i] <= config.max_iteration_sweep[i - 1])
            throw std::invalid_argument("max_iteration_sweep must be strictly increasing");
    }
    if (config.query_count < 1) throw std::invalid_argument("query_count must be >= 1");
    if (config.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
}

BenchConfig parse_bench_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bench config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("bench config must be a JSON object");
    static const std::set<std::string> known{"algorithms",  "thresholds",  "max_iteration_sweep",
                                             "query_count", "split_seed",  "repetitions",
                                             "resubstitution", "threads"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw std::invalid_argument("unknown bench config key: " + key);

    BenchConfig config;
    try {
        if (j.contains("algorithms")) {
            config.algorithms.clear();
            for (const auto& a : j.at("algorithms")) {
                if (a.is_string()) {
                    config.algorithms.push_back(parse_algorithm(a.get<std::string>()));
                } else {
                    config.algorithms.push_back(
                        parse_algorithm(a.at("name").get<std::string>(), a.value("k", std::size_t{0})));
                }
            }
        }
        if (j.contains("thresholds")) config.thresholds = j.at("thresholds").get<std::vector<double>>();
        if (j.contains("max_iteration_sweep"))
            config.max_iteration_sweep = j.at("max_iteration_sweep").get<std::vector<std::size_t>>();
        if (j.contains("query_count")) config.query_count = j.at("query_count").get<std::size_t>();
        if (j.contains("split_seed")) config.split_seed = j.at("split_seed").get<std::uint64_t>();
        if (j.contains("repetitions")) config.repetitions = j.at("repetitions").get<std::size_t>();
        if (j.contains("resubstitution")) config.resubstitution = j.at("resubstitution").get<bool>();
        if (j.contains("threads")) config.threads = j.at("threads").get<unsigned>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("invalid bench config: ") + e.what());
    }
    validate(config);
    return config;
}

BenchConfig read_bench_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bench config: " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    return parse_bench_config(text);
}

namespace {

DatasetSplit make_split(const std::vector<LabeledFeature>& records, std::vector<std::size_t> query_rows,
                        bool resubstitution) {
    std::sort(query_rows.begin(), query_rows.end());
    std::vector<char> is_query(records.size(), 0);
    for (std::size_t q : query_rows) is_query[q] = 1;

    DatasetSplit split;
    std::vector<FeatureVector> vectors;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (is_query[i] && !resubstitution) continue;
        split.reference_rows.push_back(i);
        vectors.push_back(records[i].features);
        labels.push_back(records[i].label);
    }
    split.refs = ReferenceSet(std::move(vectors), std::move(labels));
    for (std::size_t q : query_rows) split.queries.push_back({records[q].label, records[q].features});
    split.query_rows = std::move(query_rows);
    return split;
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

}  // namespace

DatasetSplit split_dataset(const std::vector<LabeledFeature>& records, std::size_t query_per_class,
                           std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].label].push_back(i);
    if (by_class.empty()) throw std::invalid_argument("no records to split");

    Rng rng(seed);
    std::vector<std::size_t> query_rows;
    for (auto& [label, rows] : by_class) {
        if (rows.size() <= query_per_class)
            throw std::invalid_argument("class '" + label + "' has too few images for the holdout");
        shuffle(rows, rng);
        query_rows.insert(query_rows.end(), rows.begin(), rows.begin() + static_cast<long>(query_per_class));
    }
    return make_split(records, std::move(query_rows), false);
}

DatasetSplit split_sample(const std::vector<LabeledFeature>& records, std::size_t query_count,
                          std::uint64_t seed, bool resubstitution) {
    if (query_count > records.size()) throw std::invalid_argument("more queries requested than records");
    std::map<std::string, std::size_t> left;
    for (const auto& r : records) ++left[r.label];

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);

    std::vector<std::size_t> query_rows;
    for (std::size_t i : order) {
        if (query_rows.size() == query_count) break;
        auto& count = left[records[i].label];
        if (!resubstitution && count < 2) continue;
        --count;
        query_rows.push_back(i);
    }
    if (query_rows.size() < query_count)
        throw std::invalid_argument("classes too small to hold out the requested queries");
    return make_split(records, std::move(query_rows), resubstitution);
}

BenchResult run_bench(const BenchConfig& config, const ReferenceSet& refs, const DistanceMatrix& matrix,
                      const std::map<std::size_t, ClusterModel>& models,
                      const std::vector<LabeledQuery>& queries) {
    validate(config);
    if (matrix.size() != refs.size()) throw std::invalid_argument("distance matrix does not match references");
    if (queries.size() < config.query_count)
        throw std::invalid_argument("fewer queries available than query_count");
    for (const auto& a : config.algorithms) {
        if (a.algorithm != Algorithm::dmlann) continue;
        const auto it = models.find(a.k);
        if (it == models.end())
            throw std::runtime_error("missing cluster model for k=" + std::to_string(a.k));
        if (it->second.reference_count() != refs.size())
            throw std::runtime_error("cluster model for k=" + std::to_string(a.k) +
                                     " does not match the references");
    }
    const std::size_t first_instance =
        models.contains(1) ? models.at(1).medoid.front() : global_medoid(refs);

    struct Cell {
        AlgorithmSpec spec;
        double rho0;
        std::size_t budget;
    };
    const std::size_t n = config.query_count;
    auto run_one = [&](const Cell& cell, std::size_t q) {
        const auto& x = queries[q].features;
        if (cell.spec.algorithm == Algorithm::brute) return search_bruteforce(x, refs);
        SearchParams params;
        params.rho0 = cell.rho0;
        params.max_iterations = cell.budget;
        if (cell.spec.algorithm == Algorithm::mlann) return search_mlann(x, refs, matrix, params, first_instance);
        return search_dmlann(x, refs, matrix, models.at(cell.spec.k), params);
    };
    auto run_cell = [&](const Cell& cell) {
        std::vector<QueryTrace> traces(n);
        parallel_for(n, config.threads, [&](std::size_t q) { traces[q] = run_one(cell, q); });
        std::vector<double> best(n);
        for (std::size_t q = 0; q < n; ++q) best[q] = traces[q].elapsed_seconds;
        const std::size_t timed_runs = config.threads <= 1 ? config.repetitions - 1 : config.repetitions;
        for (std::size_t rep = 0; rep < timed_runs; ++rep) {
            for (std::size_t q = 0; q < n; ++q) {
                const double t = run_one(cell, q).elapsed_seconds;
                best[q] = (rep == 0 && config.threads > 1) ? t : std::min(best[q], t);
            }
        }
        for (std::size_t q = 0; q < n; ++q) traces[q].elapsed_seconds = best[q];
        return traces;
    };

    BenchResult result;
    auto store = [&](const Cell& cell, const std::vector<QueryTrace>& traces, double rho0, std::size_t budget) {
        for (std::size_t q = 0; q < n; ++q)
            result.traces.push_back(
                {cell.spec.name(), cell.spec.k, rho0, budget, q, queries[q].label, traces[q]});
    };
    for (const auto& spec : config.algorithms) {
        if (spec.algorithm == Algorithm::brute) {
            const Cell cell{spec, config.thresholds.front(), refs.size()};
            const auto traces = run_cell(cell);
            for (double rho0 : config.thresholds) store(cell, traces, rho0, refs.size());
            continue;
        }
        for (double rho0 : config.thresholds) {
            for (std::size_t budget : config.max_iteration_sweep) {
                const Cell cell{spec, rho0, budget};
                store(cell, run_cell(cell), rho0, budget);
            }
        }
    }
    result.rows = aggregate_traces(result.traces);
    return result;
}

std::vector<BenchRow> aggregate_traces(const std::vector<TraceRecord>& traces) {
    using Key = std::tuple<std::string, std::size_t, double, std::size_t>;
    std::map<Key, std::size_t> slot;
    std::vector<BenchRow> rows;
    std::vector<double> comp_sum;
    std::vector<double> time_sum;
    for (const auto& t : traces) {
        const Key key{t.algorithm, t.k, t.rho0, t.max_iterations};
        auto [it, inserted] = slot.try_emplace(key, rows.size());
        if (inserted) {
            BenchRow row;
            row.algorithm = t.algorithm;
            row.k = t.k;
            row.rho0 = t.rho0;
            row.max_iterations = t.max_iterations;
            rows.push_back(row);
            comp_sum.push_back(0.0);
            time_sum.push_back(0.0);
        }
        const std::size_t i = it->second;
        rows[i].query_count += 1;
        rows[i].correct += t.trace.result_label == t.true_label ? 1 : 0;
        comp_sum[i] += static_cast<double>(t.trace.distance_computations);
        time_sum[i] += t.trace.elapsed_seconds;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double count = static_cast<double>(rows[i].query_count);
        rows[i].accuracy = static_cast<double>(rows[i].correct) / count;
        rows[i].avg_distance_computations = comp_sum[i] / count;
        rows[i].avg_recognition_time_seconds = time_sum[i] / count;
    }
    return rows;
}

std::vector<MinCostRow> min_cost_for_accuracy(const std::vector<BenchRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("min_cost_for_accuracy: no rows");
    using Key = std::tuple<std::string, std::size_t, double>;
    std::vector<Key> group_order;
    std::map<Key, std::vector<const BenchRow*>> groups;
    for (const auto& r : rows) {
        const Key key{r.algorithm, r.k, r.rho0};
        auto& g = groups[key];
        if (g.empty()) group_order.push_back(key);
        g.push_back(&r);
    }

    std::vector<MinCostRow> out;
    for (const auto& key : group_order) {
        const auto& g = groups.at(key);
        std::set<double> levels;
        for (const auto* r : g) levels.insert(r->accuracy);
        for (double level : levels) {
            MinCostRow m{std::get<0>(key), std::get<1>(key), std::get<2>(key), level,
                         std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
            for (const auto* r : g) {
                if (r->accuracy < level) continue;
                m.min_avg_distance_computations = std::min(m.min_avg_distance_computations, r->avg_distance_computations);
                m.min_avg_time_seconds = std::min(m.min_avg_time_seconds, r->avg_recognition_time_seconds);
            }
            out.push_back(m);
        }
    }
    return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows, bool include_timing) {
    using detail::format_shortest;
    std::ostringstream out;
    out << "algorithm,k,rho0,max_iterations,accuracy,avg_dist_comp";
    if (include_timing) out << ",avg_time_s";
    out << '\n';
    for (const auto& r : rows) {
        out << r.algorithm << ',' << r.k << ',' << format_shortest(r.rho0) << ',' << r.max_iterations << ','
            << format_shortest(r.accuracy) << ',' << format_shortest(r.avg_distance_computations);
        if (include_timing) out << ',' << format_shortest(r.avg_recognition_time_seconds);
        out << '\n';
    }
    return out.str();
}

std::string min_cost_csv(const std::vector<MinCostRow>& rows) {
    using detail::format_shortest;
    std::ostringstream out;
    out << "algorithm,k,rho0,accuracy,min_avg_dist_comp,min_avg_time_s\n";
    for (const auto& r : rows)
        out << r.algorithm << ',' << r.k << ',' << format_shortest(r.rho0) << ',' << format_shortest(r.accuracy)
            << ',' << format_shortest(r.min_avg_distance_computations) << ','
            << format_shortest(r.min_avg_time_seconds) << '\n';
    return out.str();
}

std::string traces_jsonl(const std::vector<TraceRecord>& traces) {
    std::string out;
    for (const auto& t : traces) {
        json j = json::parse(trace_to_json(t.trace));
        j["algorithm"] = t.algorithm;
        j["k"] = t.k;
        j["rho0"] = t.rho0;
        j["max_iterations"] = t.max_iterations;
        j["query"] = t.query;
        j["true_label"] = t.true_label;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<TraceRecord> parse_traces_jsonl(std::string_view text) {
    std::vector<TraceRecord> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const json j = json::parse(line);
        TraceRecord rec;
        rec.algorithm = j.at("algorithm").get<std::string>();
        rec.k = j.at("k").get<std::size_t>();
        rec.rho0 = j.at("rho0").get<double>();
        rec.max_iterations = j.at("max_iterations").get<std::size_t>();
        rec.query = j.at("query").get<std::size_t>();
        rec.true_label = j.at("true_label").get<std::string>();
        rec.trace = trace_from_json(line);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace dmlann
