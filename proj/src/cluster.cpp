#include "dmlann/cluster.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "csv_util.hpp"
#include "dmlann/random.hpp"

namespace dmlann {
namespace {

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

std::vector<double> mean_of(const ReferenceSet& refs, const std::vector<std::size_t>& members) {
    std::vector<double> mean(refs.dimension(), 0.0);
    for (std::size_t r : members) {
        const auto& v = refs.vector(r).values;
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& m : mean) m *= inv;
    return mean;
}

std::size_t nearest_member(const ReferenceSet& refs, const std::vector<std::size_t>& members,
                           std::span<const double> point) {
    std::size_t best = members.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r : members) {
        const double d = squared_euclidean(refs.vector(r).view(), point);
        if (d < best_d || (d == best_d && r < best)) {
            best = r;
            best_d = d;
        }
    }
    return best;
}

std::vector<std::size_t> seed_centers(const ReferenceSet& refs, std::size_t k, Rng& rng) {
    const std::size_t n = refs.size();
    std::vector<std::size_t> centers{static_cast<std::size_t>(rng.below(n))};
    std::vector<char> chosen(n, 0);
    chosen[centers[0]] = 1;
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    while (centers.size() < k) {
        const auto& last = refs.vector(centers.back()).values;
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            nearest[r] = std::min(nearest[r], squared_euclidean(refs.vector(r).view(), last));
            if (!chosen[r]) total += nearest[r];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                if (chosen[r] || nearest[r] == 0.0) continue;
                acc += nearest[r];
                pick = r;
                if (acc > target) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a center.
            std::vector<std::size_t> free;
            for (std::size_t r = 0; r < n; ++r)
                if (!chosen[r]) free.push_back(r);
            pick = free[rng.below(free.size())];
        }
        chosen[pick] = 1;
        centers.push_back(pick);
    }
    return centers;
}

}  // namespace

void finalize_members(ClusterModel& model, const ReferenceSet& refs) {
    model.members.assign(model.k, {});
    for (std::size_t r = 0; r < model.assignment.size(); ++r)
        model.members.at(model.assignment[r]).push_back(r);
    model.medoid.assign(model.k, 0);
    for (std::size_t c = 0; c < model.k; ++c) {
        if (model.members[c].empty()) throw std::logic_error("empty cluster after k-means");
        model.medoid[c] = nearest_member(refs, model.members[c], model.centroids[c]);
    }
}

ClusterModel kmeans(const ReferenceSet& refs, std::size_t k, std::uint64_t seed,
                    KMeansReport* report) {
    const std::size_t n = refs.size();
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (k > n) throw std::invalid_argument("k exceeds the number of references");

    Rng rng(seed);
    ClusterModel model;
    model.k = k;
    for (std::size_t c : seed_centers(refs, k, rng)) model.centroids.push_back(refs.vector(c).values);
    model.assignment.assign(n, k);

    KMeansReport local;
    std::vector<double> own_distance(n, 0.0);
    for (int sweep = 0; sweep < kMaxKMeansSweeps; ++sweep) {
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_euclidean(refs.vector(r).view(), model.centroids[c]);
                if (d < best_d) {
                    best = c;
                    best_d = d;
                }
            }
            if (model.assignment[r] != best) changed = true;
            model.assignment[r] = best;
            own_distance[r] = best_d;
        }

        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t c : model.assignment) ++sizes[c];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t victim = n;
            for (std::size_t r = 0; r < n; ++r) {
                if (sizes[model.assignment[r]] < 2) continue;
                if (victim == n || own_distance[r] > own_distance[victim]) victim = r;
            }
            --sizes[model.assignment[victim]];
            model.assignment[victim] = c;
            ++sizes[c];
            own_distance[victim] = 0.0;
            changed = true;
        }

        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t r = 0; r < n; ++r) members[model.assignment[r]].push_back(r);
        for (std::size_t c = 0; c < k; ++c) model.centroids[c] = mean_of(refs, members[c]);

        double objective = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            objective += squared_euclidean(refs.vector(r).view(), model.centroids[model.assignment[r]]);
        local.objective.push_back(objective);
        local.sweeps = sweep + 1;
        if (!changed) {
            local.converged = true;
            break;
        }
    }

    finalize_members(model, refs);
    if (report) *report = std::move(local);
    return model;
}

std::size_t global_medoid(const ReferenceSet& refs) {
    std::vector<std::size_t> all(refs.size());
    for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
    return nearest_member(refs, all, mean_of(refs, all));
}

std::size_t cluster_of(const ClusterModel& model, std::size_t r) {
    if (r >= model.assignment.size()) throw std::out_of_range("reference index out of range");
    return model.assignment[r];
}

void validate(const ClusterModel& model, std::size_t reference_count) {
    if (model.k < 1 || model.k > reference_count)
        throw std::invalid_argument("cluster count outside [1, R]");
    if (model.assignment.size() != reference_count)
        throw std::invalid_argument("cluster assignment does not cover the reference set");
    if (model.members.size() != model.k || model.medoid.size() != model.k ||
        model.centroids.size() != model.k)
        throw std::invalid_argument("cluster model arrays disagree with k");
    std::vector<char> seen(reference_count, 0);
    for (std::size_t c = 0; c < model.k; ++c) {
        if (model.members[c].empty()) throw std::invalid_argument("empty cluster");
        bool has_medoid = false;
        for (std::size_t r : model.members[c]) {
            if (r >= reference_count || seen[r] || model.assignment[r] != c)
                throw std::invalid_argument("cluster membership inconsistent with assignment");
            seen[r] = 1;
            has_medoid |= r == model.medoid[c];
        }
        if (!has_medoid) throw std::invalid_argument("medoid is not a member of its cluster");
    }
}

void write_cluster_model(const std::filesystem::path& path, const ClusterModel& model) {
    std::ostringstream out;
    out << "DMLANN-CLUSTERS v1," << model.k << ',' << model.assignment.size() << '\n';
    for (std::size_t r = 0; r < model.assignment.size(); ++r) out << r << ',' << model.assignment[r] << '\n';
    for (std::size_t c = 0; c < model.k; ++c) out << c << ',' << model.medoid[c] << '\n';
    for (std::size_t c = 0; c < model.k; ++c) {
        out << c;
        for (double v : model.centroids[c]) out << ',' << detail::format_double(v);
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write cluster model: " + path.string());
    file << out.str();
    if (!file) throw std::runtime_error("failed writing cluster model: " + path.string());
}

ClusterModel read_cluster_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open cluster model: " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        if (!detail::trim_cr(line).empty()) lines.emplace_back(detail::trim_cr(line));
    if (lines.empty()) throw std::runtime_error("empty cluster model: " + path.string());

    const auto header = detail::split(lines[0]);
    if (header.size() != 3 || header[0] != "DMLANN-CLUSTERS v1")
        throw std::runtime_error("not a DMLANN-CLUSTERS v1 file: " + path.string());
    ClusterModel model;
    model.k = detail::parse_int<std::size_t>(header[1]);
    const auto n = detail::parse_int<std::size_t>(header[2]);
    if (lines.size() != 1 + n + 2 * model.k)
        throw std::runtime_error("cluster model line count does not match header: " + path.string());

    std::size_t line = 1;
    auto expect_index = [&](std::string_view field, std::size_t want) {
        if (detail::parse_int<std::size_t>(field) != want)
            throw std::runtime_error("cluster model rows out of order: " + path.string());
    };
    model.assignment.resize(n);
    for (std::size_t r = 0; r < n; ++r, ++line) {
        const auto f = detail::split(lines[line]);
        if (f.size() != 2) throw std::runtime_error("malformed assignment row");
        expect_index(f[0], r);
        model.assignment[r] = detail::parse_int<std::size_t>(f[1]);
        if (model.assignment[r] >= model.k) throw std::runtime_error("assignment out of range");
    }
    model.medoid.resize(model.k);
    for (std::size_t c = 0; c < model.k; ++c, ++line) {
        const auto f = detail::split(lines[line]);
        if (f.size() != 2) throw std::runtime_error("malformed medoid row");
        expect_index(f[0], c);
        model.medoid[c] = detail::parse_int<std::size_t>(f[1]);
    }
    for (std::size_t c = 0; c < model.k; ++c, ++line) {
        const auto f = detail::split(lines[line]);
        expect_index(f[0], c);
        std::vector<double> centroid;
        for (std::size_t i = 1; i < f.size(); ++i) centroid.push_back(detail::parse_double(f[i]));
        model.centroids.push_back(std::move(centroid));
    }
    model.members.assign(model.k, {});
    for (std::size_t r = 0; r < n; ++r) model.members[model.assignment[r]].push_back(r);
    validate(model, n);
    return model;
}

}  // namespace dmlann
