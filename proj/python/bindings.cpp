#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "dmlann/bench.hpp"
#include "dmlann/bundle.hpp"
#include "dmlann/features.hpp"
#include "dmlann/hog.hpp"
#include "dmlann/image.hpp"
#include "dmlann/search.hpp"
#include "dmlann/synthetic.hpp"

namespace py = pybind11;
using namespace dmlann;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
    return out;
}

py::array_t<double> to_numpy(const DistanceMatrix& m) {
    const auto n = static_cast<py::ssize_t>(m.size());
    py::array_t<double> out({n, n});
    std::memcpy(out.mutable_data(), m.entries().data(), m.entries().size() * sizeof(double));
    return out;
}

Geometry geometry_from(py::object g, std::size_t dim) {
    if (g.is_none()) return Geometry{1, 1, static_cast<int>(dim)};
    const auto t = g.cast<std::tuple<int, int, int>>();
    return Geometry{std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

FeatureVector vector_from(const Array& a, py::object geometry) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D feature vector");
    FeatureVector f;
    f.values.assign(a.data(), a.data() + a.shape(0));
    f.geometry = geometry_from(geometry, f.values.size());
    return f;
}

ReferenceSet refs_from(const Array& a, const std::vector<std::string>& labels, py::object geometry) {
    if (a.ndim() != 2) throw std::invalid_argument("expected an (R, dim) array of references");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto dim = static_cast<std::size_t>(a.shape(1));
    const Geometry g = geometry_from(geometry, dim);
    std::vector<FeatureVector> vectors(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        vectors[r].values.assign(a.data() + r * dim, a.data() + (r + 1) * dim);
        vectors[r].geometry = g;
    }
    return ReferenceSet(std::move(vectors), labels);
}

py::array_t<double> refs_to_numpy(const ReferenceSet& refs) {
    const auto rows = static_cast<py::ssize_t>(refs.size());
    const auto dim = static_cast<py::ssize_t>(refs.dimension());
    py::array_t<double> out({rows, dim});
    for (std::size_t r = 0; r < refs.size(); ++r)
        std::memcpy(out.mutable_data(static_cast<py::ssize_t>(r)), refs.vector(r).values.data(),
                    refs.dimension() * sizeof(double));
    return out;
}

py::tuple geometry_tuple(const Geometry& g) { return py::make_tuple(g.width, g.height, g.bins); }

SearchParams params_of(double rho0, std::size_t max_iterations) {
    SearchParams p;
    p.rho0 = rho0;
    p.max_iterations = max_iterations;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Distributed maximum-likelihood approximate nearest neighbour search";

    py::class_<HogParams>(m, "HogParams")
        .def(py::init([](int cell_size, int block_size, int bins, bool signed_gradients) {
                 return HogParams{cell_size, block_size, bins, signed_gradients};
             }),
             py::arg("cell_size") = 8, py::arg("block_size") = 2, py::arg("bins") = 9,
             py::arg("signed_gradients") = false)
        .def_readwrite("cell_size", &HogParams::cell_size)
        .def_readwrite("block_size", &HogParams::block_size)
        .def_readwrite("bins", &HogParams::bins)
        .def_readwrite("signed_gradients", &HogParams::signed_gradients);

    m.def("extract_hog",
          [](const Array& image, const HogParams& params) {
              if (image.ndim() != 2) throw std::invalid_argument("expected a 2-D grayscale image in [0, 1]");
              ImageGray img{static_cast<int>(image.shape(1)), static_cast<int>(image.shape(0)),
                            std::vector<double>(image.data(), image.data() + image.size())};
              const auto f = extract_hog(img, params);
              return py::make_tuple(to_numpy(f.values), geometry_tuple(f.geometry));
          },
          py::arg("image"), py::arg("params") = HogParams{},
          "HOG features of a 2-D array; returns (vector, (U, V, N)).");
    m.def("load_image", [](const std::filesystem::path& path) {
        const auto img = load_image(path);
        py::array_t<double> out({img.height, img.width});
        std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size() * sizeof(double));
        return out;
    });
    m.def("hog_dimension", &hog_dimension, py::arg("width"), py::arg("height"), py::arg("params") = HogParams{});

    m.def("chi_square",
          [](const Array& a, const Array& b) {
              return chi_square(std::span<const double>(a.data(), a.size()),
                                std::span<const double>(b.data(), b.size()));
          },
          py::arg("a"), py::arg("b"));
    m.def("phi", &phi, py::arg("query_dist"), py::arg("matrix_dist"));
    m.def("conditional_density",
          [](double rho, double rho_ref, std::tuple<int, int, int> g) {
              return conditional_density(rho, rho_ref, Geometry{std::get<0>(g), std::get<1>(g), std::get<2>(g)});
          },
          py::arg("rho"), py::arg("rho_ref"), py::arg("geometry"));
    m.def("weights_from_averages",
          [](const std::vector<double>& averages, std::size_t cap) { return weights_from_averages(averages, cap); },
          py::arg("averages"), py::arg("cap"));
    m.def("allocate_selections",
          [](const std::vector<std::size_t>& weights, const std::vector<std::size_t>& remaining) {
              return allocate_selections(weights, remaining);
          },
          py::arg("weights"), py::arg("remaining"));

    py::class_<ReferenceSet>(m, "ReferenceSet")
        .def(py::init(&refs_from), py::arg("vectors"), py::arg("labels"), py::arg("geometry") = py::none())
        .def("__len__", &ReferenceSet::size)
        .def_property_readonly("dimension", &ReferenceSet::dimension)
        .def_property_readonly("geometry", [](const ReferenceSet& r) { return geometry_tuple(r.geometry()); })
        .def_property_readonly("labels", &ReferenceSet::labels)
        .def_property_readonly("vectors", &refs_to_numpy)
        .def_property_readonly("class_count", &ReferenceSet::class_count);

    py::class_<DistanceMatrix>(m, "DistanceMatrix")
        .def("__len__", &DistanceMatrix::size)
        .def("to_numpy", [](const DistanceMatrix& d) { return to_numpy(d); })
        .def("save", [](const DistanceMatrix& d, const std::filesystem::path& p) { write_distance_matrix(p, d); })
        .def_static("load", &read_distance_matrix);
    m.def("build_distance_matrix", &build_distance_matrix, py::arg("refs"), py::arg("threads") = 1);

    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("k", &ClusterModel::k)
        .def_readonly("assignment", &ClusterModel::assignment)
        .def_readonly("medoid", &ClusterModel::medoid)
        .def_readonly("members", &ClusterModel::members)
        .def_readonly("centroids", &ClusterModel::centroids);
    m.def("kmeans", [](const ReferenceSet& refs, std::size_t k, std::uint64_t seed) { return kmeans(refs, k, seed); },
          py::arg("refs"), py::arg("k"), py::arg("seed") = 42);
    m.def("global_medoid", &global_medoid);

    py::class_<QueryTrace>(m, "QueryTrace")
        .def_readonly("result_label", &QueryTrace::result_label)
        .def_readonly("result_reference", &QueryTrace::result_reference)
        .def_readonly("result_distance", &QueryTrace::result_distance)
        .def_property_readonly("terminated_by",
                               [](const QueryTrace& t) { return std::string(to_string(t.terminated_by)); })
        .def_readonly("iterations", &QueryTrace::iterations)
        .def_readonly("distance_computations", &QueryTrace::distance_computations)
        .def_readonly("elapsed_seconds", &QueryTrace::elapsed_seconds)
        .def_property_readonly("candidate_order",
                               [](const QueryTrace& t) {
                                   std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
                                   for (const auto& c : t.candidate_order)
                                       out.emplace_back(c.iteration, c.cluster, c.reference);
                                   return out;
                               })
        .def("to_json", &trace_to_json);

    m.def("search_dmlann",
          [](const Array& query, const ReferenceSet& refs, const DistanceMatrix& matrix, const ClusterModel& model,
             double rho0, std::size_t max_iterations) {
              return search_dmlann(vector_from(query, geometry_tuple(refs.geometry())), refs, matrix, model,
                                   params_of(rho0, max_iterations));
          },
          py::arg("query"), py::arg("refs"), py::arg("matrix"), py::arg("model"), py::arg("rho0") = 0.085,
          py::arg("max_iterations") = 100);
    m.def("search_mlann",
          [](const Array& query, const ReferenceSet& refs, const DistanceMatrix& matrix, std::size_t first,
             double rho0, std::size_t max_iterations) {
              return search_mlann(vector_from(query, geometry_tuple(refs.geometry())), refs, matrix,
                                  params_of(rho0, max_iterations), first);
          },
          py::arg("query"), py::arg("refs"), py::arg("matrix"), py::arg("first"), py::arg("rho0") = 0.085,
          py::arg("max_iterations") = 100);
    m.def("search_bruteforce",
          [](const Array& query, const ReferenceSet& refs) {
              return search_bruteforce(vector_from(query, geometry_tuple(refs.geometry())), refs);
          },
          py::arg("query"), py::arg("refs"));

    m.def("generate_synthetic",
          [](std::size_t classes, std::size_t per_class, std::size_t dim, double intra, double inter,
             std::uint64_t seed) {
              SyntheticSpec spec{classes, per_class, dim, intra, inter, seed};
              const auto records = generate_synthetic(spec);
              py::array_t<double> out({static_cast<py::ssize_t>(records.size()), static_cast<py::ssize_t>(dim)});
              std::vector<std::string> labels;
              for (std::size_t i = 0; i < records.size(); ++i) {
                  std::memcpy(out.mutable_data(static_cast<py::ssize_t>(i)), records[i].features.values.data(),
                              dim * sizeof(double));
                  labels.push_back(records[i].label);
              }
              return py::make_tuple(out, labels);
          },
          py::arg("classes") = 50, py::arg("per_class") = 5, py::arg("dim") = 128, py::arg("intra") = 0.3,
          py::arg("inter") = 0.5, py::arg("seed") = 42,
          "Seeded synthetic histograms; returns (vectors, labels).");

    m.def("extract_directory",
          [](const std::filesystem::path& dir, const HogParams& params, unsigned threads) {
              const auto records = extract_directory(dir, params, threads);
              std::vector<FeatureVector> vectors;
              std::vector<std::string> labels, paths;
              for (const auto& r : records) {
                  vectors.push_back(r.features);
                  labels.push_back(r.label);
                  paths.push_back(r.path);
              }
              const ReferenceSet refs(std::move(vectors), labels);
              return py::make_tuple(refs_to_numpy(refs), labels, paths, geometry_tuple(refs.geometry()));
          },
          py::arg("dir"), py::arg("params") = HogParams{}, py::arg("threads") = 1,
          "HOG features of <dir>/<class>/<image>; returns (vectors, labels, paths, (U, V, N)).");

    py::class_<IndexBundle>(m, "Index")
        .def_static("load", &load_index, py::arg("dir"))
        .def_static(
            "build",
            [](const std::filesystem::path& features, const std::filesystem::path& out_dir,
               std::vector<std::size_t> ks, std::uint64_t seed, std::size_t query_count, std::uint64_t split_seed,
               unsigned threads) {
                IndexOptions options;
                options.ks = std::move(ks);
                options.seed = seed;
                options.query_count = query_count;
                options.split_seed = split_seed;
                options.threads = threads;
                return build_index(read_feature_file(features), options, out_dir);
            },
            py::arg("features"), py::arg("out_dir"), py::arg("ks") = std::vector<std::size_t>{1, 2, 3},
            py::arg("seed") = 42, py::arg("query_count") = 0, py::arg("split_seed") = 7, py::arg("threads") = 1,
            "Builds an index directory from a feature file.")
        .def_readonly("refs", &IndexBundle::refs)
        .def_readonly("matrix", &IndexBundle::matrix)
        .def_readonly("models", &IndexBundle::models)
        .def_property_readonly("geometry", [](const IndexBundle& b) { return geometry_tuple(b.geometry); })
        .def_property_readonly("query_labels",
                               [](const IndexBundle& b) {
                                   std::vector<std::string> out;
                                   for (const auto& q : b.queries) out.push_back(q.label);
                                   return out;
                               })
        .def_property_readonly("query_vectors",
                               [](const IndexBundle& b) {
                                   std::vector<py::array_t<double>> out;
                                   for (const auto& q : b.queries) out.push_back(to_numpy(q.features.values));
                                   return out;
                               })
        .def(
            "query",
            [](const IndexBundle& b, const Array& query, const std::string& algo, std::size_t k, double rho0,
               std::size_t max_iterations) {
                const auto x = vector_from(query, geometry_tuple(b.geometry));
                const auto params = params_of(rho0, max_iterations);
                if (algo == "brute") return search_bruteforce(x, b.refs);
                if (algo == "mlann") {
                    const auto first = b.models.contains(1) ? b.models.at(1).medoid.front() : global_medoid(b.refs);
                    return search_mlann(x, b.refs, b.matrix, params, first);
                }
                if (algo != "dmlann") throw std::invalid_argument("algo must be brute, mlann or dmlann");
                const auto it = b.models.find(k);
                if (it == b.models.end()) throw std::invalid_argument("index has no cluster model for k");
                return search_dmlann(x, b.refs, b.matrix, it->second, params);
            },
            py::arg("query"), py::arg("algo") = "dmlann", py::arg("k") = 3, py::arg("rho0") = 0.085,
            py::arg("max_iterations") = 100);
}
