#include "dmlann/distance.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

#include "csv_util.hpp"
#include "dmlann/parallel.hpp"

namespace dmlann {

double chi_square(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("chi_square: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = a[i] + b[i];
        if (denom == 0.0) continue;
        const double diff = a[i] - b[i];
        sum += diff * diff / denom;
    }
    return sum;
}

ReferenceSet::ReferenceSet(std::vector<FeatureVector> vectors, std::vector<std::string> labels)
    : vectors_(std::move(vectors)), labels_(std::move(labels)) {
    if (vectors_.empty()) throw std::invalid_argument("reference set is empty");
    if (vectors_.size() != labels_.size())
        throw std::invalid_argument("reference vectors and labels differ in count");
    geometry_ = vectors_.front().geometry;
    const std::size_t dim = vectors_.front().size();
    for (const auto& v : vectors_) {
        if (v.size() != dim || v.geometry != geometry_)
            throw std::invalid_argument("reference vectors do not share one geometry");
    }
    std::set<std::string> distinct;
    for (const auto& l : labels_) {
        if (l.empty()) throw std::invalid_argument("empty class label");
        distinct.insert(l);
    }
    class_count_ = distinct.size();
}

ReferenceSet ReferenceSet::from_records(const std::vector<LabeledFeature>& records) {
    std::vector<FeatureVector> vectors;
    std::vector<std::string> labels;
    vectors.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& r : records) {
        vectors.push_back(r.features);
        labels.push_back(r.label);
    }
    return ReferenceSet(std::move(vectors), std::move(labels));
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n_ * n_) throw std::invalid_argument("distance matrix size mismatch");
}

DistanceMatrix DistanceMatrix::subset(std::span<const std::size_t> indices) const {
    DistanceMatrix out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < indices.size(); ++j)
            out.at(i, j) = (*this)(indices[i], indices[j]);
    return out;
}

DistanceMatrix build_distance_matrix(const ReferenceSet& refs, unsigned threads) {
    const std::size_t n = refs.size();
    if (n == 0) throw std::invalid_argument("reference set is empty");
    DistanceMatrix m(n);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) m.at(i, j) = chi_square(refs.vector(i), refs.vector(j));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m.at(j, i) = m(i, j);
    return m;
}

namespace {

constexpr char kMatrixMagic[4] = {'D', 'M', 'L', 'M'};
constexpr std::uint16_t kMatrixVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m) {
    if (m.size() > UINT32_MAX) throw std::invalid_argument("distance matrix too large");
    std::string out(kMatrixMagic, 4);
    put_le<std::uint16_t>(out, kMatrixVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.size()));
    out.reserve(out.size() + m.entries().size() * 8);
    for (double v : m.entries()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write distance matrix: " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("failed writing distance matrix: " + path.string());
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open distance matrix: " + path.string());
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(file), {}};
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMatrixMagic, 4) != 0)
        throw std::runtime_error("not a DMLM distance matrix: " + path.string());
    if (get_le<std::uint16_t>(bytes.data() + 4) != kMatrixVersion)
        throw std::runtime_error("unsupported distance matrix version: " + path.string());
    const std::size_t n = get_le<std::uint32_t>(bytes.data() + 6);
    if (bytes.size() != 10 + n * n * 8)
        throw std::runtime_error("distance matrix size does not match header: " + path.string());
    std::vector<double> entries(n * n);
    for (std::size_t i = 0; i < entries.size(); ++i)
        entries[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + 10 + 8 * i));
    return DistanceMatrix(n, std::move(entries));
}

void write_distance_matrix_csv(const std::filesystem::path& path, const DistanceMatrix& m) {
    std::ostringstream out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (j) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    file << out.str();
}

QueryDistances::QueryDistances(const FeatureVector& query, const ReferenceSet& refs)
    : query_(query), refs_(refs), memo_(refs.size()) {
    if (query.size() != refs.dimension() || query.geometry != refs.geometry())
        throw std::invalid_argument("query geometry does not match the reference set");
    for (auto& slot : memo_) slot.store(-1.0, std::memory_order_relaxed);
}

double QueryDistances::get(std::size_t r) {
    if (r >= memo_.size()) throw std::out_of_range("reference index out of range");
    double cached = memo_[r].load(std::memory_order_acquire);
    if (cached >= 0.0) return cached;
    const double d = chi_square(query_, refs_.vector(r));
    if (memo_[r].compare_exchange_strong(cached, d, std::memory_order_acq_rel)) {
        counter_.increment();
        return d;
    }
    return cached;
}

bool QueryDistances::known(std::size_t r) const {
    return memo_.at(r).load(std::memory_order_acquire) >= 0.0;
}

double query_distance(QueryDistances& memo, std::size_t r) { return memo.get(r); }

}  // namespace dmlann
