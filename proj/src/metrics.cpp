#include "ciaf/metrics.hpp"

#include <cmath>

#include "ciaf/error.hpp"

namespace ciaf {

namespace {

void check_dims(const std::vector<std::vector<double>>& vectors) {
    for (const auto& v : vectors) {
        if (v.size() != vectors.front().size()) {
            throw DimensionMismatch("vectors of dimension " + std::to_string(vectors.front().size()) + " and " +
                                    std::to_string(v.size()));
        }
    }
}

std::vector<std::vector<double>> values_of(const std::vector<EmbeddingVector>& vectors) {
    std::vector<std::vector<double>> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.push_back(v.values);
    return out;
}

}  // namespace

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionMismatch("cosine distance of dimensions " + std::to_string(u.size()) + " and " +
                                std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    const double cos = std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
    return 1.0 - cos;
}

double remote_clique(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) return 0.0;
    check_dims(vectors);
    const std::size_t n = vectors.size();
    if (n <= 1) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) sum += cosine_distance(vectors[i], vectors[j]);
    }
    return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double span(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) return 0.0;
    check_dims(vectors);
    const std::size_t n = vectors.size();
    if (n <= 1) return 0.0;

    std::vector<double> centroid(vectors.front().size(), 0.0);
    for (const auto& v : vectors) {
        for (std::size_t k = 0; k < v.size(); ++k) centroid[k] += v[k];
    }
    bool zero = true;
    for (auto& c : centroid) {
        c /= static_cast<double>(n);
        if (c != 0.0) zero = false;
    }
    if (zero) return 0.0;

    double sum = 0.0;
    for (const auto& v : vectors) sum += cosine_distance(v, centroid);
    return sum / static_cast<double>(n);
}

double remote_clique(const std::vector<EmbeddingVector>& vectors) { return remote_clique(values_of(vectors)); }
double span(const std::vector<EmbeddingVector>& vectors) { return span(values_of(vectors)); }

}  // namespace ciaf
