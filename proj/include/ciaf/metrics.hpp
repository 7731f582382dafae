#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ciaf/gateway.hpp"

namespace ciaf {

/// 1 - cos(u, v); 0 when either vector has zero norm. Throws DimensionMismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Remote-clique dispersion: mean pairwise cosine distance,
///   RC = 2 / (n(n-1)) * sum_{i<j} d(v_i, v_j),
/// and 0 for n <= 1. Throws DimensionMismatch.
double remote_clique(const std::vector<std::vector<double>>& vectors);
double remote_clique(const std::vector<EmbeddingVector>& vectors);

/// Span dispersion: mean cosine distance from each vector to the centroid,
///   Span = 1/n * sum_i d(v_i, c),  c = 1/n * sum_i v_i,
/// and 0 for n <= 1 or a zero centroid. Throws DimensionMismatch.
///
/// This is one reading of "span"; it is kept behind this single function so an
/// alternative definition is a local change. kSpanDefinition names the
/// variant in every evaluation report.
double span(const std::vector<std::vector<double>>& vectors);
double span(const std::vector<EmbeddingVector>& vectors);

inline constexpr std::string_view kRemoteCliqueDefinition = "rc-v1: mean pairwise cosine distance";
inline constexpr std::string_view kSpanDefinition = "span-v1: mean cosine distance to centroid";

}  // namespace ciaf
