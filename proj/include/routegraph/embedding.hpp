#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace routegraph::graph {

// Embedding dimension for the deterministic hashed bag-of-tokens embedder.
// The embedder is a replaceable implementation detail; everything above it
// only assumes unit-norm vectors of this dimension.
inline constexpr std::size_t kEmbeddingDim = 256;

// Deterministic: lowercase, split on non-alphanumerics, drop stopwords,
// hash each token into a fixed bucket, count, L2-normalize. Empty or
// all-stopword input yields the first basis vector.
std::vector<double> embed_text(std::string_view text);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

double l2_norm(const std::vector<double>& v);

} // namespace routegraph::graph
