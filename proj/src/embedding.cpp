#include "routegraph/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "routegraph/util.hpp"

namespace routegraph::graph {

namespace {

constexpr std::uint64_t kTokenSeed = 0xcbf29ce484222325ULL ^ 0x517cc1b727220a95ULL;

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> kStopwords = {
        "a",   "an",  "and", "are", "as",  "at",   "be",  "by",  "for", "from",
        "how", "i",   "in",  "is",  "it",  "my",   "of",  "on",  "or",  "that",
        "the", "this", "to",  "was", "what", "when", "with"};
    return kStopwords;
}

} // namespace

std::vector<double> embed_text(std::string_view text) {
    std::vector<double> counts(kEmbeddingDim, 0.0);
    bool any = false;

    std::string token;
    auto flush = [&]() {
        if (!token.empty() && !stopwords().count(token)) {
            counts[fnv1a64(token, kTokenSeed) % kEmbeddingDim] += 1.0;
            any = true;
        }
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();

    if (!any) {
        counts[0] = 1.0;
        return counts;
    }
    double norm = l2_norm(counts);
    for (auto& v : counts) v /= norm;
    return counts;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
    }
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double l2_norm(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

} // namespace routegraph::graph
