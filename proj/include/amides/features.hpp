#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amides/util.hpp"

namespace amides {

struct EmptyCorpusError : Error {
    using Error::Error;
};

using TokenSequence = std::vector<std::string>;

// Strips characters attackers use to break up command lines without changing
// their meaning (" ' ^ ` and U+00B4), then lowercases ASCII.
std::string normalize_text(std::string_view text);

// Splits normalized text on every byte outside [a-z0-9_].
TokenSequence tokenize(std::string_view normalized);

// Drops tokens that are pure noise for classification: decimal runs of 4+,
// hex runs of 4+ containing a digit, and anything 31 chars or longer.
TokenSequence prune(TokenSequence tokens);

TokenSequence pipeline_tokens(std::string_view raw_text);

// Cache key: tokens joined by a 0x1F separator (cannot occur inside tokens).
std::string canonical_key(const TokenSequence& tokens);

struct SparseFeatureVector {
    // Index/value pairs with strictly increasing indices, zero values omitted.
    std::vector<std::pair<std::uint32_t, double>> entries;

    double dot(const SparseFeatureVector& other) const;
    double norm() const;
    bool operator==(const SparseFeatureVector&) const = default;
};

struct IdfModel {
    std::vector<std::string> terms;  // index -> term, lexicographically sorted
    std::unordered_map<std::string, std::uint32_t> vocabulary;
    std::vector<double> idf;
    std::uint64_t corpus_size = 0;

    void rebuild_vocabulary();
};

// idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the given corpus.
IdfModel fit_idf(const std::vector<TokenSequence>& corpus);

// Term counts scaled by idf, then L2-normalized. Out-of-vocabulary tokens are
// dropped; an all-unknown or empty document maps to the zero vector.
SparseFeatureVector vectorize(const TokenSequence& tokens, const IdfModel& model);

}  // namespace amides
