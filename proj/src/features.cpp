#include "amides/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace amides {

namespace {

// " ' ^ ` and the UTF-8 acute accent 0xC2 0xB4.
bool is_filtered(std::string_view text, std::size_t i, std::size_t& skip) {
    char c = text[i];
    skip = 1;
    if (c == '"' || c == '\'' || c == '^' || c == '`') return true;
    if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xB4) {
        skip = 2;
        return true;
    }
    return false;
}

bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_hex_char(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

bool prunable(const std::string& token) {
    if (token.size() >= 31) return true;
    if (token.size() < 4) return false;
    bool all_decimal = true, all_hex = true, has_digit = false;
    for (char c : token) {
        if (c < '0' || c > '9') all_decimal = false;
        else has_digit = true;
        if (!is_hex_char(c)) all_hex = false;
    }
    return all_decimal || (all_hex && has_digit);
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        std::size_t skip = 1;
        if (is_filtered(text, i, skip)) {
            i += skip;
            continue;
        }
        char c = text[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out += c;
        ++i;
    }
    return out;
}

TokenSequence tokenize(std::string_view normalized) {
    TokenSequence tokens;
    std::string current;
    for (char c : normalized) {
        if (is_word_char(c)) {
            current += c;
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

TokenSequence prune(TokenSequence tokens) {
    std::erase_if(tokens, prunable);
    return tokens;
}

TokenSequence pipeline_tokens(std::string_view raw_text) {
    return prune(tokenize(normalize_text(raw_text)));
}

std::string canonical_key(const TokenSequence& tokens) {
    std::string key;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) key += '\x1F';
        key += tokens[i];
    }
    return key;
}

double SparseFeatureVector::dot(const SparseFeatureVector& other) const {
    double sum = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
        if (a->first < b->first) ++a;
        else if (b->first < a->first) ++b;
        else sum += (a++)->second * (b++)->second;
    }
    return sum;
}

double SparseFeatureVector::norm() const {
    double sum = 0.0;
    for (const auto& [idx, value] : entries) sum += value * value;
    return std::sqrt(sum);
}

void IdfModel::rebuild_vocabulary() {
    vocabulary.clear();
    vocabulary.reserve(terms.size());
    for (std::uint32_t i = 0; i < terms.size(); ++i) vocabulary.emplace(terms[i], i);
}

IdfModel fit_idf(const std::vector<TokenSequence>& corpus) {
    if (corpus.empty()) throw EmptyCorpusError("cannot fit idf on an empty corpus");
    std::map<std::string, std::uint64_t> df;
    for (const TokenSequence& doc : corpus) {
        std::map<std::string, bool> seen;
        for (const std::string& token : doc) {
            if (!seen.emplace(token, true).second) continue;
            ++df[token];
        }
    }
    IdfModel model;
    model.corpus_size = corpus.size();
    model.terms.reserve(df.size());
    model.idf.reserve(df.size());
    const double n = static_cast<double>(corpus.size());
    for (const auto& [term, count] : df) {
        model.terms.push_back(term);
        model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) +
                            1.0);
    }
    model.rebuild_vocabulary();
    return model;
}

SparseFeatureVector vectorize(const TokenSequence& tokens, const IdfModel& model) {
    std::map<std::uint32_t, double> counts;
    for (const std::string& token : tokens) {
        auto it = model.vocabulary.find(token);
        if (it != model.vocabulary.end()) counts[it->second] += 1.0;
    }
    SparseFeatureVector v;
    v.entries.reserve(counts.size());
    double norm_sq = 0.0;
    for (const auto& [idx, count] : counts) {
        double w = count * model.idf[idx];
        v.entries.emplace_back(idx, w);
        norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [idx, w] : v.entries) w *= inv;
    }
    return v;
}

}  // namespace amides
