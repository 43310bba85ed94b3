#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amides {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, 64 bit. Used for bundle checksums and dataset fingerprints.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex64(std::uint64_t value);

// Bounded draw and permutation with pinned algorithms. std::shuffle and
// std::uniform_int_distribution are implementation-defined, which would break
// byte-identical artifacts across toolchains.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    return bound == 0 ? 0 : rng() % bound;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded_draw(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t h = seed ^ (0x9e3779b97f4a7c15ull + (stream << 6) + (stream >> 2));
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

bool iequals(std::string_view a, std::string_view b);
std::string ascii_lower(std::string_view text);

// "2022-05-02T10:15:30Z" -> seconds since the Unix epoch.
std::optional<std::int64_t> parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t epoch_seconds);

// Shortest round-trip formatting for doubles, shared by every serializer so
// reports and bundles stay byte-stable.
std::string format_double(double value);

}  // namespace amides
