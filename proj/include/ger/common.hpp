// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ger {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File or stream level failure (missing file, unreadable archive, ...).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Invalid configuration or CLI arguments.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64, used for fingerprints and the deterministic mock)

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t x, std::uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

/// splitmix64 finalizer; good cheap mixer for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string hex64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// A fixed splitmix64 stream with hand-rolled uniform/normal mappings so that
// identical seeds produce identical values on every platform; the standard
// <random> distributions are implementation-defined and would break the
// byte-for-byte reproducibility contract of reports and checkpoints.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (second value cached).
    double normal();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // fixed-point multiply keeps the mapping platform-stable
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Index sampled from an (unnormalized) nonnegative weight vector.
    std::size_t categorical(const std::vector<double>& weights);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derives an independent child stream from this seed and a label.
    Rng fork(std::string_view label) const {
        return Rng(mix64(state_ ^ fnv1a64(label)));
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small string helpers

std::string lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

/// Prefixes every line of `text` with `n` spaces.
std::string indent_block(const std::string& text, int n);

/// UTC calendar date ("YYYY-MM-DD") for an epoch-millisecond timestamp.
std::string iso_date_utc(std::int64_t epoch_ms);

/// Fixed-precision decimal rendering ("%.<digits>f").
std::string format_fixed(double v, int digits);

/// Shortest decimal rendering that parses back to the same double.
std::string format_shortest(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ger
