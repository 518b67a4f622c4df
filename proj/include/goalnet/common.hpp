#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace goalnet {

using Rank = std::uint32_t;
using TaskId = std::uint32_t;
using Tag = std::uint32_t;
using Bytes = std::uint64_t;
using TimeNs = std::int64_t;

inline constexpr Bytes kUnlimitedBytes = std::numeric_limits<Bytes>::max();

// Base of every error the library raises. `kind()` is a short machine-readable
// class used by the CLI to pick exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), _kind(std::move(kind)) {}
    const std::string& kind() const noexcept { return _kind; }

private:
    std::string _kind;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error("parse", format(what, line, column)), _line(line), _column(column) {}
    std::size_t line() const noexcept { return _line; }
    std::size_t column() const noexcept { return _column; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0)
            return what;
        return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
    }
    std::size_t _line;
    std::size_t _column;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error("format", what) {}
};

// Deterministic generator shared by every seeded component. splitmix64 keeps
// results identical across standard libraries, unlike std::*_distribution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : _state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (_state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // rejection keeps the result unbiased
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <typename Container>
    void shuffle(Container& c) {
        for (std::size_t i = c.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(c[i - 1], c[j]);
        }
    }

private:
    std::uint64_t _state;
};

inline std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = (h ^ (h >> 33)) * 0xff51afd7ed558ccdULL;
    return h ^ (h >> 33);
}

} // namespace goalnet
