#pragma once
// Shared plumbing: error types, deterministic RNG, float canonicalization.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace umtf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid generation/run parameter; message names the offending field.
struct ParamError : Error {
    using Error::Error;
};

// Malformed or inconsistent on-disk document.
struct ParseError : Error {
    using Error::Error;
};

// Document references an entity that does not exist.
struct IntegrityError : Error {
    using Error::Error;
};

// MMDA cannot estimate cluster counts (no wireless fragments at all).
struct EstimationError : Error {
    using Error::Error;
};

struct EvalError : Error {
    using Error::Error;
};

// Rounds a double to 9 significant digits, the canonical precision of every
// float that ends up in a scenario document.  Values produced this way
// round-trip exactly through JSON.
inline double round9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (root seed, purpose tag, index).
// Keeps RNG consumption of one pipeline stage from shifting another's stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = seed;
    for (char c : tag) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return splitmix64(h ^ index);
}

// Deterministic RNG with pinned output transforms.  std::mt19937_64 is fully
// specified by the standard; the distributions below are implemented here so
// the generated streams do not depend on the standard library vendor.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x5bf0363546e94bdbULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Box-Muller, no caching: every call consumes exactly two uniforms.
    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

// Fixed-format float printing for CSV output (9 significant digits,
// matching the scenario document precision).
inline std::string format_g9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace umtf
