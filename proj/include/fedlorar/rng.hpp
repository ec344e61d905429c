#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fedlorar {

// Deterministic RNG with hand-rolled distributions. The standard
// distributions are implementation-defined, which would break the
// byte-for-byte replay contract across toolchains, so uniform/normal/
// gamma sampling is spelled out here on top of a fixed bit generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // splitmix-style warmup so nearby seeds diverge immediately
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1), safe as a log argument.
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Standard normal via Box-Muller (one value per call; cache unused half).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Symmetric Dirichlet(alpha) of length n.
    std::vector<double> dirichlet(double alpha, std::size_t n) {
        std::vector<double> out(n);
        double total = 0.0;
        for (auto& g : out) {
            g = gamma(alpha);
            total += g;
        }
        if (total <= 0.0) {
            // all-zero draw is possible only for pathologically tiny alpha
            for (auto& g : out) g = 1.0 / static_cast<double>(n);
            return out;
        }
        for (auto& g : out) g /= total;
        return out;
    }

    std::size_t index_below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index_below(i)]);
        }
    }

    // Category draw from a probability vector (assumed to sum to ~1).
    std::size_t categorical(const std::vector<double>& probs) {
        double u = uniform();
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            if (u < probs[i]) return i;
            u -= probs[i];
        }
        return probs.size() - 1;
    }

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stable seed derivation for nested streams (round/client sub-seeds).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = base ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace fedlorar
