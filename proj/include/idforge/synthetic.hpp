#ifndef IDFORGE_SYNTHETIC_HPP
#define IDFORGE_SYNTHETIC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "idforge/discovery.hpp"
#include "idforge/matrix.hpp"

namespace idforge {

struct SyntheticEmbeddingConfig {
    std::size_t d = 512;
    std::size_t m = 64;            // samples per identity
    double sigma_in = 0.2;         // inlier in-subspace noise
    double contamination = 0.0;    // fraction of off-identity rows
    std::size_t num_identities = 1;
    std::size_t subspace_dim = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 2 || m < 1) throw ConfigError("synthetic: need d >= 2, m >= 1");
        if (!(contamination >= 0.0 && contamination < 1.0))
            throw ConfigError("synthetic: contamination must be in [0,1)");
        if (!(sigma_in > 0.0)) throw ConfigError("synthetic: sigma_in must be > 0");
        if (num_identities < 1) throw ConfigError("synthetic: need >= 1 identity");
    }
};

struct SyntheticIdentity {
    EmbeddingMatrix embeddings;
    std::vector<std::uint8_t> inlier_labels; // 1 = inlier
};

namespace detail {

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(d);
    double n2 = 0.0;
    for (double& x : v) { x = gauss(rng); n2 += x * x; }
    const double n = std::sqrt(n2);
    for (double& x : v) x /= n;
    return v;
}

inline void normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

} // namespace detail

/// Planted identity clusters: each identity gets a center and a small
/// subspace of allowed variation; contaminated rows sit near other centers.
/// Row order is shuffled so labels carry the ground truth.
inline std::vector<SyntheticIdentity> generate_identities(const SyntheticEmbeddingConfig& cfg) {
    cfg.validate();

    // Shared center pool: real identities plus phantoms so contamination is
    // well-defined even with a single identity.
    const std::size_t pool = cfg.num_identities + 3;
    std::mt19937_64 center_rng(cfg.seed ^ 0x5eedc0debeefULL);
    std::vector<std::vector<double>> centers;
    centers.reserve(pool);
    for (std::size_t i = 0; i < pool; ++i)
        centers.push_back(detail::random_unit_vector(center_rng, cfg.d));

    std::vector<SyntheticIdentity> out;
    out.reserve(cfg.num_identities);
    for (std::size_t idn = 0; idn < cfg.num_identities; ++idn) {
        std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + idn + 1);
        std::normal_distribution<double> gauss(0.0, 1.0);

        std::vector<std::vector<double>> basis;
        for (std::size_t b = 0; b < cfg.subspace_dim; ++b)
            basis.push_back(detail::random_unit_vector(rng, cfg.d));

        const auto n_out = static_cast<std::size_t>(
            static_cast<double>(cfg.m) * cfg.contamination);
        const std::size_t n_in = cfg.m - n_out;

        Matrix mat(cfg.m, cfg.d);
        std::vector<std::uint8_t> labels(cfg.m, 0);
        const double sigma_amb = cfg.sigma_in / 5.0;

        std::vector<std::size_t> order(cfg.m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t s = 0; s < cfg.m; ++s) {
            const bool inlier = s < n_in;
            std::vector<double> row;
            if (inlier) {
                row = centers[idn];
                for (std::size_t b = 0; b < cfg.subspace_dim; ++b) {
                    const double coef = gauss(rng) * cfg.sigma_in;
                    for (std::size_t c = 0; c < cfg.d; ++c) row[c] += coef * basis[b][c];
                }
                for (std::size_t c = 0; c < cfg.d; ++c)
                    row[c] += gauss(rng) * sigma_amb / std::sqrt(static_cast<double>(cfg.d));
            } else {
                // Spread outliers across the other centers in the pool, with
                // isotropic scatter no low-rank subspace can absorb.
                std::size_t other = (idn + 1 + (s - n_in) % (pool - 1)) % pool;
                row = centers[other];
                const double sigma_out = 0.5;
                for (std::size_t c = 0; c < cfg.d; ++c)
                    row[c] += gauss(rng) * sigma_out / std::sqrt(static_cast<double>(cfg.d));
            }
            detail::normalize(row);

            const std::size_t dest = order[s];
            labels[dest] = inlier ? 1 : 0;
            for (std::size_t c = 0; c < cfg.d; ++c) mat(dest, c) = row[c];
        }

        SyntheticIdentity si;
        si.embeddings = EmbeddingMatrix(std::move(mat));
        si.inlier_labels = std::move(labels);
        out.push_back(std::move(si));
    }
    return out;
}

} // namespace idforge

#endif
