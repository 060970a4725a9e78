#ifndef IDFORGE_DIFFUSION_HPP
#define IDFORGE_DIFFUSION_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "idforge/errors.hpp"

namespace idforge {

/// Square single-channel latent, row-major.
struct LatentGrid {
    std::size_t side = 0;
    std::vector<double> v;

    LatentGrid() = default;
    explicit LatentGrid(std::size_t side_l) : side(side_l), v(side_l * side_l, 0.0) {
        if (side_l < 1) throw DimensionError("latent grid: side must be >= 1");
    }
    LatentGrid(std::size_t side_l, std::vector<double> values)
        : side(side_l), v(std::move(values)) {
        if (side_l < 1) throw DimensionError("latent grid: side must be >= 1");
        if (v.size() != side * side)
            throw DimensionError("latent grid: values length != side^2");
        for (double x : v)
            if (!std::isfinite(x)) throw NumericalError("latent grid: non-finite entry");
    }

    double& at(std::size_t r, std::size_t c) { return v[r * side + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * side + c]; }
    std::size_t cells() const { return v.size(); }
};

/// DDIM noise schedule: linear betas over train_steps, cumulative-product
/// alpha_bars (alpha_bars[0] = 1), and an evenly spaced strictly increasing
/// subsequence of timesteps used for sampling.
struct Schedule {
    std::size_t train_steps = 0;
    std::vector<double> betas;       // length train_steps
    std::vector<double> alpha_bars;  // length train_steps + 1
    std::vector<std::size_t> sample_indices; // strictly increasing, length t

    std::size_t sample_steps() const { return sample_indices.size(); }
};

inline Schedule make_schedule(std::size_t train_steps = 1000, std::size_t t = 50,
                              double beta_min = 1e-4, double beta_max = 0.02) {
    if (t < 1 || t > train_steps)
        throw ConfigError("make_schedule: need 1 <= t <= train_steps");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
        throw ConfigError("make_schedule: need 0 < beta_min < beta_max < 1");

    Schedule s;
    s.train_steps = train_steps;
    s.betas.resize(train_steps);
    for (std::size_t j = 0; j < train_steps; ++j) {
        const double frac = train_steps > 1
            ? static_cast<double>(j) / static_cast<double>(train_steps - 1) : 0.0;
        s.betas[j] = beta_min + (beta_max - beta_min) * frac;
    }
    s.alpha_bars.resize(train_steps + 1);
    s.alpha_bars[0] = 1.0;
    for (std::size_t j = 1; j <= train_steps; ++j)
        s.alpha_bars[j] = s.alpha_bars[j - 1] * (1.0 - s.betas[j - 1]);

    s.sample_indices.resize(t);
    for (std::size_t j = 0; j < t; ++j)
        s.sample_indices[j] = ((j + 1) * train_steps) / t;
    return s;
}

/// Cached DDIM run: latents[0] = z_t down to latents[t] = z_0.
struct Trajectory {
    std::vector<LatentGrid> latents;
    std::uint64_t seed = 0;
    std::string condition_tag;

    std::size_t steps() const { return latents.empty() ? 0 : latents.size() - 1; }
    std::size_t side() const { return latents.empty() ? 0 : latents.front().side; }
};

/// Noise predictor; implementations must be deterministic in their
/// arguments and safe for concurrent read-only use.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual LatentGrid predict_noise(const std::string& condition,
                                     const std::optional<std::vector<double>>& identity,
                                     const LatentGrid& latent,
                                     std::size_t step) const = 0;
};

/// Exact noise prediction toward a fixed target:
/// eps = (z - sqrt(abar)*target) / sqrt(1 - abar).
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(LatentGrid target, Schedule schedule)
        : target_(std::move(target)), schedule_(std::move(schedule)) {}

    LatentGrid predict_noise(const std::string&, const std::optional<std::vector<double>>&,
                             const LatentGrid& z, std::size_t step) const override {
        if (z.side != target_.side)
            throw DimensionError("oracle denoiser: latent side mismatch");
        if (step >= schedule_.alpha_bars.size())
            throw ConfigError("oracle denoiser: step out of schedule range");
        const double abar = schedule_.alpha_bars[step];
        LatentGrid out(z.side);
        if (abar >= 1.0) return out; // no noise component at abar == 1
        const double sa = std::sqrt(abar);
        const double sb = std::sqrt(1.0 - abar);
        for (std::size_t i = 0; i < z.cells(); ++i)
            out.v[i] = (z.v[i] - sa * target_.v[i]) / sb;
        return out;
    }

    const LatentGrid& target() const { return target_; }

private:
    LatentGrid target_;
    Schedule schedule_;
};

inline std::shared_ptr<Denoiser> oracle_denoiser(LatentGrid target, Schedule schedule) {
    return std::make_shared<OracleDenoiser>(std::move(target), std::move(schedule));
}

/// Relaxed identity denoiser: estimates the clean image implied by the
/// trajectory's constant noise direction, pulls it a fraction `pull` toward
/// the identity target per call, and predicts the matching noise. With
/// pull = 1 it reduces to the oracle denoiser.
class IdentityPullDenoiser final : public Denoiser {
public:
    IdentityPullDenoiser(LatentGrid identity_target, LatentGrid base_noise,
                         double pull, Schedule schedule)
        : target_(std::move(identity_target)), base_noise_(std::move(base_noise)),
          pull_(pull), schedule_(std::move(schedule)) {
        if (!(pull_ > 0.0 && pull_ <= 1.0))
            throw ConfigError("identity pull denoiser: pull must be in (0,1]");
        if (target_.side != base_noise_.side)
            throw DimensionError("identity pull denoiser: side mismatch");
    }

    LatentGrid predict_noise(const std::string&, const std::optional<std::vector<double>>&,
                             const LatentGrid& z, std::size_t step) const override {
        if (z.side != target_.side)
            throw DimensionError("identity pull denoiser: latent side mismatch");
        if (step >= schedule_.alpha_bars.size())
            throw ConfigError("identity pull denoiser: step out of schedule range");
        const double abar = schedule_.alpha_bars[step];
        LatentGrid out(z.side);
        if (abar >= 1.0) return out;
        const double sa = std::sqrt(abar);
        const double sb = std::sqrt(1.0 - abar);
        for (std::size_t i = 0; i < z.cells(); ++i) {
            const double x0_est = (z.v[i] - sb * base_noise_.v[i]) / sa;
            const double x0_pred = x0_est + pull_ * (target_.v[i] - x0_est);
            out.v[i] = (z.v[i] - sa * x0_pred) / sb;
        }
        return out;
    }

private:
    LatentGrid target_;
    LatentGrid base_noise_;
    double pull_;
    Schedule schedule_;
};

/// One deterministic DDIM update (eta = 0).
inline LatentGrid ddim_step(const LatentGrid& z, const LatentGrid& eps_hat,
                            std::size_t from_index, std::size_t to_index,
                            const Schedule& schedule) {
    if (z.side != eps_hat.side)
        throw DimensionError("ddim_step: shape mismatch");
    if (from_index <= to_index)
        throw ConfigError("ddim_step: from_index must exceed to_index");
    if (from_index >= schedule.alpha_bars.size())
        throw ConfigError("ddim_step: from_index out of schedule range");

    const double abar_from = schedule.alpha_bars[from_index];
    const double abar_to = schedule.alpha_bars[to_index];
    const double sa_from = std::sqrt(abar_from);
    const double sb_from = std::sqrt(1.0 - abar_from);
    const double sa_to = std::sqrt(abar_to);
    const double sb_to = std::sqrt(1.0 - abar_to);

    LatentGrid out(z.side);
    for (std::size_t i = 0; i < z.cells(); ++i) {
        const double x0 = (z.v[i] - sb_from * eps_hat.v[i]) / sa_from;
        out.v[i] = sa_to * x0 + sb_to * eps_hat.v[i];
    }
    return out;
}

inline LatentGrid seeded_normal_grid(std::size_t side, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LatentGrid g(side);
    for (double& x : g.v) x = gauss(rng);
    return g;
}

/// Full DDIM run from seeded Gaussian noise, caching every intermediate
/// latent. latents[j] is the state before the j-th remaining denoise step.
inline Trajectory sample_with_cache(const Denoiser& denoiser, const std::string& condition,
                                    const std::optional<std::vector<double>>& identity,
                                    std::uint64_t seed, const Schedule& schedule,
                                    std::size_t side_l) {
    const std::size_t t = schedule.sample_steps();
    if (t == 0) throw ConfigError("sample_with_cache: schedule has no sample steps");

    Trajectory traj;
    traj.seed = seed;
    traj.condition_tag = condition;
    traj.latents.reserve(t + 1);

    LatentGrid z = seeded_normal_grid(side_l, seed);
    traj.latents.push_back(z);
    for (std::size_t j = t; j >= 1; --j) {
        const std::size_t from = schedule.sample_indices[j - 1];
        const std::size_t to = j >= 2 ? schedule.sample_indices[j - 2] : 0;
        LatentGrid eps = denoiser.predict_noise(condition, identity, z, from);
        z = ddim_step(z, eps, from, to, schedule);
        traj.latents.push_back(z);
    }
    return traj;
}

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t hash_text(const std::string& s, std::uint64_t seed = 0) {
    return fnv1a(s.data(), s.size(), 1469598103934665603ULL ^ (seed * 0x9e3779b97f4a7c15ULL));
}

} // namespace detail

/// Tokens starting with an uppercase ASCII letter name characters; prompts
/// reference story characters by these tokens.
inline std::vector<std::string> character_tokens(const std::string& prompt) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            if (std::isupper(static_cast<unsigned char>(cur[0])) &&
                std::find(tokens.begin(), tokens.end(), cur) == tokens.end())
                tokens.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : prompt) {
        if (std::isalnum(static_cast<unsigned char>(ch))) cur.push_back(ch);
        else flush();
    }
    flush();
    return tokens;
}

namespace detail {

struct FieldWave {
    double fx, fy, phase, amp;
};

// Resolution-independent band-limited field: params seeded, sampled at cell
// centers in [0,1)^2.
inline std::vector<FieldWave> seeded_waves(std::uint64_t seed, std::size_t count,
                                           double amp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(1.0, 4.0);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    std::vector<FieldWave> waves(count);
    for (auto& w : waves) {
        w.fx = freq(rng);
        w.fy = freq(rng);
        w.phase = phase(rng);
        w.amp = amp;
    }
    return waves;
}

struct Blob {
    double cx, cy, radius, amp;
};

} // namespace detail

/// Deterministic stand-in for the template image a text-to-image generator
/// would produce: seeded band-limited background plus one high-intensity
/// blob per character token, sampled on a continuous field so the same
/// prompt yields aligned patterns at any resolution.
inline LatentGrid prompt_to_target(const std::string& prompt, std::size_t side_l,
                                   std::uint64_t seed) {
    if (side_l < 1) throw DimensionError("prompt_to_target: side must be >= 1");

    const std::uint64_t h = detail::hash_text(prompt, seed);
    const auto waves = detail::seeded_waves(h, 4, 0.05);

    const std::vector<std::string> chars = character_tokens(prompt);
    std::vector<detail::Blob> blobs;
    for (std::size_t c = 0; c < chars.size(); ++c) {
        const std::uint64_t hb = detail::hash_text(chars[c], seed);
        std::mt19937_64 rng(hb);
        std::uniform_real_distribution<double> jitter(-0.12, 0.12);
        std::uniform_real_distribution<double> rad(0.07, 0.11);
        detail::Blob b;
        b.cx = (static_cast<double>(c) + 0.5) / static_cast<double>(chars.size());
        b.cy = 0.5 + jitter(rng);
        b.radius = rad(rng);
        b.amp = 1.4;
        blobs.push_back(b);
    }

    LatentGrid g(side_l);
    for (std::size_t r = 0; r < side_l; ++r) {
        const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(side_l);
        for (std::size_t c = 0; c < side_l; ++c) {
            const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(side_l);
            double val = 0.0;
            for (const auto& w : waves)
                val += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase);
            for (const auto& b : blobs) {
                const double dx = x - b.cx, dy = y - b.cy;
                val += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
            }
            g.at(r, c) = std::clamp(val, -1.0, 1.0);
        }
    }
    return g;
}

/// Face-like blob pattern seeded from an identity embedding, used as the
/// observable identity signal for oracle injection.
inline LatentGrid identity_target_grid(const std::vector<double>& embedding,
                                       std::size_t side_l) {
    const std::uint64_t h = detail::fnv1a(embedding.data(), embedding.size() * sizeof(double));
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> pos(0.3, 0.7);
    std::uniform_real_distribution<double> rad(0.05, 0.12);
    std::uniform_real_distribution<double> amp(0.6, 1.0);

    std::vector<detail::Blob> blobs(4);
    for (auto& b : blobs) {
        b.cx = pos(rng);
        b.cy = pos(rng);
        b.radius = rad(rng);
        b.amp = amp(rng) * (rng() % 2 ? 1.0 : -1.0);
    }
    const auto waves = detail::seeded_waves(h ^ 0xabcdef, 3, 0.15);

    LatentGrid g(side_l);
    for (std::size_t r = 0; r < side_l; ++r) {
        const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(side_l);
        for (std::size_t c = 0; c < side_l; ++c) {
            const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(side_l);
            double val = 0.0;
            for (const auto& w : waves)
                val += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase);
            for (const auto& b : blobs) {
                const double dx = x - b.cx, dy = y - b.cy;
                val += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
            }
            g.at(r, c) = std::clamp(val, -1.0, 1.0);
        }
    }
    return g;
}

} // namespace idforge

#endif
