#ifndef IDFORGE_INJECTION_HPP
#define IDFORGE_INJECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "idforge/diffusion.hpp"
#include "idforge/errors.hpp"

namespace idforge {

struct Mask {
    std::size_t side = 0;
    std::vector<std::uint8_t> bits; // 1 = covered

    Mask() = default;
    explicit Mask(std::size_t s) : side(s), bits(s * s, 0) {}
    Mask(std::size_t s, std::vector<std::uint8_t> b) : side(s), bits(std::move(b)) {
        if (bits.size() != side * side)
            throw DimensionError("mask: bits length != side^2");
        for (auto x : bits)
            if (x > 1) throw ConfigError("mask: bits must be 0/1");
    }

    std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * side + c]; }
    void set(std::size_t r, std::size_t c, std::uint8_t v) { bits[r * side + c] = v; }
    std::size_t area() const {
        return static_cast<std::size_t>(std::accumulate(bits.begin(), bits.end(), 0L));
    }
};

/// Per-character masks plus the derived background complement. Character
/// masks are pairwise disjoint; earlier characters win overlaps.
struct MaskSet {
    std::vector<Mask> characters;
    Mask background;

    std::size_t side() const { return background.side; }
};

/// Build a MaskSet from (possibly overlapping) candidate character masks:
/// enforce disjointness by character priority, background = complement.
inline MaskSet make_mask_set(std::vector<Mask> characters, std::size_t side) {
    MaskSet ms;
    Mask covered(side);
    for (auto& m : characters) {
        if (m.side != side) throw DimensionError("mask set: mixed mask sides");
        for (std::size_t i = 0; i < m.bits.size(); ++i) {
            if (m.bits[i] && covered.bits[i]) m.bits[i] = 0;
            else if (m.bits[i]) covered.bits[i] = 1;
        }
        ms.characters.push_back(std::move(m));
    }
    ms.background = Mask(side);
    for (std::size_t i = 0; i < covered.bits.size(); ++i)
        ms.background.bits[i] = covered.bits[i] ? 0 : 1;
    return ms;
}

/// Candidate regions for an image; the built-in replaces a grounded
/// segmentation model at desk scale.
using Segmenter = std::function<std::vector<Mask>(const LatentGrid&)>;

/// Threshold at mean + 0.5*stddev, then 4-connected components.
inline std::vector<Mask> builtin_segmenter(const LatentGrid& image) {
    const std::size_t n = image.cells();
    double mean = 0.0;
    for (double x : image.v) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : image.v) var += (x - mean) * (x - mean);
    const double thr = mean + 0.5 * std::sqrt(var / static_cast<double>(n));

    const std::size_t side = image.side;
    std::vector<int> comp(n, -1);
    std::vector<Mask> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] >= 0 || !(image.v[start] > thr)) continue;
        const int cid = static_cast<int>(out.size());
        Mask m(side);
        stack.assign(1, start);
        comp[start] = cid;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            m.bits[p] = 1;
            const std::size_t r = p / side, c = p % side;
            const std::size_t nb[4] = {
                r > 0 ? p - side : p, r + 1 < side ? p + side : p,
                c > 0 ? p - 1 : p, c + 1 < side ? p + 1 : p};
            for (std::size_t q : nb) {
                if (q == p || comp[q] >= 0 || !(image.v[q] > thr)) continue;
                comp[q] = cid;
                stack.push_back(q);
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

namespace detail {

inline double centroid_x(const Mask& m) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < m.side; ++r)
        for (std::size_t c = 0; c < m.side; ++c)
            if (m.at(r, c)) { sum += static_cast<double>(c); ++count; }
    return count ? sum / static_cast<double>(count) : 0.0;
}

} // namespace detail

/// Keep the num_characters largest candidate regions, assigned to
/// characters in left-to-right centroid order.
inline MaskSet extract_masks(const LatentGrid& image, std::size_t num_characters,
                             const Segmenter& segmenter = builtin_segmenter) {
    std::vector<Mask> cands = segmenter(image);
    if (cands.size() < num_characters)
        throw LayoutError("extract_masks: found " + std::to_string(cands.size()) +
                          " regions for " + std::to_string(num_characters) + " characters");
    std::vector<std::size_t> idx(cands.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return cands[a].area() > cands[b].area();
    });
    idx.resize(num_characters);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return detail::centroid_x(cands[a]) < detail::centroid_x(cands[b]);
    });
    std::vector<Mask> chosen;
    chosen.reserve(num_characters);
    for (std::size_t i : idx) chosen.push_back(std::move(cands[i]));
    return make_mask_set(std::move(chosen), image.side);
}

/// Binary dilation with a square structuring element of side
/// 2*floor(kernel/2)+1; kernel 0 or 1 is the identity.
inline Mask dilate(const Mask& mask, std::size_t kernel) {
    const std::size_t radius = kernel / 2;
    if (radius == 0) return mask;
    const std::size_t side = mask.side;

    // Horizontal pass via run prefix sums, then vertical.
    Mask horiz(side);
    for (std::size_t r = 0; r < side; ++r) {
        std::vector<std::size_t> pref(side + 1, 0);
        for (std::size_t c = 0; c < side; ++c)
            pref[c + 1] = pref[c] + mask.at(r, c);
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t lo = c >= radius ? c - radius : 0;
            const std::size_t hi = std::min(side - 1, c + radius);
            horiz.set(r, c, pref[hi + 1] - pref[lo] > 0 ? 1 : 0);
        }
    }
    Mask out(side);
    for (std::size_t c = 0; c < side; ++c) {
        std::vector<std::size_t> pref(side + 1, 0);
        for (std::size_t r = 0; r < side; ++r)
            pref[r + 1] = pref[r] + horiz.at(r, c);
        for (std::size_t r = 0; r < side; ++r) {
            const std::size_t lo = r >= radius ? r - radius : 0;
            const std::size_t hi = std::min(side - 1, r + radius);
            out.set(r, c, pref[hi + 1] - pref[lo] > 0 ? 1 : 0);
        }
    }
    return out;
}

/// Progressive dilation kernel for re-denoising step i (counting down from
/// t_prime): 0 at the start, k_max at the end, linear in between.
inline std::size_t kernel_schedule(std::size_t i, std::size_t t_prime, std::size_t k_max) {
    if (t_prime == 0) {
        if (i == 0) return k_max;
        throw ConfigError("kernel_schedule: i must be 0 when t_prime is 0");
    }
    if (i > t_prime)
        throw ConfigError("kernel_schedule: need i <= t_prime");
    const double frac = static_cast<double>(t_prime - i) / static_cast<double>(t_prime);
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(k_max)));
}

/// Block-majority downsampling; half-filled blocks round to foreground.
inline Mask downsample_mask(const Mask& mask, std::size_t latent_side) {
    if (latent_side < 1 || mask.side % latent_side != 0)
        throw DimensionError("downsample_mask: mask side not a multiple of latent side");
    const std::size_t f = mask.side / latent_side;
    Mask out(latent_side);
    for (std::size_t r = 0; r < latent_side; ++r)
        for (std::size_t c = 0; c < latent_side; ++c) {
            std::size_t ones = 0;
            for (std::size_t dr = 0; dr < f; ++dr)
                for (std::size_t dc = 0; dc < f; ++dc)
                    ones += mask.at(r * f + dr, c * f + dc);
            out.set(r, c, 2 * ones >= f * f ? 1 : 0);
        }
    return out;
}

/// Cell-wise selection: background cells from z_cached_prev, character-j
/// cells from per_char[j]. The latent masks must partition the grid.
inline LatentGrid compose(const LatentGrid& z_cached_prev,
                          const std::vector<LatentGrid>& per_char,
                          const MaskSet& maskset_latent) {
    const std::size_t side = z_cached_prev.side;
    if (maskset_latent.side() != side)
        throw DimensionError("compose: mask side != latent side");
    if (per_char.size() != maskset_latent.characters.size())
        throw DimensionError("compose: per-character grid count mismatch");
    for (const auto& g : per_char)
        if (g.side != side) throw DimensionError("compose: latent side mismatch");

    for (std::size_t i = 0; i < side * side; ++i) {
        std::size_t cover = maskset_latent.background.bits[i];
        for (const auto& m : maskset_latent.characters) cover += m.bits[i];
        if (cover != 1)
            throw LayoutError("compose: masks do not partition the grid");
    }

    LatentGrid out(side);
    for (std::size_t i = 0; i < side * side; ++i) {
        if (maskset_latent.background.bits[i]) {
            out.v[i] = z_cached_prev.v[i];
            continue;
        }
        for (std::size_t j = 0; j < per_char.size(); ++j)
            if (maskset_latent.characters[j].bits[i]) {
                out.v[i] = per_char[j].v[i];
                break;
            }
    }
    return out;
}

struct InjectionConfig {
    std::size_t start_t_prime = 40;
    std::size_t k_max = 50; // full-resolution pixels
    bool denoise_from_cached = false; // per-character input: cached instead of composed

    void validate(std::size_t t) const {
        if (start_t_prime > t)
            throw ConfigError("injection: start_t_prime exceeds trajectory steps");
    }
};

struct CharacterIdentity {
    std::string condition;
    std::vector<double> embedding;
    const Denoiser* denoiser = nullptr;
};

/// Re-denoising identity injection. Starting from the cached latent at
/// index t', each step dilates the original character masks per the kernel
/// schedule, re-denoises each character region with its identity denoiser,
/// and composes the results over the cached background latent. Returns the
/// final z_0.
inline LatentGrid redenoise(const Trajectory& trajectory, const MaskSet& maskset,
                            const std::vector<CharacterIdentity>& identities,
                            const InjectionConfig& cfg, const Schedule& schedule) {
    const std::size_t t = trajectory.steps();
    cfg.validate(t);
    const std::size_t s = maskset.characters.size();
    if (identities.size() != s)
        throw ConfigError("redenoise: identity count != character mask count");
    const std::size_t latent_side = trajectory.side();
    if (s > 0 && maskset.side() % latent_side != 0)
        throw DimensionError("redenoise: mask side not a multiple of latent side");

    const std::size_t t_prime = cfg.start_t_prime;
    LatentGrid z = trajectory.latents[t - t_prime];

    for (std::size_t i = t_prime; i >= 1; --i) {
        const std::size_t kernel = kernel_schedule(i, t_prime, cfg.k_max);

        std::vector<Mask> dilated;
        dilated.reserve(s);
        for (const auto& m : maskset.characters) dilated.push_back(dilate(m, kernel));
        MaskSet full = make_mask_set(std::move(dilated), maskset.side());

        std::vector<Mask> latent_chars;
        latent_chars.reserve(s);
        for (const auto& m : full.characters)
            latent_chars.push_back(downsample_mask(m, latent_side));
        MaskSet latent_ms = make_mask_set(std::move(latent_chars), latent_side);

        const std::size_t from = schedule.sample_indices[i - 1];
        const std::size_t to = i >= 2 ? schedule.sample_indices[i - 2] : 0;
        const LatentGrid& input = cfg.denoise_from_cached ? trajectory.latents[t - i] : z;

        std::vector<LatentGrid> per_char;
        per_char.reserve(s);
        for (const auto& id : identities) {
            LatentGrid eps = id.denoiser->predict_noise(id.condition, id.embedding, input, from);
            per_char.push_back(ddim_step(input, eps, from, to, schedule));
        }
        z = compose(trajectory.latents[t - (i - 1)], per_char, latent_ms);
    }
    return z;
}

} // namespace idforge

#endif
