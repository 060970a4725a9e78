#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "idforge/diffusion.hpp"

using idforge::LatentGrid;
using idforge::Schedule;

namespace {

double max_abs_diff(const LatentGrid& a, const LatentGrid& b) {
    REQUIRE(a.side == b.side);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.cells(); ++i)
        worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
    return worst;
}

double l2_dist(const LatentGrid& a, const LatentGrid& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.cells(); ++i) {
        const double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

TEST_CASE("make_schedule basics") {
    Schedule s = idforge::make_schedule(1000, 50);
    CHECK(s.alpha_bars.size() == 1001);
    CHECK(s.alpha_bars[0] == 1.0);
    CHECK(s.alpha_bars[1] == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.sample_indices.size() == 50);
    CHECK(s.sample_indices.back() == 1000);

    for (std::size_t i = 1; i < s.alpha_bars.size(); ++i)
        CHECK(s.alpha_bars[i] < s.alpha_bars[i - 1]);
    for (std::size_t i = 1; i < s.sample_indices.size(); ++i)
        CHECK(s.sample_indices[i] > s.sample_indices[i - 1]);

    // sqrt(abar)^2 + sqrt(1-abar)^2 == 1 at every index
    for (double abar : s.alpha_bars) {
        const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
        CHECK(std::abs(sa * sa + sb * sb - 1.0) <= 1e-12);
    }

    CHECK_THROWS_AS(idforge::make_schedule(100, 0), idforge::ConfigError);
    CHECK_THROWS_AS(idforge::make_schedule(100, 101), idforge::ConfigError);
    CHECK_THROWS_AS(idforge::make_schedule(100, 50, 0.02, 1e-4), idforge::ConfigError);
    CHECK_THROWS_AS(idforge::make_schedule(100, 50, 1e-4, 1.0), idforge::ConfigError);
}

TEST_CASE("ddim_step algebra") {
    Schedule s = idforge::make_schedule(1000, 50);
    LatentGrid z = idforge::seeded_normal_grid(8, 3);

    SUBCASE("zero predicted noise rescales by sqrt(abar ratio)") {
        LatentGrid eps(8);
        LatentGrid out = idforge::ddim_step(z, eps, 600, 300, s);
        const double scale = std::sqrt(s.alpha_bars[300] / s.alpha_bars[600]);
        for (std::size_t i = 0; i < z.cells(); ++i)
            CHECK(out.v[i] == doctest::Approx(scale * z.v[i]).epsilon(1e-12));
    }

    SUBCASE("terminal step returns the clean estimate") {
        LatentGrid eps = idforge::seeded_normal_grid(8, 9);
        LatentGrid out = idforge::ddim_step(z, eps, 400, 0, s);
        const double sa = std::sqrt(s.alpha_bars[400]);
        const double sb = std::sqrt(1.0 - s.alpha_bars[400]);
        for (std::size_t i = 0; i < z.cells(); ++i)
            CHECK(out.v[i] == doctest::Approx((z.v[i] - sb * eps.v[i]) / sa).epsilon(1e-12));
    }

    SUBCASE("argument validation") {
        LatentGrid eps(8);
        CHECK_THROWS_AS(idforge::ddim_step(z, LatentGrid(4), 600, 300, s),
                        idforge::DimensionError);
        CHECK_THROWS_AS(idforge::ddim_step(z, eps, 300, 300, s), idforge::ConfigError);
        CHECK_THROWS_AS(idforge::ddim_step(z, eps, 2000, 300, s), idforge::ConfigError);
    }
}

TEST_CASE("oracle denoiser is exact on-trajectory and two-step consistent") {
    Schedule s = idforge::make_schedule(1000, 50);
    LatentGrid target = idforge::prompt_to_target("a quiet Harbor at dawn", 8, 5);
    idforge::OracleDenoiser den(target, s);

    SUBCASE("on-trajectory point gives zero predicted noise") {
        const std::size_t step = 500;
        const double sa = std::sqrt(s.alpha_bars[step]);
        LatentGrid z(8);
        for (std::size_t i = 0; i < z.cells(); ++i) z.v[i] = sa * target.v[i];
        LatentGrid eps = den.predict_noise("", std::nullopt, z, step);
        for (double x : eps.v) CHECK(std::abs(x) <= 1e-12);
    }

    SUBCASE("step at abar == 1 returns a zero grid") {
        LatentGrid eps = den.predict_noise("", std::nullopt, target, 0);
        for (double x : eps.v) CHECK(x == 0.0);
    }

    SUBCASE("two small steps equal one large step") {
        LatentGrid z = idforge::seeded_normal_grid(8, 17);
        LatentGrid one = idforge::ddim_step(
            z, den.predict_noise("", std::nullopt, z, 800), 800, 200, s);
        LatentGrid mid = idforge::ddim_step(
            z, den.predict_noise("", std::nullopt, z, 800), 800, 500, s);
        LatentGrid two = idforge::ddim_step(
            mid, den.predict_noise("", std::nullopt, mid, 500), 500, 200, s);
        CHECK(max_abs_diff(one, two) <= 1e-9);
    }

    SUBCASE("different targets give different predictions") {
        LatentGrid other = idforge::prompt_to_target("a loud Harbor at dusk", 8, 5);
        idforge::OracleDenoiser den2(other, s);
        LatentGrid z = idforge::seeded_normal_grid(8, 2);
        CHECK(max_abs_diff(den.predict_noise("", std::nullopt, z, 700),
                           den2.predict_noise("", std::nullopt, z, 700)) > 0.0);
    }
}

TEST_CASE("sample_with_cache reaches the oracle target") {
    Schedule s = idforge::make_schedule(1000, 50);
    LatentGrid target = idforge::prompt_to_target("Mira crossing a bridge", 16, 1);
    auto den = idforge::oracle_denoiser(target, s);

    for (std::uint64_t seed : {1ULL, 7ULL, 123456789ULL}) {
        auto traj = idforge::sample_with_cache(*den, "p", std::nullopt, seed, s, 16);
        CHECK(traj.latents.size() == 51);
        CHECK(traj.side() == 16);
        CHECK(max_abs_diff(traj.latents.back(), target) <= 1e-6);

        // distance to target is nonincreasing along the run
        double prev = l2_dist(traj.latents[0], target);
        for (std::size_t i = 1; i < traj.latents.size(); ++i) {
            const double cur = l2_dist(traj.latents[i], target);
            CHECK(cur <= prev + 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("sample_with_cache determinism") {
    Schedule s = idforge::make_schedule(1000, 20);
    LatentGrid target = idforge::prompt_to_target("Ode to nothing", 8, 4);
    auto den = idforge::oracle_denoiser(target, s);
    auto a = idforge::sample_with_cache(*den, "c", std::nullopt, 99, s, 8);
    auto b = idforge::sample_with_cache(*den, "c", std::nullopt, 99, s, 8);
    REQUIRE(a.latents.size() == b.latents.size());
    for (std::size_t i = 0; i < a.latents.size(); ++i)
        CHECK(a.latents[i].v == b.latents[i].v);

    auto c = idforge::sample_with_cache(*den, "c", std::nullopt, 100, s, 8);
    CHECK(a.latents.front().v != c.latents.front().v);
}

TEST_CASE("identity pull denoiser converges geometrically toward its target") {
    Schedule s = idforge::make_schedule(1000, 50);
    LatentGrid identity = idforge::identity_target_grid({0.25, -0.5, 1.0}, 8);
    LatentGrid noise = idforge::seeded_normal_grid(8, 3);

    // start on the noise trajectory of some other clean image
    LatentGrid base = idforge::prompt_to_target("Gull", 8, 2);
    const std::size_t start = s.sample_indices[39]; // index for 40 remaining steps
    LatentGrid z(8);
    {
        const double sa = std::sqrt(s.alpha_bars[start]);
        const double sb = std::sqrt(1.0 - s.alpha_bars[start]);
        for (std::size_t i = 0; i < z.cells(); ++i)
            z.v[i] = sa * base.v[i] + sb * noise.v[i];
    }

    idforge::IdentityPullDenoiser weak(identity, noise, 0.15, s);
    idforge::IdentityPullDenoiser full(identity, noise, 1.0, s);

    // pull = 1 behaves like the oracle: one terminal step lands on target
    LatentGrid eps = full.predict_noise("", std::nullopt, z, start);
    LatentGrid landed = idforge::ddim_step(z, eps, start, 0, s);
    CHECK(max_abs_diff(landed, identity) <= 1e-9);

    // more steps with the weak pull end closer to the identity target
    auto run = [&](std::size_t remaining) {
        const std::size_t first = 40 - remaining;
        LatentGrid cur(8);
        {
            const std::size_t from0 = s.sample_indices[39 - first];
            const double sa = std::sqrt(s.alpha_bars[from0]);
            const double sb = std::sqrt(1.0 - s.alpha_bars[from0]);
            for (std::size_t i = 0; i < cur.cells(); ++i)
                cur.v[i] = sa * base.v[i] + sb * noise.v[i];
        }
        for (std::size_t j = remaining; j >= 1; --j) {
            const std::size_t from = s.sample_indices[j - 1];
            const std::size_t to = j >= 2 ? s.sample_indices[j - 2] : 0;
            cur = idforge::ddim_step(
                cur, weak.predict_noise("", std::nullopt, cur, from), from, to, s);
        }
        return l2_dist(cur, identity);
    };
    const double d10 = run(10), d25 = run(25), d40 = run(40);
    CHECK(d25 < d10);
    CHECK(d40 < d25);

    CHECK_THROWS_AS(idforge::IdentityPullDenoiser(identity, noise, 0.0, s),
                    idforge::ConfigError);
    CHECK_THROWS_AS(idforge::IdentityPullDenoiser(identity, noise, 1.5, s),
                    idforge::ConfigError);
}

TEST_CASE("character_tokens") {
    auto t = idforge::character_tokens("Mira met Orrin near the Mira statue");
    CHECK(t == std::vector<std::string>{"Mira", "Orrin"});
    CHECK(idforge::character_tokens("all lower case words").empty());
    CHECK(idforge::character_tokens("").empty());
    CHECK(idforge::character_tokens("punct! Anna, end.") ==
          std::vector<std::string>{"Anna"});
}

TEST_CASE("prompt_to_target determinism and sensitivity") {
    LatentGrid a = idforge::prompt_to_target("Kara walks home", 16, 7);
    LatentGrid b = idforge::prompt_to_target("Kara walks home", 16, 7);
    CHECK(a.v == b.v);

    LatentGrid c = idforge::prompt_to_target("Kara walks away", 16, 7);
    CHECK(max_abs_diff(a, c) > 0.0);

    LatentGrid d = idforge::prompt_to_target("Kara walks home", 16, 8);
    CHECK(max_abs_diff(a, d) > 0.0);

    for (double x : a.v) {
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
    }

    // empty prompt: low-amplitude background only
    LatentGrid bg = idforge::prompt_to_target("", 16, 7);
    double peak = 0.0;
    for (double x : bg.v) peak = std::max(peak, std::abs(x));
    CHECK(peak <= 0.2 + 1e-12); // four waves of amplitude 0.05

    // a character blob pushes the peak well above the background
    double peak_char = 0.0;
    LatentGrid one = idforge::prompt_to_target("Kara", 32, 7);
    for (double x : one.v) peak_char = std::max(peak_char, std::abs(x));
    CHECK(peak_char > 0.5);
}

TEST_CASE("identity_target_grid determinism and embedding sensitivity") {
    std::vector<double> e1{0.1, 0.2, 0.3};
    std::vector<double> e2{0.1, 0.2, 0.3000001};
    LatentGrid a = idforge::identity_target_grid(e1, 12);
    LatentGrid b = idforge::identity_target_grid(e1, 12);
    LatentGrid c = idforge::identity_target_grid(e2, 12);
    CHECK(a.v == b.v);
    CHECK(max_abs_diff(a, c) > 0.0);
    for (double x : a.v) {
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("latent grid validation") {
    CHECK_THROWS_AS(LatentGrid(0), idforge::DimensionError);
    CHECK_THROWS_AS(LatentGrid(2, {1.0, 2.0, 3.0}), idforge::DimensionError);
    CHECK_THROWS_AS(LatentGrid(1, {std::nan("")}), idforge::NumericalError);
}
