#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "idforge/baselines.hpp"
#include "oracles.hpp"

using idforge::EmbeddingMatrix;
using idforge::Matrix;

namespace {

EmbeddingMatrix from_dense(const oracles::Dense& a) {
    Matrix m(a.size(), a[0].size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < a[0].size(); ++c) m(r, c) = a[r][c];
    return EmbeddingMatrix(std::move(m));
}

// cluster labels equal up to renaming?
bool labels_equivalent(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> fwd, bwd;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == idforge::kNoiseLabel) != (b[i] == idforge::kNoiseLabel)) return false;
        if (a[i] == idforge::kNoiseLabel) continue;
        auto f = fwd.find(a[i]);
        if (f == fwd.end()) fwd[a[i]] = b[i];
        else if (f->second != b[i]) return false;
        auto g = bwd.find(b[i]);
        if (g == bwd.end()) bwd[b[i]] = a[i];
        else if (g->second != a[i]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("lof: identical points all score 1") {
    oracles::Dense pts(6, std::vector<double>{1.0, 2.0});
    auto scores = idforge::lof_scores(from_dense(pts), 3);
    for (double s : scores) CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("lof: far point has strictly largest score on a grid") {
    oracles::Dense pts;
    for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 4; ++y)
            pts.push_back({static_cast<double>(x), static_cast<double>(y)});
    pts.push_back({10.0, 10.0});

    auto scores = idforge::lof_scores(from_dense(pts), 5);
    auto ref = oracles::lof_reference(pts, 5);
    for (std::size_t i = 0; i < scores.size(); ++i)
        CHECK(scores[i] == doctest::Approx(ref[i]).epsilon(1e-9));

    const std::size_t far = pts.size() - 1;
    CHECK(scores[far] > 1.0);
    for (std::size_t i = 0; i < far; ++i) CHECK(scores[far] > scores[i]);
}

TEST_CASE("lof: duplication invariance via reference") {
    std::mt19937_64 rng(4);
    oracles::Dense pts = oracles::random_dense(rng, 8, 3);
    oracles::Dense doubled;
    for (const auto& p : pts) {
        doubled.push_back(p);
        doubled.push_back(p);
    }
    auto scores = idforge::lof_scores(from_dense(doubled), 4);
    auto ref = oracles::lof_reference(doubled, 4);
    for (std::size_t i = 0; i < scores.size(); ++i)
        CHECK(scores[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    // paired duplicates score identically
    for (std::size_t i = 0; i < doubled.size(); i += 2)
        CHECK(scores[i] == doctest::Approx(scores[i + 1]).epsilon(1e-12));
}

TEST_CASE("lof: k_neighbors range enforced") {
    std::mt19937_64 rng(1);
    EmbeddingMatrix e = from_dense(oracles::random_dense(rng, 5, 2));
    CHECK_THROWS_AS(idforge::lof_scores(e, 1), idforge::ConfigError);
    CHECK_THROWS_AS(idforge::lof_scores(e, 5), idforge::ConfigError);
}

TEST_CASE("dbscan: two well-separated clusters, no noise") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    oracles::Dense pts;
    for (int i = 0; i < 10; ++i) pts.push_back({u(rng), u(rng)});
    for (int i = 0; i < 10; ++i) pts.push_back({5.0 + u(rng), 5.0 + u(rng)});

    auto out = idforge::dbscan(from_dense(pts), 0.2, 3);
    auto ref = oracles::dbscan_reference(pts, 0.2, 3);
    CHECK(out.labels == ref);
    CHECK(*std::max_element(out.labels.begin(), out.labels.end()) == 1);
    CHECK(std::count(out.labels.begin(), out.labels.end(), idforge::kNoiseLabel) == 0);
}

TEST_CASE("dbscan: isolated point labeled noise; huge eps gives one cluster") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    oracles::Dense pts;
    for (int i = 0; i < 12; ++i) pts.push_back({u(rng), u(rng)});
    pts.push_back({3.0, 3.0});

    auto out = idforge::dbscan(from_dense(pts), 0.2, 3);
    CHECK(out.labels.back() == idforge::kNoiseLabel);
    for (std::size_t i = 0; i + 1 < out.labels.size(); ++i) CHECK(out.labels[i] == 0);

    auto all = idforge::dbscan(from_dense(pts), 100.0, 3);
    for (int l : all.labels) CHECK(l == 0);
}

TEST_CASE("dbscan: matches reference on random instances") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> eps_pick(0.3, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng() % 21; // <= 25
        oracles::Dense pts = oracles::random_dense(rng, n, 2);
        const double eps = eps_pick(rng);
        const std::size_t min_pts = 2 + rng() % 4;
        auto out = idforge::dbscan(from_dense(pts), eps, min_pts);
        auto ref = oracles::dbscan_reference(pts, eps, min_pts);
        CHECK(out.labels == ref);
    }
}

TEST_CASE("dbscan: permutation invariance up to renaming") {
    std::mt19937_64 rng(31);
    oracles::Dense pts = oracles::random_dense(rng, 18, 2);
    auto base = idforge::dbscan(from_dense(pts), 1.0, 3);

    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    oracles::Dense shuffled(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) shuffled[i] = pts[perm[i]];
    auto permuted = idforge::dbscan(from_dense(shuffled), 1.0, 3);

    std::vector<int> mapped(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) mapped[perm[i]] = permuted.labels[i];
    CHECK(labels_equivalent(base.labels, mapped));
}

TEST_CASE("mahalanobis_compactness: zero for identical rows") {
    oracles::Dense pts(5, std::vector<double>{3.0, 1.0, 2.0});
    CHECK(idforge::mahalanobis_compactness(from_dense(pts), 0.1) == 0.0);
}

TEST_CASE("mahalanobis_compactness: isotropic data matches Euclidean oracle") {
    std::mt19937_64 rng(64);
    std::normal_distribution<double> g(0.0, 1.0);
    const double sigma = 0.7;
    const std::size_t m = 400, d = 4;
    oracles::Dense pts(m, std::vector<double>(d));
    for (auto& p : pts)
        for (double& x : p) x = g(rng) * sigma;

    const double compact = idforge::mahalanobis_compactness(from_dense(pts), 0.05);

    // Euclidean oracle: mean distance to the mean, divided by sigma.
    std::vector<double> mu(d, 0.0);
    for (const auto& p : pts)
        for (std::size_t c = 0; c < d; ++c) mu[c] += p[c] / static_cast<double>(m);
    double mean_dist = 0.0;
    for (const auto& p : pts) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (p[c] - mu[c]) * (p[c] - mu[c]);
        mean_dist += std::sqrt(s) / static_cast<double>(m);
    }
    CHECK(compact == doctest::Approx(mean_dist / sigma).epsilon(0.05));
}

TEST_CASE("mahalanobis_compactness: appending a far outlier increases it") {
    // For a non-degenerate cluster the metric is pinned by the trace identity
    // (sum of squared distances = d*(m-1) at zero shrinkage), so the cleanest
    // strict increase starts from a perfectly tight cluster.
    oracles::Dense pts(8, std::vector<double>{1.0, -2.0, 0.5});
    const double before = idforge::mahalanobis_compactness(from_dense(pts), 0.1);
    CHECK(before == 0.0);
    pts.push_back({50.0, 50.0, 50.0});
    const double after = idforge::mahalanobis_compactness(from_dense(pts), 0.1);
    CHECK(after > before);
}

TEST_CASE("mahalanobis_compactness: trace identity at zero shrinkage") {
    // Full-rank data, m > d: sum of squared Mahalanobis distances under the
    // unbiased sample covariance equals d*(m-1) exactly.
    std::mt19937_64 rng(23);
    const std::size_t m = 30, d = 4;
    oracles::Dense pts = oracles::random_dense(rng, m, d);
    const double mean_dist = idforge::mahalanobis_compactness(from_dense(pts), 0.0);
    // mean of sqrt <= sqrt(mean of squares) = sqrt(d*(m-1)/m), with equality
    // only for equal distances; check the bound and a loose lower bound.
    const double rms = std::sqrt(static_cast<double>(d) * (m - 1) / static_cast<double>(m));
    CHECK(mean_dist <= rms + 1e-9);
    CHECK(mean_dist >= 0.5 * rms);
}

TEST_CASE("mahalanobis_compactness: rotation invariance") {
    std::mt19937_64 rng(8);
    const std::size_t d = 6;
    oracles::Dense pts = oracles::random_dense(rng, 15, d);
    const double base = idforge::mahalanobis_compactness(from_dense(pts), 0.2);

    auto q = oracles::random_orthogonal(rng, d);
    oracles::Dense rotated(pts.size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) rotated[i][a] += q[a][b] * pts[i][b];
    const double rot = idforge::mahalanobis_compactness(from_dense(rotated), 0.2);
    CHECK(std::abs(base - rot) <= 1e-8);
}

TEST_CASE("mahalanobis_compactness: singular covariance at zero shrinkage") {
    // d > m-1 makes the sample covariance singular
    std::mt19937_64 rng(3);
    oracles::Dense pts = oracles::random_dense(rng, 4, 8);
    CHECK_THROWS_AS(idforge::mahalanobis_compactness(from_dense(pts), 0.0),
                    idforge::NumericalError);
    CHECK_THROWS_AS(idforge::mahalanobis_compactness(from_dense({{1.0}}), 0.1),
                    idforge::ConfigError);
}

TEST_CASE("filter_by_scores basics") {
    std::mt19937_64 rng(5);
    EmbeddingMatrix e = from_dense(oracles::random_dense(rng, 6, 3));
    std::vector<double> scores{0.5, 0.1, 0.9, 0.2, 0.7, 0.3};

    auto all = idforge::filter_by_scores(e, scores, 6);
    CHECK(all.sample_count() == 6);
    CHECK(all.source_ids == e.source_ids);

    auto one = idforge::filter_by_scores(e, scores, 1);
    CHECK(one.source_ids == std::vector<std::size_t>{1});

    CHECK_THROWS_AS(idforge::filter_by_scores(e, scores, 0), idforge::ConfigError);
    CHECK_THROWS_AS(idforge::filter_by_scores(e, scores, 7), idforge::ConfigError);
}

TEST_CASE("filter_by_scores removes planted outliers under LOF") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    oracles::Dense pts;
    for (int i = 0; i < 10; ++i) pts.push_back({u(rng), u(rng)});
    pts.push_back({4.0, 4.0});
    pts.push_back({-4.0, 3.0});

    EmbeddingMatrix e = from_dense(pts);
    auto scores = idforge::lof_scores(e, 4);
    auto kept = idforge::filter_by_scores(e, scores, 10);
    for (std::size_t id : kept.source_ids) CHECK(id < 10);
}
