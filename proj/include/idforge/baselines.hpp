#ifndef IDFORGE_BASELINES_HPP
#define IDFORGE_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "idforge/discovery.hpp"
#include "idforge/matrix.hpp"

namespace idforge {

constexpr int kNoiseLabel = -1;

struct OutlierLabels {
    std::vector<int> labels; // cluster index >= 0, or kNoiseLabel
    std::optional<std::vector<double>> scores;
};

namespace detail {

inline std::vector<std::vector<double>> pairwise_distances(const Matrix& m) {
    const std::size_t n = m.rows();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                const double diff = m(i, c) - m(j, c);
                s += diff * diff;
            }
            d[i][j] = d[j][i] = std::sqrt(s);
        }
    }
    return d;
}

} // namespace detail

/// Local outlier factor with Euclidean distances. Points whose k-distance
/// neighborhood collapses to zero distance get lrd = +inf; ratios of two
/// infinite lrds count as 1, so fully duplicated data scores 1 everywhere.
inline std::vector<double> lof_scores(const EmbeddingMatrix& e, std::size_t k_neighbors) {
    const std::size_t n = e.sample_count();
    if (k_neighbors < 2 || k_neighbors >= n)
        throw ConfigError("lof_scores: need 2 <= k_neighbors < m");

    const auto dist = detail::pairwise_distances(e.inner);
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> kdist(n);
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(dist[i][j]);
        std::nth_element(others.begin(),
                         others.begin() + static_cast<std::ptrdiff_t>(k_neighbors - 1),
                         others.end());
        kdist[i] = others[k_neighbors - 1];
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && dist[i][j] <= kdist[i]) nbrs[i].push_back(j);
    }

    std::vector<double> lrd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j : nbrs[i]) sum += std::max(kdist[j], dist[i][j]);
        lrd[i] = sum > 0.0 ? static_cast<double>(nbrs[i].size()) / sum : inf;
    }

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j : nbrs[i]) {
            if (std::isinf(lrd[i]))
                acc += std::isinf(lrd[j]) ? 1.0 : 0.0;
            else
                acc += lrd[j] / lrd[i];
        }
        scores[i] = acc / static_cast<double>(nbrs[i].size());
    }
    return scores;
}

/// Classic DBSCAN; the eps-neighborhood count includes the point itself.
/// Cluster indices are assigned in first-touch (row) order.
inline OutlierLabels dbscan(const EmbeddingMatrix& e, double eps, std::size_t min_pts) {
    if (!(eps > 0.0)) throw ConfigError("dbscan: eps must be > 0");
    if (min_pts < 1) throw ConfigError("dbscan: min_pts must be >= 1");

    const std::size_t n = e.sample_count();
    const auto dist = detail::pairwise_distances(e.inner);

    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (dist[i][j] <= eps) nbrs[i].push_back(j);

    constexpr int kUnvisited = -2;
    std::vector<int> labels(n, kUnvisited);
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kUnvisited) continue;
        if (nbrs[i].size() < min_pts) {
            labels[i] = kNoiseLabel;
            continue;
        }
        const int cid = next_cluster++;
        labels[i] = cid;
        std::deque<std::size_t> frontier(nbrs[i].begin(), nbrs[i].end());
        while (!frontier.empty()) {
            const std::size_t p = frontier.front();
            frontier.pop_front();
            if (labels[p] == kNoiseLabel) labels[p] = cid; // border point
            if (labels[p] != kUnvisited) continue;
            labels[p] = cid;
            if (nbrs[p].size() >= min_pts)
                frontier.insert(frontier.end(), nbrs[p].begin(), nbrs[p].end());
        }
    }

    OutlierLabels out;
    out.labels = std::move(labels);
    return out;
}

/// Mean Mahalanobis distance of each row to the row mean, with a shrinkage-
/// regularized covariance (1-s)*S + s*(tr(S)/d)*I. Lower = more compact.
inline double mahalanobis_compactness(const EmbeddingMatrix& e, double shrinkage) {
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw ConfigError("mahalanobis_compactness: shrinkage must be in [0,1]");
    const std::size_t m = e.sample_count();
    const std::size_t d = e.dim();
    if (m < 2) throw ConfigError("mahalanobis_compactness: need m >= 2");

    const std::vector<double> mu = mean_row(e.inner);
    Matrix dev(m, d);
    double dev_mass = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < d; ++c) {
            dev(i, c) = e.inner(i, c) - mu[c];
            dev_mass += dev(i, c) * dev(i, c);
        }
    if (dev_mass == 0.0) return 0.0;

    // S = dev^T dev / (m-1), then shrink.
    Matrix sigma(d, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double x = dev(i, a);
            if (x == 0.0) continue;
            for (std::size_t b = 0; b < d; ++b) sigma(a, b) += x * dev(i, b);
        }
    double trace = 0.0;
    for (std::size_t a = 0; a < d; ++a) trace += sigma(a, a);
    const double denom = static_cast<double>(m - 1);
    const double ridge = shrinkage * (trace / denom) / static_cast<double>(d);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) sigma(a, b) *= (1.0 - shrinkage) / denom;
        sigma(a, a) += ridge;
    }

    // In-place Cholesky of sigma.
    for (std::size_t j = 0; j < d; ++j) {
        double diag = sigma(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= sigma(j, k) * sigma(j, k);
        if (diag <= 0.0)
            throw NumericalError(
                "mahalanobis_compactness: singular covariance; use a positive shrinkage");
        const double l = std::sqrt(diag);
        sigma(j, j) = l;
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = sigma(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= sigma(i, k) * sigma(j, k);
            sigma(i, j) = s / l;
        }
    }

    double total = 0.0;
    std::vector<double> y(d);
    for (std::size_t i = 0; i < m; ++i) {
        // Solve L y = dev_i; distance^2 = ||y||^2.
        for (std::size_t a = 0; a < d; ++a) {
            double s = dev(i, a);
            for (std::size_t k = 0; k < a; ++k) s -= sigma(a, k) * y[k];
            y[a] = s / sigma(a, a);
        }
        double q = 0.0;
        for (double v : y) q += v * v;
        total += std::sqrt(q);
    }
    return total / static_cast<double>(m);
}

/// Keep the `keep` rows with the smallest scores (ties keep the smaller
/// original index), preserving row order.
inline EmbeddingMatrix filter_by_scores(const EmbeddingMatrix& e,
                                        const std::vector<double>& scores,
                                        std::size_t keep) {
    if (scores.size() != e.sample_count())
        throw DimensionError("filter_by_scores: score length mismatch");
    if (keep < 1 || keep > e.sample_count())
        throw ConfigError("filter_by_scores: keep out of range");
    const std::vector<std::size_t> rows = detail::smallest_error_rows(scores, keep);
    return detail::take_rows(e, rows);
}

/// Rows DBSCAN did not mark as noise. Falls back to all rows when everything
/// is noise so downstream averaging stays defined.
inline EmbeddingMatrix filter_by_labels(const EmbeddingMatrix& e, const OutlierLabels& lab) {
    if (lab.labels.size() != e.sample_count())
        throw DimensionError("filter_by_labels: label length mismatch");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < lab.labels.size(); ++i)
        if (lab.labels[i] != kNoiseLabel) rows.push_back(i);
    if (rows.empty()) {
        rows.resize(e.sample_count());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    return detail::take_rows(e, rows);
}

} // namespace idforge

#endif
