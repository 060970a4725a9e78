#ifndef IDFORGE_DISCOVERY_HPP
#define IDFORGE_DISCOVERY_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <unordered_set>
#include <vector>

#include "idforge/matrix.hpp"

namespace idforge {

/// Rows are identity embeddings; source_ids track original sample indices
/// through the filtering rounds.
struct EmbeddingMatrix {
    Matrix inner;
    std::vector<std::size_t> source_ids;

    EmbeddingMatrix() = default;

    explicit EmbeddingMatrix(Matrix m) : inner(std::move(m)) {
        source_ids.resize(inner.rows());
        std::iota(source_ids.begin(), source_ids.end(), std::size_t{0});
        validate();
    }

    EmbeddingMatrix(Matrix m, std::vector<std::size_t> ids)
        : inner(std::move(m)), source_ids(std::move(ids)) {
        validate();
    }

    std::size_t sample_count() const { return inner.rows(); }
    std::size_t dim() const { return inner.cols(); }

    void validate() const {
        if (inner.rows() == 0 || inner.cols() == 0)
            throw DimensionError("embedding matrix: must be nonempty");
        if (source_ids.size() != inner.rows())
            throw DimensionError("embedding matrix: id count != row count");
        std::unordered_set<std::size_t> seen(source_ids.begin(), source_ids.end());
        if (seen.size() != source_ids.size())
            throw ConfigError("embedding matrix: duplicate source ids");
    }
};

struct DiscoveryConfig {
    std::optional<std::size_t> top_k; // unset -> energy rule
    double ratio_r = 0.6;
    std::size_t iters_p = 3;
    std::size_t min_keep = 1;
    bool normalize_rows = false; // unit-normalize rows before filtering

    void validate() const {
        if (top_k && *top_k < 1) throw ConfigError("top_k must be >= 1");
        if (!(ratio_r > 0.0 && ratio_r <= 1.0))
            throw ConfigError("ratio_r must be in (0,1]");
        if (iters_p < 1) throw ConfigError("iters_p must be >= 1");
        if (min_keep < 1) throw ConfigError("min_keep must be >= 1");
    }
};

struct FilterIteration {
    std::vector<std::size_t> kept_ids;
    std::vector<std::size_t> removed_ids;
    std::vector<double> errors; // over pre-filter rows, in pre-filter order
};

struct FilterReport {
    std::vector<FilterIteration> iterations;
    std::vector<double> final_embedding;
    double retained_fraction = 0.0;
    std::size_t retained_count = 0;
    std::size_t initial_count = 0;
};

/// Smallest direction count capturing >= 95% of squared-singular-value
/// energy, clamped to [1, min(m,d)-1].
inline std::size_t auto_top_k(const std::vector<double>& singular_values,
                              std::size_t m, std::size_t d) {
    const std::size_t q = std::min(m, d);
    const std::size_t cap = q > 1 ? q - 1 : 1;
    double total = 0.0;
    for (double s : singular_values) total += s * s;
    if (total <= 0.0) return 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        acc += singular_values[i] * singular_values[i];
        if (acc >= 0.95 * total)
            return std::clamp<std::size_t>(i + 1, 1, cap);
    }
    return cap;
}

namespace detail {

inline Matrix projector_from_factors(const SvdFactors& f, std::size_t k, std::size_t d) {
    Matrix w(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += f.v(i, t) * f.v(j, t);
            w(i, j) = s;
        }
    return w;
}

} // namespace detail

/// W = V_k V_k^T, the rank-k orthogonal projector onto the dominant
/// right-singular subspace.
inline Matrix reconstruction_matrix(const EmbeddingMatrix& e, std::size_t k) {
    const std::size_t q = std::min(e.sample_count(), e.dim());
    if (k < 1 || k > q)
        throw ConfigError("reconstruction_matrix: k out of range [1, min(m,d)]");
    SvdFactors f = thin_svd(e.inner);
    return detail::projector_from_factors(f, k, e.dim());
}

/// Per-row mean of squared residual entries after projecting through w.
inline std::vector<double> reconstruction_errors(const EmbeddingMatrix& e, const Matrix& w) {
    if (w.rows() != e.dim() || w.cols() != e.dim())
        throw DimensionError("reconstruction_errors: w must be d x d");
    Matrix proj = mat_mul(e.inner, w);
    std::vector<double> errs(e.sample_count(), 0.0);
    for (std::size_t i = 0; i < e.sample_count(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < e.dim(); ++c) {
            const double r = e.inner(i, c) - proj(i, c);
            s += r * r;
        }
        errs[i] = s / static_cast<double>(e.dim());
    }
    return errs;
}

namespace detail {

inline std::size_t keep_count(std::size_t m, const DiscoveryConfig& cfg) {
    const auto floored = static_cast<std::size_t>(static_cast<double>(m) * cfg.ratio_r);
    return std::min(m, std::max(floored, cfg.min_keep));
}

inline std::size_t resolve_k(const EmbeddingMatrix& e, const DiscoveryConfig& cfg,
                             const SvdFactors& f) {
    const std::size_t q = std::min(e.sample_count(), e.dim());
    if (cfg.top_k) return std::clamp<std::size_t>(*cfg.top_k, 1, q);
    return auto_top_k(f.singular_values, e.sample_count(), e.dim());
}

// Indices of the `keep` smallest errors, ties keeping smaller index, result
// sorted ascending so survivor order matches input order.
inline std::vector<std::size_t> smallest_error_rows(const std::vector<double>& errs,
                                                    std::size_t keep) {
    std::vector<std::size_t> idx(errs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return errs[a] < errs[b]; });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline EmbeddingMatrix take_rows(const EmbeddingMatrix& e,
                                 const std::vector<std::size_t>& rows) {
    Matrix m(rows.size(), e.dim());
    std::vector<std::size_t> ids(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        ids[j] = e.source_ids[rows[j]];
        for (std::size_t c = 0; c < e.dim(); ++c) m(j, c) = e.inner(rows[j], c);
    }
    return EmbeddingMatrix(std::move(m), std::move(ids));
}

inline EmbeddingMatrix maybe_normalized(const EmbeddingMatrix& e, bool normalize) {
    if (!normalize) return e;
    Matrix m = e.inner;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double n2 = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) n2 += m(r, c) * m(r, c);
        const double n = std::sqrt(n2);
        if (n > 0.0)
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) /= n;
    }
    return EmbeddingMatrix(std::move(m), e.source_ids);
}

} // namespace detail

/// One filtering round: SVD, projector, per-row errors, keep the
/// max(floor(m*r), min_keep) rows with the smallest errors.
inline std::pair<EmbeddingMatrix, std::vector<std::size_t>>
filter_once(const EmbeddingMatrix& e, const DiscoveryConfig& cfg) {
    cfg.validate();
    SvdFactors f = thin_svd(e.inner);
    const std::size_t k = detail::resolve_k(e, cfg, f);
    Matrix w = detail::projector_from_factors(f, k, e.dim());
    std::vector<double> errs = reconstruction_errors(e, w);
    const std::size_t keep = detail::keep_count(e.sample_count(), cfg);
    std::vector<std::size_t> kept_rows = detail::smallest_error_rows(errs, keep);

    std::vector<char> is_kept(e.sample_count(), 0);
    for (std::size_t r : kept_rows) is_kept[r] = 1;
    std::vector<std::size_t> removed;
    for (std::size_t r = 0; r < e.sample_count(); ++r)
        if (!is_kept[r]) removed.push_back(e.source_ids[r]);

    return {detail::take_rows(e, kept_rows), std::move(removed)};
}

/// Iterative identity discovery: iters_p rounds of trim-by-reconstruction-
/// error, then average the survivors.
inline FilterReport discover_identity(const EmbeddingMatrix& input,
                                      const DiscoveryConfig& cfg) {
    cfg.validate();
    FilterReport report;
    report.initial_count = input.sample_count();

    EmbeddingMatrix cur = detail::maybe_normalized(input, cfg.normalize_rows);
    for (std::size_t it = 0; it < cfg.iters_p; ++it) {
        SvdFactors f = thin_svd(cur.inner);
        const std::size_t k = detail::resolve_k(cur, cfg, f);
        Matrix w = detail::projector_from_factors(f, k, cur.dim());
        std::vector<double> errs = reconstruction_errors(cur, w);
        const std::size_t keep = detail::keep_count(cur.sample_count(), cfg);
        std::vector<std::size_t> kept_rows = detail::smallest_error_rows(errs, keep);

        FilterIteration rec;
        rec.errors = errs;
        std::vector<char> is_kept(cur.sample_count(), 0);
        for (std::size_t r : kept_rows) is_kept[r] = 1;
        for (std::size_t r = 0; r < cur.sample_count(); ++r) {
            if (is_kept[r]) rec.kept_ids.push_back(cur.source_ids[r]);
            else rec.removed_ids.push_back(cur.source_ids[r]);
        }
        cur = detail::take_rows(cur, kept_rows);
        report.iterations.push_back(std::move(rec));
    }

    report.final_embedding = mean_row(cur.inner);
    report.retained_count = cur.sample_count();
    report.retained_fraction = static_cast<double>(cur.sample_count()) /
                               static_cast<double>(input.sample_count());
    return report;
}

/// Plain mean of all rows, the naive-averaging baseline.
inline std::vector<double> naive_average(const EmbeddingMatrix& e) {
    return mean_row(e.inner);
}

} // namespace idforge

#endif
