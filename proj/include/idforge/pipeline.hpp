#ifndef IDFORGE_PIPELINE_HPP
#define IDFORGE_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idforge/baselines.hpp"
#include "idforge/diffusion.hpp"
#include "idforge/discovery.hpp"
#include "idforge/injection.hpp"
#include "idforge/io.hpp"
#include "idforge/report_svg.hpp"
#include "idforge/synthetic.hpp"

namespace idforge {

// ---------------------------------------------------------------------------
// Manifests

struct RunManifest {
    std::string command;
    nlohmann::json options;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double timing_ms = 0.0;

    nlohmann::json to_json() const {
        return {{"command", command},
                {"options", options},
                {"inputs", inputs},
                {"outputs", outputs},
                {"timing_ms", timing_ms},
                {"format_versions",
                 {{"emb_text", "v1"}, {"emb_binary", 1}, {"mask", "P5"}, {"story", 1}}}};
    }
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << m.to_json().dump(2) << '\n';
}

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

} // namespace detail

// ---------------------------------------------------------------------------
// gen-embeddings

struct GenOptions {
    SyntheticEmbeddingConfig cfg;
    std::string out_prefix;
    std::string format = "text"; // text | bin

    nlohmann::json to_json() const {
        return {{"d", cfg.d}, {"m", cfg.m}, {"sigma_in", cfg.sigma_in},
                {"contamination", cfg.contamination}, {"num_identities", cfg.num_identities},
                {"subspace_dim", cfg.subspace_dim}, {"seed", cfg.seed},
                {"out_prefix", out_prefix}, {"format", format}};
    }
    static GenOptions from_json(const nlohmann::json& j) {
        GenOptions o;
        o.cfg.d = j.at("d");
        o.cfg.m = j.at("m");
        o.cfg.sigma_in = j.at("sigma_in");
        o.cfg.contamination = j.at("contamination");
        o.cfg.num_identities = j.at("num_identities");
        o.cfg.subspace_dim = j.at("subspace_dim");
        o.cfg.seed = j.at("seed");
        o.out_prefix = j.at("out_prefix");
        o.format = j.at("format");
        return o;
    }
};

inline RunManifest run_gen_embeddings(const GenOptions& opt) {
    detail::Stopwatch sw;
    if (opt.format != "text" && opt.format != "bin")
        throw ConfigError("gen-embeddings: format must be text or bin");
    detail::ensure_parent_dir(opt.out_prefix);
    const auto identities = generate_identities(opt.cfg);

    RunManifest man;
    man.command = "gen-embeddings";
    man.options = opt.to_json();
    for (std::size_t i = 0; i < identities.size(); ++i) {
        const std::string stem = opt.out_prefix + "_id" + std::to_string(i);
        if (opt.format == "text") {
            const std::string path = stem + ".emb";
            write_embeddings_text(path, identities[i].embeddings.inner,
                                  identities[i].inlier_labels);
            man.outputs.push_back(path);
        } else {
            const std::string path = stem + ".embf";
            write_embeddings_binary(path, identities[i].embeddings.inner);
            const std::string lpath = stem + ".labels";
            std::ofstream lf(lpath);
            for (auto l : identities[i].inlier_labels) lf << static_cast<int>(l) << '\n';
            man.outputs.push_back(path);
            man.outputs.push_back(lpath);
        }
    }
    man.timing_ms = sw.ms();
    write_manifest(opt.out_prefix + "_manifest.json", man);
    return man;
}

// ---------------------------------------------------------------------------
// discover

struct DiscoverOptions {
    std::string input_path;
    std::string format = "text";
    std::string report_path;
    DiscoveryConfig cfg;

    nlohmann::json to_json() const {
        nlohmann::json j{{"input_path", input_path}, {"format", format},
                         {"report_path", report_path}, {"ratio", cfg.ratio_r},
                         {"iters", cfg.iters_p}, {"min_keep", cfg.min_keep},
                         {"normalize", cfg.normalize_rows}};
        if (cfg.top_k) j["topk"] = *cfg.top_k;
        return j;
    }
    static DiscoverOptions from_json(const nlohmann::json& j) {
        DiscoverOptions o;
        o.input_path = j.at("input_path");
        o.format = j.at("format");
        o.report_path = j.at("report_path");
        o.cfg.ratio_r = j.at("ratio");
        o.cfg.iters_p = j.at("iters");
        o.cfg.min_keep = j.at("min_keep");
        o.cfg.normalize_rows = j.at("normalize");
        if (j.contains("topk")) o.cfg.top_k = j.at("topk").get<std::size_t>();
        return o;
    }
};

inline Matrix load_embedding_values(const std::string& path, const std::string& format,
                                    std::optional<std::vector<std::uint8_t>>* labels = nullptr) {
    if (format == "text") {
        LabeledEmbeddings le = read_embeddings_text(path);
        if (labels) *labels = le.labels;
        return std::move(le.values);
    }
    if (format == "bin") {
        if (labels) {
            const std::string lpath =
                std::filesystem::path(path).replace_extension(".labels").string();
            if (std::filesystem::exists(lpath)) {
                std::ifstream lf(lpath);
                std::vector<std::uint8_t> lab;
                int v;
                while (lf >> v) lab.push_back(static_cast<std::uint8_t>(v));
                *labels = std::move(lab);
            }
        }
        return read_embeddings_binary(path);
    }
    throw ConfigError("format must be text or bin");
}

struct DiscoverResult {
    FilterReport report;
    std::string summary;
    RunManifest manifest;
};

inline DiscoverResult run_discover(const DiscoverOptions& opt) {
    detail::Stopwatch sw;
    opt.cfg.validate();
    Matrix values = load_embedding_values(opt.input_path, opt.format);
    EmbeddingMatrix emb(std::move(values));
    FilterReport report = discover_identity(emb, opt.cfg);

    DiscoverResult res;
    res.report = report;
    std::ostringstream os;
    os << "retained " << report.retained_count << "/" << report.initial_count
       << " (fraction " << report.retained_fraction << ")";
    res.summary = os.str();

    res.manifest.command = "discover";
    res.manifest.options = opt.to_json();
    res.manifest.inputs.push_back(opt.input_path);
    if (!opt.report_path.empty()) {
        detail::ensure_parent_dir(opt.report_path);
        std::ofstream f(opt.report_path);
        if (!f) throw ParseError("cannot open for writing: " + opt.report_path);
        f << filter_report_to_json(report).dump(2) << '\n';
        res.manifest.outputs.push_back(opt.report_path);
        res.manifest.timing_ms = sw.ms();
        write_manifest(opt.report_path + ".manifest.json", res.manifest);
    } else {
        res.manifest.timing_ms = sw.ms();
    }
    return res;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
    std::vector<std::string> input_paths; // one file per identity
    std::string format = "text";
    std::string csv_path;
    DiscoveryConfig cfg;
    double shrinkage = 0.1;
    std::optional<std::size_t> lof_k;     // default max(5, m/10)
    std::optional<double> dbscan_eps;     // default median pairwise distance * 0.5
    std::size_t dbscan_min_pts = 4;

    nlohmann::json to_json() const {
        nlohmann::json j{{"input_paths", input_paths}, {"format", format},
                         {"csv_path", csv_path}, {"ratio", cfg.ratio_r},
                         {"iters", cfg.iters_p}, {"shrinkage", shrinkage},
                         {"dbscan_min_pts", dbscan_min_pts}};
        if (cfg.top_k) j["topk"] = *cfg.top_k;
        if (lof_k) j["lof_k"] = *lof_k;
        if (dbscan_eps) j["dbscan_eps"] = *dbscan_eps;
        return j;
    }
    static CompareOptions from_json(const nlohmann::json& j) {
        CompareOptions o;
        o.input_paths = j.at("input_paths").get<std::vector<std::string>>();
        o.format = j.at("format");
        o.csv_path = j.at("csv_path");
        o.cfg.ratio_r = j.at("ratio");
        o.cfg.iters_p = j.at("iters");
        o.shrinkage = j.at("shrinkage");
        o.dbscan_min_pts = j.at("dbscan_min_pts");
        if (j.contains("topk")) o.cfg.top_k = j.at("topk").get<std::size_t>();
        if (j.contains("lof_k")) o.lof_k = j.at("lof_k").get<std::size_t>();
        if (j.contains("dbscan_eps")) o.dbscan_eps = j.at("dbscan_eps").get<double>();
        return o;
    }
};

struct CompareRow {
    std::string identity;
    std::string method;
    double compactness = 0.0;
    std::size_t retained = 0;
    std::optional<double> precision;
    std::optional<double> recall;
};

namespace detail {

inline double median_pairwise_distance(const Matrix& m) {
    auto d = pairwise_distances(m);
    std::vector<double> flat;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.rows(); ++j) flat.push_back(d[i][j]);
    if (flat.empty()) return 1.0;
    std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(flat.size() / 2),
                     flat.end());
    return flat[flat.size() / 2];
}

inline std::pair<double, double> precision_recall(const EmbeddingMatrix& kept,
                                                  const std::vector<std::uint8_t>& labels) {
    std::size_t tp = 0;
    for (std::size_t id : kept.source_ids)
        if (labels[id]) ++tp;
    std::size_t total_in = 0;
    for (auto l : labels)
        if (l) ++total_in;
    const double prec = kept.sample_count()
        ? static_cast<double>(tp) / static_cast<double>(kept.sample_count()) : 0.0;
    const double rec = total_in ? static_cast<double>(tp) / static_cast<double>(total_in) : 1.0;
    return {prec, rec};
}

} // namespace detail

/// The four-way comparison on one identity matrix. Kept separate from file
/// handling so tests can drive it with in-memory data.
inline std::vector<CompareRow> compare_methods(
    const std::string& identity_name, const EmbeddingMatrix& emb,
    const std::optional<std::vector<std::uint8_t>>& labels, const CompareOptions& opt) {
    const std::size_t m = emb.sample_count();
    std::vector<CompareRow> rows;

    auto add = [&](const std::string& method, const EmbeddingMatrix& kept) {
        CompareRow r;
        r.identity = identity_name;
        r.method = method;
        r.retained = kept.sample_count();
        r.compactness = kept.sample_count() >= 2
            ? mahalanobis_compactness(kept, opt.shrinkage) : 0.0;
        if (labels) {
            auto [p, rec] = detail::precision_recall(kept, *labels);
            r.precision = p;
            r.recall = rec;
        }
        rows.push_back(std::move(r));
    };

    add("naive", emb);

    FilterReport rep = discover_identity(emb, opt.cfg);
    std::vector<std::size_t> kept_rows;
    {
        const auto& final_ids = rep.iterations.back().kept_ids;
        std::vector<char> keep(m, 0);
        for (std::size_t id : final_ids) keep[id] = 1;
        for (std::size_t i = 0; i < m; ++i)
            if (keep[i]) kept_rows.push_back(i);
    }
    add("discovery", detail::take_rows(emb, kept_rows));

    const std::size_t lof_k = opt.lof_k ? *opt.lof_k : std::max<std::size_t>(5, m / 10);
    if (lof_k >= 2 && lof_k < m) {
        auto scores = lof_scores(emb, lof_k);
        add("lof", filter_by_scores(emb, scores, rep.retained_count));
    }

    double eps = opt.dbscan_eps
        ? *opt.dbscan_eps : detail::median_pairwise_distance(emb.inner) * 0.5;
    if (!opt.dbscan_eps && eps <= 0.0) eps = 1.0; // degenerate identical inputs
    auto lab = dbscan(emb, eps, opt.dbscan_min_pts);
    add("dbscan", filter_by_labels(emb, lab));

    return rows;
}

inline RunManifest run_compare(const CompareOptions& opt,
                               std::vector<CompareRow>* out_rows = nullptr) {
    detail::Stopwatch sw;
    opt.cfg.validate();
    if (opt.input_paths.empty())
        throw ConfigError("compare: need at least one input file");

    std::vector<CompareRow> rows;
    for (std::size_t i = 0; i < opt.input_paths.size(); ++i) {
        std::optional<std::vector<std::uint8_t>> labels;
        Matrix values = load_embedding_values(opt.input_paths[i], opt.format, &labels);
        EmbeddingMatrix emb(std::move(values));
        auto part = compare_methods("id" + std::to_string(i), emb, labels, opt);
        rows.insert(rows.end(), part.begin(), part.end());
    }

    detail::ensure_parent_dir(opt.csv_path);
    std::ofstream f(opt.csv_path);
    if (!f) throw ParseError("cannot open for writing: " + opt.csv_path);
    f << "identity,method,compactness,retained,precision,recall\n";
    f.precision(12);
    for (const auto& r : rows) {
        f << r.identity << ',' << r.method << ',' << r.compactness << ',' << r.retained << ',';
        if (r.precision) f << *r.precision;
        f << ',';
        if (r.recall) f << *r.recall;
        f << '\n';
    }

    RunManifest man;
    man.command = "compare";
    man.options = opt.to_json();
    man.inputs = opt.input_paths;
    man.outputs.push_back(opt.csv_path);
    man.timing_ms = sw.ms();
    write_manifest(opt.csv_path + ".manifest.json", man);
    if (out_rows) *out_rows = std::move(rows);
    return man;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string story_path;
    std::string out_dir;
    std::size_t latent_side = 32;
    std::size_t mask_scale = 8; // mask/image side = mask_scale * latent_side
    std::size_t t = 50;
    std::size_t train_steps = 1000;
    std::size_t t_prime = 40;
    std::size_t k_max = 50;
    double pull = 0.15;
    std::size_t emb_d = 512;
    std::size_t emb_m = 64;
    double contamination = 0.3;
    std::vector<std::size_t> sweep_t_prime; // nonempty -> ablation CSV

    nlohmann::json to_json() const {
        return {{"story_path", story_path}, {"out_dir", out_dir},
                {"latent_side", latent_side}, {"mask_scale", mask_scale}, {"t", t},
                {"train_steps", train_steps}, {"t_prime", t_prime}, {"k_max", k_max},
                {"pull", pull}, {"emb_d", emb_d}, {"emb_m", emb_m},
                {"contamination", contamination}, {"sweep_t_prime", sweep_t_prime}};
    }
    static SimulateOptions from_json(const nlohmann::json& j) {
        SimulateOptions o;
        o.story_path = j.at("story_path");
        o.out_dir = j.at("out_dir");
        o.latent_side = j.at("latent_side");
        o.mask_scale = j.at("mask_scale");
        o.t = j.at("t");
        o.train_steps = j.at("train_steps");
        o.t_prime = j.at("t_prime");
        o.k_max = j.at("k_max");
        o.pull = j.at("pull");
        o.emb_d = j.at("emb_d");
        o.emb_m = j.at("emb_m");
        o.contamination = j.at("contamination");
        o.sweep_t_prime = j.at("sweep_t_prime").get<std::vector<std::size_t>>();
        return o;
    }
};

namespace detail {

inline double pearson_over_mask(const LatentGrid& a, const LatentGrid& b, const Mask& m) {
    double sa = 0, sb = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) { sa += a.v[i]; sb += b.v[i]; ++n; }
    if (n < 2) return 0.0;
    const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) {
            const double da = a.v[i] - ma, db = b.v[i] - mb;
            cov += da * db;
            va += da * da;
            vb += db * db;
        }
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

inline double rms_over_mask(const LatentGrid& a, const LatentGrid& b, const Mask& m) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) {
            const double d = a.v[i] - b.v[i];
            s += d * d;
            ++n;
        }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
}

// Constant noise direction of an oracle-driven trajectory, recovered from
// its initial latent.
inline LatentGrid trajectory_noise(const Trajectory& traj, const LatentGrid& target,
                                   const Schedule& schedule) {
    const double abar = schedule.alpha_bars[schedule.sample_indices.back()];
    const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
    LatentGrid eps(traj.side());
    for (std::size_t i = 0; i < eps.cells(); ++i)
        eps.v[i] = (traj.latents.front().v[i] - sa * target.v[i]) / sb;
    return eps;
}

} // namespace detail

struct SimulatedPrompt {
    LatentGrid output_z0;
    LatentGrid cached_z0;
    MaskSet masks; // full resolution, original (undilated)
    std::vector<std::string> tokens;
    double background_deviation = 0.0;     // RMS vs cached z_0 over background cells
    std::vector<double> identity_corr;     // per character, over its mask cells
};

struct SimulateResult {
    std::vector<SimulatedPrompt> prompts;
    std::vector<std::vector<double>> identity_embeddings; // per character
    RunManifest manifest;
};

inline SimulateResult run_simulate(const SimulateOptions& opt) {
    detail::Stopwatch sw;
    const StorySpec story = read_story(opt.story_path);
    std::filesystem::create_directories(opt.out_dir);

    const Schedule schedule = make_schedule(opt.train_steps, opt.t);
    const auto seed = static_cast<std::uint64_t>(story.seed);

    // Per-character identity discovery over synthetic embeddings, then a
    // procedural identity-target grid derived from the result.
    std::vector<std::string> char_tokens;
    std::vector<LatentGrid> id_targets;
    std::vector<std::vector<double>> id_embeddings;
    for (std::size_t c = 0; c < story.characters.size(); ++c) {
        SyntheticEmbeddingConfig ecfg;
        ecfg.d = opt.emb_d;
        ecfg.m = opt.emb_m;
        ecfg.contamination = opt.contamination;
        ecfg.seed = seed * 1000003ULL + c;
        auto ids = generate_identities(ecfg);
        DiscoveryConfig dcfg;
        FilterReport rep = discover_identity(ids[0].embeddings, dcfg);
        id_embeddings.push_back(rep.final_embedding);
        id_targets.push_back(identity_target_grid(rep.final_embedding, opt.latent_side));
        char_tokens.push_back(StorySpec::token_of(story.characters[c]));
    }

    RunManifest man;
    man.command = "simulate";
    man.options = opt.to_json();
    man.inputs.push_back(opt.story_path);

    std::vector<std::size_t> sweep = opt.sweep_t_prime;
    const bool sweeping = !sweep.empty();
    if (!sweeping) sweep.push_back(opt.t_prime);

    std::ofstream diag(opt.out_dir + "/diagnostics.csv");
    diag << "prompt,t_prime,characters,background_deviation,identity_correlation\n";
    diag.precision(12);
    man.outputs.push_back(opt.out_dir + "/diagnostics.csv");

    SimulateResult result;
    for (std::size_t pi = 0; pi < story.prompts.size(); ++pi) {
        const std::string& prompt = story.prompts[pi];
        const std::uint64_t pseed = seed + 17ULL * (pi + 1);

        const LatentGrid tmpl = prompt_to_target(prompt, opt.latent_side, pseed);
        OracleDenoiser tmpl_denoiser(tmpl, schedule);
        Trajectory traj = sample_with_cache(tmpl_denoiser, prompt, std::nullopt, pseed,
                                            schedule, opt.latent_side);
        const LatentGrid base_noise = detail::trajectory_noise(traj, tmpl, schedule);

        const std::vector<std::string> tokens = character_tokens(prompt);
        const std::size_t s = tokens.size();
        const std::size_t image_side = opt.mask_scale * opt.latent_side;
        const LatentGrid image = prompt_to_target(prompt, image_side, pseed);
        MaskSet masks = s > 0 ? extract_masks(image, s)
                              : make_mask_set({}, image_side);

        std::vector<IdentityPullDenoiser> denoisers;
        std::vector<CharacterIdentity> identities;
        denoisers.reserve(s);
        for (const auto& tok : tokens) {
            std::size_t ci = 0;
            for (; ci < char_tokens.size(); ++ci)
                if (char_tokens[ci] == tok) break;
            if (ci == char_tokens.size())
                throw ConfigError("simulate: prompt token '" + tok + "' has no character");
            denoisers.emplace_back(id_targets[ci], base_noise, opt.pull, schedule);
            identities.push_back({story.characters[ci], id_embeddings[ci], nullptr});
        }
        for (std::size_t j = 0; j < s; ++j) identities[j].denoiser = &denoisers[j];

        for (std::size_t t_prime : sweep) {
            InjectionConfig icfg;
            icfg.start_t_prime = t_prime;
            icfg.k_max = opt.k_max;
            LatentGrid z0 = redenoise(traj, masks, identities, icfg, schedule);

            SimulatedPrompt sp;
            sp.cached_z0 = traj.latents.back();
            sp.masks = masks;
            sp.tokens = tokens;

            Mask bg_latent = s > 0
                ? downsample_mask(masks.background, opt.latent_side)
                : Mask(opt.latent_side, std::vector<std::uint8_t>(
                      opt.latent_side * opt.latent_side, 1));
            sp.background_deviation = detail::rms_over_mask(z0, sp.cached_z0, bg_latent);
            double mean_corr = 0.0;
            for (std::size_t j = 0; j < s; ++j) {
                Mask mj = downsample_mask(masks.characters[j], opt.latent_side);
                std::size_t ci = 0;
                for (; ci < char_tokens.size(); ++ci)
                    if (char_tokens[ci] == tokens[j]) break;
                const double corr = detail::pearson_over_mask(z0, id_targets[ci], mj);
                sp.identity_corr.push_back(corr);
                mean_corr += corr;
            }
            if (s > 0) mean_corr /= static_cast<double>(s);

            diag << pi << ',' << t_prime << ',' << s << ',' << sp.background_deviation << ','
                 << mean_corr << '\n';

            if (!sweeping || t_prime == opt.t_prime) {
                const std::string zpath = opt.out_dir + "/prompt" + std::to_string(pi) +
                                          "_z0.embf";
                write_latent_grid(zpath, z0);
                man.outputs.push_back(zpath);
                sp.output_z0 = std::move(z0);
                result.prompts.push_back(std::move(sp));
            }
        }
    }

    result.identity_embeddings = std::move(id_embeddings);
    man.timing_ms = sw.ms();
    write_manifest(opt.out_dir + "/manifest.json", man);
    result.manifest = std::move(man);
    return result;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
    std::vector<std::string> csv_paths;
    std::string out_dir;

    nlohmann::json to_json() const {
        return {{"csv_paths", csv_paths}, {"out_dir", out_dir}};
    }
    static ReportOptions from_json(const nlohmann::json& j) {
        ReportOptions o;
        o.csv_paths = j.at("csv_paths").get<std::vector<std::string>>();
        o.out_dir = j.at("out_dir");
        return o;
    }
};

inline RunManifest run_report(const ReportOptions& opt) {
    detail::Stopwatch sw;
    if (opt.csv_paths.empty()) throw ConfigError("report: need at least one CSV");
    std::filesystem::create_directories(opt.out_dir);

    RunManifest man;
    man.command = "report";
    man.options = opt.to_json();
    man.inputs = opt.csv_paths;
    for (const auto& path : opt.csv_paths) {
        CsvTable t = read_csv(path);
        const std::string stem = std::filesystem::path(path).stem().string();
        const std::string out = opt.out_dir + "/" + stem + ".svg";
        if (t.has_column("t_prime")) {
            write_line_chart_svg(out, t, "t_prime",
                                 {"background_deviation", "identity_correlation"});
        } else if (t.has_column("method") && t.has_column("compactness")) {
            write_bar_chart_svg(out, t, "identity", "method", "compactness");
        } else {
            throw ParseError(path + ": unrecognized CSV layout for reporting");
        }
        man.outputs.push_back(out);
    }
    man.timing_ms = sw.ms();
    write_manifest(opt.out_dir + "/report_manifest.json", man);
    return man;
}

// ---------------------------------------------------------------------------
// replay

inline RunManifest replay_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    const std::string cmd = j.at("command");
    const nlohmann::json& opt = j.at("options");
    if (cmd == "gen-embeddings") return run_gen_embeddings(GenOptions::from_json(opt));
    if (cmd == "discover") return run_discover(DiscoverOptions::from_json(opt)).manifest;
    if (cmd == "compare") return run_compare(CompareOptions::from_json(opt));
    if (cmd == "simulate") return run_simulate(SimulateOptions::from_json(opt)).manifest;
    if (cmd == "report") return run_report(ReportOptions::from_json(opt));
    throw ConfigError("replay: unknown command '" + cmd + "'");
}

} // namespace idforge

#endif
