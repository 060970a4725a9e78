// idforge: synthetic identity-discovery and re-denoising injection toolkit.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idforge/pipeline.hpp"

namespace {

int dispatch(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const idforge::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const idforge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const idforge::LayoutError& e) {
        std::cerr << "layout error: " << e.what() << '\n';
        return 4;
    } catch (const idforge::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"identity discovery and re-denoising injection at desk scale"};
    app.require_subcommand(1);

    // gen-embeddings -------------------------------------------------------
    auto gen = std::make_shared<idforge::GenOptions>();
    std::int64_t gen_seed = 0;
    auto* cmd_gen = app.add_subcommand("gen-embeddings",
                                       "generate synthetic identity embedding files");
    cmd_gen->add_option("-o,--out", gen->out_prefix, "output path prefix")->required();
    cmd_gen->add_option("--dim", gen->cfg.d, "embedding dimension")->envname("IDFORGE_DIM");
    cmd_gen->add_option("--samples", gen->cfg.m, "samples per identity")
        ->envname("IDFORGE_SAMPLES");
    cmd_gen->add_option("--sigma-in", gen->cfg.sigma_in, "inlier noise scale");
    cmd_gen->add_option("--contamination", gen->cfg.contamination,
                        "fraction of off-identity rows");
    cmd_gen->add_option("--identities", gen->cfg.num_identities, "number of identities");
    cmd_gen->add_option("--seed", gen_seed, "generator seed")->envname("IDFORGE_SEED");
    cmd_gen->add_option("--format", gen->format, "text|bin")->envname("IDFORGE_FORMAT");
    cmd_gen->callback([gen, &gen_seed]() {
        gen->cfg.seed = static_cast<std::uint64_t>(gen_seed);
        idforge::run_gen_embeddings(*gen);
        std::cout << "wrote " << gen->cfg.num_identities << " identity file(s) at "
                  << gen->out_prefix << "*\n";
    });

    // discover -------------------------------------------------------------
    auto dis = std::make_shared<idforge::DiscoverOptions>();
    std::size_t dis_topk = 0;
    auto* cmd_dis = app.add_subcommand("discover", "run iterative identity discovery");
    cmd_dis->add_option("input", dis->input_path, "embedding file")->required();
    cmd_dis->add_option("-o,--report", dis->report_path, "filter report JSON path");
    cmd_dis->add_option("--ratio", dis->cfg.ratio_r, "keep fraction per iteration")
        ->envname("IDFORGE_RATIO");
    cmd_dis->add_option("--iters", dis->cfg.iters_p, "iteration count")
        ->envname("IDFORGE_ITERS");
    cmd_dis->add_option("--topk", dis_topk, "retained singular directions (0 = auto)")
        ->envname("IDFORGE_TOPK");
    cmd_dis->add_flag("--normalize", dis->cfg.normalize_rows, "unit-normalize rows first");
    cmd_dis->add_option("--format", dis->format, "text|bin")->envname("IDFORGE_FORMAT");
    cmd_dis->callback([dis, &dis_topk]() {
        if (dis_topk > 0) dis->cfg.top_k = dis_topk;
        auto res = idforge::run_discover(*dis);
        std::cout << res.summary << '\n';
    });

    // compare ----------------------------------------------------------------
    auto cmp = std::make_shared<idforge::CompareOptions>();
    std::size_t cmp_topk = 0, cmp_lofk = 0;
    double cmp_eps = 0.0;
    auto* cmd_cmp = app.add_subcommand("compare",
                                       "compare discovery against naive/LOF/DBSCAN");
    cmd_cmp->add_option("inputs", cmp->input_paths, "embedding files (one per identity)")
        ->required();
    cmd_cmp->add_option("-o,--csv", cmp->csv_path, "output CSV")->required();
    cmd_cmp->add_option("--ratio", cmp->cfg.ratio_r, "keep fraction per iteration")
        ->envname("IDFORGE_RATIO");
    cmd_cmp->add_option("--iters", cmp->cfg.iters_p, "iteration count")
        ->envname("IDFORGE_ITERS");
    cmd_cmp->add_option("--topk", cmp_topk, "retained singular directions (0 = auto)")
        ->envname("IDFORGE_TOPK");
    cmd_cmp->add_option("--shrinkage", cmp->shrinkage, "covariance shrinkage");
    cmd_cmp->add_option("--lof-k", cmp_lofk, "LOF neighbor count (0 = auto)");
    cmd_cmp->add_option("--dbscan-eps", cmp_eps, "DBSCAN eps (0 = auto)");
    cmd_cmp->add_option("--dbscan-min-pts", cmp->dbscan_min_pts, "DBSCAN min points");
    cmd_cmp->add_option("--format", cmp->format, "text|bin")->envname("IDFORGE_FORMAT");
    cmd_cmp->callback([cmp, &cmp_topk, &cmp_lofk, &cmp_eps]() {
        if (cmp_topk > 0) cmp->cfg.top_k = cmp_topk;
        if (cmp_lofk > 0) cmp->lof_k = cmp_lofk;
        if (cmp_eps > 0.0) cmp->dbscan_eps = cmp_eps;
        idforge::run_compare(*cmp);
        std::cout << "wrote " << cmp->csv_path << '\n';
    });

    // simulate ---------------------------------------------------------------
    auto sim = std::make_shared<idforge::SimulateOptions>();
    auto* cmd_sim = app.add_subcommand("simulate", "run a toy story end to end");
    cmd_sim->add_option("story", sim->story_path, "story JSON file")->required();
    cmd_sim->add_option("-o,--out-dir", sim->out_dir, "output directory")->required();
    cmd_sim->add_option("--latent-side", sim->latent_side, "latent grid side")
        ->envname("IDFORGE_LATENT_SIDE");
    cmd_sim->add_option("--t-prime", sim->t_prime, "re-denoise start timestep")
        ->envname("IDFORGE_T_PRIME");
    cmd_sim->add_option("--k-max", sim->k_max, "max dilation kernel (pixels)")
        ->envname("IDFORGE_K_MAX");
    cmd_sim->add_option("--steps", sim->t, "DDIM sample steps");
    cmd_sim->add_option("--pull", sim->pull, "identity denoiser pull strength");
    cmd_sim->add_option("--sweep-t-prime", sim->sweep_t_prime,
                        "run an ablation over these t' values");
    cmd_sim->callback([sim]() {
        auto res = idforge::run_simulate(*sim);
        std::cout << "simulated " << res.prompts.size() << " prompt(s); outputs in "
                  << sim->out_dir << '\n';
    });

    // report -----------------------------------------------------------------
    auto rep = std::make_shared<idforge::ReportOptions>();
    auto* cmd_rep = app.add_subcommand("report", "render SVG charts from result CSVs");
    cmd_rep->add_option("csvs", rep->csv_paths, "input CSV files")->required();
    cmd_rep->add_option("-o,--out-dir", rep->out_dir, "output directory")->required();
    cmd_rep->callback([rep]() {
        auto man = idforge::run_report(*rep);
        std::cout << "wrote " << man.outputs.size() << " chart(s) to " << rep->out_dir << '\n';
    });

    // replay -----------------------------------------------------------------
    auto replay_path = std::make_shared<std::string>();
    auto* cmd_replay = app.add_subcommand("replay", "re-run a recorded manifest");
    cmd_replay->add_option("manifest", *replay_path, "manifest JSON")->required();
    cmd_replay->callback([replay_path]() {
        auto man = idforge::replay_manifest(*replay_path);
        std::cout << "replayed " << man.command << "; " << man.outputs.size()
                  << " output(s)\n";
    });

    return dispatch(app, argc, argv);
}
