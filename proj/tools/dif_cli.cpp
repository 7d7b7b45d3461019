#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "dif/dif.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitIoConfig = 2;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int threads = 0;
};

dif::ExperimentConfig load_config(const GlobalOpts& g) {
    dif::ExperimentConfig cfg =
        g.config_path.empty() ? dif::default_experiment_config()
                              : dif::load_experiment_config(g.config_path);
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (g.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(g.seed);
    cfg.train.threads = g.threads;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dif: distribution-guided implicit field reconstruction"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config (JSON); built-in default if omitted");
    app.add_option("--out", g.out_dir, "output directory, overrides config out_dir");
    app.add_option("--seed", g.seed, "training seed override");
    app.add_option("--threads", g.threads, "worker threads (0 = auto)")->envname("DIF_THREADS");

    auto* cmd_gen = app.add_subcommand("gen", "write ground-truth mesh and sample CSV");

    auto* cmd_train = app.add_subcommand("train", "train a model per the config");

    std::string ck_path, mesh_out;
    auto* cmd_extract = app.add_subcommand("extract", "run marching cubes on a trained field");
    cmd_extract->add_option("--checkpoint", ck_path, "checkpoint path (default <out>/checkpoint.json)");
    cmd_extract->add_option("--mesh-out", mesh_out, "output mesh path (.obj or .ply)");

    std::string eval_mesh;
    auto* cmd_eval = app.add_subcommand("eval", "metrics of a mesh against the analytic ground truth");
    cmd_eval->add_option("--mesh", eval_mesh, "mesh to evaluate")->required();

    int ablate_seeds = 5;
    auto* cmd_ablate = app.add_subcommand("ablate", "baseline / no-rectifier / full comparison over seeds");
    cmd_ablate->add_option("--seeds", ablate_seeds, "number of seeds per variant");

    std::string prof_ck;
    auto* cmd_profile = app.add_subcommand("profile", "sigma-vs-distance diagnostic profile");
    cmd_profile->add_option("--checkpoint", prof_ck, "checkpoint path (default <out>/checkpoint.json)");

    CLI11_PARSE(app, argc, argv);

    try {
        dif::ExperimentConfig cfg = load_config(g);
        std::string default_ck =
            (std::filesystem::path(cfg.out_dir) / "checkpoint.json").string();

        if (cmd_gen->parsed()) {
            dif::GenResult r = dif::run_gen(cfg);
            std::cout << "ground truth mesh: " << r.mesh_path << "\n";
            std::cout << "sample batch:      " << r.samples_path << "\n";
        } else if (cmd_train->parsed()) {
            dif::TrainOutputs out = dif::run_train(cfg);
            if (!out.fit.log.rows.empty()) {
                const auto& first = out.fit.log.rows.front();
                const auto& last = out.fit.log.rows.back();
                std::cout << "epochs: " << out.fit.log.rows.size() << "  l_rec " << first.l_rec
                          << " -> " << last.l_rec << "\n";
            }
            std::cout << "checkpoint: " << out.fit.checkpoint_path << "\n";
            std::cout << "train log:  " << out.log_path << "\n";
        } else if (cmd_extract->parsed()) {
            std::string ck = ck_path.empty() ? default_ck : ck_path;
            std::string path = dif::run_extract(cfg, ck, mesh_out);
            std::cout << "mesh: " << path << "\n";
        } else if (cmd_eval->parsed()) {
            dif::MetricsReport rep = dif::run_eval(cfg, eval_mesh);
            std::cout << dif::metrics_table(rep);
            std::cout << "report: " << (std::filesystem::path(cfg.out_dir) / "metrics.json").string()
                      << "\n";
        } else if (cmd_ablate->parsed()) {
            dif::AblationResult res = dif::run_ablate(cfg, ablate_seeds);
            std::cout << dif::ablation_table(res);
            for (const auto& row : res.rows)
                if (row.failed)
                    std::cout << "failed: " << dif::train_mode_name(row.mode) << " seed " << row.seed
                              << ": " << row.error << "\n";
            std::cout << "table: " << (std::filesystem::path(cfg.out_dir) / "ablation.csv").string()
                      << "\n";
        } else if (cmd_profile->parsed()) {
            std::string ck = prof_ck.empty() ? default_ck : prof_ck;
            dif::SigmaProfile prof = dif::run_profile(cfg, ck);
            std::cout << "spearman rho(|sdf|, sigma): " << prof.rho << "  (populated bins "
                      << prof.populated() << ")\n";
            std::cout << "profile: "
                      << (std::filesystem::path(cfg.out_dir) / "sigma_profile.json").string() << "\n";
        }
        return kExitOk;
    } catch (const dif::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const dif::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitIoConfig;
    } catch (const dif::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitIoConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kExitIoConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoConfig;
    }
}
