#pragma once

#include <filesystem>
#include <iomanip>
#include <sstream>

#include "dif/config.hpp"
#include "dif/marching_cubes.hpp"
#include "dif/metrics.hpp"

namespace dif {

namespace fs = std::filesystem;

inline void write_config_snapshot(const ExperimentConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "config.json");
    out << config_to_json(cfg).dump(2) << "\n";
}

// Ground-truth mesh: marching cubes on the analytic smooth occupancy.
inline TriMesh ground_truth_mesh(const ExperimentConfig& cfg, int resolution = 0) {
    int res = resolution > 0 ? resolution : cfg.extract.resolution;
    FieldGrid grid = evaluate_grid(analytic_occupancy_field(cfg.target, cfg.train.occ),
                                   cfg.train.bbox, res, cfg.train.threads);
    return marching_cubes(grid, 0.5);
}

// ---------------------------------------------------------------------------
// gen: ground-truth mesh + inspection sample CSV

struct GenResult {
    std::string mesh_path;
    std::string samples_path;
};

inline GenResult run_gen(const ExperimentConfig& cfg) {
    write_config_snapshot(cfg, cfg.out_dir);
    GenResult r;
    TriMesh gt = ground_truth_mesh(cfg);
    if (gt.empty()) throw NumericError("gen: ground-truth surface not found in bbox");
    r.mesh_path = (fs::path(cfg.out_dir) / "gt_mesh.obj").string();
    write_mesh(gt, r.mesh_path);

    std::size_t n = std::min<std::size_t>(cfg.train.samples_per_epoch, 4096);
    SampleBatch batch = sample_training_points(cfg.target, n, cfg.train.mix, cfg.train.noise_sd,
                                               cfg.train.bbox, cfg.train.seed, cfg.train.occ,
                                               cfg.train.design);
    r.samples_path = (fs::path(cfg.out_dir) / "samples.csv").string();
    std::ofstream out(r.samples_path);
    out << "x,y,z,gt_sdf,gt_occ,designed_mu,designed_sigma\n";
    for (std::size_t i = 0; i < batch.size(); ++i)
        out << batch.points[i].x << "," << batch.points[i].y << "," << batch.points[i].z << ","
            << batch.gt_sdf[i] << "," << batch.gt_occ[i] << "," << batch.designed_mu[i] << ","
            << batch.designed_sigma[i] << "\n";
    return r;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutputs {
    FitResult fit;
    std::string log_path;
};

inline TrainOutputs run_train(const ExperimentConfig& cfg) {
    write_config_snapshot(cfg, cfg.out_dir);
    TrainOutputs out;
    out.fit = fit(cfg.train, cfg.target, cfg.prior, cfg.out_dir);
    out.log_path = (fs::path(cfg.out_dir) / "trainlog.csv").string();
    out.fit.log.write_csv(out.log_path);
    return out;
}

// ---------------------------------------------------------------------------
// extract

inline TriMesh extract_mesh(const TrainedModel& model, const ExperimentConfig& cfg) {
    FieldGrid grid = evaluate_grid(model, cfg.target, cfg.prior, cfg.train.bbox,
                                   cfg.extract.resolution, cfg.extract.mode, cfg.train.threads);
    return marching_cubes(grid, 0.5);
}

inline std::string run_extract(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                               std::string out_path = "") {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    TriMesh mesh = extract_mesh(ck.model, cfg);
    if (mesh.empty())
        throw NumericError("extract: empty surface (no 0.5 crossing); refusing to write mesh");
    if (out_path.empty()) out_path = (fs::path(cfg.out_dir) / "mesh.obj").string();
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    write_mesh(mesh, out_path);
    return out_path;
}

// ---------------------------------------------------------------------------
// eval

inline MetricsReport evaluate_mesh(const TriMesh& recon, const ExperimentConfig& cfg,
                                   const TriMesh& gt) {
    MetricsReport rep;
    rep.n_samples = cfg.metrics.samples;
    rep.seed = cfg.metrics.seed;
    rep.chamfer = chamfer(recon, gt, cfg.metrics.samples, cfg.metrics.seed);
    Rng rng(mix_seed(cfg.metrics.seed, 0x925ULL));
    std::vector<Vec3> gt_points;
    gt_points.reserve(cfg.metrics.samples);
    for (std::size_t i = 0; i < cfg.metrics.samples; ++i)
        gt_points.push_back(sample_surface_point(cfg.target, rng));
    rep.p2s = p2s(gt_points, recon);
    rep.normal_consistency = normal_consistency(recon, gt, cfg.metrics.samples, cfg.metrics.seed);
    return rep;
}

inline std::string metrics_table(const MetricsReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(20) << "metric" << std::right << std::setw(12) << "value" << "\n";
    os << std::left << std::setw(20) << "chamfer" << std::right << std::setw(12) << std::fixed
       << std::setprecision(6) << r.chamfer << "\n";
    os << std::left << std::setw(20) << "p2s" << std::right << std::setw(12) << r.p2s << "\n";
    os << std::left << std::setw(20) << "normal_consistency" << std::right << std::setw(12)
       << r.normal_consistency << "\n";
    return os.str();
}

inline MetricsReport run_eval(const ExperimentConfig& cfg, const std::string& mesh_path) {
    TriMesh recon = read_mesh(mesh_path);
    TriMesh gt = ground_truth_mesh(cfg);
    MetricsReport rep = evaluate_mesh(recon, cfg, gt);
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "metrics.json");
    out << to_json(rep).dump(2) << "\n";
    return rep;
}

// ---------------------------------------------------------------------------
// ablate: {baseline, dif_no_rectifier, dif} x seeds

struct AblationRow {
    TrainMode mode;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    bool failed = false;
    std::string error;
};

struct AblationResult {
    std::vector<AblationRow> rows;

    std::vector<const AblationRow*> variant(TrainMode m) const {
        std::vector<const AblationRow*> v;
        for (const auto& r : rows)
            if (r.mode == m && !r.failed) v.push_back(&r);
        return v;
    }
};

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    v = xs.size() > 1 ? v / static_cast<double>(xs.size() - 1) : 0.0;
    return {m, std::sqrt(v)};
}

inline AblationResult run_ablate(const ExperimentConfig& cfg, int n_seeds = 5) {
    write_config_snapshot(cfg, cfg.out_dir);
    TriMesh gt = ground_truth_mesh(cfg);
    AblationResult result;
    const TrainMode variants[3] = {TrainMode::Baseline, TrainMode::DifNoRectifier, TrainMode::Dif};
    for (TrainMode mode : variants) {
        for (int s = 0; s < n_seeds; ++s) {
            AblationRow row;
            row.mode = mode;
            row.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
            try {
                ExperimentConfig vcfg = cfg;
                vcfg.train.mode = mode;
                vcfg.train.seed = row.seed;
                FitResult fitres = fit(vcfg.train, vcfg.target, vcfg.prior, "");
                TriMesh mesh = extract_mesh(fitres.model, vcfg);
                if (mesh.empty()) throw NumericError("ablate: empty extracted surface");
                row.metrics = evaluate_mesh(mesh, vcfg, gt);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
            result.rows.push_back(std::move(row));
        }
    }

    std::ofstream csv(fs::path(cfg.out_dir) / "ablation.csv");
    csv << "mode,seed,chamfer,p2s,normal_consistency,failed\n";
    for (const auto& r : result.rows)
        csv << train_mode_name(r.mode) << "," << r.seed << "," << r.metrics.chamfer << ","
            << r.metrics.p2s << "," << r.metrics.normal_consistency << "," << (r.failed ? 1 : 0)
            << "\n";
    return result;
}

inline std::string ablation_table(const AblationResult& res) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "variant" << std::right << std::setw(22)
       << "chamfer (mean+/-sd)" << std::setw(22) << "p2s (mean+/-sd)" << std::setw(10) << "runs"
       << "\n";
    for (TrainMode mode : {TrainMode::Baseline, TrainMode::DifNoRectifier, TrainMode::Dif}) {
        auto rows = res.variant(mode);
        std::vector<double> ch, ps;
        for (const auto* r : rows) {
            ch.push_back(r->metrics.chamfer);
            ps.push_back(r->metrics.p2s);
        }
        auto [cm, cs] = mean_sd(ch);
        auto [pm, psd] = mean_sd(ps);
        std::ostringstream c1, c2;
        c1 << std::fixed << std::setprecision(5) << cm << " +/- " << cs;
        c2 << std::fixed << std::setprecision(5) << pm << " +/- " << psd;
        os << std::left << std::setw(18) << train_mode_name(mode) << std::right << std::setw(22)
           << c1.str() << std::setw(22) << c2.str() << std::setw(10) << rows.size() << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// profile

inline SigmaProfile run_profile(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    SigmaProfile prof = sigma_profile(ck.model, cfg.target, cfg.prior, cfg.profile.points,
                                      cfg.profile.bins, cfg.profile.seed);
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "sigma_profile.json");
    out << to_json(prof).dump(2) << "\n";
    write_profile_csv(prof, (fs::path(cfg.out_dir) / "sigma_profile.csv").string());
    return prof;
}

} // namespace dif
