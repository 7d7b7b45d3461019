#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dif/checkpoint.hpp"
#include "dif/model.hpp"
#include "dif/parallel.hpp"

namespace dif {

struct TrainConfig {
    double alpha1 = 1.0;  // distribution loss weight
    double alpha2 = 0.55; // reconstruction loss weight
    DesignParams design{0.6, 4.0};
    SmoothOccParams occ{20.0};
    double lr = 1e-4;
    std::size_t batch_size = 512;
    int epochs_phase1 = 10;
    int epochs_phase2 = 5;
    std::size_t samples_per_epoch = 65536;
    double mix = 0.5;             // uniform fraction of training points
    double noise_sd = 0.05;       // surface-sample perturbation, scene units
    double feature_noise_sd = 0.1;
    Box3 bbox{{-1.1, -1.1, -1.1}, {1.1, 1.1, 1.1}};
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::Dif;
    bool detach_sample = false;  // cut the reparameterized gradient path
    bool phase1_full_path = true; // phase 1 flows through sample + rectifier
    int threads = 0;

    int total_epochs() const { return epochs_phase1 + epochs_phase2; }

    void validate() const {
        if (!(alpha1 >= 0) || !(alpha2 >= 0))
            throw std::invalid_argument("train config: loss weights must be >= 0");
        if (epochs_phase1 < 0 || epochs_phase2 < 0)
            throw std::invalid_argument("train config: epochs must be >= 0");
        if (!(lr > 0)) throw std::invalid_argument("train config: lr must be > 0");
        if (batch_size == 0) throw std::invalid_argument("train config: batch size must be > 0");
        if (samples_per_epoch == 0)
            throw std::invalid_argument("train config: samples per epoch must be > 0");
        if (!(mix >= 0 && mix <= 1)) throw std::invalid_argument("train config: mix must be in [0,1]");
        if (!(noise_sd > 0)) throw std::invalid_argument("train config: noise_sd must be > 0");
        if (!(design.k > 0) || !(design.beta > 0))
            throw std::invalid_argument("train config: k and beta must be > 0");
        if (!(occ.alpha > 0)) throw std::invalid_argument("train config: alpha must be > 0");
    }
};

struct TrainLogRow {
    int epoch = 0;
    double l_rec = 0.0;
    double l_dis = 0.0;
    double l_un = 0.0;
    double sigma_near = 0.0;
    double sigma_far = 0.0;
    double seconds = 0.0;
    bool has_dis = false;
    bool has_sigma = false;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write train log: " + path);
        out << "epoch,l_rec,l_dis,l_un,sigma_near,sigma_far,seconds\n";
        for (const auto& r : rows) {
            out << r.epoch << "," << r.l_rec << ",";
            if (r.has_dis) out << r.l_dis;
            out << "," << r.l_un << ",";
            if (r.has_sigma) out << r.sigma_near;
            out << ",";
            if (r.has_sigma) out << r.sigma_far;
            out << "," << r.seconds << "\n";
        }
    }
};

// ---------------------------------------------------------------------------
// Loss functions

inline double loss_rec(std::span<const double> fine, std::span<const double> gt) {
    if (fine.empty() || fine.size() != gt.size())
        throw std::invalid_argument("loss_rec: empty or mismatched batch");
    double acc = 0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        double d = fine[i] - gt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(fine.size());
}

inline double loss_dis(std::span<const OccDistribution> pred,
                       std::span<const OccDistribution> designed) {
    if (pred.empty() || pred.size() != designed.size())
        throw std::invalid_argument("loss_dis: empty or mismatched batch");
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += gaussian_kl(pred[i], designed[i]);
    return acc / static_cast<double>(pred.size());
}

// (1/2N) sum_i [ (sample_i - gt_i)^2 / sigma_i^2 + log sigma_i ]
inline double loss_bayes(std::span<const double> samples, std::span<const double> gts,
                         std::span<const double> sigmas) {
    if (samples.empty() || samples.size() != gts.size() || samples.size() != sigmas.size())
        throw std::invalid_argument("loss_bayes: empty or mismatched batch");
    double acc = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(sigmas[i] > 0)) throw std::domain_error("loss_bayes: sigma must be positive");
        double r = samples[i] - gts[i];
        acc += r * r / (sigmas[i] * sigmas[i]) + std::log(sigmas[i]);
    }
    return acc / (2.0 * static_cast<double>(samples.size()));
}

inline double total_loss(double l_dis, double l_rec, double alpha1, double alpha2) {
    return alpha1 * l_dis + alpha2 * l_rec;
}

// ---------------------------------------------------------------------------
// fit

struct FitResult {
    TrainedModel model;
    TrainLog log;
    std::string checkpoint_path; // final checkpoint, empty when out_dir empty
};

namespace detail {

constexpr int kGradShards = 32;     // fixed so reductions are thread-count invariant
constexpr double kNearSdfBand = 0.05;
constexpr double kFarSdfBand = 0.25;

struct EpochData {
    SampleBatch batch;
    std::vector<std::array<double, 7>> features;
    std::vector<double> epsilons;
};

inline EpochData prepare_epoch(const TrainConfig& cfg, const Shape& target, const Shape& prior,
                               int epoch, int threads) {
    EpochData d;
    d.batch = sample_training_points(target, cfg.samples_per_epoch, cfg.mix, cfg.noise_sd, cfg.bbox,
                                     mix_seed(cfg.seed, 0xba7c4ULL, static_cast<std::uint64_t>(epoch)),
                                     cfg.occ, cfg.design);
    std::size_t n = d.batch.size();
    d.features.resize(n);
    d.epsilons.resize(n);
    std::uint64_t feat_seed = mix_seed(cfg.seed, 0xfea7ULL, static_cast<std::uint64_t>(epoch));
    std::uint64_t eps_seed = mix_seed(cfg.seed, 0xe95ULL, static_cast<std::uint64_t>(epoch));
    parallel_for(n, threads, [&](std::size_t i) {
        Rng rng(mix_seed(feat_seed, i));
        d.features[i] =
            extract_features(target, prior, d.batch.points[i], cfg.feature_noise_sd, rng).to_array();
        Rng erng(mix_seed(eps_seed, i));
        d.epsilons[i] = erng.normal();
    });
    return d;
}

// Per-shard scratch: caches, gradient accumulators, loss partials.
struct ShardScratch {
    ForwardCache cache_pred, cache_rect;
    MlpGrads g_pred, g_rect, g_base;
    std::vector<double> dx;
    double rec_sum = 0, dis_sum = 0, bayes_sum = 0;
    double sig_near_sum = 0, sig_far_sum = 0;
    std::size_t near_count = 0, far_count = 0;

    void reset_losses() {
        rec_sum = dis_sum = bayes_sum = 0;
        sig_near_sum = sig_far_sum = 0;
        near_count = far_count = 0;
    }
};

struct PointTerms {
    double fine = 0.0;    // rectified occupancy (or coarse sample)
    double sq_err = 0.0;  // (fine - gt)^2
    double kl = 0.0;      // KL(pred || designed), when weighted
    double sigma = 0.0;   // predicted sigma
};

// One point through predictor -> reparameterized sample -> rectifier with
// loss weights w_rec (on the squared error) and w_dis (on the KL term),
// both already divided by the batch size. Gradients accumulate into
// ws.g_pred / ws.g_rect.
inline PointTerms dif_point_backward(const DifModel& model, const std::array<double, 7>& features,
                                     double eps, double gt, const OccDistribution& designed,
                                     double w_rec, double w_dis, bool use_rectifier,
                                     bool detach_sample, ShardScratch& ws) {
    PointTerms out;
    PredictorOutput po = predict_distribution_cached(model, features, ws.cache_pred);
    const double mu = po.dist.mu;
    const double sigma = po.dist.sigma;
    const double coarse = mu + sigma * eps;
    out.sigma = sigma;

    double d_mu = 0, d_sigma = 0;
    double fine;
    if (use_rectifier) {
        fine = rectify_cached(model, coarse, po.dist, features, ws.cache_rect);
    } else {
        fine = coarse;
    }
    double err = fine - gt;
    out.fine = fine;
    out.sq_err = err * err;

    double d_fine = w_rec * 2.0 * err;
    double d_coarse;
    if (use_rectifier) {
        mlp_backward_accumulate(model.rectifier, ws.cache_rect, std::span<const double>(&d_fine, 1),
                                ws.g_rect, &ws.dx);
        d_coarse = d_fine + ws.dx[0];
        d_mu += ws.dx[1];
        d_sigma += ws.dx[2];
    } else {
        d_coarse = d_fine;
    }
    if (!detach_sample) {
        d_mu += d_coarse;
        d_sigma += d_coarse * eps;
    }
    if (w_dis != 0.0) {
        out.kl = gaussian_kl(po.dist, designed);
        double kmu, ksig;
        gaussian_kl_grad(po.dist, designed, kmu, ksig);
        d_mu += w_dis * kmu;
        d_sigma += w_dis * ksig;
    }

    double dy[2] = {d_mu, d_sigma * softplus_grad(po.raw_sigma)};
    mlp_backward_accumulate(model.predictor, ws.cache_pred, std::span<const double>(dy, 2),
                            ws.g_pred, nullptr);
    return out;
}

// One point of the data-dependent Bayesian loss,
// (1/2N) sum (1/sigma^2)(sample - gt)^2 + log sigma, through the predictor
// alone; inv_2b is 1/(2 * batch). Returns the per-point bracketed term.
inline PointTerms bayes_point_backward(const DifModel& model, const std::array<double, 7>& features,
                                       double eps, double gt, double inv_2b, ShardScratch& ws) {
    PointTerms out;
    PredictorOutput po = predict_distribution_cached(model, features, ws.cache_pred);
    const double mu = po.dist.mu;
    const double sigma = po.dist.sigma;
    const double sample = mu + sigma * eps;
    const double r = sample - gt;
    out.sigma = sigma;
    out.fine = sample;
    out.sq_err = (mu - gt) * (mu - gt);
    out.kl = r * r / (sigma * sigma) + std::log(sigma); // bracketed Bayes term

    double d_sample = 2.0 * r / (sigma * sigma) * inv_2b;
    double d_mu = d_sample;
    double d_sigma = d_sample * eps +
                     (-2.0 * r * r / (sigma * sigma * sigma) + 1.0 / sigma) * inv_2b;
    double dy[2] = {d_mu, d_sigma * softplus_grad(po.raw_sigma)};
    mlp_backward_accumulate(model.predictor, ws.cache_pred, std::span<const double>(dy, 2),
                            ws.g_pred, nullptr);
    return out;
}

struct EpochStats {
    double rec_sum = 0, dis_sum = 0, bayes_sum = 0;
    double sig_near_sum = 0, sig_far_sum = 0;
    std::size_t near_count = 0, far_count = 0;
    std::size_t points = 0;
};

inline void dump_batch(const SampleBatch& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) return;
    out << "x,y,z,gt_sdf,gt_occ,designed_sigma\n";
    for (std::size_t i = 0; i < b.size(); ++i)
        out << b.points[i].x << "," << b.points[i].y << "," << b.points[i].z << "," << b.gt_sdf[i]
            << "," << b.gt_occ[i] << "," << b.designed_sigma[i] << "\n";
}

} // namespace detail

inline FitResult fit(const TrainConfig& cfg, const Shape& target, const Shape& prior,
                     const std::string& out_dir = "") {
    cfg.validate();
    validate_shape(target);
    validate_shape(prior);
    int threads = resolve_threads(cfg.threads);

    FitResult result;
    result.model.mode = cfg.mode;
    result.model.dif = DifModel::init(cfg.seed, cfg.occ, cfg.design, cfg.feature_noise_sd);
    if (cfg.mode == TrainMode::Baseline) {
        Rng rng(mix_seed(cfg.seed, 0xba5eULL));
        result.model.baseline = make_baseline(rng);
    }

    const bool two_phase = cfg.mode == TrainMode::Dif || cfg.mode == TrainMode::DifNoRectifier;
    const bool use_rectifier = cfg.mode == TrainMode::Dif;
    const int total_epochs = cfg.total_epochs();

    AdamHyper hp;
    hp.lr = cfg.lr;
    AdamState opt_pred = AdamState::init(result.model.dif.predictor, hp);
    AdamState opt_rect = AdamState::init(result.model.dif.rectifier, hp);
    AdamState opt_base;
    if (cfg.mode == TrainMode::Baseline) opt_base = AdamState::init(result.model.baseline, hp);

    std::vector<detail::ShardScratch> shards(detail::kGradShards);
    for (auto& s : shards) {
        s.g_pred = MlpGrads::zeros_like(result.model.dif.predictor);
        s.g_rect = MlpGrads::zeros_like(result.model.dif.rectifier);
        if (cfg.mode == TrainMode::Baseline) s.g_base = MlpGrads::zeros_like(result.model.baseline);
    }
    MlpGrads step_g_pred = MlpGrads::zeros_like(result.model.dif.predictor);
    MlpGrads step_g_rect = MlpGrads::zeros_like(result.model.dif.rectifier);
    MlpGrads step_g_base;
    if (cfg.mode == TrainMode::Baseline) step_g_base = MlpGrads::zeros_like(result.model.baseline);

    auto write_ckpt = [&](int epoch, const std::string& name) -> std::string {
        if (out_dir.empty()) return "";
        std::filesystem::create_directories(out_dir);
        Checkpoint ck;
        ck.model = result.model;
        ck.rng_seed = cfg.seed;
        ck.epoch = epoch;
        if (cfg.mode == TrainMode::Baseline) {
            ck.optimizer.emplace("baseline", opt_base);
        } else {
            ck.optimizer.emplace("predictor", opt_pred);
            if (use_rectifier) ck.optimizer.emplace("rectifier", opt_rect);
        }
        std::string path = (std::filesystem::path(out_dir) / name).string();
        save_checkpoint(ck, path);
        return path;
    };

    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        const bool phase2 = two_phase && epoch >= cfg.epochs_phase1;
        detail::EpochData data = detail::prepare_epoch(cfg, target, prior, epoch, threads);
        const std::size_t n = data.batch.size();

        detail::EpochStats stats;
        stats.points = n;

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            const std::size_t bsize = end - start;
            const double inv_b = 1.0 / static_cast<double>(bsize);

            const int shards_used = static_cast<int>(std::min<std::size_t>(detail::kGradShards, bsize));

            parallel_chunks(bsize, detail::kGradShards, threads, [&](int shard, std::size_t cb,
                                                                     std::size_t ce) {
                detail::ShardScratch& ws = shards[shard];
                if (cfg.mode == TrainMode::Baseline) {
                    ws.g_base.zero();
                } else {
                    ws.g_pred.zero();
                    if (use_rectifier) ws.g_rect.zero();
                }
                ws.reset_losses();

                for (std::size_t bi = cb; bi < ce; ++bi) {
                    const std::size_t i = start + bi;
                    const double gt = data.batch.gt_occ[i];
                    const double abs_sdf = std::abs(data.batch.gt_sdf[i]);

                    if (cfg.mode == TrainMode::Baseline) {
                        const std::vector<double>& y = mlp_forward(
                            result.model.baseline, std::span<const double>(data.features[i]),
                            ws.cache_pred);
                        double err = y[0] - gt;
                        ws.rec_sum += err * err;
                        double dy = 2.0 * err * inv_b;
                        mlp_backward_accumulate(result.model.baseline, ws.cache_pred,
                                                std::span<const double>(&dy, 1), ws.g_base, nullptr);
                        continue;
                    }

                    detail::PointTerms terms;
                    if (cfg.mode == TrainMode::BayesDiagnostic) {
                        terms = detail::bayes_point_backward(result.model.dif, data.features[i],
                                                             data.epsilons[i], gt, 0.5 * inv_b, ws);
                        ws.bayes_sum += terms.kl;
                        ws.rec_sum += terms.sq_err;
                    } else {
                        const bool mean_path = !phase2 && !cfg.phase1_full_path;
                        OccDistribution designed{data.batch.designed_mu[i],
                                                 data.batch.designed_sigma[i]};
                        terms = detail::dif_point_backward(
                            result.model.dif, data.features[i],
                            mean_path ? 0.0 : data.epsilons[i], gt, designed,
                            cfg.alpha2 * inv_b, phase2 ? cfg.alpha1 * inv_b : 0.0, use_rectifier,
                            cfg.detach_sample, ws);
                        ws.rec_sum += terms.sq_err;
                        if (phase2) ws.dis_sum += terms.kl;
                    }

                    if (abs_sdf <= detail::kNearSdfBand) {
                        ws.sig_near_sum += terms.sigma;
                        ws.near_count += 1;
                    } else if (abs_sdf >= detail::kFarSdfBand) {
                        ws.sig_far_sum += terms.sigma;
                        ws.far_count += 1;
                    }
                }
            });

            // Deterministic reduction in shard order.
            double step_rec = 0, step_dis = 0, step_bayes = 0;
            if (cfg.mode == TrainMode::Baseline) {
                step_g_base.zero();
                for (int s = 0; s < shards_used; ++s) {
                    step_g_base.add(shards[s].g_base);
                    step_rec += shards[s].rec_sum;
                }
            } else {
                step_g_pred.zero();
                if (use_rectifier) step_g_rect.zero();
                for (int s = 0; s < shards_used; ++s) {
                    detail::ShardScratch& ws = shards[s];
                    step_g_pred.add(ws.g_pred);
                    if (use_rectifier) step_g_rect.add(ws.g_rect);
                    step_rec += ws.rec_sum;
                    step_dis += ws.dis_sum;
                    step_bayes += ws.bayes_sum;
                }
            }
            for (int s = 0; s < shards_used; ++s) {
                detail::ShardScratch& ws = shards[s];
                stats.sig_near_sum += ws.sig_near_sum;
                stats.sig_far_sum += ws.sig_far_sum;
                stats.near_count += ws.near_count;
                stats.far_count += ws.far_count;
            }
            stats.rec_sum += step_rec;
            stats.dis_sum += step_dis;
            stats.bayes_sum += step_bayes;

            double step_loss;
            if (cfg.mode == TrainMode::Baseline)
                step_loss = step_rec * inv_b;
            else if (cfg.mode == TrainMode::BayesDiagnostic)
                step_loss = step_bayes / (2.0 * static_cast<double>(bsize));
            else
                step_loss = total_loss(phase2 ? step_dis * inv_b : 0.0, step_rec * inv_b,
                                       phase2 ? cfg.alpha1 : 0.0, cfg.alpha2);
            if (!std::isfinite(step_loss)) {
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(out_dir);
                    detail::dump_batch(data.batch,
                                       (std::filesystem::path(out_dir) / "diverged_batch.csv").string());
                }
                throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch));
            }

            if (cfg.mode == TrainMode::Baseline) {
                adam_step_inplace(opt_base, result.model.baseline, step_g_base);
            } else {
                adam_step_inplace(opt_pred, result.model.dif.predictor, step_g_pred);
                if (use_rectifier) adam_step_inplace(opt_rect, result.model.dif.rectifier, step_g_rect);
            }
        }

        TrainLogRow row;
        row.epoch = epoch;
        double invn = 1.0 / static_cast<double>(stats.points);
        row.l_rec = stats.rec_sum * invn;
        row.has_dis = phase2;
        row.l_dis = phase2 ? stats.dis_sum * invn : 0.0;
        if (cfg.mode == TrainMode::Baseline)
            row.l_un = row.l_rec;
        else if (cfg.mode == TrainMode::BayesDiagnostic)
            row.l_un = stats.bayes_sum * invn * 0.5;
        else
            row.l_un = total_loss(row.l_dis, row.l_rec, phase2 ? cfg.alpha1 : 0.0, cfg.alpha2);
        row.has_sigma = cfg.mode != TrainMode::Baseline && stats.near_count > 0 && stats.far_count > 0;
        if (row.has_sigma) {
            row.sigma_near = stats.sig_near_sum / static_cast<double>(stats.near_count);
            row.sigma_far = stats.sig_far_sum / static_cast<double>(stats.far_count);
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.rows.push_back(row);

        if (two_phase && epoch + 1 == cfg.epochs_phase1 && cfg.epochs_phase2 > 0)
            write_ckpt(epoch + 1, "checkpoint_phase1.json");
    }

    result.checkpoint_path = write_ckpt(total_epochs, "checkpoint.json");
    return result;
}

} // namespace dif
