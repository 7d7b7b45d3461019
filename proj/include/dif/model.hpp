#pragma once

#include <array>
#include <cstdint>
#include <cstring>

#include "dif/errors.hpp"
#include "dif/nn.hpp"
#include "dif/sampling.hpp"

namespace dif {

// Pointwise local feature: prior surface normal at the foot point, noisy
// target surface normal, and the prior signed distance.
struct FeatureVec7 {
    Vec3 prior_normal;
    Vec3 target_normal_noisy;
    double prior_sdf = 0.0;

    std::array<double, 7> to_array() const {
        return {prior_normal.x,         prior_normal.y,         prior_normal.z,
                target_normal_noisy.x,  target_normal_noisy.y,  target_normal_noisy.z,
                prior_sdf};
    }
};

constexpr int kFeatureDim = 7;
constexpr int kRectifierInputDim = 10; // [O_s, mu, sigma, features]
constexpr double kSigmaFloor = 1e-4;

inline Mlp make_predictor(Rng& rng) {
    return Mlp::make({7, 128, 128, 128, 2},
                     {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Identity},
                     rng);
}

// Residual head starts at zero so the rectifier is the identity at init.
inline Mlp make_rectifier(Rng& rng) {
    Mlp m = Mlp::make({10, 64, 64, 1}, {Activation::Relu, Activation::Relu, Activation::Identity},
                      rng);
    m.zero_final_layer();
    return m;
}

inline Mlp make_baseline(Rng& rng) {
    return Mlp::make({7, 128, 128, 128, 1},
                     {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Identity},
                     rng);
}

struct DifModel {
    Mlp predictor; // 7 -> (mu, raw sigma)
    Mlp rectifier; // 10 -> residual
    SmoothOccParams occ;
    DesignParams design;
    double feature_noise_sd = 0.1;

    static DifModel init(std::uint64_t seed, SmoothOccParams occ = {}, DesignParams design = {},
                         double feature_noise_sd = 0.1) {
        Rng rng(mix_seed(seed, 0x6d0de1ULL));
        DifModel m;
        m.predictor = make_predictor(rng);
        m.rectifier = make_rectifier(rng);
        m.occ = occ;
        m.design = design;
        m.feature_noise_sd = feature_noise_sd;
        return m;
    }
};

enum class TrainMode { Dif, DifNoRectifier, Baseline, BayesDiagnostic };

inline const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::Dif: return "dif";
        case TrainMode::DifNoRectifier: return "dif_no_rectifier";
        case TrainMode::Baseline: return "baseline";
        default: return "bayes_diagnostic";
    }
}

inline TrainMode train_mode_from_name(const std::string& s) {
    if (s == "dif") return TrainMode::Dif;
    if (s == "dif_no_rectifier") return TrainMode::DifNoRectifier;
    if (s == "baseline") return TrainMode::Baseline;
    if (s == "bayes_diagnostic") return TrainMode::BayesDiagnostic;
    throw std::invalid_argument("unknown train mode: " + s);
}

// A fitted field of any mode; baseline modes leave the unused nets empty.
struct TrainedModel {
    TrainMode mode = TrainMode::Dif;
    DifModel dif;
    Mlp baseline;
};

// ---------------------------------------------------------------------------
// Feature extraction

inline FeatureVec7 extract_features(const Shape& target, const Shape& prior, const Vec3& p,
                                    double noise_sd, Rng& rng) {
    constexpr Vec3 fallback_axis{1, 0, 0};

    ProjectionResult pf = nearest_surface_point(prior, p);
    if (!pf.converged)
        throw ProjectionError("extract_features: prior surface projection failed", pf.residual);
    FeatureVec7 f;
    f.prior_normal = surface_normal(prior, pf.point).value_or(fallback_axis);

    ProjectionResult tf = nearest_surface_point(target, p);
    if (!tf.converged)
        throw ProjectionError("extract_features: target surface projection failed", tf.residual);
    Vec3 tn = surface_normal(target, tf.point).value_or(fallback_axis);
    if (noise_sd > 0.0) {
        Vec3 noisy = tn + rng.normal3() * noise_sd;
        f.target_normal_noisy = norm(noisy) > 1e-9 ? normalized(noisy) : tn;
    } else {
        f.target_normal_noisy = tn;
    }

    f.prior_sdf = sdf_eval(prior, p);
    return f;
}

// ---------------------------------------------------------------------------
// Prediction, sampling, rectification

// Raw sigma output needed to chain the softplus gradient during training.
struct PredictorOutput {
    OccDistribution dist;
    double raw_sigma = 0.0;
};

inline PredictorOutput predict_distribution_cached(const DifModel& model,
                                                   const std::array<double, 7>& features,
                                                   ForwardCache& cache) {
    const std::vector<double>& y = mlp_forward(model.predictor, std::span<const double>(features), cache);
    PredictorOutput out;
    out.dist.mu = y[0];
    out.raw_sigma = y[1];
    out.dist.sigma = softplus(y[1]) + kSigmaFloor;
    if (!std::isfinite(out.dist.mu) || !std::isfinite(out.dist.sigma))
        throw NumericError("predict_distribution: non-finite network output");
    return out;
}

inline OccDistribution predict_distribution(const DifModel& model, const FeatureVec7& features) {
    ForwardCache cache;
    return predict_distribution_cached(model, features.to_array(), cache).dist;
}

struct CoarseSample {
    double value = 0.0;
    OccDistribution dist;
    double epsilon = 0.0;
};

inline CoarseSample coarse_occupancy(const DifModel& model, const FeatureVec7& features,
                                     double epsilon) {
    CoarseSample c;
    c.dist = predict_distribution(model, features);
    c.epsilon = epsilon;
    c.value = reparam_sample(c.dist, epsilon);
    return c;
}

inline std::array<double, kRectifierInputDim> rectifier_input(double coarse,
                                                              const OccDistribution& dist,
                                                              const std::array<double, 7>& f) {
    return {coarse, dist.mu, dist.sigma, f[0], f[1], f[2], f[3], f[4], f[5], f[6]};
}

inline double rectify_cached(const DifModel& model, double coarse, const OccDistribution& dist,
                             const std::array<double, 7>& features, ForwardCache& cache) {
    auto in = rectifier_input(coarse, dist, features);
    const std::vector<double>& y = mlp_forward(model.rectifier, std::span<const double>(in), cache);
    return coarse + y[0];
}

// Fine occupancy = coarse + residual. Not clamped here; grid evaluation
// clamps to [0, 1].
inline double rectify(const DifModel& model, double coarse, const OccDistribution& dist,
                      const FeatureVec7& features) {
    ForwardCache cache;
    return rectify_cached(model, coarse, dist, features.to_array(), cache);
}

// ---------------------------------------------------------------------------
// Field evaluation

struct EvalMode {
    bool sample = false;       // false: mean mode (epsilon = 0)
    std::uint64_t seed = 0;    // sample-mode stream seed

    static EvalMode mean() { return {false, 0}; }
    static EvalMode sampled(std::uint64_t seed) { return {true, seed}; }
};

inline std::uint64_t hash_point(const Vec3& p) {
    auto bits = [](double x) {
        std::uint64_t u;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&u, &x, sizeof(u));
        return u;
    };
    return mix_seed(mix_seed(bits(p.x), bits(p.y)), bits(p.z));
}

// Full composition at one point: features (noise disabled at evaluation),
// distribution, epsilon draw, rectification.
inline double evaluate_field(const DifModel& model, const Shape& target, const Shape& prior,
                             const Vec3& p, const EvalMode& mode, bool use_rectifier = true) {
    Rng dummy(0);
    FeatureVec7 f = extract_features(target, prior, p, 0.0, dummy);
    double eps = 0.0;
    if (mode.sample) {
        Rng rng(mix_seed(mode.seed, hash_point(p)));
        eps = rng.normal();
    }
    CoarseSample c = coarse_occupancy(model, f, eps);
    double fine = use_rectifier ? rectify(model, c.value, c.dist, f) : c.value;
    if (!std::isfinite(fine)) throw NumericError("evaluate_field: non-finite occupancy");
    return fine;
}

inline double baseline_forward(const Mlp& baseline, const FeatureVec7& features) {
    ForwardCache cache;
    auto arr = features.to_array();
    const std::vector<double>& y = mlp_forward(baseline, std::span<const double>(arr), cache);
    if (!std::isfinite(y[0])) throw NumericError("baseline_forward: non-finite output");
    return y[0];
}

inline double evaluate_trained(const TrainedModel& tm, const Shape& target, const Shape& prior,
                               const Vec3& p, const EvalMode& mode) {
    switch (tm.mode) {
        case TrainMode::Dif: return evaluate_field(tm.dif, target, prior, p, mode, true);
        case TrainMode::DifNoRectifier:
        case TrainMode::BayesDiagnostic:
            return evaluate_field(tm.dif, target, prior, p, mode, false);
        default: {
            Rng dummy(0);
            FeatureVec7 f = extract_features(target, prior, p, 0.0, dummy);
            return baseline_forward(tm.baseline, f);
        }
    }
}

} // namespace dif
