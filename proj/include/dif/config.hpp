#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "dif/errors.hpp"
#include "dif/mesh_io.hpp"
#include "dif/train.hpp"

namespace dif {

namespace cfgdetail {

using nlohmann::json;

inline const json& require_key(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError("missing key: " + path + "." + key);
    return j.at(key);
}

inline double get_double(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_key(j, key, path);
    if (!v.is_number()) throw ConfigError("expected number at " + path + "." + key);
    return v.get<double>();
}

inline double get_double_or(const json& j, const std::string& key, const std::string& path,
                            double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get_double(j, key, path);
}

inline Vec3 get_vec3(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_key(j, key, path);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number())
        throw ConfigError("expected [x, y, z] at " + path + "." + key);
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline std::string get_string(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_key(j, key, path);
    if (!v.is_string()) throw ConfigError("expected string at " + path + "." + key);
    return v.get<std::string>();
}

} // namespace cfgdetail

// Shape spec: {"type": "sphere", "center": [...], "radius": r}, etc.
inline Shape parse_shape(const nlohmann::json& j, const std::string& path) {
    using namespace cfgdetail;
    std::string type = get_string(j, "type", path);
    try {
        if (type == "sphere") {
            return make_sphere(get_vec3(j, "center", path), get_double(j, "radius", path));
        }
        if (type == "torus") {
            return make_torus(get_vec3(j, "center", path), get_double(j, "major_r", path),
                              get_double(j, "minor_r", path));
        }
        if (type == "box") {
            return make_box(get_vec3(j, "center", path), get_vec3(j, "half_extents", path));
        }
        if (type == "capsule") {
            return make_capsule(get_vec3(j, "a", path), get_vec3(j, "b", path),
                                get_double(j, "radius", path));
        }
        if (type == "bump_sphere") {
            const nlohmann::json& bumps = require_key(j, "bumps", path);
            if (!bumps.is_array() || bumps.empty())
                throw ConfigError("expected non-empty array at " + path + ".bumps");
            std::vector<GaussianBump> bs;
            for (std::size_t i = 0; i < bumps.size(); ++i) {
                std::string bpath = path + ".bumps[" + std::to_string(i) + "]";
                GaussianBump b;
                b.direction = get_vec3(bumps[i], "direction", bpath);
                b.amplitude = get_double(bumps[i], "amplitude", bpath);
                b.width = get_double(bumps[i], "width", bpath);
                bs.push_back(b);
            }
            return make_bump_sphere(get_vec3(j, "center", path), get_double(j, "radius", path),
                                    std::move(bs));
        }
        if (type == "union") {
            const nlohmann::json& members = require_key(j, "members", path);
            if (!members.is_array() || members.empty())
                throw ConfigError("expected non-empty array at " + path + ".members");
            std::vector<Shape> shapes;
            for (std::size_t i = 0; i < members.size(); ++i)
                shapes.push_back(
                    parse_shape(members[i], path + ".members[" + std::to_string(i) + "]"));
            return make_union(std::move(shapes));
        }
        if (type == "mesh") {
            std::string file = get_string(j, "path", path);
            return make_mesh_shape(read_mesh(file));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    throw ConfigError("unknown shape type '" + type + "' at " + path + ".type");
}

struct ExtractConfig {
    int resolution = 128;
    EvalMode mode = EvalMode::mean();
};

struct MetricsConfig {
    std::size_t samples = 100000;
    std::uint64_t seed = 7;
};

struct ProfileConfig {
    std::size_t points = 8192;
    int bins = 16;
    std::uint64_t seed = 11;
};

struct ExperimentConfig {
    Shape target, prior;
    nlohmann::json scene_json; // original scene spec, kept for snapshots
    TrainConfig train;
    ExtractConfig extract;
    MetricsConfig metrics;
    ProfileConfig profile;
    std::string out_dir = "runs/default";
};

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using namespace cfgdetail;
    ExperimentConfig cfg;
    const json& scene = require_key(j, "scene", "config");
    cfg.scene_json = scene;
    cfg.target = parse_shape(require_key(scene, "target", "scene"), "scene.target");
    cfg.prior = parse_shape(require_key(scene, "prior", "scene"), "scene.prior");
    validate_shape(cfg.target);
    validate_shape(cfg.prior);
    if (scene.contains("bbox")) {
        cfg.train.bbox.lo = get_vec3(scene.at("bbox"), "min", "scene.bbox");
        cfg.train.bbox.hi = get_vec3(scene.at("bbox"), "max", "scene.bbox");
        if (!(cfg.train.bbox.lo.x < cfg.train.bbox.hi.x && cfg.train.bbox.lo.y < cfg.train.bbox.hi.y &&
              cfg.train.bbox.lo.z < cfg.train.bbox.hi.z))
            throw ConfigError("scene.bbox: min must be strictly below max");
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        const std::string p = "train";
        cfg.train.alpha1 = get_double_or(t, "alpha1", p, cfg.train.alpha1);
        cfg.train.alpha2 = get_double_or(t, "alpha2", p, cfg.train.alpha2);
        cfg.train.design.k = get_double_or(t, "k", p, cfg.train.design.k);
        cfg.train.design.beta = get_double_or(t, "beta", p, cfg.train.design.beta);
        cfg.train.occ.alpha = get_double_or(t, "alpha", p, cfg.train.occ.alpha);
        cfg.train.lr = get_double_or(t, "lr", p, cfg.train.lr);
        cfg.train.batch_size =
            static_cast<std::size_t>(get_double_or(t, "batch_size", p, cfg.train.batch_size));
        cfg.train.epochs_phase1 =
            static_cast<int>(get_double_or(t, "epochs_phase1", p, cfg.train.epochs_phase1));
        cfg.train.epochs_phase2 =
            static_cast<int>(get_double_or(t, "epochs_phase2", p, cfg.train.epochs_phase2));
        cfg.train.samples_per_epoch = static_cast<std::size_t>(
            get_double_or(t, "samples_per_epoch", p, cfg.train.samples_per_epoch));
        cfg.train.mix = get_double_or(t, "mix", p, cfg.train.mix);
        cfg.train.noise_sd = get_double_or(t, "noise_sd", p, cfg.train.noise_sd);
        cfg.train.feature_noise_sd =
            get_double_or(t, "feature_noise_sd", p, cfg.train.feature_noise_sd);
        cfg.train.seed =
            static_cast<std::uint64_t>(get_double_or(t, "seed", p, cfg.train.seed));
        if (t.contains("mode")) cfg.train.mode = train_mode_from_name(get_string(t, "mode", p));
        if (t.contains("detach_sample")) cfg.train.detach_sample = t.at("detach_sample").get<bool>();
        if (t.contains("phase1_full_path"))
            cfg.train.phase1_full_path = t.at("phase1_full_path").get<bool>();
    }
    try {
        cfg.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (j.contains("extract")) {
        const json& e = j.at("extract");
        cfg.extract.resolution = static_cast<int>(get_double_or(e, "resolution", "extract", 128));
        if (cfg.extract.resolution < 2)
            throw ConfigError("extract.resolution must be >= 2");
        std::string mode = e.contains("mode") ? get_string(e, "mode", "extract") : "mean";
        if (mode == "mean")
            cfg.extract.mode = EvalMode::mean();
        else if (mode == "sample")
            cfg.extract.mode = EvalMode::sampled(
                static_cast<std::uint64_t>(get_double_or(e, "sample_seed", "extract", 0)));
        else
            throw ConfigError("extract.mode must be 'mean' or 'sample'");
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        cfg.metrics.samples =
            static_cast<std::size_t>(get_double_or(m, "samples", "metrics", 100000));
        cfg.metrics.seed = static_cast<std::uint64_t>(get_double_or(m, "seed", "metrics", 7));
        if (cfg.metrics.samples == 0) throw ConfigError("metrics.samples must be > 0");
    }
    if (j.contains("profile")) {
        const json& m = j.at("profile");
        cfg.profile.points = static_cast<std::size_t>(get_double_or(m, "points", "profile", 8192));
        cfg.profile.bins = static_cast<int>(get_double_or(m, "bins", "profile", 16));
        cfg.profile.seed = static_cast<std::uint64_t>(get_double_or(m, "seed", "profile", 11));
    }
    if (j.contains("out_dir")) cfg.out_dir = cfgdetail::get_string(j, "out_dir", "config");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_experiment_config(j);
}

// Effective configuration, written next to run outputs.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["scene"] = cfg.scene_json;
    j["scene"]["bbox"] = {{"min", {cfg.train.bbox.lo.x, cfg.train.bbox.lo.y, cfg.train.bbox.lo.z}},
                          {"max", {cfg.train.bbox.hi.x, cfg.train.bbox.hi.y, cfg.train.bbox.hi.z}}};
    j["train"] = {{"alpha1", cfg.train.alpha1},
                  {"alpha2", cfg.train.alpha2},
                  {"k", cfg.train.design.k},
                  {"beta", cfg.train.design.beta},
                  {"alpha", cfg.train.occ.alpha},
                  {"lr", cfg.train.lr},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs_phase1", cfg.train.epochs_phase1},
                  {"epochs_phase2", cfg.train.epochs_phase2},
                  {"samples_per_epoch", cfg.train.samples_per_epoch},
                  {"mix", cfg.train.mix},
                  {"noise_sd", cfg.train.noise_sd},
                  {"feature_noise_sd", cfg.train.feature_noise_sd},
                  {"seed", cfg.train.seed},
                  {"mode", train_mode_name(cfg.train.mode)},
                  {"detach_sample", cfg.train.detach_sample},
                  {"phase1_full_path", cfg.train.phase1_full_path}};
    j["extract"] = {{"resolution", cfg.extract.resolution},
                    {"mode", cfg.extract.mode.sample ? "sample" : "mean"},
                    {"sample_seed", cfg.extract.mode.seed}};
    j["metrics"] = {{"samples", cfg.metrics.samples}, {"seed", cfg.metrics.seed}};
    j["profile"] = {{"points", cfg.profile.points},
                    {"bins", cfg.profile.bins},
                    {"seed", cfg.profile.seed}};
    j["out_dir"] = cfg.out_dir;
    return j;
}

// Built-in default: bump sphere target with its base sphere as prior.
inline nlohmann::json default_config_json() {
    return nlohmann::json{
        {"scene",
         {{"target",
           {{"type", "bump_sphere"},
            {"center", {0.0, 0.0, 0.0}},
            {"radius", 0.5},
            {"bumps",
             {{{"direction", {1.0, 0.4, 0.2}}, {"amplitude", 0.1}, {"width", 0.5}},
              {{"direction", {-0.5, 0.9, 0.1}}, {"amplitude", 0.07}, {"width", 0.35}},
              {{"direction", {0.1, -0.3, 1.0}}, {"amplitude", 0.08}, {"width", 0.6}}}}}},
          {"prior", {{"type", "sphere"}, {"center", {0.0, 0.0, 0.0}}, {"radius", 0.5}}},
          {"bbox", {{"min", {-1.1, -1.1, -1.1}}, {"max", {1.1, 1.1, 1.1}}}}}},
        {"train", {{"mode", "dif"}, {"seed", 1}}},
        {"extract", {{"resolution", 128}, {"mode", "mean"}}},
        {"metrics", {{"samples", 100000}, {"seed", 7}}},
        {"out_dir", "runs/default"}};
}

inline ExperimentConfig default_experiment_config() {
    return parse_experiment_config(default_config_json());
}

} // namespace dif
