#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "dif/experiment.hpp"

using namespace dif;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "dif_cli_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Small, fast configuration for end-to-end plumbing tests.
ExperimentConfig tiny_config(const std::string& out_name) {
    ExperimentConfig cfg = default_experiment_config();
    cfg.train.samples_per_epoch = 1024;
    cfg.train.batch_size = 256;
    cfg.train.epochs_phase1 = 1;
    cfg.train.epochs_phase2 = 1;
    cfg.extract.resolution = 24;
    cfg.metrics.samples = 5000;
    cfg.profile.points = 2048;
    cfg.out_dir = fresh_dir(out_name).string();
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(DIF_CLI_BIN) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config validation names the offending key", "[cli]") {
    nlohmann::json j = default_config_json();
    j["scene"]["target"].erase("radius");
    try {
        parse_experiment_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("scene.target.radius") != std::string::npos);
    }

    nlohmann::json bad_mode = default_config_json();
    bad_mode["extract"]["mode"] = "psychic";
    CHECK_THROWS_AS(parse_experiment_config(bad_mode), ConfigError);

    nlohmann::json bad_bbox = default_config_json();
    bad_bbox["scene"]["bbox"]["min"] = {2.0, 2.0, 2.0};
    CHECK_THROWS_AS(parse_experiment_config(bad_bbox), ConfigError);
}

TEST_CASE("gen writes ground truth and is idempotent", "[cli]") {
    ExperimentConfig cfg = tiny_config("gen");
    GenResult r = run_gen(cfg);
    REQUIRE(fs::exists(r.mesh_path));
    REQUIRE(fs::exists(r.samples_path));
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "config.json"));

    TriMesh gt = read_mesh(r.mesh_path);
    CHECK_FALSE(gt.empty());

    std::string mesh_bytes = slurp(r.mesh_path);
    std::string samples_bytes = slurp(r.samples_path);
    run_gen(cfg);
    CHECK(slurp(r.mesh_path) == mesh_bytes);
    CHECK(slurp(r.samples_path) == samples_bytes);
}

TEST_CASE("train/extract/eval/profile round trip on a tiny run", "[cli]") {
    ExperimentConfig cfg = tiny_config("roundtrip");
    TrainOutputs t = run_train(cfg);
    REQUIRE(fs::exists(t.fit.checkpoint_path));
    REQUIRE(fs::exists(t.log_path));
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "checkpoint_phase1.json"));

    // checkpoint round trip preserves parameters bitwise
    Checkpoint ck = load_checkpoint(t.fit.checkpoint_path);
    CHECK(ck.model.mode == TrainMode::Dif);
    CHECK(flatten_params(ck.model.dif.predictor) == flatten_params(t.fit.model.dif.predictor));
    CHECK(flatten_params(ck.model.dif.rectifier) == flatten_params(t.fit.model.dif.rectifier));
    CHECK(ck.optimizer.at("predictor").step == 8); // 2 epochs x 4 steps

    std::string mesh_path = run_extract(cfg, t.fit.checkpoint_path);
    REQUIRE(fs::exists(mesh_path));
    TriMesh mesh = read_mesh(mesh_path);
    CHECK_FALSE(mesh.empty());

    MetricsReport rep = run_eval(cfg, mesh_path);
    CHECK(rep.chamfer >= 0.0);
    CHECK(std::isfinite(rep.chamfer));
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "metrics.json"));

    SigmaProfile prof = run_profile(cfg, t.fit.checkpoint_path);
    CHECK(prof.populated() >= 10);
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "sigma_profile.csv"));
}

TEST_CASE("extract refuses a surface-free field", "[cli]") {
    ExperimentConfig cfg = tiny_config("empty_extract");
    TrainOutputs t = run_train(cfg);
    cfg.extract.resolution = 2; // corner nodes only: no 0.5 crossing
    CHECK_THROWS_AS(run_extract(cfg, t.fit.checkpoint_path), NumericError);
}

TEST_CASE("eval against itself is near zero", "[cli]") {
    ExperimentConfig cfg = tiny_config("self_eval");
    GenResult g = run_gen(cfg);
    MetricsReport rep = run_eval(cfg, g.mesh_path);
    CHECK(rep.chamfer < 1e-6);
    CHECK(rep.normal_consistency < 1e-6);
    CHECK(rep.p2s < 0.02); // gt sampling vs finite-resolution mesh
}

TEST_CASE("sample-mode extraction differs from mean mode but reruns identically", "[cli]") {
    ExperimentConfig cfg = tiny_config("modes");
    TrainOutputs t = run_train(cfg);

    std::string mean1 = run_extract(cfg, t.fit.checkpoint_path,
                                    (fs::path(cfg.out_dir) / "mean1.obj").string());
    std::string mean2 = run_extract(cfg, t.fit.checkpoint_path,
                                    (fs::path(cfg.out_dir) / "mean2.obj").string());
    CHECK(slurp(mean1) == slurp(mean2));

    cfg.extract.mode = EvalMode::sampled(5);
    std::string samp = run_extract(cfg, t.fit.checkpoint_path,
                                   (fs::path(cfg.out_dir) / "sample.obj").string());
    CHECK(slurp(samp) != slurp(mean1));
    std::string samp2 = run_extract(cfg, t.fit.checkpoint_path,
                                    (fs::path(cfg.out_dir) / "sample2.obj").string());
    CHECK(slurp(samp) == slurp(samp2));
}

TEST_CASE("ablate produces a per-variant table on a tiny run", "[cli]") {
    ExperimentConfig cfg = tiny_config("ablate");
    cfg.metrics.samples = 2000;
    AblationResult res = run_ablate(cfg, 1);
    REQUIRE(res.rows.size() == 3);
    for (const auto& row : res.rows) {
        INFO(train_mode_name(row.mode) << ": " << row.error);
        CHECK_FALSE(row.failed);
        CHECK(std::isfinite(row.metrics.chamfer));
    }
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "ablation.csv"));
    std::string table = ablation_table(res);
    CHECK(table.find("baseline") != std::string::npos);
    CHECK(table.find("dif_no_rectifier") != std::string::npos);
}

TEST_CASE("cli binary exit codes", "[cli]") {
    fs::path dir = fresh_dir("exit_codes");

    // missing mesh file: I/O error -> 2
    CHECK(run_cli("--out " + (dir / "a").string() + " eval --mesh " + (dir / "nope.obj").string()) ==
          2);

    // malformed config -> 2
    fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK(run_cli("--config " + bad.string() + " gen") == 2);

    // missing subcommand -> CLI11 parse failure (nonzero)
    CHECK(run_cli("") != 0);

    // tiny gen run succeeds -> 0
    fs::path cfg_path = dir / "tiny.json";
    nlohmann::json j = default_config_json();
    j["extract"]["resolution"] = 16;
    j["out_dir"] = (dir / "run").string();
    std::ofstream(cfg_path) << j.dump();
    CHECK(run_cli("--config " + cfg_path.string() + " gen") == 0);
}
