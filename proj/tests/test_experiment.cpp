#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "transopt/experiment.hpp"

using namespace transopt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig small_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.dims = {3};
    cfg.instances_per_class = 10;
    cfg.multipliers = {50};
    cfg.seed = 31337;
    cfg.out = out;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.multipliers = {60};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config file round trip") {
    TempDir tmp("transopt_test_cfg");
    fs::path cfg_path = tmp.path / "config.json";
    {
        std::ofstream out(cfg_path);
        out << R"({"dims": [3], "instances_per_class": 5,
                   "multipliers": [50, 100],
                   "grid": {"e": [10, 20], "h": [1, 2], "L": [1]},
                   "train": {"max_epochs": 7, "folds": 3},
                   "seed": 99, "out": "somewhere"})";
    }
    ExperimentConfig cfg = load_experiment_config(cfg_path.string());
    CHECK(cfg.dims == std::vector<int>{3});
    CHECK(cfg.instances_per_class == 5);
    CHECK(cfg.multipliers == std::vector<int>{50, 100});
    CHECK(cfg.grid_e == std::vector<int>{10, 20});
    CHECK(cfg.grid_h == std::vector<int>{1, 2});
    CHECK(cfg.train.max_epochs == 7);
    CHECK(cfg.train.folds == 3);
    CHECK(cfg.seed == 99);
    CHECK(cfg.out == "somewhere");

    CHECK_THROWS_AS(load_experiment_config("/nonexistent/x.json"), ConfigError);
}

TEST_CASE("design file round trip is bit identical") {
    TempDir tmp("transopt_test_design");
    ProblemInstance inst = make_instance({ClassId(7), 3, 3});
    DesignMatrix design = build_design(inst, 50, 12345);
    fs::path p = tmp.path / "design.csv";
    write_design(design, 3, 50, 12345, p.string());
    DesignMatrix loaded = read_design(p.string());
    CHECK(loaded.class_label == 7);
    CHECK(loaded.s == design.s);
    CHECK(loaded.d == design.d);
    CHECK((loaded.x.array() == design.x.array()).all());
    CHECK((loaded.y.array() == design.y.array()).all());

    // rewriting the loaded design reproduces the bytes
    fs::path p2 = tmp.path / "design2.csv";
    write_design(loaded, 3, 50, 12345, p2.string());
    CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("generate writes a complete verifiable cache") {
    TempDir tmp("transopt_test_gen");
    ExperimentConfig cfg = small_config((tmp.path / "cache").string());
    cmd_generate(cfg);

    int files = 0;
    for (const auto& entry : fs::directory_iterator(cfg.out))
        if (entry.path().filename().string().rfind("design_", 0) == 0)
            ++files;
    CHECK(files == 240);  // 24 classes x 10 instances

    auto designs = load_designs(cfg, 3, 50);
    CHECK(designs.size() == 240);

    // regenerating yields byte-identical files
    std::string before = slurp(fs::path(cfg.out) / "manifest.txt");
    cmd_generate(cfg);
    CHECK(slurp(fs::path(cfg.out) / "manifest.txt") == before);
}

TEST_CASE("corrupt cache is rejected with a regenerate instruction") {
    TempDir tmp("transopt_test_corrupt");
    ExperimentConfig cfg = small_config((tmp.path / "cache").string());
    cfg.instances_per_class = 2;
    cmd_generate(cfg);

    fs::path victim = fs::path(cfg.out) / design_filename(3, 50, 1, 1);
    {
        std::ofstream out(victim, std::ios::app);
        out << "tampered\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_designs(cfg, 3, 50)),
                         doctest::Contains("re-run `transopt generate`"),
                         CacheError);

    fs::remove(victim);
    CHECK_THROWS_AS(static_cast<void>(load_designs(cfg, 3, 50)), CacheError);

    CHECK_THROWS_AS(
        static_cast<void>(load_designs(small_config("/nonexistent"), 3, 50)),
        CacheError);
}

TEST_CASE("sweep csv append, sort, and duplicate rejection") {
    TempDir tmp("transopt_test_csv");
    fs::path csv = tmp.path / "sweep.csv";

    SweepRow r1{3, 50, 30, 1, 1, 1, 0.5, 12, 0.0, 7, ""};
    SweepRow r0{3, 50, 30, 1, 1, 0, 0.75, 10, 0.0, 7, ""};
    append_sweep_rows(csv.string(), {r1});
    append_sweep_rows(csv.string(), {r0});

    auto rows = read_sweep_csv(csv.string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].fold == 0);  // re-sorted on append
    CHECK(rows[1].fold == 1);
    CHECK(*rows[0].test_accuracy == doctest::Approx(0.75));

    CHECK_THROWS_AS(append_sweep_rows(csv.string(), {r0}), ConfigError);

    std::string first_line = slurp(csv).substr(0, slurp(csv).find('\n'));
    CHECK(first_line == kSweepCsvHeader);
}

TEST_CASE("error rows carry a blank accuracy") {
    TempDir tmp("transopt_test_err");
    fs::path csv = tmp.path / "sweep.csv";
    SweepRow bad{3, 50, 30, 1, 1, 0, std::nullopt, 0, 0.0, 7, "boom"};
    append_sweep_rows(csv.string(), {bad});
    auto rows = read_sweep_csv(csv.string());
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].test_accuracy.has_value());
    CHECK(rows[0].error == "boom");
}

TEST_CASE("report rendering") {
    CHECK_THROWS_AS(render_report({}), ConfigError);

    std::vector<SweepRow> rows{
        {3, 50, 30, 1, 1, 0, 0.8, 10, 0.0, 7, ""},
        {3, 50, 30, 1, 1, 1, 0.6, 12, 0.0, 7, ""},
        {3, 50, 20, 1, 1, 0, 0.9, 10, 0.0, 7, ""},
        {3, 50, 20, 1, 1, 1, 0.9, 10, 0.0, 7, ""},
    };
    std::string md = render_report(rows);
    CHECK(md.find("dim=3, multiplier=50") != std::string::npos);
    CHECK(md.find("0.9000") != std::string::npos);
    // best flag goes to e=20 (higher mean)
    auto best_pos = md.find("**best**");
    REQUIRE(best_pos != std::string::npos);
    auto e20_pos = md.find("| 20 |");
    CHECK(e20_pos < best_pos);
    CHECK(best_pos < md.find("| 30 |"));
}

TEST_CASE("small end-to-end train run writes report artifacts") {
    TempDir tmp("transopt_test_e2e");
    ExperimentConfig cfg = small_config((tmp.path / "cache").string());
    cfg.dims = {2};
    cfg.instances_per_class = 4;
    cfg.train.folds = 2;
    cfg.train.max_epochs = 2;
    cfg.train.val_fraction = 0.34;
    cmd_generate(cfg);

    CVReport report = cmd_train(cfg, 2, 50, 8, 1, 1);
    CHECK(report.folds.size() == 2);
    CHECK(fs::exists(fs::path(cfg.out) / "run_d2_m50_e8_h1_L1_report.json"));
    CHECK(fs::exists(fs::path(cfg.out) / "run_d2_m50_e8_h1_L1_summary.txt"));
    CHECK(fs::exists(fs::path(cfg.out) / "run_d2_m50_e8_h1_L1.topt"));

    std::string summary = slurp(fs::path(cfg.out) / "run_d2_m50_e8_h1_L1_summary.txt");
    CHECK(summary.find("mean accuracy") != std::string::npos);
}

TEST_CASE("sweep skips invalid head counts and records rows") {
    TempDir tmp("transopt_test_sweep");
    ExperimentConfig cfg = small_config((tmp.path / "cache").string());
    cfg.dims = {2};
    cfg.instances_per_class = 4;
    cfg.grid_e = {8};
    cfg.grid_h = {1, 3};  // 8 % 3 != 0 -> skipped
    cfg.grid_L = {1};
    cfg.train.folds = 2;
    cfg.train.max_epochs = 1;
    cfg.train.val_fraction = 0.34;
    cmd_generate(cfg);
    cmd_sweep(cfg);

    auto rows = read_sweep_csv((fs::path(cfg.out) / "sweep.csv").string());
    CHECK(rows.size() == 2);  // one valid point x two folds
    for (const auto& r : rows) CHECK(r.h == 1);
}
