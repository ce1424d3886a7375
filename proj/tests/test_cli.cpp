#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "genusforge/pipeline.hpp"
#include "genusforge/primitives.hpp"
#include "test_support.hpp"

using namespace genusforge;
using namespace genusforge::testsupport;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "genusforge_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config defaults and round-trip") {
    RunConfig def;
    RunConfig parsed = parse_config_text(dump_config(def));
    CHECK(parsed.views == def.views);
    CHECK(parsed.alpha == def.alpha);
    CHECK(parsed.remesh.period_min == def.remesh.period_min);
    CHECK(parsed.iterations == def.iterations);
}

TEST_CASE("unknown config keys are hard errors") {
    CHECK_THROWS_MATCHES(parse_config_text("[optimizer]\nalpa = 0.1\n"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == "ConfigError" &&
                                    std::string(e.what()).find("alpa") != std::string::npos;
                         }));
    CHECK_THROWS_MATCHES(parse_config_text("[nonsense]\n"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "ConfigError"; }));
    CHECK_THROWS_MATCHES(parse_config_text("[budget]\niterations = twelve\n"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "ConfigError"; }));
}

TEST_CASE("config values and comments parse") {
    RunConfig cfg = parse_config_text(
        "seed = 42\n"
        "[target]\nmesh = gt.obj  # ground truth\nviews = 12\nresolution = 48\n"
        "[optimizer]\nalpha = 0.02\nw2 = 5e1\n");
    CHECK(cfg.seed == 42);
    CHECK(cfg.target_mesh == "gt.obj");
    CHECK(cfg.views == 12);
    CHECK(cfg.resolution == 48);
    CHECK(cfg.alpha == Catch::Approx(0.02));
    CHECK(cfg.w2 == Catch::Approx(50.0));
}

TEST_CASE("make-targets writes a deterministic view set") {
    fs::path dir = temp_dir("targets");
    HalfEdgeMesh gt = make_icosphere(2, 1.0);
    make_targets(gt, 4, 2.5, 32, 0.9, 1.0, 7, dir.string());

    CHECK(fs::exists(dir / "manifest.json"));
    int pngs = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") ++pngs;
    CHECK(pngs == 8);  // two images per view

    ViewSet set = load_targets(dir.string());
    CHECK(set.cameras.size() == 4);
    CHECK(set.views.size() == 4);
    CHECK(set.views[0].coverage.width == 32);

    // loaded coverage matches the in-memory render up to 8-bit quantization
    RenderedView direct = render(gt, set.cameras[0], 1.0);
    double max_err = 0;
    for (std::size_t i = 0; i < direct.coverage.data.size(); ++i)
        max_err = std::max(max_err, std::abs(direct.coverage.data[i] - set.views[0].coverage.data[i]));
    CHECK(max_err <= 0.5 / 255.0 + 1e-12);

    // re-running produces bit-identical files
    std::string sil_before = read_file(dir / "view_000_sil.png");
    fs::path dir2 = temp_dir("targets2");
    make_targets(gt, 4, 2.5, 32, 0.9, 1.0, 7, dir2.string());
    CHECK(read_file(dir2 / "view_000_sil.png") == sil_before);
}

TEST_CASE("reconstruct pipeline smoke test with run directory") {
    fs::path dir = temp_dir("run");
    fs::path gt_path = dir / "gt.obj";
    save_obj(make_icosphere(3, 1.0), gt_path.string());

    RunConfig cfg;
    cfg.target_mesh = gt_path.string();
    cfg.views = 4;
    cfg.resolution = 24;
    cfg.genus = 0;
    cfg.res = 8;
    cfg.iterations = 3;
    cfg.plateau_window = 0;
    cfg.seed = 5;

    RunResult result = run_reconstruct(cfg, (dir / "out").string());
    CHECK(result.report.history.size() == 3);
    CHECK(result.has_eval);
    CHECK(fs::exists(dir / "out" / "final.obj"));
    CHECK(fs::exists(dir / "out" / "loss.csv"));
    CHECK(fs::exists(dir / "out" / "config.txt"));

    // the copied config reproduces the run
    RunConfig copied = parse_config_file((dir / "out" / "config.txt").string());
    CHECK(copied.iterations == 3);
    CHECK(copied.seed == 5);

    std::string csv = read_file(dir / "out" / "loss.csv");
    CHECK(csv.find("iter,loss_render,loss_smooth,loss_invert,num_vertices,genus") == 0);
}

TEST_CASE("reconstruct without a target errors") {
    RunConfig cfg;
    CHECK_THROWS_MATCHES(run_reconstruct(cfg, ""), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "ConfigError"; }));
}

TEST_CASE("evaluate identical meshes") {
    HalfEdgeMesh mesh = make_primitive({1, 10, 1.0});
    EvalOptions opts;
    opts.samples = 10000;
    opts.grid_resolution = 64;
    EvalReport report = evaluate_meshes(mesh, mesh, opts);
    CHECK(report.chamfer < 1e-6);
    CHECK(report.volume_iou == 1.0);
}

#ifdef GENUSFORGE_CLI_PATH
TEST_CASE("cli binary exit codes") {
    std::string cli = GENUSFORGE_CLI_PATH;
    fs::path dir = temp_dir("cli");

    CHECK(std::system((cli + " --dump-config > " + (dir / "defaults.txt").string()).c_str()) == 0);
    RunConfig def = parse_config_file((dir / "defaults.txt").string());
    CHECK(def.views == RunConfig{}.views);

    // config errors exit 2
    std::ofstream bad(dir / "bad.cfg");
    bad << "[optimizer]\nbogus = 1\n";
    bad.close();
    int rc = std::system((cli + " reconstruct --config " + (dir / "bad.cfg").string() +
                          " --out " + (dir / "out").string() + " 2> " +
                          (dir / "err.txt").string())
                             .c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // pipeline errors exit 1 with the error name on stderr
    rc = std::system((cli + " inspect " + (dir / "missing.obj").string() + " 2> " +
                      (dir / "err2.txt").string())
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 1);
    CHECK(read_file(dir / "err2.txt").find("IoError") != std::string::npos);

    // inspect prints the topology summary
    fs::path torus_path = dir / "torus.obj";
    save_obj(make_grid_torus(12, 8, 0.7, 0.3), torus_path.string());
    rc = std::system((cli + " inspect " + torus_path.string() + " > " +
                      (dir / "inspect.txt").string())
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    std::string out = read_file(dir / "inspect.txt");
    CHECK(out.find("genus 1") != std::string::npos);
    CHECK(out.find("euler_characteristic 0") != std::string::npos);

    // remesh subcommand round-trips through OBJ
    rc = std::system((cli + " remesh --in " + torus_path.string() + " --out " +
                      (dir / "remeshed.obj").string() + " --min-edge 0.05 --max-edge 0.4")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    HalfEdgeMesh remeshed = load_obj((dir / "remeshed.obj").string());
    CHECK(*topology_summary(remeshed).genus == 1);

    // evaluate subcommand emits a csv line
    rc = std::system((cli + " evaluate " + torus_path.string() + " " + torus_path.string() +
                      " --samples 2000 --grid 32 > " + (dir / "eval.txt").string())
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    CHECK(read_file(dir / "eval.txt").find("chamfer,volume_iou") != std::string::npos);
}
#endif
