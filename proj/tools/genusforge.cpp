#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "genusforge/pipeline.hpp"

using namespace genusforge;

namespace {

struct InitFlag {
    int genus = -1;
    int res = 16;
    double scale = 1.0;
    bool set = false;
};

// --init genus=<g>,res=<n>,scale=<s>
InitFlag parse_init_flag(const std::string& text) {
    InitFlag flag;
    flag.set = true;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t eq = item.find('=');
        if (eq == std::string::npos) fail("ConfigError", "--init expects k=v pairs: " + item);
        std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "genus") flag.genus = int(detail::parse_int(value, "init.genus"));
        else if (key == "res") flag.res = int(detail::parse_int(value, "init.res"));
        else if (key == "scale") flag.scale = detail::parse_double(value, "init.scale");
        else fail("ConfigError", "unknown --init key '" + key + "'");
    }
    if (flag.genus < 0) fail("ConfigError", "--init needs genus=<g>");
    return flag;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"genusforge: topology-consistent multi-view mesh reconstruction"};
    app.require_subcommand(0, 1);

    bool dump_defaults = false;
    app.add_flag("--dump-config", dump_defaults, "print the default config and exit");

    // make-targets
    auto* mk = app.add_subcommand("make-targets", "render a ground-truth mesh into a view set");
    std::string mk_mesh, mk_out;
    int mk_views = 36, mk_res = 128;
    double mk_radius = 2.5, mk_fov = 50.0, mk_sigma = 1.0;
    std::uint64_t mk_seed = 0;
    bool mk_no_normalize = false;
    mk->add_option("--mesh", mk_mesh, "ground-truth OBJ")->required();
    mk->add_option("--out", mk_out, "output directory")->required();
    mk->add_option("--views", mk_views, "camera count");
    mk->add_option("--resolution", mk_res, "image width/height");
    mk->add_option("--radius", mk_radius, "camera sphere radius");
    mk->add_option("--fov", mk_fov, "vertical field of view (degrees)");
    mk->add_option("--sigma", mk_sigma, "silhouette softness (pixels)");
    mk->add_option("--seed", mk_seed, "random seed recorded in the manifest");
    mk->add_flag("--no-normalize", mk_no_normalize, "skip unit-radius normalization");

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "run the optimization pipeline");
    std::string rc_config, rc_out = "run", rc_init;
    std::uint64_t rc_seed = 0;
    bool rc_seed_set = false;
    rc->add_option("--config", rc_config, "config file")->required();
    rc->add_option("--out", rc_out, "run directory");
    rc->add_option("--seed", rc_seed, "override the config seed")->each([&](const std::string&) { rc_seed_set = true; });
    rc->add_option("--init", rc_init, "override initialization: genus=<g>,res=<n>,scale=<s>");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "CD + volume IoU between two OBJ meshes");
    std::string ev_a, ev_b;
    int ev_samples = 100000, ev_grid = 128;
    std::uint64_t ev_seed = 11;
    ev->add_option("source", ev_a, "reconstructed OBJ")->required();
    ev->add_option("target", ev_b, "ground-truth OBJ")->required();
    ev->add_option("--samples", ev_samples, "surface sample count");
    ev->add_option("--grid", ev_grid, "voxel grid resolution");
    ev->add_option("--seed", ev_seed, "sampling seed");

    // remesh
    auto* rm = app.add_subcommand("remesh", "one curvature-adaptive remesh event on an OBJ");
    std::string rm_in, rm_out, rm_mode = "refine";
    RemeshParams rm_params;
    rm->add_option("--in", rm_in, "input OBJ")->required();
    rm->add_option("--out", rm_out, "output OBJ")->required();
    rm->add_option("--mode", rm_mode, "coarsen | refine");
    rm->add_option("--epsilon", rm_params.epsilon, "chordal tolerance");
    rm->add_option("--min-edge", rm_params.min_edge, "minimum target edge length");
    rm->add_option("--max-edge", rm_params.max_edge, "maximum target edge length");
    rm->add_option("--mu", rm_params.smooth_weight, "tangential smoothing weight");
    rm->add_option("--passes", rm_params.passes, "passes per event");

    // inspect
    auto* in = app.add_subcommand("inspect", "topology summary and optional curvature CSV");
    std::string in_path, in_csv;
    in->add_option("mesh", in_path, "OBJ to inspect")->required();
    in->add_option("--curvature-csv", in_csv, "write per-vertex K,H,k1,k2");

    try {
        app.parse(argc, argv);

        if (dump_defaults) {
            std::cout << dump_config(RunConfig{});
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::cout << app.help();
            return 0;
        }

        if (mk->parsed()) {
            HalfEdgeMesh gt = load_obj(mk_mesh);
            validate_full(gt);
            if (!mk_no_normalize) normalize_unit_radius(gt);
            make_targets(gt, mk_views, mk_radius, mk_res, mk_fov * kPi / 180.0, mk_sigma, mk_seed, mk_out);
            std::cout << "wrote " << mk_views << " views to " << mk_out << "\n";
        } else if (rc->parsed()) {
            RunConfig cfg = parse_config_file(rc_config);
            if (rc_seed_set) cfg.seed = rc_seed;
            if (!rc_init.empty()) {
                InitFlag flag = parse_init_flag(rc_init);
                cfg.genus = flag.genus;
                cfg.res = flag.res;
                cfg.scale = flag.scale;
                cfg.init_mesh.clear();
            }
            RunResult result = run_reconstruct(cfg, rc_out);
            std::cout << "final genus " << result.report.final_genus << ", "
                      << result.final_mesh.num_vertices() << " vertices, "
                      << result.report.history.size() << " iterations\n";
            if (result.has_eval)
                std::cout << "chamfer " << result.eval.chamfer << ", volume IoU "
                          << result.eval.volume_iou << "\n";
            std::cout << "artifacts in " << rc_out << "\n";
        } else if (ev->parsed()) {
            HalfEdgeMesh a = load_obj(ev_a), b = load_obj(ev_b);
            EvalOptions opts;
            opts.samples = ev_samples;
            opts.grid_resolution = ev_grid;
            opts.seed = ev_seed;
            EvalReport report = evaluate_meshes(a, b, opts);
            std::cout << "# point-to-surface chamfer, area-weighted samples, unit-radius "
                         "normalization, parity-voxel IoU\n";
            std::cout << "chamfer,volume_iou,samples,grid_resolution\n";
            std::printf("%.9g,%.9g,%d,%d\n", report.chamfer, report.volume_iou,
                        report.sample_count, report.grid_resolution);
        } else if (rm->parsed()) {
            HalfEdgeMesh mesh = load_obj(rm_in);
            validate_full(mesh);
            RemeshMode mode;
            if (rm_mode == "coarsen") mode = RemeshMode::Coarsen;
            else if (rm_mode == "refine") mode = RemeshMode::Refine;
            else fail("ConfigError", "unknown remesh mode '" + rm_mode + "'");
            LaplacianOperator L = build_laplacian(mesh, LaplacianOperator::Scheme::Cotangent);
            CurvatureField curv = curvature_field(mesh, L);
            RemeshResult result = remesh_event(mesh, curv, rm_params, mode);
            save_obj(result.mesh, rm_out);
            std::cout << "splits=" << result.report.splits << " collapses=" << result.report.collapses
                      << " flips=" << result.report.flips << " vertices=" << result.mesh.num_vertices()
                      << "\n";
        } else if (in->parsed()) {
            HalfEdgeMesh mesh = load_obj(in_path);
            TopologySummary s = topology_summary(mesh);
            std::cout << "vertices " << s.num_vertices << "\n"
                      << "edges " << s.num_edges << "\n"
                      << "faces " << s.num_faces << "\n"
                      << "euler_characteristic " << s.euler_characteristic << "\n"
                      << "closed " << (s.is_closed ? 1 : 0) << "\n"
                      << "orientable " << (s.is_orientable ? 1 : 0) << "\n";
            if (s.genus) std::cout << "genus " << *s.genus << "\n";
            else std::cout << "genus n/a\n";
            if (!in_csv.empty()) {
                LaplacianOperator L = build_laplacian(mesh, LaplacianOperator::Scheme::Cotangent);
                export_curvature_csv(curvature_field(mesh, L), in_csv);
                std::cout << "curvature csv " << in_csv << "\n";
            }
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << e.kind() << ": " << e.what() << "\n";
        return e.kind() == "ConfigError" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "InternalError: " << e.what() << "\n";
        return 1;
    }
}
