#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "genusforge/config.hpp"
#include "genusforge/metrics.hpp"
#include "genusforge/optimize.hpp"
#include "genusforge/primitives.hpp"

namespace genusforge {

struct ViewSet {
    std::vector<Camera> cameras;
    std::vector<RenderedView> views;
};

inline ViewSet render_target_views(const HalfEdgeMesh& gt, int count, double radius, int resolution,
                                   double fov_y, double sigma_px) {
    ViewSet set;
    set.cameras = make_camera_rig(count, radius, resolution, resolution, fov_y);
    set.views.resize(set.cameras.size());
    parallel_for(int(set.cameras.size()), [&](std::int64_t i) {
        set.views[i] = render(gt, set.cameras[i], sigma_px);
    });
    return set;
}

/// Render a ground-truth mesh into per-view silhouette + normal PNGs plus a
/// manifest describing the rig. Deterministic for a fixed seed.
inline void make_targets(const HalfEdgeMesh& gt, int count, double radius, int resolution,
                         double fov_y, double sigma_px, std::uint64_t seed,
                         const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    ViewSet set = render_target_views(gt, count, radius, resolution, fov_y, sigma_px);

    nlohmann::json manifest;
    manifest["views"] = count;
    manifest["resolution"] = resolution;
    manifest["radius"] = radius;
    manifest["fov_y"] = fov_y;
    manifest["sigma_px"] = sigma_px;
    manifest["seed"] = seed;
    manifest["cameras"] = nlohmann::json::array();
    for (std::size_t i = 0; i < set.cameras.size(); ++i) {
        const Camera& cam = set.cameras[i];
        char sil[64], nrm[64];
        std::snprintf(sil, sizeof sil, "view_%03zu_sil.png", i);
        std::snprintf(nrm, sizeof nrm, "view_%03zu_normal.png", i);

        save_png(set.views[i].coverage, out_dir + "/" + sil);
        Image enc(cam.width, cam.height, 3);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x)
                for (int c = 0; c < 3; ++c)
                    enc.at(x, y, c) = set.views[i].normal.at(x, y, c) * 0.5 + 0.5;
        save_png(enc, out_dir + "/" + nrm);

        manifest["cameras"].push_back({{"id", cam.id},
                                       {"position", {cam.position.x(), cam.position.y(), cam.position.z()}},
                                       {"look_at", {cam.look_at.x(), cam.look_at.y(), cam.look_at.z()}},
                                       {"up", {cam.up_hint.x(), cam.up_hint.y(), cam.up_hint.z()}},
                                       {"fov_y", cam.fov_y},
                                       {"width", cam.width},
                                       {"height", cam.height},
                                       {"silhouette", sil},
                                       {"normal", nrm}});
    }
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) fail("IoError", "cannot write manifest in " + out_dir);
    out << manifest.dump(2) << "\n";
}

inline ViewSet load_targets(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) fail("IoError", "cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        fail("ParseError", std::string("bad manifest: ") + e.what());
    }
    ViewSet set;
    for (const auto& jc : manifest.at("cameras")) {
        Camera cam;
        cam.id = jc.at("id").get<int>();
        auto pos = jc.at("position");
        cam.position = Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>());
        auto look = jc.at("look_at");
        cam.look_at = Vec3(look[0].get<double>(), look[1].get<double>(), look[2].get<double>());
        auto up = jc.at("up");
        cam.up_hint = Vec3(up[0].get<double>(), up[1].get<double>(), up[2].get<double>());
        cam.fov_y = jc.at("fov_y").get<double>();
        cam.width = jc.at("width").get<int>();
        cam.height = jc.at("height").get<int>();

        RenderedView view;
        view.camera_id = cam.id;
        view.coverage = load_png(dir + "/" + jc.at("silhouette").get<std::string>());
        Image enc = load_png(dir + "/" + jc.at("normal").get<std::string>());
        view.normal = Image(enc.width, enc.height, 3);
        for (int y = 0; y < enc.height; ++y)
            for (int x = 0; x < enc.width; ++x)
                for (int c = 0; c < 3; ++c)
                    view.normal.at(x, y, c) = enc.at(x, y, c) * 2.0 - 1.0;
        if (view.coverage.channels != 1)
            fail("ParseError", "silhouette PNG must be grayscale");
        set.cameras.push_back(cam);
        set.views.push_back(std::move(view));
    }
    return set;
}

struct RunResult {
    HalfEdgeMesh final_mesh;
    ReconstructReport report;
    EvalReport eval;
    bool has_eval = false;
};

inline HalfEdgeMesh initial_mesh_from_config(const RunConfig& cfg) {
    if (!cfg.init_mesh.empty()) return load_obj(cfg.init_mesh);
    return make_primitive({cfg.genus, cfg.res, cfg.scale});
}

/// The `reconstruct` pipeline: assemble targets, run the optimization loop,
/// write the run directory (config copy, loss CSV, snapshots, final OBJ,
/// eval report when ground truth is available).
inline RunResult run_reconstruct(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    ViewSet targets;
    HalfEdgeMesh gt;
    bool has_gt = false;
    if (!cfg.target_mesh.empty()) {
        gt = load_obj(cfg.target_mesh);
        validate_full(gt);
        normalize_unit_radius(gt);
        double fov_y = cfg.fov_deg * kPi / 180.0;
        targets = render_target_views(gt, cfg.views, cfg.radius, cfg.resolution, fov_y, cfg.sigma_px);
        has_gt = true;
    } else if (!cfg.target_views_dir.empty()) {
        targets = load_targets(cfg.target_views_dir);
    } else {
        fail("ConfigError", "config needs target.mesh or target.views_dir");
    }

    ReconstructOptions opts;
    opts.cameras = targets.cameras;
    opts.targets = std::move(targets.views);
    opts.init_mesh = initial_mesh_from_config(cfg);
    opts.sigma_px = cfg.sigma_px;
    opts.w1 = cfg.w1;
    opts.w2 = cfg.w2;
    opts.alpha = cfg.alpha;
    opts.beta1 = cfg.beta1;
    opts.beta2 = cfg.beta2;
    opts.adam_eps = cfg.adam_eps;
    opts.lambda = cfg.lambda;
    opts.remesh = cfg.remesh;
    opts.iterations = cfg.iterations;
    opts.plateau_window = cfg.plateau_window;
    opts.plateau_rel = cfg.plateau_rel;
    opts.snapshot_every = cfg.snapshot_every;
    opts.out_dir = out_dir;
    opts.seed = cfg.seed;

    RunResult result;
    if (!out_dir.empty()) {
        std::ofstream cfg_copy(out_dir + "/config.txt");
        cfg_copy << dump_config(cfg);
    }
    result.final_mesh = reconstruct(opts, result.report);
    if (!out_dir.empty()) {
        save_obj(result.final_mesh, out_dir + "/final.obj");
        std::ofstream log(out_dir + "/log.txt");
        for (const auto& ev : result.report.remesh_events)
            log << "iter " << ev.iter << " "
                << (ev.mode == RemeshMode::Coarsen ? "coarsen" : "refine")
                << " splits=" << ev.report.splits << " collapses=" << ev.report.collapses
                << " flips=" << ev.report.flips << " smooth_passes=" << ev.report.smooth_passes
                << " vertices=" << ev.num_vertices_after << "\n";
        log << "final_genus " << result.report.final_genus << "\n";
        log << "final_inverted_faces " << result.report.final_num_inverted << "\n";
        log << "plateau_stopped " << (result.report.plateau_stopped ? 1 : 0) << "\n";
    }

    if (has_gt) {
        EvalOptions eopts;
        eopts.samples = 50000;
        eopts.seed = cfg.seed + 1;
        result.eval = evaluate_meshes(result.final_mesh, gt, eopts);
        result.has_eval = true;
        if (!out_dir.empty()) {
            std::ofstream ev(out_dir + "/eval.csv");
            ev << "chamfer,volume_iou,samples,grid_resolution\n";
            ev << result.eval.chamfer << "," << result.eval.volume_iou << ","
               << result.eval.sample_count << "," << result.eval.grid_resolution << "\n";
        }
    }
    return result;
}

}  // namespace genusforge
