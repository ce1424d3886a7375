#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "genusforge/core.hpp"
#include "genusforge/remesh.hpp"

namespace genusforge {

/// All pipeline parameters. Parsed from plain key=value text with
/// [section] headers; unknown sections or keys are hard errors.
struct RunConfig {
    std::uint64_t seed = 0;

    // [target] — either a ground-truth mesh to render views from, or a
    // directory of PNG views written by make-targets
    std::string target_mesh;
    std::string target_views_dir;
    int views = 36;
    int resolution = 64;
    double radius = 2.5;
    double fov_deg = 50.0;

    // [init]
    int genus = 0;
    int res = 16;
    double scale = 1.0;
    std::string init_mesh;  // optional OBJ overriding the primitive

    // [render]
    double sigma_px = 1.0;

    // [remesh]
    RemeshParams remesh;

    // [optimizer]
    double alpha = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda = 19.0;
    double w1 = 1e-4;
    double w2 = 100.0;

    // [budget]
    int iterations = 600;
    int plateau_window = 100;
    double plateau_rel = 1e-5;
    int snapshot_every = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        fail("ConfigError", "invalid number for key '" + key + "': " + v);
    }
}

inline std::int64_t parse_int(const std::string& v, const std::string& key) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail("ConfigError", "invalid integer for key '" + key + "': " + v);
    return out;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("ConfigError", "malformed section at line " + std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            if (section != "target" && section != "init" && section != "render" &&
                section != "remesh" && section != "optimizer" && section != "budget")
                fail("ConfigError", "unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail("ConfigError", "expected key=value at line " + std::to_string(lineno));
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        std::string qual = section.empty() ? key : section + "." + key;

        using detail::parse_double;
        using detail::parse_int;
        if (qual == "seed") cfg.seed = std::uint64_t(parse_int(value, qual));
        else if (qual == "target.mesh") cfg.target_mesh = value;
        else if (qual == "target.views_dir") cfg.target_views_dir = value;
        else if (qual == "target.views") cfg.views = int(parse_int(value, qual));
        else if (qual == "target.resolution") cfg.resolution = int(parse_int(value, qual));
        else if (qual == "target.radius") cfg.radius = parse_double(value, qual);
        else if (qual == "target.fov_deg") cfg.fov_deg = parse_double(value, qual);
        else if (qual == "init.genus") cfg.genus = int(parse_int(value, qual));
        else if (qual == "init.res") cfg.res = int(parse_int(value, qual));
        else if (qual == "init.scale") cfg.scale = parse_double(value, qual);
        else if (qual == "init.mesh") cfg.init_mesh = value;
        else if (qual == "render.sigma_px") cfg.sigma_px = parse_double(value, qual);
        else if (qual == "remesh.epsilon") cfg.remesh.epsilon = parse_double(value, qual);
        else if (qual == "remesh.min_edge") cfg.remesh.min_edge = parse_double(value, qual);
        else if (qual == "remesh.max_edge") cfg.remesh.max_edge = parse_double(value, qual);
        else if (qual == "remesh.target_valence") cfg.remesh.target_valence = int(parse_int(value, qual));
        else if (qual == "remesh.smooth_weight") cfg.remesh.smooth_weight = parse_double(value, qual);
        else if (qual == "remesh.passes") cfg.remesh.passes = int(parse_int(value, qual));
        else if (qual == "remesh.period_min") cfg.remesh.period_min = int(parse_int(value, qual));
        else if (qual == "remesh.period_max") cfg.remesh.period_max = int(parse_int(value, qual));
        else if (qual == "optimizer.alpha") cfg.alpha = parse_double(value, qual);
        else if (qual == "optimizer.beta1") cfg.beta1 = parse_double(value, qual);
        else if (qual == "optimizer.beta2") cfg.beta2 = parse_double(value, qual);
        else if (qual == "optimizer.adam_eps") cfg.adam_eps = parse_double(value, qual);
        else if (qual == "optimizer.lambda") cfg.lambda = parse_double(value, qual);
        else if (qual == "optimizer.w1") cfg.w1 = parse_double(value, qual);
        else if (qual == "optimizer.w2") cfg.w2 = parse_double(value, qual);
        else if (qual == "budget.iterations") cfg.iterations = int(parse_int(value, qual));
        else if (qual == "budget.plateau_window") cfg.plateau_window = int(parse_int(value, qual));
        else if (qual == "budget.plateau_rel") cfg.plateau_rel = parse_double(value, qual);
        else if (qual == "budget.snapshot_every") cfg.snapshot_every = int(parse_int(value, qual));
        else fail("ConfigError", "unknown key '" + qual + "'");
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("ConfigError", "cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline std::string dump_config(const RunConfig& c) {
    std::ostringstream o;
    o << "seed = " << c.seed << "\n\n";
    o << "[target]\n";
    o << "mesh = " << c.target_mesh << "\n";
    o << "views_dir = " << c.target_views_dir << "\n";
    o << "views = " << c.views << "\n";
    o << "resolution = " << c.resolution << "\n";
    o << "radius = " << c.radius << "\n";
    o << "fov_deg = " << c.fov_deg << "\n\n";
    o << "[init]\n";
    o << "genus = " << c.genus << "\n";
    o << "res = " << c.res << "\n";
    o << "scale = " << c.scale << "\n";
    o << "mesh = " << c.init_mesh << "\n\n";
    o << "[render]\n";
    o << "sigma_px = " << c.sigma_px << "\n\n";
    o << "[remesh]\n";
    o << "epsilon = " << c.remesh.epsilon << "\n";
    o << "min_edge = " << c.remesh.min_edge << "\n";
    o << "max_edge = " << c.remesh.max_edge << "\n";
    o << "target_valence = " << c.remesh.target_valence << "\n";
    o << "smooth_weight = " << c.remesh.smooth_weight << "\n";
    o << "passes = " << c.remesh.passes << "\n";
    o << "period_min = " << c.remesh.period_min << "\n";
    o << "period_max = " << c.remesh.period_max << "\n\n";
    o << "[optimizer]\n";
    o << "alpha = " << c.alpha << "\n";
    o << "beta1 = " << c.beta1 << "\n";
    o << "beta2 = " << c.beta2 << "\n";
    o << "adam_eps = " << c.adam_eps << "\n";
    o << "lambda = " << c.lambda << "\n";
    o << "w1 = " << c.w1 << "\n";
    o << "w2 = " << c.w2 << "\n\n";
    o << "[budget]\n";
    o << "iterations = " << c.iterations << "\n";
    o << "plateau_window = " << c.plateau_window << "\n";
    o << "plateau_rel = " << c.plateau_rel << "\n";
    o << "snapshot_every = " << c.snapshot_every << "\n";
    return o.str();
}

}  // namespace genusforge
