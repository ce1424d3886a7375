#pragma once

#include <functional>
#include <numeric>

#include "genusforge/halfedge.hpp"
#include "genusforge/primitives.hpp"

namespace genusforge::testsupport {

inline HalfEdgeMesh make_tetrahedron() {
    std::vector<Vec3> pts = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return build_mesh(tris, pts);
}

inline HalfEdgeMesh make_icosahedron() { return make_icosphere(0, 1.0); }

/// Open planar grid patch of (nx+1) x (ny+1) vertices at spacing h.
inline HalfEdgeMesh make_grid_patch(int nx, int ny, double h = 1.0) {
    std::vector<Vec3> pts;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) pts.emplace_back(i * h, j * h, 0.0);
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return build_mesh(tris, pts);
}

/// Closed capped cylinder along z: radius r, half-length L, `segments`
/// around, `rings` along the side.
inline HalfEdgeMesh make_capped_cylinder(double r, double half_len, int segments, int rings) {
    std::vector<Vec3> pts;
    for (int j = 0; j <= rings; ++j) {
        double z = -half_len + 2.0 * half_len * j / rings;
        for (int i = 0; i < segments; ++i) {
            double th = 2.0 * kPi * i / segments;
            pts.emplace_back(r * std::cos(th), r * std::sin(th), z);
        }
    }
    int bottom = int(pts.size());
    pts.emplace_back(0, 0, -half_len);
    int top = int(pts.size());
    pts.emplace_back(0, 0, half_len);

    auto id = [&](int i, int j) { return j * segments + (i % segments); };
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < rings; ++j)
        for (int i = 0; i < segments; ++i) {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    for (int i = 0; i < segments; ++i) {
        tris.push_back({bottom, id(i + 1, 0), id(i, 0)});
        tris.push_back({top, id(i, rings), id(i + 1, rings)});
    }
    return build_mesh(tris, pts);
}

/// Icosphere with seeded radial + tangential vertex noise.
inline HalfEdgeMesh make_noisy_icosphere(int subdivisions, double amplitude, std::uint64_t seed) {
    HalfEdgeMesh mesh = make_icosphere(subdivisions, 1.0);
    Rng rng(seed);
    for (Vec3& p : mesh.positions) {
        Vec3 noise(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        p += amplitude * noise;
    }
    return mesh;
}

/// Independent genus oracle: cycle-space rank of the edge graph via a
/// spanning tree ((|E| - |V| + 1) - (|F| - 1)) / 2. Requires a connected
/// closed mesh.
inline int genus_cycle_rank_oracle(const HalfEdgeMesh& mesh) {
    const int V = mesh.num_vertices();
    std::vector<int> parent(V);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    int tree_edges = 0;
    for (int h = 0; h < mesh.num_halfedges(); ++h) {
        int u = mesh.origin(h), v = mesh.head(h);
        if (u > v) continue;
        int ru = find(u), rv = find(v);
        if (ru != rv) {
            parent[ru] = rv;
            ++tree_edges;
        }
    }
    if (tree_edges != V - 1) fail("ValidationError", "mesh is not connected");
    int cycle_rank = mesh.num_edges() - (V - 1);
    int face_relations = mesh.num_faces() - 1;
    return (cycle_rank - face_relations) / 2;
}

/// Central finite difference of a scalar function along one coordinate.
inline double central_difference(const std::function<double()>& eval, double& coord, double delta) {
    double saved = coord;
    coord = saved + delta;
    double hi = eval();
    coord = saved - delta;
    double lo = eval();
    coord = saved;
    return (hi - lo) / (2.0 * delta);
}

}  // namespace genusforge::testsupport
