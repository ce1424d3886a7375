#pragma once

#include <map>
#include <unordered_map>

#include "genusforge/halfedge.hpp"

namespace genusforge {

struct PrimitiveSpec {
    int genus = 0;
    int resolution = 16;  // segments around each handle loop
    double scale = 1.0;   // bounding radius
};

namespace detail {

inline void center_and_fit(std::vector<Vec3>& pts, double radius) {
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vec3 c = 0.5 * (lo + hi);
    double r = 0;
    for (const Vec3& p : pts) r = std::max(r, (p - c).norm());
    double s = radius / r;
    for (Vec3& p : pts) p = (p - c) * s;
}

inline HalfEdgeMesh orient_outward(std::vector<std::array<int, 3>> tris, std::vector<Vec3> pts) {
    HalfEdgeMesh mesh = build_mesh(tris, pts);
    if (mesh.is_closed() && signed_volume(mesh) < 0) {
        for (auto& t : tris) std::swap(t[1], t[2]);
        mesh = build_mesh(tris, std::move(pts));
    }
    return mesh;
}

}  // namespace detail

/// Icosphere: subdivided icosahedron projected to the sphere.
inline HalfEdgeMesh make_icosphere(int subdivisions, double radius = 1.0) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> pts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (Vec3& p : pts) p.normalize();

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (pts[a] + pts[b]).normalized();
            pts.push_back(m);
            int id = int(pts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    for (Vec3& p : pts) p *= radius;
    return detail::orient_outward(std::move(tris), std::move(pts));
}

/// Regular grid torus: `major` segments around the main loop (z-axis),
/// `minor` around the tube.
inline HalfEdgeMesh make_grid_torus(int major, int minor, double ring_radius, double tube_radius) {
    if (major < 3 || minor < 3) fail("ResolutionTooLow", "torus needs >= 3 segments per loop");
    std::vector<Vec3> pts;
    pts.reserve(std::size_t(major) * minor);
    for (int i = 0; i < major; ++i) {
        double th = 2.0 * kPi * i / major;
        for (int j = 0; j < minor; ++j) {
            double ph = 2.0 * kPi * j / minor;
            double rr = ring_radius + tube_radius * std::cos(ph);
            pts.emplace_back(rr * std::cos(th), rr * std::sin(th), tube_radius * std::sin(ph));
        }
    }
    std::vector<std::array<int, 3>> tris;
    tris.reserve(std::size_t(major) * minor * 2);
    auto id = [&](int i, int j) { return (i % major) * minor + (j % minor); };
    for (int i = 0; i < major; ++i) {
        for (int j = 0; j < minor; ++j) {
            int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            tris.push_back({a, b, c});
            tris.push_back({a, c, d});
        }
    }
    return detail::orient_outward(std::move(tris), std::move(pts));
}

namespace detail {

// Boundary surface of a voxel solid: one outward quad (two triangles) per
// solid/empty cell interface. The occupancy predicate must produce a solid
// with no edge- or corner-only adjacencies, which keeps the surface manifold.
template <typename Occupied>
inline HalfEdgeMesh voxel_surface(int nx, int ny, int nz, Occupied occ) {
    std::unordered_map<std::int64_t, int> vid;
    std::vector<Vec3> pts;
    std::vector<std::array<int, 3>> tris;
    auto corner = [&](int x, int y, int z) {
        std::int64_t key = (std::int64_t(x) * (ny + 2) + y) * (nz + 2) + z;
        auto it = vid.find(key);
        if (it != vid.end()) return it->second;
        pts.emplace_back(double(x), double(y), double(z));
        vid.emplace(key, int(pts.size()) - 1);
        return int(pts.size()) - 1;
    };
    auto solid = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return false;
        return occ(x, y, z);
    };
    // quad corner offsets per face direction, wound so the normal points
    // toward the empty neighbor
    static const int dirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    static const int quads[6][4][3] = {
        {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}},
        {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}},
        {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}},
        {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}},
        {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},
        {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}};
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (!solid(x, y, z)) continue;
                for (int d = 0; d < 6; ++d) {
                    if (solid(x + dirs[d][0], y + dirs[d][1], z + dirs[d][2])) continue;
                    int c[4];
                    for (int k = 0; k < 4; ++k)
                        c[k] = corner(x + quads[d][k][0], y + quads[d][k][1], z + quads[d][k][2]);
                    tris.push_back({c[0], c[1], c[2]});
                    tris.push_back({c[0], c[2], c[3]});
                }
            }
    return orient_outward(std::move(tris), std::move(pts));
}

// Synchronous uniform smoothing step p += factor * (ring centroid - p).
inline void uniform_smooth_step(HalfEdgeMesh& mesh, double factor) {
    std::vector<Vec3> next(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const auto ring = one_ring(mesh, v);
        Vec3 centroid = Vec3::Zero();
        for (int n : ring.neighbors) centroid += mesh.positions[n];
        centroid /= double(ring.neighbors.size());
        next[v] = mesh.positions[v] + factor * (centroid - mesh.positions[v]);
    }
    mesh.positions = std::move(next);
}

}  // namespace detail

/// Closed orientable mesh of prescribed genus: icosphere (g=0), grid torus
/// (g=1), or a slab with g through-holes in a row (g>=2, voxel surface with
/// a few Taubin rounding passes). Fits inside the sphere of radius
/// spec.scale around the origin.
inline HalfEdgeMesh make_primitive(const PrimitiveSpec& spec) {
    if (spec.genus < 0) fail("ResolutionTooLow", "genus must be non-negative");
    if (spec.scale <= 0) fail("ResolutionTooLow", "scale must be positive");
    HalfEdgeMesh mesh;
    if (spec.genus == 0) {
        if (spec.resolution < 2) fail("ResolutionTooLow", "sphere needs resolution >= 2");
        int subdiv = std::clamp(int(std::lround(std::log2(spec.resolution / 2.0))), 1, 7);
        mesh = make_icosphere(subdiv, spec.scale);
    } else if (spec.genus == 1) {
        if (spec.resolution < 8) fail("ResolutionTooLow", "each handle loop needs >= 8 segments");
        int minor = spec.resolution;
        int major = std::max(8, int(std::lround(spec.resolution * 7.0 / 3.0)));
        mesh = make_grid_torus(major, minor, 0.7, 0.3);
        for (Vec3& p : mesh.positions) p *= spec.scale;  // R + r = 1
    } else {
        if (spec.resolution < 8) fail("ResolutionTooLow", "each handle loop needs >= 8 segments");
        const int a = std::max(2, spec.resolution / 4);  // hole side, 4a segments per loop
        const int w = a, h = a;
        const int g = spec.genus;
        const int nx = g * a + (g + 1) * w, ny = a + 2 * w, nz = h;
        auto occ = [&](int x, int y, int z) {
            (void)z;
            if (y < w || y >= w + a) return true;
            int cell = (x - w) % (a + w);
            int hole = (x - w) / (a + w);
            return x < w || hole >= g || cell >= a;
        };
        mesh = detail::voxel_surface(nx, ny, nz, occ);
        for (int pass = 0; pass < 3; ++pass) {
            detail::uniform_smooth_step(mesh, 0.5);
            detail::uniform_smooth_step(mesh, -0.53);
        }
        detail::center_and_fit(mesh.positions, spec.scale);
    }
    validate_full(mesh);
    TopologySummary s = topology_summary(mesh);
    if (!s.genus || *s.genus != spec.genus)
        fail("ResolutionTooLow", "generated genus does not match requested genus");
    return mesh;
}

}  // namespace genusforge
