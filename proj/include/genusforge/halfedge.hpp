#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "genusforge/core.hpp"

namespace genusforge {

// Index-based half-edge record. Half-edge h runs origin(h) -> origin(next(h)).
// Face half-edges are stored as consecutive triples (3*f, 3*f+1, 3*f+2), so
// ids are a pure function of the input face order.
struct Halfedge {
    int origin = kInvalid;
    int twin = kInvalid;  // kInvalid on boundary edges
    int next = kInvalid;
    int face = kInvalid;
};

struct HalfEdgeMesh {
    std::vector<Vec3> positions;        // one per vertex
    std::vector<Halfedge> halfedges;    // 3 per face
    std::vector<int> faces;             // representative half-edge per face
    std::vector<int> vertices;          // representative outgoing half-edge per vertex

    int num_vertices() const { return int(positions.size()); }
    int num_faces() const { return int(faces.size()); }
    int num_halfedges() const { return int(halfedges.size()); }

    int next(int h) const { return halfedges[h].next; }
    int prev(int h) const { return halfedges[h].next >= 0 ? halfedges[halfedges[h].next].next : kInvalid; }
    int twin(int h) const { return halfedges[h].twin; }
    int origin(int h) const { return halfedges[h].origin; }
    int head(int h) const { return halfedges[halfedges[h].next].origin; }
    int face_of(int h) const { return halfedges[h].face; }

    std::array<int, 3> face_vertices(int f) const {
        int h = faces[f];
        return {origin(h), origin(next(h)), origin(next(next(h)))};
    }

    int num_boundary_halfedges() const {
        int b = 0;
        for (const auto& he : halfedges) b += (he.twin == kInvalid);
        return b;
    }

    // Edges are derived from half-edge pairs: interior edges have two
    // half-edges, boundary edges one.
    int num_edges() const { return (num_halfedges() + num_boundary_halfedges()) / 2; }

    bool is_closed() const { return num_boundary_halfedges() == 0; }

    bool is_boundary_vertex(int v) const {
        int h = vertices[v];
        int start = h;
        do {
            if (twin(h) == kInvalid) return true;
            int p = prev(h);
            if (twin(p) == kInvalid) return true;
            h = twin(p);
        } while (h != start);
        return false;
    }
};

struct TopologySummary {
    int num_vertices = 0;
    int num_edges = 0;
    int num_faces = 0;
    int euler_characteristic = 0;
    bool is_closed = false;
    bool is_orientable = false;
    std::optional<int> genus;  // present only for closed orientable meshes
};

namespace detail {

// Rotate an outgoing half-edge one step around its origin; kInvalid at a
// boundary. step/unstep are inverse rotations.
inline int rot_step(const HalfEdgeMesh& m, int h) {
    int p = m.prev(h);
    return m.twin(p);
}
inline int rot_unstep(const HalfEdgeMesh& m, int h) {
    int t = m.twin(h);
    return t == kInvalid ? kInvalid : m.next(t);
}

// First outgoing half-edge of the fan: for boundary vertices the one whose
// edge is a boundary edge, for interior vertices the stored representative.
inline int fan_start(const HalfEdgeMesh& m, int v) {
    int h = m.vertices[v];
    int start = h;
    do {
        if (m.twin(h) == kInvalid) return h;
        h = rot_unstep(m, h);
    } while (h != start && h != kInvalid);
    return start;
}

}  // namespace detail

struct OneRing {
    std::vector<int> neighbors;  // consistent winding order
    std::vector<int> faces;      // incident faces, same order
};

/// Ordered one-ring of vertex v. For interior vertices |neighbors| ==
/// |faces| == valence; boundary vertices get one extra neighbor closing the
/// open fan.
inline OneRing one_ring(const HalfEdgeMesh& mesh, int v) {
    OneRing ring;
    int h = detail::fan_start(mesh, v);
    int start = h;
    int guard = mesh.num_halfedges() + 1;
    while (guard-- > 0) {
        ring.neighbors.push_back(mesh.head(h));
        ring.faces.push_back(mesh.face_of(h));
        int p = mesh.prev(h);
        if (mesh.twin(p) == kInvalid) {
            ring.neighbors.push_back(mesh.origin(p));  // far endpoint of the boundary wedge
            return ring;
        }
        h = mesh.twin(p);
        if (h == start) return ring;
    }
    fail("NonManifoldVertex", "unterminated fan around vertex " + std::to_string(v));
}

inline int valence(const HalfEdgeMesh& mesh, int v) {
    return int(one_ring(mesh, v).neighbors.size());
}

/// Topological validation: every HalfEdgeMesh invariant from the type
/// contract. Throws on the first violation.
inline void validate_topology(const HalfEdgeMesh& mesh) {
    const int H = mesh.num_halfedges();
    const int V = mesh.num_vertices();
    const int F = mesh.num_faces();
    if (H != 3 * F) fail("ValidationError", "half-edge count must be 3|F|");

    for (int h = 0; h < H; ++h) {
        const auto& he = mesh.halfedges[h];
        if (he.origin < 0 || he.origin >= V) fail("ValidationError", "origin out of range");
        if (he.next < 0 || he.next >= H) fail("ValidationError", "next out of range");
        if (he.face < 0 || he.face >= F) fail("ValidationError", "face out of range");
        if (he.twin != kInvalid) {
            if (he.twin < 0 || he.twin >= H) fail("ValidationError", "twin out of range");
            if (he.twin == h) fail("ValidationError", "twin is self");
            if (mesh.halfedges[he.twin].twin != h) fail("ValidationError", "twin not involutive");
            // twins run in opposite directions (consistent orientation)
            if (mesh.origin(he.twin) != mesh.head(h) || mesh.head(he.twin) != he.origin)
                fail("InconsistentOrientation", "twin half-edges are co-oriented");
        }
        // next forms 3-cycles within one face
        int h1 = mesh.next(h), h2 = mesh.next(h1);
        if (mesh.next(h2) != h) fail("ValidationError", "next does not form a 3-cycle");
        if (mesh.face_of(h1) != he.face || mesh.face_of(h2) != he.face)
            fail("ValidationError", "3-cycle spans multiple faces");
    }
    for (int f = 0; f < F; ++f) {
        if (mesh.faces[f] < 0 || mesh.faces[f] >= H || mesh.face_of(mesh.faces[f]) != f)
            fail("ValidationError", "face representative mismatch");
        auto [a, b, c] = mesh.face_vertices(f);
        if (a == b || b == c || a == c) fail("DegenerateFace", "face " + std::to_string(f));
    }

    // Each vertex's outgoing half-edges form a single fan.
    std::vector<int> out_degree(V, 0);
    for (int h = 0; h < H; ++h) out_degree[mesh.origin(h)]++;
    for (int v = 0; v < V; ++v) {
        if (out_degree[v] == 0) fail("NonManifoldVertex", "isolated vertex " + std::to_string(v));
        if (mesh.vertices[v] < 0 || mesh.vertices[v] >= H || mesh.origin(mesh.vertices[v]) != v)
            fail("ValidationError", "vertex representative mismatch");
        OneRing ring = one_ring(mesh, v);
        if (int(ring.faces.size()) != out_degree[v])
            fail("NonManifoldVertex", "disconnected fan at vertex " + std::to_string(v));
    }

    // No duplicate directed edges.
    std::unordered_map<std::int64_t, int> seen;
    seen.reserve(std::size_t(H) * 2);
    for (int h = 0; h < H; ++h) {
        std::int64_t key = std::int64_t(mesh.origin(h)) * V + mesh.head(h);
        if (!seen.emplace(key, h).second) fail("InconsistentOrientation", "duplicate directed edge");
    }
}

inline double corner_angle(const Vec3& at, const Vec3& a, const Vec3& b) {
    Vec3 u = a - at, v = b - at;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

/// Raw angle deficit per vertex: 2pi - sum of incident interior angles
/// (pi at boundary vertices). Integrated Gaussian curvature.
inline std::vector<double> angle_deficits(const HalfEdgeMesh& mesh) {
    std::vector<double> deficit(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v)
        deficit[v] = mesh.is_boundary_vertex(v) ? kPi : 2.0 * kPi;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        const Vec3 &pa = mesh.positions[a], &pb = mesh.positions[b], &pc = mesh.positions[c];
        deficit[a] -= corner_angle(pa, pb, pc);
        deficit[b] -= corner_angle(pb, pc, pa);
        deficit[c] -= corner_angle(pc, pa, pb);
    }
    return deficit;
}

inline TopologySummary topology_summary(const HalfEdgeMesh& mesh) {
    TopologySummary s;
    s.num_vertices = mesh.num_vertices();
    s.num_faces = mesh.num_faces();
    s.num_edges = mesh.num_edges();
    s.euler_characteristic = s.num_vertices + s.num_faces - s.num_edges;
    s.is_closed = mesh.is_closed();
    s.is_orientable = true;  // construction rejects inconsistent orientation
    if (s.is_closed && s.is_orientable && (2 - s.euler_characteristic) % 2 == 0) {
        int g = (2 - s.euler_characteristic) / 2;
        if (g >= 0) s.genus = g;
    }
    return s;
}

inline Vec3 face_normal_unnormalized(const HalfEdgeMesh& mesh, int f) {
    auto [a, b, c] = mesh.face_vertices(f);
    return (mesh.positions[b] - mesh.positions[a]).cross(mesh.positions[c] - mesh.positions[a]);
}

inline Vec3 face_normal(const HalfEdgeMesh& mesh, int f) {
    Vec3 n = face_normal_unnormalized(mesh, f);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
}

inline double face_area(const HalfEdgeMesh& mesh, int f) {
    return 0.5 * face_normal_unnormalized(mesh, f).norm();
}

/// Area-weighted vertex normal.
inline Vec3 vertex_normal(const HalfEdgeMesh& mesh, int v) {
    Vec3 n = Vec3::Zero();
    for (int f : one_ring(mesh, v).faces) n += face_normal_unnormalized(mesh, f);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
}

inline double total_area(const HalfEdgeMesh& mesh) {
    double a = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) a += face_area(mesh, f);
    return a;
}

/// Signed enclosed volume (positive for outward orientation).
inline double signed_volume(const HalfEdgeMesh& mesh) {
    double vol = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        vol += mesh.positions[a].dot(mesh.positions[b].cross(mesh.positions[c]));
    }
    return vol / 6.0;
}

/// Full validation used by pipeline stages: topology plus positive face
/// areas and, for closed meshes, the discrete Gauss-Bonnet identity
/// |sum of deficits - 2*pi*chi| < 1e-8 * |F|.
inline void validate_full(const HalfEdgeMesh& mesh) {
    validate_topology(mesh);
    for (int f = 0; f < mesh.num_faces(); ++f)
        if (!(face_area(mesh, f) > 0.0)) fail("DegenerateFace", "zero-area face " + std::to_string(f));
    if (mesh.is_closed()) {
        auto deficits = angle_deficits(mesh);
        double total = 0;
        for (double d : deficits) total += d;
        int chi = topology_summary(mesh).euler_characteristic;
        double err = std::abs(total - 2.0 * kPi * chi);
        if (err >= 1e-8 * std::max(1, mesh.num_faces()))
            fail("GaussBonnetViolation",
                 "deficit sum off by " + std::to_string(err) + " for chi=" + std::to_string(chi));
    }
}

/// Build a validated half-edge mesh from a triangle list. Deterministic:
/// half-edge ids depend only on the input order.
inline HalfEdgeMesh build_mesh(const std::vector<std::array<int, 3>>& triangles,
                               std::vector<Vec3> positions) {
    HalfEdgeMesh mesh;
    mesh.positions = std::move(positions);
    const int V = mesh.num_vertices();
    const int F = int(triangles.size());
    mesh.faces.resize(F);
    mesh.vertices.assign(V, kInvalid);
    mesh.halfedges.resize(std::size_t(F) * 3);

    for (int f = 0; f < F; ++f) {
        const auto& t = triangles[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] < 0 || t[k] >= V)
                fail("ParseError", "vertex id out of range in face " + std::to_string(f));
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            fail("DegenerateFace", "repeated vertex in face " + std::to_string(f));
        for (int k = 0; k < 3; ++k) {
            Halfedge& he = mesh.halfedges[3 * f + k];
            he.origin = t[k];
            he.next = 3 * f + (k + 1) % 3;
            he.face = f;
        }
        mesh.faces[f] = 3 * f;
    }

    // Pair twins via undirected edge buckets; diagnose non-manifold and
    // co-oriented configurations exactly.
    std::unordered_map<std::int64_t, std::array<int, 2>> buckets;
    buckets.reserve(std::size_t(F) * 2);
    auto ukey = [V](int a, int b) {
        int lo = std::min(a, b), hi = std::max(a, b);
        return std::int64_t(lo) * V + hi;
    };
    for (int h = 0; h < 3 * F; ++h) {
        int u = mesh.origin(h), v = mesh.head(h);
        auto [it, fresh] = buckets.try_emplace(ukey(u, v), std::array<int, 2>{h, kInvalid});
        if (!fresh) {
            auto& slot = *it;
            if (slot.second[1] != kInvalid)
                fail("NonManifoldEdge", "edge bounded by more than two faces");
            int other = slot.second[0];
            if (mesh.origin(other) == u)
                fail("InconsistentOrientation", "two co-oriented half-edges on one edge");
            slot.second[1] = h;
            mesh.halfedges[h].twin = other;
            mesh.halfedges[other].twin = h;
        }
    }

    for (int h = 0; h < 3 * F; ++h)
        if (mesh.vertices[mesh.origin(h)] == kInvalid) mesh.vertices[mesh.origin(h)] = h;
    for (int v = 0; v < V; ++v) {
        if (mesh.vertices[v] == kInvalid) fail("NonManifoldVertex", "isolated vertex " + std::to_string(v));
        mesh.vertices[v] = detail::fan_start(mesh, v);
    }

    validate_topology(mesh);
    return mesh;
}

inline std::vector<std::array<int, 3>> face_list(const HalfEdgeMesh& mesh) {
    std::vector<std::array<int, 3>> tris(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) tris[f] = mesh.face_vertices(f);
    return tris;
}

// ---------------------------------------------------------------------------
// ASCII OBJ I/O. Floats print with %.9g (shortest form that round-trips at
// 9 significant digits); `f` entries may carry /vt/vn suffixes on input.

inline void save_obj(const HalfEdgeMesh& mesh, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) fail("IoError", "cannot open " + path + " for writing");
    for (const Vec3& p : mesh.positions)
        std::fprintf(fp, "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        std::fprintf(fp, "f %d %d %d\n", a + 1, b + 1, c + 1);
    }
    std::fclose(fp);
}

inline HalfEdgeMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    std::vector<Vec3> positions;
    std::vector<std::array<int, 3>> triangles;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z()))
                fail("ParseError", "malformed vertex at line " + std::to_string(lineno));
            positions.push_back(p);
        } else if (tag == "f") {
            std::vector<int> ids;
            std::string tok;
            while (ss >> tok) {
                // take the position index, ignore /vt/vn suffixes
                std::size_t slash = tok.find('/');
                std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                int idx = 0;
                auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
                if (ec != std::errc() || ptr != head.data() + head.size())
                    fail("ParseError", "malformed face index at line " + std::to_string(lineno));
                if (idx <= 0 || idx > int(positions.size()))
                    fail("ParseError", "face index out of range at line " + std::to_string(lineno));
                ids.push_back(idx - 1);
            }
            if (ids.size() != 3)
                fail("NonTriangular", "face with " + std::to_string(ids.size()) +
                                          " vertices at line " + std::to_string(lineno));
            triangles.push_back({ids[0], ids[1], ids[2]});
        }
        // vn/vt/o/g/s/usemtl/mtllib records are ignored
    }
    return build_mesh(triangles, std::move(positions));
}

}  // namespace genusforge
