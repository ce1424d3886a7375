#pragma once

#include <algorithm>
#include <vector>

#include "genusforge/curvature.hpp"
#include "genusforge/halfedge.hpp"

namespace genusforge {

struct RemeshParams {
    double epsilon = 0.01;       // allowed chordal error (length units)
    double min_edge = 0.02;      // L_min
    double max_edge = 0.5;       // L_max
    int target_valence = 6;
    double smooth_weight = 0.5;  // mu in (0,1]
    int passes = 2;              // split/collapse/flip/smooth rounds per event
    int period_min = 130;        // optimizer iterations between events
    int period_max = 200;

    void check() const {
        if (!(epsilon > 0)) fail("ConfigError", "remesh epsilon must be positive");
        if (!(min_edge > 0 && min_edge < max_edge)) fail("ConfigError", "need 0 < L_min < L_max");
        if (!(smooth_weight > 0 && smooth_weight <= 1)) fail("ConfigError", "mu must be in (0,1]");
        if (period_min < 1 || period_max < period_min) fail("ConfigError", "bad remesh period range");
    }
};

struct MutationReport {
    int splits = 0;
    int collapses = 0;
    int flips = 0;
    int smooth_passes = 0;
};

enum class RemeshMode { Coarsen, Refine };

/// Per-vertex target edge length from the chordal-error bound
/// L = sqrt(6*eps/kappa - 3*eps^2), kappa the largest absolute principal
/// curvature; flat regions get L_max.
inline std::vector<double> sizing_field(const HalfEdgeMesh& mesh, const CurvatureField& curv,
                                        const RemeshParams& params) {
    constexpr double kKappaFloor = 1e-12;
    std::vector<double> sizing(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        double kappa = std::max(std::abs(curv.k1[v]), std::abs(curv.k2[v]));
        if (kappa <= kKappaFloor) {
            sizing[v] = params.max_edge;
            continue;
        }
        double val = 6.0 * params.epsilon / kappa - 3.0 * params.epsilon * params.epsilon;
        double len = val > 0 ? std::sqrt(val) : 0.0;
        sizing[v] = std::clamp(len, params.min_edge, params.max_edge);
    }
    return sizing;
}

namespace detail {

// Mutable indexed-face mesh used inside a remesh event. Incidence is kept
// exact under splits/collapses/flips; the result is rebuilt into a
// validated half-edge mesh at the end of the event.
struct EditableMesh {
    std::vector<Vec3> pos;
    std::vector<double> sizing;
    std::vector<std::array<int, 3>> tris;      // tris[f][0] == kInvalid marks a dead face
    std::vector<std::vector<int>> v_faces;     // alive incident faces per vertex
    std::vector<char> v_alive;

    EditableMesh(const HalfEdgeMesh& mesh, std::vector<double> sz)
        : pos(mesh.positions), sizing(std::move(sz)), tris(face_list(mesh)) {
        v_alive.assign(pos.size(), 1);
        v_faces.resize(pos.size());
        for (int f = 0; f < int(tris.size()); ++f)
            for (int vid : tris[f]) v_faces[vid].push_back(f);
    }

    bool face_alive(int f) const { return tris[f][0] != kInvalid; }

    void kill_face(int f) {
        for (int vid : tris[f]) {
            auto& lst = v_faces[vid];
            lst.erase(std::find(lst.begin(), lst.end(), f));
        }
        tris[f] = {kInvalid, kInvalid, kInvalid};
    }

    int add_face(int a, int b, int c) {
        tris.push_back({a, b, c});
        int f = int(tris.size()) - 1;
        v_faces[a].push_back(f);
        v_faces[b].push_back(f);
        v_faces[c].push_back(f);
        return f;
    }

    int add_vertex(const Vec3& p, double sz) {
        pos.push_back(p);
        sizing.push_back(sz);
        v_faces.emplace_back();
        v_alive.push_back(1);
        return int(pos.size()) - 1;
    }

    // Alive faces containing both endpoints (0, 1 or 2 for a manifold edge).
    std::vector<int> edge_faces(int u, int v) const {
        std::vector<int> out;
        for (int f : v_faces[u]) {
            const auto& t = tris[f];
            if (t[0] == v || t[1] == v || t[2] == v) out.push_back(f);
        }
        return out;
    }

    std::vector<int> neighbors(int v) const {
        std::vector<int> nb;
        for (int f : v_faces[v])
            for (int vid : tris[f])
                if (vid != v) nb.push_back(vid);
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        return nb;
    }

    int valence(int v) const { return int(neighbors(v).size()); }

    bool vertex_on_boundary(int v) const {
        // boundary vertex: some incident edge has only one incident face
        for (int u : neighbors(v))
            if (edge_faces(v, u).size() < 2) return true;
        return false;
    }

    Vec3 face_normal_raw(int f) const {
        const auto& t = tris[f];
        return (pos[t[1]] - pos[t[0]]).cross(pos[t[2]] - pos[t[0]]);
    }

    Vec3 vertex_normal(int v) const {
        Vec3 n = Vec3::Zero();
        for (int f : v_faces[v]) n += face_normal_raw(f);
        double len = n.norm();
        return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
    }

    // All alive undirected edges in deterministic (u,v) order.
    std::vector<std::pair<int, int>> edge_list() const {
        std::vector<std::pair<int, int>> edges;
        edges.reserve(tris.size() * 3 / 2);
        for (const auto& t : tris) {
            if (t[0] == kInvalid) continue;
            for (int k = 0; k < 3; ++k) {
                int a = t[k], b = t[(k + 1) % 3];
                if (a < b) edges.emplace_back(a, b);
                else edges.emplace_back(b, a);
            }
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        return edges;
    }

    HalfEdgeMesh build() const {
        std::vector<int> remap(pos.size(), kInvalid);
        std::vector<Vec3> cpos;
        for (std::size_t v = 0; v < pos.size(); ++v) {
            if (v_alive[v] && !v_faces[v].empty()) {
                remap[v] = int(cpos.size());
                cpos.push_back(pos[v]);
            }
        }
        std::vector<std::array<int, 3>> ctris;
        for (const auto& t : tris)
            if (t[0] != kInvalid) ctris.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
        return build_mesh(ctris, std::move(cpos));
    }

    std::vector<double> compact_sizing() const {
        std::vector<double> out;
        for (std::size_t v = 0; v < pos.size(); ++v)
            if (v_alive[v] && !v_faces[v].empty()) out.push_back(sizing[v]);
        return out;
    }
};

inline double edge_target(const EditableMesh& m, int u, int v) {
    return std::min(m.sizing[u], m.sizing[v]);
}

// Rotate t so that t[0] == a; requires a in t.
inline std::array<int, 3> rotate_to(const std::array<int, 3>& t, int a) {
    for (int k = 0; k < 3; ++k)
        if (t[k] == a) return {t[k], t[(k + 1) % 3], t[(k + 2) % 3]};
    fail("RemeshInternalError", "vertex not in face");
}

inline int split_long_edges(EditableMesh& m) {
    int total = 0;
    for (int sweep = 0; sweep < 20; ++sweep) {
        auto edges = m.edge_list();
        int made = 0;
        for (auto [u, v] : edges) {
            if (!m.v_alive[u] || !m.v_alive[v]) continue;
            double len = (m.pos[u] - m.pos[v]).norm();
            if (len <= (4.0 / 3.0) * edge_target(m, u, v)) continue;
            auto faces = m.edge_faces(u, v);
            if (faces.empty()) continue;  // stale entry
            int mid = m.add_vertex(0.5 * (m.pos[u] + m.pos[v]), 0.5 * (m.sizing[u] + m.sizing[v]));
            for (int f : faces) {
                auto t = rotate_to(m.tris[f], u);
                m.kill_face(f);
                if (t[1] == v) {  // directed edge u->v in this face
                    m.add_face(u, mid, t[2]);
                    m.add_face(mid, v, t[2]);
                } else {          // directed edge v->u
                    m.add_face(t[1], v, mid);
                    m.add_face(t[1], mid, u);
                }
            }
            ++made;
        }
        total += made;
        if (made == 0) break;
    }
    return total;
}

inline int collapse_short_edges(EditableMesh& m) {
    int total = 0;
    for (int sweep = 0; sweep < 20; ++sweep) {
        auto edges = m.edge_list();
        int made = 0;
        for (auto [u, v] : edges) {
            if (!m.v_alive[u] || !m.v_alive[v] || u == v) continue;
            double len = (m.pos[u] - m.pos[v]).norm();
            if (len >= (4.0 / 5.0) * edge_target(m, u, v)) continue;
            auto faces = m.edge_faces(u, v);
            if (faces.size() != 2) continue;  // stale or boundary edge
            if (m.vertex_on_boundary(u) || m.vertex_on_boundary(v)) continue;

            // link condition: shared neighbors must be exactly the two
            // opposite vertices; guarantees the collapse preserves topology
            int c = kInvalid, d = kInvalid;
            {
                auto t0 = rotate_to(m.tris[faces[0]], u);
                c = (t0[1] == v) ? t0[2] : t0[1];
                auto t1 = rotate_to(m.tris[faces[1]], u);
                d = (t1[1] == v) ? t1[2] : t1[1];
            }
            auto nu = m.neighbors(u), nv = m.neighbors(v);
            std::vector<int> shared;
            std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(),
                                  std::back_inserter(shared));
            if (shared.size() != 2) continue;
            if (!((shared[0] == c && shared[1] == d) || (shared[0] == d && shared[1] == c))) continue;
            // edge-level link clause: if both {u,c,d} and {v,c,d} are faces
            // (tetrahedron configuration), the collapse would pinch the mesh
            auto has_face = [&](int a, int b1, int b2) {
                for (int f : m.v_faces[a]) {
                    const auto& t = m.tris[f];
                    bool hb1 = t[0] == b1 || t[1] == b1 || t[2] == b1;
                    bool hb2 = t[0] == b2 || t[1] == b2 || t[2] == b2;
                    if (hb1 && hb2) return true;
                }
                return false;
            };
            if (has_face(u, c, d) && has_face(v, c, d)) continue;

            Vec3 mid = 0.5 * (m.pos[u] + m.pos[v]);
            double mid_sizing = 0.5 * (m.sizing[u] + m.sizing[v]);

            // no overlong result edges, no face normal flipped past 90 degrees
            bool ok = true;
            for (int w : nu) {
                if (w == v) continue;
                if ((mid - m.pos[w]).norm() > (4.0 / 3.0) * std::min(mid_sizing, m.sizing[w])) { ok = false; break; }
            }
            if (ok) for (int w : nv) {
                if (w == u) continue;
                if ((mid - m.pos[w]).norm() > (4.0 / 3.0) * std::min(mid_sizing, m.sizing[w])) { ok = false; break; }
            }
            if (ok) {
                for (int x : {u, v}) {
                    for (int f : m.v_faces[x]) {
                        if (f == faces[0] || f == faces[1]) continue;
                        Vec3 before = m.face_normal_raw(f);
                        auto t = m.tris[f];
                        Vec3 p[3];
                        for (int k = 0; k < 3; ++k)
                            p[k] = (t[k] == u || t[k] == v) ? mid : m.pos[t[k]];
                        Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
                        if (after.dot(before) <= 0 || after.norm() <= 1e-30) { ok = false; break; }
                    }
                    if (!ok) break;
                }
            }
            if (!ok) continue;

            m.kill_face(faces[0]);
            m.kill_face(faces[1]);
            // remap v -> u in all remaining faces of v
            std::vector<int> vfs = m.v_faces[v];
            for (int f : vfs) {
                for (int k = 0; k < 3; ++k)
                    if (m.tris[f][k] == v) m.tris[f][k] = u;
                m.v_faces[u].push_back(f);
            }
            m.v_faces[v].clear();
            m.v_alive[v] = 0;
            m.pos[u] = mid;
            m.sizing[u] = mid_sizing;
            ++made;
        }
        total += made;
        if (made == 0) break;
    }
    return total;
}

inline int flip_edges_for_valence(EditableMesh& m, int target_valence) {
    auto dev = [&](int val) {
        double e = val - target_valence;
        return e * e;
    };
    int total = 0;
    for (int sweep = 0; sweep < 30; ++sweep) {
        auto edges = m.edge_list();
        int made = 0;
        for (auto [u, v] : edges) {
            if (!m.v_alive[u] || !m.v_alive[v]) continue;
            auto faces = m.edge_faces(u, v);
            if (faces.size() != 2) continue;
            auto t0 = rotate_to(m.tris[faces[0]], u);
            auto t1 = rotate_to(m.tris[faces[1]], u);
            // orient so faces[0] holds u->v and faces[1] holds v->u
            if (t0[1] != v) std::swap(t0, t1), std::swap(faces[0], faces[1]);
            if (t0[1] != v || t1[2] != v) continue;  // stale
            int c = t0[2], d = t1[1];
            if (c == d) continue;

            auto nc = m.neighbors(c);
            if (std::binary_search(nc.begin(), nc.end(), d)) continue;  // duplicate edge

            double before = dev(m.valence(u)) + dev(m.valence(v)) + dev(m.valence(c)) + dev(m.valence(d));
            double after = dev(m.valence(u) - 1) + dev(m.valence(v) - 1) + dev(m.valence(c) + 1) + dev(m.valence(d) + 1);
            if (after >= before) continue;

            Vec3 quad_n = m.face_normal_raw(faces[0]).normalized() + m.face_normal_raw(faces[1]).normalized();
            Vec3 n_a = (m.pos[d] - m.pos[u]).cross(m.pos[c] - m.pos[u]);
            Vec3 n_b = (m.pos[v] - m.pos[d]).cross(m.pos[c] - m.pos[d]);
            if (n_a.dot(quad_n) <= 0 || n_b.dot(quad_n) <= 0) continue;
            if (n_a.norm() <= 1e-30 || n_b.norm() <= 1e-30) continue;

            m.kill_face(faces[0]);
            m.kill_face(faces[1]);
            m.add_face(u, d, c);
            m.add_face(d, v, c);
            ++made;
        }
        total += made;
        if (made == 0) break;
    }
    return total;
}

inline int tangential_smooth_pass(EditableMesh& m, double mu) {
    const int n = int(m.pos.size());
    std::vector<Vec3> old_pos = m.pos;
    std::vector<Vec3> next = m.pos;
    for (int v = 0; v < n; ++v) {
        if (!m.v_alive[v] || m.v_faces[v].empty()) continue;
        if (m.vertex_on_boundary(v)) continue;
        auto nb = m.neighbors(v);
        Vec3 centroid = Vec3::Zero();
        for (int w : nb) centroid += m.pos[w];
        centroid /= double(nb.size());
        Vec3 nrm = m.vertex_normal(v);
        Vec3 delta = centroid - m.pos[v];
        next[v] = m.pos[v] + mu * (delta - nrm * nrm.dot(delta));
    }

    std::vector<Vec3> before_normals(m.tris.size());
    for (int f = 0; f < int(m.tris.size()); ++f)
        if (m.face_alive(f)) before_normals[f] = m.face_normal_raw(f);

    m.pos = std::move(next);

    // safeguard: revert vertices of any face whose normal flipped
    for (int attempt = 0; attempt < 5; ++attempt) {
        bool any = false;
        for (int f = 0; f < int(m.tris.size()); ++f) {
            if (!m.face_alive(f)) continue;
            if (m.face_normal_raw(f).dot(before_normals[f]) <= 0) {
                for (int vid : m.tris[f]) m.pos[vid] = old_pos[vid];
                any = true;
            }
        }
        if (!any) return 1;
    }
    return 1;
}

}  // namespace detail

struct RemeshResult {
    HalfEdgeMesh mesh;
    MutationReport report;
    std::vector<double> sizing;  // target lengths aligned with the output mesh
};

/// One V-cycle stage: split -> collapse -> flip -> smooth, `passes` times.
/// Coarsen mode doubles the sizing targets before the pass. The output is
/// fully validated and must preserve the genus of the input.
inline RemeshResult remesh_event(const HalfEdgeMesh& mesh, const CurvatureField& curv,
                                 const RemeshParams& params, RemeshMode mode) {
    params.check();
    std::vector<double> sizing = sizing_field(mesh, curv, params);
    if (mode == RemeshMode::Coarsen)
        for (double& s : sizing) s = std::min(2.0 * s, 2.0 * params.max_edge);

    TopologySummary before = topology_summary(mesh);
    detail::EditableMesh em(mesh, std::move(sizing));
    RemeshResult result;
    for (int pass = 0; pass < std::max(1, params.passes); ++pass) {
        result.report.splits += detail::split_long_edges(em);
        result.report.collapses += detail::collapse_short_edges(em);
        result.report.flips += detail::flip_edges_for_valence(em, params.target_valence);
        result.report.smooth_passes += detail::tangential_smooth_pass(em, params.smooth_weight);
    }

    result.mesh = em.build();
    result.sizing = em.compact_sizing();
    try {
        validate_full(result.mesh);
    } catch (const Error& e) {
        fail("RemeshInternalError", std::string("post-event validation failed: ") + e.what());
    }
    TopologySummary after = topology_summary(result.mesh);
    if (before.is_closed != after.is_closed ||
        before.euler_characteristic != after.euler_characteristic)
        fail("RemeshInternalError", "remesh changed the Euler characteristic");
    return result;
}

/// Standalone tangential smoothing on a half-edge mesh.
inline MutationReport tangential_smooth(HalfEdgeMesh& mesh, double mu, int passes) {
    std::vector<double> sizing(mesh.num_vertices(), 1.0);
    detail::EditableMesh em(mesh, std::move(sizing));
    MutationReport report;
    for (int i = 0; i < passes; ++i) report.smooth_passes += detail::tangential_smooth_pass(em, mu);
    for (int v = 0; v < mesh.num_vertices(); ++v) mesh.positions[v] = em.pos[v];
    return report;
}

/// Total squared valence deviation from the closed-surface target of 6.
inline double valence_deviation(const HalfEdgeMesh& mesh) {
    double total = 0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        double e = valence(mesh, v) - 6.0;
        total += e * e;
    }
    return total;
}

/// Fraction of edges with length within [0.8, 4/3] of their sizing target.
inline double edges_within_target_fraction(const HalfEdgeMesh& mesh,
                                           const std::vector<double>& sizing) {
    int within = 0, total = 0;
    for (int h = 0; h < mesh.num_halfedges(); ++h) {
        int u = mesh.origin(h), v = mesh.head(h);
        if (u > v && mesh.twin(h) != kInvalid) continue;
        double len = (mesh.positions[u] - mesh.positions[v]).norm();
        double target = std::min(sizing[u], sizing[v]);
        ++total;
        if (len >= 0.8 * target && len <= (4.0 / 3.0) * target) ++within;
    }
    return total > 0 ? double(within) / total : 1.0;
}

}  // namespace genusforge
