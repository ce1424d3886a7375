#pragma once

#include <array>
#include <limits>
#include <vector>

#include "genusforge/halfedge.hpp"
#include "genusforge/image.hpp"

namespace genusforge {

struct Camera {
    Vec3 position{0, 0, 2.5};
    Vec3 look_at{0, 0, 0};
    Vec3 up_hint{0, 1, 0};
    double fov_y = 0.8726646259971648;  // 50 degrees
    int width = 128;
    int height = 128;
    int id = 0;
};

/// Silhouette coverage plus camera-space flat-shaded normals. Normals fade
/// to zero over one sigma inside the silhouette boundary so the buffer is a
/// continuous function of vertex positions; pixels with coverage > 0.95 are
/// past the fade band and carry unit normals.
struct RenderedView {
    Image coverage;  // 1 channel in [0,1]
    Image normal;    // 3 channels, camera space
    int camera_id = 0;
};

struct ViewGradients {
    MatX3 d_position;  // dLoss/dx accumulated over pixels
    int camera_id = 0;
};

namespace render_detail {

constexpr double kBandSigmas = 3.0;  // coverage saturates beyond this many sigmas

struct CameraFrame {
    Mat3 rot;  // rows: right, up, forward
    Vec3 origin;
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

inline CameraFrame make_frame(const Camera& cam) {
    CameraFrame fr;
    Vec3 fwd = cam.look_at - cam.position;
    if (fwd.norm() < 1e-12) fail("DegenerateProjection", "camera position equals look-at");
    fwd.normalize();
    Vec3 up = cam.up_hint;
    if (fwd.cross(up).norm() < 1e-9) up = Vec3(1, 0, 0);
    Vec3 right = fwd.cross(up).normalized();
    Vec3 true_up = right.cross(fwd);
    fr.rot.row(0) = right;
    fr.rot.row(1) = true_up;
    fr.rot.row(2) = fwd;
    fr.origin = cam.position;
    fr.fy = (cam.height / 2.0) / std::tan(cam.fov_y / 2.0);
    fr.fx = fr.fy;
    fr.cx = cam.width / 2.0;
    fr.cy = cam.height / 2.0;
    return fr;
}

inline Vec3 to_camera(const CameraFrame& fr, const Vec3& p) { return fr.rot * (p - fr.origin); }

inline Vec2 project(const CameraFrame& fr, const Vec3& p, double& depth) {
    Vec3 c = to_camera(fr, p);
    depth = c.z();
    return {fr.cx + fr.fx * c.x() / c.z(), fr.cy - fr.fy * c.y() / c.z()};
}

// d(px,py)/d(world position), 2x3
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraFrame& fr, const Vec3& p) {
    Vec3 c = fr.rot * (p - fr.origin);
    Eigen::Matrix<double, 2, 3> J;
    J.row(0) = (fr.fx / c.z()) * fr.rot.row(0) - (fr.fx * c.x() / (c.z() * c.z())) * fr.rot.row(2);
    J.row(1) = -(fr.fy / c.z()) * fr.rot.row(1) + (fr.fy * c.y() / (c.z() * c.z())) * fr.rot.row(2);
    return J;
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// sigmoid over [-kBandSigmas, kBandSigmas] with exact saturation, value 1/2
// at zero; C2 so its finite differences are clean at the band edge
inline double soft_step(double t) {
    return smootherstep01((std::clamp(t, -kBandSigmas, kBandSigmas) + kBandSigmas) / (2.0 * kBandSigmas));
}
inline double soft_step_deriv(double t) {
    if (t <= -kBandSigmas || t >= kBandSigmas) return 0.0;
    return smootherstep01_deriv((t + kBandSigmas) / (2.0 * kBandSigmas)) / (2.0 * kBandSigmas);
}

struct Grid2D {
    double cell = 8.0;
    int nx = 0, ny = 0;
    std::vector<std::vector<int>> cells;

    void init(int width, int height, double cell_px) {
        cell = cell_px;
        nx = std::max(1, int(std::ceil(width / cell)) + 2);
        ny = std::max(1, int(std::ceil(height / cell)) + 2);
        cells.assign(std::size_t(nx) * ny, {});
    }
    int clampx(int i) const { return std::clamp(i, 0, nx - 1); }
    int clampy(int i) const { return std::clamp(i, 0, ny - 1); }
    int cell_of(double x, double y) const {
        return clampy(int(std::floor((y + cell) / cell))) * nx + clampx(int(std::floor((x + cell) / cell)));
    }
    void insert_bbox(double x0, double y0, double x1, double y1, int id) {
        int ix0 = clampx(int(std::floor((x0 + cell) / cell))), ix1 = clampx(int(std::floor((x1 + cell) / cell)));
        int iy0 = clampy(int(std::floor((y0 + cell) / cell))), iy1 = clampy(int(std::floor((y1 + cell) / cell)));
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) cells[std::size_t(iy) * nx + ix].push_back(id);
    }
    template <typename Fn>
    void visit(double x0, double y0, double x1, double y1, Fn&& fn) const {
        int ix0 = clampx(int(std::floor((x0 + cell) / cell))), ix1 = clampx(int(std::floor((x1 + cell) / cell)));
        int iy0 = clampy(int(std::floor((y0 + cell) / cell))), iy1 = clampy(int(std::floor((y1 + cell) / cell)));
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix)
                for (int id : cells[std::size_t(iy) * nx + ix]) fn(id);
    }
};

// Endpoint provenance of an exposed sub-segment: a projected mesh vertex or
// a T-junction against another triangle's edge.
struct EndTag {
    enum Kind { Vertex, Cut } kind = Vertex;
    int cut_a = kInvalid, cut_b = kInvalid;  // cutting edge vertex ids (Cut)
};

struct ExposedSeg {
    int va = kInvalid, vb = kInvalid;  // contour edge vertex ids
    double t0 = 0, t1 = 1;             // exposed parameter range along va->vb
    EndTag tag0, tag1;
};

enum class AttrKind : std::uint8_t { None, Foot, Endpoint, TJunction };

struct AuxPixel {
    double d = std::numeric_limits<double>::infinity();  // unsigned px distance to the boundary
    double t = 0;                                        // foot parameter on the contour edge
    AttrKind kind = AttrKind::None;
    bool covered = false;
    int va = kInvalid, vb = kInvalid;  // contour edge (Foot/TJunction) or vertex id (Endpoint)
    int ca = kInvalid, cb = kInvalid;  // cutting edge (TJunction)
    int face = kInvalid;               // front-most face when covered
};

struct RenderAux {
    CameraFrame frame;
    std::vector<Vec2> proj;
    std::vector<double> depth;
    std::vector<AuxPixel> pixels;
    double sigma = 1.0;
};

struct Interval {
    double lo, hi;
    EndTag lo_tag, hi_tag;
};

// Clip the segment q(t), t in [0,1], against the open interior of a
// projected triangle; returns false if the overlap is empty. Records which
// triangle edge produced each bound.
inline bool clip_segment_triangle(const Vec2& q0, const Vec2& q1, const std::array<Vec2, 3>& tri,
                                  const std::array<int, 3>& vid, double orient, Interval& out) {
    double lo = 0, hi = 1;
    EndTag lo_tag{EndTag::Vertex, kInvalid, kInvalid}, hi_tag = lo_tag;
    for (int k = 0; k < 3; ++k) {
        const Vec2 &a = tri[k], &b = tri[(k + 1) % 3];
        // signed distance (scaled) of q(t) to edge line; inside where positive
        double e0 = orient * cross2(b - a, q0 - a);
        double e1 = orient * cross2(b - a, q1 - a);
        if (e0 <= 0 && e1 <= 0) return false;
        if (e0 <= 0 || e1 <= 0) {
            double tcross = e0 / (e0 - e1);
            if (e0 <= 0) {  // entering
                if (tcross > lo) { lo = tcross; lo_tag = {EndTag::Cut, vid[k], vid[(k + 1) % 3]}; }
            } else {        // leaving
                if (tcross < hi) { hi = tcross; hi_tag = {EndTag::Cut, vid[k], vid[(k + 1) % 3]}; }
            }
        }
    }
    if (lo >= hi) return false;
    out = {lo, hi, lo_tag, hi_tag};
    return true;
}

inline Vec2 line_intersection(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
    Vec2 da = a1 - a0, db = b1 - b0;
    double denom = cross2(da, db);
    if (std::abs(denom) < 1e-30) return 0.5 * (a0 + a1);
    double t = cross2(b0 - a0, db) / denom;
    return a0 + t * da;
}

// d(intersection)/d(endpoint) for each of the four endpoints, as 2x2 blocks.
inline void line_intersection_jacobians(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1,
                                        Mat2& dA0, Mat2& dA1, Mat2& dB0, Mat2& dB1) {
    Vec2 da = a1 - a0, db = b1 - b0;
    double denom = cross2(da, db);
    if (std::abs(denom) < 1e-30) {
        dA0 = dA1 = Mat2::Identity() * 0.5;
        dB0 = dB1 = Mat2::Zero();
        return;
    }
    double num = cross2(b0 - a0, db);
    double t = num / denom;
    auto perp = [](const Vec2& v) { return Vec2(v.y(), -v.x()); };  // d cross2(u,w)/du = perp(w)
    // q = a0 + t*da with t = num/denom
    Vec2 dnum_dA0 = -perp(db);
    Vec2 ddenom_dA0 = -perp(db);
    Vec2 dnum_dA1 = Vec2::Zero();
    Vec2 ddenom_dA1 = perp(db);
    Vec2 dnum_dB0 = perp(db) + perp(b0 - a0) * 0 - perp(b0 - a0);  // d cross2(b0-a0, db)/db0: both args depend on b0
    // cross2(b0-a0, b1-b0): d/db0 = perp(b1-b0) (first arg) + dcross/dw with w=b1-b0, dw/db0=-I:
    // d cross2(u,w)/dw = -perp(u)  =>  contribution +perp(u)
    dnum_dB0 = perp(db) + perp(b0 - a0);
    Vec2 ddenom_dB0 = perp(da);  // d cross2(da, b1-b0)/db0 = -(-perp(da)) = perp(da)
    Vec2 dnum_dB1 = -perp(b0 - a0);
    Vec2 ddenom_dB1 = -perp(da);

    auto t_grad = [&](const Vec2& dn, const Vec2& dd) { return (dn - t * dd) / denom; };
    Vec2 dt_dA0 = t_grad(dnum_dA0, ddenom_dA0);
    Vec2 dt_dA1 = t_grad(dnum_dA1, ddenom_dA1);
    Vec2 dt_dB0 = t_grad(dnum_dB0, ddenom_dB0);
    Vec2 dt_dB1 = t_grad(dnum_dB1, ddenom_dB1);

    dA0 = (1.0 - t) * Mat2::Identity() + da * dt_dA0.transpose();
    dA1 = t * Mat2::Identity() + da * dt_dA1.transpose();
    dB0 = da * dt_dB0.transpose();
    dB1 = da * dt_dB1.transpose();
}

}  // namespace render_detail

/// Deterministic uniform camera rig: Fibonacci spiral on the sphere of
/// radius rho, all cameras looking at the origin.
inline std::vector<Camera> make_camera_rig(int count, double radius, int width, int height,
                                           double fov_y) {
    if (count < 1) fail("ConfigError", "camera count must be >= 1");
    std::vector<Camera> rig;
    rig.reserve(count);
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        Vec3 dir;
        if (count == 1) {
            dir = Vec3(0, 0, 1);
        } else {
            double z = 1.0 - 2.0 * (i + 0.5) / count;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double th = golden_angle * i;
            dir = Vec3(r * std::cos(th), r * std::sin(th), z);
        }
        Camera cam;
        cam.position = radius * dir;
        cam.look_at = Vec3::Zero();
        cam.up_hint = Vec3(0, 1, 0);
        cam.fov_y = fov_y;
        cam.width = width;
        cam.height = height;
        cam.id = i;
        rig.push_back(cam);
    }
    return rig;
}

namespace render_detail {

struct SilhouetteGeometry {
    std::vector<ExposedSeg> segs;
    Grid2D seg_grid;
    Grid2D tri_grid;
};

inline SilhouetteGeometry build_silhouette_geometry(const HalfEdgeMesh& mesh,
                                                    const std::vector<Vec2>& proj, int width,
                                                    int height, double band_px) {
    SilhouetteGeometry geo;
    const int F = mesh.num_faces();

    std::vector<double> area2(F);
    for (int f = 0; f < F; ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        area2[f] = cross2(proj[b] - proj[a], proj[c] - proj[a]);
    }

    geo.tri_grid.init(width, height, 8.0);
    for (int f = 0; f < F; ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        double x0 = std::min({proj[a].x(), proj[b].x(), proj[c].x()});
        double x1 = std::max({proj[a].x(), proj[b].x(), proj[c].x()});
        double y0 = std::min({proj[a].y(), proj[b].y(), proj[c].y()});
        double y1 = std::max({proj[a].y(), proj[b].y(), proj[c].y()});
        geo.tri_grid.insert_bbox(x0, y0, x1, y1, f);
    }

    // Contour edges: boundary edges, plus edges whose two faces project
    // with opposite orientation (the surface folds there).
    std::vector<int> stamp(F, -1);
    int stamp_id = 0;
    for (int h = 0; h < mesh.num_halfedges(); ++h) {
        int tw = mesh.twin(h);
        if (tw != kInvalid && tw < h) continue;
        int f1 = mesh.face_of(h);
        int f2 = tw == kInvalid ? kInvalid : mesh.face_of(tw);
        bool contour = f2 == kInvalid || area2[f1] * area2[f2] <= 0;
        if (!contour) continue;

        int va = mesh.origin(h), vb = mesh.head(h);
        const Vec2 q0 = proj[va], q1 = proj[vb];

        // chop away the parts covered by other triangles; what remains is
        // on the boundary of the projected union
        std::vector<Interval> covered;
        double x0 = std::min(q0.x(), q1.x()), x1 = std::max(q0.x(), q1.x());
        double y0 = std::min(q0.y(), q1.y()), y1 = std::max(q0.y(), q1.y());
        ++stamp_id;
        geo.tri_grid.visit(x0, y0, x1, y1, [&](int f) {
            if (f == f1 || f == f2 || stamp[f] == stamp_id) return;
            stamp[f] = stamp_id;
            if (area2[f] == 0) return;
            auto vid = mesh.face_vertices(f);
            std::array<Vec2, 3> tri = {proj[vid[0]], proj[vid[1]], proj[vid[2]]};
            Interval iv;
            if (clip_segment_triangle(q0, q1, tri, vid, area2[f] > 0 ? 1.0 : -1.0, iv))
                covered.push_back(iv);
        });
        std::sort(covered.begin(), covered.end(),
                  [](const Interval& a, const Interval& b) { return a.lo < b.lo; });

        // complement of the covered union
        double cursor = 0;
        EndTag cursor_tag{EndTag::Vertex, kInvalid, kInvalid};
        auto emit = [&](double lo, double hi, EndTag lo_tag, EndTag hi_tag) {
            if (hi - lo < 1e-12) return;
            ExposedSeg s;
            s.va = va;
            s.vb = vb;
            s.t0 = lo;
            s.t1 = hi;
            s.tag0 = lo_tag;
            s.tag1 = hi_tag;
            geo.segs.push_back(s);
        };
        for (const Interval& iv : covered) {
            if (iv.lo > cursor) emit(cursor, iv.lo, cursor_tag, iv.lo_tag);
            if (iv.hi > cursor) { cursor = iv.hi; cursor_tag = iv.hi_tag; }
            if (cursor >= 1) break;
        }
        if (cursor < 1) emit(cursor, 1.0, cursor_tag, EndTag{EndTag::Vertex, kInvalid, kInvalid});
    }

    geo.seg_grid.init(width, height, std::max(2.0, band_px));
    for (int i = 0; i < int(geo.segs.size()); ++i) {
        const ExposedSeg& s = geo.segs[i];
        Vec2 a = proj[s.va] + s.t0 * (proj[s.vb] - proj[s.va]);
        Vec2 b = proj[s.va] + s.t1 * (proj[s.vb] - proj[s.va]);
        geo.seg_grid.insert_bbox(std::min(a.x(), b.x()), std::min(a.y(), b.y()),
                                 std::max(a.x(), b.x()), std::max(a.y(), b.y()), i);
    }
    return geo;
}

inline bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    double s0 = cross2(b - a, p - a);
    double s1 = cross2(c - b, p - b);
    double s2 = cross2(a - c, p - c);
    return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
}

// Moller-Trumbore; returns false when the ray misses or is parallel.
inline bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                         const Vec3& v2, double& t_out) {
    Vec3 e1 = v1 - v0, e2 = v2 - v0;
    Vec3 pvec = dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < 1e-14) return false;
    double inv = 1.0 / det;
    Vec3 tvec = orig - v0;
    double u = tvec.dot(pvec) * inv;
    Vec3 qvec = tvec.cross(e1);
    double v = dir.dot(qvec) * inv;
    if (u < -1e-9 || v < -1e-9 || u + v > 1 + 1e-9) return false;
    t_out = e2.dot(qvec) * inv;
    return t_out > 0;
}

}  // namespace genusforge::render_detail

/// Forward render with the attribution data the backward pass consumes.
inline RenderedView render_with_aux(const HalfEdgeMesh& mesh, const Camera& camera, double sigma_px,
                                    render_detail::RenderAux* aux_out) {
    using namespace render_detail;
    if (sigma_px <= 0) fail("ConfigError", "sigma must be positive");

    // camera must stay outside the bounding sphere
    Vec3 lo = mesh.positions.empty() ? Vec3::Zero() : mesh.positions[0], hi = lo;
    for (const Vec3& p : mesh.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vec3 center = 0.5 * (lo + hi);
    double radius = 0;
    for (const Vec3& p : mesh.positions) radius = std::max(radius, (p - center).norm());
    if ((camera.position - center).norm() <= radius)
        fail("DegenerateProjection", "camera inside the mesh bounding sphere");

    CameraFrame frame = make_frame(camera);
    const int V = mesh.num_vertices();
    std::vector<Vec2> proj(V);
    std::vector<double> depth(V);
    for (int v = 0; v < V; ++v) {
        proj[v] = project(frame, mesh.positions[v], depth[v]);
        if (depth[v] <= 0) fail("DegenerateProjection", "vertex behind the camera");
    }

    const double band = kBandSigmas * sigma_px;
    SilhouetteGeometry geo = build_silhouette_geometry(mesh, proj, camera.width, camera.height, band);

    RenderedView view;
    view.camera_id = camera.id;
    view.coverage = Image(camera.width, camera.height, 1);
    view.normal = Image(camera.width, camera.height, 3);
    std::vector<AuxPixel> pixels(std::size_t(camera.width) * camera.height);

    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Vec2 p(x + 0.5, y + 0.5);
            AuxPixel& px = pixels[std::size_t(y) * camera.width + x];

            // hard visibility: front-most face whose projection covers p
            double best_depth = std::numeric_limits<double>::infinity();
            Vec3 ray_dir = (frame.rot.row(0) * ((p.x() - frame.cx) / frame.fx) +
                            frame.rot.row(1) * (-(p.y() - frame.cy) / frame.fy) + frame.rot.row(2))
                               .transpose();
            ray_dir.normalize();
            geo.tri_grid.visit(p.x(), p.y(), p.x(), p.y(), [&](int f) {
                auto [a, b, c] = mesh.face_vertices(f);
                if (!point_in_triangle(p, proj[a], proj[b], proj[c])) return;
                double t;
                if (!ray_triangle(frame.origin, ray_dir, mesh.positions[a], mesh.positions[b],
                                  mesh.positions[c], t))
                    t = (depth[a] + depth[b] + depth[c]) / 3.0;
                if (t < best_depth || (t == best_depth && f < px.face)) {
                    best_depth = t;
                    px.face = f;
                }
            });
            px.covered = px.face != kInvalid;

            // nearest exposed silhouette point within the band
            geo.seg_grid.visit(p.x() - band, p.y() - band, p.x() + band, p.y() + band, [&](int si) {
                const ExposedSeg& s = geo.segs[si];
                Vec2 q0 = proj[s.va], q1 = proj[s.vb];
                Vec2 e = q1 - q0;
                double len2 = e.squaredNorm();
                double t = len2 > 1e-24 ? (p - q0).dot(e) / len2 : s.t0;
                AttrKind kind = AttrKind::Foot;
                EndTag tag;
                if (t <= s.t0) { t = s.t0; kind = AttrKind::Endpoint; tag = s.tag0; }
                else if (t >= s.t1) { t = s.t1; kind = AttrKind::Endpoint; tag = s.tag1; }
                double dist = (p - (q0 + t * e)).norm();
                if (dist >= px.d) return;
                px.d = dist;
                px.t = t;
                px.va = s.va;
                px.vb = s.vb;
                px.ca = px.cb = kInvalid;
                if (kind == AttrKind::Foot) {
                    px.kind = AttrKind::Foot;
                } else if (tag.kind == EndTag::Cut) {
                    px.kind = AttrKind::TJunction;
                    px.ca = tag.cut_a;
                    px.cb = tag.cut_b;
                } else {
                    px.kind = AttrKind::Endpoint;
                    // endpoint at t=0 is va, at t=1 is vb
                    px.va = t < 0.5 ? px.va : px.vb;
                }
            });

            double signed_d = px.covered ? px.d : -px.d;
            double cov = px.d > band ? (px.covered ? 1.0 : 0.0) : soft_step(signed_d / sigma_px);
            view.coverage.at(x, y) = cov;

            if (px.covered) {
                Vec3 n_cam = frame.rot * face_normal(mesh, px.face);
                double mask = smootherstep01(std::clamp(signed_d / sigma_px, 0.0, 1.0));
                for (int c = 0; c < 3; ++c) view.normal.at(x, y, c) = mask * n_cam[c];
            }
        }
    }

    if (aux_out) {
        aux_out->frame = frame;
        aux_out->proj = std::move(proj);
        aux_out->depth = std::move(depth);
        aux_out->pixels = std::move(pixels);
        aux_out->sigma = sigma_px;
    }
    return view;
}

/// Deterministic soft-silhouette + flat-normal rasterization.
inline RenderedView render(const HalfEdgeMesh& mesh, const Camera& camera, double sigma_px = 1.0) {
    return render_with_aux(mesh, camera, sigma_px, nullptr);
}

/// Exact adjoint of render(): pixel adjoints chained through the soft
/// coverage, the normal fade mask, and the face normals.
inline ViewGradients render_backward_with_aux(const HalfEdgeMesh& mesh, const Camera& camera,
                                              const RenderedView& adjoint,
                                              const render_detail::RenderAux& aux) {
    using namespace render_detail;
    ViewGradients grads;
    grads.camera_id = camera.id;
    grads.d_position = MatX3::Zero(mesh.num_vertices(), 3);
    const double sigma = aux.sigma;
    const double band = kBandSigmas * sigma;

    auto add_pixel_grad = [&](int v, const Vec2& g2d) {
        grads.d_position.row(v) += g2d.transpose() * projection_jacobian(aux.frame, mesh.positions[v]);
    };

    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const AuxPixel& px = aux.pixels[std::size_t(y) * camera.width + x];
            const Vec2 p(x + 0.5, y + 0.5);
            double a_c = adjoint.coverage.at(x, y);
            Vec3 a_n(adjoint.normal.at(x, y, 0), adjoint.normal.at(x, y, 1), adjoint.normal.at(x, y, 2));

            double signed_d = px.covered ? px.d : -px.d;
            Vec3 n_cam = Vec3::Zero();
            if (px.covered && px.face != kInvalid) n_cam = aux.frame.rot * face_normal(mesh, px.face);

            // dLoss/d(signed distance): coverage sigmoid plus normal fade mask
            double w_d = 0.0;
            if (px.d <= band) w_d += a_c * soft_step_deriv(signed_d / sigma) / sigma;
            double mask = 1.0;
            if (px.covered) {
                double u = std::clamp(signed_d / sigma, 0.0, 1.0);
                mask = smootherstep01(u);
                if (signed_d > 0 && signed_d < sigma)
                    w_d += a_n.dot(n_cam) * smootherstep01_deriv(u) / sigma;
            }

            if (w_d != 0.0 && px.kind != AttrKind::None && px.d > 1e-12) {
                double sign = px.covered ? 1.0 : -1.0;
                if (px.kind == AttrKind::Foot) {
                    Vec2 q0 = aux.proj[px.va], q1 = aux.proj[px.vb];
                    Vec2 q = q0 + px.t * (q1 - q0);
                    Vec2 w = (p - q) / px.d;
                    add_pixel_grad(px.va, sign * w_d * -(1.0 - px.t) * w);
                    add_pixel_grad(px.vb, sign * w_d * -px.t * w);
                } else if (px.kind == AttrKind::Endpoint) {
                    Vec2 q = aux.proj[px.va];
                    Vec2 w = (p - q) / px.d;
                    add_pixel_grad(px.va, sign * w_d * -w);
                } else {  // TJunction
                    Vec2 a0 = aux.proj[px.va], a1 = aux.proj[px.vb];
                    Vec2 b0 = aux.proj[px.ca], b1 = aux.proj[px.cb];
                    Vec2 q = line_intersection(a0, a1, b0, b1);
                    double dist = (p - q).norm();
                    if (dist > 1e-12) {
                        Vec2 w = (p - q) / dist;
                        Mat2 dA0, dA1, dB0, dB1;
                        line_intersection_jacobians(a0, a1, b0, b1, dA0, dA1, dB0, dB1);
                        add_pixel_grad(px.va, sign * w_d * (-w.transpose() * dA0).transpose());
                        add_pixel_grad(px.vb, sign * w_d * (-w.transpose() * dA1).transpose());
                        add_pixel_grad(px.ca, sign * w_d * (-w.transpose() * dB0).transpose());
                        add_pixel_grad(px.cb, sign * w_d * (-w.transpose() * dB1).transpose());
                    }
                }
            }

            // normal direction chain (mask held fixed)
            if (px.covered && px.face != kInvalid && a_n.squaredNorm() > 0) {
                auto [i0, i1, i2] = mesh.face_vertices(px.face);
                Vec3 e1 = mesh.positions[i1] - mesh.positions[i0];
                Vec3 e2 = mesh.positions[i2] - mesh.positions[i0];
                Vec3 N = e1.cross(e2);
                double len = N.norm();
                if (len > 1e-30) {
                    Vec3 nhat = N / len;
                    Vec3 g_world = mask * (aux.frame.rot.transpose() * a_n);
                    Vec3 g_N = (g_world - nhat * nhat.dot(g_world)) / len;
                    grads.d_position.row(i1) += e2.cross(g_N).transpose();
                    grads.d_position.row(i2) += g_N.cross(e1).transpose();
                    grads.d_position.row(i0) += (g_N.cross(e2) + e1.cross(g_N)).transpose();
                }
            }
        }
    }
    return grads;
}

inline ViewGradients render_backward(const HalfEdgeMesh& mesh, const Camera& camera,
                                     const RenderedView& adjoint, double sigma_px = 1.0) {
    render_detail::RenderAux aux;
    render_with_aux(mesh, camera, sigma_px, &aux);
    return render_backward_with_aux(mesh, camera, adjoint, aux);
}

}  // namespace genusforge
