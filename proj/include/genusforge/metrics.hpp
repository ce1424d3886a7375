#pragma once

#include <Eigen/Geometry>

#include <numeric>
#include <vector>

#include "genusforge/halfedge.hpp"

namespace genusforge {

struct EvalReport {
    double chamfer = 0;             // symmetric point-to-surface mean distance
    double volume_iou = 0;          // voxel parity IoU in [0,1]
    Mat3 icp_rotation = Mat3::Identity();
    Vec3 icp_translation = Vec3::Zero();
    int sample_count = 100000;
    int grid_resolution = 128;
};

/// Translate the bounding-box center to the origin and scale the farthest
/// vertex to radius 1. Returns the applied scale factor.
inline double normalize_unit_radius(HalfEdgeMesh& mesh) {
    Vec3 lo = mesh.positions[0], hi = mesh.positions[0];
    for (const Vec3& p : mesh.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vec3 c = 0.5 * (lo + hi);
    double r = 0;
    for (const Vec3& p : mesh.positions) r = std::max(r, (p - c).norm());
    if (r <= 0) fail("DegenerateFace", "mesh has zero extent");
    for (Vec3& p : mesh.positions) p = (p - c) / r;
    return 1.0 / r;
}

inline void apply_rigid(HalfEdgeMesh& mesh, const Mat3& rot, const Vec3& trans) {
    for (Vec3& p : mesh.positions) p = rot * p + trans;
}

/// Uniform area-weighted surface samples, deterministic in the seed.
inline std::vector<Vec3> sample_surface(const HalfEdgeMesh& mesh, int count, std::uint64_t seed) {
    std::vector<double> cumulative(mesh.num_faces());
    double acc = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        acc += face_area(mesh, f);
        cumulative[f] = acc;
    }
    if (acc <= 0) fail("DegenerateFace", "mesh has zero area");
    Rng rng(seed);
    std::vector<Vec3> samples(count);
    for (int i = 0; i < count; ++i) {
        double pick = rng.next_double() * acc;
        int f = int(std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        f = std::min(f, mesh.num_faces() - 1);
        auto [a, b, c] = mesh.face_vertices(f);
        double r1 = std::sqrt(rng.next_double()), r2 = rng.next_double();
        samples[i] = (1 - r1) * mesh.positions[a] + r1 * (1 - r2) * mesh.positions[b] +
                     r1 * r2 * mesh.positions[c];
    }
    return samples;
}

namespace detail {

inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson, Real-Time Collision Detection
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Static median-split AABB tree over mesh triangles for closest-point
// queries.
class AabbTree {
public:
    explicit AabbTree(const HalfEdgeMesh& mesh) : mesh_(&mesh) {
        const int F = mesh.num_faces();
        order_.resize(F);
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.resize(F);
        for (int f = 0; f < F; ++f) {
            auto [a, b, c] = mesh.face_vertices(f);
            centroids_[f] = (mesh.positions[a] + mesh.positions[b] + mesh.positions[c]) / 3.0;
        }
        nodes_.reserve(2 * F);
        build(0, F);
    }

    double distance(const Vec3& p) const {
        Vec3 q;
        return std::sqrt(closest(p, q));
    }

    Vec3 closest_point(const Vec3& p) const {
        Vec3 q;
        closest(p, q);
        return q;
    }

private:
    struct Node {
        Vec3 lo, hi;
        int begin, end;      // leaf triangle range when right < 0
        int left = -1, right = -1;
    };

    int build(int begin, int end) {
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        node.hi = -node.lo;
        for (int i = begin; i < end; ++i) {
            auto [a, b, c] = mesh_->face_vertices(order_[i]);
            for (const Vec3& v : {mesh_->positions[a], mesh_->positions[b], mesh_->positions[c]}) {
                node.lo = node.lo.cwiseMin(v);
                node.hi = node.hi.cwiseMax(v);
            }
        }
        int index = int(nodes_.size());
        nodes_.push_back(node);
        if (end - begin > 8) {
            int axis;
            (node.hi - node.lo).maxCoeff(&axis);
            int mid = (begin + end) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](int f1, int f2) { return centroids_[f1][axis] < centroids_[f2][axis]; });
            int l = build(begin, mid);
            int r = build(mid, end);
            nodes_[index].left = l;
            nodes_[index].right = r;
        }
        return index;
    }

    double box_dist2(const Node& n, const Vec3& p) const {
        Vec3 d = (n.lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - n.hi);
        return d.squaredNorm();
    }

    double closest(const Vec3& p, Vec3& q_out) const {
        double best = std::numeric_limits<double>::infinity();
        Vec3 best_q = Vec3::Zero();
        std::vector<int> stack = {0};
        while (!stack.empty()) {
            int ni = stack.back();
            stack.pop_back();
            const Node& n = nodes_[ni];
            if (box_dist2(n, p) >= best) continue;
            if (n.left < 0) {
                for (int i = n.begin; i < n.end; ++i) {
                    auto [a, b, c] = mesh_->face_vertices(order_[i]);
                    Vec3 q = closest_point_on_triangle(p, mesh_->positions[a], mesh_->positions[b],
                                                       mesh_->positions[c]);
                    double d2 = (p - q).squaredNorm();
                    if (d2 < best) { best = d2; best_q = q; }
                }
            } else {
                // visit the nearer child first
                double dl = box_dist2(nodes_[n.left], p), dr = box_dist2(nodes_[n.right], p);
                if (dl < dr) { stack.push_back(n.right); stack.push_back(n.left); }
                else { stack.push_back(n.left); stack.push_back(n.right); }
            }
        }
        q_out = best_q;
        return best;
    }

    const HalfEdgeMesh* mesh_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

}  // namespace detail

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Point-to-point ICP: uniform surface samples of the source against their
/// closest points on the target surface, rigid fit per iteration (Umeyama).
/// The per-iteration error is non-increasing by the usual alternating-
/// minimization argument. Deterministic given the seed.
inline RigidTransform icp_align(const HalfEdgeMesh& source, const HalfEdgeMesh& target,
                                int max_iters = 50, int samples = 4000, std::uint64_t seed = 7,
                                std::vector<double>* error_history = nullptr) {
    std::vector<Vec3> src = sample_surface(source, samples, seed);
    detail::AabbTree tree(target);

    RigidTransform tf;
    double prev_err = std::numeric_limits<double>::infinity();
    Eigen::Matrix3Xd P(3, src.size()), Q(3, src.size());
    for (std::size_t i = 0; i < src.size(); ++i) P.col(i) = src[i];

    for (int it = 0; it < max_iters; ++it) {
        double err = 0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            Vec3 moved = tf.apply(src[i]);
            Q.col(i) = tree.closest_point(moved);
            err += (moved - Q.col(i)).squaredNorm();
        }
        err /= double(src.size());
        if (error_history) error_history->push_back(err);
        if (err < 1e-24 || prev_err - err < 1e-12 * std::max(1.0, prev_err)) break;
        prev_err = err;

        Eigen::Matrix4d T = Eigen::umeyama(P, Q, false);
        tf.rotation = T.topLeftCorner<3, 3>();
        tf.translation = T.topRightCorner<3, 1>();
    }
    return tf;
}

/// Symmetric point-to-surface Chamfer distance: mean closest-surface
/// distance from samples of A to B, averaged with the reverse direction.
/// Exactly symmetric under swapping meshes with matched per-mesh seeds.
inline double chamfer_distance(const HalfEdgeMesh& a, const HalfEdgeMesh& b, int samples,
                               std::uint64_t seed_a, std::uint64_t seed_b) {
    detail::AabbTree tree_a(a), tree_b(b);
    std::vector<Vec3> sa = sample_surface(a, samples, seed_a);
    std::vector<Vec3> sb = sample_surface(b, samples, seed_b);
    std::vector<double> da(sa.size()), db(sb.size());
    parallel_for(int(sa.size()), [&](std::int64_t i) { da[i] = tree_b.distance(sa[i]); });
    parallel_for(int(sb.size()), [&](std::int64_t i) { db[i] = tree_a.distance(sb[i]); });
    double mean_ab = 0, mean_ba = 0;
    for (double d : da) mean_ab += d;
    for (double d : db) mean_ba += d;
    mean_ab /= double(sa.size());
    mean_ba /= double(sb.size());
    return 0.5 * (mean_ab + mean_ba);
}

inline double chamfer_distance(const HalfEdgeMesh& a, const HalfEdgeMesh& b, int samples = 100000,
                               std::uint64_t seed = 11) {
    return chamfer_distance(a, b, samples, seed, seed + 1);
}

namespace detail {

// Parity occupancy of one mesh over a fixed voxel grid: a voxel center is
// inside iff the vertical line through it crosses the surface an odd number
// of times below/above (z-interval parity fill per column).
inline std::vector<char> voxelize_parity(const HalfEdgeMesh& mesh, const Vec3& grid_lo,
                                         const Vec3& cell, int r) {
    std::vector<char> occ(std::size_t(r) * r * r, 0);
    // column -> triangle lists via 2D bbox binning
    std::vector<std::vector<int>> columns(std::size_t(r) * r);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        auto [a, b, c] = mesh.face_vertices(f);
        double x0 = std::min({mesh.positions[a].x(), mesh.positions[b].x(), mesh.positions[c].x()});
        double x1 = std::max({mesh.positions[a].x(), mesh.positions[b].x(), mesh.positions[c].x()});
        double y0 = std::min({mesh.positions[a].y(), mesh.positions[b].y(), mesh.positions[c].y()});
        double y1 = std::max({mesh.positions[a].y(), mesh.positions[b].y(), mesh.positions[c].y()});
        int ix0 = std::clamp(int(std::floor((x0 - grid_lo.x()) / cell.x())), 0, r - 1);
        int ix1 = std::clamp(int(std::floor((x1 - grid_lo.x()) / cell.x())), 0, r - 1);
        int iy0 = std::clamp(int(std::floor((y0 - grid_lo.y()) / cell.y())), 0, r - 1);
        int iy1 = std::clamp(int(std::floor((y1 - grid_lo.y()) / cell.y())), 0, r - 1);
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) columns[std::size_t(iy) * r + ix].push_back(f);
    }

    parallel_for(std::int64_t(r) * r, [&](std::int64_t col) {
        int ix = int(col % r), iy = int(col / r);
        const auto& tris = columns[col];
        if (tris.empty()) return;
        // deterministic retry offsets dodge edge-exact degeneracies
        for (int attempt = 0; attempt < 4; ++attempt) {
            double jx = 0.5 + 6.18033988e-5 * (attempt + 1);
            double jy = 0.5 + 2.71828182e-5 * (attempt + 1);
            double px = grid_lo.x() + (ix + jx) * cell.x();
            double py = grid_lo.y() + (iy + jy) * cell.y();
            std::vector<double> crossings;
            for (int f : tris) {
                auto [a, b, c] = mesh.face_vertices(f);
                const Vec3 &A = mesh.positions[a], &B = mesh.positions[b], &C = mesh.positions[c];
                double s0 = (B.x() - A.x()) * (py - A.y()) - (B.y() - A.y()) * (px - A.x());
                double s1 = (C.x() - B.x()) * (py - B.y()) - (C.y() - B.y()) * (px - B.x());
                double s2 = (A.x() - C.x()) * (py - C.y()) - (A.y() - C.y()) * (px - C.x());
                bool inside = (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
                if (!inside) continue;
                double sum = s0 + s1 + s2;
                double w0 = s1 / sum, w1 = s2 / sum, w2 = s0 / sum;
                crossings.push_back(w0 * A.z() + w1 * B.z() + w2 * C.z());
            }
            if (crossings.size() % 2 != 0) continue;  // hit a degeneracy, retry shifted
            std::sort(crossings.begin(), crossings.end());
            for (int iz = 0; iz < r; ++iz) {
                double z = grid_lo.z() + (iz + 0.5) * cell.z();
                int below = int(std::lower_bound(crossings.begin(), crossings.end(), z) -
                                crossings.begin());
                if (below % 2 == 1) occ[(std::size_t(iz) * r + iy) * r + ix] = 1;
            }
            return;
        }
    });
    return occ;
}

}  // namespace detail

/// Voxel-parity Volume IoU over the joint bounding box of both meshes.
inline double volume_iou(const HalfEdgeMesh& a, const HalfEdgeMesh& b, int grid_resolution = 128) {
    if (!a.is_closed() || !b.is_closed())
        fail("NotClosed", "volume IoU requires watertight meshes");
    Vec3 lo = a.positions[0], hi = a.positions[0];
    for (const Vec3& p : a.positions) { lo = lo.cwiseMin(p); hi = hi.cwiseMax(p); }
    for (const Vec3& p : b.positions) { lo = lo.cwiseMin(p); hi = hi.cwiseMax(p); }
    Vec3 pad = 1e-3 * (hi - lo).cwiseMax(Vec3::Constant(1e-9));
    lo -= pad;
    hi += pad;
    Vec3 cell = (hi - lo) / double(grid_resolution);

    std::vector<char> occ_a = detail::voxelize_parity(a, lo, cell, grid_resolution);
    std::vector<char> occ_b = detail::voxelize_parity(b, lo, cell, grid_resolution);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < occ_a.size(); ++i) {
        inter += occ_a[i] && occ_b[i];
        uni += occ_a[i] || occ_b[i];
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

struct EvalOptions {
    int samples = 100000;
    int grid_resolution = 128;
    int icp_iters = 50;
    std::uint64_t seed = 11;
    bool normalize = true;
    bool run_icp = true;
};

/// Full evaluation protocol: unit-normalize both meshes, ICP-align the
/// source onto the target, then Chamfer distance and Volume IoU.
inline EvalReport evaluate_meshes(HalfEdgeMesh source, HalfEdgeMesh target, const EvalOptions& opts) {
    EvalReport report;
    report.sample_count = opts.samples;
    report.grid_resolution = opts.grid_resolution;
    if (opts.normalize) {
        normalize_unit_radius(source);
        normalize_unit_radius(target);
    }
    if (opts.run_icp) {
        RigidTransform tf = icp_align(source, target, opts.icp_iters, 4000, opts.seed);
        apply_rigid(source, tf.rotation, tf.translation);
        report.icp_rotation = tf.rotation;
        report.icp_translation = tf.translation;
    }
    report.chamfer = chamfer_distance(source, target, opts.samples, opts.seed);
    if (source.is_closed() && target.is_closed())
        report.volume_iou = volume_iou(source, target, opts.grid_resolution);
    return report;
}

}  // namespace genusforge
