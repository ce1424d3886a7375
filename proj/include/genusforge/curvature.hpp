#pragma once

#include <Eigen/SparseCore>

#include <cstdio>
#include <vector>

#include "genusforge/halfedge.hpp"

namespace genusforge {

/// Discrete Laplacian in difference form: (L x)_i = sum_j w_ij (x_j - x_i).
/// Row sums are zero by construction, so constants are annihilated exactly
/// in floating point. Diagonal entries of the assembled matrix are the
/// negated off-diagonal row sums.
struct LaplacianOperator {
    enum class Scheme { Uniform, Cotangent };

    Scheme scheme = Scheme::Uniform;
    int n = 0;
    std::vector<int> row_offsets;          // size n+1
    std::vector<int> cols;                 // neighbor vertex ids
    std::vector<double> weights;           // w_ij
    std::vector<double> vertex_area;       // mixed Voronoi area A_i

    /// Apply to an n x 3 coordinate stack.
    MatX3 apply(const MatX3& x) const {
        MatX3 out = MatX3::Zero(n, 3);
        for (int i = 0; i < n; ++i)
            for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
                out.row(i) += weights[k] * (x.row(cols[k]) - x.row(i));
        return out;
    }

    Vec3 apply_at(const MatX3& x, int i) const {
        Vec3 out = Vec3::Zero();
        for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
            out += weights[k] * (x.row(cols[k]) - x.row(i)).transpose();
        return out;
    }

    Eigen::SparseMatrix<double> to_sparse() const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(cols.size() + n);
        for (int i = 0; i < n; ++i) {
            double diag = 0;
            for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
                trip.emplace_back(i, cols[k], weights[k]);
                diag -= weights[k];
            }
            trip.emplace_back(i, i, diag);
        }
        Eigen::SparseMatrix<double> m(n, n);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }
};

namespace detail {

inline double cot_opposite(const Vec3& apex, const Vec3& a, const Vec3& b) {
    Vec3 u = a - apex, v = b - apex;
    double cross = u.cross(v).norm();
    if (cross <= 1e-30)
        fail("DegenerateAngle", "collinear face corner");
    return u.dot(v) / cross;
}

}  // namespace detail

/// Mixed Voronoi vertex areas (Meyer et al.): Voronoi-exact on non-obtuse
/// triangles, T/2 at the obtuse corner and T/4 elsewhere otherwise.
inline std::vector<double> mixed_vertex_areas(const HalfEdgeMesh& mesh) {
    std::vector<double> area(mesh.num_vertices(), 0.0);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        auto vid = mesh.face_vertices(f);
        Vec3 p[3] = {mesh.positions[vid[0]], mesh.positions[vid[1]], mesh.positions[vid[2]]};
        double tri_area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
        if (!(tri_area > 0)) fail("DegenerateAngle", "zero-area face " + std::to_string(f));
        double cot[3];
        bool obtuse[3] = {false, false, false};
        bool any_obtuse = false;
        for (int k = 0; k < 3; ++k) {
            Vec3 u = p[(k + 1) % 3] - p[k], v = p[(k + 2) % 3] - p[k];
            cot[k] = u.dot(v) / u.cross(v).norm();
            if (cot[k] < 0) { obtuse[k] = true; any_obtuse = true; }
        }
        for (int k = 0; k < 3; ++k) {
            if (!any_obtuse) {
                double e1 = (p[(k + 1) % 3] - p[k]).squaredNorm();
                double e2 = (p[(k + 2) % 3] - p[k]).squaredNorm();
                area[vid[k]] += (e1 * cot[(k + 2) % 3] + e2 * cot[(k + 1) % 3]) / 8.0;
            } else {
                area[vid[k]] += obtuse[k] ? tri_area / 2.0 : tri_area / 4.0;
            }
        }
    }
    return area;
}

inline LaplacianOperator build_laplacian(const HalfEdgeMesh& mesh, LaplacianOperator::Scheme scheme) {
    LaplacianOperator L;
    L.scheme = scheme;
    L.n = mesh.num_vertices();
    L.vertex_area = mixed_vertex_areas(mesh);
    L.row_offsets.assign(L.n + 1, 0);

    // Per-vertex rows in one-ring order; deterministic entry order.
    std::vector<OneRing> rings(L.n);
    for (int v = 0; v < L.n; ++v) {
        rings[v] = one_ring(mesh, v);
        L.row_offsets[v + 1] = L.row_offsets[v] + int(rings[v].neighbors.size());
    }
    L.cols.resize(L.row_offsets[L.n]);
    L.weights.resize(L.row_offsets[L.n]);

    if (scheme == LaplacianOperator::Scheme::Uniform) {
        for (int v = 0; v < L.n; ++v) {
            const auto& nb = rings[v].neighbors;
            double w = 1.0 / double(nb.size());
            for (std::size_t k = 0; k < nb.size(); ++k) {
                L.cols[L.row_offsets[v] + int(k)] = nb[k];
                L.weights[L.row_offsets[v] + int(k)] = w;
            }
        }
        return L;
    }

    // Cotangent: w_ij = (cot a_ij + cot b_ij)/2, angles opposite edge (i,j).
    // Accumulate per half-edge, then scatter into ring order.
    std::unordered_map<std::int64_t, double> w_edge;
    w_edge.reserve(std::size_t(mesh.num_halfedges()));
    auto key = [&](int a, int b) {
        int lo = std::min(a, b), hi = std::max(a, b);
        return std::int64_t(lo) * L.n + hi;
    };
    for (int h = 0; h < mesh.num_halfedges(); ++h) {
        int i = mesh.origin(h), j = mesh.head(h);
        int opp = mesh.head(mesh.next(h));
        double c = detail::cot_opposite(mesh.positions[opp], mesh.positions[i], mesh.positions[j]);
        w_edge[key(i, j)] += 0.5 * c;
    }
    for (int v = 0; v < L.n; ++v) {
        const auto& nb = rings[v].neighbors;
        for (std::size_t k = 0; k < nb.size(); ++k) {
            L.cols[L.row_offsets[v] + int(k)] = nb[k];
            L.weights[L.row_offsets[v] + int(k)] = w_edge.at(key(v, nb[k]));
        }
    }
    return L;
}

inline MatX3 positions_matrix(const HalfEdgeMesh& mesh) {
    MatX3 x(mesh.num_vertices(), 3);
    for (int v = 0; v < mesh.num_vertices(); ++v) x.row(v) = mesh.positions[v];
    return x;
}

/// Angle-deficit Gaussian curvature: K_i = deficit_i / A_i (2*pi variant at
/// interior vertices, pi at boundary ones). The raw deficit is the
/// integrated curvature used by the Gauss-Bonnet check.
struct GaussianCurvature {
    std::vector<double> K;
    std::vector<double> raw_deficit;
    std::vector<double> vertex_area;
};

inline GaussianCurvature gaussian_curvature(const HalfEdgeMesh& mesh) {
    GaussianCurvature out;
    out.vertex_area = mixed_vertex_areas(mesh);
    out.raw_deficit = angle_deficits(mesh);
    out.K.resize(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v)
        out.K[v] = out.raw_deficit[v] / out.vertex_area[v];
    return out;
}

/// Laplacian-based mean curvature H_i = 0.5 ||(L x)_i|| / A_i, signed
/// positive when the Laplacian vector points against the outward normal
/// (convex regions of an outward-oriented mesh get H > 0).
inline std::vector<double> mean_curvature(const HalfEdgeMesh& mesh, const LaplacianOperator& L) {
    if (L.n != mesh.num_vertices()) fail("ShapeMismatch", "laplacian built from a different mesh");
    MatX3 x = positions_matrix(mesh);
    std::vector<double> H(L.n);
    for (int v = 0; v < L.n; ++v) {
        Vec3 lx = L.apply_at(x, v);
        double h = 0.5 * lx.norm() / L.vertex_area[v];
        H[v] = lx.dot(vertex_normal(mesh, v)) < 0 ? h : -h;
    }
    return H;
}

/// k1,k2 = H +- sqrt(max(H^2 - K, 0)); the discriminant clamp keeps the
/// pair real when the independent discrete estimates violate H^2 >= K.
inline void principal_curvatures(const std::vector<double>& K, const std::vector<double>& H,
                                 std::vector<double>& k1, std::vector<double>& k2) {
    if (K.size() != H.size()) fail("ShapeMismatch", "K and H length mismatch");
    k1.resize(K.size());
    k2.resize(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) {
        double d = std::sqrt(std::max(H[i] * H[i] - K[i], 0.0));
        k1[i] = H[i] + d;
        k2[i] = H[i] - d;
    }
}

struct CurvatureField {
    std::vector<double> gaussian;     // K_i
    std::vector<double> mean;         // H_i (signed)
    std::vector<double> k1, k2;       // principal, k1 >= k2
    std::vector<double> raw_deficit;
    std::vector<double> vertex_area;
    std::vector<char> boundary;
};

inline CurvatureField curvature_field(const HalfEdgeMesh& mesh, const LaplacianOperator& L) {
    CurvatureField f;
    GaussianCurvature g = gaussian_curvature(mesh);
    f.gaussian = std::move(g.K);
    f.raw_deficit = std::move(g.raw_deficit);
    f.vertex_area = std::move(g.vertex_area);
    f.mean = mean_curvature(mesh, L);
    principal_curvatures(f.gaussian, f.mean, f.k1, f.k2);
    f.boundary.resize(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) f.boundary[v] = mesh.is_boundary_vertex(v);
    return f;
}

inline void export_curvature_csv(const CurvatureField& field, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) fail("IoError", "cannot open " + path + " for writing");
    std::fprintf(fp, "vid,K,H,k1,k2\n");
    for (std::size_t v = 0; v < field.gaussian.size(); ++v)
        std::fprintf(fp, "%zu,%.9g,%.9g,%.9g,%.9g\n", v, field.gaussian[v], field.mean[v],
                     field.k1[v], field.k2[v]);
    std::fclose(fp);
}

}  // namespace genusforge
