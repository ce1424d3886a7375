#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cstdio>
#include <memory>
#include <vector>

#include "genusforge/curvature.hpp"
#include "genusforge/halfedge.hpp"
#include "genusforge/remesh.hpp"
#include "genusforge/render.hpp"

namespace genusforge {

struct LossBreakdown {
    double render_l1 = 0;
    double smooth = 0;
    double invert = 0;
    double total() const { return render_l1 + smooth + invert; }
};

// Per-face reference captured at initialization and after every remesh
// event: the outward normal and det of the 2x2 edge matrix in the face's
// orthonormal tangent frame. det(J) for the current face follows as
// n_ref . (e1' x e2') / det(S); negative means the face flipped against
// its reference orientation.
struct ReferenceFrames {
    std::vector<Vec3> normal;
    std::vector<double> det_s;  // 2 * reference area
    int num_vertices = 0;
    int num_faces = 0;
};

inline ReferenceFrames capture_reference_frames(const HalfEdgeMesh& mesh) {
    ReferenceFrames rf;
    rf.num_vertices = mesh.num_vertices();
    rf.num_faces = mesh.num_faces();
    rf.normal.resize(mesh.num_faces());
    rf.det_s.resize(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        Vec3 n = face_normal_unnormalized(mesh, f);
        double len = n.norm();
        if (len <= 1e-12) fail("DegenerateFace", "cannot capture frame of zero-area face");
        rf.normal[f] = n / len;
        rf.det_s[f] = len;  // det of the tangent-frame edge matrix is 2*area
    }
    return rf;
}

inline double face_det_j(const HalfEdgeMesh& mesh, const ReferenceFrames& rf, int f) {
    auto [a, b, c] = mesh.face_vertices(f);
    Vec3 e1 = mesh.positions[b] - mesh.positions[a];
    Vec3 e2 = mesh.positions[c] - mesh.positions[a];
    return rf.normal[f].dot(e1.cross(e2)) / rf.det_s[f];
}

/// w2 * sum_k min(0, det J_k)^2 and its gradient; one-sided, so faces with
/// det J > 0 contribute nothing.
inline double inversion_penalty(const HalfEdgeMesh& mesh, const ReferenceFrames& rf, double w2,
                                MatX3& grad, int* num_inverted = nullptr) {
    if (rf.num_faces != mesh.num_faces() || rf.num_vertices != mesh.num_vertices())
        fail("StaleFrames", "reference frames do not match current connectivity");
    double value = 0;
    int inverted = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        double det = face_det_j(mesh, rf, f);
        if (det > 0) continue;
        ++inverted;
        value += w2 * det * det;
        auto [a, b, c] = mesh.face_vertices(f);
        Vec3 e1 = mesh.positions[b] - mesh.positions[a];
        Vec3 e2 = mesh.positions[c] - mesh.positions[a];
        const Vec3& n = rf.normal[f];
        double scale = 2.0 * w2 * det / rf.det_s[f];
        Vec3 gb = scale * e2.cross(n);
        Vec3 gc = scale * n.cross(e1);
        grad.row(b) += gb.transpose();
        grad.row(c) += gc.transpose();
        grad.row(a) -= (gb + gc).transpose();
    }
    if (num_inverted) *num_inverted = inverted;
    return value;
}

/// tr(x^T B x) with B = L^T L the uniform bi-Laplacian: value ||L x||^2,
/// gradient 2 L^T L x. Applied in difference form, so constants map to
/// exactly zero.
inline double smoothness_term(const MatX3& x, const LaplacianOperator& L, MatX3& grad) {
    MatX3 lx = L.apply(x);
    double value = lx.squaredNorm();
    // grad += 2 L^T (L x)
    for (int i = 0; i < L.n; ++i) {
        double rowsum = 0;
        for (int k = L.row_offsets[i]; k < L.row_offsets[i + 1]; ++k) {
            grad.row(L.cols[k]) += 2.0 * L.weights[k] * lx.row(i);
            rowsum += L.weights[k];
        }
        grad.row(i) -= 2.0 * rowsum * lx.row(i);
    }
    return value;
}

/// Rendering targets plus the regularizer state for Eq-style total loss:
/// l1(render buffers) + w1 tr(x^T L^T L x) + w2 sum min(0, det J)^2.
struct Objective {
    std::vector<Camera> cameras;
    std::vector<RenderedView> targets;
    double sigma_px = 1.0;
    double w1 = 1e-4;
    double w2 = 100.0;

    ReferenceFrames frames;
    LaplacianOperator laplacian;  // uniform scheme

    void bind_mesh(const HalfEdgeMesh& mesh) {
        frames = capture_reference_frames(mesh);
        laplacian = build_laplacian(mesh, LaplacianOperator::Scheme::Uniform);
    }

    void check_targets() const {
        if (cameras.size() != targets.size())
            fail("TargetMismatch", "camera count differs from target view count");
        for (std::size_t i = 0; i < cameras.size(); ++i)
            if (targets[i].coverage.width != cameras[i].width ||
                targets[i].coverage.height != cameras[i].height)
                fail("TargetMismatch", "target resolution differs from camera resolution");
    }
};

/// Total objective at the mesh's current positions: per-view mean-l1 over
/// the four buffer channels, summed over views, plus both regularizers.
/// The gradient is the exact adjoint of the full composition.
inline LossBreakdown objective_value_and_grad(const HalfEdgeMesh& mesh, const Objective& objective,
                                              MatX3& grad, int* num_inverted = nullptr) {
    if (objective.frames.num_vertices != mesh.num_vertices() ||
        objective.frames.num_faces != mesh.num_faces())
        fail("StaleFrames", "objective bound to a different connectivity");
    objective.check_targets();

    const int n_views = int(objective.cameras.size());
    grad = MatX3::Zero(mesh.num_vertices(), 3);

    std::vector<double> view_loss(n_views, 0.0);
    std::vector<MatX3> view_grad(n_views);
    parallel_for(n_views, [&](std::int64_t vi) {
        const Camera& cam = objective.cameras[vi];
        const RenderedView& target = objective.targets[vi];
        render_detail::RenderAux aux;
        RenderedView out = render_with_aux(mesh, cam, objective.sigma_px, &aux);

        const double norm = 1.0 / (4.0 * cam.width * cam.height);
        RenderedView adjoint;
        adjoint.coverage = Image(cam.width, cam.height, 1);
        adjoint.normal = Image(cam.width, cam.height, 3);
        double loss = 0;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                double dc = out.coverage.at(x, y) - target.coverage.at(x, y);
                loss += std::abs(dc) * norm;
                adjoint.coverage.at(x, y) = dc > 0 ? norm : (dc < 0 ? -norm : 0.0);
                for (int c = 0; c < 3; ++c) {
                    double dn = out.normal.at(x, y, c) - target.normal.at(x, y, c);
                    loss += std::abs(dn) * norm;
                    adjoint.normal.at(x, y, c) = dn > 0 ? norm : (dn < 0 ? -norm : 0.0);
                }
            }
        view_loss[vi] = loss;
        view_grad[vi] = render_backward_with_aux(mesh, cam, adjoint, aux).d_position;
    });

    LossBreakdown loss;
    for (int vi = 0; vi < n_views; ++vi) {
        loss.render_l1 += view_loss[vi];
        grad += view_grad[vi];
    }

    MatX3 x = positions_matrix(mesh);
    MatX3 smooth_grad = MatX3::Zero(mesh.num_vertices(), 3);
    loss.smooth = objective.w1 * smoothness_term(x, objective.laplacian, smooth_grad);
    grad += objective.w1 * smooth_grad;

    loss.invert = inversion_penalty(mesh, objective.frames, objective.w2, grad, num_inverted);
    return loss;
}

/// Latent-coordinate Adam: x = (I + lambda*L)^-1 u with L the positive
/// uniform Laplacian, gradients pulled back through the transposed solve.
struct OptimizerState {
    MatX3 u, mom1, mom2;
    double alpha = 1e-2;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda = 19.0;
    int iteration = 0;

    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> solver, solver_t;

    /// (Re)initialize for a mesh: factor I + lambda*L, set u so that the
    /// latent maps to the current positions, reset moments.
    void init_from_mesh(const HalfEdgeMesh& mesh, const LaplacianOperator& uniform_laplacian) {
        const int n = mesh.num_vertices();
        MatX3 x = positions_matrix(mesh);
        if (lambda == 0.0) {
            solver.reset();
            solver_t.reset();
            u = x;
        } else {
            Eigen::SparseMatrix<double> identity(n, n);
            identity.setIdentity();
            // curvature-convention uniform Laplacian is D^-1 A - I; the
            // positive form is its negation
            Eigen::SparseMatrix<double> system = identity - lambda * uniform_laplacian.to_sparse();
            solver = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            solver->compute(system);
            if (solver->info() != Eigen::Success) fail("SolveFailure", "factorization of I + lambda*L failed");
            Eigen::SparseMatrix<double> system_t = system.transpose();
            solver_t = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            solver_t->compute(system_t);
            if (solver_t->info() != Eigen::Success) fail("SolveFailure", "transpose factorization failed");
            u = system * x;
        }
        mom1 = MatX3::Zero(n, 3);
        mom2 = MatX3::Zero(n, 3);
        iteration = 0;
    }

    MatX3 positions() const {
        if (!solver) return u;
        return solver->solve(u);
    }

    MatX3 pull_back(const MatX3& grad_x) const {
        if (!solver_t) return grad_x;
        return solver_t->solve(grad_x);
    }

    /// One bias-corrected Adam update on the latent coordinates.
    void adam_step(const MatX3& grad_u) {
        if (grad_u.rows() != u.rows()) fail("ShapeMismatch", "gradient shape differs from latent");
        ++iteration;
        mom1 = beta1 * mom1 + (1.0 - beta1) * grad_u;
        mom2 = beta2 * mom2 + (1.0 - beta2) * grad_u.cwiseProduct(grad_u);
        double c1 = 1.0 - std::pow(beta1, iteration);
        double c2 = 1.0 - std::pow(beta2, iteration);
        u.array() -= alpha * (mom1.array() / c1) / ((mom2.array() / c2).sqrt() + adam_eps);
    }
};

/// One optimization step: map latent to positions, evaluate the objective,
/// pull the gradient back through the transposed solve, Adam-update.
inline LossBreakdown step(OptimizerState& state, HalfEdgeMesh& mesh, const Objective& objective,
                          int* num_inverted = nullptr) {
    MatX3 x = state.positions();
    if (x.rows() != mesh.num_vertices()) fail("ShapeMismatch", "latent size differs from mesh");
    for (int v = 0; v < mesh.num_vertices(); ++v) mesh.positions[v] = x.row(v);
    MatX3 grad_x;
    LossBreakdown loss = objective_value_and_grad(mesh, objective, grad_x, num_inverted);
    state.adam_step(state.pull_back(grad_x));
    return loss;
}

struct ReconstructOptions {
    std::vector<Camera> cameras;
    std::vector<RenderedView> targets;
    HalfEdgeMesh init_mesh;
    double sigma_px = 1.0;
    double w1 = 1e-4, w2 = 100.0;
    double alpha = 1e-2, beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, lambda = 19.0;
    RemeshParams remesh;
    int iterations = 600;
    int plateau_window = 100;
    double plateau_rel = 1e-5;
    int snapshot_every = 0;        // OBJ snapshots every S iterations (0 = off)
    std::string out_dir;           // loss CSV + snapshots live here when set
    std::uint64_t seed = 0;
};

struct IterationRow {
    int iter;
    double loss_render, loss_smooth, loss_invert;
    int num_vertices, genus;
};

struct RemeshEventRow {
    int iter;
    RemeshMode mode;
    MutationReport report;
    int num_vertices_after;
};

struct ReconstructReport {
    std::vector<IterationRow> history;
    std::vector<RemeshEventRow> remesh_events;
    int final_genus = -1;
    int final_num_inverted = 0;
    bool plateau_stopped = false;
};

inline void write_loss_csv(const std::vector<IterationRow>& rows, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) fail("IoError", "cannot open " + path + " for writing");
    std::fprintf(fp, "iter,loss_render,loss_smooth,loss_invert,num_vertices,genus\n");
    for (const auto& r : rows)
        std::fprintf(fp, "%d,%.12g,%.12g,%.12g,%d,%d\n", r.iter, r.loss_render, r.loss_smooth,
                     r.loss_invert, r.num_vertices, r.genus);
    std::fclose(fp);
}

/// Full reconstruction loop: render/loss/grad/step with remesh events every
/// P iterations (P drawn per event from the configured range), alternating
/// coarsen/refine. Every event re-verifies the genus; a change is fatal.
inline HalfEdgeMesh reconstruct(const ReconstructOptions& options, ReconstructReport& report) {
    HalfEdgeMesh mesh = options.init_mesh;
    validate_full(mesh);
    TopologySummary init_summary = topology_summary(mesh);
    if (!init_summary.genus) fail("GenusChanged", "initial mesh must be closed and orientable");
    const int genus0 = *init_summary.genus;

    Objective objective;
    objective.cameras = options.cameras;
    objective.targets = options.targets;
    objective.sigma_px = options.sigma_px;
    objective.w1 = options.w1;
    objective.w2 = options.w2;
    objective.check_targets();
    objective.bind_mesh(mesh);

    OptimizerState state;
    state.alpha = options.alpha;
    state.beta1 = options.beta1;
    state.beta2 = options.beta2;
    state.adam_eps = options.adam_eps;
    state.lambda = options.lambda;
    state.init_from_mesh(mesh, objective.laplacian);

    options.remesh.check();
    Rng rng(options.seed ^ 0x726d7368ULL);
    auto draw_period = [&] {
        return int(rng.uniform_int(options.remesh.period_min, options.remesh.period_max));
    };
    int next_event = draw_period();
    RemeshMode mode = RemeshMode::Coarsen;

    int num_inverted = 0;
    bool stepped = false;
    for (int iter = 1; iter <= options.iterations; ++iter) {
        if (iter == next_event) {
            MatX3 x = state.positions();
            for (int v = 0; v < mesh.num_vertices(); ++v) mesh.positions[v] = x.row(v);
            LaplacianOperator cot = build_laplacian(mesh, LaplacianOperator::Scheme::Cotangent);
            CurvatureField curv = curvature_field(mesh, cot);
            RemeshResult res = remesh_event(mesh, curv, options.remesh, mode);
            mesh = std::move(res.mesh);
            TopologySummary s = topology_summary(mesh);
            if (!s.genus || *s.genus != genus0)
                fail("GenusChanged", "remesh event changed the genus");
            report.remesh_events.push_back({iter, mode, res.report, mesh.num_vertices()});
            objective.bind_mesh(mesh);
            state.init_from_mesh(mesh, objective.laplacian);
            mode = mode == RemeshMode::Coarsen ? RemeshMode::Refine : RemeshMode::Coarsen;
            next_event = iter + draw_period();
        }

        LossBreakdown loss = step(state, mesh, objective, &num_inverted);
        stepped = true;
        report.history.push_back({iter, loss.render_l1, loss.smooth, loss.invert,
                                  mesh.num_vertices(), genus0});

        if (!std::isfinite(loss.total())) fail("SolveFailure", "non-finite loss");

        if (options.snapshot_every > 0 && !options.out_dir.empty() &&
            iter % options.snapshot_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "/snapshot_%05d.obj", iter);
            save_obj(mesh, options.out_dir + name);
        }

        // plateau stop: relative improvement below threshold over a window
        if (options.plateau_window > 0 && int(report.history.size()) > options.plateau_window) {
            double past = 0, now = loss.total();
            const auto& h = report.history;
            past = h[h.size() - 1 - options.plateau_window].loss_render +
                   h[h.size() - 1 - options.plateau_window].loss_smooth +
                   h[h.size() - 1 - options.plateau_window].loss_invert;
            if (past > 0 && (past - now) / past < options.plateau_rel) {
                report.plateau_stopped = true;
                break;
            }
        }
    }

    if (stepped) {
        MatX3 x = state.positions();
        for (int v = 0; v < mesh.num_vertices(); ++v) mesh.positions[v] = x.row(v);
    }

    TopologySummary final_summary = topology_summary(mesh);
    report.final_genus = final_summary.genus ? *final_summary.genus : -1;
    // inversion count of the final positions against the last captured frames
    report.final_num_inverted = 0;
    for (int f = 0; f < mesh.num_faces(); ++f)
        if (face_det_j(mesh, objective.frames, f) <= 0) ++report.final_num_inverted;

    if (!options.out_dir.empty())
        write_loss_csv(report.history, options.out_dir + "/loss.csv");
    return mesh;
}

}  // namespace genusforge
