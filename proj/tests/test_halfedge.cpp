#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "genusforge/halfedge.hpp"
#include "genusforge/primitives.hpp"
#include "test_support.hpp"

using namespace genusforge;
using namespace genusforge::testsupport;

TEST_CASE("tetrahedron counts") {
    HalfEdgeMesh mesh = make_tetrahedron();
    CHECK(mesh.num_vertices() == 4);
    CHECK(mesh.num_faces() == 4);
    CHECK(mesh.num_halfedges() == 12);
    CHECK(mesh.num_edges() == 6);
    CHECK(mesh.is_closed());
    CHECK(2 * mesh.num_edges() == 3 * mesh.num_faces());
}

TEST_CASE("icosahedron counts and summary") {
    HalfEdgeMesh mesh = make_icosahedron();
    TopologySummary s = topology_summary(mesh);
    CHECK(s.num_vertices == 12);
    CHECK(s.num_edges == 30);
    CHECK(s.num_faces == 20);
    CHECK(s.euler_characteristic == 2);
    CHECK(s.is_closed);
    CHECK(s.is_orientable);
    REQUIRE(s.genus.has_value());
    CHECK(*s.genus == 0);
}

TEST_CASE("grid torus topology") {
    HalfEdgeMesh mesh = make_grid_torus(16, 16, 0.7, 0.3);
    TopologySummary s = topology_summary(mesh);
    CHECK(s.num_vertices == 256);
    CHECK(s.euler_characteristic == 0);
    REQUIRE(s.genus.has_value());
    CHECK(*s.genus == 1);
}

TEST_CASE("inconsistent orientation is rejected") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    // second triangle repeats the directed edge 1->2
    std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {1, 2, 3}};
    CHECK_THROWS_MATCHES(build_mesh(tris, pts), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "InconsistentOrientation"; }));
}

TEST_CASE("non-manifold edge is rejected") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
    std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    CHECK_THROWS_MATCHES(build_mesh(tris, pts), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "NonManifoldEdge"; }));
}

TEST_CASE("bowtie vertex is rejected") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0},  {1, 1, 0},
                             {-1, 0, 0}, {-1, -1, 0}};
    std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {0, 3, 4}};
    CHECK_THROWS_MATCHES(build_mesh(tris, pts), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "NonManifoldVertex"; }));
}

TEST_CASE("degenerate face is rejected") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}};
    std::vector<std::array<int, 3>> tris = {{0, 1, 1}};
    CHECK_THROWS_MATCHES(build_mesh(tris, pts), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "DegenerateFace"; }));
}

TEST_CASE("one-ring valences") {
    HalfEdgeMesh icosa = make_icosahedron();
    for (int v = 0; v < icosa.num_vertices(); ++v) {
        OneRing ring = one_ring(icosa, v);
        CHECK(ring.neighbors.size() == 5);
        CHECK(ring.faces.size() == 5);
    }
    HalfEdgeMesh tetra = make_tetrahedron();
    for (int v = 0; v < 4; ++v) CHECK(valence(tetra, v) == 3);

    HalfEdgeMesh torus = make_grid_torus(8, 8, 0.7, 0.3);
    for (int v = 0; v < torus.num_vertices(); ++v) CHECK(valence(torus, v) == 6);
}

TEST_CASE("one-ring visits each incident face exactly once on random valid meshes") {
    Rng rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        HalfEdgeMesh mesh = make_noisy_icosphere(2, 0.05, rng.next_u64());
        std::vector<int> incident(mesh.num_vertices(), 0);
        for (int h = 0; h < mesh.num_halfedges(); ++h) incident[mesh.origin(h)]++;
        for (int v = 0; v < mesh.num_vertices(); ++v) {
            OneRing ring = one_ring(mesh, v);
            CHECK(int(ring.faces.size()) == incident[v]);
            // winding order: consecutive neighbors share a face with v
            for (std::size_t k = 0; k < ring.faces.size(); ++k) {
                auto fv = mesh.face_vertices(ring.faces[k]);
                bool has_v = fv[0] == v || fv[1] == v || fv[2] == v;
                CHECK(has_v);
            }
        }
    }
}

TEST_CASE("boundary vertex one-ring on a grid patch") {
    HalfEdgeMesh patch = make_grid_patch(3, 3);
    // interior vertex of the grid triangulation has valence 6
    CHECK(valence(patch, 5) == 6);
    CHECK(!patch.is_closed());
    CHECK(patch.is_boundary_vertex(0));
    CHECK(!patch.is_boundary_vertex(5));
}

TEST_CASE("genus matches the cycle-rank oracle") {
    for (int g = 0; g <= 4; ++g) {
        HalfEdgeMesh mesh = make_primitive({g, 12, 1.0});
        TopologySummary s = topology_summary(mesh);
        REQUIRE(s.genus.has_value());
        CHECK(*s.genus == g);
        CHECK(genus_cycle_rank_oracle(mesh) == g);
    }
}

TEST_CASE("obj round-trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "genusforge_test_obj";
    fs::create_directories(dir);
    std::string path = (dir / "icosphere.obj").string();

    HalfEdgeMesh mesh = make_icosphere(2, 0.987654321);
    save_obj(mesh, path);
    HalfEdgeMesh loaded = load_obj(path);

    TopologySummary a = topology_summary(mesh), b = topology_summary(loaded);
    CHECK(a.num_vertices == b.num_vertices);
    CHECK(a.num_edges == b.num_edges);
    CHECK(a.num_faces == b.num_faces);
    CHECK(a.euler_characteristic == b.euler_characteristic);

    // connectivity preserved exactly, positions to 9 significant digits
    for (int f = 0; f < mesh.num_faces(); ++f) CHECK(mesh.face_vertices(f) == loaded.face_vertices(f));
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        for (int k = 0; k < 3; ++k) {
            double ref = mesh.positions[v][k];
            double tol = std::abs(ref) * 1e-8 + 1e-12;
            CHECK(std::abs(loaded.positions[v][k] - ref) <= tol);
        }
    }

    // second round-trip is exact: printed representation is a fixpoint
    std::string path2 = (dir / "icosphere2.obj").string();
    save_obj(loaded, path2);
    HalfEdgeMesh loaded2 = load_obj(path2);
    for (int v = 0; v < loaded.num_vertices(); ++v)
        CHECK(loaded.positions[v] == loaded2.positions[v]);
}

TEST_CASE("obj error cases") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "genusforge_test_obj";
    fs::create_directories(dir);

    auto write_file = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name);
        out << text;
        return (dir / name).string();
    };

    std::string quad = write_file("quad.obj",
                                  "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    CHECK_THROWS_MATCHES(load_obj(quad), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "NonTriangular"; }));

    std::string zero_index = write_file("zero.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
    CHECK_THROWS_MATCHES(load_obj(zero_index), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "ParseError"; }));

    std::string bad_float = write_file("badfloat.obj", "v 0 zero 0\n");
    CHECK_THROWS_MATCHES(load_obj(bad_float), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "ParseError"; }));

    std::string suffixed = write_file("suffix.obj",
                                      "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n"
                                      "f 1/1/1 2/1/1 3/1/1\n");
    HalfEdgeMesh mesh = load_obj(suffixed);
    CHECK(mesh.num_faces() == 1);
}
