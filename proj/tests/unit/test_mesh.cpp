#include "mtlab/error.hpp"
#include "mtlab/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mtlab;

namespace {

double edge_sum(const Mesh& m) {
    double s = 0.0;
    for (const auto& e : m.boundary_edges) s += norm(m.nodes[e.nodes[1]] - m.nodes[e.nodes[0]]);
    return s;
}

}  // namespace

TEST_CASE("square mesh: area, Euler relation, boundary length") {
    auto m = build_mesh({UnitSquare{}, 0.1});
    CHECK_NOTHROW(validate(*m));
    CHECK(m->area == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m->num_nodes() - m->num_edges() + m->num_triangles() == 1);
    CHECK(edge_sum(*m) == doctest::Approx(4.0).epsilon(1e-13));
    for (std::size_t t = 0; t < m->num_triangles(); ++t) CHECK(m->signed_area(t) > 0.0);
}

TEST_CASE("disk mesh approaches pi and keeps boundary nodes on the circle") {
    auto m = build_mesh({Disk{1.0}, 0.05});
    CHECK_NOTHROW(validate(*m));
    CHECK(m->area < std::numbers::pi);
    CHECK(std::numbers::pi - m->area < 0.01);
    auto mask = m->boundary_node_mask();
    for (std::size_t i = 0; i < m->num_nodes(); ++i)
        if (mask[i]) CHECK(norm(m->nodes[i]) == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(m->boundary_circle);
}

TEST_CASE("refinement quarters triangles and keeps invariants") {
    auto m = build_mesh({Disk{1.0}, 0.2});
    auto r = refine(*m);
    CHECK_NOTHROW(validate(*r));
    CHECK(r->num_triangles() == 4 * m->num_triangles());
    CHECK(r->max_edge_length() < 0.6 * m->max_edge_length());
    CHECK(r->area > m->area);
    auto mask = r->boundary_node_mask();
    for (std::size_t i = 0; i < r->num_nodes(); ++i)
        if (mask[i]) CHECK(norm(r->nodes[i]) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("polygon meshes and polygon validation") {
    Polygon tri{{{0, 0}, {2, 0}, {0, 1}}};
    auto m = build_mesh({tri, 0.1});
    CHECK(m->area == doctest::Approx(1.0).epsilon(1e-13));
    Polygon cw{{{0, 0}, {0, 1}, {1, 0}}};
    CHECK_THROWS_AS(build_mesh({cw, 0.1}), ValidationError);
    Polygon nonconvex{{{0, 0}, {2, 0}, {1, 0.2}, {2, 2}, {0, 2}}};
    CHECK_THROWS_AS(build_mesh({nonconvex, 0.1}), ValidationError);
    CHECK_THROWS_AS(build_mesh({UnitSquare{}, 0.0}), ValidationError);
    CHECK_THROWS_AS(build_mesh({Disk{-1.0}, 0.1}), ValidationError);
}

TEST_CASE("scale multiplies coordinates and area") {
    auto m = build_mesh({UnitSquare{}, 0.25});
    auto s = scale(*m, 3.0);
    CHECK(s->area == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(s->nodes[5].x == 3.0 * m->nodes[5].x);
    CHECK_THROWS_AS(scale(*m, 0.0), ValidationError);
}

TEST_CASE("pick_boundary_point returns the nearest boundary node") {
    auto m = build_mesh({Disk{1.0}, 0.1});
    auto p = pick_boundary_point(*m, {1.0, 0.0});
    CHECK(p.coords.x == doctest::Approx(1.0));
    CHECK(std::abs(p.coords.y) < 1e-12);
    auto q = pick_boundary_point(*m, {0.1, 0.0});  // interior hint still lands on the boundary
    CHECK(norm(q.coords) == doctest::Approx(1.0));
    CHECK(boundary_interior_angle(*m, p.node_id) == doctest::Approx(std::numbers::pi).epsilon(0.05));
    Point n = inward_normal(*m, p.node_id);
    CHECK(n.x == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("square corners have a right interior angle") {
    auto m = build_mesh({UnitSquare{}, 0.25});
    auto c = pick_boundary_point(*m, {0.0, 0.0});
    CHECK(boundary_interior_angle(*m, c.node_id) == doctest::Approx(std::numbers::pi / 2));
    CHECK(distance_to_boundary(*m, {0.5, 0.5}) == doctest::Approx(0.5));
    auto loop = boundary_loop(*m);
    CHECK(loop.size() == m->boundary_edges.size());
}

TEST_CASE("mesh text round trip is exact, including the circle line") {
    auto m = build_mesh({Disk{1.0}, 0.2});
    std::string text = mesh_to_string(*m);
    std::istringstream in(text);
    auto back = read_mesh(in);
    CHECK(mesh_to_string(*back) == text);
    REQUIRE(back->boundary_circle);
    CHECK(back->boundary_circle->radius == 1.0);
}

TEST_CASE("malformed mesh files are rejected") {
    std::istringstream garbage("not a mesh\n");
    CHECK_THROWS_AS(read_mesh(garbage), ValidationError);
    auto m = build_mesh({UnitSquare{}, 0.5});
    std::string text = mesh_to_string(*m);
    text.resize(text.size() / 2);
    std::istringstream cut(text);
    CHECK_THROWS_AS(read_mesh(cut), ValidationError);
    CHECK_THROWS_AS(load_mesh("/nonexistent/file.msh"), ValidationError);
}

TEST_CASE("validate catches an inverted triangle") {
    auto m = build_mesh({UnitSquare{}, 0.5});
    Mesh bad = *m;
    std::swap(bad.triangles[0][0], bad.triangles[0][1]);
    CHECK_THROWS_AS(validate(bad), ValidationError);
}
