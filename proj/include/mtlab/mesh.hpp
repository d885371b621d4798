#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mtlab {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point a);

using NodeIndex = std::int32_t;
using Triangle = std::array<NodeIndex, 3>;

struct BoundaryEdge {
    std::array<NodeIndex, 2> nodes;
    int tag = 0;
};

struct UnitSquare {};

struct Disk {
    double radius = 1.0;
};

/// Counter-clockwise vertex list of a simple convex polygon.
struct Polygon {
    std::vector<Point> vertices;
};

struct DomainSpec {
    std::variant<UnitSquare, Disk, Polygon> kind;
    double target_h = 0.1;
};

struct Circle {
    Point center;
    double radius = 1.0;
};

/// Conforming P1 triangulation. Immutable once built; share through MeshPtr.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<Triangle> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    double area = 0.0;
    /// Set for disk meshes; refine() projects new boundary nodes onto it.
    /// Stored in the mesh file as an optional trailing `circle cx cy r` line.
    std::optional<Circle> boundary_circle;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
    double signed_area(std::size_t t) const;
    double max_edge_length() const;
    std::size_t num_edges() const;
    std::vector<bool> boundary_node_mask() const;
};

using MeshPtr = std::shared_ptr<const Mesh>;

struct BoundaryPoint {
    NodeIndex node_id = 0;
    Point coords;
};

MeshPtr build_mesh(const DomainSpec& spec);
MeshPtr refine(const Mesh& mesh);
/// Copy of the mesh with every coordinate multiplied by s (s > 0).
MeshPtr scale(const Mesh& mesh, double s);

/// Nearest boundary node to hint; ties go to the smallest node index.
BoundaryPoint pick_boundary_point(const Mesh& mesh, Point hint);

/// Interior angle of the domain at a boundary node (pi on a straight piece).
double boundary_interior_angle(const Mesh& mesh, NodeIndex node);

/// Unit normal pointing into the domain at a boundary node (average of the
/// two adjacent edge normals).
Point inward_normal(const Mesh& mesh, NodeIndex node);

/// Boundary nodes in loop order (counter-clockwise), starting at the smallest index.
std::vector<NodeIndex> boundary_loop(const Mesh& mesh);

/// Checks every structural invariant; throws ValidationError on the first failure.
void validate(const Mesh& mesh);

/// Euclidean distance from x to the boundary polyline.
double distance_to_boundary(const Mesh& mesh, Point x);

// mt-mesh v1 text format.
void write_mesh(std::ostream& os, const Mesh& mesh);
std::string mesh_to_string(const Mesh& mesh);
MeshPtr read_mesh(std::istream& is);
MeshPtr load_mesh(const std::string& path);
void save_mesh(const std::string& path, const Mesh& mesh);

}  // namespace mtlab
