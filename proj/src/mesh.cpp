#include "mtlab/mesh.hpp"

#include "mtlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

namespace mtlab {

double norm(Point a) { return std::hypot(a.x, a.y); }

namespace {

using EdgeKey = std::pair<NodeIndex, NodeIndex>;

EdgeKey key(NodeIndex a, NodeIndex b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double tri_area(const Point& a, const Point& b, const Point& c) { return 0.5 * cross(b - a, c - a); }

void finish(Mesh& m) {
    double area = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) area += m.signed_area(t);
    m.area = area;
}

MeshPtr build_square(double h) {
    auto n = static_cast<NodeIndex>(std::ceil(1.0 / h - 1e-12));
    n = std::max<NodeIndex>(n, 1);
    auto m = std::make_shared<Mesh>();
    auto id = [n](NodeIndex i, NodeIndex j) { return j * (n + 1) + i; };
    for (NodeIndex j = 0; j <= n; ++j)
        for (NodeIndex i = 0; i <= n; ++i)
            m->nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    for (NodeIndex j = 0; j < n; ++j) {
        for (NodeIndex i = 0; i < n; ++i) {
            m->triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m->triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    for (NodeIndex i = 0; i < n; ++i) m->boundary_edges.push_back({{id(i, 0), id(i + 1, 0)}, 0});
    for (NodeIndex j = 0; j < n; ++j) m->boundary_edges.push_back({{id(n, j), id(n, j + 1)}, 1});
    for (NodeIndex i = n; i > 0; --i) m->boundary_edges.push_back({{id(i, n), id(i - 1, n)}, 2});
    for (NodeIndex j = n; j > 0; --j) m->boundary_edges.push_back({{id(0, j), id(0, j - 1)}, 3});
    finish(*m);
    return m;
}

// Ring k (k >= 1) holds 4k nodes at angles 2*pi*j/(4k); ring 0 is the center.
// Each quarter sector between rings k-1 and k is stitched by a merge that
// advances the ring whose next node has the smaller angle (ties: outer).
std::shared_ptr<Mesh> disk_rings(double radius, NodeIndex L) {
    auto m = std::make_shared<Mesh>();
    auto offset = [](NodeIndex k) { return k == 0 ? 0 : 1 + 2 * k * (k - 1); };
    auto node = [&](NodeIndex k, NodeIndex j) { return k == 0 ? 0 : offset(k) + (j % (4 * k)); };
    m->nodes.push_back({0.0, 0.0});
    for (NodeIndex k = 1; k <= L; ++k) {
        double r = radius * static_cast<double>(k) / static_cast<double>(L);
        for (NodeIndex j = 0; j < 4 * k; ++j) {
            // Exact quarter-turn positions avoid 1e-17 noise that breaks symmetry.
            NodeIndex q = j / k, rem = j % k;
            double theta = 0.5 * std::numbers::pi * static_cast<double>(rem) / static_cast<double>(k);
            double c = std::cos(theta), s = std::sin(theta);
            if (rem == 0) c = 1.0, s = 0.0;
            Point p{r * c, r * s};
            for (NodeIndex t = 0; t < q; ++t) p = {-p.y, p.x};
            m->nodes.push_back(p);
        }
    }
    for (NodeIndex k = 1; k <= L; ++k) {
        for (NodeIndex s = 0; s < 4; ++s) {
            NodeIndex i = 0, j = 0;
            NodeIndex ni = k - 1, nj = k;
            while (i < ni || j < nj) {
                bool outer = (i == ni) || (j < nj && (j + 1) * (k - 1) <= (i + 1) * k);
                NodeIndex a = node(k - 1, s * (k - 1) + i);
                if (outer) {
                    m->triangles.push_back({a, node(k, s * k + j), node(k, s * k + j + 1)});
                    ++j;
                } else {
                    m->triangles.push_back({a, node(k, s * k + j), node(k - 1, s * (k - 1) + i + 1)});
                    ++i;
                }
            }
        }
    }
    for (NodeIndex j = 0; j < 4 * L; ++j) m->boundary_edges.push_back({{node(L, j), node(L, j + 1)}, 0});
    m->boundary_circle = Circle{{0.0, 0.0}, radius};
    finish(*m);
    return m;
}

MeshPtr build_disk(double radius, double h) {
    auto L = static_cast<NodeIndex>(std::ceil(1.05 * radius / h));
    L = std::max<NodeIndex>(L + (L % 2), 2);
    for (;;) {
        auto m = disk_rings(radius, L);
        if (m->max_edge_length() <= 1.5 * h) return m;
        L += 2;
    }
}

void check_polygon(const Polygon& poly) {
    const auto& v = poly.vertices;
    if (v.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
    double area = 0.0, turning = 0.0;
    std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point a = v[i], b = v[(i + 1) % n], c = v[(i + 2) % n];
        if (!std::isfinite(a.x) || !std::isfinite(a.y)) throw ValidationError("polygon vertex is not finite");
        if (norm(b - a) == 0.0) throw ValidationError("polygon has a repeated vertex at index " + std::to_string(i));
        area += cross(a, b);
        Point d1 = b - a, d2 = c - b;
        double cr = cross(d1, d2);
        if (cr < -1e-14 * norm(d1) * norm(d2))
            throw ValidationError("polygon is not convex at vertex " + std::to_string((i + 1) % n));
        turning += std::atan2(cr, dot(d1, d2));
    }
    if (area <= 0.0) throw ValidationError("polygon has zero or negative (clockwise) area");
    if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-9)
        throw ValidationError("polygon is self-intersecting (total turning != 2 pi)");
}

MeshPtr build_polygon(const Polygon& poly, double h) {
    check_polygon(poly);
    const auto& v = poly.vertices;
    auto n = static_cast<NodeIndex>(v.size());
    Point c{0.0, 0.0};
    for (const auto& p : v) c = c + p;
    c = (1.0 / static_cast<double>(n)) * c;

    auto m = std::make_shared<Mesh>();
    m->nodes.push_back(c);
    for (const auto& p : v) m->nodes.push_back(p);
    for (NodeIndex i = 0; i < n; ++i) {
        NodeIndex a = 1 + i, b = 1 + (i + 1) % n;
        m->triangles.push_back({0, a, b});
        m->boundary_edges.push_back({{a, b}, static_cast<int>(i)});
    }
    finish(*m);
    MeshPtr out = m;
    while (out->max_edge_length() > 1.5 * h) out = refine(*out);
    return out;
}

}  // namespace

double Mesh::signed_area(std::size_t t) const {
    const auto& tr = triangles[t];
    return tri_area(nodes[tr[0]], nodes[tr[1]], nodes[tr[2]]);
}

double Mesh::max_edge_length() const {
    double h = 0.0;
    for (const auto& t : triangles)
        for (int e = 0; e < 3; ++e) h = std::max(h, norm(nodes[t[(e + 1) % 3]] - nodes[t[e]]));
    return h;
}

std::size_t Mesh::num_edges() const {
    std::vector<EdgeKey> edges;
    edges.reserve(3 * triangles.size());
    for (const auto& t : triangles)
        for (int e = 0; e < 3; ++e) edges.push_back(key(t[e], t[(e + 1) % 3]));
    std::sort(edges.begin(), edges.end());
    return static_cast<std::size_t>(std::unique(edges.begin(), edges.end()) - edges.begin());
}

std::vector<bool> Mesh::boundary_node_mask() const {
    std::vector<bool> mask(nodes.size(), false);
    for (const auto& e : boundary_edges) mask[e.nodes[0]] = mask[e.nodes[1]] = true;
    return mask;
}

MeshPtr build_mesh(const DomainSpec& spec) {
    if (!(spec.target_h > 0.0) || !std::isfinite(spec.target_h)) throw ValidationError("target_h must be positive");
    MeshPtr m;
    if (std::holds_alternative<UnitSquare>(spec.kind)) {
        m = build_square(spec.target_h);
    } else if (const auto* d = std::get_if<Disk>(&spec.kind)) {
        if (!(d->radius > 0.0) || !std::isfinite(d->radius)) throw ValidationError("disk radius must be positive");
        m = build_disk(d->radius, spec.target_h);
    } else {
        m = build_polygon(std::get<Polygon>(spec.kind), spec.target_h);
    }
    validate(*m);
    return m;
}

MeshPtr refine(const Mesh& mesh) {
    auto out = std::make_shared<Mesh>();
    out->nodes = mesh.nodes;
    out->boundary_circle = mesh.boundary_circle;
    std::map<EdgeKey, NodeIndex> mid;
    auto midpoint = [&](NodeIndex a, NodeIndex b) {
        auto [it, inserted] = mid.try_emplace(key(a, b), static_cast<NodeIndex>(out->nodes.size()));
        if (inserted) out->nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
        return it->second;
    };
    out->triangles.reserve(4 * mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        NodeIndex ab = midpoint(t[0], t[1]);
        NodeIndex bc = midpoint(t[1], t[2]);
        NodeIndex ca = midpoint(t[2], t[0]);
        out->triangles.push_back({t[0], ab, ca});
        out->triangles.push_back({ab, t[1], bc});
        out->triangles.push_back({ca, bc, t[2]});
        out->triangles.push_back({ab, bc, ca});
    }
    for (const auto& e : mesh.boundary_edges) {
        NodeIndex mnode = mid.at(key(e.nodes[0], e.nodes[1]));
        if (mesh.boundary_circle) {
            const Circle& c = *mesh.boundary_circle;
            Point d = out->nodes[mnode] - c.center;
            out->nodes[mnode] = c.center + (c.radius / norm(d)) * d;
        }
        out->boundary_edges.push_back({{e.nodes[0], mnode}, e.tag});
        out->boundary_edges.push_back({{mnode, e.nodes[1]}, e.tag});
    }
    finish(*out);
    validate(*out);
    return out;
}

MeshPtr scale(const Mesh& mesh, double s) {
    if (!(s > 0.0)) throw ValidationError("scale factor must be positive");
    auto out = std::make_shared<Mesh>(mesh);
    for (auto& p : out->nodes) p = s * p;
    if (out->boundary_circle) {
        out->boundary_circle->center = s * out->boundary_circle->center;
        out->boundary_circle->radius *= s;
    }
    finish(*out);
    return out;
}

BoundaryPoint pick_boundary_point(const Mesh& mesh, Point hint) {
    auto mask = mesh.boundary_node_mask();
    NodeIndex best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        if (!mask[i]) continue;
        double d = norm(mesh.nodes[i] - hint);
        if (d < best_d) {
            best_d = d;
            best = static_cast<NodeIndex>(i);
        }
    }
    if (best < 0) throw ValidationError("mesh has no boundary nodes");
    return {best, mesh.nodes[best]};
}

namespace {

std::pair<NodeIndex, NodeIndex> boundary_neighbours(const Mesh& mesh, NodeIndex node) {
    NodeIndex prev = -1, next = -1;
    for (const auto& e : mesh.boundary_edges) {
        if (e.nodes[1] == node) prev = e.nodes[0];
        if (e.nodes[0] == node) next = e.nodes[1];
    }
    if (prev < 0 || next < 0) throw ValidationError("node " + std::to_string(node) + " is not on the boundary");
    return {prev, next};
}

}  // namespace

double boundary_interior_angle(const Mesh& mesh, NodeIndex node) {
    auto [prev, next] = boundary_neighbours(mesh, node);
    Point a = mesh.nodes[next] - mesh.nodes[node];
    Point b = mesh.nodes[prev] - mesh.nodes[node];
    double ang = std::atan2(cross(a, b), dot(a, b));
    return ang <= 0.0 ? ang + 2.0 * std::numbers::pi : ang;
}

Point inward_normal(const Mesh& mesh, NodeIndex node) {
    auto [prev, next] = boundary_neighbours(mesh, node);
    Point d1 = mesh.nodes[node] - mesh.nodes[prev];
    Point d2 = mesh.nodes[next] - mesh.nodes[node];
    Point n1{-d1.y, d1.x}, n2{-d2.y, d2.x};
    Point n = (1.0 / norm(n1)) * n1 + (1.0 / norm(n2)) * n2;
    return (1.0 / norm(n)) * n;
}

std::vector<NodeIndex> boundary_loop(const Mesh& mesh) {
    std::map<NodeIndex, NodeIndex> next;
    for (const auto& e : mesh.boundary_edges) next[e.nodes[0]] = e.nodes[1];
    std::vector<NodeIndex> loop;
    if (next.empty()) return loop;
    NodeIndex start = next.begin()->first;
    NodeIndex cur = start;
    do {
        loop.push_back(cur);
        auto it = next.find(cur);
        if (it == next.end() || loop.size() > next.size()) throw ValidationError("boundary edges do not form a closed loop");
        cur = it->second;
    } while (cur != start);
    return loop;
}

void validate(const Mesh& mesh) {
    const auto nn = static_cast<NodeIndex>(mesh.nodes.size());
    if (nn < 3 || mesh.triangles.empty()) throw ValidationError("mesh is empty");
    for (const auto& p : mesh.nodes)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("mesh has a non-finite coordinate");
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        for (NodeIndex v : mesh.triangles[t])
            if (v < 0 || v >= nn) throw ValidationError("triangle " + std::to_string(t) + " has an out-of-range node");
        double a = mesh.signed_area(t);
        if (!(a > 0.0)) throw ValidationError("triangle " + std::to_string(t) + " has non-positive signed area");
        sum += a;
    }
    if (std::abs(sum - mesh.area) > 1e-12 * std::abs(sum)) throw ValidationError("mesh area does not match the triangle sum");

    // Directed edges seen once are boundary edges; they must match the tagged list exactly.
    std::map<EdgeKey, int> count;
    std::map<EdgeKey, EdgeKey> directed;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            NodeIndex a = t[e], b = t[(e + 1) % 3];
            ++count[key(a, b)];
            directed[key(a, b)] = {a, b};
        }
    }
    std::size_t nb = 0;
    for (const auto& [k, c] : count) {
        if (c > 2) throw ValidationError("edge shared by more than two triangles");
        if (c == 1) ++nb;
    }
    if (nb != mesh.boundary_edges.size()) throw ValidationError("boundary edge list does not match the triangulation");
    for (const auto& e : mesh.boundary_edges) {
        auto k = key(e.nodes[0], e.nodes[1]);
        auto it = count.find(k);
        if (it == count.end() || it->second != 1) throw ValidationError("tagged boundary edge is not a boundary edge");
        if (directed[k] != EdgeKey{e.nodes[0], e.nodes[1]}) throw ValidationError("boundary edge is not counter-clockwise");
    }
    if (boundary_loop(mesh).size() != mesh.boundary_edges.size())
        throw ValidationError("boundary is not a single closed loop");
    auto V = static_cast<long long>(mesh.nodes.size());
    auto E = static_cast<long long>(count.size());
    auto F = static_cast<long long>(mesh.triangles.size());
    if (V - E + F != 1) throw ValidationError("Euler relation V - E + F = 1 fails");
    std::vector<bool> used(mesh.nodes.size(), false);
    for (const auto& t : mesh.triangles)
        for (NodeIndex v : t) used[v] = true;
    if (std::find(used.begin(), used.end(), false) != used.end()) throw ValidationError("mesh has an unused node");
}

double distance_to_boundary(const Mesh& mesh, Point x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : mesh.boundary_edges) {
        Point a = mesh.nodes[e.nodes[0]], b = mesh.nodes[e.nodes[1]];
        Point d = b - a;
        double t = std::clamp(dot(x - a, d) / dot(d, d), 0.0, 1.0);
        best = std::min(best, norm(x - (a + t * d)));
    }
    return best;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
    os << "mt-mesh v1\n" << std::setprecision(17);
    os << "nodes " << mesh.nodes.size() << '\n';
    for (const auto& p : mesh.nodes) os << p.x << ' ' << p.y << '\n';
    os << "tris " << mesh.triangles.size() << '\n';
    for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "bedges " << mesh.boundary_edges.size() << '\n';
    for (const auto& e : mesh.boundary_edges) os << e.nodes[0] << ' ' << e.nodes[1] << '\n';
    if (mesh.boundary_circle)
        os << "circle " << mesh.boundary_circle->center.x << ' ' << mesh.boundary_circle->center.y << ' '
           << mesh.boundary_circle->radius << '\n';
}

std::string mesh_to_string(const Mesh& mesh) {
    std::ostringstream os;
    write_mesh(os, mesh);
    return os.str();
}

MeshPtr read_mesh(std::istream& is) {
    auto fail = [](const std::string& what) -> void { throw ValidationError("mesh file: " + what); };
    std::string line;
    if (!std::getline(is, line) || line.rfind("mt-mesh v1", 0) != 0) fail("missing 'mt-mesh v1' header");
    auto m = std::make_shared<Mesh>();
    auto section = [&](const char* name) {
        std::string word;
        long long n = -1;
        if (!(is >> word >> n) || word != name || n < 0) fail(std::string("expected '") + name + " <count>'");
        return static_cast<std::size_t>(n);
    };
    std::size_t n = section("nodes");
    m->nodes.resize(n);
    for (auto& p : m->nodes)
        if (!(is >> p.x >> p.y)) fail("truncated node list");
    n = section("tris");
    m->triangles.resize(n);
    for (auto& t : m->triangles)
        if (!(is >> t[0] >> t[1] >> t[2])) fail("truncated triangle list");
    n = section("bedges");
    m->boundary_edges.resize(n);
    for (auto& e : m->boundary_edges)
        if (!(is >> e.nodes[0] >> e.nodes[1])) fail("truncated boundary edge list");
    std::string word;
    if (is >> word) {
        if (word != "circle") fail("unexpected trailing token '" + word + "'");
        Circle c;
        if (!(is >> c.center.x >> c.center.y >> c.radius)) fail("truncated circle line");
        m->boundary_circle = c;
    }
    // Tags are not stored in the file; boundary edges come back with tag 0.
    for (const auto& t : m->triangles)
        for (NodeIndex v : t)
            if (v < 0 || static_cast<std::size_t>(v) >= m->nodes.size()) fail("triangle index out of range");
    for (const auto& e : m->boundary_edges)
        for (NodeIndex v : e.nodes)
            if (v < 0 || static_cast<std::size_t>(v) >= m->nodes.size()) fail("boundary index out of range");
    finish(*m);
    validate(*m);
    return m;
}

MeshPtr load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mesh file " + path);
    return read_mesh(in);
}

void save_mesh(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write mesh file " + path);
    write_mesh(out, mesh);
}

}  // namespace mtlab
