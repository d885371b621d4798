#include "mtlab/green.hpp"

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

namespace mtlab {

AnnulusFit fit_regular_part(const Mesh& mesh, const Vec& regular_part, NodeIndex p, double r_in, double r_out, bool quadratic) {
    if (!(r_in > 0.0) || !(r_out > r_in)) throw ValidationError("fit annulus needs 0 < r_in < r_out");
    const Point pc = mesh.nodes[p];
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (static_cast<NodeIndex>(i) == p) continue;
        double r = norm(mesh.nodes[i] - pc);
        if (r >= r_in && r <= r_out) idx.push_back(i);
    }
    if (idx.size() < 12) {
        std::ostringstream msg;
        msg << "fit annulus [" << r_in << ", " << r_out << "] holds " << idx.size() << " nodes (need 12); refine the mesh";
        throw ValidationError(msg.str());
    }
    const Eigen::Index cols = quadratic ? 6 : 3;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(idx.size()), cols);
    Vec y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Point d = mesh.nodes[idx[k]] - pc;
        auto r = static_cast<Eigen::Index>(k);
        A(r, 0) = 1.0;
        A(r, 1) = d.x;
        A(r, 2) = d.y;
        if (quadratic) {
            A(r, 3) = d.x * d.x;
            A(r, 4) = d.x * d.y;
            A(r, 5) = d.y * d.y;
        }
        y[r] = regular_part[static_cast<Eigen::Index>(idx[k])];
    }
    Vec c = A.colPivHouseholderQr().solve(y);
    AnnulusFit fit;
    fit.c0 = c[0];
    fit.c1 = {c[1], c[2]};
    if (quadratic) fit.q = {c[3], c[4], c[5]};
    fit.nodes = static_cast<int>(idx.size());
    fit.rms = std::sqrt((A * c - y).squaredNorm() / static_cast<double>(idx.size()));
    return fit;
}

double theorem_bound(double area, double A_p) {
    return area + 0.5 * std::numbers::pi * std::exp(1.0 + 2.0 * std::numbers::pi * A_p);
}

GreenResult solve_green(const Discretization& d, double alpha, const BoundaryPoint& p, const GreenOptions& opts) {
    const Mesh& mesh = *d.mesh;
    if (p.node_id < 0 || static_cast<std::size_t>(p.node_id) >= mesh.num_nodes() || !mesh.boundary_node_mask()[p.node_id])
        throw ValidationError("Green source must be a boundary node");
    double angle = boundary_interior_angle(mesh, p.node_id);
    if (std::abs(angle - std::numbers::pi) > opts.corner_tolerance) {
        std::ostringstream msg;
        msg << "boundary node " << p.node_id << " is a corner (interior angle " << angle << "); corners are not valid Green sources";
        throw ValidationError(msg.str());
    }
    if (alpha != 0.0) check_alpha(alpha, opts.lambda1 ? *opts.lambda1 : neumann_lambda1(d).lambda1);

    Vec b = -d.m / d.area;
    b[p.node_id] += 1.0;
    GreenResult res;
    res.p = p;
    res.alpha = alpha;
    res.area = d.area;
    res.interior_angle = angle;
    res.G = d.solver(alpha).solve(b);
    res.mean_residual = std::abs(d.integral(res.G)) / d.area;
    res.weak_residual = d.dual_norm(d.K * res.G - alpha * (d.M * res.G) - b);

    const Point pc = mesh.nodes[p.node_id];
    res.regular_part = res.G;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (static_cast<NodeIndex>(i) == p.node_id) continue;
        res.regular_part[static_cast<Eigen::Index>(i)] += std::log(norm(mesh.nodes[i] - pc)) / std::numbers::pi;
    }
    double h = mesh.max_edge_length();
    res.r_in = opts.r_in > 0.0 ? opts.r_in : 3.0 * h;
    res.r_out = opts.r_out > 0.0 ? opts.r_out : 3.0 * res.r_in;
    res.fit = fit_regular_part(mesh, res.regular_part, p.node_id, res.r_in, res.r_out, opts.quadratic);
    res.A_p = res.fit.c0;
    res.regular_part[p.node_id] = res.A_p;
    res.bound_B = theorem_bound(d.area, res.A_p);
    return res;
}

SurveyReport bound_over_boundary(const Discretization& d, double alpha, int samples, const GreenOptions& opts) {
    if (samples < 4) throw ValidationError("boundary survey needs at least 4 samples");
    const Mesh& mesh = *d.mesh;
    GreenOptions o = opts;
    if (alpha != 0.0 && !o.lambda1) o.lambda1 = neumann_lambda1(d).lambda1;

    std::vector<NodeIndex> loop = boundary_loop(mesh);
    std::vector<double> arc(loop.size() + 1, 0.0);
    for (std::size_t i = 0; i < loop.size(); ++i)
        arc[i + 1] = arc[i] + norm(mesh.nodes[loop[(i + 1) % loop.size()]] - mesh.nodes[loop[i]]);
    const double perimeter = arc.back();

    SurveyReport rep;
    rep.entries.resize(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        auto& e = rep.entries[static_cast<std::size_t>(k)];
        e.sample = k;
        e.arc = (k + 0.5) * perimeter / samples;
        std::size_t best = 0;
        for (std::size_t i = 1; i < loop.size(); ++i)
            if (std::abs(arc[i] - e.arc) < std::abs(arc[best] - e.arc)) best = i;
        e.p = {loop[best], mesh.nodes[loop[best]]};
    }
    parallel_for(rep.entries.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            auto& e = rep.entries[k];
            try {
                GreenResult g = solve_green(d, alpha, e.p, o);
                e.A_p = g.A_p;
                e.bound_B = g.bound_B;
            } catch (const ValidationError& ex) {
                if (std::abs(boundary_interior_angle(mesh, e.p.node_id) - std::numbers::pi) <= o.corner_tolerance) throw;
                e.skipped = true;
                e.note = ex.what();
            }
        }
    });
    bool first = true;
    for (std::size_t k = 0; k < rep.entries.size(); ++k) {
        const auto& e = rep.entries[k];
        if (e.skipped) continue;
        if (first || e.A_p > rep.max_A_p) {
            rep.max_A_p = e.A_p;
            rep.argmax = static_cast<int>(k);
        }
        if (first || e.A_p < rep.min_A_p) rep.min_A_p = e.A_p;
        first = false;
    }
    if (first) throw ValidationError("every survey point was a corner");
    return rep;
}

}  // namespace mtlab
