#include "mtlab/error.hpp"
#include "mtlab/green.hpp"
#include "mtlab/maximizer.hpp"
#include "mtlab/meanfield.hpp"
#include "mtlab/moser.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/report.hpp"
#include "mtlab/spectral.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mtlab;

namespace {

// The library shares meshes and discretizations as pointers to const.
struct PyMesh {
    MeshPtr mesh;
};

struct PyDisc {
    DiscretizationPtr disc;
};

Eigen::MatrixXd nodes_of(const Mesh& m) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(m.num_nodes()), 2);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = m.nodes[i].x;
        x(static_cast<Eigen::Index>(i), 1) = m.nodes[i].y;
    }
    return x;
}

Eigen::MatrixXi triangles_of(const Mesh& m) {
    Eigen::MatrixXi t(static_cast<Eigen::Index>(m.num_triangles()), 3);
    for (std::size_t i = 0; i < m.num_triangles(); ++i)
        for (int k = 0; k < 3; ++k) t(static_cast<Eigen::Index>(i), k) = m.triangles[i][static_cast<std::size_t>(k)];
    return t;
}

Vec nodal(const Discretization& d, const Vec& v, const char* name) {
    if (v.size() != static_cast<Eigen::Index>(d.size()))
        throw ValidationError(std::string(name) + " must have one value per node");
    return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Moser-Trudinger numerical laboratory: P1 FEM on planar domains";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<OverflowError>(m, "OverflowError", base.ptr());

    py::class_<PyMesh>(m, "Mesh")
        .def_property_readonly("nodes", [](const PyMesh& p) { return nodes_of(*p.mesh); })
        .def_property_readonly("triangles", [](const PyMesh& p) { return triangles_of(*p.mesh); })
        .def_property_readonly("area", [](const PyMesh& p) { return p.mesh->area; })
        .def_property_readonly("h", [](const PyMesh& p) { return p.mesh->max_edge_length(); })
        .def("refine", [](const PyMesh& p) { return PyMesh{refine(*p.mesh)}; })
        .def("scale", [](const PyMesh& p, double s) { return PyMesh{scale(*p.mesh, s)}; })
        .def("save", [](const PyMesh& p, const std::string& path) { save_mesh(path, *p.mesh); })
        .def("__len__", [](const PyMesh& p) { return p.mesh->num_nodes(); });

    m.def("square", [](double h) { return PyMesh{build_mesh({UnitSquare{}, h})}; }, py::arg("h") = 0.1);
    m.def("disk", [](double h, double radius) { return PyMesh{build_mesh({Disk{radius}, h})}; }, py::arg("h") = 0.1,
          py::arg("radius") = 1.0);
    m.def("load_mesh", [](const std::string& path) { return PyMesh{load_mesh(path)}; });

    py::class_<PyDisc>(m, "Discretization")
        .def(py::init([](const PyMesh& p) { return PyDisc{discretize(p.mesh)}; }))
        .def_property_readonly("mesh", [](const PyDisc& p) { return PyMesh{p.disc->mesh}; })
        .def_property_readonly("area", [](const PyDisc& p) { return p.disc->area; })
        .def_property_readonly("mass_weights", [](const PyDisc& p) { return p.disc->m; })
        .def("integral", [](const PyDisc& p, const Vec& u) { return p.disc->integral(nodal(*p.disc, u, "u")); })
        .def("norm_1alpha", [](const PyDisc& p, const Vec& u, double alpha) { return norm_1alpha(*p.disc, nodal(*p.disc, u, "u"), alpha); },
             py::arg("u"), py::arg("alpha") = 0.0);

    m.def("set_thread_count", &set_thread_count, py::arg("n"));
    m.def("thread_count", &thread_count);

    m.def(
        "neumann_lambda1",
        [](const PyDisc& p, double tol) {
            EigenOptions o;
            o.tol = tol;
            auto r = neumann_lambda1(*p.disc, o);
            py::dict out;
            out["lambda1"] = r.lambda1;
            out["residual"] = r.residual;
            out["h"] = r.mesh_h;
            out["iterations"] = r.iterations;
            out["eigenfield"] = r.eigenfield;
            return out;
        },
        py::arg("disc"), py::arg("tol") = 1e-10);

    m.def(
        "solve_green",
        [](const PyDisc& p, double alpha, std::pair<double, double> hint) {
            auto g = solve_green(*p.disc, alpha, pick_boundary_point(*p.disc->mesh, {hint.first, hint.second}));
            py::dict out;
            out["A_p"] = g.A_p;
            out["bound_B"] = g.bound_B;
            out["p"] = std::make_pair(g.p.coords.x, g.p.coords.y);
            out["p_node"] = g.p.node_id;
            out["mean_residual"] = g.mean_residual;
            out["weak_residual"] = g.weak_residual;
            out["G"] = g.G;
            return out;
        },
        py::arg("disc"), py::arg("alpha") = 0.0, py::arg("p_hint") = std::make_pair(1.0, 0.0));

    m.def(
        "maximize",
        [](const PyDisc& p, double eps, double alpha, int restarts, std::uint64_t seed) {
            SubcriticalParams sp;
            sp.eps = eps;
            sp.alpha = alpha;
            sp.restarts = restarts;
            sp.seed = seed;
            auto r = maximize_subcritical(*p.disc, sp);
            py::dict out;
            out["C_eps"] = r.C_eps;
            out["lambda_eps"] = r.lambda_eps;
            out["mu_eps"] = r.mu_eps;
            out["c_eps"] = r.c_eps;
            out["x_eps"] = std::make_pair(r.x_eps.x, r.x_eps.y);
            out["el_residual"] = r.el_residual;
            out["converged"] = r.converged;
            out["iterations"] = r.iterations;
            out["u"] = r.u_eps;
            return out;
        },
        py::arg("disc"), py::arg("eps"), py::arg("alpha") = 0.0, py::arg("restarts") = 8, py::arg("seed") = 1);

    m.def(
        "minimize_F",
        [](const PyDisc& p, const Vec& f, double rho, double alpha) {
            MeanFieldProblem pb{p.disc, alpha, rho, nodal(*p.disc, f, "f"), std::nullopt};
            auto s = minimize_F(pb);
            py::dict out;
            out["F"] = s.F_value;
            out["residual"] = s.residual;
            out["converged"] = s.converged;
            out["iterations"] = s.iterations;
            out["u"] = s.u;
            return out;
        },
        py::arg("disc"), py::arg("f"), py::arg("rho"), py::arg("alpha") = 0.0);

    m.def("verify_profile", [](double r_max, std::size_t n) {
        auto r = verify_profile({r_max, n});
        py::dict out;
        out["mass"] = r.mass;
        out["order"] = r.order;
        out["phi0"] = r.phi0;
        out["residual_max"] = r.residual_max;
        return out;
    }, py::arg("r_max") = 1e3, py::arg("n") = 10000);

    m.def("profile_phi", &profile_phi, py::arg("r"));

    m.def("annulus_capacity", [](double delta, double Rr, double s, double i) {
        auto r = annulus_capacity({delta, Rr, s, i});
        return std::make_pair(r.energy_quadrature, r.energy_closed_form);
    }, py::arg("delta"), py::arg("Rr_eps"), py::arg("s_eps"), py::arg("i_eps"));

    // Config and manifest cross as JSON text; the Python wrapper converts to dicts.
    m.def("_run_experiment", [](const std::string& config) {
        auto man = run_experiment(ExperimentConfig::from_json(nlohmann::json::parse(config)));
        return man.to_json().dump();
    });
}
