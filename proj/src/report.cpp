#include "mtlab/report.hpp"

#include "mtlab/error.hpp"
#include "mtlab/expr.hpp"
#include "mtlab/green.hpp"
#include "mtlab/maximizer.hpp"
#include "mtlab/meanfield.hpp"
#include "mtlab/moser.hpp"
#include "mtlab/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace mtlab {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const std::vector<std::string>& pipeline_names() {
    static const std::vector<std::string> names{"mesh",   "eigen",          "maximize", "sweep",    "green",
                                                "green-survey", "testfn",   "verify-profile", "appendix", "meanfield",
                                                "corollary",    "full-report"};
    return names;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    static const std::set<std::string> known{"command", "domain", "alpha", "seed", "output_dir", "params"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
    ExperimentConfig c;
    try {
        c.command = j.at("command").get<std::string>();
        if (j.contains("domain")) c.domain = j.at("domain");
        c.alpha = j.value("alpha", 0.0);
        c.seed = j.value("seed", std::uint64_t{1});
        c.output_dir = j.value("output_dir", std::string("out"));
        if (j.contains("params")) c.params = j.at("params");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    return c;
}

json ExperimentConfig::to_json() const {
    return json{{"command", command}, {"domain", domain}, {"alpha", alpha},
                {"seed", seed},       {"output_dir", output_dir}, {"params", params}};
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

namespace {

constexpr double kPi = std::numbers::pi;

template <class T>
T param(const json& p, const char* key, T fallback) {
    if (!p.contains(key)) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("parameter '") + key + "' has the wrong type");
    }
}

std::vector<double> grid_param(const json& p, const char* key, std::vector<double> fallback) {
    auto g = param(p, key, fallback);
    if (g.empty()) throw ValidationError(std::string("parameter '") + key + "' must be a non-empty list");
    return g;
}

Point hint_param(const json& p, const json& domain) {
    if (p.contains("p_hint")) {
        auto v = param(p, "p_hint", std::vector<double>{});
        if (v.size() != 2) throw ValidationError("p_hint must be [x, y]");
        return {v[0], v[1]};
    }
    std::string kind = domain.value("kind", std::string());
    if (kind == "disk") return {domain.value("radius", 1.0), 0.0};
    if (kind == "square") return {1.0, 0.5};
    throw ValidationError("p_hint is required for this domain");
}

bool strictly_decreasing(const std::vector<double>& g) {
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] < g[i - 1])) return false;
    return true;
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

struct Writer {
    fs::path dir;
    RunManifest& manifest;

    void put(const std::string& name, const std::string& content) {
        fs::path path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << content;
        if (!out) throw Error("write failed for " + path.string());
        manifest.outputs.push_back({name, sha256_hex(content)});
    }
};

json eigen_json(const EigenResult& e, const Mesh& mesh) {
    return json{{"schema", kSchema},        {"lambda1", e.lambda1},          {"residual", e.residual},
                {"h", e.mesh_h},            {"iterations", e.iterations},    {"nodes", mesh.num_nodes()},
                {"triangles", mesh.num_triangles()}};
}

json green_json(const GreenResult& g) {
    return json{{"schema", kSchema},
                {"p", {g.p.coords.x, g.p.coords.y}},
                {"p_node", g.p.node_id},
                {"alpha", g.alpha},
                {"area", g.area},
                {"A_p", g.A_p},
                {"bound_B", g.bound_B},
                {"r_in", g.r_in},
                {"r_out", g.r_out},
                {"fit_nodes", g.fit.nodes},
                {"fit_rms", g.fit.rms},
                {"mean_residual", g.mean_residual},
                {"weak_residual", g.weak_residual},
                {"interior_angle", g.interior_angle}};
}

json maximizer_json(const MaximizerResult& r) {
    json starts = json::array();
    for (double c : r.start_C) starts.push_back(c);
    return json{{"schema", kSchema},     {"eps", r.eps},
                {"alpha", r.alpha},      {"C_eps", r.C_eps},
                {"lambda_eps", r.lambda_eps}, {"mu_eps", r.mu_eps},
                {"c_eps", r.c_eps},      {"x_eps", {r.x_eps.x, r.x_eps.y}},
                {"x_node", r.x_node},    {"r_eps", r.r_eps},
                {"el_residual", r.el_residual}, {"step_norm", r.step_norm},
                {"converged", r.converged}, {"flat", r.flat},
                {"iterations", r.iterations}, {"best_start", r.best_start},
                {"start_C", starts}};
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
    std::string s = "iteration,C,step_norm,step\n";
    for (const auto& t : trace)
        s += std::to_string(t.iteration) + "," + format_number(t.C) + "," + format_number(t.step_norm) + "," +
             format_number(t.step) + "\n";
    return s;
}

std::string sweep_csv(const std::vector<MaximizerResult>& rs, const DiagnosticsReport& diag) {
    std::string s = std::string(kSweepColumns) + "\n";
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const auto& r = rs[i];
        const auto& e = diag.entries[i];
        std::vector<std::string> f{format_number(r.eps),        format_number(r.C_eps),      format_number(r.lambda_eps),
                                   format_number(r.mu_eps),     format_number(r.c_eps),      format_number(r.x_eps.x),
                                   format_number(r.x_eps.y),    format_number(r.r_eps),      format_number(r.el_residual),
                                   r.converged ? "1" : "0",     std::to_string(r.iterations), std::to_string(r.best_start),
                                   format_number(e.mu_bound),   e.bound_ok ? "1" : "0",      e.liminf_ok ? "1" : "0",
                                   format_number(e.dist_to_boundary), format_number(e.energy_fraction_01),
                                   format_number(e.energy_fraction_005)};
        for (std::size_t k = 0; k < f.size(); ++k) s += (k ? "," : "") + f[k];
        s += "\n";
    }
    return s;
}

struct TestfnRow {
    MoserTestFunction tf;
    LowerBoundReport lb;
};

std::string testfn_csv(const std::vector<TestfnRow>& rows) {
    std::string s = std::string(kTestfnColumns) + "\n";
    for (const auto& r : rows) {
        s += format_number(r.tf.eps) + "," + format_number(r.tf.c2) + "," + format_number(r.tf.c2_paper) + "," +
             format_number(r.tf.A) + "," + format_number(r.tf.norm_check) + "," + format_number(r.lb.integral) + "," +
             format_number(r.lb.bound_B) + "," + format_number(r.lb.margin) + "," + format_number(r.lb.margin_paper) +
             "," + (r.tf.chart_cap_exceeded ? "1" : "0") + "," + (r.tf.bracket_ok ? "1" : "0") + "\n";
    }
    return s;
}

std::string appendix_csv(const std::vector<AppendixReport>& rows) {
    std::string s = std::string(kAppendixColumns) + "\n";
    for (const auto& a : rows) {
        double v[] = {a.eps,
                      a.R,
                      a.grad_inner_quadrature,
                      a.grad_inner_closed_form,
                      a.grad_inner_rel_diff,
                      a.int_W_inner_quadrature,
                      a.int_W_inner_closed_form,
                      a.int_W2_inner_quadrature,
                      a.int_W2_inner_closed_form,
                      a.K_B_inner,
                      a.K_B_outer,
                      a.K_B_total,
                      a.K_C_inner,
                      a.K_C_outer,
                      a.K_C_total};
        for (std::size_t k = 0; k < std::size(v); ++k) s += (k ? "," : "") + format_number(v[k]);
        s += "\n";
    }
    return s;
}

std::string survey_csv(const SurveyReport& rep) {
    std::string s = std::string(kSurveyColumns) + "\n";
    for (const auto& e : rep.entries) {
        s += std::to_string(e.sample) + "," + format_number(e.arc) + "," + std::to_string(e.p.node_id) + "," +
             format_number(e.p.coords.x) + "," + format_number(e.p.coords.y) + "," + (e.skipped ? "1" : "0") + "," +
             format_number(e.A_p) + "," + format_number(e.bound_B) + "," + e.note + "\n";
    }
    return s;
}

Vec field_from_spec(const Discretization& d, const std::string& spec) {
    if (spec.rfind("expr:", 0) == 0) {
        Expr e = Expr::parse(spec.substr(5));
        return d.interpolate([&](double x, double y) { return e(x, y); });
    }
    if (!fs::exists(spec)) throw ValidationError("field file " + spec + " does not exist");
    return load_field(spec, mesh_hash(*d.mesh));
}

/// Runs body as a named step; failures are recorded and rethrown.
class Steps {
public:
    explicit Steps(RunManifest& m) : m_(m) {}
    template <class F>
    void run(const std::string& name, F&& body) {
        auto t0 = std::chrono::steady_clock::now();
        StepRecord rec{name, "ok", 0.0, {}};
        try {
            body();
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.error = e.what();
            rec.seconds = elapsed(t0);
            m_.steps.push_back(rec);
            m_.ok = false;
            throw;
        }
        rec.seconds = elapsed(t0);
        m_.steps.push_back(rec);
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    RunManifest& m_;
};

void write_manifest(const fs::path& dir, const RunManifest& m) {
    std::ofstream(dir / "manifest.json", std::ios::binary) << json_text(m.to_json(false));
    json t = json::array();
    for (const auto& s : m.steps) t.push_back({{"step", s.name}, {"seconds", s.seconds}});
    std::ofstream(dir / "timings.json", std::ios::binary) << json_text(t);
}

}  // namespace

MeshPtr build_domain(const json& domain) {
    if (!domain.is_object()) throw ValidationError("domain must be an object");
    MeshPtr mesh;
    if (domain.contains("mesh")) {
        std::string path = domain.at("mesh").get<std::string>();
        if (!fs::exists(path)) throw ValidationError("mesh file " + path + " does not exist");
        mesh = load_mesh(path);
    } else {
        std::string kind = domain.value("kind", std::string());
        double h = domain.value("h", 0.1);
        if (!(h > 0.0)) throw ValidationError("domain h must be positive");
        DomainSpec spec;
        spec.target_h = h;
        if (kind == "square") spec.kind = UnitSquare{};
        else if (kind == "disk") spec.kind = Disk{domain.value("radius", 1.0)};
        else if (kind == "polygon") {
            Polygon poly;
            for (const auto& v : domain.at("vertices")) poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            spec.kind = poly;
        } else {
            throw ValidationError("domain kind must be square, disk or polygon (got '" + kind + "')");
        }
        mesh = build_mesh(spec);
    }
    int levels = domain.value("refine", 0);
    if (levels < 0) throw ValidationError("refine must be non-negative");
    for (int i = 0; i < levels; ++i) mesh = refine(*mesh);
    return mesh;
}

void validate(const ExperimentConfig& c) {
    const auto& names = pipeline_names();
    if (std::find(names.begin(), names.end(), c.command) == names.end())
        throw ValidationError("unknown command '" + c.command + "'");
    if (c.command != "verify-profile") {
        if (!c.domain.is_object() || c.domain.empty()) throw ValidationError("config needs a domain");
        if (c.domain.contains("mesh")) {
            std::string path = c.domain.at("mesh").get<std::string>();
            if (!fs::exists(path)) throw ValidationError("mesh file " + path + " does not exist");
        } else {
            std::string kind = c.domain.value("kind", std::string());
            if (kind != "square" && kind != "disk" && kind != "polygon")
                throw ValidationError("domain kind must be square, disk or polygon");
            if (!(c.domain.value("h", 0.1) > 0.0)) throw ValidationError("domain h must be positive");
        }
    }
    if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) throw ValidationError("alpha must be finite and >= 0");
    if (c.output_dir.empty()) throw ValidationError("output_dir must not be empty");
    const json& p = c.params;
    if (!p.is_object()) throw ValidationError("params must be an object");
    auto eps_ok = [](const std::vector<double>& g, double hi, const char* what) {
        for (double e : g)
            if (!(e > 0.0) || !(e <= hi)) throw ValidationError(std::string(what) + " values must lie in (0, " + format_number(hi) + "]");
    };
    if (c.command == "maximize") eps_ok({param(p, "eps", 1.0)}, 2.0 * kPi, "eps");
    if (c.command == "sweep" || c.command == "full-report") {
        auto g = grid_param(p, c.command == "sweep" ? "eps_grid" : "sweep_grid", {5.0, 3.0, 2.0, 1.0, 0.5, 0.1});
        eps_ok(g, 2.0 * kPi, "sweep eps");
        if (!strictly_decreasing(g)) throw ValidationError("sweep eps grid must be strictly decreasing");
    }
    if (c.command == "testfn" || c.command == "appendix" || c.command == "full-report") {
        auto g = grid_param(p, c.command == "full-report" ? "testfn_grid" : "eps_grid", {1e-3, 1e-4, 1e-5});
        for (double e : g)
            if (!(e > 0.0) || !(e < 1.0)) throw ValidationError("test-function eps values must lie in (0, 1)");
    }
    if (c.command == "meanfield") {
        double rho = param(p, "rho", kPi);
        if (!(rho > 0.0) || !(rho < 4.0 * kPi)) throw ValidationError("rho must lie in (0, 4 pi)");
        param(p, "f", std::string("expr:1"));
    }
    if (c.command == "corollary" && param(p, "samples", 1000) < 1) throw ValidationError("samples must be >= 1");
    if (c.command == "green-survey" && param(p, "samples", 16) < 4) throw ValidationError("survey needs >= 4 samples");
    if (c.command == "verify-profile") {
        if (param(p, "r_max", 1e3) < 1e3 || param(p, "n", 10000) < 10000)
            throw ValidationError("profile grid too coarse: need r_max >= 1000 and n >= 10000");
    }
}

json RunManifest::to_json(bool with_timings) const {
    json in = json::array(), out = json::array(), st = json::array();
    for (const auto& f : inputs) in.push_back({{"path", f.path}, {"sha256", f.sha256}});
    for (const auto& f : outputs) out.push_back({{"path", f.path}, {"sha256", f.sha256}});
    for (const auto& s : steps) {
        json e{{"step", s.name}, {"status", s.status}};
        if (!s.error.empty()) e["error"] = s.error;
        if (with_timings) e["seconds"] = s.seconds;
        st.push_back(e);
    }
    return json{{"schema", kSchema}, {"version", kVersion}, {"command", command}, {"config_sha256", config_hash},
                {"inputs", in},      {"outputs", out},      {"steps", st},       {"ok", ok}};
}

RunManifest run_experiment(const ExperimentConfig& config) {
    validate(config);
    RunManifest man;
    man.command = config.command;
    man.config_hash = sha256_hex(config.to_json().dump());
    fs::path dir(config.output_dir);
    fs::create_directories(dir);
    Writer out{dir, man};
    Steps steps(man);
    const json& p = config.params;
    const double alpha = config.alpha;

    auto record_input = [&](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        man.inputs.push_back({path, sha256_hex(ss.str())});
    };

    try {
        if (config.command == "verify-profile") {
            steps.run("verify-profile", [&] {
                BlowupProfile prof{param(p, "r_max", 1e3), param(p, "n", std::size_t{10000})};
                auto r = verify_profile(prof);
                json refine = json::array();
                for (const auto& [n, res] : r.refinement) refine.push_back({{"n", n}, {"residual_max", res}});
                out.put("profile.json", json_text({{"schema", kSchema},
                                                   {"r_max", prof.r_max},
                                                   {"n", prof.n},
                                                   {"mass", r.mass},
                                                   {"mass_tail", r.mass_tail},
                                                   {"phi0", r.phi0},
                                                   {"monotone", r.monotone},
                                                   {"residual_max", r.residual_max},
                                                   {"refinement", refine},
                                                   {"order", r.order},
                                                   {"laplacian_at_1", r.laplacian_at_1},
                                                   {"rhs_at_1", r.rhs_at_1}}));
            });
            write_manifest(dir, man);
            return man;
        }

        if (config.domain.contains("mesh")) record_input(config.domain.at("mesh").get<std::string>());
        MeshPtr mesh;
        DiscretizationPtr d;
        steps.run("mesh", [&] {
            mesh = build_domain(config.domain);
            validate(*mesh);
            out.put("mesh.msh", mesh_to_string(*mesh));
        });
        if (config.command == "mesh") {
            write_manifest(dir, man);
            return man;
        }
        const std::string mhash = mesh_hash(*mesh);
        steps.run("assemble", [&] { d = discretize(mesh); });

        std::optional<EigenResult> eig;
        auto need_eigen = [&] {
            if (!eig) eig = neumann_lambda1(*d, EigenOptions{param(p, "eigen_tol", 1e-10), 2000});
            return eig->lambda1;
        };
        // alpha is checked against the discrete lambda1 before the main solve.
        if (config.command == "eigen" || alpha > 0.0 || config.command == "full-report") {
            steps.run("eigen", [&] {
                need_eigen();
                if (config.command != "eigen" && config.command != "full-report" && config.command != "corollary")
                    check_alpha(alpha, eig->lambda1);
            });
        }
        if (config.command == "full-report" || config.command == "corollary")
            steps.run("validate-alpha", [&] { check_alpha(alpha, need_eigen()); });

        std::vector<Series> series;
        std::optional<double> l1;
        if (eig) l1 = eig->lambda1;

        auto green_at_hint = [&] {
            GreenOptions go;
            go.r_in = param(p, "r_in", 0.0);
            go.r_out = param(p, "r_out", 0.0);
            go.quadratic = param(p, "quadratic", true);
            go.lambda1 = l1;
            return solve_green(*d, alpha, pick_boundary_point(*mesh, hint_param(p, config.domain)), go);
        };
        auto base_params = [&] {
            SubcriticalParams sp;
            sp.alpha = alpha;
            sp.restarts = param(p, "restarts", 8);
            sp.tol = param(p, "tol", 1e-9);
            sp.max_iterations = param(p, "max_iterations", 5000);
            sp.seed = config.seed;
            sp.lambda1 = l1;
            return sp;
        };
        auto run_sweep = [&](const std::vector<double>& grid, std::vector<MaximizerResult>& rs) {
            steps.run("sweep", [&] {
                rs = sweep_subcritical(*d, grid, base_params());
                auto diag = blowup_diagnostics(*d, rs);
                out.put("sweep.csv", sweep_csv(rs, diag));
                out.put("diagnostics.json", json_text({{"schema", kSchema},
                                                       {"all_bounds_ok", diag.all_bounds_ok},
                                                       {"monotone", diag.monotone},
                                                       {"liminf_ok", diag.liminf_ok}}));
                Series s{"C_eps", "eps", "C_eps", {}};
                for (const auto& r : rs) s.points.emplace_back(r.eps, r.C_eps);
                series.push_back(s);
                for (const auto& r : rs)
                    if (!r.converged && !r.flat) {
                        std::ostringstream msg;
                        msg << "maximizer did not converge at eps = " << r.eps << " (step norm " << r.step_norm << ")";
                        throw ConvergenceError(msg.str(), r.step_norm, r.iterations);
                    }
            });
        };
        auto run_testfn = [&](const GreenResult& g, const std::vector<double>& grid, std::vector<TestfnRow>& rows) {
            steps.run("testfn", [&] {
                for (double e : grid) {
                    TestfnRow row{build_test_function(*d, g, e, false), {}};
                    row.lb = check_lower_bound(row.tf, g);
                    rows.push_back(std::move(row));
                }
                out.put("testfn.csv", testfn_csv(rows));
                Series s{"margin", "eps", "margin", {}};
                for (const auto& r : rows) s.points.emplace_back(r.tf.eps, r.lb.margin);
                series.push_back(s);
            });
        };

        const std::string& cmd = config.command;
        if (cmd == "eigen") {
            out.put("eigen.json", json_text(eigen_json(*eig, *mesh)));
            out.put("eigenfield.field", field_to_string(eig->eigenfield, mhash));
        } else if (cmd == "maximize") {
            steps.run("maximize", [&] {
                SubcriticalParams sp = base_params();
                sp.eps = param(p, "eps", 1.0);
                auto r = maximize_subcritical(*d, sp);
                out.put("maximize.json", json_text(maximizer_json(r)));
                out.put("u_eps.field", field_to_string(r.u_eps, mhash));
                out.put("trace.csv", trace_csv(r.trace));
                if (!r.converged && !r.flat)
                    throw ConvergenceError("maximizer did not converge", r.step_norm, r.iterations);
            });
        } else if (cmd == "sweep") {
            std::vector<MaximizerResult> rs;
            run_sweep(grid_param(p, "eps_grid", {5.0, 3.0, 2.0, 1.0, 0.5, 0.1}), rs);
        } else if (cmd == "green") {
            steps.run("green", [&] {
                auto g = green_at_hint();
                out.put("green.json", json_text(green_json(g)));
                out.put("G.field", field_to_string(g.G, mhash));
            });
        } else if (cmd == "green-survey") {
            steps.run("green-survey", [&] {
                GreenOptions go;
                go.lambda1 = l1;
                auto rep = bound_over_boundary(*d, alpha, param(p, "samples", 16), go);
                out.put("survey.csv", survey_csv(rep));
                Series s{"A_p_survey", "arc", "A_p", {}};
                for (const auto& e : rep.entries)
                    if (!e.skipped) s.points.emplace_back(e.arc, e.A_p);
                series.push_back(s);
            });
        } else if (cmd == "testfn") {
            GreenResult g;
            steps.run("green", [&] { g = green_at_hint(); });
            std::vector<TestfnRow> rows;
            run_testfn(g, grid_param(p, "eps_grid", {1e-3, 1e-4, 1e-5}), rows);
        } else if (cmd == "appendix") {
            GreenResult g;
            steps.run("green", [&] { g = green_at_hint(); });
            steps.run("appendix", [&] {
                std::vector<AppendixReport> rows;
                for (double e : grid_param(p, "eps_grid", {1e-3, 1e-4, 1e-5}))
                    rows.push_back(appendix_integrals(build_test_function(*d, g, e)));
                out.put("appendix.csv", appendix_csv(rows));
            });
        } else if (cmd == "meanfield") {
            steps.run("meanfield", [&] {
                MeanFieldProblem pb{d, alpha, param(p, "rho", kPi), field_from_spec(*d, param(p, "f", std::string("expr:1"))), l1};
                MeanFieldOptions mo;
                mo.tol = param(p, "tol", 1e-10);
                mo.max_iterations = param(p, "max_iterations", 200);
                int ws = param(p, "witness_samples", 0);
                if (ws > 0) mo.C_emp = check_corollary(*d, alpha, ws, config.seed).C_emp;
                auto s = minimize_F(pb, mo);
                json j{{"schema", kSchema},        {"rho", pb.rho},
                       {"alpha", alpha},           {"F", s.F_value},
                       {"mu", s.mu},               {"residual", s.residual},
                       {"grad_norm", s.grad_norm}, {"norm_1alpha", s.norm_1alpha},
                       {"mean", d->mean(s.u)},     {"converged", s.converged},
                       {"stagnated", s.stagnated}, {"iterations", s.iterations},
                       {"witness_ok", s.witness_ok}};
                if (mo.C_emp) j["C_emp"] = *mo.C_emp;
                out.put("meanfield.json", json_text(j));
                out.put("u.field", field_to_string(s.u, mhash));
                std::string t = "iteration,F,dF,grad_norm,step,newton,witness_ok\n";
                for (const auto& e : s.trace)
                    t += std::to_string(e.iteration) + "," + format_number(e.F) + "," + format_number(e.dF) + "," +
                         format_number(e.grad_norm) + "," + format_number(e.step) + "," + (e.newton ? "1" : "0") + "," +
                         (e.witness_ok ? "1" : "0") + "\n";
                out.put("meanfield_trace.csv", t);
                if (!s.converged)
                    throw ConvergenceError("mean-field Newton stopped at gradient norm " + format_number(s.grad_norm),
                                           s.grad_norm, s.iterations);
            });
        } else if (cmd == "corollary") {
            steps.run("corollary", [&] {
                int samples = param(p, "samples", 1000), seeds = param(p, "seeds", 3);
                json per = json::array();
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                double rlo = lo, rhi = hi;
                for (int k = 0; k < seeds; ++k) {
                    auto r = check_corollary(*d, alpha, samples, config.seed + static_cast<std::uint64_t>(k));
                    per.push_back({{"seed", r.seed},       {"C_emp", r.C_emp},       {"C_random", r.C_random},
                                   {"argmax", r.argmax},   {"D_const", r.D_const},   {"D_min", r.D_min},
                                   {"D_mean", r.D_mean},   {"violations", r.violations}, {"rescaled", r.rescaled}});
                    lo = std::min(lo, r.C_emp);
                    hi = std::max(hi, r.C_emp);
                    rlo = std::min(rlo, r.C_random);
                    rhi = std::max(rhi, r.C_random);
                }
                out.put("corollary.json", json_text({{"schema", kSchema},
                                                     {"samples", samples},
                                                     {"log_area", std::log(d->area)},
                                                     {"C_emp", hi},
                                                     {"C_emp_spread", hi - lo},
                                                     {"C_random_spread", rhi - rlo},
                                                     {"per_seed", per}}));
            });
        } else if (cmd == "full-report") {
            out.put("eigen.json", json_text(eigen_json(*eig, *mesh)));
            GreenResult g;
            steps.run("green", [&] {
                g = green_at_hint();
                out.put("green.json", json_text(green_json(g)));
            });
            std::vector<MaximizerResult> rs;
            run_sweep(grid_param(p, "sweep_grid", {5.0, 3.0, 2.0, 1.0, 0.5, 0.1}), rs);
            std::vector<TestfnRow> rows;
            run_testfn(g, grid_param(p, "testfn_grid", {1e-3, 1e-4, 1e-5}), rows);
            steps.run("report", [&] {
                std::map<double, std::pair<std::string, std::pair<std::string, std::string>>, std::greater<>> table;
                for (const auto& r : rs) table[r.eps].first = format_number(r.C_eps);
                for (const auto& r : rows)
                    table[r.tf.eps].second = {format_number(r.lb.integral), format_number(r.lb.margin)};
                std::string s = std::string(kFullReportColumns) + "\n";
                for (const auto& [eps, v] : table)
                    s += format_number(eps) + "," + v.first + "," + format_number(g.bound_B) + "," + v.second.first + "," +
                         v.second.second + "\n";
                out.put("report.csv", s);
            });
        }
        if (!series.empty()) {
            steps.run("plotdata", [&] {
                for (const auto& s : series) {
                    out.put(s.name + ".csv", series_csv(s));
                    out.put(s.name + ".svg", series_svg(s));
                }
            });
        }
    } catch (...) {
        write_manifest(dir, man);
        throw;
    }
    write_manifest(dir, man);
    return man;
}

std::string series_csv(const Series& s) {
    std::string out = s.x_label + "," + s.y_label + "\n";
    for (const auto& [x, y] : s.points) out += format_number(x) + "," + format_number(y) + "\n";
    return out;
}

std::string series_svg(const Series& s) {
    const double W = 480, H = 320, pad = 40;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!s.points.empty()) {
        x0 = x1 = s.points.front().first;
        y0 = y1 = s.points.front().second;
        for (const auto& [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        if (x1 == x0) x1 = x0 + 1;
        if (y1 == y0) y1 = y0 + 1;
    }
    // Points keep their order; the x axis runs from the first point's x toward the last.
    bool flip = s.points.size() > 1 && s.points.front().first > s.points.back().first;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
    o << "<title>" << s.name << "</title>\n";
    o << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << W - 2 * pad << "\" height=\"" << H - 2 * pad
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">" << s.x_label
      << "</text>\n";
    o << "<text x=\"12\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << H / 2 << ")\">"
      << s.y_label << "</text>\n";
    o << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : s.points) {
        double tx = (x - x0) / (x1 - x0);
        if (flip) tx = 1.0 - tx;
        double px = pad + tx * (W - 2 * pad);
        double py = H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad);
        o << (first ? "" : " ") << format_number(std::round(px * 100) / 100) << ","
          << format_number(std::round(py * 100) / 100);
        first = false;
    }
    o << "\"/>\n</svg>\n";
    return o.str();
}

std::vector<std::string> emit_plotdata(const std::vector<Series>& series, const std::string& dir) {
    fs::create_directories(dir);
    std::vector<std::string> files;
    for (const auto& s : series) {
        for (const auto& [ext, text] : {std::pair{std::string(".csv"), series_csv(s)}, std::pair{std::string(".svg"), series_svg(s)}}) {
            std::ofstream out(fs::path(dir) / (s.name + ext), std::ios::binary);
            if (!out) throw Error("cannot write plot file in " + dir);
            out << text;
            files.push_back(s.name + ext);
        }
    }
    return files;
}

}  // namespace mtlab
