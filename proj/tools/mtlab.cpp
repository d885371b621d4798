// Command-line front end: every subcommand builds an ExperimentConfig and hands it to run_experiment.

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using nlohmann::json;

struct Common {
    std::string mesh, domain = "disk", out = "out";
    double h = 0.05, alpha = 0.0;
    int refine = 0;
    std::uint64_t seed = 1;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw mtlab::ValidationError(std::string("cannot parse ") + what + " entry '" + item + "'");
        }
    }
    return v;
}

void add_common(CLI::App* sub, Common& c, bool with_domain = true) {
    if (with_domain) {
        sub->add_option("--mesh", c.mesh, "mt-mesh v1 file");
        sub->add_option("--domain", c.domain, "square | disk when no mesh file is given");
        sub->add_option("--hmax", c.h, "target mesh size for generated domains");
        sub->add_option("--refine", c.refine, "uniform refinements applied after loading");
        sub->add_option("--alpha", c.alpha, "alpha, 0 <= alpha < lambda1");
    }
    sub->add_option("--seed", c.seed, "run seed");
    sub->add_option("--out", c.out, "output directory");
}

mtlab::ExperimentConfig make_config(const std::string& command, const Common& c, json params) {
    mtlab::ExperimentConfig cfg;
    cfg.command = command;
    if (command != "verify-profile") {
        if (!c.mesh.empty()) cfg.domain = {{"mesh", c.mesh}};
        else cfg.domain = {{"kind", c.domain}, {"h", c.h}};
        if (c.refine) cfg.domain["refine"] = c.refine;
    }
    cfg.alpha = c.alpha;
    cfg.seed = c.seed;
    cfg.output_dir = c.out;
    cfg.params = std::move(params);
    return cfg;
}

const char* primary_output(const std::string& command) {
    static const std::map<std::string, const char*> files{
        {"mesh", "mesh.msh"},         {"eigen", "eigen.json"},       {"maximize", "maximize.json"},
        {"sweep", "sweep.csv"},       {"green", "green.json"},       {"green-survey", "survey.csv"},
        {"testfn", "testfn.csv"},     {"verify-profile", "profile.json"}, {"appendix", "appendix.csv"},
        {"meanfield", "meanfield.json"}, {"corollary", "corollary.json"}, {"full-report", "report.csv"}};
    auto it = files.find(command);
    return it == files.end() ? nullptr : it->second;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mtlab: Neumann Moser-Trudinger experiments on planar domains"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (overrides MTLAB_THREADS)");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "do not echo the main output file");

    Common c;
    json params = json::object();
    std::string eps_grid, p_hint, fit_annulus, f_spec = "expr:1", config_path;
    double tol = 0.0, eps = 1.0, rho = 3.141592653589793, rmax = 1e3;
    int restarts = 8, samples = 0, n = 10000, seeds = 3;

    auto* mesh = app.add_subcommand("mesh", "build a mesh and write it in mt-mesh v1 format");
    add_common(mesh, c);

    auto* eigen = app.add_subcommand("eigen", "first nonzero Neumann eigenvalue");
    add_common(eigen, c);
    eigen->add_option("--tol", tol);

    auto* maximize = app.add_subcommand("maximize", "subcritical maximizer at one eps");
    add_common(maximize, c);
    maximize->add_option("--eps", eps);
    maximize->add_option("--restarts", restarts);
    maximize->add_option("--tol", tol);

    auto* sweep = app.add_subcommand("sweep", "warm-started maximizer sweep over a decreasing eps grid");
    add_common(sweep, c);
    sweep->add_option("--eps-grid", eps_grid, "e1,e2,... strictly decreasing");
    sweep->add_option("--restarts", restarts);
    sweep->add_option("--tol", tol);

    auto* green = app.add_subcommand("green", "Neumann Green function and A_p at a boundary point");
    add_common(green, c);
    green->add_option("--p-hint", p_hint, "x,y");
    green->add_option("--fit-annulus", fit_annulus, "rin,rout");

    auto* survey = app.add_subcommand("green-survey", "A_p at equally spaced boundary points");
    add_common(survey, c);
    survey->add_option("--samples", samples);

    auto* testfn = app.add_subcommand("testfn", "test-function margin over an eps grid");
    add_common(testfn, c);
    testfn->add_option("--p-hint", p_hint, "x,y");
    testfn->add_option("--eps-grid", eps_grid, "e1,e2,...");

    auto* profile = app.add_subcommand("verify-profile", "checks of the radial blow-up profile");
    add_common(profile, c, false);
    profile->add_option("--rmax", rmax);
    profile->add_option("--n", n);

    auto* appendix = app.add_subcommand("appendix", "closed forms against quadrature for the test function");
    add_common(appendix, c);
    appendix->add_option("--p-hint", p_hint, "x,y");
    appendix->add_option("--eps-grid", eps_grid, "e1,e2,...");

    auto* meanfield = app.add_subcommand("meanfield", "minimize the mean-field functional");
    add_common(meanfield, c);
    meanfield->add_option("--rho", rho);
    meanfield->add_option("--f", f_spec, "field file or expr:<expression in x, y>");
    meanfield->add_option("--tol", tol);

    auto* corollary = app.add_subcommand("corollary", "empirical constant of the corollary inequality");
    add_common(corollary, c);
    corollary->add_option("--samples", samples);
    corollary->add_option("--seeds", seeds);

    auto* full = app.add_subcommand("full-report", "eigen, green, sweep, testfn and the comparison table");
    add_common(full, c);
    full->add_option("--p-hint", p_hint, "x,y");
    full->add_option("--sweep-grid", eps_grid, "e1,e2,...");
    full->add_option("--restarts", restarts);

    auto* run = app.add_subcommand("run", "run a JSON config file");
    run->add_option("config", config_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (threads > 0) mtlab::set_thread_count(threads);
        CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        mtlab::ExperimentConfig cfg;
        if (name == "run") {
            cfg = mtlab::load_config(config_path);
        } else {
            auto given = [&](const char* opt) {
                const CLI::Option* o = sub->get_option_no_throw(opt);
                return o != nullptr && o->count() > 0;
            };
            if (given("--tol")) params[name == "eigen" ? "eigen_tol" : "tol"] = tol;
            if (given("--restarts")) params["restarts"] = restarts;
            if (given("--p-hint")) params["p_hint"] = parse_list(p_hint, "--p-hint");
            if (given("--fit-annulus")) {
                auto v = parse_list(fit_annulus, "--fit-annulus");
                if (v.size() != 2) throw mtlab::ValidationError("--fit-annulus needs rin,rout");
                params["r_in"] = v[0];
                params["r_out"] = v[1];
            }
            if (name == "maximize") params["eps"] = eps;
            if (name == "sweep" && given("--eps-grid")) params["eps_grid"] = parse_list(eps_grid, "--eps-grid");
            if ((name == "testfn" || name == "appendix") && given("--eps-grid"))
                params["eps_grid"] = parse_list(eps_grid, "--eps-grid");
            if (name == "full-report" && given("--sweep-grid")) params["sweep_grid"] = parse_list(eps_grid, "--sweep-grid");
            if (given("--samples")) params["samples"] = samples;
            if (given("--seeds")) params["seeds"] = seeds;
            if (name == "meanfield") {
                params["rho"] = rho;
                params["f"] = f_spec;
            }
            if (name == "verify-profile") {
                params["r_max"] = rmax;
                params["n"] = n;
            }
            cfg = make_config(name, c, params);
        }
        mtlab::run_experiment(cfg);
        if (!quiet) {
            if (const char* file = primary_output(cfg.command)) {
                std::ifstream in(std::filesystem::path(cfg.output_dir) / file, std::ios::binary);
                std::cout << in.rdbuf();
            }
        }
        return 0;
    } catch (const mtlab::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const mtlab::ConvergenceError& e) {
        std::cerr << "not converged: " << e.what() << " (residual " << e.last_residual() << ", " << e.iterations()
                  << " iterations)\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
