#pragma once

#include "mtlab/mesh.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mtlab {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSchema = "mtlab-output v1";

/// One run: a pipeline name, the domain, and the pipeline's own parameters.
///
/// domain is either {"mesh": "<path>"} or {"kind": "square" | "disk" | "polygon",
/// "h": <target h>, "radius": <r>, "vertices": [[x, y], ...], "refine": <n>}.
struct ExperimentConfig {
    std::string command;
    nlohmann::json domain = nlohmann::json::object();
    double alpha = 0.0;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    nlohmann::json params = nlohmann::json::object();

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

ExperimentConfig load_config(const std::string& path);

/// Commands understood by run_experiment.
const std::vector<std::string>& pipeline_names();

/// Checks names, ranges and file existence; throws ValidationError. No solves.
void validate(const ExperimentConfig& config);

MeshPtr build_domain(const nlohmann::json& domain);

struct StepRecord {
    std::string name;
    std::string status;  ///< "ok" or "failed"
    double seconds = 0.0;
    std::string error;
};

struct FileRecord {
    std::string path;  ///< relative to the output directory
    std::string sha256;
};

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::vector<StepRecord> steps;
    bool ok = true;

    /// Timings are left out unless requested, so manifest.json is reproducible.
    nlohmann::json to_json(bool with_timings = false) const;
};

/// Runs the pipeline, writing outputs plus manifest.json and timings.json into
/// config.output_dir. On a module error the failing step is recorded, the
/// manifest is still written, and the error is rethrown.
RunManifest run_experiment(const ExperimentConfig& config);

struct Series {
    std::string name;
    std::string x_label;
    std::string y_label;
    std::vector<std::pair<double, double>> points;  ///< drawn in the given order
};

std::string series_csv(const Series& s);
/// Minimal SVG line chart: one polyline with a vertex per point.
std::string series_svg(const Series& s);
/// Writes <name>.csv and <name>.svg per series; returns the file names written.
std::vector<std::string> emit_plotdata(const std::vector<Series>& series, const std::string& dir);

// Pinned CSV headers.
inline constexpr const char* kSweepColumns =
    "eps,C_eps,lambda_eps,mu_eps,c_eps,x_eps,y_eps,r_eps,el_residual,converged,iterations,best_start,mu_bound,bound_ok,"
    "liminf_ok,dist_to_boundary,energy_fraction_01,energy_fraction_005";
inline constexpr const char* kTestfnColumns =
    "eps,c2_numeric,c2_paper,A,norm_check,integral,bound_B,margin,margin_paper,chart_cap_exceeded,bracket_ok";
inline constexpr const char* kAppendixColumns =
    "eps,R,grad_inner_quadrature,grad_inner_closed_form,grad_inner_rel_diff,int_W_inner_quadrature,"
    "int_W_inner_closed_form,int_W2_inner_quadrature,int_W2_inner_closed_form,K_B_inner,K_B_outer,K_B_total,K_C_inner,"
    "K_C_outer,K_C_total";
inline constexpr const char* kSurveyColumns = "sample,arc,node,x,y,skipped,A_p,bound_B,note";
inline constexpr const char* kFullReportColumns = "eps,C_eps,bound_B,testfn_integral,margin";

/// Shortest round-trip decimal form (as in JSON output); used for every CSV number.
std::string format_number(double v);

}  // namespace mtlab
