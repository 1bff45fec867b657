#pragma once

#include "mfilm/config.hpp"
#include "mfilm/flow_factors.hpp"
#include "mfilm/reynolds2d.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfilm {

/// Errors raised inside a pipeline stage keep their type; the message is
/// prefixed with "[stage] ".
RegimeClass classify(const RunConfig& config);

/// Flow factors from the regime's module: cell2d (reynolds), cell3d (stokes)
/// or the closed form (highfreq).
FlowFactors compute_factors(const RunConfig& config, const RegimeClass& regime);

struct RunResult {
    RegimeClass regime;
    FlowFactors factors;
    PressureField field;
    FluxReport flux;
};

/// Classification, factors, macroscopic solve and reconstruction. Writes nothing.
RunResult run_pipeline(const RunConfig& config);

/// Creates the output directory; throws ConfigError when it is not writable.
void prepare_output_dir(const std::string& dir);

/// Writes flow_factors.csv, pressure.csv / pressure.vtk (per output.formats)
/// and summary.json. Returns the written file names.
std::vector<std::string> write_run_outputs(const RunConfig& config, const RunResult& result);

std::string flow_factors_header();
std::string flow_factors_row(const FlowFactors& factors);

/// Deterministic JSON summary, including which structural zeros were observed.
std::string run_summary_json(const RunConfig& config, const RunResult& result);

struct SweepRow {
    double lambda = 0.0;
    std::optional<FlowFactors> factors; ///< empty when the row failed
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;          ///< in the order of the lambda list
    std::optional<FlowFactors> reynolds; ///< lambda = 0 reference, if it could be computed
    std::string reynolds_error;
};

/// Stokes-regime factors for every lambda (positive, strictly increasing).
/// Rows run in a pool of `jobs` workers (0: hardware concurrency); a failing
/// row is recorded and does not stop the others.
SweepResult run_sweep(const RunConfig& config, const std::vector<double>& lambdas, int jobs = 0);

/// lambda_sweep.csv: flow_factors.csv columns, failed rows hold nan.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

/// Row errors and the trend of |K1(lambda) - K1(0)|_F as lambda decreases
/// (reported, not asserted).
std::string sweep_report_json(const SweepResult& sweep);

struct ProfileSample {
    double y3 = 0.0;
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    Eigen::Vector2d w = Eigen::Vector2d::Zero();
};

/// Vertical profiles of velocity and microrotation at macroscopic node (i, j)
/// and cell point y' of the solved run:
///  - highfreq: the flat film of thickness h_min, `samples` equispaced heights;
///  - reynolds: the film of thickness h(y') driven by the local cell drive,
///    `samples` equispaced heights;
///  - stokes: the 3D cell fields superposed over the nearest cell column, at
///    the walls and the layer centres (`samples` is ignored).
std::vector<ProfileSample> compute_profile(const RunConfig& config, const RunResult& result, int i, int j,
                                           const Eigen::Vector2d& y_prime, int samples);

/// Columns y3,u1,u2,w1,w2.
void write_profile_csv(std::ostream& os, const std::vector<ProfileSample>& profile);

} // namespace mfilm
