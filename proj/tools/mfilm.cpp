// Command-line front end: classify, factors, solve, sweep, profile, verify.

#include "mfilm/acceptance.hpp"
#include "mfilm/config.hpp"
#include "mfilm/errors.hpp"
#include "mfilm/format.hpp"
#include "mfilm/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kConvergence = 3, kVerification = 4 };

struct Globals {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
};

mfilm::RunConfig load(const Globals& g)
{
    if (g.config_path.empty()) throw mfilm::ConfigError("--config is required for this subcommand");
    mfilm::RunConfig c = mfilm::load_config(g.config_path, g.overrides);
    if (!g.out_dir.empty()) c.output.dir = g.out_dir;
    return c;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out || !(out << text)) throw mfilm::ConfigError("cannot write '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string utc_timestamp()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int cmd_classify(const Globals& g)
{
    const mfilm::RunConfig c = load(g);
    const mfilm::RegimeClass r = mfilm::classify(c);
    std::cout << "{\"regime\": \"" << mfilm::to_string(r.regime) << "\", \"lambda\": \""
              << mfilm::format_double(r.lambda) << "\"}\n";
    return kOk;
}

int cmd_factors(const Globals& g)
{
    const mfilm::RunConfig c = load(g);
    mfilm::prepare_output_dir(c.output.dir);
    const mfilm::FlowFactors ff = mfilm::compute_factors(c, mfilm::classify(c));
    const auto path = std::filesystem::path(c.output.dir) / "flow_factors.csv";
    write_text(path, mfilm::flow_factors_header() + "\n" + mfilm::flow_factors_row(ff) + "\n");
    std::cout << path.string() << "\n";
    return kOk;
}

int cmd_solve(const Globals& g)
{
    const mfilm::RunConfig c = load(g);
    mfilm::prepare_output_dir(c.output.dir);
    const mfilm::RunResult r = mfilm::run_pipeline(c);
    for (const std::string& f : mfilm::write_run_outputs(c, r))
        std::cout << (std::filesystem::path(c.output.dir) / f).string() << "\n";
    return kOk;
}

int cmd_sweep(const Globals& g, const std::vector<double>& lambdas, int jobs)
{
    const mfilm::RunConfig c = load(g);
    mfilm::prepare_output_dir(c.output.dir);
    const mfilm::SweepResult s = mfilm::run_sweep(c, lambdas, jobs);
    const std::filesystem::path dir(c.output.dir);
    std::ostringstream csv;
    mfilm::write_sweep_csv(csv, s);
    write_text(dir / "lambda_sweep.csv", csv.str());
    write_text(dir / "sweep_report.json", mfilm::sweep_report_json(s));
    int failed = 0;
    for (const auto& row : s.rows)
        if (!row.factors) {
            ++failed;
            std::cerr << "lambda " << mfilm::format_double(row.lambda) << ": " << row.error << "\n";
        }
    std::cout << (dir / "lambda_sweep.csv").string() << "\n" << (dir / "sweep_report.json").string() << "\n";
    return failed ? kConvergence : kOk;
}

int cmd_profile(const Globals& g, const std::vector<int>& node, const std::vector<double>& cell_point, int samples)
{
    const mfilm::RunConfig c = load(g);
    mfilm::prepare_output_dir(c.output.dir);
    const mfilm::RunResult r = mfilm::run_pipeline(c);
    const int i = node.empty() ? c.domain.nx / 2 : node[0];
    const int j = node.empty() ? c.domain.ny / 2 : node[1];
    const Eigen::Vector2d y(cell_point.empty() ? 0.0 : cell_point[0], cell_point.empty() ? 0.0 : cell_point[1]);
    std::ostringstream csv;
    mfilm::write_profile_csv(csv, mfilm::compute_profile(c, r, i, j, y, samples));
    const auto path = std::filesystem::path(c.output.dir) / "profile.csv";
    write_text(path, csv.str());
    std::cout << path.string() << "\n";
    return kOk;
}

int cmd_verify(const Globals& g, const std::vector<int>& criteria)
{
    const std::string dir = g.out_dir.empty() ? "." : g.out_dir;
    mfilm::prepare_output_dir(dir);
    mfilm::AcceptanceOptions opts;
    opts.only = criteria;
    const auto results = mfilm::run_acceptance(opts);
    bool ok = true;
    for (const auto& r : results) {
        std::cout << mfilm::acceptance_summary_line(r) << "\n";
        ok = ok && r.pass;
    }
    const auto path = std::filesystem::path(dir) / "verify_report.json";
    write_text(path, mfilm::acceptance_report_json(results, utc_timestamp()));
    std::cout << path.string() << "\n";
    return ok ? kOk : kVerification;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Micropolar thin-film flow factors and generalized Reynolds solver"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "run configuration (JSON)");
    app.add_option("--out", g.out_dir, "output directory (overrides output.dir)");
    app.add_option("--override", g.overrides, "dotted.key=value applied to the configuration")->take_all();

    auto* classify = app.add_subcommand("classify", "print the regime and lambda");
    auto* factors = app.add_subcommand("factors", "compute flow factors (flow_factors.csv)");
    auto* solve = app.add_subcommand("solve", "full pipeline (flow factors, pressure, summary)");
    auto* sweep = app.add_subcommand("sweep", "Stokes-regime factors over a lambda list (lambda_sweep.csv)");
    std::vector<double> lambdas;
    int jobs = 0;
    sweep->add_option("--lambdas", lambdas, "strictly increasing positive values")->delimiter(',')->required();
    sweep->add_option("--jobs", jobs, "worker threads (0: hardware concurrency)");
    auto* profile = app.add_subcommand("profile", "vertical velocity/microrotation profile (profile.csv)");
    std::vector<int> node;
    std::vector<double> cell_point;
    int samples = 33;
    profile->add_option("--node", node, "macroscopic node i,j (default: centre)")->delimiter(',')->expected(2);
    profile->add_option("--cell-point", cell_point, "cell point y1,y2 in [-1/2,1/2]^2 (default: 0,0)")
        ->delimiter(',')
        ->expected(2);
    profile->add_option("--samples", samples, "heights per profile (film regimes)");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite (verify_report.json)");
    std::vector<int> criteria;
    verify->add_option("--criteria", criteria, "subset of criteria ids (default: all)")->delimiter(',');
    for (auto* sub : {classify, factors, solve, sweep, profile, verify}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*classify) return cmd_classify(g);
        if (*factors) return cmd_factors(g);
        if (*solve) return cmd_solve(g);
        if (*sweep) return cmd_sweep(g, lambdas, jobs);
        if (*profile) return cmd_profile(g, node, cell_point, samples);
        if (*verify) return cmd_verify(g, criteria);
    } catch (const mfilm::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConvergence;
    } catch (const mfilm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const mfilm::ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kConfig;
    } catch (const mfilm::DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
