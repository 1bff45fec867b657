#include "mfilm/pipeline.hpp"

#include "mfilm/cell2d.hpp"
#include "mfilm/cell3d.hpp"
#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"
#include "mfilm/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace mfilm {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

/// Runs f, re-raising mfilm errors with the same type and a stage prefix.
template <typename F>
auto stage(const std::string& name, F&& f)
{
    const auto tag = [&](const std::exception& e) { return "[" + name + "] " + e.what(); };
    try {
        return f();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(tag(e), e.history());
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e));
    } catch (const DomainError& e) {
        throw DomainError(tag(e));
    } catch (const ValidationError& e) {
        throw ValidationError(tag(e));
    } catch (const SingularityError& e) {
        throw SingularityError(tag(e));
    } catch (const ConditioningError& e) {
        throw ConditioningError(tag(e));
    }
}

Cell2DOptions cell2d_options(const RunConfig& c)
{
    Cell2DOptions o;
    o.tol = c.cell.solver_tol;
    o.max_iter = c.cell.max_iter * c.cell.n2d;
    return o;
}

Cell3DOptions cell3d_options(const RunConfig& c)
{
    Cell3DOptions o;
    o.tol = c.cell.solver_tol;
    o.max_iter = c.cell.max_iter;
    return o;
}

CellMesh3D cell_mesh(const RunConfig& c, const RoughnessField& rough)
{
    return build_cell_mesh(rough, c.cell.n3d[0], c.cell.n3d[1], c.cell.n3d[2]);
}

FlowFactors highfreq_flow_factors(const RoughnessField& rough, const MicropolarParams& p)
{
    FlowFactors ff;
    ff.regime = Regime::highfreq;
    ff.lambda = std::numeric_limits<double>::infinity();
    ff.K1 = classical_micropolar_coefficient(rough.h_min(), p) * Eigen::Matrix2d::Identity();
    return ff;
}

Json matrix_json(const Eigen::Matrix2d& m) { return Json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}); }

Json lambda_json(double lambda)
{
    if (std::isfinite(lambda)) return lambda;
    return format_double(lambda);
}

void write_file(const fs::path& path, const std::string& content)
{
    // write-then-rename keeps a failed write from leaving a partial file
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw ConfigError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

} // namespace

RegimeClass classify(const RunConfig& config)
{
    return stage("classify", [&] { return classify_regime(config.regime); });
}

FlowFactors compute_factors(const RunConfig& config, const RegimeClass& regime)
{
    const RoughnessField rough = stage("roughness", [&] { return config.roughness.build(); });
    FlowFactors ff;
    switch (regime.regime) {
    case Regime::reynolds:
        ff = stage("cell2d", [&] {
            RoughnessField r = rough;
            if (rough.n() != config.cell.n2d && rough.kind() != RoughnessKind::table)
                r = make_roughness(rough.kind(), rough.h0(), rough.amplitude(), config.cell.n2d);
            else if (rough.n() != config.cell.n2d)
                throw ConfigError("table roughness needs cell.n2d = roughness.n");
            return compute_reynolds_factors(r, config.physics, cell2d_options(config));
        });
        break;
    case Regime::stokes:
        ff = stage("cell3d", [&] {
            const CellMesh3D mesh = cell_mesh(config, rough);
            return assemble_flow_factors_3d(
                solve_cell_3d_all(mesh, config.physics, regime.lambda, cell3d_options(config)));
        });
        break;
    case Regime::highfreq:
        ff = stage("closed_form", [&] { return highfreq_flow_factors(rough, config.physics); });
        break;
    }
    ff.regime = regime.regime;
    ff.lambda = regime.lambda;
    return ff;
}

RunResult run_pipeline(const RunConfig& config)
{
    RunResult r;
    r.regime = classify(config);
    r.factors = compute_factors(config, r.regime);
    r.field = stage("reynolds2d", [&] {
        return reconstruct_UW(solve_reynolds(config.domain, r.factors), r.factors, config.domain.f,
                              config.domain.g);
    });
    r.flux = flux_diagnostics(r.field);
    return r;
}

void prepare_output_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("output directory '" + dir + "' cannot be created");
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw ConfigError("output directory '" + dir + "' is not writable");
    }
    fs::remove(probe, ec);
}

std::string flow_factors_header()
{
    std::string h = "regime,lambda";
    for (const char* m : {"K1", "K2", "L1", "L2"})
        for (const char* ij : {"11", "12", "21", "22"}) h += std::string(",") + m + "_" + ij;
    return h;
}

std::string flow_factors_row(const FlowFactors& ff)
{
    std::string row = to_string(ff.regime) + "," + format_double(ff.lambda);
    for (const Eigen::Matrix2d* m : {&ff.K1, &ff.K2, &ff.L1, &ff.L2})
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) row += "," + format_double((*m)(i, j));
    return row;
}

std::string run_summary_json(const RunConfig& config, const RunResult& r)
{
    Json j;
    j["regime"] = to_string(r.regime.regime);
    j["lambda"] = lambda_json(r.regime.lambda);
    const FlowFactors& ff = r.factors;
    j["factors"] = {{"K1", matrix_json(ff.K1)}, {"K2", matrix_json(ff.K2)}, {"L1", matrix_json(ff.L1)},
                    {"L2", matrix_json(ff.L2)}};
    Json zeros = Json::array();
    if (ff.K2.isZero(0.0)) zeros.push_back("K2");
    if (ff.L1.isZero(0.0)) zeros.push_back("L1");
    if (ff.L2.isZero(0.0)) zeros.push_back("L2");
    j["structural_zeros"] = zeros;
    j["structural_zeros_hold"] = ff.structural_zeros_hold();
    j["A_min_sym_eigenvalue"] = ff.min_sym_eigenvalue();
    j["A_asymmetry"] = ff.asymmetry();
    const PressureField& p = r.field;
    j["macro"] = {{"nx", config.domain.nx},
                  {"ny", config.domain.ny},
                  {"iterations", p.iterations},
                  {"relative_residual", p.relative_residual},
                  {"pressure_mean", p.mean},
                  {"pressure_min", p.P.minCoeff()},
                  {"pressure_max", p.P.maxCoeff()},
                  {"max_abs_U", std::max(p.U1.cwiseAbs().maxCoeff(), p.U2.cwiseAbs().maxCoeff())},
                  {"max_divergence", r.flux.max_divergence},
                  {"net_boundary_flux", r.flux.net_boundary_flux}};
    return j.dump(2) + "\n";
}

std::vector<std::string> write_run_outputs(const RunConfig& config, const RunResult& r)
{
    const fs::path dir(config.output.dir);
    std::vector<std::string> written;
    write_file(dir / "flow_factors.csv", flow_factors_header() + "\n" + flow_factors_row(r.factors) + "\n");
    written.push_back("flow_factors.csv");
    if (config.output.wants("csv")) {
        std::ostringstream os;
        write_pressure_csv(os, r.field);
        write_file(dir / "pressure.csv", os.str());
        written.push_back("pressure.csv");
    }
    if (config.output.wants("vtk")) {
        std::ostringstream os;
        write_pressure_vtk(os, r.field);
        write_file(dir / "pressure.vtk", os.str());
        written.push_back("pressure.vtk");
    }
    write_file(dir / "summary.json", run_summary_json(config, r));
    written.push_back("summary.json");
    return written;
}

SweepResult run_sweep(const RunConfig& config, const std::vector<double>& lambdas, int jobs)
{
    if (lambdas.empty()) throw ConfigError("sweep needs at least one lambda");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i]))
            throw ConfigError("sweep lambdas must be positive and finite");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
            throw ConfigError("sweep lambdas must be strictly increasing");
    }
    SweepResult out;
    out.rows.resize(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) out.rows[i].lambda = lambdas[i];

    const std::size_t tasks = lambdas.size() + 1; // the last task is the lambda = 0 reference
    const auto work = [&](std::size_t t) {
        try {
            if (t == lambdas.size()) {
                out.reynolds = compute_factors(config, {Regime::reynolds, 0.0});
                return;
            }
            out.rows[t].factors = compute_factors(config, {Regime::stokes, lambdas[t]});
        } catch (const std::exception& e) {
            (t == lambdas.size() ? out.reynolds_error : out.rows[t].error) = e.what();
        }
    };
    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(jobs, static_cast<int>(tasks)); ++w)
        pool.emplace_back([&] {
            for (std::size_t t; (t = next++) < tasks;) work(t);
        });
    for (auto& th : pool) th.join();
    return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep)
{
    os << flow_factors_header() << '\n';
    for (const SweepRow& row : sweep.rows) {
        if (row.factors) {
            os << flow_factors_row(*row.factors) << '\n';
            continue;
        }
        FlowFactors nan;
        nan.regime = Regime::stokes;
        nan.lambda = row.lambda;
        const double q = std::numeric_limits<double>::quiet_NaN();
        nan.K1.setConstant(q), nan.K2.setConstant(q), nan.L1.setConstant(q), nan.L2.setConstant(q);
        os << flow_factors_row(nan) << '\n';
    }
}

std::string sweep_report_json(const SweepResult& sweep)
{
    Json j;
    Json rows = Json::array();
    for (const SweepRow& row : sweep.rows) {
        Json r{{"lambda", row.lambda}, {"ok", row.factors.has_value()}};
        if (row.factors) {
            r["A_min_sym_eigenvalue"] = row.factors->min_sym_eigenvalue();
            r["A_asymmetry"] = row.factors->asymmetry();
        } else {
            r["error"] = row.error;
        }
        rows.push_back(r);
    }
    j["rows"] = rows;
    Json trend;
    if (sweep.reynolds) {
        trend["reference"] = "reynolds";
        Json pts = Json::array();
        std::vector<double> dist;
        for (auto it = sweep.rows.rbegin(); it != sweep.rows.rend(); ++it) {
            if (!it->factors) continue;
            const double d = (it->factors->K1 - sweep.reynolds->K1).norm();
            pts.push_back({{"lambda", it->lambda}, {"distance", d}});
            dist.push_back(d);
        }
        trend["decreasing_lambda"] = pts;
        trend["monotone_decreasing"] = std::is_sorted(dist.rbegin(), dist.rend());
    } else {
        trend["reference"] = nullptr;
        trend["error"] = sweep.reynolds_error;
    }
    j["trend"] = trend;
    return j.dump(2) + "\n";
}

std::vector<ProfileSample> compute_profile(const RunConfig& config, const RunResult& r, int i, int j,
                                           const Eigen::Vector2d& y_prime, int samples)
{
    const MacroDomain& d = config.domain;
    if (i < 0 || i > d.nx || j < 0 || j > d.ny) throw DomainError("profile node outside the macroscopic grid");
    if (!(std::fabs(y_prime[0]) <= 0.5 && std::fabs(y_prime[1]) <= 0.5))
        throw DomainError("profile cell point must lie in [-1/2, 1/2]^2");
    if (samples < 2) throw DomainError("profile needs at least 2 samples");
    const MicropolarParams& p = config.physics;
    const RoughnessField rough = stage("roughness", [&] { return config.roughness.build(); });
    const Eigen::Vector2d drive = r.field.gradient(i, j) - d.f; // = -(f - grad P)
    std::vector<ProfileSample> out;

    switch (r.regime.regime) {
    case Regime::highfreq: {
        const double h = rough.h_min();
        for (int s = 0; s < samples; ++s) {
            const double y3 = s == samples - 1 ? h : h * s / (samples - 1);
            const auto [u, w] = highfreq_profiles(y3, r.field, i, j, p, h);
            out.push_back({y3, u, w});
        }
        break;
    }
    case Regime::reynolds: {
        const auto sol = stage("cell2d", [&] {
            RoughnessField rr = rough;
            if (rough.n() != config.cell.n2d && rough.kind() != RoughnessKind::table)
                rr = make_roughness(rough.kind(), rough.h0(), rough.amplitude(), config.cell.n2d);
            const CoefficientField c = build_coefficient(rr, p);
            return std::array<CellSolution2D, 2>{solve_cell_2d(c, 1, 1, cell2d_options(config)),
                                                 solve_cell_2d(c, 2, 1, cell2d_options(config))};
        });
        // local drive sum_i drive_i (e_i + grad pi^i)
        Eigen::Vector2d local = drive;
        for (int a = 0; a < 2; ++a) local += drive[a] * cell_pressure_gradient(sol[a], y_prime[0], y_prime[1]);
        const double h = rough.height(y_prime[0], y_prime[1]);
        for (int s = 0; s < samples; ++s) {
            const double y3 = s == samples - 1 ? h : h * s / (samples - 1);
            out.push_back({y3, profile_u(y3, h, local, d.g, p), profile_w(y3, h, local, d.g, p)});
        }
        break;
    }
    case Regime::stokes: {
        const CellMesh3D mesh = cell_mesh(config, rough);
        const auto sol = stage("cell3d", [&] {
            return solve_cell_3d_all(mesh, p, r.regime.lambda, cell3d_options(config));
        });
        const int n1 = mesh.n1, n2 = mesh.n2, n3 = mesh.n3;
        const int c1 = std::min(n1 - 1, static_cast<int>(std::floor((y_prime[0] + 0.5) * n1)));
        const int c2 = std::min(n2 - 1, static_cast<int>(std::floor((y_prime[1] + 0.5) * n2)));
        const double h = mesh.hat(2 * c1 + 1, 2 * c2 + 1);
        const FieldLayout L(n1, n2, n3);
        // coefficient of each cell problem: forcing (f - grad P)_i for k = 1, g_i for k = 2
        const double coef[2][2] = {{-drive[0], d.g[0]}, {-drive[1], d.g[1]}};
        const auto node = [&](const CellSolution3D& s, Field f, int a, int b, int q) {
            return q <= 0 || q >= n3 ? 0.0 : s.x[L.index(f, (a + n1) % n1, (b + n2) % n2, q - 1)];
        };
        out.push_back({0.0, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()});
        for (int l = 0; l < n3; ++l) {
            ProfileSample ps;
            ps.y3 = h * (l + 0.5) / n3;
            for (int a = 0; a < 2; ++a)
                for (int k = 0; k < 2; ++k) {
                    const CellSolution3D& s = sol[a][k];
                    const double u1 = 0.5 * (s.x[L.index(Field::u1, c1, c2, l)]
                                             + s.x[L.index(Field::u1, (c1 + 1) % n1, c2, l)]);
                    const double u2 = 0.5 * (s.x[L.index(Field::u2, c1, c2, l)]
                                             + s.x[L.index(Field::u2, c1, (c2 + 1) % n2, l)]);
                    const double w1 = 0.25 * (node(s, Field::w1, c1, c2, l) + node(s, Field::w1, c1, c2 + 1, l)
                                              + node(s, Field::w1, c1, c2, l + 1)
                                              + node(s, Field::w1, c1, c2 + 1, l + 1));
                    const double w2 = 0.25 * (node(s, Field::w2, c1, c2, l) + node(s, Field::w2, c1 + 1, c2, l)
                                              + node(s, Field::w2, c1, c2, l + 1)
                                              + node(s, Field::w2, c1 + 1, c2, l + 1));
                    ps.u += coef[a][k] * Eigen::Vector2d(u1, u2);
                    ps.w += coef[a][k] * Eigen::Vector2d(w1, w2);
                }
            out.push_back(ps);
        }
        out.push_back({h, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()});
        break;
    }
    }
    return out;
}

void write_profile_csv(std::ostream& os, const std::vector<ProfileSample>& profile)
{
    os << "y3,u1,u2,w1,w2\n";
    for (const ProfileSample& s : profile)
        os << format_double(s.y3) << ',' << format_double(s.u[0]) << ',' << format_double(s.u[1]) << ','
           << format_double(s.w[0]) << ',' << format_double(s.w[1]) << '\n';
}

} // namespace mfilm
