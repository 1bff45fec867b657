#include "mfilm/cell2d.hpp"

#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"
#include "mfilm/krylov.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <future>
#include <string>
#include <vector>

namespace mfilm {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Face coefficient between cell (r, s) and its neighbour one step along
// direction dir (0: y1 / columns, 1: y2 / rows) with sign +1 or -1.
double face_coeff(const Eigen::MatrixXd& c, int r, int s, int dir, int sign)
{
    const int n = static_cast<int>(c.rows());
    const int rn = dir == 1 ? wrap(r + sign, n) : r;
    const int sn = dir == 0 ? wrap(s + sign, n) : s;
    return harmonic(c(r, s), c(rn, sn));
}

} // namespace

CoefficientField build_coefficient(const RoughnessField& rough, const MicropolarParams& params)
{
    params.validate();
    CoefficientField f;
    const int n = rough.n();
    f.c.resize(n, n);
    for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
            const double v = classical_micropolar_coefficient(rough.samples()(r, s), params);
            if (!(v > 0.0)) throw DomainError("cell coefficient is not positive");
            f.c(r, s) = v;
        }
    return f;
}

CellSolution2D solve_cell_2d(const CoefficientField& cf, int i, int k, const Cell2DOptions& opts)
{
    if (i < 1 || i > 2 || k < 1 || k > 2) throw DomainError("cell index (i, k) must lie in {1,2}x{1,2}");
    const int n = cf.n();
    if (n < 2 || cf.c.cols() != n) throw ValidationError("coefficient field must be square");
    CellSolution2D sol;
    sol.i = i;
    sol.k = k;
    sol.pi = Eigen::MatrixXd::Zero(n, n);
    if (k == 2) return sol;

    const double dx = 1.0 / n;
    const int dir = i - 1;
    const int N = n * n;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * N);
    Eigen::VectorXd b(N);
    for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
            const int P = r * n + s;
            double diag = 0.0;
            for (int d = 0; d < 2; ++d)
                for (int sign : {-1, 1}) {
                    const double cf_ = face_coeff(cf.c, r, s, d, sign);
                    const int rn = d == 1 ? wrap(r + sign, n) : r;
                    const int sn = d == 0 ? wrap(s + sign, n) : s;
                    trip.emplace_back(P, rn * n + sn, -cf_ / (dx * dx));
                    diag += cf_ / (dx * dx);
                }
            trip.emplace_back(P, P, diag);
            b[P] = (face_coeff(cf.c, r, s, dir, 1) - face_coeff(cf.c, r, s, dir, -1)) / dx;
        }
    Eigen::SparseMatrix<double, Eigen::RowMajor> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());

    const int max_iter = opts.max_iter > 0 ? opts.max_iter : 20 * n * n;
    const CgResult res = cg_mean_free(A, b, Eigen::VectorXd::Ones(N), opts.tol, max_iter);
    if (!res.converged)
        throw ConvergenceError("2D cell problem (i=" + std::to_string(i) + ") did not converge in "
                                   + std::to_string(max_iter) + " iterations",
                               res.history);
    sol.iterations = res.iterations;
    sol.residual_norm = res.relative_residual;
    for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) sol.pi(r, s) = res.x[r * n + s];
    sol.mean = sol.pi.mean();
    return sol;
}

Eigen::MatrixXd cell_flux_residual(const CoefficientField& cf, const CellSolution2D& sol)
{
    const int n = cf.n();
    if (sol.pi.rows() != n || sol.pi.cols() != n) throw ValidationError("grid mismatch");
    const double dx = 1.0 / n;
    const double forcing = sol.k == 1 ? 1.0 : 0.0;
    Eigen::MatrixXd out(n, n);
    for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
            double net = 0.0;
            for (int d = 0; d < 2; ++d)
                for (int sign : {-1, 1}) {
                    const int rn = d == 1 ? wrap(r + sign, n) : r;
                    const int sn = d == 0 ? wrap(s + sign, n) : s;
                    const double grad = sign * (sol.pi(rn, sn) - sol.pi(r, s)) / dx
                                        + (d == sol.i - 1 ? forcing : 0.0);
                    net += sign * face_coeff(cf.c, r, s, d, sign) * grad * dx;
                }
            out(r, s) = net;
        }
    return out;
}

std::pair<Eigen::Matrix2d, Eigen::Matrix2d>
assemble_K0(const CoefficientField& cf, const std::array<std::array<CellSolution2D, 2>, 2>& sols)
{
    const int n = cf.n();
    const double dx = 1.0 / n;
    std::array<Eigen::Matrix2d, 2> K;
    for (int k = 0; k < 2; ++k) {
        K[k].setZero();
        for (int j = 0; j < 2; ++j) {
            const CellSolution2D& s = sols[j][k];
            if (s.pi.rows() != n || s.pi.cols() != n || s.i != j + 1 || s.k != k + 1)
                throw ValidationError("cell solutions do not match the coefficient grid or index");
            for (int i = 0; i < 2; ++i) {
                double acc = 0.0;
                for (int r = 0; r < n; ++r)
                    for (int q = 0; q < n; ++q) {
                        const double d = i == 0
                                             ? (s.pi(r, wrap(q + 1, n)) - s.pi(r, wrap(q - 1, n))) / (2 * dx)
                                             : (s.pi(wrap(r + 1, n), q) - s.pi(wrap(r - 1, n), q)) / (2 * dx);
                        acc += cf.c(r, q) * (d + (i == j && k == 0 ? 1.0 : 0.0));
                    }
                K[k](i, j) = acc / (n * n);
            }
        }
    }
    return {K[0], K[1]};
}

std::pair<Eigen::Matrix2d, Eigen::Matrix2d> assemble_L0(const RoughnessField& rough,
                                                        const MicropolarParams& params)
{
    params.validate();
    double acc = 0.0;
    const auto& h = rough.samples();
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index s = 0; s < h.cols(); ++s) acc += microrotation_mobility(h(r, s), params);
    const double mean = acc / static_cast<double>(h.size());
    return {Eigen::Matrix2d::Zero(), mean * Eigen::Matrix2d::Identity()};
}

Eigen::Vector2d cell_pressure_gradient(const CellSolution2D& sol, double y1, double y2)
{
    const int n = static_cast<int>(sol.pi.rows());
    if (n == 0) return Eigen::Vector2d::Zero();
    const double dx = 1.0 / n;
    const auto grad_at = [&](int r, int s) {
        r = wrap(r, n);
        s = wrap(s, n);
        return Eigen::Vector2d((sol.pi(r, wrap(s + 1, n)) - sol.pi(r, wrap(s - 1, n))) / (2 * dx),
                               (sol.pi(wrap(r + 1, n), s) - sol.pi(wrap(r - 1, n), s)) / (2 * dx));
    };
    const double t1 = (y1 + 0.5) * n - 0.5, t2 = (y2 + 0.5) * n - 0.5;
    const int s0 = static_cast<int>(std::floor(t1)), r0 = static_cast<int>(std::floor(t2));
    const double a = t1 - s0, b = t2 - r0;
    return (1 - a) * (1 - b) * grad_at(r0, s0) + a * (1 - b) * grad_at(r0, s0 + 1)
           + (1 - a) * b * grad_at(r0 + 1, s0) + a * b * grad_at(r0 + 1, s0 + 1);
}

CellVelocity cell_velocity_profile_2d(const Eigen::Vector3d& y, const CellSolution2D& sol,
                                      const RoughnessField& rough, const MicropolarParams& params)
{
    const double h = rough.height(y[0], y[1]);
    if (!(y[2] >= 0.0 && y[2] <= h)) throw DomainError("y3 lies outside the film at this y'");
    Eigen::Vector2d drive = cell_pressure_gradient(sol, y[0], y[1]);
    Eigen::Vector2d moment = Eigen::Vector2d::Zero();
    if (sol.k == 1)
        drive[sol.i - 1] += 1.0;
    else
        moment[sol.i - 1] = -1.0;
    CellVelocity out;
    out.u = profile_u(y[2], h, drive, moment, params);
    out.w = profile_w(y[2], h, drive, moment, params);
    return out;
}

FlowFactors compute_reynolds_factors(const RoughnessField& rough, const MicropolarParams& params,
                                     const Cell2DOptions& opts)
{
    const CoefficientField cf = build_coefficient(rough, params);
    auto f1 = std::async(std::launch::async, [&] { return solve_cell_2d(cf, 1, 1, opts); });
    CellSolution2D s21 = solve_cell_2d(cf, 2, 1, opts);
    std::array<std::array<CellSolution2D, 2>, 2> sols{
        {{f1.get(), solve_cell_2d(cf, 1, 2, opts)}, {s21, solve_cell_2d(cf, 2, 2, opts)}}};
    FlowFactors ff;
    ff.regime = Regime::reynolds;
    ff.lambda = 0.0;
    std::tie(ff.K1, ff.K2) = assemble_K0(cf, sols);
    std::tie(ff.L1, ff.L2) = assemble_L0(rough, params);
    return ff;
}

} // namespace mfilm
