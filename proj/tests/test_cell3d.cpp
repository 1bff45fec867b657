#include "mfilm/cell3d.hpp"
#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace mfilm;

namespace {

const MicropolarParams kParams{0.5, 1.0};
constexpr double kPi = std::numbers::pi;

Cell3DOptions with_solver(Cell3DSolver s, int max_iter = 400)
{
    Cell3DOptions o;
    o.solver = s;
    o.max_iter = max_iter;
    return o;
}

// Smooth periodic film without reflection symmetry. The odd part vanishes at
// the outermost sample centers, so the first and last rows/columns coincide.
RoughnessField skewed_table(int n)
{
    const double c = 2.0 * std::cos(kPi / n);
    const auto odd = [&](double y) { return std::sin(4 * kPi * y) + c * std::sin(2 * kPi * y); };
    Eigen::MatrixXd s(n, n);
    for (int r = 0; r < n; ++r)
        for (int q = 0; q < n; ++q) {
            const double y1 = RoughnessField::center(q, n), y2 = RoughnessField::center(r, n);
            s(r, q) = 1.0 + 0.2 * std::cos(2 * kPi * y1) * std::cos(2 * kPi * y2) + 0.06 * odd(y1)
                      + 0.04 * odd(y2) * std::cos(2 * kPi * y1);
        }
    return RoughnessField::tabulated(s);
}

double max_abs(const Eigen::Matrix2d& m) { return m.cwiseAbs().maxCoeff(); }

void expect_contracts(const std::array<std::array<CellSolution3D, 2>, 2>& sols)
{
    for (const auto& row : sols)
        for (const auto& s : row) {
            const ResidualReport& r = s.residuals;
            EXPECT_LE(r.continuity, 1e-9);
            EXPECT_LE(r.mean_u3, 1e-9);
            EXPECT_LE(r.mean_w3, 1e-9);
            EXPECT_LE(r.momentum, 1e-8 * r.forcing);
            EXPECT_LE(r.microrotation, 1e-8 * r.forcing);
            EXPECT_LE(max_divergence(s), 1e-9);
            EXPECT_NEAR(std::fabs(s.integral(Field::u3)), r.mean_u3, 1e-15);
        }
}

} // namespace

TEST(CellMesh, MetricTerms)
{
    const double amp = 0.3;
    const auto egg = build_cell_mesh(make_roughness(RoughnessKind::eggcarton, 1.0, amp, 16), 16, 16, 8);
    EXPECT_NEAR(egg.max_abs_gradient(1), 2 * kPi * amp, 1e-12);
    EXPECT_NEAR(egg.max_abs_gradient(2), 2 * kPi * amp, 1e-12);
    EXPECT_NEAR(egg.h.maxCoeff(), 1.0 + amp, 1e-12);
    EXPECT_NEAR(egg.h.minCoeff(), 1.0 - amp, 1e-12);
    EXPECT_FALSE(egg.flat());

    // the vertical resolution does not enter the metric
    const auto egg2 = build_cell_mesh(egg.rough, 16, 16, 16);
    EXPECT_EQ(egg.h, egg2.h);
    EXPECT_EQ(egg.h1, egg2.h1);
    EXPECT_EQ(egg.h2, egg2.h2);

    const auto flat = build_cell_mesh(make_roughness(RoughnessKind::flat, 0.7, 0.0, 16), 8, 8, 8);
    EXPECT_TRUE(flat.flat());
    EXPECT_EQ(flat.max_abs_gradient(1), 0.0);
    EXPECT_EQ(flat.hat(-3, 17), 0.7);

    EXPECT_THROW(build_cell_mesh(egg.rough, 4, 16, 16), DomainError);
    EXPECT_THROW(build_cell_mesh(egg.rough, 16, 16, 7), DomainError);
}

TEST(FieldLayout, CountsAndPositions)
{
    const FieldLayout L(8, 10, 12);
    EXPECT_EQ(L.total, 8 * 10 * (4 * 12 + 3 * 11));
    EXPECT_EQ(L.count(Field::u3), 8 * 10 * 11);
    EXPECT_EQ(L.count(Field::pi), 8 * 10 * 12);
    EXPECT_EQ(L.index(Field::u1, 0, 0, 0), 0);
    EXPECT_EQ(L.offset[static_cast<int>(Field::pi)] + L.count(Field::pi), L.total);
    const auto p = L.position(Field::w3, 2, 3, 4);
    EXPECT_EQ(p[0], 6);
    EXPECT_EQ(p[1], 8);
    EXPECT_EQ(p[2], 9);
    const auto q = L.position(Field::u3, 0, 0, 0);
    EXPECT_EQ(q[2], 2);
}

TEST(FlatCell, MatchesClosedFormAcrossLambda)
{
    // a flat film has no horizontal structure, so a coarse horizontal grid suffices
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::flat, 1.0, 0.0, 16), 8, 8, 32);
    const double K = classical_micropolar_coefficient(1.0, kParams);
    const double Lm = microrotation_mobility(1.0, kParams);
    for (double lambda : {0.5, 1.0, 2.0}) {
        const auto ff = assemble_flow_factors_3d(solve_cell_3d_all(mesh, kParams, lambda));
        const double eK = std::fabs(ff.K1(0, 0) - K), eL = std::fabs(ff.L2(0, 0) - Lm);
        EXPECT_LE(eK, 0.005 * K) << lambda;
        EXPECT_LE(eL, 0.005 * Lm) << lambda;
        EXPECT_NEAR(ff.K1(1, 1), ff.K1(0, 0), 1e-12);
        EXPECT_NEAR(ff.L2(1, 1), ff.L2(0, 0), 1e-12);
        EXPECT_LE(std::fabs(ff.K1(0, 1)) + std::fabs(ff.L2(0, 1)), 1e-12);
        EXPECT_LE(max_abs(ff.K2), std::min(eK, eL));
        EXPECT_LE(max_abs(ff.L1), std::min(eK, eL));
    }
}

TEST(FlatCell, SecondOrderInLayers)
{
    const double K = classical_micropolar_coefficient(1.0, kParams);
    const double Lm = microrotation_mobility(1.0, kParams);
    double eK[3], eL[3];
    const int n3[3] = {8, 16, 32};
    for (int j = 0; j < 3; ++j) {
        const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::flat, 1.0, 0.0, 16), 8, 8, n3[j]);
        const auto ff = assemble_flow_factors_3d(solve_cell_3d_all(mesh, kParams, 1.0));
        eK[j] = std::fabs(ff.K1(0, 0) - K);
        eL[j] = std::fabs(ff.L2(0, 0) - Lm);
    }
    EXPECT_GE(std::log2(eK[0] / eK[1]), 1.8);
    EXPECT_GE(std::log2(eK[1] / eK[2]), 1.8);
    EXPECT_GE(std::log2(eL[0] / eL[1]), 1.8);
    EXPECT_GE(std::log2(eL[1] / eL[2]), 1.8);
}

TEST(FlatCell, PreconditionerIsExactOnFlatFilm)
{
    // the flat-film preconditioner inverts the flat operator up to the pressure pin
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::flat, 0.8, 0.0, 16), 8, 10, 12);
    const auto it = solve_cell_3d_all(mesh, kParams, 1.0, with_solver(Cell3DSolver::iterative, 6));
    const auto dr = solve_cell_3d_all(mesh, kParams, 1.0, with_solver(Cell3DSolver::direct));
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) EXPECT_LE((it[i][k].x - dr[i][k].x).cwiseAbs().maxCoeff(), 1e-10);
    expect_contracts(it);
}

TEST(Solvers, DirectAndIterativeAgreeOnCurvedFilm)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16), 10, 10, 10);
    const auto it = solve_cell_3d_all(mesh, kParams, 1.0, with_solver(Cell3DSolver::iterative));
    const auto dr = solve_cell_3d_all(mesh, kParams, 1.0, with_solver(Cell3DSolver::direct));
    const auto fi = assemble_flow_factors_3d(it), fd = assemble_flow_factors_3d(dr);
    EXPECT_LE(max_abs(fi.K1 - fd.K1), 1e-10);
    EXPECT_LE(max_abs(fi.K2 - fd.K2), 1e-10);
    EXPECT_LE(max_abs(fi.L1 - fd.L1), 1e-10);
    EXPECT_LE(max_abs(fi.L2 - fd.L2), 1e-10);
    expect_contracts(it);
    expect_contracts(dr);
}

TEST(CurvedCell, EggcartonPositiveDefiniteAndSymmetricUnderQuarterTurn)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16), 16, 16, 16);
    const auto sols = solve_cell_3d_all(mesh, kParams, 1.0);
    expect_contracts(sols);
    const auto ff = assemble_flow_factors_3d(sols);
    EXPECT_GT(ff.min_sym_eigenvalue(), 0.0);
    EXPECT_NEAR(ff.K1(0, 0), ff.K1(1, 1), 1e-10);
    EXPECT_NEAR(ff.L2(0, 0), ff.L2(1, 1), 1e-10);
    EXPECT_LE(std::fabs(ff.K1(0, 1)), 1e-10);
    // roughness hinders the flow: bounded by flat films at h_min and at the mean
    EXPECT_GT(ff.K1(0, 0), classical_micropolar_coefficient(0.7, kParams));
    EXPECT_LT(ff.K1(0, 0), classical_micropolar_coefficient(1.0, kParams));
}

TEST(CurvedCell, RidgeFlowsMoreEasilyAlongGrooves)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::ridge_x, 1.0, 0.4, 16), 16, 8, 16);
    const auto sols = solve_cell_3d_all(mesh, kParams, 1.0);
    expect_contracts(sols);
    const auto ff = assemble_flow_factors_3d(sols);
    EXPECT_GT(ff.K1(1, 1), ff.K1(0, 0));
    EXPECT_LE(std::fabs(ff.K1(0, 1)) + std::fabs(ff.K1(1, 0)), 1e-10);
    EXPECT_GT(ff.min_sym_eigenvalue(), 0.0);
}

TEST(CurvedCell, MeanConstraintsHoldWithoutSymmetry)
{
    const auto mesh = build_cell_mesh(skewed_table(16), 12, 12, 12);
    const auto sols = solve_cell_3d_all(mesh, kParams, 1.0);
    expect_contracts(sols);
    // without reflection symmetry the microrotation mean is held by its multiplier
    double mu = 0.0;
    for (const auto& row : sols)
        for (const auto& s : row) mu = std::max(mu, std::fabs(s.mu_w3));
    EXPECT_GT(mu, 1e-8);
    EXPECT_GT(assemble_flow_factors_3d(sols).min_sym_eigenvalue(), 0.0);
}

TEST(ResidualReport, ZeroAndFlatProfileStates)
{
    const auto flat = make_roughness(RoughnessKind::flat, 1.0, 0.0, 16);
    double res[2], err[2];
    for (int j = 0; j < 2; ++j) {
        const auto mesh = build_cell_mesh(flat, 8, 8, j == 0 ? 16 : 32);
        for (int k : {1, 2}) {
            CellSolution3D s = flat_film_state(mesh, kParams, 1.0, 1, k);
            const ResidualReport r = residual_report(s);
            EXPECT_LE(r.continuity, 1e-13);
            EXPECT_LE(r.mean_u3, 1e-15);
            if (k == 1) {
                res[j] = r.momentum / r.forcing;
                const auto solved = solve_cell_3d(mesh, kParams, 1.0, 1, 1);
                err[j] = (solved.field(Field::u1) - s.field(Field::u1)).cwiseAbs().maxCoeff()
                         / s.field(Field::u1).cwiseAbs().maxCoeff();
            }
            s.x.setZero();
            const ResidualReport z = residual_report(s);
            EXPECT_NEAR((k == 1 ? z.momentum : z.microrotation), z.forcing, 1e-14);
            EXPECT_EQ((k == 1 ? z.microrotation : z.momentum), 0.0);
        }
    }
    // the wall ghost cells carry an O(1) local truncation error on a layer of
    // width dz, so the residual norm decays like dz^(1/2) ...
    EXPECT_LT(res[1], res[0]);
    EXPECT_NEAR(res[0] / res[1], std::sqrt(2.0), 0.1);
    // ... while the solution itself converges at second order
    EXPECT_LT(err[0], 1e-2);
    EXPECT_GE(std::log2(err[0] / err[1]), 1.8);
}

TEST(Determinism, RepeatedSolvesAreBitIdentical)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::eggcarton, 1.0, 0.25, 16), 12, 12, 10);
    const auto a = solve_cell_3d(mesh, kParams, 1.5, 2, 1);
    const auto b = solve_cell_3d(mesh, kParams, 1.5, 2, 1);
    ASSERT_EQ(a.x.size(), b.x.size());
    for (Eigen::Index j = 0; j < a.x.size(); ++j) ASSERT_EQ(a.x[j], b.x[j]);
}

TEST(Errors, InvalidArguments)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::flat, 1.0, 0.0, 16), 8, 8, 8);
    EXPECT_THROW(solve_cell_3d(mesh, kParams, 0.0, 1, 1), DomainError);
    EXPECT_THROW(solve_cell_3d(mesh, kParams, INFINITY, 1, 1), DomainError);
    EXPECT_THROW(solve_cell_3d(mesh, kParams, 1.0, 3, 1), DomainError);
    EXPECT_THROW(solve_cell_3d(mesh, kParams, 1.0, 1, 0), DomainError);
    EXPECT_THROW(solve_cell_3d(mesh, {1.0, 1.0}, 1.0, 1, 1), DomainError);

    auto sols = solve_cell_3d_all(mesh, kParams, 1.0);
    sols[1][0].lambda = 2.0;
    EXPECT_THROW(assemble_flow_factors_3d(sols), ValidationError);
    std::swap(sols[0][0], sols[0][1]);
    EXPECT_THROW(assemble_flow_factors_3d(sols), ValidationError);
}

TEST(Errors, IterationBudgetExhausted)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16), 10, 10, 10);
    try {
        solve_cell_3d(mesh, kParams, 1.0, 1, 1, with_solver(Cell3DSolver::iterative, 3));
        FAIL() << "expected a convergence error";
    } catch (const ConvergenceError& e) {
        EXPECT_FALSE(e.history().empty());
        EXPECT_GT(e.final_residual(), 0.0);
    }
}

TEST(Solvers, AutomaticFallsBackToDirectWhenKrylovStalls)
{
    const auto mesh = build_cell_mesh(make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 16), 8, 8, 8);
    Cell3DOptions opts = with_solver(Cell3DSolver::automatic, 3);
    opts.direct_limit = 0;
    const auto fallback = solve_cell_3d(mesh, kParams, 4.0, 1, 1, opts);
    const auto direct = solve_cell_3d(mesh, kParams, 4.0, 1, 1, with_solver(Cell3DSolver::direct));
    EXPECT_EQ(fallback.x, direct.x);
    opts.fallback_limit = 0;
    EXPECT_THROW(solve_cell_3d(mesh, kParams, 4.0, 1, 1, opts), ConvergenceError);
}
