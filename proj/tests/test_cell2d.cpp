#include "mfilm/cell2d.hpp"
#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace mfilm;

namespace {

const MicropolarParams kParams{0.5, 1.0};

// Composite Simpson rule on a periodic interval with many panels.
template <typename F>
double simpson(F f, double a, double b, int panels = 20000)
{
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

double ridge_c(double y1, const MicropolarParams& p)
{
    return classical_micropolar_coefficient(1.0 + 0.5 * std::cos(2 * std::numbers::pi * y1), p);
}

std::array<std::array<CellSolution2D, 2>, 2> solve_all(const CoefficientField& c)
{
    return {{{solve_cell_2d(c, 1, 1), solve_cell_2d(c, 1, 2)}, {solve_cell_2d(c, 2, 1), solve_cell_2d(c, 2, 2)}}};
}

Eigen::Matrix2d K0_of(const RoughnessField& r, const MicropolarParams& p = kParams)
{
    const auto c = build_coefficient(r, p);
    return assemble_K0(c, solve_all(c)).first;
}

} // namespace

TEST(Coefficient, FlatValueAndLimits)
{
    const auto c = build_coefficient(make_roughness(RoughnessKind::flat, 1.0, 0.0, 16), kParams);
    EXPECT_NEAR(c.c.maxCoeff(), 0.083674469255344807419, 1e-15);
    EXPECT_EQ(c.c.maxCoeff(), c.c.minCoeff());

    const auto egg = make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16);
    const auto cn = build_coefficient(egg, {1e-4, 1.0});
    for (int r = 0; r < 16; ++r)
        for (int s = 0; s < 16; ++s) {
            const double h = egg.samples()(r, s);
            EXPECT_NEAR(cn.c(r, s), h * h * h / 12, 1e-6 * h * h * h / 12);
        }

    const auto ridge = build_coefficient(make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 16), kParams);
    for (int r = 1; r < 16; ++r) EXPECT_EQ((ridge.c.row(r) - ridge.c.row(0)).norm(), 0.0);
}

TEST(Cell2D, TrivialSolutions)
{
    const auto flat = build_coefficient(make_roughness(RoughnessKind::flat, 1.0, 0.0, 32), kParams);
    for (int i : {1, 2}) {
        EXPECT_EQ(solve_cell_2d(flat, i, 1).pi.norm(), 0.0);
        EXPECT_EQ(solve_cell_2d(flat, i, 2).pi.norm(), 0.0);
    }
    const auto egg = build_coefficient(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16), kParams);
    EXPECT_EQ(solve_cell_2d(egg, 1, 2).pi.norm(), 0.0);
    EXPECT_THROW(solve_cell_2d(egg, 3, 1), DomainError);
}

TEST(Cell2D, RidgeReducesToOneDimensionalProblem)
{
    const int n = 64;
    const auto c = build_coefficient(make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, n), kParams);
    const auto s = solve_cell_2d(c, 1, 1);
    EXPECT_NEAR(s.mean, 0.0, 1e-12);
    EXPECT_LE(s.residual_norm, 1e-10);
    for (int r = 1; r < n; ++r) EXPECT_LE((s.pi.row(r) - s.pi.row(0)).cwiseAbs().maxCoeff(), 1e-10);

    // c (d pi/dy1 + 1) = H with H the harmonic mean: pi(y) = int_{-1/2}^{y} (H/c - 1) - mean
    const double H = 1.0 / simpson([](double y) { return 1.0 / ridge_c(y, kParams); }, -0.5, 0.5);
    Eigen::VectorXd ref(n);
    for (int q = 0; q < n; ++q) {
        const double y = RoughnessField::center(q, n);
        ref[q] = simpson([&](double t) { return H / ridge_c(t, kParams) - 1.0; }, -0.5, y, 2000);
    }
    ref.array() -= ref.mean();
    const double scale = ref.cwiseAbs().maxCoeff();
    EXPECT_LE((s.pi.row(0).transpose() - ref).cwiseAbs().maxCoeff(), 2e-3 * scale);
}

TEST(Cell2D, DiscreteConservation)
{
    const auto c = build_coefficient(make_roughness(RoughnessKind::eggcarton, 1.0, 0.4, 48), kParams);
    for (int i : {1, 2}) {
        const auto s = solve_cell_2d(c, i, 1);
        const auto res = cell_flux_residual(c, s);
        EXPECT_LE(res.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(res.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(K0, FlatIsScalar)
{
    const auto c = build_coefficient(make_roughness(RoughnessKind::flat, 1.0, 0.0, 64), kParams);
    const auto [K1, K2] = assemble_K0(c, solve_all(c));
    const double cv = c.c(0, 0);
    EXPECT_LE(std::fabs(K1(0, 1)), 1e-10);
    EXPECT_LE(std::fabs(K1(1, 0)), 1e-10);
    EXPECT_LE(std::fabs(K1(0, 0) - cv), 1e-10 * cv);
    EXPECT_LE(std::fabs(K1(1, 1) - cv), 1e-10 * cv);
    EXPECT_TRUE((K2.array() == 0.0).all());
}

TEST(K0, RidgeMeansAndConvergence)
{
    const double harm = 1.0 / simpson([](double y) { return 1.0 / ridge_c(y, kParams); }, -0.5, 0.5);
    const double arit = simpson([](double y) { return ridge_c(y, kParams); }, -0.5, 0.5);
    std::vector<double> err11;
    for (int n : {32, 64, 128}) {
        const auto K = K0_of(make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, n));
        err11.push_back(std::fabs(K(0, 0) - harm));
        if (n == 128) {
            EXPECT_LE(std::fabs(K(0, 0) - harm), 0.01 * harm);
            EXPECT_LE(std::fabs(K(1, 1) - arit), 0.01 * arit);
            EXPECT_LE(std::fabs(K(0, 1)), 1e-12);
        }
    }
    EXPECT_GE(std::log2(err11[0] / err11[1]), 1.7);
    EXPECT_GE(std::log2(err11[1] / err11[2]), 1.7);
}

TEST(K0, EggcartonSpdBoundsAndOrder)
{
    std::vector<Eigen::Matrix2d> Ks;
    for (int n : {32, 64, 128}) Ks.push_back(K0_of(make_roughness(RoughnessKind::eggcarton, 1.0, 0.4, n)));
    const auto c = build_coefficient(make_roughness(RoughnessKind::eggcarton, 1.0, 0.4, 128), kParams);
    const double harm = 1.0 / c.c.cwiseInverse().mean();
    const double arit = c.c.mean();
    const Eigen::Matrix2d& K = Ks.back();
    EXPECT_LE((K - K.transpose()).norm(), 1e-8 * K.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (K + K.transpose()));
    EXPECT_GT(es.eigenvalues().minCoeff(), harm);
    EXPECT_LT(es.eigenvalues().maxCoeff(), arit);
    const double order = std::log2((Ks[0] - Ks[1]).norm() / (Ks[1] - Ks[2]).norm());
    EXPECT_GE(order, 1.7);
}

TEST(K0, QuarterTurnSwapsDiagonal)
{
    const auto ridge = make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 64);
    const Eigen::MatrixXd rotated = ridge.samples().transpose();
    const auto Kx = K0_of(RoughnessField::tabulated(ridge.samples()));
    const auto Ky = K0_of(RoughnessField::tabulated(rotated));
    EXPECT_NEAR(Kx(0, 0), Ky(1, 1), 1e-10 * Kx(0, 0));
    EXPECT_NEAR(Kx(1, 1), Ky(0, 0), 1e-10 * Kx(1, 1));
}

TEST(L0, Structure)
{
    const auto flat = make_roughness(RoughnessKind::flat, 1.3, 0.0, 16);
    const auto [L1, L2] = assemble_L0(flat, kParams);
    EXPECT_TRUE((L1.array() == 0.0).all());
    const double expect = -1.0 / (4 * 0.125) * std::sqrt(1.0 / 0.75) * psi(1.3, kParams);
    EXPECT_NEAR(L2(0, 0), expect, 1e-14 * expect);
    EXPECT_EQ(L2(0, 1), 0.0);
    const auto egg = assemble_L0(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 32), kParams).second;
    EXPECT_EQ(egg(0, 1), 0.0);
    EXPECT_EQ(egg(1, 0), 0.0);
    EXPECT_EQ(egg(0, 0), egg(1, 1));
}

TEST(CellVelocity, ProfilesAndFilmIntegral)
{
    const auto flat = make_roughness(RoughnessKind::flat, 1.0, 0.0, 16);
    const auto cflat = build_coefficient(flat, kParams);
    const auto s11 = solve_cell_2d(cflat, 1, 1);
    for (double z : {0.2, 0.6}) {
        const auto v = cell_velocity_profile_2d({0.1, -0.2, z}, s11, flat, kParams);
        const auto ref = profile_u(z, 1.0, Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0), kParams);
        EXPECT_NEAR((v.u - ref).norm(), 0.0, 1e-15);
    }
    const auto zero = cell_velocity_profile_2d({0.1, -0.2, 0.0}, s11, flat, kParams);
    EXPECT_EQ(zero.u.norm() + zero.w.norm(), 0.0);

    const auto ridge = make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 64);
    const auto cr = build_coefficient(ridge, kParams);
    const auto s = solve_cell_2d(cr, 1, 1);
    const double y1 = 0.17, y2 = 0.3;
    const double h = ridge.height(y1, y2);
    Eigen::Vector2d integral(simpson([&](double z) { return cell_velocity_profile_2d({y1, y2, z}, s, ridge, kParams).u[0]; }, 0, h, 400),
                             simpson([&](double z) { return cell_velocity_profile_2d({y1, y2, z}, s, ridge, kParams).u[1]; }, 0, h, 400));
    Eigen::Vector2d drive = cell_pressure_gradient(s, y1, y2);
    drive[0] += 1.0;
    const Eigen::Vector2d expect = -classical_micropolar_coefficient(h, kParams) * drive;
    EXPECT_NEAR((integral - expect).norm(), 0.0, 1e-10);
    EXPECT_THROW(cell_velocity_profile_2d({y1, y2, h + 0.01}, s, ridge, kParams), DomainError);
}

TEST(ReynoldsFactors, StructuralZeros)
{
    const auto ff = compute_reynolds_factors(make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 32), kParams);
    EXPECT_TRUE(ff.structural_zeros_hold());
    EXPECT_GT(ff.min_sym_eigenvalue(), 0.0);
    EXPECT_EQ(ff.regime, Regime::reynolds);
}
