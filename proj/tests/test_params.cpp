#include "mfilm/errors.hpp"
#include "mfilm/params.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace mfilm;

namespace {

std::string write_temp(const std::string& name, const std::string& body)
{
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path.string();
}

} // namespace

TEST(Regime, ClassifiesByRatio)
{
    RegimeSpec s;
    s.eta = 1e-3;
    s.eps = 1e-3;
    auto c = classify_regime(s, {0.1, 10});
    EXPECT_EQ(c.regime, Regime::stokes);
    EXPECT_EQ(c.lambda, 1.0);

    s.eta = 1e-4;
    s.eps = 1e-2;
    c = classify_regime(s);
    EXPECT_EQ(c.regime, Regime::reynolds);
    EXPECT_NEAR(c.lambda, 0.01, 1e-16);

    s.eta = 1e-2;
    s.eps = 1e-4;
    c = classify_regime(s);
    EXPECT_EQ(c.regime, Regime::highfreq);
    EXPECT_NEAR(c.lambda, 100.0, 1e-12);
}

TEST(Regime, ScaleInvariant)
{
    for (double eta : {2e-5, 3e-3, 0.2})
        for (double eps : {1e-4, 7e-3, 0.05})
            for (double c : {1e-3, 0.37, 12.0, 1e4}) {
                RegimeSpec a, b;
                a.eta = eta, a.eps = eps;
                b.eta = c * eta, b.eps = c * eps;
                const auto ra = classify_regime(a), rb = classify_regime(b);
                EXPECT_EQ(ra.regime, rb.regime);
                EXPECT_NEAR(ra.lambda, rb.lambda, 4e-16 * ra.lambda);
            }
}

TEST(Regime, Errors)
{
    RegimeSpec s;
    EXPECT_THROW(classify_regime(s), DomainError);
    s.eta = -1.0;
    s.eps = 1.0;
    EXPECT_THROW(classify_regime(s), DomainError);
    s.mode = RegimeMode::stokes;
    s.lambda = 0.0;
    EXPECT_THROW(classify_regime(s), DomainError);
    s.lambda = 2.5;
    EXPECT_EQ(classify_regime(s).lambda, 2.5);
    s.mode = RegimeMode::highfreq;
    EXPECT_TRUE(std::isinf(classify_regime(s).lambda));
}

TEST(Roughness, PresetExtrema)
{
    auto f = make_roughness(RoughnessKind::flat, 1.0, 0.0, 16);
    EXPECT_EQ(f.h_min(), 1.0);
    EXPECT_EQ(f.h_max(), 1.0);
    auto r = make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 64);
    EXPECT_EQ(r.h_min(), 0.5);
    EXPECT_EQ(r.h_max(), 1.5);
    auto e = make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 64);
    EXPECT_NEAR(e.h_min(), 0.7, 1e-15);
    EXPECT_NEAR(e.h_max(), 1.3, 1e-15);
}

TEST(Roughness, SamplesWithinBoundsAndRefinementStable)
{
    for (auto kind : {RoughnessKind::flat, RoughnessKind::ridge_x, RoughnessKind::eggcarton})
        for (double a : {0.0, 0.2, 0.9}) {
            auto r = make_roughness(kind, 1.0, a, 32);
            EXPECT_GT(r.h_min(), 0.0);
            EXPECT_GE(r.samples().minCoeff(), r.h_min());
            EXPECT_LE(r.samples().maxCoeff(), r.h_max());
            auto r2 = make_roughness(kind, 1.0, a, 64);
            EXPECT_EQ(r.h_min(), r2.h_min());
            EXPECT_EQ(r.h_max(), r2.h_max());
        }
}

TEST(Roughness, SampleLayoutRowIsY2)
{
    auto r = make_roughness(RoughnessKind::ridge_x, 1.0, 0.5, 8);
    // ridge_x varies along columns (y1) only
    for (int i = 1; i < 8; ++i) EXPECT_EQ((r.samples().row(i) - r.samples().row(0)).norm(), 0.0);
    EXPECT_DOUBLE_EQ(r.samples()(0, 3), 1.0 + 0.5 * std::cos(2 * std::numbers::pi * RoughnessField::center(3, 8)));
}

TEST(Roughness, PositivityViolation)
{
    EXPECT_THROW(make_roughness(RoughnessKind::ridge_x, 1.0, 1.0, 16), ValidationError);
    EXPECT_THROW(make_roughness(RoughnessKind::eggcarton, 0.5, 0.7, 16), ValidationError);
    EXPECT_THROW(make_roughness(RoughnessKind::flat, 1.0, 0.0, 3), DomainError);
}

TEST(Roughness, AnalyticGradient)
{
    auto e = make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, 16);
    const double d = 1e-6;
    for (double y1 : {-0.41, 0.03, 0.27})
        for (double y2 : {-0.3, 0.11}) {
            const auto g = e.gradient(y1, y2);
            EXPECT_NEAR(g[0], (e.height(y1 + d, y2) - e.height(y1 - d, y2)) / (2 * d), 1e-8);
            EXPECT_NEAR(g[1], (e.height(y1, y2 + d) - e.height(y1, y2 - d)) / (2 * d), 1e-8);
        }
}

TEST(Roughness, TableInterpolationIsSmoothAndExactAtSamples)
{
    const int n = 64;
    auto e = make_roughness(RoughnessKind::eggcarton, 1.0, 0.3, n);
    auto t = RoughnessField::tabulated(e.samples());
    EXPECT_EQ(t.kind(), RoughnessKind::table);
    for (int i = 0; i < n; i += 7)
        for (int j = 0; j < n; j += 5)
            EXPECT_NEAR(t.height(RoughnessField::center(j, n), RoughnessField::center(i, n)),
                        e.samples()(i, j), 1e-14);
    // off-sample agreement with the analytic field (cubic interpolation error)
    for (double y1 : {-0.5, -0.13, 0.25, 0.49})
        for (double y2 : {-0.37, 0.0, 0.5}) {
            EXPECT_NEAR(t.height(y1, y2), e.height(y1, y2), 1e-4);
            EXPECT_NEAR((t.gradient(y1, y2) - e.gradient(y1, y2)).norm(), 0.0, 2e-2);
        }
}

TEST(Roughness, LoadTable)
{
    auto ok = load_roughness_table(write_temp("mf_ok.csv", "1,1,1,1\n1,1,1,1\n1.0, 1.0 ,1,1\n1,1,1,1\n"));
    EXPECT_EQ(ok.h_min(), 1.0);
    EXPECT_TRUE(ok.is_flat());
    EXPECT_THROW(load_roughness_table(write_temp("mf_zero.csv", "1,1,1,1\n1,0.0,1,1\n1,1,1,1\n1,1,1,1\n")),
                 ValidationError);
    EXPECT_THROW(load_roughness_table(write_temp("mf_shape.csv", "1,1,1,1\n1,1,1,1\n1,1,1,1\n")),
                 ValidationError);
    EXPECT_THROW(load_roughness_table(write_temp("mf_nonper.csv", "1,1,1,2\n1,1,1,2\n1,1,1,2\n1,1,1,2\n")),
                 ValidationError);
    EXPECT_THROW(load_roughness_table(write_temp("mf_junk.csv", "1,1,x,1\n1,1,1,1\n1,1,1,1\n1,1,1,1\n")),
                 ValidationError);
    EXPECT_THROW(load_roughness_table("/nonexistent/table.csv"), ValidationError);
}

TEST(Params, Validation)
{
    EXPECT_NO_THROW((MicropolarParams{0.0, 1.0}.validate()));
    EXPECT_TRUE((MicropolarParams{0.0, 1.0}.newtonian()));
    EXPECT_THROW((MicropolarParams{1.0, 1.0}.validate()), DomainError);
    EXPECT_THROW((MicropolarParams{0.5, 0.0}.validate()), DomainError);
    MacroDomain d;
    EXPECT_NO_THROW(d.validate());
    d.nx = 1;
    EXPECT_THROW(d.validate(), DomainError);
}
