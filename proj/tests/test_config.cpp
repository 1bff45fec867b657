#include "mfilm/config.hpp"
#include "mfilm/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace mfilm;

namespace {

const std::string kConfig = R"({
  "physics": {"N": 0.5, "Rc": 1.0},
  "regime": {"mode": "stokes", "lambda": 2.0},
  "roughness": {"kind": "eggcarton", "h0": 1.0, "amplitude": 0.3, "n": 32},
  "domain": {"x0": 0.0, "x1": 2.0, "y0": -1.0, "y1": 1.0, "nx": 40, "ny": 20, "f": [1.0, 0.25], "g": [0.0, 1.0]},
  "cell": {"n2d": 48, "n3d": [12, 10, 8], "solver_tol": 1e-8, "max_iter": 300},
  "output": {"dir": "out/run", "formats": ["csv", "vtk"]}
})";

std::string replace(std::string s, const std::string& from, const std::string& to)
{
    const auto pos = s.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return s.replace(pos, from.size(), to);
}

void expect_config_error(const std::string& text, const std::string& fragment,
                         const std::vector<std::string>& overrides = {})
{
    try {
        parse_config(text, overrides);
        FAIL() << "expected a config error mentioning " << fragment;
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

} // namespace

TEST(Config, ParsesEveryField)
{
    const RunConfig c = parse_config(kConfig);
    EXPECT_EQ(c.physics.N, 0.5);
    EXPECT_EQ(c.regime.mode, RegimeMode::stokes);
    EXPECT_EQ(c.regime.lambda, 2.0);
    EXPECT_EQ(c.roughness.kind, RoughnessKind::eggcarton);
    EXPECT_EQ(c.roughness.n, 32);
    EXPECT_EQ(c.domain.x1, 2.0);
    EXPECT_EQ(c.domain.y0, -1.0);
    EXPECT_EQ(c.domain.nx, 40);
    EXPECT_EQ(c.domain.f, Eigen::Vector2d(1.0, 0.25));
    EXPECT_EQ(c.domain.g, Eigen::Vector2d(0.0, 1.0));
    EXPECT_EQ(c.cell.n3d, (std::array<int, 3>{12, 10, 8}));
    EXPECT_EQ(c.cell.max_iter, 300);
    EXPECT_EQ(c.output.dir, "out/run");
    EXPECT_TRUE(c.output.wants("vtk"));
}

TEST(Config, RoundTripIsStable)
{
    const RunConfig a = parse_config(kConfig);
    const std::string s = serialize_config(a);
    const RunConfig b = parse_config(s);
    EXPECT_EQ(serialize_config(b), s);
    EXPECT_EQ(b.physics.N, a.physics.N);
    EXPECT_EQ(b.regime.lambda, a.regime.lambda);
    EXPECT_EQ(b.domain.f, a.domain.f);
    EXPECT_EQ(b.cell.solver_tol, a.cell.solver_tol);
    EXPECT_EQ(b.output.formats, a.output.formats);

    // values that need all 17 digits survive
    const RunConfig c = parse_config(kConfig, {"physics.N=0.30000000000000004", "regime.mode=auto",
                                               "regime.eta=1e-3", "regime.eps=3e-3"});
    const RunConfig d = parse_config(serialize_config(c));
    EXPECT_EQ(d.physics.N, 0.30000000000000004);
    ASSERT_TRUE(d.regime.eta && d.regime.eps);
    EXPECT_EQ(*d.regime.eta, 1e-3);
    EXPECT_EQ(*d.regime.eps, 3e-3);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel)
{
    expect_config_error(replace(kConfig, "\"N\": 0.5", "\"N\": 0.5, \"n\": 1"), "physics.n");
    expect_config_error(replace(kConfig, "\"output\"", "\"extra\": 1, \"output\""), "unknown key 'extra'");
    expect_config_error(replace(kConfig, "\"max_iter\"", "\"maxiter\": 3, \"max_iter\""), "cell.maxiter");
    expect_config_error(kConfig, "domain.nz", {"domain.nz=3"});
}

TEST(Config, RejectsMissingKeysAndWrongTypes)
{
    expect_config_error(replace(kConfig, "\"Rc\": 1.0", "\"Rcx\": 1.0"), "physics.Rc");
    expect_config_error(replace(kConfig, ", \"lambda\": 2.0", ""), "regime.lambda");
    expect_config_error(replace(kConfig, "\"nx\": 40", "\"nx\": 40.5"), "domain.nx");
    expect_config_error(replace(kConfig, "\"f\": [1.0, 0.25]", "\"f\": [1.0]"), "domain.f");
    expect_config_error(replace(kConfig, "\"n3d\": [12, 10, 8]", "\"n3d\": [12, 10]"), "cell.n3d");
    expect_config_error(replace(kConfig, "[\"csv\", \"vtk\"]", "\"csv\""), "output.formats");
    expect_config_error("{not json", "not valid JSON");
}

TEST(Config, AutoModeNeedsSmallParameters)
{
    expect_config_error(kConfig, "regime", {"regime.mode=auto"});
    const RunConfig c = parse_config(kConfig, {"regime.mode=auto", "regime.eta=1e-4", "regime.eps=1e-2"});
    EXPECT_EQ(c.regime.mode, RegimeMode::automatic);
}

TEST(Config, ValidatesRanges)
{
    expect_config_error(kConfig, "physics", {"physics.N=1.0"});
    expect_config_error(kConfig, "solver_tol", {"cell.solver_tol=1e-3"});
    expect_config_error(kConfig, "solver_tol", {"cell.solver_tol=0"});
    expect_config_error(kConfig, "h0 > amplitude", {"roughness.amplitude=1.0"});
    expect_config_error(kConfig, "domain", {"domain.nx=1"});
    expect_config_error(kConfig, "output format", {"output.formats=[\"csv\",\"png\"]"});
    expect_config_error(kConfig, "duplicate", {"output.formats=[\"csv\",\"csv\"]"});
    expect_config_error(kConfig, "roughness.kind", {"roughness.kind=bumpy"});
    expect_config_error(kConfig, "table_path", {"roughness.kind=table"});
    expect_config_error(kConfig, "cell.n3d", {"cell.n3d=[8,8,6]"});
    expect_config_error(kConfig, "cell.n2d = roughness.n",
                        {"roughness.kind=table", "roughness.table_path=x.csv"});
}

TEST(Config, OverridesUseDottedKeysAndJsonValues)
{
    const RunConfig c = parse_config(kConfig, {"domain.nx=64", "domain.f=[0, 2]", "output.dir=elsewhere",
                                               "roughness.kind=ridge_x", "cell.n3d=[8,8,10]"});
    EXPECT_EQ(c.domain.nx, 64);
    EXPECT_EQ(c.domain.f, Eigen::Vector2d(0.0, 2.0));
    EXPECT_EQ(c.output.dir, "elsewhere");
    EXPECT_EQ(c.roughness.kind, RoughnessKind::ridge_x);
    EXPECT_EQ(c.cell.n3d[2], 10);
    expect_config_error(kConfig, "key=value", {"domain.nx"});
    expect_config_error(kConfig, "empty component", {"domain..nx=3"});
    expect_config_error(kConfig, "non-object", {"domain.nx.deep=3"});
}

TEST(Config, LoadsFromFileAndBuildsRoughness)
{
    const auto dir = std::filesystem::temp_directory_path() / "mfilm_test_config";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "run.json") << kConfig;
        std::ofstream table(dir / "table.csv");
        for (int r = 0; r < 4; ++r) table << "1.0,1.0,1.0,1.0\n";
    }
    const RunConfig c = load_config((dir / "run.json").string());
    EXPECT_EQ(c.roughness.build().h_min(), 0.7);
    const RunConfig t = load_config((dir / "run.json").string(),
                                    {"roughness.kind=table", "roughness.table_path=" + (dir / "table.csv").string(),
                                     "roughness.n=4", "cell.n2d=4"});
    EXPECT_TRUE(t.roughness.build().is_flat());
    RunConfig bad = t;
    bad.roughness.n = 8;
    EXPECT_THROW(bad.roughness.build(), ValidationError);
    EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
}
