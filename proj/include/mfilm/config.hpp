#pragma once

#include "mfilm/params.hpp"

#include <array>
#include <string>
#include <vector>

namespace mfilm {

/// Roughness descriptor as written in a run configuration.
struct RoughnessSpec {
    RoughnessKind kind = RoughnessKind::flat;
    double h0 = 1.0;
    double amplitude = 0.0;
    std::string table_path; ///< only for kind = table
    int n = 32;

    /// Preset or loaded table; a table must have n rows.
    RoughnessField build() const;
};

struct CellSettings {
    int n2d = 64;
    std::array<int, 3> n3d{16, 16, 16};
    double solver_tol = 1e-8;
    int max_iter = 400;
};

struct OutputSettings {
    std::string dir = "out";
    std::vector<std::string> formats{"csv"}; ///< subset of {csv, vtk}

    bool wants(const std::string& format) const;
};

struct RunConfig {
    MicropolarParams physics;
    RegimeSpec regime;
    RoughnessSpec roughness;
    MacroDomain domain;
    CellSettings cell;
    OutputSettings output;

    /// Checks every sub-invariant; throws ConfigError naming the offending key.
    void validate() const;
};

/// Parses a configuration document. Unknown keys, missing required keys and
/// wrong value types are rejected with ConfigError. Each override is a
/// `dotted.key=value` pair applied before validation; the value is parsed as
/// JSON and falls back to a plain string.
RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical JSON with fixed key order and round-trip float formatting.
std::string serialize_config(const RunConfig& config);

} // namespace mfilm
