#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>

namespace mfilm {

/// Coupling number N and microrotation length parameter Rc.
/// N = 0 is the Newtonian limit and is accepted as a flagged degenerate case.
struct MicropolarParams {
    double N = 0.0;
    double Rc = 1.0;

    /// Checks 0 <= N < 1 and Rc > 0; throws DomainError otherwise.
    void validate() const;
    bool newtonian() const { return N == 0.0; }
};

enum class RoughnessKind { flat, ridge_x, eggcarton, table };

std::string to_string(RoughnessKind kind);
RoughnessKind roughness_kind_from_string(const std::string& s);

/// Periodic film thickness h(y') on Y' = (-1/2, 1/2)^2.
///
/// Samples are stored at cell centers of an n x n grid, row index over y2 and
/// column index over y1. Analytic presets are evaluated exactly anywhere;
/// tabulated fields are interpolated by periodic bicubic Catmull-Rom splines,
/// which reproduce the samples and have a continuous gradient.
class RoughnessField {
public:
    RoughnessField() = default;

    static RoughnessField preset(RoughnessKind kind, double h0, double amplitude, int n);
    static RoughnessField tabulated(const Eigen::MatrixXd& samples);

    RoughnessKind kind() const { return kind_; }
    double h0() const { return h0_; }
    double amplitude() const { return amplitude_; }
    int n() const { return static_cast<int>(samples_.rows()); }
    const Eigen::MatrixXd& samples() const { return samples_; }
    double h_min() const { return h_min_; }
    double h_max() const { return h_max_; }
    bool is_flat() const { return h_min_ == h_max_; }

    double height(double y1, double y2) const;
    /// (dh/dy1, dh/dy2)
    Eigen::Vector2d gradient(double y1, double y2) const;

    /// Cell-center coordinate -1/2 + (j + 1/2)/n.
    static double center(int j, int n) { return -0.5 + (j + 0.5) / n; }

private:
    RoughnessKind kind_ = RoughnessKind::flat;
    double h0_ = 1.0;
    double amplitude_ = 0.0;
    Eigen::MatrixXd samples_;
    double h_min_ = 1.0;
    double h_max_ = 1.0;
};

/// Analytic presets: flat h = h0; ridge_x h0 + a cos(2 pi y1);
/// eggcarton h0 + a cos(2 pi y1) cos(2 pi y2).
RoughnessField make_roughness(RoughnessKind kind, double h0, double amplitude, int n);

/// Reads an n x n comma-separated table (row = y2 index, column = y1 index).
RoughnessField load_roughness_table(const std::string& path);

enum class Regime { stokes, reynolds, highfreq };
enum class RegimeMode { automatic, stokes, reynolds, highfreq };

std::string to_string(Regime r);
std::string to_string(RegimeMode m);
RegimeMode regime_mode_from_string(const std::string& s);

struct RegimeSpec {
    RegimeMode mode = RegimeMode::automatic;
    double lambda = 1.0;
    std::optional<double> eta;
    std::optional<double> eps;

    void validate() const;
};

struct RegimeThresholds {
    double lo = 0.1;
    double hi = 10.0;
};

struct RegimeClass {
    Regime regime = Regime::stokes;
    /// 0 for reynolds and +inf for highfreq in the explicit modes.
    double lambda = 1.0;
};

RegimeClass classify_regime(const RegimeSpec& spec, RegimeThresholds thresholds = {});

/// Rectangular macroscopic domain with constant horizontal force f and moment g.
struct MacroDomain {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    int nx = 32, ny = 32;
    Eigen::Vector2d f = Eigen::Vector2d::Zero();
    Eigen::Vector2d g = Eigen::Vector2d::Zero();

    void validate() const;
    double dx() const { return (x1 - x0) / nx; }
    double dy() const { return (y1 - y0) / ny; }
};

} // namespace mfilm
