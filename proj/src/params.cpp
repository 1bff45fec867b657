#include "mfilm/params.hpp"

#include "mfilm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace mfilm {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Catmull-Rom weights for the four nodes around fractional position t.
void catmull_rom(double t, double w[4], double dw[4])
{
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
    dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
    dw[1] = 0.5 * (9.0 * t2 - 10.0 * t);
    dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
    dw[3] = 0.5 * (3.0 * t2 - 2.0 * t);
}

int wrap(int i, int n) { return ((i % n) + n) % n; }

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

void MicropolarParams::validate() const
{
    if (!(N >= 0.0 && N < 1.0))
        throw DomainError("coupling number N must satisfy 0 <= N < 1, got " + std::to_string(N));
    if (!(Rc > 0.0) || !std::isfinite(Rc))
        throw DomainError("Rc must be positive and finite, got " + std::to_string(Rc));
}

std::string to_string(RoughnessKind kind)
{
    switch (kind) {
    case RoughnessKind::flat: return "flat";
    case RoughnessKind::ridge_x: return "ridge_x";
    case RoughnessKind::eggcarton: return "eggcarton";
    case RoughnessKind::table: return "table";
    }
    return "?";
}

RoughnessKind roughness_kind_from_string(const std::string& s)
{
    if (s == "flat") return RoughnessKind::flat;
    if (s == "ridge_x") return RoughnessKind::ridge_x;
    if (s == "eggcarton") return RoughnessKind::eggcarton;
    if (s == "table") return RoughnessKind::table;
    throw DomainError("unknown roughness kind '" + s + "'");
}

RoughnessField RoughnessField::preset(RoughnessKind kind, double h0, double amplitude, int n)
{
    if (kind == RoughnessKind::table)
        throw DomainError("table roughness must be loaded from samples");
    if (n < 4) throw DomainError("roughness resolution n must be >= 4");
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw DomainError("roughness amplitude must be >= 0");
    if (!(h0 > 0.0) || !std::isfinite(h0))
        throw ValidationError("positivity violation: h0 must be > 0");
    if (kind != RoughnessKind::flat && !(h0 > amplitude))
        throw ValidationError("positivity violation: h0 must exceed the amplitude");

    RoughnessField r;
    r.kind_ = kind;
    r.h0_ = h0;
    r.amplitude_ = kind == RoughnessKind::flat ? 0.0 : amplitude;
    r.samples_.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            r.samples_(i, j) = r.height(center(j, n), center(i, n));
    r.h_min_ = h0 - r.amplitude_;
    r.h_max_ = h0 + r.amplitude_;
    return r;
}

RoughnessField RoughnessField::tabulated(const Eigen::MatrixXd& samples)
{
    const Eigen::Index n = samples.rows();
    if (n != samples.cols()) throw ValidationError("roughness table must be square");
    if (n < 4) throw ValidationError("roughness table must be at least 4 x 4");
    if (!samples.allFinite()) throw ValidationError("roughness table has non-finite entries");
    if (samples.minCoeff() <= 0.0)
        throw ValidationError("positivity violation: roughness table has a non-positive entry");
    const double hmax = samples.maxCoeff();
    const double tol = 1e-12 * hmax;
    const double row_gap = (samples.row(0) - samples.row(n - 1)).cwiseAbs().maxCoeff();
    const double col_gap = (samples.col(0) - samples.col(n - 1)).cwiseAbs().maxCoeff();
    if (row_gap > tol || col_gap > tol)
        throw ValidationError("roughness table violates periodicity: opposite edges differ by "
                              + std::to_string(std::max(row_gap, col_gap)));
    RoughnessField r;
    r.kind_ = RoughnessKind::table;
    r.samples_ = samples;
    r.h_min_ = samples.minCoeff();
    r.h_max_ = hmax;
    r.h0_ = samples.mean();
    r.amplitude_ = 0.5 * (r.h_max_ - r.h_min_);
    return r;
}

double RoughnessField::height(double y1, double y2) const
{
    switch (kind_) {
    case RoughnessKind::flat: return h0_;
    case RoughnessKind::ridge_x: return h0_ + amplitude_ * std::cos(two_pi * y1);
    case RoughnessKind::eggcarton:
        return h0_ + amplitude_ * std::cos(two_pi * y1) * std::cos(two_pi * y2);
    case RoughnessKind::table: break;
    }
    const int n = this->n();
    const double s1 = (y1 + 0.5) * n - 0.5, s2 = (y2 + 0.5) * n - 0.5;
    const int j0 = static_cast<int>(std::floor(s1)), i0 = static_cast<int>(std::floor(s2));
    double w1[4], d1[4], w2[4], d2[4];
    catmull_rom(s1 - j0, w1, d1);
    catmull_rom(s2 - i0, w2, d2);
    double v = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            v += w2[a] * w1[b] * samples_(wrap(i0 - 1 + a, n), wrap(j0 - 1 + b, n));
    return v;
}

Eigen::Vector2d RoughnessField::gradient(double y1, double y2) const
{
    switch (kind_) {
    case RoughnessKind::flat: return Eigen::Vector2d::Zero();
    case RoughnessKind::ridge_x:
        return {-two_pi * amplitude_ * std::sin(two_pi * y1), 0.0};
    case RoughnessKind::eggcarton:
        return {-two_pi * amplitude_ * std::sin(two_pi * y1) * std::cos(two_pi * y2),
                -two_pi * amplitude_ * std::cos(two_pi * y1) * std::sin(two_pi * y2)};
    case RoughnessKind::table: break;
    }
    const int n = this->n();
    const double s1 = (y1 + 0.5) * n - 0.5, s2 = (y2 + 0.5) * n - 0.5;
    const int j0 = static_cast<int>(std::floor(s1)), i0 = static_cast<int>(std::floor(s2));
    double w1[4], d1[4], w2[4], d2[4];
    catmull_rom(s1 - j0, w1, d1);
    catmull_rom(s2 - i0, w2, d2);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double s = samples_(wrap(i0 - 1 + a, n), wrap(j0 - 1 + b, n));
            g[0] += w2[a] * d1[b] * s;
            g[1] += d2[a] * w1[b] * s;
        }
    return g * n;
}

RoughnessField make_roughness(RoughnessKind kind, double h0, double amplitude, int n)
{
    return RoughnessField::preset(kind, h0, amplitude, n);
}

RoughnessField load_roughness_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open roughness table '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string t = trim(cell);
            double v = 0.0;
            const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
                throw ValidationError("roughness table line " + std::to_string(lineno)
                                      + ": cannot parse '" + t + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    for (const auto& r : rows)
        if (r.size() != n)
            throw ValidationError("roughness table shape error: expected " + std::to_string(n)
                                  + " columns per row for a square table, got "
                                  + std::to_string(r.size()));
    if (n == 0) throw ValidationError("roughness table is empty");
    Eigen::MatrixXd s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = rows[i][j];
    return RoughnessField::tabulated(s);
}

std::string to_string(Regime r)
{
    switch (r) {
    case Regime::stokes: return "stokes";
    case Regime::reynolds: return "reynolds";
    case Regime::highfreq: return "highfreq";
    }
    return "?";
}

std::string to_string(RegimeMode m)
{
    switch (m) {
    case RegimeMode::automatic: return "auto";
    case RegimeMode::stokes: return "stokes";
    case RegimeMode::reynolds: return "reynolds";
    case RegimeMode::highfreq: return "highfreq";
    }
    return "?";
}

RegimeMode regime_mode_from_string(const std::string& s)
{
    if (s == "auto") return RegimeMode::automatic;
    if (s == "stokes") return RegimeMode::stokes;
    if (s == "reynolds") return RegimeMode::reynolds;
    if (s == "highfreq") return RegimeMode::highfreq;
    throw DomainError("unknown regime mode '" + s + "'");
}

void RegimeSpec::validate() const
{
    if (mode == RegimeMode::stokes && !(lambda > 0.0 && std::isfinite(lambda)))
        throw DomainError("stokes regime requires 0 < lambda < inf");
    if (mode == RegimeMode::automatic) {
        if (!eta || !eps) throw DomainError("auto regime requires both eta and eps");
        if (!(*eta > 0.0) || !(*eps > 0.0))
            throw DomainError("eta and eps must be positive");
    }
}

RegimeClass classify_regime(const RegimeSpec& spec, RegimeThresholds t)
{
    if (!(t.lo > 0.0 && t.lo < t.hi)) throw DomainError("thresholds must satisfy 0 < lo < hi");
    spec.validate();
    switch (spec.mode) {
    case RegimeMode::stokes: return {Regime::stokes, spec.lambda};
    case RegimeMode::reynolds: return {Regime::reynolds, 0.0};
    case RegimeMode::highfreq:
        return {Regime::highfreq, std::numeric_limits<double>::infinity()};
    case RegimeMode::automatic: break;
    }
    const double lambda = *spec.eta / *spec.eps;
    if (lambda < t.lo) return {Regime::reynolds, lambda};
    if (lambda > t.hi) return {Regime::highfreq, lambda};
    return {Regime::stokes, lambda};
}

void MacroDomain::validate() const
{
    if (!(x1 > x0) || !(y1 > y0)) throw DomainError("domain requires x1 > x0 and y1 > y0");
    if (nx < 2 || ny < 2) throw DomainError("domain requires nx >= 2 and ny >= 2");
    if (!f.allFinite() || !g.allFinite()) throw DomainError("forces must be finite");
}

} // namespace mfilm
