#pragma once

#include "mfilm/flow_factors.hpp"
#include "mfilm/params.hpp"

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <utility>

namespace mfilm {

/// Data of div(-A grad P + b) = 0 on the macroscopic rectangle, sampled at
/// the flux quadrature points.
struct ReynoldsCoefficients {
    std::function<Eigen::Matrix2d(double x, double y)> A;
    std::function<Eigen::Vector2d(double x, double y)> b;

    static ReynoldsCoefficients constant(const Eigen::Matrix2d& A, const Eigen::Vector2d& b);
    /// A = K1, b = K1 f + K2 g.
    static ReynoldsCoefficients from_factors(const FlowFactors& ff, const Eigen::Vector2d& f,
                                             const Eigen::Vector2d& g);
};

struct ReynoldsOptions {
    double tol = 1e-10;
    /// 0 selects 10 (nx+1)(ny+1).
    int max_iter = 0;
};

/// Vertex-centred finite-volume solution of the Reynolds problem.
///
/// Nodes sit at (x0 + i dx, y0 + j dy), i = 0..nx, j = 0..ny. Each node owns the
/// dual cell bounded by element centres and edge midpoints; every element
/// carries four interior sub-faces with the normal flux (-A grad P + b).n |face|
/// evaluated at the sub-face midpoint from the bilinear interpolant of P.
/// Sub-face order per element (local nodes 00, 10, 01, 11):
///   0: 00 -> 10, 1: 01 -> 11 (normal +x), 2: 00 -> 01, 3: 10 -> 11 (normal +y).
/// Boundary faces carry zero flux by construction.
struct PressureField {
    MacroDomain domain;
    Eigen::MatrixXd P;        ///< (nx+1) x (ny+1), P(i, j)
    double mean = 0.0;        ///< area-weighted mean of P (zero up to rounding)
    Eigen::MatrixXd flux;     ///< (nx ny) x 4 sub-face fluxes, element e = j nx + i
    Eigen::MatrixXd U1, U2;   ///< averaged velocity at the nodes
    Eigen::MatrixXd W1, W2;   ///< averaged microrotation at the nodes
    int iterations = 0;
    double relative_residual = 0.0;

    double x(int i) const { return domain.x0 + i * domain.dx(); }
    double y(int j) const { return domain.y0 + j * domain.dy(); }
    /// Second-order nodal gradient (centred inside, one-sided on the boundary).
    Eigen::Vector2d gradient(int i, int j) const;
};

PressureField solve_reynolds(const MacroDomain& domain, const ReynoldsCoefficients& coeffs,
                             const ReynoldsOptions& opts = {});

/// Constant flow factors with the drives stored in the domain.
PressureField solve_reynolds(const MacroDomain& domain, const FlowFactors& factors,
                             const ReynoldsOptions& opts = {});

/// U = K1 (f - grad P) + K2 g, W = L1 (f - grad P) + L2 g at every node. In the
/// high-frequency regime W = 0.
PressureField reconstruct_UW(PressureField field, const FlowFactors& factors, const Eigen::Vector2d& f,
                             const Eigen::Vector2d& g);

/// U = -A grad P + b at every node, W = 0.
PressureField reconstruct_U(PressureField field, const ReynoldsCoefficients& coeffs);

/// Film profiles (u', w') at node (i, j) and height y3 of the high-frequency
/// regime: flat film of thickness h_min driven by grad P - f, no microrotation source.
std::pair<Eigen::Vector2d, Eigen::Vector2d> highfreq_profiles(double y3, const PressureField& field, int i,
                                                              int j, const MicropolarParams& params,
                                                              double h_min);

struct FluxReport {
    double max_divergence = 0.0;       ///< max over dual cells of |net outflow| / area
    double net_boundary_flux = 0.0;    ///< sum of all net outflows (telescopes to the boundary flux)
    double total_flux = 0.0;           ///< sum of |sub-face flux|
    double max_nodal_divergence = 0.0; ///< max central-difference div U over interior nodes
};

/// `margin` (fraction of each extent) drops nodes near the boundary from the
/// nodal divergence. With off-diagonal A the reconstructed U is only first-order
/// accurate in a one-cell boundary layer, so the nodal divergence there does not
/// shrink under refinement.
FluxReport flux_diagnostics(const PressureField& field, double margin = 0.0);

/// Columns x,y,P,U1,U2,W1,W2; x varies fastest.
void write_pressure_csv(std::ostream& os, const PressureField& field);

/// Legacy ASCII STRUCTURED_POINTS with `pressure`, `velocity_avg`, `microrotation_avg`.
void write_pressure_vtk(std::ostream& os, const PressureField& field);

} // namespace mfilm
