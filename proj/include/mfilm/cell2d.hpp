#pragma once

#include "mfilm/flow_factors.hpp"
#include "mfilm/params.hpp"

#include <Eigen/Core>

#include <array>
#include <utility>

namespace mfilm {

/// c(y') = h^3 Phi(h) / (1 - N^2) at the cell centers of the roughness grid.
struct CoefficientField {
    Eigen::MatrixXd c; // rows over y2, columns over y1
    int n() const { return static_cast<int>(c.rows()); }
};

CoefficientField build_coefficient(const RoughnessField& rough, const MicropolarParams& params);

struct CellSolution2D {
    Eigen::MatrixXd pi; // rows over y2, columns over y1
    double mean = 0.0;
    double residual_norm = 0.0;
    int i = 1;
    int k = 1;
    int iterations = 0;
};

struct Cell2DOptions {
    double tol = 1e-10;
    /// 0 selects 20 n^2.
    int max_iter = 0;
};

/// Periodic cell problem -div(c (grad pi + e_i delta_1k)) = 0 with zero mean,
/// discretized by cell-centered finite volumes with harmonic face coefficients.
CellSolution2D solve_cell_2d(const CoefficientField& c, int i, int k = 1, const Cell2DOptions& opts = {});

/// Net outward face flux of c (grad pi + e_i delta_1k) per cell, times the cell area.
Eigen::MatrixXd cell_flux_residual(const CoefficientField& c, const CellSolution2D& sol);

/// (K0_1, K0_2) with (K0_k)_ij = <c (d_i pi^{j,k} + delta_ij delta_1k)>, midpoint rule and
/// centered differences. `solutions` is indexed [i-1][k-1].
std::pair<Eigen::Matrix2d, Eigen::Matrix2d>
assemble_K0(const CoefficientField& c, const std::array<std::array<CellSolution2D, 2>, 2>& solutions);

/// (L0_1, L0_2): L0_1 = 0, L0_2 = <microrotation mobility> I.
std::pair<Eigen::Matrix2d, Eigen::Matrix2d> assemble_L0(const RoughnessField& rough,
                                                        const MicropolarParams& params);

struct CellVelocity {
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    Eigen::Vector2d w = Eigen::Vector2d::Zero();
};

/// u^{i,k}, w^{i,k} at y = (y1, y2, y3): the film profiles with drive
/// grad pi + e_i delta_1k and moment -e_i delta_2k.
CellVelocity cell_velocity_profile_2d(const Eigen::Vector3d& y, const CellSolution2D& sol,
                                      const RoughnessField& rough, const MicropolarParams& params);

/// Periodic centered-difference gradient of pi bilinearly interpolated to y'.
Eigen::Vector2d cell_pressure_gradient(const CellSolution2D& sol, double y1, double y2);

/// All four cell problems and the resulting Reynolds-roughness flow factors.
FlowFactors compute_reynolds_factors(const RoughnessField& rough, const MicropolarParams& params,
                                     const Cell2DOptions& opts = {});

} // namespace mfilm
