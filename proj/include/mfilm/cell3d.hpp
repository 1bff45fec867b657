#pragma once

#include "mfilm/flow_factors.hpp"
#include "mfilm/params.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <vector>

namespace mfilm {

/// Terrain-following discretization of Y = Y' x (0, h(y')) by y3 = h(y') zeta.
///
/// The computational grid is uniform: n1 x n2 columns over Y' and n3 layers in
/// zeta. Positions are addressed in half-cell units: horizontal p in [0, 2n)
/// with odd p at cell centers and even p at faces (y = p/(2n) - 1/2, periodic),
/// vertical q in [0, 2 n3] with even q at nodes and odd q at cell centers
/// (zeta = q/(2 n3)). Metric terms are tabulated at every half position.
struct CellMesh3D {
    int n1 = 0, n2 = 0, n3 = 0;
    RoughnessField rough;
    Eigen::MatrixXd h;  ///< (2 n2) x (2 n1), row p2, column p1
    Eigen::MatrixXd h1; ///< dh/dy1 at the same positions
    Eigen::MatrixXd h2; ///< dh/dy2 at the same positions

    double hat(int p1, int p2) const { return h(wrap(p2, 2 * n2), wrap(p1, 2 * n1)); }
    double h1at(int p1, int p2) const { return h1(wrap(p2, 2 * n2), wrap(p1, 2 * n1)); }
    double h2at(int p1, int p2) const { return h2(wrap(p2, 2 * n2), wrap(p1, 2 * n1)); }
    bool flat() const { return h1.isZero(0.0) && h2.isZero(0.0); }
    /// max |dh/dy_a| over all tabulated positions, a in {1, 2}
    double max_abs_gradient(int axis) const;

    static int wrap(int p, int m) { return ((p % m) + m) % m; }
};

CellMesh3D build_cell_mesh(const RoughnessField& rough, int n1, int n2, int n3);

/// Unknowns of the discrete cell problem. Staggering (parity per axis,
/// 1 = center/cell, 0 = face/node):
///   u1 (0,1,1), u2 (1,0,1), u3 (1,1,0), pi (1,1,1),
///   w1 (1,0,0), w2 (0,1,0), w3 (0,0,1).
/// Velocity and pressure form a MAC arrangement; the microrotation sits on
/// the dual arrangement so that rot maps each field exactly onto the other.
enum class Field { u1 = 0, u2, u3, w1, w2, w3, pi };
constexpr int kFieldCount = 7;

struct FieldLayout {
    int n1 = 0, n2 = 0, n3 = 0;
    std::array<int, kFieldCount> offset{};
    std::array<int, kFieldCount> layers{};
    int total = 0;

    explicit FieldLayout(int n1_ = 0, int n2_ = 0, int n3_ = 0);
    static std::array<int, 3> parity(Field f);
    int count(Field f) const { return n1 * n2 * layers[static_cast<int>(f)]; }
    /// Index of field f at horizontal cell (i1, i2) and vertical layer l (0-based;
    /// for node fields l = f - 1 with f the interior node number).
    int index(Field f, int i1, int i2, int l) const
    {
        return offset[static_cast<int>(f)] + (l * n2 + i2) * n1 + i1;
    }
    /// Half-unit position of an unknown.
    std::array<int, 3> position(Field f, int i1, int i2, int l) const;
};

struct ResidualReport {
    double momentum = 0.0;       ///< volume-weighted L2 norm of the momentum residual
    double continuity = 0.0;     ///< max |div_lambda u| over cells
    double microrotation = 0.0;  ///< volume-weighted L2 norm of the microrotation residual
    double mean_u3 = 0.0;        ///< |int_Y u3|
    double mean_w3 = 0.0;        ///< |int_Y w3|
    double forcing = 0.0;        ///< volume-weighted L2 norm of the forcing
};

struct CellSolution3D {
    std::shared_ptr<const CellMesh3D> mesh;
    MicropolarParams params;
    double lambda = 1.0;
    int i = 1, k = 1;
    Eigen::VectorXd x;                  ///< all unknowns, see FieldLayout
    double mu_u3 = 0.0, mu_w3 = 0.0;    ///< Lagrange multipliers of the mean constraints
    ResidualReport residuals;

    FieldLayout layout() const { return FieldLayout(mesh->n1, mesh->n2, mesh->n3); }
    /// Values of one field in layout order.
    Eigen::VectorXd field(Field f) const;
    /// int_Y of one field by the midpoint rule with Jacobian h.
    double integral(Field f) const;
};

/// direct: sparse LU of the coupled system. iterative: restarted GMRES
/// preconditioned by the exact flat-film inverse (horizontal FFT plus one
/// banded solve per Fourier mode).
enum class Cell3DSolver { automatic, direct, iterative };

struct Cell3DOptions {
    double tol = 1e-8;
    int max_iter = 400;   ///< GMRES iteration budget per solve
    int restart = 80;     ///< GMRES restart length
    Cell3DSolver solver = Cell3DSolver::automatic;
    /// Unknown count above which `automatic` selects the iterative solver.
    int direct_limit = 5000;
    /// In `automatic` mode a failed GMRES solve is retried with the direct
    /// solver when the unknown count is at most this.
    int fallback_limit = 60000;
};

/// One cell problem (i, k).
CellSolution3D solve_cell_3d(const CellMesh3D& mesh, const MicropolarParams& params, double lambda,
                             int i, int k, const Cell3DOptions& opts = {});

/// All four cell problems sharing one factorization. Indexed [i-1][k-1].
std::array<std::array<CellSolution3D, 2>, 2>
solve_cell_3d_all(const CellMesh3D& mesh, const MicropolarParams& params, double lambda,
                  const Cell3DOptions& opts = {});

/// (K_k)_ij = int_Y u^{i,k}_j, (L_k)_ij = int_Y w^{i,k}_j.
FlowFactors assemble_flow_factors_3d(const std::array<std::array<CellSolution3D, 2>, 2>& solutions);

/// Residuals of the discrete equations at the stored state.
ResidualReport residual_report(const CellSolution3D& solution);

/// Max |div_lambda u| per cell.
double max_divergence(const CellSolution3D& solution);

/// Discrete state whose fields sample the flat-film profiles of the (i, k)
/// problem (pressure zero). Only meaningful for flat roughness.
CellSolution3D flat_film_state(const CellMesh3D& mesh, const MicropolarParams& params, double lambda,
                               int i, int k);

} // namespace mfilm
