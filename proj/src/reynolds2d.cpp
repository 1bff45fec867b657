#include "mfilm/reynolds2d.hpp"

#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"
#include "mfilm/format.hpp"
#include "mfilm/krylov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace mfilm {

namespace {

// Interior sub-faces of an element; local nodes 0 = 00, 1 = 10, 2 = 01, 3 = 11.
struct SubFace {
    int from, to;
    double xi, eta; // midpoint in local coordinates
    int normal;     // 0: +x, 1: +y
};
constexpr SubFace kFaces[4] = {{0, 1, 0.5, 0.25, 0}, {2, 3, 0.5, 0.75, 0}, {0, 2, 0.25, 0.5, 1}, {1, 3, 0.75, 0.5, 1}};

// d/dx and d/dy of the bilinear interpolant at (xi, eta) as weights on the 4 local nodes.
void grad_weights(double xi, double eta, double dx, double dy, double gx[4], double gy[4])
{
    gx[0] = -(1 - eta) / dx, gx[1] = (1 - eta) / dx, gx[2] = -eta / dx, gx[3] = eta / dx;
    gy[0] = -(1 - xi) / dy, gy[1] = -xi / dy, gy[2] = (1 - xi) / dy, gy[3] = xi / dy;
}

struct Grid {
    int nx, ny;
    double dx, dy;
    int node(int i, int j) const { return j * (nx + 1) + i; }
    void element_nodes(int i, int j, int out[4]) const
    {
        out[0] = node(i, j), out[1] = node(i + 1, j), out[2] = node(i, j + 1), out[3] = node(i + 1, j + 1);
    }
    double area(int i, int j) const
    {
        const double wx = (i == 0 || i == nx) ? 0.5 : 1.0, wy = (j == 0 || j == ny) ? 0.5 : 1.0;
        return wx * wy * dx * dy;
    }
};

Grid grid_of(const MacroDomain& d) { return {d.nx, d.ny, d.dx(), d.dy()}; }

double face_length(const Grid& g, int normal) { return normal == 0 ? 0.5 * g.dy : 0.5 * g.dx; }

Eigen::Vector2d face_point(const MacroDomain& d, int i, int j, const SubFace& f)
{
    return {d.x0 + (i + f.xi) * d.dx(), d.y0 + (j + f.eta) * d.dy()};
}

void check_coefficients(const MacroDomain& d, const ReynoldsCoefficients& c, bool& symmetric)
{
    if (!c.A || !c.b) throw ValidationError("Reynolds coefficients are not set");
    symmetric = true;
    for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
            const Eigen::Matrix2d A = c.A(d.x0 + (i + 0.5) * d.dx(), d.y0 + (j + 0.5) * d.dy());
            if (!A.allFinite()) throw ConditioningError("non-finite flow factor A");
            const Eigen::Matrix2d S = 0.5 * (A + A.transpose());
            if (!(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(S, Eigen::EigenvaluesOnly).eigenvalues()[0] > 0.0))
                throw ConditioningError("flow factor A is not positive definite");
            if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-14 * A.cwiseAbs().maxCoeff()) symmetric = false;
        }
}

// Sub-face fluxes of a nodal field P.
Eigen::MatrixXd face_fluxes(const MacroDomain& d, const ReynoldsCoefficients& c, const Eigen::VectorXd& P)
{
    const Grid g = grid_of(d);
    Eigen::MatrixXd flux(static_cast<Eigen::Index>(d.nx) * d.ny, 4);
    double gx[4], gy[4];
    int nodes[4];
    for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
            g.element_nodes(i, j, nodes);
            for (int s = 0; s < 4; ++s) {
                const SubFace& f = kFaces[s];
                const Eigen::Vector2d pt = face_point(d, i, j, f);
                const Eigen::Matrix2d A = c.A(pt[0], pt[1]);
                const Eigen::Vector2d b = c.b(pt[0], pt[1]);
                grad_weights(f.xi, f.eta, g.dx, g.dy, gx, gy);
                Eigen::Vector2d grad = Eigen::Vector2d::Zero();
                for (int k = 0; k < 4; ++k) grad += Eigen::Vector2d(gx[k], gy[k]) * P[nodes[k]];
                flux(j * d.nx + i, s) = (-(A * grad) + b)[f.normal] * face_length(g, f.normal);
            }
        }
    return flux;
}

} // namespace

ReynoldsCoefficients ReynoldsCoefficients::constant(const Eigen::Matrix2d& A, const Eigen::Vector2d& b)
{
    return {[A](double, double) { return A; }, [b](double, double) { return b; }};
}

ReynoldsCoefficients ReynoldsCoefficients::from_factors(const FlowFactors& ff, const Eigen::Vector2d& f,
                                                        const Eigen::Vector2d& g)
{
    return constant(ff.A(), ff.b(f, g));
}

Eigen::Vector2d PressureField::gradient(int i, int j) const
{
    // three-point differences: centred inside, one-sided on the boundary
    const auto d3 = [](double a, double b, double c, int k, int n, double h) {
        if (k == 0) return (-3.0 * a + 4.0 * b - c) / (2.0 * h);
        if (k == n) return (a - 4.0 * b + 3.0 * c) / (2.0 * h);
        return (c - a) / (2.0 * h);
    };
    const int nx = domain.nx, ny = domain.ny;
    const int ix = std::clamp(i, 1, nx - 1), jy = std::clamp(j, 1, ny - 1);
    return {d3(P(ix - 1, j), P(ix, j), P(ix + 1, j), i, nx, domain.dx()),
            d3(P(i, jy - 1), P(i, jy), P(i, jy + 1), j, ny, domain.dy())};
}

PressureField solve_reynolds(const MacroDomain& domain, const ReynoldsCoefficients& coeffs,
                             const ReynoldsOptions& opts)
{
    domain.validate();
    if (!(opts.tol > 0.0)) throw DomainError("Reynolds solver tolerance must be positive");
    bool symmetric = true;
    check_coefficients(domain, coeffs, symmetric);
    const Grid g = grid_of(domain);
    const int n = (domain.nx + 1) * (domain.ny + 1);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(domain.nx) * domain.ny * 32);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    double gx[4], gy[4];
    int nodes[4];
    for (int j = 0; j < domain.ny; ++j)
        for (int i = 0; i < domain.nx; ++i) {
            g.element_nodes(i, j, nodes);
            for (const SubFace& f : kFaces) {
                const Eigen::Vector2d pt = face_point(domain, i, j, f);
                const Eigen::Matrix2d A = coeffs.A(pt[0], pt[1]);
                const double len = face_length(g, f.normal);
                const double beta = coeffs.b(pt[0], pt[1])[f.normal] * len;
                grad_weights(f.xi, f.eta, g.dx, g.dy, gx, gy);
                const int a = nodes[f.from], b = nodes[f.to];
                for (int k = 0; k < 4; ++k) {
                    const double c = -len * (A(f.normal, 0) * gx[k] + A(f.normal, 1) * gy[k]);
                    if (c == 0.0) continue;
                    trip.emplace_back(a, nodes[k], c);
                    trip.emplace_back(b, nodes[k], -c);
                }
                rhs[a] -= beta;
                rhs[b] += beta;
            }
        }
    // Compatibility of the pure-Neumann problem: every flux enters one row and leaves another.
    const double scale = rhs.cwiseAbs().sum();
    if (std::fabs(rhs.sum()) > 1e-12 * std::max(scale, 1.0))
        throw ValidationError("Reynolds right-hand side is not mean-free");

    Eigen::VectorXd w(n);
    for (int j = 0; j <= domain.ny; ++j)
        for (int i = 0; i <= domain.nx; ++i) w[g.node(i, j)] = g.area(i, j);

    PressureField out;
    out.domain = domain;
    Eigen::VectorXd P;
    if (symmetric) {
        Eigen::SparseMatrix<double, Eigen::RowMajor> M(n, n);
        M.setFromTriplets(trip.begin(), trip.end());
        const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * n;
        CgResult cg = cg_mean_free(M, rhs, w, opts.tol, max_iter);
        if (!cg.converged)
            throw ConvergenceError("Reynolds CG did not converge (residual " + format_double(cg.relative_residual) + ")",
                                   std::move(cg.history));
        P = std::move(cg.x);
        out.iterations = cg.iterations;
        out.relative_residual = cg.relative_residual;
    } else {
        // non-symmetric A: bordered system with the weighted mean as extra row
        for (int r = 0; r < n; ++r) {
            trip.emplace_back(r, n, 1.0);
            trip.emplace_back(n, r, w[r]);
        }
        Eigen::SparseMatrix<double> M(n + 1, n + 1);
        M.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(M);
        if (lu.info() != Eigen::Success) throw SingularityError("Reynolds bordered system is singular");
        Eigen::VectorXd rb = Eigen::VectorXd::Zero(n + 1);
        rb.head(n) = rhs;
        const Eigen::VectorXd sol = lu.solve(rb);
        P = sol.head(n);
        const Eigen::VectorXd r = rhs - M.topLeftCorner(n, n) * P;
        const double rn = rhs.norm();
        out.relative_residual = rn > 0.0 ? r.norm() / rn : r.norm();
        if (!(out.relative_residual <= opts.tol))
            throw ConvergenceError("Reynolds direct solve residual exceeds tolerance", {out.relative_residual});
    }
    out.mean = w.dot(P) / w.sum();
    out.P = Eigen::Map<const Eigen::MatrixXd>(P.data(), domain.nx + 1, domain.ny + 1);
    out.flux = face_fluxes(domain, coeffs, P);
    const int nn = domain.nx + 1, mm = domain.ny + 1;
    out.U1 = out.U2 = out.W1 = out.W2 = Eigen::MatrixXd::Zero(nn, mm);
    return out;
}

PressureField solve_reynolds(const MacroDomain& domain, const FlowFactors& factors, const ReynoldsOptions& opts)
{
    return solve_reynolds(domain, ReynoldsCoefficients::from_factors(factors, domain.f, domain.g), opts);
}

PressureField reconstruct_UW(PressureField field, const FlowFactors& factors, const Eigen::Vector2d& f,
                             const Eigen::Vector2d& g)
{
    const int nn = field.domain.nx + 1, mm = field.domain.ny + 1;
    if (field.P.rows() != nn || field.P.cols() != mm) throw ValidationError("pressure field shape mismatch");
    field.U1.resize(nn, mm), field.U2.resize(nn, mm), field.W1.resize(nn, mm), field.W2.resize(nn, mm);
    for (int j = 0; j < mm; ++j)
        for (int i = 0; i < nn; ++i) {
            const Eigen::Vector2d drive = f - field.gradient(i, j);
            const Eigen::Vector2d U = factors.K1 * drive + factors.K2 * g;
            Eigen::Vector2d W = factors.L1 * drive + factors.L2 * g;
            if (factors.regime == Regime::highfreq) W.setZero();
            field.U1(i, j) = U[0], field.U2(i, j) = U[1];
            field.W1(i, j) = W[0], field.W2(i, j) = W[1];
        }
    return field;
}

PressureField reconstruct_U(PressureField field, const ReynoldsCoefficients& coeffs)
{
    const int nn = field.domain.nx + 1, mm = field.domain.ny + 1;
    if (field.P.rows() != nn || field.P.cols() != mm) throw ValidationError("pressure field shape mismatch");
    field.U1.resize(nn, mm), field.U2.resize(nn, mm);
    field.W1 = field.W2 = Eigen::MatrixXd::Zero(nn, mm);
    for (int j = 0; j < mm; ++j)
        for (int i = 0; i < nn; ++i) {
            const double x = field.x(i), y = field.y(j);
            const Eigen::Vector2d U = -(coeffs.A(x, y) * field.gradient(i, j)) + coeffs.b(x, y);
            field.U1(i, j) = U[0], field.U2(i, j) = U[1];
        }
    return field;
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> highfreq_profiles(double y3, const PressureField& field, int i,
                                                              int j, const MicropolarParams& params,
                                                              double h_min)
{
    if (!(h_min > 0.0)) throw DomainError("h_min must be positive");
    if (!(y3 >= 0.0 && y3 <= h_min)) throw DomainError("y3 must lie in [0, h_min]");
    if (i < 0 || j < 0 || i > field.domain.nx || j > field.domain.ny) throw DomainError("node index out of range");
    const Eigen::Vector2d drive = field.gradient(i, j) - field.domain.f;
    const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
    return {profile_u(y3, h_min, drive, zero, params), profile_w(y3, h_min, drive, zero, params)};
}

FluxReport flux_diagnostics(const PressureField& field, double margin)
{
    if (!(margin >= 0.0 && margin < 0.5)) throw DomainError("diagnostic margin must lie in [0, 0.5)");
    const MacroDomain& d = field.domain;
    const Grid g = grid_of(d);
    FluxReport rep;
    if (field.flux.rows() != static_cast<Eigen::Index>(d.nx) * d.ny) return rep;
    Eigen::VectorXd out = Eigen::VectorXd::Zero((d.nx + 1) * (d.ny + 1));
    int nodes[4];
    for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
            g.element_nodes(i, j, nodes);
            for (int s = 0; s < 4; ++s) {
                const double q = field.flux(j * d.nx + i, s);
                out[nodes[kFaces[s].from]] += q;
                out[nodes[kFaces[s].to]] -= q;
                rep.total_flux += std::fabs(q);
            }
        }
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i)
            rep.max_divergence = std::max(rep.max_divergence, std::fabs(out[g.node(i, j)]) / g.area(i, j));
    rep.net_boundary_flux = out.sum();
    const int mx = std::max(1, static_cast<int>(std::ceil(margin * d.nx - 1e-9)));
    const int my = std::max(1, static_cast<int>(std::ceil(margin * d.ny - 1e-9)));
    if (field.U1.rows() == d.nx + 1 && field.U1.cols() == d.ny + 1)
        for (int j = my; j <= d.ny - my; ++j)
            for (int i = mx; i <= d.nx - mx; ++i) {
                const double div = (field.U1(i + 1, j) - field.U1(i - 1, j)) / (2 * g.dx)
                                   + (field.U2(i, j + 1) - field.U2(i, j - 1)) / (2 * g.dy);
                rep.max_nodal_divergence = std::max(rep.max_nodal_divergence, std::fabs(div));
            }
    return rep;
}

void write_pressure_csv(std::ostream& os, const PressureField& field)
{
    os << "x,y,P,U1,U2,W1,W2\n";
    for (int j = 0; j <= field.domain.ny; ++j)
        for (int i = 0; i <= field.domain.nx; ++i)
            os << format_double(field.x(i)) << ',' << format_double(field.y(j)) << ',' << format_double(field.P(i, j))
               << ',' << format_double(field.U1(i, j)) << ',' << format_double(field.U2(i, j)) << ','
               << format_double(field.W1(i, j)) << ',' << format_double(field.W2(i, j)) << '\n';
}

void write_pressure_vtk(std::ostream& os, const PressureField& field)
{
    const MacroDomain& d = field.domain;
    const int npts = (d.nx + 1) * (d.ny + 1);
    os << "# vtk DataFile Version 3.0\n"
       << "micropolar thin-film pressure\n"
       << "ASCII\n"
       << "DATASET STRUCTURED_POINTS\n"
       << "DIMENSIONS " << d.nx + 1 << ' ' << d.ny + 1 << " 1\n"
       << "ORIGIN " << format_double(d.x0) << ' ' << format_double(d.y0) << " 0\n"
       << "SPACING " << format_double(d.dx()) << ' ' << format_double(d.dy()) << " 1\n"
       << "POINT_DATA " << npts << '\n'
       << "SCALARS pressure double 1\n"
       << "LOOKUP_TABLE default\n";
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i) os << format_double(field.P(i, j)) << '\n';
    os << "VECTORS velocity_avg double\n";
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i)
            os << format_double(field.U1(i, j)) << ' ' << format_double(field.U2(i, j)) << " 0\n";
    os << "VECTORS microrotation_avg double\n";
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i)
            os << format_double(field.W1(i, j)) << ' ' << format_double(field.W2(i, j)) << " 0\n";
}

} // namespace mfilm
