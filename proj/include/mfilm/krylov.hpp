#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <vector>

namespace mfilm {

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    /// ||b - A x|| / ||b|| at exit (0 for a zero right-hand side).
    double relative_residual = 0.0;
    bool converged = false;
    std::vector<double> history;
};

/// Jacobi-preconditioned conjugate gradient for a symmetric positive
/// semidefinite matrix whose null space is the constant vector. The
/// right-hand side and every iterate are projected onto the mean-free
/// subspace with respect to the weights w (sum w_i x_i = 0).
inline CgResult cg_mean_free(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A,
                             const Eigen::VectorXd& b, const Eigen::VectorXd& weights,
                             double tol, int max_iter)
{
    const double wsum = weights.sum();
    const auto project = [&](Eigen::VectorXd& v) { v.array() -= weights.dot(v) / wsum; };
    // The residual lives in the dual space, orthogonal to constants.
    const auto project_dual = [&](Eigen::VectorXd& v) { v.array() -= v.sum() / v.size(); };

    CgResult out;
    out.x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    project_dual(r);
    const double bnorm = r.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    Eigen::VectorXd Ap(b.size());
    for (int it = 1; it <= max_iter; ++it) {
        Ap.noalias() = A * p;
        const double alpha = rz / p.dot(Ap);
        out.x += alpha * p;
        r -= alpha * Ap;
        project_dual(r);
        const double rel = r.norm() / bnorm;
        out.history.push_back(rel);
        out.iterations = it;
        if (rel <= tol) {
            out.converged = true;
            break;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    project(out.x);
    // true residual of the projected iterate
    Eigen::VectorXd rt = b - A * out.x;
    project_dual(rt);
    out.relative_residual = rt.norm() / bnorm;
    return out;
}

} // namespace mfilm
