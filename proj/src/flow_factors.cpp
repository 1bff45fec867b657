#include "mfilm/flow_factors.hpp"

#include <Eigen/Eigenvalues>

namespace mfilm {

double FlowFactors::min_sym_eigenvalue() const
{
    const Eigen::Matrix2d s = 0.5 * (K1 + K1.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double FlowFactors::asymmetry() const
{
    const double n = K1.norm();
    return n > 0.0 ? (K1 - K1.transpose()).norm() / n : 0.0;
}

bool FlowFactors::structural_zeros_hold() const
{
    const auto zero = [](const Eigen::Matrix2d& m) { return (m.array() == 0.0).all(); };
    switch (regime) {
    case Regime::reynolds: return zero(L1) && zero(K2);
    case Regime::highfreq:
        return zero(K2) && zero(L1) && zero(L2) && K1(0, 1) == 0.0 && K1(1, 0) == 0.0
               && K1(0, 0) == K1(1, 1);
    case Regime::stokes: return true;
    }
    return false;
}

} // namespace mfilm
