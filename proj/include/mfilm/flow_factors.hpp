#pragma once

#include "mfilm/params.hpp"

#include <Eigen/Core>

namespace mfilm {

/// The four 2x2 flow-factor matrices of one regime. A = K1 and b = K1 f + K2 g.
struct FlowFactors {
    Regime regime = Regime::reynolds;
    double lambda = 0.0;
    Eigen::Matrix2d K1 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d K2 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d L1 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d L2 = Eigen::Matrix2d::Zero();

    const Eigen::Matrix2d& A() const { return K1; }
    Eigen::Vector2d b(const Eigen::Vector2d& f, const Eigen::Vector2d& g) const { return K1 * f + K2 * g; }

    /// Smallest eigenvalue of the symmetric part of A.
    double min_sym_eigenvalue() const;
    /// Relative asymmetry |K1 - K1^T| / |K1|.
    double asymmetry() const;
    /// True when the regime's structural zeros hold exactly.
    bool structural_zeros_hold() const;
};

} // namespace mfilm
