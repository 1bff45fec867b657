#pragma once

#include "mfilm/errors.hpp"
#include "mfilm/params.hpp"

#include <Eigen/Core>

#include <cmath>
#include <sstream>
#include <string>

namespace mfilm {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Rotation by +90 degrees: (v1, v2) -> (-v2, v1).
template <typename Derived>
Vec2<typename Derived::Scalar> perp(const Eigen::MatrixBase<Derived>& v)
{
    return Vec2<typename Derived::Scalar>(-v(1), v(0));
}

namespace detail {

template <typename Scalar>
std::string tuple_str(Scalar h, Scalar N, Scalar Rc)
{
    std::ostringstream os;
    os.precision(17);
    os << "(h=" << static_cast<double>(h) << ", N=" << static_cast<double>(N)
       << ", Rc=" << static_cast<double>(Rc) << ")";
    return os.str();
}

template <typename Scalar>
void check_args(Scalar h, Scalar N, Scalar Rc)
{
    using std::isfinite;
    if (!(h > Scalar(0)) || !isfinite(h)) throw DomainError("film thickness must be positive " + tuple_str(h, N, Rc));
    if (!(N >= Scalar(0) && N < Scalar(1))) throw DomainError("N outside [0, 1) " + tuple_str(h, N, Rc));
    if (!(Rc > Scalar(0)) || !isfinite(Rc)) throw DomainError("Rc must be positive " + tuple_str(h, N, Rc));
}

/// 1 - x coth(x), series below x = 0.1.
template <typename Scalar>
Scalar one_minus_xcothx(Scalar x)
{
    using std::tanh;
    if (x < Scalar(0.1)) {
        const Scalar x2 = x * x;
        return x2 * (Scalar(-1) / 3
                     + x2 * (Scalar(1) / 45
                             + x2 * (Scalar(-2) / 945 + x2 * (Scalar(1) / 4725 + x2 * (Scalar(-2) / 93555)))));
    }
    return Scalar(1) - x / tanh(x);
}

/// (1 - tanh(x)/x) / x^2, series below x = 0.1.
template <typename Scalar>
Scalar one_minus_tau_over_x2(Scalar x)
{
    using std::tanh;
    if (x < Scalar(0.1)) {
        const Scalar x2 = x * x;
        return Scalar(1) / 3
               + x2 * (Scalar(-2) / 15
                       + x2 * (Scalar(17) / 315 + x2 * (Scalar(-62) / 2835 + x2 * (Scalar(1382) / 155925))));
    }
    return (Scalar(1) - tanh(x) / x) / (x * x);
}

/// tanh(x)/x with the removable singularity at 0 filled in.
template <typename Scalar>
Scalar tanh_over_x(Scalar x)
{
    return Scalar(1) - x * x * one_minus_tau_over_x2(x);
}

} // namespace detail

/// Argument N h sqrt((1 - N^2)/Rc) of the hyperbolic terms, equal to k h / 2.
template <typename Scalar>
Scalar film_argument(Scalar h, Scalar N, Scalar Rc)
{
    using std::sqrt;
    return N * h * sqrt((Scalar(1) - N * N) / Rc);
}

/// k = sqrt(4 N^2 (1 - N^2) / Rc).
template <typename Scalar>
Scalar k_const(Scalar N, Scalar Rc)
{
    using std::sqrt;
    return sqrt(Scalar(4) * N * N * (Scalar(1) - N * N) / Rc);
}

/// Phi = 1/12 + Rc/(4 h^2 (1-N^2)) - (1/(4h)) sqrt(N^2 Rc/(1-N^2)) coth(x),
/// evaluated as 1/12 + Rc/(4 h^2 (1-N^2)) (1 - x coth x). Returns 1/12 for N = 0.
template <typename Scalar>
Scalar phi(Scalar h, Scalar N, Scalar Rc)
{
    detail::check_args(h, N, Rc);
    if (N == Scalar(0)) return Scalar(1) / 12;
    const Scalar M = Scalar(1) - N * N;
    const Scalar x = film_argument(h, N, Rc);
    return Scalar(1) / 12 + Rc / (Scalar(4) * h * h * M) * detail::one_minus_xcothx(x);
}

/// Variants of the microrotation film function.
enum class PsiForm {
    /// (tanh x - x) / (1 - (N/h) sqrt(Rc/(1-N^2)) tanh x); consistent with the
    /// film integral of the microrotation profile.
    consistent,
    /// tanh x / (1 - (N/h) sqrt((1-N^2)/Rc) tanh x), kept for comparison only.
    printed,
    /// tanh x / (1 - (N/h) sqrt(Rc/(1-N^2)) tanh x), kept for comparison only.
    printed_alt_radicand,
};

/// Microrotation film function Psi. For the consistent form the evaluation
/// uses Psi = -x (1 - tau) / (1 - N^2 tau) with tau = tanh(x)/x, whose
/// denominator never vanishes for N < 1. Returns 0 for N = 0.
template <typename Scalar>
Scalar psi(Scalar h, Scalar N, Scalar Rc, PsiForm form = PsiForm::consistent)
{
    using std::sqrt;
    using std::tanh;
    detail::check_args(h, N, Rc);
    if (N == Scalar(0)) return Scalar(0);
    const Scalar M = Scalar(1) - N * N;
    const Scalar x = film_argument(h, N, Rc);
    if (form == PsiForm::consistent) {
        const Scalar tau = detail::tanh_over_x(x);
        const Scalar denom = Scalar(1) - N * N * tau;
        return -x * x * x * detail::one_minus_tau_over_x2(x) / denom;
    }
    const Scalar factor = form == PsiForm::printed ? sqrt(M / Rc) : sqrt(Rc / M);
    const Scalar t = tanh(x);
    const Scalar denom = Scalar(1) - (N / h) * factor * t;
    if (std::abs(static_cast<double>(denom)) < 1e-14)
        throw SingularityError("Psi denominator vanishes at " + detail::tuple_str(h, N, Rc));
    return t / denom;
}

/// Film integral of the microrotation profile per unit moment,
/// -(1/(4 N^3)) sqrt(Rc/(1-N^2)) Psi, computed without the 1/N^3 factor.
/// Zero on the Newtonian branch.
template <typename Scalar>
Scalar microrotation_mobility(Scalar h, Scalar N, Scalar Rc)
{
    detail::check_args(h, N, Rc);
    if (N == Scalar(0)) return Scalar(0);
    const Scalar M = Scalar(1) - N * N;
    const Scalar x = film_argument(h, N, Rc);
    const Scalar tau = detail::tanh_over_x(x);
    // (h / (4 N^2)) (1 - tau) / (1 - N^2 tau) with (1 - tau) = x^2 q and x^2 / N^2 = h^2 M / Rc.
    return h * h * h * M / (Scalar(4) * Rc) * detail::one_minus_tau_over_x2(x) / (Scalar(1) - N * N * tau);
}

/// h^3 Phi / (1 - N^2): mobility of the pressure drive.
template <typename Scalar>
Scalar classical_micropolar_coefficient(Scalar h, Scalar N, Scalar Rc)
{
    return h * h * h * phi(h, N, Rc) / (Scalar(1) - N * N);
}

template <typename Scalar>
struct ProfileCoeffsT {
    Scalar h{};
    Scalar k{};
    /// -2 h sinh(kh) + (4 N^2 / k)(cosh(kh) - 1); may overflow for very large kh.
    Scalar D{};
    Scalar A2{};
    Scalar B2{};
    /// tanh(kh/2)
    Scalar t{};
    /// 1 - N^2 tanh(kh/2) / (kh/2), the overflow-free factor with D = -2 h sinh(kh) Q.
    Scalar Q{};
};
using ProfileCoeffs = ProfileCoeffsT<double>;

/// A2 = sinh(kh)/D and B2 = -(cosh(kh) - 1)/D, evaluated as
/// A2 = -1/(2 h Q), B2 = tanh(kh/2)/(2 h Q).
template <typename Scalar>
ProfileCoeffsT<Scalar> profile_coeffs(Scalar h, Scalar N, Scalar Rc)
{
    using std::sinh;
    using std::tanh;
    detail::check_args(h, N, Rc);
    ProfileCoeffsT<Scalar> c;
    c.h = h;
    c.k = k_const(N, Rc);
    const Scalar x = c.k * h / 2;
    c.t = tanh(x);
    c.Q = Scalar(1) - N * N * detail::tanh_over_x(x);
    c.D = N == Scalar(0) ? Scalar(0) : Scalar(-2) * h * sinh(c.k * h) * c.Q;
    if (!(std::abs(static_cast<double>(c.D)) >= 1e-14))
        throw SingularityError("profile denominator D vanishes at " + detail::tuple_str(h, N, Rc));
    c.A2 = Scalar(-1) / (Scalar(2) * h * c.Q);
    c.B2 = c.t / (Scalar(2) * h * c.Q);
    return c;
}

/// Scalar brackets of the film profiles:
///   u = a(z) d - c(z) g_perp,  w = b(z) d_perp + e(z) g,
/// where d = grad p - f is the drive and g the moment.
template <typename Scalar>
struct ProfileBrackets {
    Scalar a{}, c{}, b{}, e{};
};

template <typename Scalar>
ProfileBrackets<Scalar> profile_brackets(Scalar z, Scalar h, Scalar N, Scalar Rc)
{
    using std::expm1;
    using std::sinh;
    detail::check_args(h, N, Rc);
    if (!(z >= Scalar(0) && z <= h))
        throw DomainError("y3 outside the film [0, h] at " + detail::tuple_str(h, N, Rc));
    ProfileBrackets<Scalar> r;
    if (N == Scalar(0)) {
        r.a = z * (z - h) / 2;
        return r;
    }
    const Scalar M = Scalar(1) - N * N;
    const ProfileCoeffsT<Scalar> pc = profile_coeffs(h, N, Rc);
    const Scalar k = pc.k, t = pc.t, Q = pc.Q;
    const Scalar kz = k * z;
    const Scalar sh = sinh(kz);
    const Scalar chm1 = -expm1(kz) * expm1(-kz) / 2; // cosh(kz) - 1
    r.a = z * (z - h) / (Scalar(2) * M) + h * N * N / (Scalar(2) * M * k) * (sh - chm1 / t);
    r.c = (Scalar(2) * z * t / h - sh + t * chm1) / (Scalar(2) * k * Q);
    r.b = z / (Scalar(2) * M) + h / (Scalar(4) * M) * (chm1 - sh / t);
    // k^2 / (4 N^2) = (1 - N^2) / Rc
    r.e = M / (Rc * Q) * (t * sh - chm1) / (k * k);
    return r;
}

template <typename Scalar, typename D1, typename D2>
Vec2<Scalar> profile_u(Scalar y3, Scalar h, const Eigen::MatrixBase<D1>& drive,
                       const Eigen::MatrixBase<D2>& gmoment, Scalar N, Scalar Rc)
{
    const auto br = profile_brackets(y3, h, N, Rc);
    return br.a * drive.template cast<Scalar>() - br.c * perp(gmoment.template cast<Scalar>());
}

template <typename Scalar, typename D1, typename D2>
Vec2<Scalar> profile_w(Scalar y3, Scalar h, const Eigen::MatrixBase<D1>& drive,
                       const Eigen::MatrixBase<D2>& gmoment, Scalar N, Scalar Rc)
{
    const auto br = profile_brackets(y3, h, N, Rc);
    return br.b * perp(drive.template cast<Scalar>()) + br.e * gmoment.template cast<Scalar>();
}

// Convenience overloads on MicropolarParams (double precision).

inline double phi(double h, const MicropolarParams& p) { return phi(h, p.N, p.Rc); }
inline double psi(double h, const MicropolarParams& p, PsiForm form = PsiForm::consistent)
{
    return psi(h, p.N, p.Rc, form);
}
inline double microrotation_mobility(double h, const MicropolarParams& p)
{
    return microrotation_mobility(h, p.N, p.Rc);
}
inline double classical_micropolar_coefficient(double h, const MicropolarParams& p)
{
    return classical_micropolar_coefficient(h, p.N, p.Rc);
}
inline ProfileCoeffs profile_coeffs(double h, const MicropolarParams& p)
{
    return profile_coeffs(h, p.N, p.Rc);
}
inline Eigen::Vector2d profile_u(double y3, double h, const Eigen::Vector2d& drive,
                                 const Eigen::Vector2d& gmoment, const MicropolarParams& p)
{
    return profile_u(y3, h, drive, gmoment, p.N, p.Rc);
}
inline Eigen::Vector2d profile_w(double y3, double h, const Eigen::Vector2d& drive,
                                 const Eigen::Vector2d& gmoment, const MicropolarParams& p)
{
    return profile_w(y3, h, drive, gmoment, p.N, p.Rc);
}

struct HighFreqFactors {
    double A_inf = 0.0;
    Eigen::Vector2d b_inf = Eigen::Vector2d::Zero();
};

/// A_inf = h_min^3 Phi(h_min) / (1 - N^2), b_inf = A_inf f.
inline HighFreqFactors highfreq_factors(double h_min, const MicropolarParams& p,
                                        const Eigen::Vector2d& f)
{
    HighFreqFactors r;
    r.A_inf = classical_micropolar_coefficient(h_min, p);
    r.b_inf = r.A_inf * f;
    return r;
}

} // namespace mfilm
