#include "mfilm/cell3d.hpp"

#include "mfilm/closed_form.hpp"
#include "mfilm/errors.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCore>
#include <Eigen/UmfPackSupport>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/IterativeSolvers>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mfilm {

// ---------------------------------------------------------------------------
// Mesh and layout

CellMesh3D build_cell_mesh(const RoughnessField& rough, int n1, int n2, int n3)
{
    if (n1 < 8 || n2 < 8 || n3 < 8) throw DomainError("3D cell resolutions must be >= 8");
    if (!(rough.h_min() > 0.0)) throw DomainError("mapping error: h_min must be positive");
    CellMesh3D m;
    m.n1 = n1;
    m.n2 = n2;
    m.n3 = n3;
    m.rough = rough;
    m.h.resize(2 * n2, 2 * n1);
    m.h1.resize(2 * n2, 2 * n1);
    m.h2.resize(2 * n2, 2 * n1);
    for (int p2 = 0; p2 < 2 * n2; ++p2)
        for (int p1 = 0; p1 < 2 * n1; ++p1) {
            const double y1 = p1 / (2.0 * n1) - 0.5, y2 = p2 / (2.0 * n2) - 0.5;
            const double hv = rough.height(y1, y2);
            if (!(hv > 0.0)) throw DomainError("mapping error: non-positive film thickness");
            const Eigen::Vector2d g = rough.gradient(y1, y2);
            m.h(p2, p1) = hv;
            m.h1(p2, p1) = g[0];
            m.h2(p2, p1) = g[1];
        }
    return m;
}

double CellMesh3D::max_abs_gradient(int axis) const
{
    return (axis == 1 ? h1 : h2).cwiseAbs().maxCoeff();
}

FieldLayout::FieldLayout(int n1_, int n2_, int n3_) : n1(n1_), n2(n2_), n3(n3_)
{
    int off = 0;
    for (int f = 0; f < kFieldCount; ++f) {
        layers[f] = parity(static_cast<Field>(f))[2] == 1 ? n3 : n3 - 1;
        offset[f] = off;
        off += n1 * n2 * layers[f];
    }
    total = off;
}

std::array<int, 3> FieldLayout::parity(Field f)
{
    switch (f) {
    case Field::u1: return {0, 1, 1};
    case Field::u2: return {1, 0, 1};
    case Field::u3: return {1, 1, 0};
    case Field::w1: return {1, 0, 0};
    case Field::w2: return {0, 1, 0};
    case Field::w3: return {0, 0, 1};
    case Field::pi: return {1, 1, 1};
    }
    return {1, 1, 1};
}

std::array<int, 3> FieldLayout::position(Field f, int i1, int i2, int l) const
{
    const auto par = parity(f);
    return {par[0] ? 2 * i1 + 1 : 2 * i1 + 2, par[1] ? 2 * i2 + 1 : 2 * i2 + 2,
            par[2] ? 2 * l + 1 : 2 * l + 2};
}

Eigen::VectorXd CellSolution3D::field(Field f) const
{
    const FieldLayout L = layout();
    return x.segment(L.offset[static_cast<int>(f)], L.count(f));
}

double CellSolution3D::integral(Field f) const
{
    const FieldLayout L = layout();
    const CellMesh3D& m = *mesh;
    double acc = 0.0;
    const int fi = static_cast<int>(f);
    for (int l = 0; l < L.layers[fi]; ++l)
        for (int i2 = 0; i2 < m.n2; ++i2)
            for (int i1 = 0; i1 < m.n1; ++i1) {
                const auto p = L.position(f, i1, i2, l);
                acc += x[L.index(f, i1, i2, l)] * m.hat(p[0], p[1]);
            }
    return acc / (static_cast<double>(m.n1) * m.n2 * m.n3);
}

// ---------------------------------------------------------------------------
// Discrete operators

namespace {

using Entry = std::pair<int, double>;
using Stencil = std::vector<Entry>;

struct Pos {
    int p1, p2, q;
};

constexpr Field kU[3] = {Field::u1, Field::u2, Field::u3};
constexpr Field kW[3] = {Field::w1, Field::w2, Field::w3};

class CellOperator {
public:
    CellOperator(const CellMesh3D& mesh, const MicropolarParams& params, double lambda)
        : m_(mesh), L_(mesh.n1, mesh.n2, mesh.n3), lam_(lambda), N2_(params.N * params.N), Rc_(params.Rc)
    {
        delta_[0] = 1.0 / mesh.n1;
        delta_[1] = 1.0 / mesh.n2;
        delta_[2] = 1.0 / mesh.n3;
    }

    const FieldLayout& layout() const { return L_; }

    // Unknown (or ghost combination) of field f at half position (p1, p2, q).
    void value(Field f, int p1, int p2, int q, double w, Stencil& out) const
    {
        const auto par = FieldLayout::parity(f);
        const int i1 = horizontal_index(p1, m_.n1), i2 = horizontal_index(p2, m_.n2);
        const int n3 = m_.n3;
        if (par[2] == 0) {
            const int node = q / 2;
            if (node <= 0 || node >= n3) return; // wall: homogeneous Dirichlet
            out.emplace_back(L_.index(f, i1, i2, node - 1), w);
            return;
        }
        const int c = (q - 1) >> 1;
        if (c >= 0 && c < n3) {
            out.emplace_back(L_.index(f, i1, i2, c), w);
            return;
        }
        const int c0 = c < 0 ? 0 : n3 - 1;
        const int s = c < 0 ? 1 : -1;
        if (f == Field::pi) {
            // quadratic extrapolation keeps one-sided derivatives second order
            out.emplace_back(L_.index(f, i1, i2, c0), 3.0 * w);
            out.emplace_back(L_.index(f, i1, i2, c0 + s), -3.0 * w);
            out.emplace_back(L_.index(f, i1, i2, c0 + 2 * s), w);
        } else {
            // odd reflection puts the zero of a cell-centered field on the wall
            out.emplace_back(L_.index(f, i1, i2, c0), -w);
        }
    }

    // Computational derivative d/dxi_axis (axis 0, 1, 2 = zeta) of f at T;
    // axis = -1 interpolates. Compact differences where the staggering allows,
    // wide central differences and averages otherwise.
    void deriv(Field f, Pos T, int axis, double w, Stencil& out) const
    {
        const auto par = FieldLayout::parity(f);
        const int tp[3] = {T.p1 & 1, T.p2 & 1, T.q & 1};
        int off[3][2];
        double wt[3][2];
        int nt[3];
        for (int a = 0; a < 3; ++a) {
            const bool same = ((tp[a] & 1) == par[a]);
            const double d = delta_[a];
            if (a == axis) {
                nt[a] = 2;
                if (same) {
                    off[a][0] = 2, wt[a][0] = 0.5 / d;
                    off[a][1] = -2, wt[a][1] = -0.5 / d;
                } else {
                    off[a][0] = 1, wt[a][0] = 1.0 / d;
                    off[a][1] = -1, wt[a][1] = -1.0 / d;
                }
            } else if (same) {
                nt[a] = 1;
                off[a][0] = 0, wt[a][0] = 1.0;
            } else {
                nt[a] = 2;
                off[a][0] = 1, wt[a][0] = 0.5;
                off[a][1] = -1, wt[a][1] = 0.5;
            }
        }
        for (int a = 0; a < nt[0]; ++a)
            for (int b = 0; b < nt[1]; ++b)
                for (int c = 0; c < nt[2]; ++c)
                    value(f, T.p1 + off[0][a], T.p2 + off[1][b], T.q + off[2][c],
                          w * wt[0][a] * wt[1][b] * wt[2][c], out);
    }

    double zeta(int q) const { return q / (2.0 * m_.n3); }
    double h(Pos T) const { return m_.hat(T.p1, T.p2); }
    double ha(int a, Pos T) const { return a == 0 ? m_.h1at(T.p1, T.p2) : m_.h2at(T.p1, T.p2); }

    // lambda-scaled physical derivative (comp 0, 1: lambda d/dy_a; comp 2: d/dy3).
    void dmap(Field f, Pos T, int comp, double w, Stencil& out) const
    {
        if (comp == 2) {
            deriv(f, T, 2, w / h(T), out);
            return;
        }
        deriv(f, T, comp, w * lam_, out);
        const double g = ha(comp, T);
        if (g != 0.0) deriv(f, T, 2, -w * lam_ * zeta(T.q) * g / h(T), out);
    }

    // Delta_lambda f at T in conservative flux form.
    void lap(Field f, Pos T, double w, Stencil& out) const
    {
        const double s = w / h(T);
        const double l2 = lam_ * lam_;
        for (int a = 0; a < 2; ++a)
            for (int sign : {-1, 1}) {
                Pos S = T;
                (a == 0 ? S.p1 : S.p2) += sign;
                const double c = sign * s / delta_[a];
                deriv(f, S, a, c * l2 * h(S), out);
                const double g = ha(a, S);
                if (g != 0.0) deriv(f, S, 2, -c * l2 * zeta(S.q) * g, out);
            }
        for (int sign : {-1, 1}) {
            Pos S = T;
            S.q += sign;
            const double c = sign * s / delta_[2];
            const double z = zeta(S.q);
            const double g1 = ha(0, S), g2 = ha(1, S);
            deriv(f, S, 2, c * (1.0 + l2 * z * z * (g1 * g1 + g2 * g2)) / h(S), out);
            if (g1 != 0.0) deriv(f, S, 0, -c * l2 * z * g1, out);
            if (g2 != 0.0) deriv(f, S, 1, -c * l2 * z * g2, out);
        }
    }

    // Component comp of rot_lambda applied to the triple X at T.
    void rot(const Field X[3], int comp, Pos T, double w, Stencil& out) const
    {
        const int a = (comp + 1) % 3, b = (comp + 2) % 3;
        dmap(X[b], T, a, w, out);
        dmap(X[a], T, b, -w, out);
    }

    // Contravariant vertical flux u3 - lambda zeta grad h . u' at a node.
    void vertical_flux(Pos S, double w, Stencil& out) const
    {
        if (S.q <= 0 || S.q >= 2 * m_.n3) return;
        value(Field::u3, S.p1, S.p2, S.q, w, out);
        const double z = zeta(S.q);
        for (int a = 0; a < 2; ++a) {
            const double g = ha(a, S);
            if (g != 0.0) deriv(kU[a], S, -1, -w * lam_ * z * g, out);
        }
    }

    // div_lambda u at a pressure position.
    void div(Pos T, double w, Stencil& out) const
    {
        const double s = w / h(T);
        for (int a = 0; a < 2; ++a)
            for (int sign : {-1, 1}) {
                Pos S = T;
                (a == 0 ? S.p1 : S.p2) += sign;
                value(kU[a], S.p1, S.p2, S.q, sign * s * lam_ * h(S) / delta_[a], out);
            }
        for (int sign : {-1, 1}) {
            Pos S = T;
            S.q += sign;
            vertical_flux(S, sign * s / delta_[2], out);
        }
    }

    // Row stencil of the equation attached to unknown (f, i1, i2, l).
    void row(Field f, int i1, int i2, int l, Stencil& out) const
    {
        const auto p = L_.position(f, i1, i2, l);
        const Pos T{p[0], p[1], p[2]};
        switch (f) {
        case Field::u1:
        case Field::u2:
        case Field::u3: {
            const int m = static_cast<int>(f);
            lap(f, T, -1.0, out);
            dmap(Field::pi, T, m, 1.0, out);
            rot(kW, m, T, -2.0 * N2_, out);
            break;
        }
        case Field::w1:
        case Field::w2:
        case Field::w3: {
            const int m = static_cast<int>(f) - 3;
            lap(f, T, -Rc_, out);
            value(f, T.p1, T.p2, T.q, 4.0 * N2_, out);
            rot(kU, m, T, -2.0 * N2_, out);
            break;
        }
        case Field::pi: div(T, 1.0, out); break;
        }
    }

    double volume_weight(Field f, int i1, int i2, int l) const
    {
        const auto p = L_.position(f, i1, i2, l);
        return m_.hat(p[0], p[1]) * delta_[0] * delta_[1] * delta_[2];
    }

private:
    static int horizontal_index(int p, int n)
    {
        p = ((p % (2 * n)) + 2 * n) % (2 * n);
        return (p & 1) ? (p - 1) / 2 : (p / 2 - 1 + n) % n;
    }

    const CellMesh3D& m_;
    FieldLayout L_;
    double lam_, N2_, Rc_;
    double delta_[3];
};

using SpMat = Eigen::SparseMatrix<double>;

struct System {
    SpMat K;       // true operator (all continuity rows)
    SpMat Kpin;    // first continuity row replaced by pi = 0 at that cell
    int pin_row = 0;
    Eigen::VectorXd cu, cw;   // quadrature weights of int u3 and int w3
    Eigen::VectorXd eu, ew;   // multiplier columns (uniform force densities)
    Eigen::VectorXd vol;      // h dV at every unknown
};

System assemble_system(const CellOperator& op)
{
    const FieldLayout& L = op.layout();
    std::vector<Eigen::Triplet<double>> trip, trip_pin;
    trip.reserve(static_cast<std::size_t>(L.total) * 40);
    System sys;
    sys.cu = Eigen::VectorXd::Zero(L.total);
    sys.cw = Eigen::VectorXd::Zero(L.total);
    sys.eu = Eigen::VectorXd::Zero(L.total);
    sys.ew = Eigen::VectorXd::Zero(L.total);
    sys.vol = Eigen::VectorXd::Zero(L.total);
    sys.pin_row = L.index(Field::pi, 0, 0, 0);
    Stencil st;
    for (int fi = 0; fi < kFieldCount; ++fi) {
        const Field f = static_cast<Field>(fi);
        for (int l = 0; l < L.layers[fi]; ++l)
            for (int i2 = 0; i2 < L.n2; ++i2)
                for (int i1 = 0; i1 < L.n1; ++i1) {
                    const int r = L.index(f, i1, i2, l);
                    st.clear();
                    op.row(f, i1, i2, l, st);
                    std::sort(st.begin(), st.end());
                    for (std::size_t a = 0; a < st.size();) {
                        std::size_t b = a;
                        double v = 0.0;
                        while (b < st.size() && st[b].first == st[a].first) v += st[b++].second;
                        if (v != 0.0) trip.emplace_back(r, st[a].first, v);
                        a = b;
                    }
                    sys.vol[r] = op.volume_weight(f, i1, i2, l);
                    if (f == Field::u3) sys.cu[r] = sys.vol[r], sys.eu[r] = 1.0;
                    if (f == Field::w3) sys.cw[r] = sys.vol[r], sys.ew[r] = 1.0;
                }
    }
    sys.K.resize(L.total, L.total);
    sys.K.setFromTriplets(trip.begin(), trip.end());
    trip_pin.reserve(trip.size());
    for (const auto& t : trip)
        if (t.row() != sys.pin_row) trip_pin.push_back(t);
    trip_pin.emplace_back(sys.pin_row, sys.pin_row, 1.0);
    trip.clear();
    trip.shrink_to_fit();
    sys.Kpin.resize(L.total, L.total);
    sys.Kpin.setFromTriplets(trip_pin.begin(), trip_pin.end());
    return sys;
}

Eigen::VectorXd forcing(const FieldLayout& L, int i, int k)
{
    Eigen::VectorXd b = Eigen::VectorXd::Zero(L.total);
    const Field f = k == 1 ? kU[i - 1] : kW[i - 1];
    b.segment(L.offset[static_cast<int>(f)], L.count(f)).setOnes();
    return b;
}

ResidualReport report(const System& sys, const FieldLayout& L, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& b, double mu_u, double mu_w)
{
    const Eigen::VectorXd r = b - sys.K * x - mu_u * sys.eu - mu_w * sys.ew;
    ResidualReport rep;
    const auto block_norm = [&](const Eigen::VectorXd& v, int f0, int f1) {
        double acc = 0.0;
        for (int fi = f0; fi < f1; ++fi) {
            const int o = L.offset[fi], c = L.count(static_cast<Field>(fi));
            acc += (v.segment(o, c).array().square() * sys.vol.segment(o, c).array()).sum();
        }
        return std::sqrt(acc);
    };
    rep.momentum = block_norm(r, 0, 3);
    rep.microrotation = block_norm(r, 3, 6);
    rep.forcing = block_norm(b, 0, 6);
    const int op = L.offset[static_cast<int>(Field::pi)];
    rep.continuity = r.segment(op, L.count(Field::pi)).cwiseAbs().maxCoeff();
    rep.mean_u3 = std::fabs(sys.cu.dot(x));
    rep.mean_w3 = std::fabs(sys.cw.dot(x));
    return rep;
}

void remove_pressure_mean(const System& sys, const FieldLayout& L, Eigen::VectorXd& x)
{
    const int op = L.offset[static_cast<int>(Field::pi)], c = L.count(Field::pi);
    const double mean = x.segment(op, c).dot(sys.vol.segment(op, c)) / sys.vol.segment(op, c).sum();
    x.segment(op, c).array() -= mean;
}

// Exact inverse of the cell operator of a flat film with constant thickness.
// That operator commutes with horizontal shifts, so every horizontal Fourier
// mode decouples into one banded system across the layers. Used as the
// preconditioner of the curved-film problem.
class FlatFilmPreconditioner {
public:
    FlatFilmPreconditioner() = default;

    FlatFilmPreconditioner(const CellMesh3D& mesh, const MicropolarParams& params, double lambda)
    {
        auto d = std::make_shared<Data>();
        const double hbar = mesh.h.mean();
        const CellMesh3D flat
            = build_cell_mesh(RoughnessField::preset(RoughnessKind::flat, hbar, 0.0, mesh.rough.n()),
                              mesh.n1, mesh.n2, mesh.n3);
        const CellOperator op(flat, params, lambda);
        const FieldLayout& L = op.layout();
        d->n1 = L.n1;
        d->n2 = L.n2;
        d->nk1 = L.n1 / 2 + 1;

        // local unknowns of one column, ordered by height so the symbol is banded
        std::vector<std::array<int, 3>> order; // (q, field, layer)
        for (int fi = 0; fi < kFieldCount; ++fi)
            for (int l = 0; l < L.layers[fi]; ++l)
                order.push_back({L.position(static_cast<Field>(fi), 0, 0, l)[2], fi, l});
        std::sort(order.begin(), order.end());
        d->m = static_cast<int>(order.size());
        std::vector<int> local_of(L.total / (L.n1 * L.n2) + kFieldCount, -1);
        const auto plane = [&](int fi, int l) { return L.offset[fi] / (L.n1 * L.n2) + l; };
        for (int a = 0; a < d->m; ++a) {
            const auto& o = order[a];
            d->base.push_back(L.index(static_cast<Field>(o[1]), 0, 0, o[2]));
            local_of[plane(o[1], o[2])] = a;
            if (o[1] == static_cast<int>(Field::pi) && o[2] == 0) d->pin = a;
        }

        struct Coupling {
            int a, b, j1, j2;
            double v;
        };
        std::vector<Coupling> cpl;
        Stencil st;
        d->kl = d->ku = 0;
        for (int a = 0; a < d->m; ++a) {
            const Field f = static_cast<Field>(order[a][1]);
            st.clear();
            op.row(f, 0, 0, order[a][2], st);
            for (const auto& [col, v] : st) {
                const int fi = static_cast<int>(std::upper_bound(L.offset.begin(), L.offset.end(), col)
                                                - L.offset.begin()) - 1;
                const int rem = col - L.offset[fi];
                const int b = local_of[plane(fi, rem / (L.n1 * L.n2))];
                cpl.push_back({a, b, rem % L.n1, (rem / L.n1) % L.n2, v});
                d->kl = std::max(d->kl, a - b);
                d->ku = std::max(d->ku, b - a);
            }
        }
        d->ldab = 2 * d->kl + d->ku + 1;
        const std::size_t modes = static_cast<std::size_t>(d->nk1) * d->n2;
        d->band.assign(modes * d->ldab * d->m, {0.0, 0.0});
        d->ipiv.assign(modes * d->m, 0);
        const double two_pi = 2.0 * std::acos(-1.0);
        for (int k2 = 0; k2 < d->n2; ++k2)
            for (int k1 = 0; k1 < d->nk1; ++k1) {
                const std::size_t mode = static_cast<std::size_t>(k2) * d->nk1 + k1;
                std::complex<double>* ab = d->band.data() + mode * d->ldab * d->m;
                for (const auto& c : cpl) {
                    if (mode == 0 && c.a == d->pin) continue;
                    const double ph = two_pi * (static_cast<double>(k1) * c.j1 / d->n1
                                                + static_cast<double>(k2) * c.j2 / d->n2);
                    ab[d->kl + d->ku + c.a - c.b + static_cast<std::size_t>(c.b) * d->ldab]
                        += c.v * std::polar(1.0, ph);
                }
                if (mode == 0) ab[d->kl + d->ku + static_cast<std::size_t>(d->pin) * d->ldab] = 1.0;
                const lapack_int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, d->m, d->m, d->kl, d->ku, ab, d->ldab,
                                                       d->ipiv.data() + mode * d->m);
                if (info != 0) throw SingularityError("flat-film preconditioner: singular Fourier block");
            }
        d_ = std::move(d);
    }

    template <typename M>
    FlatFilmPreconditioner& analyzePattern(const M&) { return *this; }
    template <typename M>
    FlatFilmPreconditioner& factorize(const M&) { return *this; }
    template <typename M>
    FlatFilmPreconditioner& compute(const M&) { return *this; }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const
    {
        const Data& d = *d_;
        const int n1 = d.n1, n2 = d.n2, nk1 = d.nk1, m = d.m;
        using C = std::complex<double>;
        Eigen::FFT<double> fft;
        std::vector<C> spec(static_cast<std::size_t>(nk1) * n2 * m);
        std::vector<C> work(static_cast<std::size_t>(n1) * n2), row_in(std::max(n1, n2)), row_out(std::max(n1, n2));
        for (int a = 0; a < m; ++a) {
            const double* src = b.data() + d.base[a];
            for (int i2 = 0; i2 < n2; ++i2) {
                for (int i1 = 0; i1 < n1; ++i1) row_in[i1] = src[i2 * n1 + i1];
                fft.fwd(&work[static_cast<std::size_t>(i2) * n1], row_in.data(), n1);
            }
            for (int k1 = 0; k1 < nk1; ++k1) {
                for (int i2 = 0; i2 < n2; ++i2) row_in[i2] = work[static_cast<std::size_t>(i2) * n1 + k1];
                fft.fwd(row_out.data(), row_in.data(), n2);
                for (int k2 = 0; k2 < n2; ++k2)
                    spec[(static_cast<std::size_t>(k2) * nk1 + k1) * m + a] = row_out[k2];
            }
        }
        for (std::size_t mode = 0; mode < static_cast<std::size_t>(nk1) * n2; ++mode)
            LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', m, d.kl, d.ku, 1, d.band.data() + mode * d.ldab * m, d.ldab,
                           d.ipiv.data() + mode * m, spec.data() + mode * m, m);
        Eigen::VectorXd x(b.size());
        for (int a = 0; a < m; ++a) {
            for (int k1 = 0; k1 < nk1; ++k1) {
                for (int k2 = 0; k2 < n2; ++k2) row_in[k2] = spec[(static_cast<std::size_t>(k2) * nk1 + k1) * m + a];
                fft.inv(row_out.data(), row_in.data(), n2);
                for (int i2 = 0; i2 < n2; ++i2) work[static_cast<std::size_t>(i2) * n1 + k1] = row_out[i2];
            }
            double* dst = x.data() + d.base[a];
            for (int i2 = 0; i2 < n2; ++i2) {
                // the input is real, so the spectrum is conjugate symmetric
                const C* r = &work[static_cast<std::size_t>(i2) * n1];
                for (int k1 = 0; k1 < nk1; ++k1) row_in[k1] = r[k1];
                for (int k1 = nk1; k1 < n1; ++k1) row_in[k1] = std::conj(r[n1 - k1]);
                fft.inv(row_out.data(), row_in.data(), n1);
                for (int i1 = 0; i1 < n1; ++i1) dst[i2 * n1 + i1] = row_out[i1].real();
            }
        }
        return x;
    }

private:
    struct Data {
        int n1 = 0, n2 = 0, nk1 = 0, m = 0, kl = 0, ku = 0, ldab = 0, pin = 0;
        std::vector<int> base;               // index of each column unknown at cell (0, 0)
        std::vector<std::complex<double>> band; // LU factors per mode, LAPACK band storage
        std::vector<lapack_int> ipiv;
    };
    std::shared_ptr<const Data> d_;
};

// Solves with the pinned operator Kpin.
class PinnedSolver {
public:
    virtual ~PinnedSolver() = default;
    virtual Eigen::VectorXd solve(const Eigen::VectorXd& b) const = 0;
    virtual int iterations() const { return 0; }
};

class DirectPinnedSolver final : public PinnedSolver {
public:
    explicit DirectPinnedSolver(const SpMat& K) : K_(K)
    {
        lu_.compute(K);
        if (lu_.info() != Eigen::Success) throw SingularityError("sparse LU factorization of the 3D cell operator failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const override
    {
        Eigen::VectorXd x = lu_.solve(b);
        const double bn = std::max(b.norm(), 1e-300);
        for (int it = 0; it < 3; ++it) {
            const Eigen::VectorXd r = b - K_ * x;
            if (r.norm() <= 1e-15 * bn) break;
            x += lu_.solve(r);
        }
        return x;
    }

private:
    const SpMat& K_;
    Eigen::UmfPackLU<SpMat> lu_;
};

// Restarted GMRES preconditioned by the flat-film inverse.
class KrylovPinnedSolver final : public PinnedSolver {
public:
    KrylovPinnedSolver(const SpMat& K, const CellMesh3D& mesh, const MicropolarParams& params, double lambda,
                       const Cell3DOptions& opts)
        : K_(K), opts_(opts)
    {
        gmres_.set_restart(opts.restart);
        gmres_.setTolerance(kInnerTolerance);
        gmres_.compute(K);
        gmres_.preconditioner() = FlatFilmPreconditioner(mesh, params, lambda);
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const override
    {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
        const double bn = b.norm();
        if (bn == 0.0) return x;
        std::vector<double> history;
        int used = 0;
        while (used < opts_.max_iter) {
            gmres_.setMaxIterations(std::min(opts_.restart, opts_.max_iter - used));
            x = gmres_.solveWithGuess(b, x);
            used += static_cast<int>(gmres_.iterations());
            const double rel = (b - K_ * x).norm() / bn;
            history.push_back(rel);
            if (rel <= kTolerance) {
                iterations_ += used;
                return x;
            }
            if (gmres_.iterations() == 0) break;
        }
        throw ConvergenceError("GMRES for the 3D cell operator did not converge", history);
    }

    int iterations() const override { return iterations_; }

    // GMRES monitors the preconditioned residual; acceptance uses the true one.
    static constexpr double kInnerTolerance = 1e-13;
    static constexpr double kTolerance = 1e-11;

private:
    const SpMat& K_;
    Cell3DOptions opts_;
    mutable Eigen::GMRES<SpMat, FlatFilmPreconditioner> gmres_;
    mutable int iterations_ = 0;
};

// K x + eu mu_u + ew mu_w = b with cu.x = cw.x = 0, by capacitance on top of a
// pinned solve.
class ConstrainedCellSolver {
public:
    ConstrainedCellSolver(const System& sys, std::unique_ptr<PinnedSolver> inner)
        : sys_(sys), inner_(std::move(inner))
    {
        zw_ = inner_->solve(sys.ew);
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b, double& mu_u, double& mu_w) const
    {
        const Eigen::VectorXd x = inner_->solve(b);
        // w3 constraint alone first; the u3 constraint follows from incompressibility
        // up to discretization error and is only added when it is violated.
        const double sww = sys_.cw.dot(zw_);
        mu_w = 0.0;
        mu_u = 0.0;
        if (sww != 0.0) mu_w = sys_.cw.dot(x) / sww;
        Eigen::VectorXd y = x - mu_w * zw_;
        if (std::fabs(sys_.cu.dot(y)) > kU3Threshold) {
            if (zu_.size() == 0) zu_ = inner_->solve(sys_.eu);
            Eigen::Matrix2d S;
            S << sys_.cu.dot(zu_), sys_.cu.dot(zw_), sys_.cw.dot(zu_), sys_.cw.dot(zw_);
            const Eigen::Vector2d rhs(sys_.cu.dot(x), sys_.cw.dot(x));
            const Eigen::Vector2d mu = S.fullPivLu().solve(rhs);
            mu_u = mu[0];
            mu_w = mu[1];
            y = x - mu_u * zu_ - mu_w * zw_;
        }
        return y;
    }

    int iterations() const { return inner_->iterations(); }

    static constexpr double kU3Threshold = 1e-13;

private:
    const System& sys_;
    std::unique_ptr<PinnedSolver> inner_;
    Eigen::VectorXd zw_;
    mutable Eigen::VectorXd zu_;
};

std::unique_ptr<PinnedSolver> make_pinned_solver(const System& sys, const CellMesh3D& mesh,
                                                 const MicropolarParams& params, double lambda,
                                                 const Cell3DOptions& opts)
{
    const bool direct = opts.solver == Cell3DSolver::direct
                        || (opts.solver == Cell3DSolver::automatic && sys.K.rows() <= opts.direct_limit);
    if (direct) return std::make_unique<DirectPinnedSolver>(sys.Kpin);
    return std::make_unique<KrylovPinnedSolver>(sys.Kpin, mesh, params, lambda, opts);
}

void check_cell_args(double lambda, int i, int k)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must satisfy 0 < lambda < inf");
    if (i < 1 || i > 2 || k < 1 || k > 2) throw DomainError("cell index (i, k) must lie in {1,2}x{1,2}");
}

} // namespace

// ---------------------------------------------------------------------------
// Solvers

namespace {

CellSolution3D solve_one(const ConstrainedCellSolver& solver, const System& sys, const FieldLayout& L,
                         std::shared_ptr<const CellMesh3D> mesh, const MicropolarParams& params, double lambda,
                         int i, int k, double tol)
{
    CellSolution3D s;
    s.mesh = std::move(mesh);
    s.params = params;
    s.lambda = lambda;
    s.i = i;
    s.k = k;
    const Eigen::VectorXd b = forcing(L, i, k);
    s.x = solver.solve(b, s.mu_u3, s.mu_w3);
    remove_pressure_mean(sys, L, s.x);
    s.residuals = report(sys, L, s.x, b, s.mu_u3, s.mu_w3);
    const double rel = std::max(s.residuals.momentum, s.residuals.microrotation) / s.residuals.forcing;
    if (!(rel <= tol))
        throw ConvergenceError("3D cell problem (i=" + std::to_string(i) + ", k=" + std::to_string(k)
                                   + ") residual " + std::to_string(rel) + " exceeds tolerance",
                               {rel});
    return s;
}

// In automatic mode a GMRES failure on a system within fallback_limit is
// retried with the direct solver.
template <typename F>
auto with_fallback(const System& sys, const Cell3DOptions& opts, F&& attempt)
{
    const bool iterative_first = opts.solver == Cell3DSolver::iterative
                                 || (opts.solver == Cell3DSolver::automatic && sys.K.rows() > opts.direct_limit);
    try {
        return attempt(opts);
    } catch (const ConvergenceError&) {
        if (!iterative_first || opts.solver != Cell3DSolver::automatic || sys.K.rows() > opts.fallback_limit)
            throw;
    }
    Cell3DOptions direct = opts;
    direct.solver = Cell3DSolver::direct;
    return attempt(direct);
}

} // namespace

std::array<std::array<CellSolution3D, 2>, 2>
solve_cell_3d_all(const CellMesh3D& mesh, const MicropolarParams& params, double lambda,
                  const Cell3DOptions& opts)
{
    params.validate();
    check_cell_args(lambda, 1, 1);
    auto shared = std::make_shared<const CellMesh3D>(mesh);
    const CellOperator op(*shared, params, lambda);
    const System sys = assemble_system(op);
    return with_fallback(sys, opts, [&](const Cell3DOptions& o) {
        const ConstrainedCellSolver solver(sys, make_pinned_solver(sys, *shared, params, lambda, o));
        std::array<std::array<CellSolution3D, 2>, 2> out;
        for (int i = 1; i <= 2; ++i)
            for (int k = 1; k <= 2; ++k)
                out[i - 1][k - 1] = solve_one(solver, sys, op.layout(), shared, params, lambda, i, k, o.tol);
        return out;
    });
}

CellSolution3D solve_cell_3d(const CellMesh3D& mesh, const MicropolarParams& params, double lambda, int i,
                             int k, const Cell3DOptions& opts)
{
    check_cell_args(lambda, i, k);
    params.validate();
    auto shared = std::make_shared<const CellMesh3D>(mesh);
    const CellOperator op(*shared, params, lambda);
    const System sys = assemble_system(op);
    return with_fallback(sys, opts, [&](const Cell3DOptions& o) {
        const ConstrainedCellSolver solver(sys, make_pinned_solver(sys, *shared, params, lambda, o));
        return solve_one(solver, sys, op.layout(), shared, params, lambda, i, k, o.tol);
    });
}

FlowFactors assemble_flow_factors_3d(const std::array<std::array<CellSolution3D, 2>, 2>& sols)
{
    const auto& ref = sols[0][0];
    if (!ref.mesh) throw ValidationError("cell solutions are empty");
    FlowFactors ff;
    ff.regime = Regime::stokes;
    ff.lambda = ref.lambda;
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) {
            const auto& s = sols[i][k];
            if (!s.mesh || s.mesh->n1 != ref.mesh->n1 || s.mesh->n2 != ref.mesh->n2 || s.mesh->n3 != ref.mesh->n3
                || s.lambda != ref.lambda || s.params.N != ref.params.N || s.params.Rc != ref.params.Rc
                || s.i != i + 1 || s.k != k + 1 || s.x.size() != ref.x.size())
                throw ValidationError("inconsistent 3D cell solution set");
            Eigen::Matrix2d& Kk = k == 0 ? ff.K1 : ff.K2;
            Eigen::Matrix2d& Lk = k == 0 ? ff.L1 : ff.L2;
            for (int j = 0; j < 2; ++j) {
                Kk(i, j) = s.integral(j == 0 ? Field::u1 : Field::u2);
                Lk(i, j) = s.integral(j == 0 ? Field::w1 : Field::w2);
            }
        }
    return ff;
}

ResidualReport residual_report(const CellSolution3D& s)
{
    const CellOperator op(*s.mesh, s.params, s.lambda);
    const System sys = assemble_system(op);
    return report(sys, op.layout(), s.x, forcing(op.layout(), s.i, s.k), s.mu_u3, s.mu_w3);
}

double max_divergence(const CellSolution3D& s) { return residual_report(s).continuity; }

CellSolution3D flat_film_state(const CellMesh3D& mesh, const MicropolarParams& params, double lambda, int i, int k)
{
    check_cell_args(lambda, i, k);
    CellSolution3D s;
    s.mesh = std::make_shared<const CellMesh3D>(mesh);
    s.params = params;
    s.lambda = lambda;
    s.i = i;
    s.k = k;
    const FieldLayout L(mesh.n1, mesh.n2, mesh.n3);
    s.x = Eigen::VectorXd::Zero(L.total);
    Eigen::Vector2d d = Eigen::Vector2d::Zero(), g = Eigen::Vector2d::Zero();
    (k == 1 ? d : g)[i - 1] = k == 1 ? -1.0 : 1.0;
    for (Field f : {Field::u1, Field::u2, Field::w1, Field::w2}) {
        const int fi = static_cast<int>(f);
        for (int l = 0; l < L.layers[fi]; ++l)
            for (int i2 = 0; i2 < mesh.n2; ++i2)
                for (int i1 = 0; i1 < mesh.n1; ++i1) {
                    const auto p = L.position(f, i1, i2, l);
                    const double h = mesh.hat(p[0], p[1]);
                    const double z = std::clamp(p[2] / (2.0 * mesh.n3), 0.0, 1.0) * h;
                    const Eigen::Vector2d u = profile_u(z, h, d, g, params);
                    const Eigen::Vector2d w = profile_w(z, h, d, g, params);
                    double v = 0.0;
                    switch (f) {
                    case Field::u1: v = u[0]; break;
                    case Field::u2: v = u[1]; break;
                    case Field::w1: v = w[0]; break;
                    default: v = w[1]; break;
                    }
                    s.x[L.index(f, i1, i2, l)] = v;
                }
    }
    return s;
}

} // namespace mfilm
