#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "parapost/errors.hpp"
#include "parapost/model.hpp"

namespace parapost {

/// Tridiagonal matrix on the interior nodes, stored by diagonals.
struct Tridiag {
    VectorXd lower; // size n-1
    VectorXd diag;  // size n
    VectorXd upper; // size n-1

    static Tridiag zero(int n) {
        return {VectorXd::Zero(n - 1), VectorXd::Zero(n), VectorXd::Zero(n - 1)};
    }

    int size() const { return static_cast<int>(diag.size()); }

    VectorXd apply(const VectorXd& v) const {
        const int n = size();
        VectorXd r = diag.cwiseProduct(v);
        r.head(n - 1) += upper.cwiseProduct(v.tail(n - 1));
        r.tail(n - 1) += lower.cwiseProduct(v.head(n - 1));
        return r;
    }

    MatrixXd dense() const {
        const int n = size();
        MatrixXd m = MatrixXd::Zero(n, n);
        m.diagonal() = diag;
        m.diagonal(1) = upper;
        m.diagonal(-1) = lower;
        return m;
    }

    Tridiag& axpy(double s, const Tridiag& o) {
        lower += s * o.lower;
        diag += s * o.diag;
        upper += s * o.upper;
        return *this;
    }
};

/// LU factorization of a tridiagonal system without pivoting (Thomas).
/// The backward Euler matrix M + dt*S is diagonally dominant for
/// admissible coefficients, so pivoting is not needed; a vanishing pivot
/// is reported as SolveError.
class TridiagLU {
public:
    TridiagLU() = default;

    explicit TridiagLU(const Tridiag& t) : l_(t.lower), d_(t.diag), u_(t.upper) {
        const int n = t.size();
        for (int i = 1; i < n; ++i) {
            if (std::abs(d_[i - 1]) < 1e-300)
                throw SolveError("tridiagonal factorization hit a zero pivot");
            l_[i - 1] /= d_[i - 1];
            d_[i] -= l_[i - 1] * u_[i - 1];
        }
        if (std::abs(d_[n - 1]) < 1e-300)
            throw SolveError("tridiagonal factorization hit a zero pivot");
    }

    VectorXd solve(VectorXd rhs) const {
        const int n = static_cast<int>(d_.size());
        for (int i = 1; i < n; ++i) rhs[i] -= l_[i - 1] * rhs[i - 1];
        rhs[n - 1] /= d_[n - 1];
        for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - u_[i] * rhs[i + 1]) / d_[i];
        return rhs;
    }

private:
    VectorXd l_, d_, u_;
};

/// Assembled backward Euler system on the interior nodes, plus the
/// boundary-lift coupling vectors. Immutable after assembly.
struct FemSystem {
    SpatialMesh mesh;
    double dt = 0.0;
    bool lumped = false;

    Tridiag M;        // mass matrix
    Tridiag S;        // stiffness matrix of B(u, v)
    TridiagLU K_lu;   // factorization of M + dt*S, reused across all steps

    // Coupling of the affine boundary lift psi_L = (x_R-x)/(x_R-x_L),
    // psi_R = (x-x_L)/(x_R-x_L) to the interior test functions:
    //   mass_lift[j]  = int psi phi_j dx
    //   stiff_lift[j] = B(psi, phi_j)
    VectorXd mass_lift_L, mass_lift_R;
    VectorXd stiff_lift_L, stiff_lift_R;

    // Lift values at the interior nodes.
    VectorXd psi_L, psi_R;

    int interior_count() const { return M.size(); }

    // Appendix-style forcing vectors (per-step coefficients of the old and
    // new boundary value after moving everything to the right-hand side).
    VectorXd F_L1() const { return -mass_lift_L; }
    VectorXd F_R1() const { return -mass_lift_R; }
    VectorXd F_L2() const { return mass_lift_L - dt * stiff_lift_L; }
    VectorXd F_R2() const { return mass_lift_R - dt * stiff_lift_R; }
};

namespace detail {

// 2-point Gauss-Legendre on [x0, x1]; exact through cubic integrands,
// which covers every product of linears appearing in the assembly.
template <typename F>
double gauss2(double x0, double x1, F f) {
    const double h = x1 - x0;
    const double m = 0.5 * (x0 + x1);
    const double d = 0.5 * h / std::sqrt(3.0);
    return 0.5 * h * (f(m - d) + f(m + d));
}

} // namespace detail

/// Builds mass/stiffness matrices and boundary-lift vectors with exact
/// hat-function integrals. With `lumped`, the mass matrix becomes
/// diag(int phi_j dx) and the lift mass couplings are lumped the same way,
/// which makes the system algebraically identical to the finite-difference
/// stencil for constant coefficients on a uniform mesh.
inline FemSystem assemble(const SpatialMesh& mesh, const CoefficientField& coeffs,
                          double dt, bool lumped = false) {
    const int ne = mesh.element_count();
    const int ni = mesh.interior_count();
    if (coeffs.element_count() != ne)
        throw AssemblyError("coefficient field size does not match mesh");
    for (int e = 0; e < ne; ++e)
        if (!(coeffs.a[e] > 0.0))
            throw AssemblyError("parabolicity: a >= eps fails at element " +
                                std::to_string(e));
    if (!(dt > 0.0)) throw AssemblyError("time step must be positive");

    FemSystem sys;
    sys.mesh = mesh;
    sys.dt = dt;
    sys.lumped = lumped;
    sys.M = Tridiag::zero(ni);
    sys.S = Tridiag::zero(ni);
    sys.mass_lift_L = VectorXd::Zero(ni);
    sys.mass_lift_R = VectorXd::Zero(ni);
    sys.stiff_lift_L = VectorXd::Zero(ni);
    sys.stiff_lift_R = VectorXd::Zero(ni);
    sys.psi_L = VectorXd::Zero(ni);
    sys.psi_R = VectorXd::Zero(ni);

    const double xl = mesh.x_left(), xr = mesh.x_right();
    const double L = mesh.length();
    const double dpsi_L = -1.0 / L, dpsi_R = 1.0 / L;
    auto psi_l = [&](double x) { return (xr - x) / L; };
    auto psi_r = [&](double x) { return (x - xl) / L; };

    VectorXd phi_integral = VectorXd::Zero(ni); // int phi_j dx, for lumping

    for (int e = 0; e < ne; ++e) {
        const double x0 = mesh.nodes[e], x1 = mesh.nodes[e + 1];
        const double h = x1 - x0;
        const double a = coeffs.a[e], b = coeffs.b[e], c = coeffs.c[e];
        // local basis: N0 falling, N1 rising on [x0, x1]
        auto n0 = [&](double x) { return (x1 - x) / h; };
        auto n1 = [&](double x) { return (x - x0) / h; };
        const double dn[2] = {-1.0 / h, 1.0 / h};

        // global node indices of the two local nodes; interior index or -1
        const int gi[2] = {e, e + 1};
        auto interior_index = [&](int gnode) {
            return (gnode >= 1 && gnode <= ni) ? gnode - 1 : -1;
        };

        for (int j = 0; j < 2; ++j) {
            const int row = interior_index(gi[j]);
            if (row < 0) continue;
            auto phi_j = [&](double x) { return j == 0 ? n0(x) : n1(x); };

            phi_integral[row] += detail::gauss2(x0, x1, phi_j);
            sys.mass_lift_L[row] +=
                detail::gauss2(x0, x1, [&](double x) { return psi_l(x) * phi_j(x); });
            sys.mass_lift_R[row] +=
                detail::gauss2(x0, x1, [&](double x) { return psi_r(x) * phi_j(x); });
            sys.stiff_lift_L[row] += detail::gauss2(x0, x1, [&](double x) {
                return a * dpsi_L * dn[j] + b * dpsi_L * phi_j(x) + c * psi_l(x) * phi_j(x);
            });
            sys.stiff_lift_R[row] += detail::gauss2(x0, x1, [&](double x) {
                return a * dpsi_R * dn[j] + b * dpsi_R * phi_j(x) + c * psi_r(x) * phi_j(x);
            });

            for (int k = 0; k < 2; ++k) {
                const int col = interior_index(gi[k]);
                if (col < 0) continue;
                auto phi_k = [&](double x) { return k == 0 ? n0(x) : n1(x); };
                const double mass =
                    detail::gauss2(x0, x1, [&](double x) { return phi_k(x) * phi_j(x); });
                const double stiff = detail::gauss2(x0, x1, [&](double x) {
                    return a * dn[k] * dn[j] + b * dn[k] * phi_j(x) +
                           c * phi_k(x) * phi_j(x);
                });
                if (row == col) {
                    sys.M.diag[row] += mass;
                    sys.S.diag[row] += stiff;
                } else if (col == row + 1) {
                    sys.M.upper[row] += mass;
                    sys.S.upper[row] += stiff;
                } else {
                    sys.M.lower[col] += mass;
                    sys.S.lower[col] += stiff;
                }
            }
        }
    }

    for (int j = 0; j < ni; ++j) {
        const double x = mesh.nodes[j + 1];
        sys.psi_L[j] = psi_l(x);
        sys.psi_R[j] = psi_r(x);
    }

    if (lumped) {
        sys.M = Tridiag::zero(ni);
        sys.M.diag = phi_integral;
        sys.mass_lift_L = sys.psi_L.cwiseProduct(phi_integral);
        sys.mass_lift_R = sys.psi_R.cwiseProduct(phi_integral);
    }

    Tridiag k = sys.M;
    k.axpy(dt, sys.S);
    sys.K_lu = TridiagLU(k);
    return sys;
}

/// Homogeneous-boundary initial state and the affine lift.
struct LiftSplit {
    VectorXd u0;    // g at interior nodes minus lift(T_L0, T_R0)
    VectorXd psi_L; // lift basis at interior nodes
    VectorXd psi_R;

    double lift_nodal(double t_l, double t_r, int interior_node) const {
        return t_l * psi_L[interior_node] + t_r * psi_R[interior_node];
    }
};

inline LiftSplit lift_split(const SpatialMesh& mesh, const InitialCondition& g,
                            const BoundarySeries& bseries) {
    const int ni = mesh.interior_count();
    LiftSplit ls;
    ls.psi_L = VectorXd::Zero(ni);
    ls.psi_R = VectorXd::Zero(ni);
    ls.u0 = VectorXd::Zero(ni);
    const double L = mesh.length();
    for (int j = 0; j < ni; ++j) {
        const double x = mesh.nodes[j + 1];
        ls.psi_L[j] = (mesh.x_right() - x) / L;
        ls.psi_R[j] = (x - mesh.x_left()) / L;
        ls.u0[j] = g.g[j + 1] - bseries.T_L0 * ls.psi_L[j] - bseries.T_R0 * ls.psi_R[j];
    }
    return ls;
}

/// Local boundary values of one backward Euler step.
struct StepBc {
    double t_l_old = 0.0, t_l_new = 0.0;
    double t_r_old = 0.0, t_r_new = 0.0;
};

/// One backward Euler step of the homogeneous-boundary unknowns:
/// (M + dt*S) u1 = M u + (T_old - T_new) mass_lift - dt T_new stiff_lift.
inline VectorXd step(const FemSystem& sys, const VectorXd& u, const StepBc& bc) {
    VectorXd rhs = sys.M.apply(u);
    rhs += (bc.t_l_old - bc.t_l_new) * sys.mass_lift_L;
    rhs += (bc.t_r_old - bc.t_r_new) * sys.mass_lift_R;
    rhs -= sys.dt * bc.t_l_new * sys.stiff_lift_L;
    rhs -= sys.dt * bc.t_r_new * sys.stiff_lift_R;
    return sys.K_lu.solve(rhs);
}

/// The discrete solution as an explicit linear function of initial and
/// boundary data. Because the stepped system is time-invariant, every
/// boundary propagator column is a shift of one impulse response, so only
/// the two impulse-response blocks are materialized; the full matrices are
/// reconstructed on demand.
struct PropagatorSet {
    MatrixXd B;     // (I-1)x(I-1) one-step map (M + dt S)^{-1} M
    MatrixXd h_L;   // column m = interior response at t_{m+1} to T_L = e_1
    MatrixXd h_R;   // (lift included)
    VectorXd psi_L; // nodal lift values
    VectorXd psi_R;
    int steps = 0;  // N

    int interior_count() const { return static_cast<int>(B.rows()); }

    /// A_n = B^n.
    MatrixXd A_n(int n) const {
        MatrixXd p = MatrixXd::Identity(B.rows(), B.cols());
        for (int k = 0; k < n; ++k) p = B * p;
        return p;
    }

    /// Reconstruction map of the full solution: T_n-contribution of T_L.
    MatrixXd AL_n(int n) const { return boundary_map(h_L, n); }
    MatrixXd AR_n(int n) const { return boundary_map(h_R, n); }

    /// Homogeneous-problem map (lift column removed).
    MatrixXd AL_tilde_n(int n) const {
        MatrixXd m = AL_n(n);
        m.col(n - 1) -= psi_L;
        return m;
    }
    MatrixXd AR_tilde_n(int n) const {
        MatrixXd m = AR_n(n);
        m.col(n - 1) -= psi_R;
        return m;
    }

private:
    MatrixXd boundary_map(const MatrixXd& h, int n) const {
        MatrixXd m = MatrixXd::Zero(h.rows(), steps);
        for (int k = 1; k <= n; ++k) m.col(k - 1) = h.col(n - k);
        return m;
    }
};

inline PropagatorSet build_propagators(const FemSystem& sys, int steps) {
    if (steps < 1) throw DomainError("propagators need N >= 1");
    const int ni = sys.interior_count();
    PropagatorSet p;
    p.steps = steps;
    p.psi_L = sys.psi_L;
    p.psi_R = sys.psi_R;

    p.B = MatrixXd::Zero(ni, ni);
    for (int j = 0; j < ni; ++j)
        p.B.col(j) = sys.K_lu.solve(sys.M.apply(VectorXd::Unit(ni, j)));

    // Impulse response: boundary series e_1, zero initial data. The lift
    // contributes psi only at the impulse time itself.
    auto impulse = [&](bool left) {
        MatrixXd h(ni, steps);
        VectorXd u = VectorXd::Zero(ni);
        for (int n = 1; n <= steps; ++n) {
            StepBc bc;
            if (left) {
                bc.t_l_old = (n == 2) ? 1.0 : 0.0;
                bc.t_l_new = (n == 1) ? 1.0 : 0.0;
            } else {
                bc.t_r_old = (n == 2) ? 1.0 : 0.0;
                bc.t_r_new = (n == 1) ? 1.0 : 0.0;
            }
            u = step(sys, u, bc);
            h.col(n - 1) = u;
            if (n == 1) h.col(0) += left ? sys.psi_L : sys.psi_R;
        }
        return h;
    };
    p.h_L = impulse(true);
    p.h_R = impulse(false);
    return p;
}

/// Deterministic part of the solution: response to the initial condition
/// and the known t_0 boundary values, with the unknown boundary series set
/// to zero. Column n-1 holds d_n.
inline MatrixXd deterministic_term(const FemSystem& sys, const InitialCondition& g,
                                   double t_l0, double t_r0, int steps) {
    BoundarySeries zero;
    zero.T_L = VectorXd::Zero(steps);
    zero.T_R = VectorXd::Zero(steps);
    zero.T_L0 = t_l0;
    zero.T_R0 = t_r0;
    LiftSplit ls = lift_split(sys.mesh, g, zero);
    MatrixXd d(sys.interior_count(), steps);
    VectorXd u = ls.u0;
    for (int n = 1; n <= steps; ++n) {
        StepBc bc;
        bc.t_l_old = (n == 1) ? t_l0 : 0.0;
        bc.t_r_old = (n == 1) ? t_r0 : 0.0;
        u = step(sys, u, bc);
        d.col(n - 1) = u;
    }
    return d;
}

/// Interior solution history by sequential stepping, lift included.
inline MatrixXd solve_full(const FemSystem& sys, const InitialCondition& g,
                           const BoundarySeries& bseries, int steps) {
    if (bseries.T_L.size() < steps || bseries.T_R.size() < steps)
        throw DomainError("boundary series shorter than requested horizon");
    LiftSplit ls = lift_split(sys.mesh, g, bseries);
    MatrixXd t(sys.interior_count(), steps);
    VectorXd u = ls.u0;
    for (int n = 1; n <= steps; ++n) {
        StepBc bc;
        bc.t_l_old = (n == 1) ? bseries.T_L0 : bseries.T_L[n - 2];
        bc.t_r_old = (n == 1) ? bseries.T_R0 : bseries.T_R[n - 2];
        bc.t_l_new = bseries.T_L[n - 1];
        bc.t_r_new = bseries.T_R[n - 1];
        u = step(sys, u, bc);
        t.col(n - 1) = u + bseries.T_L[n - 1] * ls.psi_L + bseries.T_R[n - 1] * ls.psi_R;
    }
    return t;
}

/// Solution history via the propagator representation
/// T_n = d_n + sum_k h(n-k) T_k; equals solve_full by construction and is
/// cross-checked in tests.
inline MatrixXd propagate(const PropagatorSet& props, const MatrixXd& det,
                          const VectorXd& t_l, const VectorXd& t_r) {
    const int steps = props.steps;
    MatrixXd t = det;
    for (int n = 1; n <= steps; ++n)
        for (int k = 1; k <= n; ++k)
            t.col(n - 1) += props.h_L.col(n - k) * t_l[k - 1] +
                            props.h_R.col(n - k) * t_r[k - 1];
    return t;
}

} // namespace parapost
