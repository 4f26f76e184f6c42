#pragma once

#include <Eigen/Dense>

#include "parapost/errors.hpp"
#include "parapost/fem.hpp"
#include "parapost/model.hpp"

namespace parapost {

/// Backward Euler finite differences for constant theta on a uniform mesh:
/// (I - theta*lambda*A) T_{n+1} = T_n + theta*lambda*(T_L v + T_R w),
/// with A = tridiag(1, -2, 1) and lambda = dt/dx^2. Cross-checks the FEM
/// path, to which it is algebraically identical under mass lumping.
struct FdSystem {
    int interior = 0;   // I-1
    double theta = 0.0;
    double lambda = 0.0; // dt/dx^2
    TridiagLU lu;        // factorization of I - theta*lambda*A

    double injection() const { return theta * lambda; }
};

inline FdSystem make_fd_system(const SpatialMesh& mesh, const TimeGrid& grid,
                               double theta) {
    if (!(theta > 0.0)) throw DomainError("fd path requires theta > 0");
    if (!mesh.is_uniform()) throw DomainError("fd path requires a uniform mesh");
    FdSystem sys;
    sys.interior = mesh.interior_count();
    sys.theta = theta;
    const double dx = mesh.length() / mesh.element_count();
    sys.lambda = grid.dt() / (dx * dx);

    Tridiag m = Tridiag::zero(sys.interior);
    const double tl = theta * sys.lambda;
    m.diag.setConstant(1.0 + 2.0 * tl);
    m.lower.setConstant(-tl);
    m.upper.setConstant(-tl);
    sys.lu = TridiagLU(m);
    return sys;
}

inline VectorXd fd_step(const FdSystem& sys, const VectorXd& t_n, double t_l_next,
                        double t_r_next) {
    VectorXd rhs = t_n;
    rhs[0] += sys.injection() * t_l_next;
    rhs[sys.interior - 1] += sys.injection() * t_r_next;
    return sys.lu.solve(rhs);
}

/// Duhamel matrices of the finite-difference recursion. C_n has columns
/// theta*lambda*B^{n-k+1} v; D_n the mirror image with w. AL_n/AR_n are
/// the zero-padded (I-1)xN reconstruction maps.
struct FdPropagators {
    MatrixXd B;   // (I - theta*lambda*A)^{-1}
    MatrixXd h_v; // column m = theta*lambda*B^{m+1} v
    MatrixXd h_w;
    int steps = 0;

    MatrixXd C_n(int n) const { return duhamel(h_v, n, n); }
    MatrixXd D_n(int n) const { return duhamel(h_w, n, n); }
    MatrixXd AL_n(int n) const { return duhamel(h_v, n, steps); }
    MatrixXd AR_n(int n) const { return duhamel(h_w, n, steps); }

    MatrixXd B_pow(int n) const {
        MatrixXd p = MatrixXd::Identity(B.rows(), B.cols());
        for (int k = 0; k < n; ++k) p = B * p;
        return p;
    }

private:
    MatrixXd duhamel(const MatrixXd& h, int n, int width) const {
        MatrixXd m = MatrixXd::Zero(h.rows(), width);
        for (int k = 1; k <= n; ++k) m.col(k - 1) = h.col(n - k);
        return m;
    }
};

inline FdPropagators fd_propagators(const FdSystem& sys, int steps) {
    if (steps < 1) throw DomainError("fd propagators need N >= 1");
    const int ni = sys.interior;
    FdPropagators p;
    p.steps = steps;
    p.B = MatrixXd::Zero(ni, ni);
    for (int j = 0; j < ni; ++j)
        p.B.col(j) = sys.lu.solve(VectorXd::Unit(ni, j));

    p.h_v = MatrixXd::Zero(ni, steps);
    p.h_w = MatrixXd::Zero(ni, steps);
    VectorXd v = sys.injection() * p.B.col(0);
    VectorXd w = sys.injection() * p.B.col(ni - 1);
    for (int m = 0; m < steps; ++m) {
        p.h_v.col(m) = v;
        p.h_w.col(m) = w;
        if (m + 1 < steps) {
            v = sys.lu.solve(v);
            w = sys.lu.solve(w);
        }
    }
    return p;
}

} // namespace parapost
