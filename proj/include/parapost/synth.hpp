#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "parapost/errors.hpp"
#include "parapost/fem.hpp"
#include "parapost/model.hpp"
#include "parapost/rng.hpp"

namespace parapost {

/// Cooling problem with Robin boundary conditions used only for data
/// generation. The reference grid is `refine` times finer than the
/// observation grid in both space and time, and the scheme
/// (Crank-Nicolson) differs from the inference-path backward Euler, so
/// data are never produced by the operator being inverted.
struct RobinProblem {
    VectorXd theta_field;    // one value per observation-mesh element
    double h_over_kappa = 1.0;
    double t_out = 20.0;
    double t0 = 100.0;
    int refine = 8;
};

struct ReferenceSolution {
    VectorXd x;  // reference nodes
    VectorXd t;  // reference times including t = 0
    MatrixXd T;  // node x time

    double at(double xq, double tq) const {
        const int ix = nearest(x, xq);
        const int it = nearest(t, tq);
        return T(ix, it);
    }

    static int nearest(const VectorXd& grid, double q) {
        int best = 0;
        double dist = std::abs(grid[0] - q);
        for (int i = 1; i < grid.size(); ++i) {
            const double d = std::abs(grid[i] - q);
            if (d < dist) {
                dist = d;
                best = i;
            }
        }
        const double h = grid.size() > 1 ? grid[1] - grid[0] : 1.0;
        if (dist > 1e-6 * std::max(1.0, h))
            throw AlignmentError("query point is not on the reference grid");
        return best;
    }
};

/// Crank-Nicolson on the refined grid with second-order Robin conditions
/// (ghost node elimination), variable theta in flux form.
inline ReferenceSolution reference_solve(const RobinProblem& prob,
                                         const SpatialMesh& obs_mesh,
                                         const TimeGrid& obs_grid) {
    if (!(prob.h_over_kappa > 0.0)) throw DomainError("h/kappa must be > 0");
    if (prob.refine < 8) throw ReferenceError("reference grid must be >= 8x finer");
    if (prob.theta_field.size() != obs_mesh.element_count())
        throw DomainError("theta field must have one value per observation element");
    if (!obs_mesh.is_uniform()) throw DomainError("reference solver expects a uniform mesh");

    const int m = obs_mesh.element_count() * prob.refine; // reference elements
    const int steps = obs_grid.step_count * prob.refine;
    const double xl = obs_mesh.x_left(), xr = obs_mesh.x_right();
    const double dx = (xr - xl) / m;
    const double dt = obs_grid.t_end / steps;
    const double r = prob.h_over_kappa;

    ReferenceSolution sol;
    sol.x = VectorXd::LinSpaced(m + 1, xl, xr);
    sol.t = VectorXd::LinSpaced(steps + 1, 0.0, obs_grid.t_end);
    sol.T.resize(m + 1, steps + 1);
    sol.T.col(0).setConstant(prob.t0);

    // theta at the refined half-nodes, from the piecewise constant field
    VectorXd theta_half(m);
    for (int i = 0; i < m; ++i) {
        const double mid = xl + (i + 0.5) * dx;
        int e = static_cast<int>((mid - xl) / obs_mesh.element_length(0));
        e = std::min(e, obs_mesh.element_count() - 1);
        theta_half[i] = prob.theta_field[e];
    }

    // spatial operator L (tridiagonal) and constant source q from T_out:
    // dT/dt = L T + q
    Tridiag op = Tridiag::zero(m + 1);
    VectorXd q = VectorXd::Zero(m + 1);
    const double inv_dx2 = 1.0 / (dx * dx);
    for (int i = 1; i < m; ++i) {
        op.lower[i - 1] = theta_half[i - 1] * inv_dx2;
        op.upper[i] = theta_half[i] * inv_dx2;
        op.diag[i] = -(theta_half[i - 1] + theta_half[i]) * inv_dx2;
    }
    // left Robin: ghost T_{-1} = T_1 - 2 dx r (T_0 - T_out)
    op.diag[0] = -2.0 * theta_half[0] * inv_dx2 * (1.0 + dx * r);
    op.upper[0] = 2.0 * theta_half[0] * inv_dx2;
    q[0] = 2.0 * theta_half[0] * inv_dx2 * dx * r * prob.t_out;
    // right Robin: ghost T_{m+1} = T_{m-1} + 2 dx r (T_out - T_m)
    op.diag[m] = -2.0 * theta_half[m - 1] * inv_dx2 * (1.0 + dx * r);
    op.lower[m - 1] = 2.0 * theta_half[m - 1] * inv_dx2;
    q[m] = 2.0 * theta_half[m - 1] * inv_dx2 * dx * r * prob.t_out;

    // Crank-Nicolson: (I - dt/2 L) T1 = (I + dt/2 L) T0 + dt q
    Tridiag lhs = Tridiag::zero(m + 1);
    lhs.diag.setOnes();
    lhs.axpy(-0.5 * dt, op);
    const TridiagLU lu(lhs);
    Tridiag rhs_op = Tridiag::zero(m + 1);
    rhs_op.diag.setOnes();
    rhs_op.axpy(0.5 * dt, op);

    for (int n = 1; n <= steps; ++n) {
        VectorXd rhs = rhs_op.apply(sol.T.col(n - 1)) + dt * q;
        sol.T.col(n) = lu.solve(rhs);
    }
    return sol;
}

struct DatasetSpec {
    int sensor_count = 7;  // I+1 equispaced thermocouples
    int step_count = 60;   // N
    double t_end = 1.0;
    double sigma_d = 0.56; // generating noise level
    std::uint64_t seed = 0;
};

/// Ground truth recorded alongside a synthetic dataset, for assertions
/// and the known-boundary inference mode.
struct DatasetTruth {
    VectorXd theta_field;    // generating field (constant: all equal)
    MatrixXd noiseless;      // sensor x time readings before noise
    BoundarySeries boundary; // true boundary values at t_1..t_N
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    ObservationSet obs;
    DatasetTruth truth;
};

/// Samples the reference solution at the sensor locations and observation
/// times and adds i.i.d. Gaussian noise.
inline SyntheticDataset make_dataset(const RobinProblem& prob, const DatasetSpec& spec) {
    if (!(spec.sigma_d >= 0.0)) throw DomainError("sigma_d must be >= 0");
    const int sensors = spec.sensor_count;
    const SpatialMesh mesh = SpatialMesh::uniform(0.0, 1.0, sensors - 1);
    const TimeGrid grid(spec.t_end, spec.step_count);
    const ReferenceSolution ref = reference_solve(prob, mesh, grid);

    SyntheticDataset ds;
    ds.truth.theta_field = prob.theta_field;
    ds.truth.seed = spec.seed;
    ds.truth.noiseless.resize(sensors, spec.step_count);
    for (int s = 0; s < sensors; ++s)
        for (int n = 1; n <= spec.step_count; ++n)
            ds.truth.noiseless(s, n - 1) = ref.at(mesh.nodes[s], grid.time(n));
    ds.truth.boundary.T_L = ds.truth.noiseless.row(0).transpose();
    ds.truth.boundary.T_R = ds.truth.noiseless.row(sensors - 1).transpose();
    ds.truth.boundary.T_L0 = prob.t0;
    ds.truth.boundary.T_R0 = prob.t0;

    Rng rng(spec.seed);
    ds.obs.Y = ds.truth.noiseless;
    for (int n = 0; n < spec.step_count; ++n)
        for (int s = 0; s < sensors; ++s)
            ds.obs.Y(s, n) += spec.sigma_d * rng.normal();
    ds.obs.sigma = spec.sigma_d > 0.0 ? spec.sigma_d : 1.0;
    ds.obs.Y0 = VectorXd::Constant(sensors - 2, prob.t0);
    return ds;
}

} // namespace parapost
