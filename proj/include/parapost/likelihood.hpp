#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>

#include "parapost/errors.hpp"
#include "parapost/fem.hpp"
#include "parapost/model.hpp"

namespace parapost {

/// Residuals of the propagator representation against the interior data:
/// R_n = d_n + AL_n T_L + AR_n T_R - Y_n (full rows, unmasked).
struct ResidualStack {
    MatrixXd residuals;     // (I-1) x N
    MatrixXd deterministic; // d_n - Y_n, the boundary-free part
};

inline ResidualStack residual_stack(const PropagatorSet& props, const MatrixXd& det,
                                    const ObservationSet& obs,
                                    const BoundarySeries& bseries) {
    ResidualStack rs;
    rs.deterministic = det - obs.interior();
    rs.residuals = propagate(props, det, bseries.T_L, bseries.T_R) - obs.interior();
    return rs;
}

/// Log of the joint likelihood of (theta, T_L, T_R): Gaussian interior
/// residual terms plus the boundary misfit terms, normalization included.
inline double joint_log_likelihood(const PropagatorSet& props, const MatrixXd& det,
                                   const ObservationSet& obs,
                                   const BoundarySeries& bseries,
                                   const Selection& sel) {
    if (obs.sigma <= 0.0) throw DomainError("sigma must be > 0");
    const MatrixXd t = propagate(props, det, bseries.T_L, bseries.T_R);

    // boundary readings are masked to the same time windows as the interior
    const VectorXd y_l = obs.boundary_left();
    const VectorXd y_r = obs.boundary_right();
    double ss = 0.0;
    for (const auto& [w0, w1] : sel.windows)
        for (int n = w0; n <= w1; ++n) {
            for (int r : sel.rows) {
                const double e = t(r, n - 1) - obs.Y(r + 1, n - 1);
                ss += e * e;
            }
            const double el = bseries.T_L[n - 1] - y_l[n - 1];
            const double er = bseries.T_R[n - 1] - y_r[n - 1];
            ss += el * el + er * er;
        }

    const int count = sel.reading_count() + 2 * sel.time_count();
    return -count * (0.5 * std::log(2.0 * M_PI) + std::log(obs.sigma)) -
           0.5 * ss / (obs.sigma * obs.sigma);
}

inline double joint_log_likelihood(const PropagatorSet& props, const MatrixXd& det,
                                   const ObservationSet& obs,
                                   const BoundarySeries& bseries) {
    return joint_log_likelihood(props, det, obs, bseries,
                                Selection::full(obs.interior_count(), obs.step_count()));
}

/// Blocks of the closed-form boundary-marginalized likelihood. The stacked
/// 2N x 2N precision matrix is factorized once; its leading and trailing
/// Cholesky blocks are exactly the factors of Lambda0^{-1} and of the Schur
/// complement Lambda1^{-1}.
struct MarginalLikelihoodParts {
    int n_steps = 0;
    double sigma = 0.0, sigma_p = 0.0;

    MatrixXd delta_L, delta_R, a_LR; // N x N accumulations
    VectorXd delta_2L, delta_2R;     // length N
    VectorXd t_L1, t_R2;             // completed-square vectors
    Eigen::LLT<MatrixXd> precision_llt; // stacked [T_L; T_R] precision

    double log_value = 0.0;

    double d_sigma2() const { return 1.0 / (sigma * sigma); }
    double d_sigma_p2() const { return 1.0 / (sigma_p * sigma_p); }

    // The block accessors below assume a full time selection (every boundary
    // reading present); they back the predictive boundary moments.

    MatrixXd lambda0_inv() const {
        return (d_sigma2() + d_sigma_p2()) *
                   MatrixXd::Identity(n_steps, n_steps) +
               d_sigma2() * delta_L;
    }
    MatrixXd lambda0() const { return lambda0_inv().llt().solve(MatrixXd::Identity(n_steps, n_steps)); }
    MatrixXd lambda1_inv() const {
        const MatrixXd l0 = lambda0();
        return (d_sigma2() + d_sigma_p2()) *
                   MatrixXd::Identity(n_steps, n_steps) +
               d_sigma2() * delta_R -
               d_sigma2() * d_sigma2() * a_LR.transpose() * l0 * a_LR;
    }
    MatrixXd lambda1() const { return lambda1_inv().llt().solve(MatrixXd::Identity(n_steps, n_steps)); }
    VectorXd t_R3() const {
        return -d_sigma2() * a_LR.transpose() * (lambda0() * t_L1);
    }
};

namespace detail {

// Prefix sums of lagged column correlations: table(d, m) =
// sum_{m'=0..m} dot(x.col(m'+d), y.col(m')). Turns every Delta block into
// O(1) lookups, which is what makes the hyperparameter grid affordable.
inline MatrixXd lag_prefix(const MatrixXd& x, const MatrixXd& y) {
    const int n = static_cast<int>(x.cols());
    MatrixXd table = MatrixXd::Zero(n, n);
    for (int d = 0; d < n; ++d) {
        double acc = 0.0;
        for (int m = 0; m + d < n; ++m) {
            acc += x.col(m + d).dot(y.col(m));
            table(d, m) = acc;
        }
    }
    return table;
}

// sum over selected times n >= max(k, l) of dot(X.col(n-k), Y.col(n-l)),
// with k, l 1-based; `xy` is lag_prefix(x, y), `yx` is lag_prefix(y, x).
inline double lagged_sum(const MatrixXd& xy, const MatrixXd& yx, int k, int l,
                         const Selection& sel) {
    const int hi = std::max(k, l);
    const int d = std::abs(k - l);
    const MatrixXd& table = (k <= l) ? xy : yx;
    double v = 0.0;
    for (const auto& [w0, w1] : sel.windows) {
        const int n_lo = std::max(hi, w0);
        if (w1 < n_lo) continue;
        const int m_hi = w1 - hi;
        const int m_lo = n_lo - hi;
        v += table(d, m_hi);
        if (m_lo > 0) v -= table(d, m_lo - 1);
    }
    return v;
}

} // namespace detail

/// Closed-form marginalization of the Gaussian boundary priors out of the
/// joint likelihood. All determinant and quadratic terms are assembled in
/// log domain from one Cholesky factorization of the stacked precision.
inline MarginalLikelihoodParts marginal_parts(const PropagatorSet& props,
                                              const MatrixXd& det,
                                              const ObservationSet& obs,
                                              const BoundaryPrior& prior,
                                              const Selection& sel) {
    if (obs.sigma <= 0.0) throw DomainError("sigma must be > 0");
    if (prior.sigma_p <= 0.0) throw DomainError("sigma_p must be > 0");
    const int n = props.steps;
    const int nr = static_cast<int>(sel.rows.size());

    MarginalLikelihoodParts parts;
    parts.n_steps = n;
    parts.sigma = obs.sigma;
    parts.sigma_p = prior.sigma_p;

    // restrict the impulse responses and residual data to selected rows
    MatrixXd h_l(nr, n), h_r(nr, n), resid(nr, n);
    for (int i = 0; i < nr; ++i) {
        const int r = sel.rows[i];
        h_l.row(i) = props.h_L.row(r);
        h_r.row(i) = props.h_R.row(r);
        resid.row(i) = obs.Y.row(r + 1).head(n) - det.row(r); // Y_n - d_n
    }

    const MatrixXd p_ll = detail::lag_prefix(h_l, h_l);
    const MatrixXd p_rr = detail::lag_prefix(h_r, h_r);
    const MatrixXd p_lr = detail::lag_prefix(h_l, h_r);
    const MatrixXd p_rl = detail::lag_prefix(h_r, h_l);

    parts.delta_L.resize(n, n);
    parts.delta_R.resize(n, n);
    parts.a_LR.resize(n, n);
    for (int k = 1; k <= n; ++k)
        for (int l = k; l <= n; ++l) {
            const double dl = detail::lagged_sum(p_ll, p_ll, k, l, sel);
            const double dr = detail::lagged_sum(p_rr, p_rr, k, l, sel);
            parts.delta_L(k - 1, l - 1) = dl;
            parts.delta_L(l - 1, k - 1) = dl;
            parts.delta_R(k - 1, l - 1) = dr;
            parts.delta_R(l - 1, k - 1) = dr;
            parts.a_LR(k - 1, l - 1) = detail::lagged_sum(p_lr, p_rl, k, l, sel);
            if (l != k)
                parts.a_LR(l - 1, k - 1) = detail::lagged_sum(p_lr, p_rl, l, k, sel);
        }

    // boundary readings are masked to the same time windows as the interior
    VectorXd wmask = VectorXd::Zero(n);
    parts.delta_2L = VectorXd::Zero(n);
    parts.delta_2R = VectorXd::Zero(n);
    double resid_sq = 0.0;
    for (const auto& [w0, w1] : sel.windows)
        for (int t = w0; t <= w1; ++t) {
            wmask[t - 1] = 1.0;
            resid_sq += resid.col(t - 1).squaredNorm();
            for (int k = 1; k <= t; ++k) {
                parts.delta_2L[k - 1] += h_l.col(t - k).dot(resid.col(t - 1));
                parts.delta_2R[k - 1] += h_r.col(t - k).dot(resid.col(t - 1));
            }
        }

    const double s2 = parts.d_sigma2();
    const double sp2 = parts.d_sigma_p2();
    const VectorXd y_l = wmask.cwiseProduct(obs.boundary_left());
    const VectorXd y_r = wmask.cwiseProduct(obs.boundary_right());

    parts.t_L1 = sp2 * prior.mu_L + s2 * y_l + s2 * parts.delta_2L;
    parts.t_R2 = sp2 * prior.mu_R + s2 * y_r + s2 * parts.delta_2R;

    MatrixXd q(2 * n, 2 * n);
    q.topLeftCorner(n, n) = sp2 * MatrixXd::Identity(n, n) +
                            s2 * MatrixXd(wmask.asDiagonal()) + s2 * parts.delta_L;
    q.bottomRightCorner(n, n) = sp2 * MatrixXd::Identity(n, n) +
                                s2 * MatrixXd(wmask.asDiagonal()) + s2 * parts.delta_R;
    q.topRightCorner(n, n) = s2 * parts.a_LR;
    q.bottomLeftCorner(n, n) = s2 * parts.a_LR.transpose();

    parts.precision_llt.compute(q);
    if (parts.precision_llt.info() != Eigen::Success)
        throw NumericalError("boundary precision matrix is not positive definite");

    double log_det_q = 0.0;
    for (int i = 0; i < 2 * n; ++i)
        log_det_q += 2.0 * std::log(parts.precision_llt.matrixLLT()(i, i));

    VectorXd h(2 * n);
    h.head(n) = parts.t_L1;
    h.tail(n) = parts.t_R2;
    const double quad = h.dot(parts.precision_llt.solve(h));

    const int count = sel.reading_count() + 2 * sel.time_count();
    const double log2pi = std::log(2.0 * M_PI);
    parts.log_value = -count * (0.5 * log2pi + std::log(obs.sigma)) -
                      2.0 * n * (0.5 * log2pi + std::log(prior.sigma_p)) +
                      n * log2pi - 0.5 * log_det_q -
                      0.5 * sp2 * (prior.mu_L.squaredNorm() + prior.mu_R.squaredNorm()) -
                      0.5 * s2 * (y_l.squaredNorm() + y_r.squaredNorm() + resid_sq) +
                      0.5 * quad;
    return parts;
}

inline MarginalLikelihoodParts marginal_parts(const PropagatorSet& props,
                                              const MatrixXd& det,
                                              const ObservationSet& obs,
                                              const BoundaryPrior& prior) {
    return marginal_parts(props, det, obs, prior,
                          Selection::full(obs.interior_count(), obs.step_count()));
}

/// Everything the likelihood needs besides the coefficients themselves.
struct LikelihoodContext {
    SpatialMesh mesh;
    TimeGrid grid;
    InitialCondition g;
    ObservationSet obs;
    BoundaryPrior prior_b;
    Selection sel;
    bool lumped = false;

    double t_l0() const { return g.g[0]; }
    double t_r0() const { return g.g[g.g.size() - 1]; }
};

/// Convenience composition: assemble -> propagators -> marginal_parts.
inline double marginal_log_likelihood(const CoefficientField& coeffs,
                                      const LikelihoodContext& ctx) {
    const FemSystem sys = assemble(ctx.mesh, coeffs, ctx.grid.dt(), ctx.lumped);
    const PropagatorSet props = build_propagators(sys, ctx.grid.step_count);
    const MatrixXd det =
        deterministic_term(sys, ctx.g, ctx.t_l0(), ctx.t_r0(), ctx.grid.step_count);
    return marginal_parts(props, det, ctx.obs, ctx.prior_b, ctx.sel).log_value;
}

/// Joint likelihood at fixed (known) boundary values.
inline double joint_log_likelihood(const CoefficientField& coeffs,
                                   const LikelihoodContext& ctx,
                                   const BoundarySeries& bseries) {
    const FemSystem sys = assemble(ctx.mesh, coeffs, ctx.grid.dt(), ctx.lumped);
    const PropagatorSet props = build_propagators(sys, ctx.grid.step_count);
    const MatrixXd det =
        deterministic_term(sys, ctx.g, ctx.t_l0(), ctx.t_r0(), ctx.grid.step_count);
    return joint_log_likelihood(props, det, ctx.obs, bseries, ctx.sel);
}

} // namespace parapost
