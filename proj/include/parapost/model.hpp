#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "parapost/errors.hpp"

namespace parapost {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// 1D mesh x_L = x_0 < x_1 < ... < x_I = x_R. Interior unknowns live at
/// nodes 1..I-1; coefficient fields are piecewise constant per element.
struct SpatialMesh {
    VectorXd nodes; // size I+1, strictly increasing

    static SpatialMesh uniform(double x_l, double x_r, int element_count) {
        if (element_count < 2) throw DomainError("mesh needs at least 2 elements");
        if (!(x_r > x_l)) throw DomainError("mesh requires x_R > x_L");
        SpatialMesh m;
        m.nodes = VectorXd::LinSpaced(element_count + 1, x_l, x_r);
        // LinSpaced endpoints are exact, interior nodes carry rounding;
        // rebuild so spacing is bit-identical across the mesh
        for (int i = 1; i < element_count; ++i)
            m.nodes[i] = x_l + (x_r - x_l) * static_cast<double>(i) / element_count;
        return m;
    }

    int element_count() const { return static_cast<int>(nodes.size()) - 1; }
    int node_count() const { return static_cast<int>(nodes.size()); }
    int interior_count() const { return element_count() - 1; }
    double x_left() const { return nodes[0]; }
    double x_right() const { return nodes[nodes.size() - 1]; }
    double length() const { return x_right() - x_left(); }
    double element_length(int e) const { return nodes[e + 1] - nodes[e]; }

    bool is_uniform(double rel_tol = 1e-12) const {
        const double h = length() / element_count();
        for (int e = 0; e < element_count(); ++e)
            if (std::abs(element_length(e) - h) > rel_tol * h) return false;
        return true;
    }

    bool strictly_increasing() const {
        for (int i = 0; i + 1 < nodes.size(); ++i)
            if (!(nodes[i] < nodes[i + 1])) return false;
        return true;
    }
};

/// Uniform time grid t_n = n*dt, n = 0..N. Observations are taken at
/// t_1..t_N; t_0 holds the known initial condition only.
struct TimeGrid {
    double t_end = 1.0;
    int step_count = 1; // N

    TimeGrid() = default;
    TimeGrid(double t_end_, int n) : t_end(t_end_), step_count(n) {
        if (n < 1) throw DomainError("time grid needs N >= 1");
        if (!(t_end_ > 0.0)) throw DomainError("time grid needs t_end > 0");
    }

    double dt() const { return t_end / step_count; }
    double time(int n) const { return t_end * static_cast<double>(n) / step_count; }
};

/// PDE coefficients theta(x) = (a, b, c), one sample per element.
struct CoefficientField {
    VectorXd a; // diffusion, must stay >= eps > 0
    VectorXd b; // advection
    VectorXd c; // reaction

    static CoefficientField diffusion(const VectorXd& a) {
        CoefficientField f;
        f.a = a;
        f.b = VectorXd::Zero(a.size());
        f.c = VectorXd::Zero(a.size());
        return f;
    }

    static CoefficientField constant_diffusion(double theta, int element_count) {
        return diffusion(VectorXd::Constant(element_count, theta));
    }

    int element_count() const { return static_cast<int>(a.size()); }
};

/// Unknown Dirichlet boundary values at t_1..t_N. The known t_0 values
/// (pinned to the initial condition by P3) are kept separately so all
/// boundary vectors have length N.
struct BoundarySeries {
    VectorXd T_L; // length N
    VectorXd T_R; // length N
    double T_L0 = 0.0;
    double T_R0 = 0.0;
};

struct BoundaryPrior {
    VectorXd mu_L; // length N
    VectorXd mu_R; // length N
    double sigma_p = 1.0;
};

struct InitialCondition {
    VectorXd g; // nodal values at x_0..x_I

    VectorXd interior() const { return g.segment(1, g.size() - 2); }
};

/// Subset of interior readings entering the likelihood: a set of interior
/// rows and a union of observation-time ranges (1-based, inclusive).
/// Boundary readings are always kept in full.
struct Selection {
    std::vector<int> rows;                       // indices into 0..I-2
    std::vector<std::pair<int, int>> windows;    // [first, last] over 1..N

    static Selection full(int interior_count, int step_count) {
        Selection s;
        s.rows.resize(interior_count);
        for (int i = 0; i < interior_count; ++i) s.rows[i] = i;
        s.windows = {{1, step_count}};
        return s;
    }

    bool is_full(int interior_count, int step_count) const {
        return static_cast<int>(rows.size()) == interior_count &&
               windows.size() == 1 && windows[0].first == 1 &&
               windows[0].second == step_count;
    }

    bool contains_time(int n) const {
        for (const auto& [a, b] : windows)
            if (n >= a && n <= b) return true;
        return false;
    }

    int time_count() const {
        int c = 0;
        for (const auto& [a, b] : windows) c += b - a + 1;
        return c;
    }

    int reading_count() const { return static_cast<int>(rows.size()) * time_count(); }

    bool empty() const { return rows.empty() || windows.empty() || time_count() == 0; }
};

/// Noisy readings Y ((I+1) x N), measurement noise level, and the known
/// initial interior state.
struct ObservationSet {
    MatrixXd Y;      // (I+1) x N
    double sigma = 1.0;
    VectorXd Y0;     // known interior initial values (length I-1)

    int sensor_count() const { return static_cast<int>(Y.rows()); }
    int interior_count() const { return sensor_count() - 2; }
    int step_count() const { return static_cast<int>(Y.cols()); }

    Eigen::Block<const MatrixXd> interior() const {
        return Y.block(1, 0, interior_count(), step_count());
    }
    VectorXd boundary_left() const { return Y.row(0).transpose(); }
    VectorXd boundary_right() const { return Y.row(Y.rows() - 1).transpose(); }

    void check() const {
        if (sigma <= 0.0) throw DomainError("observation noise sigma must be > 0");
        if (Y.rows() < 3 || Y.cols() < 1) throw DomainError("observation matrix too small");
        if (Y0.size() != interior_count()) throw DomainError("Y0 length mismatch");
    }
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Checks the structural assumptions (P1-P3 and parabolicity) without
/// throwing; every violated assumption yields one entry.
inline ValidationReport validate_problem(const SpatialMesh& mesh, const TimeGrid& grid,
                                         const CoefficientField& coeffs,
                                         const InitialCondition& g,
                                         double eps = 1e-12) {
    ValidationReport rep;
    if (!mesh.strictly_increasing())
        rep.violations.push_back("mesh: nodes must be strictly increasing");
    if (grid.step_count < 1) rep.violations.push_back("time grid: N >= 1 required");
    if (coeffs.element_count() != mesh.element_count())
        rep.violations.push_back("coefficients: one sample per element required");
    for (int e = 0; e < coeffs.element_count(); ++e) {
        if (!(coeffs.a[e] >= eps)) {
            rep.violations.push_back("parabolicity: a >= eps fails at element " +
                                     std::to_string(e));
            break;
        }
    }
    auto finite = [](const VectorXd& v) { return v.allFinite(); };
    if (!finite(coeffs.a) || !finite(coeffs.b) || !finite(coeffs.c))
        rep.violations.push_back("P1 boundedness: coefficient samples must be finite");
    if (g.g.size() != mesh.node_count())
        rep.violations.push_back("initial condition: nodal values must match mesh");
    else if (!finite(g.g))
        rep.violations.push_back("P2 integrability: initial values must be finite");
    return rep;
}

/// P3 consistency of the boundary series with the initial condition.
inline void check_p3(const InitialCondition& g, const BoundarySeries& b,
                     ValidationReport& rep, double tol = 1e-10) {
    const double gl = g.g[0], gr = g.g[g.g.size() - 1];
    const double scale = std::max({1.0, std::abs(gl), std::abs(gr)});
    if (std::abs(gl - b.T_L0) > tol * scale || std::abs(gr - b.T_R0) > tol * scale)
        rep.violations.push_back("P3 consistency: g must match T_L(0), T_R(0)");
}

} // namespace parapost
