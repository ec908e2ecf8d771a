#pragma once

#include <Eigen/Core>

namespace qv {

// Orthonormal basis (columns) of {x : A x = 0}; rank decided by relative
// singular value threshold.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& a, double rel_tol = 1e-10);

struct QpResult {
    Eigen::VectorXd x;
    double objective = 0.0;  // 1/2 x'Hx - f'x
    int iterations = 0;
    bool converged = false;
};

// min 1/2 x'Hx - f'x  s.t.  E x = 0,  G x >= 0.
// H positive definite on null(E). The feasible set is a cone, so x = 0 is a
// feasible start. Primal active-set method.
QpResult solve_cone_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& f,
                       const Eigen::MatrixXd& e, const Eigen::MatrixXd& g,
                       int max_iter = 500);

struct MinNormResult {
    Eigen::VectorXd x;        // min-norm point of conv(columns)
    Eigen::VectorXd weights;  // convex weights, one per column
    bool converged = false;
};

// Wolfe's minimum-norm-point algorithm on the convex hull of the columns.
MinNormResult min_norm_point(const Eigen::MatrixXd& pts, int max_iter = 1000);

}  // namespace qv
