#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace duoadapt {

struct BfgsOptions {
    int max_iterations = 50;
    double tolerance = 1e-8;   // relative decrease of f between iterations
    double fd_step = 1e-4;     // central-difference step for the gradient
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f_initial = 0.0;
    double f_final = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Dense BFGS with a central-difference gradient and Armijo backtracking.
// Sized for small problems (around a hundred variables); the inverse-Hessian
// approximation is kept as a full matrix. The returned point never has a
// higher objective value than the start: only accepted (decreasing) steps
// move the iterate. Objectives may return +inf to veto a trial point.
template <typename F>
BfgsResult minimize_bfgs(F&& f, const Eigen::VectorXd& x0, const BfgsOptions& opts = {}) {
    const auto n = x0.size();
    BfgsResult res;
    res.x = x0;
    res.f_initial = f(x0);
    res.f_final = res.f_initial;
    if (!std::isfinite(res.f_initial)) return res;

    auto gradient = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(n);
        Eigen::VectorXd xp = x;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double save = xp(i);
            xp(i) = save + opts.fd_step;
            const double fp = f(xp);
            xp(i) = save - opts.fd_step;
            const double fm = f(xp);
            xp(i) = save;
            g(i) = (fp - fm) / (2.0 * opts.fd_step);
        }
        return g;
    };

    Eigen::VectorXd x = x0;
    double fx = res.f_initial;
    Eigen::VectorXd g = gradient(x);
    if (!g.allFinite()) return res;
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);

    constexpr double kArmijoC1 = 1e-4;
    constexpr double kGradFloor = 1e-12;

    for (int it = 0; it < opts.max_iterations; ++it) {
        if (g.norm() <= kGradFloor) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -(h_inv * g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {  // not a descent direction, reset curvature
            h_inv.setIdentity();
            dir = -g;
            slope = g.dot(dir);
        }

        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= fx + kArmijoC1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd g_new = gradient(x_new);
        if (!g_new.allFinite()) {
            x = x_new;
            fx = f_new;
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double ys = y.dot(s);
        if (ys > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / ys;
            const Eigen::MatrixXd outer_sy = rho * s * y.transpose();
            h_inv = (Eigen::MatrixXd::Identity(n, n) - outer_sy) * h_inv *
                        (Eigen::MatrixXd::Identity(n, n) - outer_sy.transpose()) +
                    rho * s * s.transpose();
        }

        const double decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        res.iterations = it + 1;
        if (decrease <= opts.tolerance * std::max(1.0, std::abs(fx))) {
            res.converged = true;
            break;
        }
    }

    res.x = x;
    res.f_final = fx;
    return res;
}

}  // namespace duoadapt
