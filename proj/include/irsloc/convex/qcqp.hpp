#pragma once

#include "irsloc/convex/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

namespace irsloc::convex {

struct QcqpOptions {
    double gap_tol = 1e-9;       // target duality gap per constraint unit
    double newton_tol = 1e-11;   // Newton decrement^2 threshold
    int max_newton = 80;
    double barrier_mu = 10.0;
    int max_barrier_rounds = 24;
    double feas_margin = 1e-9;   // phase-1 success needs max_i q_i < -margin*scale
};

namespace detail {

struct BarrierEval {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    bool interior = false;
};

/// t * c^T x - sum log(-q_i(x)) - sum_masked log x_j, with derivatives.
inline BarrierEval eval_barrier(const QcqpProblem& p, const Eigen::VectorXd& c, double t,
                                const Eigen::VectorXd& x, bool need_derivs) {
    const int n = p.dim();
    BarrierEval ev;
    ev.value = t * c.dot(x);
    if (need_derivs) {
        ev.grad = t * c;
        ev.hess = Eigen::MatrixXd::Zero(n, n);
    }
    for (const auto& q : p.ineqs) {
        const Eigen::VectorXd hx = q.hess * x;
        const double qi = 0.5 * x.dot(hx) + q.grad.dot(x) + q.constant;
        if (!(qi < 0.0)) return ev;  // not interior
        ev.value -= std::log(-qi);
        if (need_derivs) {
            const Eigen::VectorXd gi = hx + q.grad;
            ev.grad += gi / (-qi);
            ev.hess += gi * gi.transpose() / (qi * qi) + q.hess / (-qi);
        }
    }
    for (int j = 0; j < n; ++j) {
        if (!p.var_nonneg(j)) continue;
        if (!(x(j) > 0.0)) return ev;
        ev.value -= std::log(x(j));
        if (need_derivs) {
            ev.grad(j) -= 1.0 / x(j);
            ev.hess(j, j) += 1.0 / (x(j) * x(j));
        }
    }
    ev.interior = true;
    return ev;
}

/// Newton minimization of the barrier at fixed t, restricted to eq_a x = eq_b.
/// The equality residual is kept in the Newton right-hand side so roundoff
/// drift off the manifold self-corrects. x must be strictly interior on entry.
/// stop_early, when given, is polled after each accepted step.
template <typename StopFn = std::nullptr_t>
inline int newton_center(const QcqpProblem& p, const Eigen::VectorXd& c, double t,
                         Eigen::VectorXd& x, const QcqpOptions& opts,
                         const StopFn& stop_early = nullptr) {
    const int n = p.dim();
    const int me = static_cast<int>(p.eq_a.rows());
    int steps = 0;
    for (; steps < opts.max_newton; ++steps) {
        BarrierEval ev = eval_barrier(p, c, t, x, true);
        if (!ev.interior) break;
        Eigen::VectorXd dx(n);
        if (me == 0) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.hess);
            dx = -ldlt.solve(ev.grad);
        } else {
            // Jacobi-scale the Hessian block; the barrier diagonal spans many
            // orders of magnitude near the boundary and would otherwise make
            // the saddle system numerically singular.
            Eigen::VectorXd d(n);
            for (int j = 0; j < n; ++j) d(j) = 1.0 / std::sqrt(std::max(ev.hess(j, j), 1e-12));
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + me, n + me);
            kkt.topLeftCorner(n, n) = d.asDiagonal() * ev.hess * d.asDiagonal();
            kkt.topRightCorner(n, me) = d.asDiagonal() * p.eq_a.transpose();
            kkt.bottomLeftCorner(me, n) = p.eq_a * d.asDiagonal();
            Eigen::VectorXd rhs(n + me);
            rhs.head(n) = -d.cwiseProduct(ev.grad);
            rhs.tail(me) = p.eq_b - p.eq_a * x;
            dx = d.cwiseProduct(kkt.fullPivLu().solve(rhs).head(n));
        }
        const double decrement2 = -ev.grad.dot(dx);
        if (!(decrement2 > opts.newton_tol)) break;
        // Backtrack to stay interior and decrease the barrier.
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::VectorXd cand = x + step * dx;
            BarrierEval trial = eval_barrier(p, c, t, cand, false);
            if (trial.interior && trial.value <= ev.value - 0.25 * step * decrement2 + 1e-14 * std::abs(ev.value)) {
                x = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        if constexpr (!std::is_same_v<StopFn, std::nullptr_t>) {
            if (stop_early(x)) return steps + 1;
        }
    }
    return steps;
}

inline double max_violation(const QcqpProblem& p, const Eigen::VectorXd& x) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& q : p.ineqs)
        worst = std::max(worst, 0.5 * x.dot(q.hess * x) + q.grad.dot(x) + q.constant);
    return worst;
}

enum class Phase1Outcome { found, infeasible, unknown };

/// Phase 1: find a strictly interior point, or decide infeasibility. Works on
/// the lifted problem min s, q_i(x) <= s, with the nonneg barrier kept on x.
inline Phase1Outcome find_interior(const QcqpProblem& p, Eigen::VectorXd& x_out,
                                   const QcqpOptions& opts) {
    const int n = p.dim();
    // Starting x: positive on masked coordinates, equality-consistent if possible.
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    if (p.eq_a.rows() > 0) {
        bool ok = false;
        for (double base : {1.0, 10.0, 0.1}) {
            x = Eigen::VectorXd::Constant(n, base);
            x += p.eq_a.colPivHouseholderQr().solve(p.eq_b - p.eq_a * x);
            ok = true;
            for (int j = 0; j < n; ++j)
                if (p.var_nonneg(j) && x(j) <= 1e-9) ok = false;
            if (ok) break;
        }
        if (!ok) return Phase1Outcome::unknown;  // no cheap interior start on the affine set
    }

    // Lifted problem over (x, s).
    QcqpProblem lifted;
    lifted.objective = Eigen::VectorXd::Zero(n + 1);
    lifted.objective(n) = 1.0;
    lifted.nonneg.assign(n + 1, false);
    for (int j = 0; j < n; ++j) lifted.nonneg[j] = p.var_nonneg(j);
    for (const auto& q : p.ineqs) {
        QcqpProblem::QuadIneq lq;
        lq.hess = Eigen::MatrixXd::Zero(n + 1, n + 1);
        lq.hess.topLeftCorner(n, n) = q.hess;
        lq.grad = Eigen::VectorXd::Zero(n + 1);
        lq.grad.head(n) = q.grad;
        lq.grad(n) = -1.0;
        lq.constant = q.constant;
        lifted.ineqs.push_back(std::move(lq));
    }
    if (p.eq_a.rows() > 0) {
        lifted.eq_a = Eigen::MatrixXd::Zero(p.eq_a.rows(), n + 1);
        lifted.eq_a.leftCols(n) = p.eq_a;
        lifted.eq_b = p.eq_b;
    } else {
        lifted.eq_a.resize(0, n + 1);
        lifted.eq_b.resize(0);
    }

    const double v0 = max_violation(p, x);
    const double scale = 1.0 + std::abs(v0);
    Eigen::VectorXd xs(n + 1);
    xs.head(n) = x;
    xs(n) = v0 + scale;

    // The lifted objective is unbounded below once the interior is reached,
    // so poll feasibility after every Newton step.
    const auto interior_reached = [&](const Eigen::VectorXd& cand) {
        return max_violation(p, cand.head(n)) < -opts.feas_margin * scale;
    };
    double t = 1.0;
    double gap = scale;
    for (int round = 0; round < opts.max_barrier_rounds; ++round) {
        newton_center(lifted, lifted.objective, t, xs, opts, interior_reached);
        const double viol = max_violation(p, xs.head(n));
        if (viol < -opts.feas_margin * scale) {
            x_out = xs.head(n);
            return Phase1Outcome::found;
        }
        gap = static_cast<double>(lifted.ineqs.size() + n) / t;
        if (gap < 1e-10 * scale) break;  // central path converged with s >= 0
        t *= opts.barrier_mu;
    }
    // s could not be driven negative; decisive only if the path converged.
    const double final_viol = max_violation(p, xs.head(n));
    if (gap < 1e-10 * scale && final_viol > -opts.feas_margin * scale)
        return Phase1Outcome::infeasible;
    return Phase1Outcome::unknown;
}

}  // namespace detail

/// Two-phase log-barrier interior-point solve. Statuses: optimal when the
/// central path reached the target gap, infeasible when phase 1 proves the
/// interior empty, numerical-failure otherwise.
inline QcqpSolution solve_qcqp(const QcqpProblem& p, const QcqpOptions& opts = {}) {
    p.validate();
    const int n = p.dim();
    QcqpSolution sol;

    Eigen::VectorXd x;
    switch (detail::find_interior(p, x, opts)) {
        case detail::Phase1Outcome::found: break;
        case detail::Phase1Outcome::infeasible:
            sol.status = SolveStatus::infeasible;
            return sol;
        case detail::Phase1Outcome::unknown:
            sol.status = SolveStatus::numerical_failure;
            return sol;
    }

    const double obj_scale = std::max(1.0, p.objective.cwiseAbs().maxCoeff());
    const Eigen::VectorXd c = p.objective / obj_scale;
    int n_masked = 0;
    for (int j = 0; j < n; ++j)
        if (p.var_nonneg(j)) ++n_masked;
    const double m_total = static_cast<double>(p.ineqs.size() + n_masked);

    double t = 1.0;
    int rounds = 0;
    for (; rounds < opts.max_barrier_rounds; ++rounds) {
        sol.newton_steps += detail::newton_center(p, c, t, x, opts);
        if (m_total / t <= opts.gap_tol) break;
        t *= opts.barrier_mu;
    }

    if (p.eq_a.rows() > 0) {
        // Squash accumulated manifold drift before reporting.
        const Eigen::MatrixXd gram = p.eq_a * p.eq_a.transpose();
        x += p.eq_a.transpose() * gram.ldlt().solve(p.eq_b - p.eq_a * x);
    }
    sol.x = x;
    sol.objective = p.objective.dot(x);

    // KKT residual: stationarity with the barrier's implied multipliers plus
    // the worst complementarity product (scaled back to the original data).
    Eigen::VectorXd stat = c;
    double comp = 0.0;
    for (const auto& q : p.ineqs) {
        const double qi = 0.5 * x.dot(q.hess * x) + q.grad.dot(x) + q.constant;
        const double mu = 1.0 / (t * (-qi));
        stat += mu * (q.hess * x + q.grad);
        comp = std::max(comp, mu * (-qi));
    }
    for (int j = 0; j < n; ++j) {
        if (!p.var_nonneg(j)) continue;
        stat(j) -= 1.0 / (t * x(j));
        comp = std::max(comp, 1.0 / t);
    }
    double primal_eq = 0.0;
    if (p.eq_a.rows() > 0) {
        const Eigen::VectorXd y = p.eq_a.transpose().colPivHouseholderQr().solve(-stat);
        stat += p.eq_a.transpose() * y;
        primal_eq = (p.eq_a * x - p.eq_b).cwiseAbs().maxCoeff();
    }
    sol.kkt_residual = std::max({stat.cwiseAbs().maxCoeff(), comp, primal_eq});
    sol.status = (m_total == 0.0 || m_total / t <= opts.gap_tol) ? SolveStatus::optimal
                                                                 : SolveStatus::numerical_failure;
    return sol;
}

}  // namespace irsloc::convex
