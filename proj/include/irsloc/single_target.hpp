#pragma once

#include "irsloc/beamforming.hpp"
#include "irsloc/channel.hpp"
#include "irsloc/crb.hpp"
#include "irsloc/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace irsloc {

struct SolverOptions {
    double eps_inner = 1e-8;      // ADMM stop: squared residual norms (normalized power units)
    double eps_outer = 1e-6;      // Dinkelbach stop: alpha increment
    int max_inner = 5000;
    int max_outer = 50;
    double zero_power_rel = 1e-8; // p_k < rel * P_max counts as zero
    int max_restarts = 3;
    double rho_margin = 2.5;      // rho = margin * beta (> 2 required)
};

/// Vector form of the single-target power-allocation fraction:
/// minimize (a + b)^T p / (p^T denom p) over {h^T p = p_max, p >= 0}, where
/// denom = (a b^T + b a^T)/2 - c c^T reproduces the exact CRB denominator.
struct FractionalProblem {
    Eigen::VectorXd a, b, c, h;
    double p_max = 1.0;
    Eigen::MatrixXd denom;
    double beta = 0.0;  // lambda_max(denom)
    double rho = 0.0;   // penalty, > 2 beta

    int dim() const { return static_cast<int>(a.size()); }

    double numerator(const Eigen::VectorXd& p) const { return (a + b).dot(p); }
    double denominator(const Eigen::VectorXd& p) const { return p.dot(denom * p); }
    double fraction(const Eigen::VectorXd& p) const { return numerator(p) / denominator(p); }

    /// f_d(p, z) = p^T (denom - beta I) p + beta z^T z - (rho/2) ||p - z||^2.
    double split_denominator(const Eigen::VectorXd& p, const Eigen::VectorXd& z) const {
        return p.dot(denom * p) - beta * p.squaredNorm() + beta * z.squaredNorm() -
               0.5 * rho * (p - z).squaredNorm();
    }

    void finalize(double rho_margin = 2.5) {
        const int k = dim();
        if (k == 0) throw std::invalid_argument("fractional problem: empty");
        if ((a.array() < 0).any() || (b.array() < 0).any())
            throw std::invalid_argument("fractional problem: a, b must be nonnegative");
        if ((h.array() <= 0).any())
            throw std::invalid_argument("fractional problem: h must be positive");
        for (int i = 0; i < k; ++i) {
            if (c(i) * c(i) > a(i) * b(i) * (1.0 + 1e-9) + 1e-300)
                throw std::invalid_argument("fractional problem: Cauchy-Schwarz c^2 <= a*b violated");
        }
        denom = 0.5 * (a * b.transpose() + b * a.transpose()) - c * c.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(denom);
        beta = eig.eigenvalues().maxCoeff();
        if (!(beta > 0.0))
            throw std::invalid_argument("fractional problem: degenerate denominator (beta <= 0)");
        rho = rho_margin * beta;
    }

    /// Equal-power feasible point with h^T p = p_max exactly.
    Eigen::VectorXd equal_power_point() const {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(dim());
        for (int i = 0; i < dim(); ++i) p(i) = p_max / (dim() * h(i));
        p *= p_max / h.dot(p);
        return p;
    }
};

/// Per-path weights alpha'_{k,l} = (alpha_i2i alpha_b2i)^2 M; the reflective
/// array gain x_k (N^2 under phase-aligned panels) multiplies the whole row.
inline FractionalProblem build_fractional(const ChannelSet& c, const GeometryCoefficients& geom,
                                          const Scenario& s, const std::vector<int>& active,
                                          const Eigen::VectorXd* reflect_gain = nullptr,
                                          double rho_margin = 2.5) {
    if (s.n_targets() != 1)
        throw std::invalid_argument("build_fractional: single-target problem requires Q = 1");
    const int ka = static_cast<int>(active.size());
    const double m_sens = static_cast<double>(s.m_sens());
    const double n2 = static_cast<double>(s.n_elem()) * static_cast<double>(s.n_elem());

    FractionalProblem fp;
    fp.a.setZero(ka);
    fp.b.setZero(ka);
    fp.c.setZero(ka);
    fp.p_max = s.p_max;
    for (int i = 0; i < ka; ++i) {
        const int k = active[i];
        const double x_k = reflect_gain ? (*reflect_gain)(i) : n2;
        for (int l = 0; l < c.k_irs; ++l) {
            const double amp = c.alpha_i2i[0](k, l) * c.alpha_b2i(k);
            const double w = amp * amp * m_sens * x_k;
            const double ga = geom.a[0](k, l);
            const double gb = geom.b[0](k, l);
            fp.a(i) += ga * ga * w;
            fp.b(i) += gb * gb * w;
            fp.c(i) += ga * gb * w;
        }
    }
    fp.h = zf_power_weights(c, active);
    fp.finalize(rho_margin);
    return fp;
}

struct AdmmInnerResult {
    Eigen::VectorXd p, z, lambda;
    bool converged = false;
    int iterations = 0;
    std::vector<Eigen::Vector3d> residual_trace;  // (|dp|^2, |dz|^2, |p-z|^2)
};

namespace detail {

/// KKT solution of the z-subproblem: quadratic over {h^T z = p_max, z >= 0}.
/// Water-filling style clamp loop with a dual-feasibility recheck so the
/// result is the exact minimizer.
inline Eigen::VectorXd admm_z_update(const FractionalProblem& fp, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& lambda) {
    const int k = fp.dim();
    const double denom_coeff = fp.rho - 2.0 * fp.beta;  // > 0
    std::vector<bool> active(k, true);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
    for (int pass = 0; pass < 4 * k + 4; ++pass) {
        double num = -denom_coeff * fp.p_max;
        double den = 0.0;
        for (int i = 0; i < k; ++i) {
            if (!active[i]) continue;
            num += (fp.rho * p(i) + lambda(i)) * fp.h(i);
            den += fp.h(i) * fp.h(i);
        }
        if (den == 0.0) throw std::logic_error("admm_z_update: active set collapsed");
        const double mu0 = num / den;
        bool clamped_any = false;
        z.setZero();
        for (int i = 0; i < k; ++i) {
            if (!active[i]) continue;
            const double zi = (fp.rho * p(i) + lambda(i) - mu0 * fp.h(i)) / denom_coeff;
            if (zi < 0.0) {
                active[i] = false;
                clamped_any = true;
            } else {
                z(i) = zi;
            }
        }
        if (clamped_any) continue;
        // Dual feasibility of clamped entries: mu_i >= 0 needs
        // mu0 >= (rho p_i + lambda_i) / h_i. Re-admit violators.
        bool readmitted = false;
        for (int i = 0; i < k; ++i) {
            if (active[i]) continue;
            if (mu0 < (fp.rho * p(i) + lambda(i)) / fp.h(i) - 1e-15) {
                active[i] = true;
                readmitted = true;
            }
        }
        if (!readmitted) return z;
    }
    return z;  // cycling guard; z is feasible for the equality on the active set
}

}  // namespace detail

/// One ADMM pass at fixed Dinkelbach parameter alpha. Closed-form updates:
/// p from the stationarity of the augmented Lagrangian, z from the KKT system
/// of the projected subproblem, lambda by multiplier ascent.
inline AdmmInnerResult admm_inner(const FractionalProblem& fp, double alpha, Eigen::VectorXd p,
                                  Eigen::VectorXd z, Eigen::VectorXd lambda,
                                  const SolverOptions& opts = {}) {
    // p-update solve matrix: (rho I + 2 beta I - 2 denom) p = rho z - lambda - alpha (a + b)
    Eigen::MatrixXd m = -2.0 * fp.denom;
    m.diagonal().array() += fp.rho + 2.0 * fp.beta;
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("admm_inner: p-update system not positive definite");

    AdmmInnerResult result;
    result.residual_trace.reserve(64);
    for (int s = 0; s < opts.max_inner; ++s) {
        const Eigen::VectorXd p_prev = p;
        const Eigen::VectorXd z_prev = z;
        p = llt.solve(fp.rho * z - lambda - alpha * (fp.a + fp.b));
        z = detail::admm_z_update(fp, p, lambda);
        lambda += fp.rho * (p - z);
        const double rp = (p - p_prev).squaredNorm();
        const double rz = (z - z_prev).squaredNorm();
        const double rpz = (p - z).squaredNorm();
        result.residual_trace.emplace_back(rp, rz, rpz);
        result.iterations = s + 1;
        if (rp <= opts.eps_inner && rz <= opts.eps_inner && rpz <= opts.eps_inner) {
            result.converged = true;
            break;
        }
    }
    result.p = std::move(p);
    result.z = std::move(z);
    result.lambda = std::move(lambda);
    return result;
}

struct DinkelbachResult {
    Eigen::VectorXd p;            // feasible minimizer (h^T p = p_max, p >= 0)
    double fraction = 0.0;        // numerator/denominator at p
    double alpha = 0.0;           // final Dinkelbach parameter
    bool converged = false;
    int outer_iterations = 0;
    long inner_iterations = 0;
    std::vector<double> fraction_trace;  // accepted outer iterates, non-increasing
};

namespace detail {

inline DinkelbachResult dinkelbach_from(const FractionalProblem& fp, Eigen::VectorXd p0,
                                        const SolverOptions& opts) {
    DinkelbachResult result;
    Eigen::VectorXd p = p0;
    Eigen::VectorXd z = p0;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(fp.dim());
    const Eigen::VectorXd center = fp.equal_power_point();

    int restarts = 0;
    double fd = fp.split_denominator(p, z);
    while (fd <= 0.0) {
        if (++restarts > opts.max_restarts)
            throw std::runtime_error(
                "dinkelbach_solve: nonpositive fraction denominator persists (geometric "
                "degeneracy, near-collinear delay gradients)");
        p = 0.99 * p + 0.01 * center;
        z = p;
        lambda.setZero();
        fd = fp.split_denominator(p, z);
    }
    double alpha = fd / fp.numerator(p);

    Eigen::VectorXd best_p = z;
    double best_fraction = fp.fraction(z);
    result.fraction_trace.push_back(best_fraction);

    for (int t = 0; t < opts.max_outer; ++t) {
        AdmmInnerResult inner = admm_inner(fp, alpha, p, z, lambda, opts);
        result.inner_iterations += inner.iterations;
        result.outer_iterations = t + 1;
        p = inner.p;
        z = inner.z;
        lambda = inner.lambda;

        fd = fp.split_denominator(p, z);
        if (fd <= 0.0) {
            if (++restarts > opts.max_restarts)
                throw std::runtime_error(
                    "dinkelbach_solve: nonpositive fraction denominator persists (geometric "
                    "degeneracy, near-collinear delay gradients)");
            p = 0.99 * best_p + 0.01 * center;
            z = p;
            lambda.setZero();
            alpha = fp.split_denominator(p, z) / fp.numerator(p);
            continue;
        }
        const double alpha_next = fd / fp.numerator(p);

        const double candidate = fp.fraction(z);
        if (candidate <= best_fraction) {
            best_fraction = candidate;
            best_p = z;
            result.fraction_trace.push_back(candidate);
        }
        if (std::abs(alpha_next - alpha) <= opts.eps_outer) {
            result.converged = true;
            alpha = alpha_next;
            break;
        }
        alpha = alpha_next;
    }
    result.p = best_p;
    result.fraction = best_fraction;
    result.alpha = alpha;
    return result;
}

}  // namespace detail

/// Dinkelbach outer loop around the ADMM inner solver. Runs internally on a
/// normalized copy (powers in units of p_max, weights in units of max(a, b))
/// so stopping thresholds are scale free; extra_inits seed additional starts
/// and the best end point wins.
inline DinkelbachResult dinkelbach_solve(const FractionalProblem& fp, const SolverOptions& opts = {},
                                         const std::vector<Eigen::VectorXd>& extra_inits = {}) {
    const double s_ab = std::max(fp.a.maxCoeff(), fp.b.maxCoeff());
    if (!(s_ab > 0.0))
        throw std::invalid_argument("dinkelbach_solve: a and b are identically zero");
    FractionalProblem scaled;
    scaled.a = fp.a / s_ab;
    scaled.b = fp.b / s_ab;
    scaled.c = fp.c / s_ab;
    scaled.h = fp.h;
    scaled.p_max = 1.0;
    scaled.finalize(fp.rho > 0.0 && fp.beta > 0.0 ? fp.rho / fp.beta : 2.5);

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(scaled.equal_power_point());
    for (const auto& init : extra_inits) {
        Eigen::VectorXd p0 = init / fp.p_max;
        p0 = p0.cwiseMax(0.0);
        const double budget = scaled.h.dot(p0);
        if (budget > 0.0) starts.push_back(p0 / budget);
    }

    DinkelbachResult best;
    bool have = false;
    for (const auto& p0 : starts) {
        DinkelbachResult r = detail::dinkelbach_from(scaled, p0, opts);
        if (!have || r.fraction < best.fraction) {
            best = std::move(r);
            have = true;
        }
    }
    best.p *= fp.p_max;
    // fraction in original units: numerator scales by s_ab * p_max,
    // denominator by s_ab^2 * p_max^2.
    best.fraction /= s_ab * fp.p_max;
    for (double& f : best.fraction_trace) f /= s_ab * fp.p_max;
    return best;
}

struct SingleTargetResult {
    BeamSolution beams;
    CrbReport report;
    std::vector<double> stage_crb;  // CRB after each selection stage
};

namespace detail {

inline BeamSolution materialize_single(const ChannelSet& c, const std::vector<int>& active,
                                       const Eigen::VectorXd& p_active) {
    BeamSolution beams;
    beams.active_set = active;
    beams.p = Eigen::VectorXd::Zero(c.k_irs);
    beams.theta.assign(c.k_irs, Eigen::VectorXcd());
    Eigen::VectorXd e(p_active.size());
    for (int i = 0; i < p_active.size(); ++i) e(i) = std::sqrt(std::max(0.0, p_active(i)));
    beams.w_matrix = zf_transmit(c, e, active);
    for (size_t i = 0; i < active.size(); ++i) {
        const int k = active[i];
        beams.p(k) = p_active(i);
        beams.theta[k] = optimal_theta(c, k, 0, beams.w_matrix.col(k));
    }
    return beams;
}

}  // namespace detail

/// Solves the single-target problem. With two_stage = true, panels whose beams
/// receive no power are deactivated and the reduced problem re-solved until
/// every active panel carries power; the inherited allocation seeds each
/// reduced solve so a stage never ends worse than its predecessor.
inline SingleTargetResult solve_single_target(const Scenario& s, const SolverOptions& opts = {},
                                              bool two_stage = true) {
    if (s.n_targets() != 1)
        throw std::invalid_argument("solve_single_target: scenario must have exactly one target");
    const ChannelSet channels = build_channels(s);
    const GeometryCoefficients geom = delay_gradients(s);

    std::vector<int> active(s.n_irs());
    std::iota(active.begin(), active.end(), 0);

    SingleTargetResult result;
    std::vector<Eigen::VectorXd> inherited;
    DinkelbachResult dr;
    long total_inner = 0;
    int total_outer = 0;
    std::vector<double> fraction_trace;
    double c0 = 0.0;

    for (;;) {
        const FractionalProblem fp = build_fractional(channels, geom, s, active, nullptr, opts.rho_margin);
        dr = dinkelbach_solve(fp, opts, inherited);
        total_inner += dr.inner_iterations;
        total_outer += dr.outer_iterations;
        fraction_trace = dr.fraction_trace;

        c0 = kSpeedOfLight * kSpeedOfLight * s.noise_power / s.eta;
        result.stage_crb.push_back(c0 * dr.fraction);

        std::vector<int> keep;
        bool dropped = false;
        for (size_t i = 0; i < active.size(); ++i) {
            if (dr.p(i) < opts.zero_power_rel * s.p_max)
                dropped = true;
            else
                keep.push_back(active[i]);
        }
        if (!two_stage || !dropped) break;
        if (keep.empty())
            throw std::runtime_error("solve_single_target: all IRSs deactivated (degenerate geometry)");
        // Inherit the surviving allocation, rescaled to the reduced budget.
        Eigen::VectorXd p_keep(keep.size());
        int j = 0;
        for (size_t i = 0; i < active.size(); ++i)
            if (dr.p(i) >= opts.zero_power_rel * s.p_max) p_keep(j++) = dr.p(i);
        inherited.assign(1, p_keep);
        active = keep;
    }

    result.beams = detail::materialize_single(channels, active, dr.p);
    const FimBlocks fim = position_fim(channels, geom, result.beams, s);
    result.report = crb_trace(fim);
    result.report.beams = result.beams;
    result.report.iteration_counts = {total_outer, static_cast<int>(total_inner)};
    result.report.objective_trace.clear();
    for (double f : fraction_trace) result.report.objective_trace.push_back(c0 * f);
    return result;
}

}  // namespace irsloc
