#pragma once

// Brute-force references used by the test suites. Solver modules never include
// this header; each oracle re-derives its quantity with its own formulas and
// accumulation order.

#include "irsloc/beamforming.hpp"
#include "irsloc/channel.hpp"
#include "irsloc/geometry.hpp"
#include "irsloc/scenario.hpp"
#include "irsloc/single_target.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace irsloc::oracles {

struct GridSpec {
    int dims = 1;
    int resolution = 200;
    long max_points = 10'000'000;

    long point_count() const {
        // simplex grid: compositions of `resolution` into dims parts
        long count = 1;
        for (int i = 1; i < dims; ++i) {
            count = count * (resolution + i) / i;
            if (count > max_points) return count;
        }
        return count;
    }
    void validate() const {
        if (dims < 1 || resolution < 1) throw std::invalid_argument("grid spec: bad dimensions");
        if (point_count() > max_points)
            throw std::invalid_argument("grid spec: grid too large");
    }
};

struct GridSearchResult {
    Eigen::VectorXd p;
    double objective = 0.0;  // fraction value (numerator / denominator)
};

namespace detail {

inline double exact_fraction(const FractionalProblem& fp, const Eigen::VectorXd& p) {
    const double num = (fp.a + fp.b).dot(p);
    const double den = fp.a.dot(p) * fp.b.dot(p) - fp.c.dot(p) * fp.c.dot(p);
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return num / den;
}

/// Enumerates budget shares u on the simplex sum u_i = 1 (u_i >= 0) at the
/// given resolution; p_i = u_i * p_max / h_i.
template <typename Visitor>
inline void walk_simplex(int dims, int resolution, Visitor&& visit) {
    std::vector<int> t(dims, 0);
    // iterate compositions of `resolution` into dims nonnegative parts
    const std::function<void(int, int)> rec = [&](int d, int remaining) {
        if (d == dims - 1) {
            t[d] = remaining;
            visit(t);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            t[d] = v;
            rec(d + 1, remaining - v);
        }
    };
    rec(0, resolution);
}

}  // namespace detail

/// Exhaustive minimization of the exact single-target fraction over the
/// simplex {h^T p = p_max, p >= 0}, followed by two local refinement passes
/// around the incumbent to remove most of the resolution error.
inline GridSearchResult grid_power_search(const FractionalProblem& fp, int resolution) {
    const int k = fp.dim();
    if (k > 4) throw std::invalid_argument("grid_power_search: K <= 4 only");
    GridSpec spec{k, resolution};
    spec.validate();

    Eigen::VectorXd best_u = Eigen::VectorXd::Zero(k);
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd p(k), u(k);
    detail::walk_simplex(k, resolution, [&](const std::vector<int>& t) {
        for (int i = 0; i < k; ++i) {
            u(i) = static_cast<double>(t[i]) / resolution;
            p(i) = u(i) * fp.p_max / fp.h(i);
        }
        const double val = detail::exact_fraction(fp, p);
        if (val < best) {
            best = val;
            best_u = u;
        }
    });

    // Local refinement: re-grid a shrinking box around the incumbent shares.
    double half = 1.0 / resolution;
    const int local_res = 16;
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd center = best_u;
        std::vector<int> t(k - 1, 0);
        const std::function<void(int)> rec = [&](int d) {
            if (d == k - 1) {
                double sum = 0.0;
                for (int i = 0; i < k - 1; ++i) {
                    u(i) = center(i) + (2.0 * t[i] / local_res - 1.0) * half;
                    if (u(i) < 0.0) u(i) = 0.0;
                    sum += u(i);
                }
                if (sum > 1.0) return;
                u(k - 1) = 1.0 - sum;
                for (int i = 0; i < k; ++i) p(i) = u(i) * fp.p_max / fp.h(i);
                const double val = detail::exact_fraction(fp, p);
                if (val < best) {
                    best = val;
                    best_u = u;
                }
                return;
            }
            for (int v = 0; v <= local_res; ++v) {
                t[d] = v;
                rec(d + 1);
            }
        };
        if (k == 1) break;
        rec(0);
        half /= local_res / 2;
    }

    GridSearchResult result;
    result.p.resize(k);
    for (int i = 0; i < k; ++i) result.p(i) = best_u(i) * fp.p_max / fp.h(i);
    result.objective = best;
    return result;
}

/// Central finite differences of the bistatic delays, scaled by -c.
inline GeometryCoefficients fd_jacobian(const Scenario& s, double step) {
    if (!(step > 0.0 && step <= 1.0))
        throw std::invalid_argument("fd_jacobian: step must be in (0, 1] meters");
    GeometryCoefficients g;
    const int n_tgt = s.n_targets();
    const int k_irs = s.n_irs();
    g.a.assign(n_tgt, Eigen::MatrixXd(k_irs, k_irs));
    g.b.assign(n_tgt, Eigen::MatrixXd(k_irs, k_irs));
    g.delay.assign(n_tgt, Eigen::MatrixXd(k_irs, k_irs));
    for (int q = 0; q < n_tgt; ++q) {
        Scenario plus = s, minus = s;
        for (int axis = 0; axis < 2; ++axis) {
            plus.target_positions[q] = s.target_positions[q];
            minus.target_positions[q] = s.target_positions[q];
            plus.target_positions[q](axis) += step;
            minus.target_positions[q](axis) -= step;
            for (int k = 0; k < k_irs; ++k) {
                for (int l = 0; l < k_irs; ++l) {
                    const double d =
                        (bistatic_delay(plus, q, k, l) - bistatic_delay(minus, q, k, l)) / (2.0 * step);
                    if (axis == 0)
                        g.a[q](k, l) = -kSpeedOfLight * d;
                    else
                        g.b[q](k, l) = -kSpeedOfLight * d;
                }
            }
        }
        for (int k = 0; k < k_irs; ++k)
            for (int l = 0; l < k_irs; ++l) g.delay[q](k, l) = bistatic_delay(s, q, k, l);
    }
    return g;
}

/// Dense chain-rule assembly of the position FIM: the Q K^2-long diagonal
/// delay FIM, the full 2Q x QK^2 Jacobian, and one dense triple product.
/// Echo energies come from explicit cascaded matrix products.
inline std::vector<Eigen::Matrix2d> dense_chain_rule_fim(const Scenario& s,
                                                         const BeamSolution& beams) {
    if (s.n_irs() > 4 || s.n_targets() > 3)
        throw std::invalid_argument("dense_chain_rule_fim: K <= 4, Q <= 3 only");
    const ChannelSet c = build_channels(s);
    const int k_irs = s.n_irs();
    const int n_tgt = s.n_targets();
    const int paths = k_irs * k_irs;

    // Diagonal delay FIM via explicit matrix chains.
    Eigen::VectorXd fim_tau = Eigen::VectorXd::Zero(n_tgt * paths);
    for (int q = 0; q < n_tgt; ++q) {
        for (int k = 0; k < k_irs; ++k) {
            for (int l = 0; l < k_irs; ++l) {
                double energy = 0.0;
                if (beams.is_active(k) && beams.theta[k].size() > 0) {
                    const Eigen::MatrixXcd theta_mat =
                        Eigen::MatrixXcd(beams.theta[k].asDiagonal());
                    const Eigen::VectorXcd chain =
                        c.h_i2i(q, k, l) * theta_mat * c.h_b2i[k] * beams.w_matrix.col(k);
                    energy = chain.squaredNorm();
                }
                fim_tau(q * paths + k * k_irs + l) = s.eta / s.noise_power * energy;
            }
        }
    }

    // Jacobian d tau / d u as direction-cosine sums, independently derived.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n_tgt, n_tgt * paths);
    for (int q = 0; q < n_tgt; ++q) {
        for (int k = 0; k < k_irs; ++k) {
            for (int l = 0; l < k_irs; ++l) {
                const Eigen::Vector3d dk = s.irs_positions[k] - s.target_positions[q];
                const Eigen::Vector3d dl = s.irs_positions[l] - s.target_positions[q];
                const double ax = dk.x() / dk.norm() + dl.x() / dl.norm();
                const double by = dk.y() / dk.norm() + dl.y() / dl.norm();
                jac(2 * q, q * paths + k * k_irs + l) = -ax / kSpeedOfLight;
                jac(2 * q + 1, q * paths + k * k_irs + l) = -by / kSpeedOfLight;
            }
        }
    }

    const Eigen::MatrixXd full = jac * fim_tau.asDiagonal() * jac.transpose();
    std::vector<Eigen::Matrix2d> blocks(n_tgt);
    for (int q = 0; q < n_tgt; ++q) blocks[q] = full.block<2, 2>(2 * q, 2 * q);
    return blocks;
}

}  // namespace irsloc::oracles
