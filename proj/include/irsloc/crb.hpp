#pragma once

#include "irsloc/beamforming.hpp"
#include "irsloc/channel.hpp"
#include "irsloc/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace irsloc {

/// Position-domain Fisher information per target plus the per-path echo
/// energies it was assembled from. g[q] already carries the eta/(c^2 sigma^2)
/// factor, so CRB_q = tr(g[q]^{-1}); c0 = c^2 sigma^2 / eta.
struct FimBlocks {
    std::vector<Eigen::Matrix2d> g;       // per target, 2x2 PSD
    std::vector<Eigen::MatrixXd> echo;    // per target, K x K energies E_{q,k,l}
    double c0 = 0.0;
    std::vector<int> singular_targets;    // flagged during assembly

    bool singular(int q) const {
        return std::find(singular_targets.begin(), singular_targets.end(), q) !=
               singular_targets.end();
    }
};

/// ||H_I2I(q,k,l) diag(theta_k) H_B2I(k) w_k||^2, evaluated through the rank-1
/// factorization of both hops. Zero when panel k is deactivated.
inline double echo_energy(const ChannelSet& c, const BeamSolution& beams, int q, int k, int l) {
    if (!beams.is_active(k) || beams.theta[k].size() == 0) return 0.0;
    const std::complex<double> bs_gain = c.a_b2i_tx[k].dot(beams.w_matrix.col(k));  // a^H w
    const std::complex<double> reflect_gain = c.reflect_vector(q, k).dot(beams.theta[k]);  // v^H theta
    const double m_sens = static_cast<double>(c.a_t2i(l, q).size());
    const double amp = c.alpha_i2i[q](k, l) * c.alpha_b2i(k);
    return amp * amp * m_sens * std::norm(bs_gain) * std::norm(reflect_gain);
}

/// Worst zero-forcing residual max |a_b2i(k1)^H w_k2| over active k1 != k2.
inline double orthogonality_residual(const ChannelSet& c, const BeamSolution& beams) {
    double worst = 0.0;
    for (int k1 : beams.active_set)
        for (int k2 : beams.active_set) {
            if (k1 == k2) continue;
            worst = std::max(worst, std::abs(c.a_b2i_tx[k1].dot(beams.w_matrix.col(k2))));
        }
    return worst;
}

/// Assembles the 2x2 position FIM per target:
///   G_q = eta/(c^2 sigma^2) * sum_{k,l} E_{q,k,l} [[a^2, ab], [ab, b^2]].
/// Panels outside the active set contribute nothing as reflectors; their
/// sensors still count on the receive side.
inline FimBlocks position_fim(const ChannelSet& c, const GeometryCoefficients& geom,
                              const BeamSolution& beams, const Scenario& s) {
    FimBlocks fim;
    const int n_tgt = c.n_tgt;
    const int k_irs = c.k_irs;
    fim.c0 = kSpeedOfLight * kSpeedOfLight * s.noise_power / s.eta;
    fim.g.assign(n_tgt, Eigen::Matrix2d::Zero());
    fim.echo.assign(n_tgt, Eigen::MatrixXd::Zero(k_irs, k_irs));

    const double scale = 1.0 / fim.c0;
    for (int q = 0; q < n_tgt; ++q) {
        for (int k : beams.active_set) {
            for (int l = 0; l < k_irs; ++l) {
                const double e = echo_energy(c, beams, q, k, l);
                fim.echo[q](k, l) = e;
                const double a = geom.a[q](k, l);
                const double b = geom.b[q](k, l);
                fim.g[q](0, 0) += e * a * a;
                fim.g[q](0, 1) += e * a * b;
                fim.g[q](1, 1) += e * b * b;
            }
        }
        fim.g[q](1, 0) = fim.g[q](0, 1);
        fim.g[q] *= scale;
        const double det = fim.g[q].determinant();
        const double norm2 = fim.g[q].squaredNorm();
        if (!(det > 1e-14 * norm2)) fim.singular_targets.push_back(q);
    }
    return fim;
}

/// Per-target CRB, traces and the worst case.
struct CrbReport {
    Eigen::VectorXd crb;      // m^2 per target
    double worst_crb = 0.0;   // m^2
    BeamSolution beams;
    std::vector<double> objective_trace;     // solver objective per accepted outer step
    std::vector<int> iteration_counts;       // solver-specific counters
    std::map<std::string, double> baselines; // optional baseline worst-CRB values
    bool qos_within_slack = true;            // multi-target: CRB <= (1/phi)(1+slack)
};

/// tr(G_q^{-1}) per target, cross-checked against the explicit 2x2 scalar
/// fraction. Throws on a singular block, naming the target.
inline CrbReport crb_trace(const FimBlocks& fim) {
    CrbReport report;
    const int n_tgt = static_cast<int>(fim.g.size());
    report.crb.resize(n_tgt);
    for (int q = 0; q < n_tgt; ++q) {
        if (fim.singular(q))
            throw std::runtime_error("crb_trace: singular position FIM for target " + std::to_string(q) +
                                     " (observable from effectively one direction)");
        const Eigen::Matrix2d& g = fim.g[q];
        const double det = g.determinant();
        const double via_inverse = g.inverse().trace();
        const double via_fraction = (g(0, 0) + g(1, 1)) / det;
        if (std::abs(via_inverse - via_fraction) > 1e-9 * std::abs(via_fraction))
            throw std::logic_error("crb_trace: inverse-trace and scalar-fraction routes disagree");
        report.crb(q) = via_fraction;
    }
    report.worst_crb = report.crb.maxCoeff();
    return report;
}

/// Rank-1 information increase never raises the trace of the inverse:
/// tr((G_q + delta * G_dir)^{-1}) <= tr(G_q^{-1}) + 1e-12 with G_dir the
/// direction matrix [[a^2, ab], [ab, b^2]] of path (q, k, l).
inline bool weyl_monotonicity_check(const FimBlocks& fim, const GeometryCoefficients& geom,
                                    int q, int k, int l, double delta) {
    if (delta < 0.0) throw std::invalid_argument("weyl_monotonicity_check: delta must be >= 0");
    const double a = geom.a[q](k, l);
    const double b = geom.b[q](k, l);
    Eigen::Matrix2d dir;
    dir << a * a, a * b, a * b, b * b;
    const Eigen::Matrix2d bumped = fim.g[q] + delta * dir;
    return bumped.inverse().trace() <= fim.g[q].inverse().trace() + 1e-12;
}

}  // namespace irsloc
