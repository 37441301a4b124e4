#pragma once

#include "irsloc/scenario.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace irsloc {

/// Delay-gradient coefficients tying a bistatic TOA to the target's (x, y).
///
/// For every (target q, reflect IRS k, sense IRS l):
///   a[q](k,l) = -c * d tau / d x_T,q
///   b[q](k,l) = -c * d tau / d y_T,q
/// Both reduce to sums of horizontal direction cosines from the target toward
/// the two panel footprints, so |a|, |b| <= 2 and both are symmetric in (k,l).
struct GeometryCoefficients {
    std::vector<Eigen::MatrixXd> a;      // per target, K x K
    std::vector<Eigen::MatrixXd> b;      // per target, K x K
    std::vector<Eigen::MatrixXd> delay;  // per target, K x K, seconds
};

/// Two-leg propagation delay (IRS k -> target q -> IRS l) in seconds.
inline double bistatic_delay(const Scenario& s, int q, int k, int l) {
    const double d1 = (s.irs_positions[k] - s.target_positions[q]).norm();
    const double d2 = (s.irs_positions[l] - s.target_positions[q]).norm();
    return (d1 + d2) / kSpeedOfLight;
}

inline GeometryCoefficients delay_gradients(const Scenario& s) {
    const int k_irs = s.n_irs();
    const int n_tgt = s.n_targets();
    GeometryCoefficients g;
    g.a.resize(n_tgt);
    g.b.resize(n_tgt);
    g.delay.resize(n_tgt);
    for (int q = 0; q < n_tgt; ++q) {
        g.a[q].resize(k_irs, k_irs);
        g.b[q].resize(k_irs, k_irs);
        g.delay[q].resize(k_irs, k_irs);
        // Horizontal direction cosines from target q toward each panel.
        Eigen::VectorXd ux(k_irs), uy(k_irs), dist(k_irs);
        for (int k = 0; k < k_irs; ++k) {
            const Eigen::Vector3d diff = s.irs_positions[k] - s.target_positions[q];
            const double d = diff.norm();
            if (!(d > 1e-12))
                throw std::invalid_argument("delay_gradients: target " + std::to_string(q) +
                                            " coincides with IRS " + std::to_string(k));
            ux(k) = diff.x() / d;
            uy(k) = diff.y() / d;
            dist(k) = d;
        }
        for (int k = 0; k < k_irs; ++k) {
            for (int l = 0; l < k_irs; ++l) {
                g.a[q](k, l) = ux(k) + ux(l);
                g.b[q](k, l) = uy(k) + uy(l);
                g.delay[q](k, l) = (dist(k) + dist(l)) / kSpeedOfLight;
            }
        }
    }
    return g;
}

struct SeparabilityReport {
    bool separable = true;
    std::vector<std::pair<int, int>> violators;  // target index pairs (q1, q2)
};

/// Targets are separable when every pair of delays belonging to distinct
/// targets differs by more than the effective pulse width.
inline SeparabilityReport check_separability(const Scenario& s) {
    const int k_irs = s.n_irs();
    const int n_tgt = s.n_targets();
    SeparabilityReport report;
    if (n_tgt < 2) return report;

    std::vector<Eigen::MatrixXd> delays(n_tgt);
    for (int q = 0; q < n_tgt; ++q) {
        delays[q].resize(k_irs, k_irs);
        for (int k = 0; k < k_irs; ++k)
            for (int l = 0; l < k_irs; ++l) delays[q](k, l) = bistatic_delay(s, q, k, l);
    }
    const auto min_cross_gap = [&](int q1, int q2) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k_irs * k_irs; ++i)
            for (int j = 0; j < k_irs * k_irs; ++j)
                best = std::min(best, std::abs(delays[q1](i) - delays[q2](j)));
        return best;
    };
    for (int q1 = 0; q1 < n_tgt; ++q1) {
        for (int q2 = q1 + 1; q2 < n_tgt; ++q2) {
            if (min_cross_gap(q1, q2) <= s.pulse_width) {
                report.separable = false;
                report.violators.emplace_back(q1, q2);
            }
        }
    }
    return report;
}

}  // namespace irsloc
