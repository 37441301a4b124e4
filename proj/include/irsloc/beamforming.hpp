#pragma once

#include "irsloc/channel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace irsloc {

/// Joint transmit/reflect design. p(k) is the per-beam power e_k^2 (zero for
/// deactivated panels), theta[k] the unit-modulus phase vector (empty when the
/// panel's reflective elements are switched off), w_matrix the N_T x K transmit
/// matrix with zero columns for deactivated beams.
struct BeamSolution {
    Eigen::VectorXd p;
    std::vector<Eigen::VectorXcd> theta;
    std::vector<int> active_set;  // sorted panel indices
    Eigen::MatrixXcd w_matrix;

    bool is_active(int k) const {
        return std::find(active_set.begin(), active_set.end(), k) != active_set.end();
    }
};

/// Zero-forcing power weights h over an active set: h_i is the i-th diagonal
/// entry of (A A^H)^{-1} where A stacks the BS steering rows of the active
/// panels. tr(W W^H) = sum_k e_k^2 h_k for the matching ZF design.
inline Eigen::VectorXd zf_power_weights(const ChannelSet& c, const std::vector<int>& active) {
    const int ka = static_cast<int>(active.size());
    if (ka == 0) throw std::invalid_argument("zf_power_weights: empty active set");
    const int n_tx = static_cast<int>(c.a_b2i_tx[0].size());
    Eigen::MatrixXcd a(ka, n_tx);
    for (int i = 0; i < ka; ++i) a.row(i) = c.a_b2i_tx[active[i]].adjoint();
    const Eigen::MatrixXcd gram = a * a.adjoint();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
    if (!lu.isInvertible())
        throw std::runtime_error(
            "zf_power_weights: BS steering rows are rank deficient (two panels share a BS "
            "direction cosine); deactivate one of them");
    const Eigen::MatrixXcd inv = lu.inverse();
    Eigen::VectorXd h(ka);
    for (int i = 0; i < ka; ++i) h(i) = inv(i, i).real();
    return h;
}

/// Zero-forcing transmit design W = A^H (A A^H)^{-1} diag(e) over the active
/// set, placed into an N_T x K matrix with zero columns elsewhere.
/// e holds sqrt powers for the active panels, in active-set order.
inline Eigen::MatrixXcd zf_transmit(const ChannelSet& c, const Eigen::VectorXd& e,
                                    const std::vector<int>& active) {
    const int ka = static_cast<int>(active.size());
    if (ka == 0) throw std::invalid_argument("zf_transmit: empty active set");
    if (e.size() != ka) throw std::invalid_argument("zf_transmit: e size mismatch");
    const int n_tx = static_cast<int>(c.a_b2i_tx[0].size());
    Eigen::MatrixXcd a(ka, n_tx);
    for (int i = 0; i < ka; ++i) a.row(i) = c.a_b2i_tx[active[i]].adjoint();
    const Eigen::MatrixXcd gram = a * a.adjoint();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
    if (!lu.isInvertible())
        throw std::runtime_error(
            "zf_transmit: BS steering rows are rank deficient (two panels share a BS direction "
            "cosine); deactivate one of them");
    const Eigen::MatrixXcd w_active = a.adjoint() * lu.solve(e.cast<std::complex<double>>().asDiagonal().toDenseMatrix());
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(n_tx, c.k_irs);
    for (int i = 0; i < ka; ++i) w.col(active[i]) = w_active.col(i);
    return w;
}

/// Phase-aligning reflect design for panel k serving target q: conjugate of the
/// effective per-element channel, normalized entrywise to unit modulus. The
/// achieved combined gain is the coherent sum of entry magnitudes.
inline Eigen::VectorXcd optimal_theta(const ChannelSet& c, int k, int q,
                                      const Eigen::VectorXcd& w_k) {
    const std::complex<double> bs_gain = c.a_b2i_tx[k].dot(w_k);  // a^H w
    if (std::abs(bs_gain) <= 1e-12 * std::sqrt(double(w_k.size())) * w_k.norm())
        throw std::runtime_error(
            "optimal_theta: zero effective channel (w_k orthogonal to the BS steering)");
    const Eigen::VectorXcd effective =
        c.a_i2t(k, q).conjugate().cwiseProduct(c.h_b2i[k] * w_k);
    Eigen::VectorXcd theta(effective.size());
    for (int n = 0; n < effective.size(); ++n) theta(n) = std::conj(effective(n)) / std::abs(effective(n));
    return theta;
}

}  // namespace irsloc
