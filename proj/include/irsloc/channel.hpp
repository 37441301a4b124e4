#pragma once

#include "irsloc/scenario.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace irsloc {

/// Array response for a uniform linear factor: entry n = exp(j 2 pi n phase_step).
inline Eigen::VectorXcd steering(double phase_step, int count) {
    if (count < 1) throw std::invalid_argument("steering: count must be >= 1");
    Eigen::VectorXcd v(count);
    for (int n = 0; n < count; ++n) {
        const double arg = 2.0 * std::numbers::pi * n * phase_step;
        v(n) = std::complex<double>(std::cos(arg), std::sin(arg));
    }
    return v;
}

/// Planar response: Kronecker product of the horizontal and vertical factors.
inline Eigen::VectorXcd planar_steering(double phase_x, int nx, double phase_z, int nz) {
    const Eigen::VectorXcd ax = steering(phase_x, nx);
    const Eigen::VectorXcd az = steering(phase_z, nz);
    Eigen::VectorXcd v(nx * nz);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nz; ++j) v(i * nz + j) = ax(i) * az(j);
    return v;
}

/// One-hop amplitude gain sqrt(lambda^2 / (16 pi^2 d^2)).
inline double pathloss_b2i(double wavelength, double distance) {
    if (!(distance > 0.0)) throw std::invalid_argument("pathloss_b2i: distance must be > 0");
    constexpr double pi = std::numbers::pi;
    return std::sqrt(wavelength * wavelength / (16.0 * pi * pi * distance * distance));
}

/// Two-hop amplitude gain sqrt(lambda^2 kappa / (64 pi^3 d1^2 d2^2)).
inline double pathloss_i2i(double wavelength, double rcs, double d1, double d2) {
    if (!(d1 > 0.0 && d2 > 0.0)) throw std::invalid_argument("pathloss_i2i: distances must be > 0");
    constexpr double pi = std::numbers::pi;
    const double dd = d1 * d2;  // symmetric grouping keeps (d1, d2) order irrelevant
    return std::sqrt(wavelength * wavelength * rcs / (64.0 * pi * pi * pi * dd * dd));
}

/// All steering vectors, path gains and rank-1 channel factors of a scenario.
///
/// Phase steps are spacing_ratio times a direction cosine of the unit vector
/// pointing from the array location toward the far endpoint; horizontal factors
/// use the x component, vertical factors the z component. The BS array takes a
/// single vertical direction cosine.
struct ChannelSet {
    int k_irs = 0;
    int n_tgt = 0;

    std::vector<Eigen::MatrixXcd> h_b2i;    // [k], N x N_T rank-1
    std::vector<Eigen::VectorXcd> a_b2i_tx; // [k], length N_T (BS toward IRS k)
    std::vector<Eigen::VectorXcd> a_i2b;    // [k], length N (IRS k receive from BS)
    Eigen::VectorXd alpha_b2i;              // [k]
    Eigen::VectorXd omega_b2i;              // [k], BS-side direction cosine

    std::vector<Eigen::VectorXcd> a_i2t_store;  // [k * n_tgt + q], length N
    std::vector<Eigen::VectorXcd> a_t2i_store;  // [l * n_tgt + q], length M
    std::vector<Eigen::MatrixXd> alpha_i2i;     // [q], K x K

    const Eigen::VectorXcd& a_i2t(int k, int q) const { return a_i2t_store[k * n_tgt + q]; }
    const Eigen::VectorXcd& a_t2i(int l, int q) const { return a_t2i_store[l * n_tgt + q]; }

    /// Cascaded M x N channel for (target q, reflect k, sense l).
    Eigen::MatrixXcd h_i2i(int q, int k, int l) const {
        return alpha_i2i[q](k, l) * (a_t2i(l, q) * a_i2t(k, q).adjoint());
    }

    /// Unit-modulus effective reflect vector v with
    ///   a_i2t(k,q)^H diag(theta) a_i2b(k) = v^H theta,
    /// so the reflect gain is x_{q,k}(theta) = |v^H theta|^2 (max N^2).
    Eigen::VectorXcd reflect_vector(int q, int k) const {
        return a_i2t(k, q).cwiseProduct(a_i2b[k].conjugate());
    }
};

inline ChannelSet build_channels(const Scenario& s) {
    s.validate();
    ChannelSet c;
    c.k_irs = s.n_irs();
    c.n_tgt = s.n_targets();

    c.h_b2i.resize(c.k_irs);
    c.a_b2i_tx.resize(c.k_irs);
    c.a_i2b.resize(c.k_irs);
    c.alpha_b2i.resize(c.k_irs);
    c.omega_b2i.resize(c.k_irs);
    c.a_i2t_store.resize(c.k_irs * c.n_tgt);
    c.a_t2i_store.resize(c.k_irs * c.n_tgt);
    c.alpha_i2i.assign(c.n_tgt, Eigen::MatrixXd(c.k_irs, c.k_irs));

    for (int k = 0; k < c.k_irs; ++k) {
        const Eigen::Vector3d d_bs_to_irs = s.irs_positions[k] - s.bs_position;
        const double dist = d_bs_to_irs.norm();
        const Eigen::Vector3d u_bs = d_bs_to_irs / dist;   // BS toward IRS
        const Eigen::Vector3d u_irs = -u_bs;               // IRS toward BS

        c.omega_b2i(k) = u_bs.z();
        c.alpha_b2i(k) = pathloss_b2i(s.wavelength, dist);
        c.a_b2i_tx[k] = steering(s.spacing_ratio * u_bs.z(), s.n_tx);
        c.a_i2b[k] = planar_steering(s.spacing_ratio * u_irs.x(), s.n_elem_x,
                                     s.spacing_ratio * u_irs.z(), s.n_elem_z);
        c.h_b2i[k] = c.alpha_b2i(k) * (c.a_i2b[k] * c.a_b2i_tx[k].adjoint());

        for (int q = 0; q < c.n_tgt; ++q) {
            const Eigen::Vector3d d_irs_to_tgt = s.target_positions[q] - s.irs_positions[k];
            const double d = d_irs_to_tgt.norm();
            const Eigen::Vector3d u = d_irs_to_tgt / d;    // IRS toward target
            c.a_i2t_store[k * c.n_tgt + q] = planar_steering(
                s.spacing_ratio * u.x(), s.n_elem_x, s.spacing_ratio * u.z(), s.n_elem_z);
            c.a_t2i_store[k * c.n_tgt + q] = planar_steering(
                s.spacing_ratio * u.x(), s.m_sens_x, s.spacing_ratio * u.z(), s.m_sens_z);
        }
    }
    for (int q = 0; q < c.n_tgt; ++q) {
        for (int k = 0; k < c.k_irs; ++k) {
            const double d1 = (s.target_positions[q] - s.irs_positions[k]).norm();
            for (int l = 0; l < c.k_irs; ++l) {
                const double d2 = (s.target_positions[q] - s.irs_positions[l]).norm();
                c.alpha_i2i[q](k, l) = pathloss_i2i(s.wavelength, s.rcs, d1, d2);
            }
        }
    }
    return c;
}

}  // namespace irsloc
