#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace irsloc {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// 10^(x/10): dB -> linear power ratio.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// dBm -> watts.
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// dBW -> watts.
inline double dbw_to_watt(double dbw) { return std::pow(10.0, dbw / 10.0); }

/// dBsm -> m^2.
inline double dbsm_to_m2(double dbsm) { return std::pow(10.0, dbsm / 10.0); }

/// Network geometry plus radio constants and solver-facing scalars.
/// All fields are linear SI units; dB conversions happen at config parse time.
struct Scenario {
    Eigen::Vector3d bs_position{0.0, 0.0, 50.0};
    std::vector<Eigen::Vector3d> irs_positions;     // K panels, z = panel height
    std::vector<Eigen::Vector3d> target_positions;  // Q targets, z = 0

    int n_tx = 12;      // BS antennas N_T
    int n_elem_x = 5;   // reflective elements, horizontal
    int n_elem_z = 2;   // reflective elements, vertical
    int m_sens_x = 5;   // sensors, horizontal
    int m_sens_z = 2;   // sensors, vertical

    double wavelength = 0.3;            // m
    double rcs = dbsm_to_m2(7.0);       // m^2
    double p_max = dbw_to_watt(20.0);   // W
    double noise_power = dbm_to_watt(-110.0);  // W
    double eta = 1.0;                   // derivative-signal energy scalar
    double pulse_width = 1e-10;         // s, effective pulse width
    double spacing_ratio = 0.5;         // element spacing in wavelengths

    std::uint64_t rng_seed = 1;

    int n_irs() const { return static_cast<int>(irs_positions.size()); }
    int n_targets() const { return static_cast<int>(target_positions.size()); }
    int n_elem() const { return n_elem_x * n_elem_z; }
    int m_sens() const { return m_sens_x * m_sens_z; }

    /// Throws std::invalid_argument on any broken invariant.
    void validate() const {
        if (irs_positions.empty()) throw std::invalid_argument("scenario: need at least one IRS");
        if (target_positions.empty()) throw std::invalid_argument("scenario: need at least one target");
        if (n_tx < n_irs())
            throw std::invalid_argument("scenario: n_tx must be >= number of IRSs (zero-forcing needs a full-row-rank steering matrix)");
        if (n_elem_x < 1 || n_elem_z < 1 || m_sens_x < 1 || m_sens_z < 1 || n_tx < 1)
            throw std::invalid_argument("scenario: array element counts must be positive");
        if (!(wavelength > 0.0)) throw std::invalid_argument("scenario: wavelength must be > 0");
        if (!(rcs > 0.0)) throw std::invalid_argument("scenario: rcs must be > 0");
        if (!(p_max > 0.0)) throw std::invalid_argument("scenario: p_max must be > 0");
        if (!(noise_power > 0.0)) throw std::invalid_argument("scenario: noise_power must be > 0");
        if (!(eta > 0.0)) throw std::invalid_argument("scenario: eta must be > 0");
        if (!(pulse_width >= 0.0)) throw std::invalid_argument("scenario: pulse_width must be >= 0");
        for (int k = 0; k < n_irs(); ++k) {
            if ((irs_positions[k] - bs_position).norm() <= 0.0)
                throw std::invalid_argument("scenario: IRS " + std::to_string(k) + " coincides with the BS");
            for (int q = 0; q < n_targets(); ++q) {
                if ((irs_positions[k] - target_positions[q]).norm() <= 0.0)
                    throw std::invalid_argument("scenario: IRS " + std::to_string(k) + " coincides with target " +
                                                std::to_string(q));
            }
        }
    }
};

}  // namespace irsloc
