#include "irsloc/crb.hpp"
#include "irsloc/oracles.hpp"
#include "irsloc/single_target.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace irsloc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Scenario random_scenario(std::mt19937_64& rng, int k_irs, int n_tgt) {
    std::uniform_real_distribution<double> box(-100.0, 100.0);
    Scenario s;
    s.n_tx = 8;
    s.n_elem_x = 3;
    s.n_elem_z = 2;
    s.m_sens_x = 2;
    s.m_sens_z = 2;
    for (int k = 0; k < k_irs; ++k) s.irs_positions.push_back({box(rng), box(rng), 30.0});
    for (int q = 0; q < n_tgt; ++q) s.target_positions.push_back({box(rng), box(rng), 0.0});
    return s;
}

/// ZF beams with random powers and random unit-modulus phases.
BeamSolution random_beams(const Scenario& s, const ChannelSet& c, std::mt19937_64& rng,
                          bool optimal_phases = false) {
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    std::vector<int> active(s.n_irs());
    std::iota(active.begin(), active.end(), 0);
    const Eigen::VectorXd h = zf_power_weights(c, active);
    Eigen::VectorXd p(s.n_irs());
    for (int k = 0; k < s.n_irs(); ++k) p(k) = unif(rng);
    p *= s.p_max / h.dot(p);

    BeamSolution beams;
    beams.active_set = active;
    beams.p = p;
    beams.w_matrix = zf_transmit(c, p.cwiseSqrt(), active);
    beams.theta.resize(s.n_irs());
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < s.n_irs(); ++k) {
        if (optimal_phases) {
            beams.theta[k] = optimal_theta(c, k, 0, beams.w_matrix.col(k));
        } else {
            beams.theta[k].resize(s.n_elem());
            for (int n = 0; n < s.n_elem(); ++n) beams.theta[k](n) = std::polar(1.0, ph(rng));
        }
    }
    return beams;
}

}  // namespace

TEST_CASE("echo energy: deactivated panel contributes nothing") {
    std::mt19937_64 rng(5);
    const Scenario s = random_scenario(rng, 2, 1);
    const ChannelSet c = build_channels(s);
    BeamSolution beams = random_beams(s, c, rng);
    beams.active_set = {1};  // panel 0 switched off
    beams.theta[0].resize(0);
    CHECK(echo_energy(c, beams, 0, 0, 0) == 0.0);
    CHECK(echo_energy(c, beams, 0, 0, 1) == 0.0);
    CHECK(echo_energy(c, beams, 0, 1, 0) > 0.0);
}

TEST_CASE("echo energy: beam nulled at the panel gives zero") {
    std::mt19937_64 rng(6);
    const Scenario s = random_scenario(rng, 2, 1);
    const ChannelSet c = build_channels(s);
    BeamSolution beams = random_beams(s, c, rng);
    // ZF nulls beam 1 in panel 0's BS direction; route beam 1 through panel 0.
    Eigen::MatrixXcd w = beams.w_matrix;
    w.col(0) = w.col(1);
    beams.w_matrix = w;
    CHECK(echo_energy(c, beams, 0, 0, 1) < 1e-18 * echo_energy(c, beams, 0, 1, 1));
}

TEST_CASE("echo energy: factored form matches the explicit matrix chain") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Scenario s = random_scenario(rng, 3, 1);
        const ChannelSet c = build_channels(s);
        const BeamSolution beams = random_beams(s, c, rng, trial % 2 == 0);
        for (int k = 0; k < 3; ++k) {
            for (int l = 0; l < 3; ++l) {
                const Eigen::VectorXcd chain = c.h_i2i(0, k, l) *
                                               Eigen::MatrixXcd(beams.theta[k].asDiagonal()) *
                                               c.h_b2i[k] * beams.w_matrix.col(k);
                CHECK_THAT(echo_energy(c, beams, 0, k, l),
                           WithinRel(chain.squaredNorm(), 1e-10));
            }
        }
    }
}

TEST_CASE("echo energy: aligned beams hit the factored closed form") {
    std::mt19937_64 rng(8);
    const Scenario s = random_scenario(rng, 2, 1);
    const ChannelSet c = build_channels(s);
    const BeamSolution beams = random_beams(s, c, rng, true);
    const double n2 = static_cast<double>(s.n_elem()) * s.n_elem();
    const double m = static_cast<double>(s.m_sens());
    for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
            const double amp = c.alpha_i2i[0](k, l) * c.alpha_b2i(k);
            const double e_k2 = std::norm(c.a_b2i_tx[k].dot(beams.w_matrix.col(k)));
            CHECK_THAT(echo_energy(c, beams, 0, k, l), WithinRel(amp * amp * m * n2 * e_k2, 1e-9));
            CHECK_THAT(e_k2, WithinRel(beams.p(k), 1e-9));  // ZF: a^H w_k = e_k
        }
    }
}

TEST_CASE("position FIM: orthogonal two-path identity") {
    // Hand-built FIM: two paths with (a, b) = (1, 0) and (0, 1), equal energy.
    FimBlocks fim;
    fim.c0 = 2.0;
    const double g_energy = 3.0;
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    g(0, 0) = g_energy / fim.c0;
    g(1, 1) = g_energy / fim.c0;
    fim.g.push_back(g);
    fim.echo.emplace_back();
    const CrbReport report = crb_trace(fim);
    CHECK_THAT(report.crb(0), WithinRel(2.0 * fim.c0 / g_energy, 1e-12));
}

TEST_CASE("position FIM: single path is singular") {
    std::mt19937_64 rng(9);
    Scenario s = random_scenario(rng, 1, 1);
    const ChannelSet c = build_channels(s);
    const GeometryCoefficients geom = delay_gradients(s);
    const BeamSolution beams = random_beams(s, c, rng, true);
    const FimBlocks fim = position_fim(c, geom, beams, s);
    CHECK(fim.singular(0));
    CHECK_THROWS_AS(crb_trace(fim), std::runtime_error);
}

TEST_CASE("position FIM matches the dense chain-rule oracle") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 12; ++trial) {
        const Scenario s = random_scenario(rng, 2 + trial % 3, 1 + trial % 3);
        const ChannelSet c = build_channels(s);
        const GeometryCoefficients geom = delay_gradients(s);
        const BeamSolution beams = random_beams(s, c, rng, trial % 2 == 1);
        const FimBlocks fim = position_fim(c, geom, beams, s);
        const auto oracle = oracles::dense_chain_rule_fim(s, beams);
        for (int q = 0; q < s.n_targets(); ++q) {
            const double scale = oracle[q].cwiseAbs().maxCoeff();
            CHECK((fim.g[q] - oracle[q]).cwiseAbs().maxCoeff() < 1e-9 * scale);
        }
    }
}

TEST_CASE("crb trace: diagonal and random 2x2 identities") {
    FimBlocks fim;
    fim.c0 = 1.0;
    Eigen::Matrix2d g;
    g << 4.0, 0.0, 0.0, 0.5;
    fim.g.push_back(g);
    fim.echo.emplace_back();
    CHECK_THAT(crb_trace(fim).crb(0), WithinRel(1.0 / 4.0 + 1.0 / 0.5, 1e-12));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.1, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = unif(rng), b = unif(rng);
        double c_off = unif(rng);
        if (c_off * c_off >= a * b) c_off = 0.9 * std::sqrt(a * b);
        FimBlocks f2;
        f2.c0 = 1.0;
        Eigen::Matrix2d m;
        m << a, c_off, c_off, b;
        f2.g.push_back(m);
        f2.echo.emplace_back();
        CHECK_THAT(crb_trace(f2).crb(0), WithinRel((a + b) / (a * b - c_off * c_off), 1e-12));
    }
}

TEST_CASE("Weyl monotonicity: delta = 0 and random perturbations hold") {
    std::mt19937_64 rng(12);
    const Scenario s = random_scenario(rng, 3, 1);
    const ChannelSet c = build_channels(s);
    const GeometryCoefficients geom = delay_gradients(s);
    const BeamSolution beams = random_beams(s, c, rng, true);
    const FimBlocks fim = position_fim(c, geom, beams, s);
    CHECK(weyl_monotonicity_check(fim, geom, 0, 0, 1, 0.0));
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int trial = 0; trial < 200; ++trial)
        CHECK(weyl_monotonicity_check(fim, geom, 0, pick(rng), pick(rng),
                                      unif(rng) * fim.g[0].trace()));
}

TEST_CASE("CRB scales exactly as one over the power") {
    std::mt19937_64 rng(13);
    const Scenario s = random_scenario(rng, 3, 1);
    const ChannelSet c = build_channels(s);
    const GeometryCoefficients geom = delay_gradients(s);
    BeamSolution beams = random_beams(s, c, rng, true);
    const FimBlocks fim = position_fim(c, geom, beams, s);
    const double base = crb_trace(fim).crb(0);
    const double factor = 3.7;
    BeamSolution scaled = beams;
    scaled.p *= factor;
    scaled.w_matrix *= std::sqrt(factor);
    const FimBlocks fim2 = position_fim(c, geom, scaled, s);
    CHECK_THAT(crb_trace(fim2).crb(0), WithinRel(base / factor, 1e-12));
}

TEST_CASE("orthogonality residual reports ZF quality") {
    std::mt19937_64 rng(14);
    const Scenario s = random_scenario(rng, 4, 1);
    const ChannelSet c = build_channels(s);
    const BeamSolution beams = random_beams(s, c, rng, true);
    CHECK(orthogonality_residual(c, beams) < 1e-9);
}
