#pragma once

#include "irsloc/convex/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace irsloc::convex {

struct SdpOptions {
    double tol = 1e-6;        // consensus + dual residual (inf norm, scaled data)
    int max_iters = 200000;
    int check_every = 25;
    double over_relax = 1.6;
    double rho = 1.0;
    double diag_polish_floor = 0.5;  // skip congruence polish below this diagonal value
};

/// Reusable iterate for warm starting structurally identical problems.
struct SdpWarmState {
    Eigen::VectorXd z, u;
};

namespace sdetail {

inline int svec_len(int n) { return n * (n + 1) / 2; }

inline void svec_into(const Eigen::MatrixXd& s, double* out) {
    static const double rt2 = std::sqrt(2.0);
    int idx = 0;
    const int n = static_cast<int>(s.rows());
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i <= j; ++i) {
            out[idx++] = (i == j) ? s(i, j) : rt2 * 0.5 * (s(i, j) + s(j, i));
        }
    }
}

inline void unsvec_into(const double* v, Eigen::MatrixXd& s, int n) {
    static const double inv_rt2 = 1.0 / std::sqrt(2.0);
    s.resize(n, n);
    int idx = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i <= j; ++i) {
            const double val = v[idx++];
            if (i == j) {
                s(i, j) = val;
            } else {
                s(i, j) = inv_rt2 * val;
                s(j, i) = inv_rt2 * val;
            }
        }
    }
}

/// [[X, -Y], [Y, X]] for A = X + iY Hermitian.
inline Eigen::MatrixXd embed_hermitian(const Eigen::MatrixXcd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd e(2 * n, 2 * n);
    const Eigen::MatrixXd x = a.real();
    const Eigen::MatrixXd y = a.imag();
    e.topLeftCorner(n, n) = x;
    e.bottomRightCorner(n, n) = x;
    e.topRightCorner(n, n) = -y;
    e.bottomLeftCorner(n, n) = y;
    return e;
}

/// Inverse of embed_hermitian including the symmetry averaging that maps any
/// feasible real iterate back onto the structured subspace.
inline Eigen::MatrixXcd lift_hermitian(const Eigen::MatrixXd& s, int n) {
    const Eigen::MatrixXd x = 0.5 * (s.topLeftCorner(n, n) + s.bottomRightCorner(n, n));
    const Eigen::MatrixXd y_raw = 0.5 * (s.bottomLeftCorner(n, n) - s.topRightCorner(n, n));
    const Eigen::MatrixXd xs = 0.5 * (x + x.transpose());
    const Eigen::MatrixXd ya = 0.5 * (y_raw - y_raw.transpose());
    Eigen::MatrixXcd r(n, n);
    r.real() = xs;
    r.imag() = ya;
    return r;
}

struct BlockLayout {
    int offset = 0;  // position in the stacked svec vector
    int edim = 0;    // embedded (real) dimension
    bool psd = true;
};

}  // namespace sdetail

/// First-order conic solve of an SdpProblem: alternating projections between
/// the affine set {Ax = b} (cached sparse LDLT of A A^T) and the cone product
/// (eigenvalue clipping per block, nonnegative slacks, free scalars). Complex
/// Hermitian blocks run in the doubled real symmetric embedding and are lifted
/// back, symmetrized and (for unit-diagonal blocks) congruence-polished so the
/// returned matrices satisfy the cone and diagonal constraints exactly.
inline SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opts = {},
                             SdpWarmState* warm = nullptr) {
    using namespace sdetail;
    const int n_blocks = static_cast<int>(prob.blocks.size());

    // Layout: stacked svec of embedded blocks, then slack variables.
    std::vector<BlockLayout> layout(n_blocks);
    int nvar = 0;
    for (int j = 0; j < n_blocks; ++j) {
        const auto& blk = prob.blocks[j];
        if (blk.dim < 1) throw std::invalid_argument("solve_sdp: block dim must be >= 1");
        layout[j].offset = nvar;
        layout[j].edim = blk.complex_hermitian ? 2 * blk.dim : blk.dim;
        layout[j].psd = blk.psd;
        nvar += svec_len(layout[j].edim);
    }
    int n_le = 0;
    for (const auto& con : prob.constraints)
        if (con.rel == SdpProblem::Rel::le) ++n_le;
    const int slack_base = nvar;
    nvar += n_le;

    int n_rows = static_cast<int>(prob.constraints.size());
    for (int j = 0; j < n_blocks; ++j)
        if (prob.blocks[j].unit_diagonal) n_rows += prob.blocks[j].dim;

    // Assemble sparse A and b.
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_rows);
    Eigen::VectorXd scratch;
    int row = 0, le_seen = 0;
    for (const auto& con : prob.constraints) {
        for (const auto& term : con.terms) {
            const auto& blk = prob.blocks[term.block];
            Eigen::MatrixXd emb;
            if (blk.complex_hermitian) {
                if (term.coeff.rows() != blk.dim)
                    throw std::invalid_argument("solve_sdp: constraint coefficient dim mismatch");
                emb = 0.5 * embed_hermitian(term.coeff);
            } else {
                emb = term.coeff.real();
            }
            scratch.resize(svec_len(layout[term.block].edim));
            svec_into(emb, scratch.data());
            for (int i = 0; i < scratch.size(); ++i)
                if (scratch(i) != 0.0) trips.emplace_back(row, layout[term.block].offset + i, scratch(i));
        }
        if (con.rel == SdpProblem::Rel::le)
            trips.emplace_back(row, slack_base + le_seen++, 1.0);
        b(row) = con.rhs;
        ++row;
    }
    for (int j = 0; j < n_blocks; ++j) {
        const auto& blk = prob.blocks[j];
        if (!blk.unit_diagonal) continue;
        for (int d = 0; d < blk.dim; ++d) {
            if (blk.complex_hermitian) {
                // 0.5 * (S_dd + S_{dim+d, dim+d}) = 1
                const int i1 = layout[j].offset + svec_len(d + 1) - 1;
                const int big = blk.dim + d;
                const int i2 = layout[j].offset + svec_len(big + 1) - 1;
                trips.emplace_back(row, i1, 0.5);
                trips.emplace_back(row, i2, 0.5);
            } else {
                const int i1 = layout[j].offset + svec_len(d + 1) - 1;
                trips.emplace_back(row, i1, 1.0);
            }
            b(row) = 1.0;
            ++row;
        }
    }

    Eigen::SparseMatrix<double> a(n_rows, nvar);
    a.setFromTriplets(trips.begin(), trips.end());

    // Row equilibration (column-major storage, so accumulate per nonzero).
    {
        Eigen::VectorXd nrm2 = Eigen::VectorXd::Zero(n_rows);
        for (int col = 0; col < a.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it)
                nrm2(it.row()) += it.value() * it.value();
        Eigen::VectorXd row_scale(n_rows);
        for (int r = 0; r < n_rows; ++r) row_scale(r) = 1.0 / std::max(1e-10, std::sqrt(nrm2(r)));
        for (int col = 0; col < a.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it)
                it.valueRef() *= row_scale(it.row());
        b = b.cwiseProduct(row_scale);
    }

    // Objective vector.
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nvar);
    for (int j = 0; j < n_blocks && j < static_cast<int>(prob.objective.size()); ++j) {
        const auto& obj = prob.objective[j];
        if (obj.size() == 0) continue;
        const auto& blk = prob.blocks[j];
        Eigen::MatrixXd emb = blk.complex_hermitian ? Eigen::MatrixXd(0.5 * embed_hermitian(obj))
                                                    : Eigen::MatrixXd(obj.real());
        scratch.resize(svec_len(layout[j].edim));
        svec_into(emb, scratch.data());
        c.segment(layout[j].offset, scratch.size()) = scratch;
    }
    const double c_scale = std::max(c.cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::VectorXd c_scaled = c / c_scale;

    // Normal-equation factor for the affine projection.
    Eigen::SparseMatrix<double> gram = (a * a.transpose()).pruned();
    for (int r = 0; r < n_rows; ++r) gram.coeffRef(r, r) += 1e-12;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(gram);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("solve_sdp: failed to factor the constraint Gram matrix");

    // Inconsistent affine rows (e.g. a trace target contradicting the unit
    // diagonal) make the whole problem infeasible regardless of the cone.
    {
        const Eigen::VectorXd x_ls = a.transpose() * ldlt.solve(b);
        if ((a * x_ls - b).cwiseAbs().maxCoeff() > 1e3 * opts.tol) {
            SdpSolution sol;
            sol.status = SolveStatus::infeasible;
            sol.x.assign(n_blocks, Eigen::MatrixXcd());
            return sol;
        }
    }

    const double rho = opts.rho;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(nvar);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(nvar);
    if (warm && warm->z.size() == nvar && warm->u.size() == nvar) {
        z = warm->z;
        u = warm->u;
    }

    const auto project_affine = [&](const Eigen::VectorXd& v) {
        return Eigen::VectorXd(v - a.transpose() * ldlt.solve(a * v - b));
    };
    Eigen::MatrixXd sym;
    std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> eigs;
    const auto project_cone = [&](Eigen::VectorXd& v) {
        for (int j = 0; j < n_blocks; ++j) {
            if (!layout[j].psd) continue;  // free block
            const int ed = layout[j].edim;
            double* seg = v.data() + layout[j].offset;
            if (ed == 1) {
                seg[0] = std::max(0.0, seg[0]);
                continue;
            }
            if (ed == 2) {
                // closed-form 2x2 clip
                const double s11 = seg[0];
                const double s12 = seg[1] / std::sqrt(2.0);
                const double s22 = seg[2];
                const double tr = s11 + s22;
                const double det = s11 * s22 - s12 * s12;
                const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                const double l1 = 0.5 * tr - disc;
                const double l2 = 0.5 * tr + disc;
                if (l1 >= 0.0) continue;
                if (l2 <= 0.0) {
                    seg[0] = seg[1] = seg[2] = 0.0;
                    continue;
                }
                // eigenvector for l2
                double vx = s12, vy = l2 - s11;
                double nn = std::hypot(vx, vy);
                if (nn < 1e-300) { vx = 1.0; vy = 0.0; nn = 1.0; }
                vx /= nn;
                vy /= nn;
                seg[0] = l2 * vx * vx;
                seg[1] = std::sqrt(2.0) * l2 * vx * vy;
                seg[2] = l2 * vy * vy;
                continue;
            }
            unsvec_into(seg, sym, ed);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
            const Eigen::VectorXd& ev = eig.eigenvalues();
            if (ev(0) >= 0.0) continue;
            Eigen::VectorXd clipped = ev.cwiseMax(0.0);
            sym = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
            svec_into(sym, seg);
        }
        for (int i = slack_base; i < nvar; ++i) v(i) = std::max(0.0, v(i));
    };

    SdpSolution sol;
    double gap = std::numeric_limits<double>::infinity();
    double gap_prev_window = gap;
    int stall_windows = 0;
    bool converged = false;
    Eigen::VectorXd x(nvar), zprev(nvar);
    for (int it = 0; it < opts.max_iters; ++it) {
        x = project_affine(z - u - c_scaled / rho);
        const Eigen::VectorXd xh = opts.over_relax * x + (1.0 - opts.over_relax) * z;
        zprev = z;
        z = xh + u;
        project_cone(z);
        u += xh - z;
        sol.iterations = it + 1;
        if ((it + 1) % opts.check_every == 0) {
            gap = (x - z).cwiseAbs().maxCoeff();
            const double dual = rho * (z - zprev).cwiseAbs().maxCoeff();
            if (gap <= opts.tol && dual <= opts.tol) {
                converged = true;
                break;
            }
            // stall detection for infeasible instances
            if ((it + 1) % (opts.check_every * 40) == 0) {
                if (gap > 100.0 * opts.tol && gap > gap_prev_window * (1.0 - 1e-3))
                    ++stall_windows;
                else
                    stall_windows = 0;
                gap_prev_window = gap;
                if (stall_windows >= 3) break;
            }
        }
    }

    if (warm) {
        warm->z = z;
        warm->u = u;
    }

    // Lift the cone-side iterate back to the public blocks.
    sol.x.resize(n_blocks);
    sol.min_eigenvalue = 0.0;
    for (int j = 0; j < n_blocks; ++j) {
        const auto& blk = prob.blocks[j];
        unsvec_into(z.data() + layout[j].offset, sym, layout[j].edim);
        if (blk.complex_hermitian) {
            Eigen::MatrixXcd r = lift_hermitian(sym, blk.dim);
            if (blk.unit_diagonal) {
                Eigen::VectorXd d = r.diagonal().real();
                if ((d.array() > opts.diag_polish_floor).all()) {
                    const Eigen::VectorXd scale = d.cwiseSqrt().cwiseInverse();
                    r = scale.asDiagonal() * r * scale.asDiagonal();
                    for (int i = 0; i < blk.dim; ++i) r(i, i) = 1.0;
                }
            }
            if (blk.psd) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r);
                sol.min_eigenvalue = std::min(sol.min_eigenvalue, eig.eigenvalues().minCoeff());
            }
            sol.x[j] = std::move(r);
        } else {
            Eigen::MatrixXcd r = sym.cast<std::complex<double>>();
            if (blk.unit_diagonal) {
                Eigen::VectorXd d = sym.diagonal();
                if ((d.array() > opts.diag_polish_floor).all()) {
                    const Eigen::VectorXd scale = d.cwiseSqrt().cwiseInverse();
                    sym = scale.asDiagonal() * sym * scale.asDiagonal();
                    for (int i = 0; i < blk.dim; ++i) sym(i, i) = 1.0;
                    r = sym.cast<std::complex<double>>();
                }
            }
            if (blk.psd && blk.dim > 0) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
                sol.min_eigenvalue = std::min(sol.min_eigenvalue, eig.eigenvalues().minCoeff());
            }
            sol.x[j] = std::move(r);
        }
    }

    // Residuals and objective evaluated on the lifted (returned) solution.
    double max_res = 0.0;
    for (const auto& con : prob.constraints) {
        double lhs = 0.0;
        for (const auto& term : con.terms)
            lhs += (term.coeff.adjoint() * sol.x[term.block]).trace().real();
        const double diff = lhs - con.rhs;
        max_res = std::max(max_res, con.rel == SdpProblem::Rel::eq ? std::abs(diff) : std::max(0.0, diff));
    }
    sol.max_eq_residual = max_res;
    double obj = 0.0;
    for (int j = 0; j < n_blocks && j < static_cast<int>(prob.objective.size()); ++j) {
        if (prob.objective[j].size() == 0) continue;
        obj += (prob.objective[j].adjoint() * sol.x[j]).trace().real();
    }
    sol.objective = obj;
    sol.status = converged ? SolveStatus::optimal
                           : (stall_windows >= 3 ? SolveStatus::infeasible : SolveStatus::numerical_failure);
    return sol;
}

}  // namespace irsloc::convex
