#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

namespace irsloc::convex {

enum class SolveStatus { optimal, infeasible, numerical_failure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        default: return "numerical-failure";
    }
}

/// Linearly constrained convex QCQP:
///   minimize  objective^T x
///   s.t.      0.5 x^T hess_i x + grad_i^T x + constant_i <= 0   (hess_i PSD)
///             eq_a x = eq_b
///             x_j >= 0 for nonneg[j]
struct QcqpProblem {
    Eigen::VectorXd objective;
    struct QuadIneq {
        Eigen::MatrixXd hess;
        Eigen::VectorXd grad;
        double constant = 0.0;
    };
    std::vector<QuadIneq> ineqs;
    std::vector<bool> nonneg;  // empty means all nonnegative
    Eigen::MatrixXd eq_a;      // may be 0 x n
    Eigen::VectorXd eq_b;

    int dim() const { return static_cast<int>(objective.size()); }
    bool var_nonneg(int j) const { return nonneg.empty() ? true : nonneg[j]; }

    void validate() const {
        const int n = dim();
        if (n == 0) throw std::invalid_argument("qcqp: empty problem");
        for (const auto& q : ineqs) {
            if (q.hess.rows() != n || q.hess.cols() != n || q.grad.size() != n)
                throw std::invalid_argument("qcqp: constraint dimension mismatch");
            if ((q.hess - q.hess.transpose()).cwiseAbs().maxCoeff() >
                1e-9 * (1.0 + q.hess.cwiseAbs().maxCoeff()))
                throw std::invalid_argument("qcqp: constraint Hessian not symmetric");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.hess);
            if (eig.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, eig.eigenvalues().maxCoeff()))
                throw std::invalid_argument("qcqp: constraint Hessian not PSD");
        }
        if (!nonneg.empty() && static_cast<int>(nonneg.size()) != n)
            throw std::invalid_argument("qcqp: nonneg mask size mismatch");
        if (eq_a.rows() != eq_b.size())
            throw std::invalid_argument("qcqp: equality rows mismatch");
        if (eq_a.rows() > 0 && eq_a.cols() != n)
            throw std::invalid_argument("qcqp: equality cols mismatch");
    }
};

struct QcqpSolution {
    Eigen::VectorXd x;
    SolveStatus status = SolveStatus::numerical_failure;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int newton_steps = 0;
};

/// Standard-form SDP over a list of decision blocks. Complex Hermitian blocks
/// are lowered internally to the doubled real symmetric embedding. 1x1 blocks
/// with psd = false act as free scalar variables.
struct SdpProblem {
    struct Block {
        int dim = 0;
        bool complex_hermitian = false;
        bool psd = true;
        bool unit_diagonal = false;
    };
    /// One affine trace constraint: sum_j tr(coeff_j X_{block_j}) rel rhs.
    struct Term {
        int block = 0;
        Eigen::MatrixXcd coeff;  // Hermitian (real symmetric for real blocks)
    };
    enum class Rel { eq, le };
    struct TraceConstraint {
        std::vector<Term> terms;
        Rel rel = Rel::eq;
        double rhs = 0.0;
    };

    std::vector<Block> blocks;
    std::vector<Eigen::MatrixXcd> objective;  // minimize sum_j tr(objective_j X_j); empty matrix = zero
    std::vector<TraceConstraint> constraints;
};

struct SdpSolution {
    std::vector<Eigen::MatrixXcd> x;
    SolveStatus status = SolveStatus::numerical_failure;
    double objective = 0.0;
    int iterations = 0;
    double max_eq_residual = 0.0;
    double min_eigenvalue = 0.0;
};

}  // namespace irsloc::convex
