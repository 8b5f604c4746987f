#pragma once

// Smallest eigenvalues and the eigenvalue counting function N_L(E) for box
// operators. Counting goes through matrix inertia (one LDL^T per (L, E))
// rather than a spectral sweep; the stabilizes/grows verdict over a ladder of
// box sizes is the finite-size surrogate for "purely discrete spectrum".

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <spectral/box.hpp>
#include <spectral/eigen_core.hpp>
#include <spectral/quadrature.hpp>

namespace spectral {

namespace detail {

// n=1 stencil-plus-diagonal operators are tridiagonal: solve in O(m^2).
inline bool try_tridiagonal(const SparseSym& A, Eigen::VectorXd& diag, Eigen::VectorXd& sub) {
    if (!is_tridiagonal(A)) return false;
    const Eigen::Index n = A.rows();
    diag = Eigen::VectorXd::Zero(n);
    sub = Eigen::VectorXd::Zero(n - 1);
    for (int c = 0; c < A.outerSize(); ++c)
        for (SparseSym::InnerIterator it(A, c); it; ++it) {
            if (it.row() == it.col())
                diag[it.row()] = it.value();
            else if (it.row() == it.col() + 1)
                sub[it.col()] = it.value();
        }
    return true;
}

}  // namespace detail

inline EigenResult smallest_eigs(const BoxOperator& op, int k, double tol = 1e-8,
                                 std::uint64_t seed = 42) {
    if (k < 1 || k > op.dimension()) throw std::invalid_argument("k out of range");
    if (op.spectral_form) return smallest_eigs_dense(op.dense(), k, tol);

    Eigen::VectorXd d, s;
    if (detail::try_tridiagonal(op.matrix, d, s)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(d, s);
        EigenResult r;
        r.method = EigMethod::dense;
        for (int i = 0; i < k; ++i) {
            double lam = es.eigenvalues()[i];
            Eigen::VectorXd x = es.eigenvectors().col(i);
            double res = (op.matrix * x - lam * x).norm();
            r.values.push_back(lam);
            r.residuals.push_back(res);
            if (res > tol * (1.0 + std::abs(lam))) r.converged = false;
        }
        return r;
    }
    if (op.dimension() < 2000) return smallest_eigs_dense(op.dense(), k, tol);
    return smallest_eigs_lanczos(op.matrix, k, tol, seed);
}

// #{eigenvalues <= E}; ties within 1e-9 of E count as below.
inline long count_below(const BoxOperator& op, double E) {
    if (op.spectral_form) return count_below_dense(op.dense(), E);
    return count_below_sparse(op.matrix, E).below;
}

enum class LadderVerdict { stabilizes, grows, inconclusive };

inline std::string to_string(LadderVerdict v) {
    switch (v) {
        case LadderVerdict::stabilizes: return "stabilizes";
        case LadderVerdict::grows: return "grows";
        case LadderVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct CountingLadder {
    double E = 0.0;
    std::vector<double> Ls;
    std::vector<long> counts;
    LadderVerdict verdict = LadderVerdict::inconclusive;
    double growth_exponent = 0.0;

    nlohmann::json to_json() const {
        return {{"E", E},
                {"Ls", Ls},
                {"counts", counts},
                {"verdict", to_string(verdict)},
                {"growth_exponent", growth_exponent}};
    }
    std::string to_csv() const {
        std::ostringstream os;
        os << "L,count\n";
        for (std::size_t i = 0; i < Ls.size(); ++i) os << Ls[i] << "," << counts[i] << "\n";
        return os.str();
    }
};

namespace detail {

inline void classify_ladder(CountingLadder& lad, int dim) {
    const std::size_t len = lad.counts.size();
    const std::size_t tail = (len + 2) / 3;  // ceil(len/3)
    bool stable = true;
    for (std::size_t i = len - tail; i < len; ++i)
        if (lad.counts[i] != lad.counts[len - tail]) stable = false;

    // growth exponent from a log-log fit over positive counts
    std::vector<double> lr, lc;
    for (std::size_t i = 0; i < len; ++i)
        if (lad.counts[i] >= 1) {
            lr.push_back(lad.Ls[i]);
            lc.push_back(static_cast<double>(lad.counts[i]));
        }
    lad.growth_exponent = loglog_slope(lr, lc);

    if (stable)
        lad.verdict = LadderVerdict::stabilizes;
    else if (lr.size() >= 3 && lad.growth_exponent > 0.5 * dim)
        lad.verdict = LadderVerdict::grows;
    else
        lad.verdict = LadderVerdict::inconclusive;
}

}  // namespace detail

// Counting ladder for a caller-provided operator family L -> H_L.
inline CountingLadder counting_ladder_with(const std::function<BoxOperator(double)>& build,
                                           double E, const std::vector<double>& Ls, int dim) {
    if (Ls.size() < 3) throw std::invalid_argument("ladder needs at least 3 box sizes");
    for (std::size_t i = 1; i < Ls.size(); ++i)
        if (Ls[i] <= Ls[i - 1]) throw std::invalid_argument("box sizes must be ascending");
    CountingLadder lad;
    lad.E = E;
    lad.Ls = Ls;
    for (double L : Ls) lad.counts.push_back(count_below(build(L), E));
    detail::classify_ladder(lad, dim);
    return lad;
}

// N_L(E) for the Dirichlet form sum Delta + V across nested boxes.
inline CountingLadder counting_ladder(const PotentialSpec& V, double E,
                                      const std::vector<double>& Ls, double h) {
    return counting_ladder_with(
        [&](double L) {
            BoxGrid grid(L, h, V.dim(), Boundary::dirichlet);
            return form_sum(laplacian_fd(grid), V);
        },
        E, Ls, V.dim());
}

}  // namespace spectral
