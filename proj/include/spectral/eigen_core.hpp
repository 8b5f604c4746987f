#pragma once

// Matrix-level symmetric eigenvalue machinery: dense and tridiagonal paths,
// shift-inverted Lanczos with full reorthogonalization for sparse operators,
// and eigenvalue counting through the inertia of an LDL^T factorization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace spectral {

using SparseSym = Eigen::SparseMatrix<double>;

enum class EigMethod { dense, lanczos, inertia };

inline std::string to_string(EigMethod m) {
    switch (m) {
        case EigMethod::dense: return "dense";
        case EigMethod::lanczos: return "lanczos";
        case EigMethod::inertia: return "inertia";
    }
    return "?";
}

struct EigenResult {
    std::vector<double> values;     // ascending
    std::vector<double> residuals;  // ||Hx - lambda x|| per pair
    EigMethod method = EigMethod::dense;
    bool converged = true;
};

namespace detail {

inline double gershgorin_lower(const SparseSym& A) {
    Eigen::VectorXd low = Eigen::VectorXd::Zero(A.rows());
    for (int col = 0; col < A.outerSize(); ++col)
        for (SparseSym::InnerIterator it(A, col); it; ++it) {
            if (it.row() == it.col())
                low[it.row()] += it.value();
            else
                low[it.row()] -= std::abs(it.value());
        }
    return low.minCoeff();
}

inline bool is_tridiagonal(const SparseSym& A) {
    for (int col = 0; col < A.outerSize(); ++col)
        for (SparseSym::InnerIterator it(A, col); it; ++it)
            if (std::abs(it.row() - it.col()) > 1 && it.value() != 0.0) return false;
    return true;
}

inline Eigen::VectorXd seeded_unit_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
    v.normalize();
    return v;
}

}  // namespace detail

// k smallest eigenpairs of a dense symmetric matrix.
inline EigenResult smallest_eigs_dense(const Eigen::MatrixXd& A, int k, double tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    EigenResult r;
    r.method = EigMethod::dense;
    for (int i = 0; i < k; ++i) {
        double lam = es.eigenvalues()[i];
        Eigen::VectorXd x = es.eigenvectors().col(i);
        double res = (A * x - lam * x).norm();
        r.values.push_back(lam);
        r.residuals.push_back(res);
        if (res > tol * (1.0 + std::abs(lam))) r.converged = false;
    }
    return r;
}

// Shift-inverted Lanczos with full reorthogonalization. The shift sits below
// the Gershgorin lower bound, so the factorized matrix is positive definite
// and the smallest eigenvalues of A become the dominant, well separated
// eigenvalues of (A - sigma)^{-1}.
inline EigenResult smallest_eigs_lanczos(const SparseSym& A, int k, double tol,
                                         std::uint64_t seed = 42) {
    const Eigen::Index n = A.rows();
    if (k > n) throw std::invalid_argument("k exceeds dimension");
    double sigma = detail::gershgorin_lower(A) - 1.0;
    SparseSym shifted = A;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    shifted.makeCompressed();
    Eigen::SimplicialLDLT<SparseSym> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("shift-invert factorization failed");

    const int max_iter = static_cast<int>(std::min<Eigen::Index>(n, std::max(2 * k + 40, 100)));
    Eigen::MatrixXd V(n, max_iter + 1);
    std::vector<double> alpha, beta;
    V.col(0) = detail::seeded_unit_vector(n, seed);

    EigenResult r;
    r.method = EigMethod::lanczos;
    int m = 0;
    for (int j = 0; j < max_iter; ++j) {
        Eigen::VectorXd w = solver.solve(V.col(j));
        double a = V.col(j).dot(w);
        w -= a * V.col(j);
        if (j > 0) w -= beta.back() * V.col(j - 1);
        // full reorthogonalization, twice
        for (int pass = 0; pass < 2; ++pass)
            w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
        alpha.push_back(a);
        double b = w.norm();
        m = j + 1;
        if (b < 1e-14) break;  // invariant subspace exhausted
        beta.push_back(b);
        V.col(j + 1) = w / b;

        if (m >= std::max(2 * k, 20) && (m % 10 == 0 || j == max_iter - 1)) {
            // check convergence of the k dominant Ritz pairs of the inverse
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                T(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < m)
                    T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(T);
            bool ok = true;
            for (int i = 0; i < k; ++i) {
                int idx = m - 1 - i;  // dominant inverse eigenvalues
                double theta = tes.eigenvalues()[idx];
                double bound = b * std::abs(tes.eigenvectors()(m - 1, idx));
                if (theta <= 0 || bound / (theta * theta) > 0.1 * tol) ok = false;
            }
            if (ok) break;
        }
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(T);
    if (m < k) throw std::runtime_error("Lanczos space smaller than requested k");

    struct Pair {
        double lam;
        Eigen::VectorXd x;
    };
    std::vector<Pair> pairs;
    for (int i = 0; i < k; ++i) {
        int idx = m - 1 - i;
        double theta = tes.eigenvalues()[idx];
        double lam = sigma + 1.0 / theta;
        Eigen::VectorXd x = V.leftCols(m) * tes.eigenvectors().col(idx);
        x.normalize();
        pairs.push_back({lam, std::move(x)});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.lam < b.lam; });
    for (auto& p : pairs) {
        double res = (A * p.x - p.lam * p.x).norm();
        r.values.push_back(p.lam);
        r.residuals.push_back(res);
        if (res > tol * (1.0 + std::abs(p.lam))) r.converged = false;
    }
    return r;
}

struct InertiaCount {
    long below = 0;       // eigenvalues counted <= E (ties toward inclusion)
    int perturb_retries = 0;
};

// #{eigenvalues <= E} through Sylvester's law: the number of negative pivots
// of an LDL^T factorization of A - E'I, E' = E + 1e-9. A pivot within 1e-10
// of zero (relative) triggers an E-perturbation retry.
inline InertiaCount count_below_sparse(const SparseSym& A, double E) {
    const Eigen::Index n = A.rows();
    double scale = 1.0;
    for (int col = 0; col < A.outerSize(); ++col)
        for (SparseSym::InnerIterator it(A, col); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    InertiaCount out;
    for (int attempt = 0; attempt < 4; ++attempt) {
        double Ep = E + 1e-9 + attempt * 1e-8 * (1.0 + std::abs(E));
        SparseSym shifted = A;
        for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= Ep;
        shifted.makeCompressed();
        Eigen::SimplicialLDLT<SparseSym> ldlt(shifted);
        if (ldlt.info() == Eigen::Success) {
            const auto& D = ldlt.vectorD();
            bool tiny = false;
            long neg = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (std::abs(D[i]) <= 1e-10 * scale) tiny = true;
                if (D[i] < 0) ++neg;
            }
            if (!tiny) {
                out.below = neg;
                out.perturb_retries = attempt;
                return out;
            }
        }
        if (attempt == 3)
            throw std::runtime_error("inertia factorization kept hitting near-zero pivots at E=" +
                                     std::to_string(E));
    }
    return out;  // unreachable
}

inline long count_below_dense(const Eigen::MatrixXd& A, double E) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    long c = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] <= E + 1e-9) ++c;
    return c;
}

}  // namespace spectral
