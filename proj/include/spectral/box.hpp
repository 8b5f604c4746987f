#pragma once

// Truncated-box discretizations: Dirichlet finite-difference Laplacian,
// periodic Fourier-symbol operators h(P), form sums with a sampled potential,
// the relative form-bound check V- <= mu*Laplacian + nu, and the m=1
// divergence-form operator with harmonic-mean face coefficients.

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include <spectral/eigen_core.hpp>
#include <spectral/expr.hpp>
#include <spectral/geometry.hpp>

namespace spectral {

enum class Boundary { dirichlet, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::dirichlet ? "dirichlet" : "periodic"; }
inline Boundary boundary_from_string(const std::string& s) {
    if (s == "dirichlet") return Boundary::dirichlet;
    if (s == "periodic") return Boundary::periodic;
    throw std::runtime_error("unknown boundary '" + s + "'");
}

struct BoxGrid {
    double L = 1.0;  // box is [-L, L]^dim
    double h = 0.1;
    int dim = 1;
    Boundary boundary = Boundary::dirichlet;
    long unknowns_cap = 400000;

    BoxGrid() = default;
    BoxGrid(double L_, double h_, int dim_, Boundary b) : L(L_), h(h_), dim(dim_), boundary(b) {
        validate();
    }

    void validate() const {
        double cells = 2.0 * L / h;
        double rounded = std::round(cells);
        if (std::abs(cells - rounded) > 1e-9 * cells)
            throw std::invalid_argument("2L/h must be an integer");
        if (rounded < 8) throw std::invalid_argument("grid too coarse: fewer than 8 cells per axis");
        if (total_points() > unknowns_cap)
            throw std::invalid_argument("grid exceeds the unknowns cap (" +
                                        std::to_string(unknowns_cap) + ")");
    }

    long cells_per_axis() const { return static_cast<long>(std::round(2.0 * L / h)); }
    // Dirichlet keeps interior nodes only; periodic keeps one node per cell.
    long points_per_axis() const {
        return boundary == Boundary::dirichlet ? cells_per_axis() - 1 : cells_per_axis();
    }
    long total_points() const {
        long t = 1;
        for (int i = 0; i < dim; ++i) t *= points_per_axis();
        return t;
    }
    double coord(long axis_index) const {
        long offset = boundary == Boundary::dirichlet ? 1 : 0;
        return -L + static_cast<double>(axis_index + offset) * h;
    }
    Vec point(long flat) const {
        Vec x(dim);
        long rem = flat, m = points_per_axis();
        for (int i = 0; i < dim; ++i) {
            x[i] = coord(rem % m);
            rem /= m;
        }
        return x;
    }

    nlohmann::json to_json() const {
        return {{"L", L}, {"h", h}, {"dim", dim}, {"boundary", to_string(boundary)}};
    }
    static BoxGrid from_json(const nlohmann::json& j) {
        return BoxGrid(j.at("L").get<double>(), j.at("h").get<double>(), j.at("dim").get<int>(),
                       boundary_from_string(j.at("boundary").get<std::string>()));
    }
};

enum class BoxKind { laplacian, multiplication, symbol, divergence_form, sum };

// Sparse symmetric operator on a box grid. Fourier-symbol operators keep the
// symbol (their diagonal representation) and a dense kernel for application;
// everything else is a sparse matrix, exactly symmetric by construction.
struct BoxOperator {
    BoxGrid grid;
    BoxKind kind = BoxKind::laplacian;

    SparseSym matrix;                // when !spectral_form
    bool spectral_form = false;      // symbol (+ optional position diagonal)
    Eigen::VectorXd symbol_values;   // per Fourier mode, flat index
    Eigen::VectorXd position_diag;   // added multiplication part
    Eigen::MatrixXd dense_kernel;    // materialized apply for spectral_form

    long dimension() const { return grid.total_points(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        if (spectral_form) return dense_kernel * v + position_diag.cwiseProduct(v);
        return matrix * v;
    }

    Eigen::MatrixXd dense() const {
        if (spectral_form) {
            Eigen::MatrixXd M = dense_kernel;
            M.diagonal() += position_diag;
            return M;
        }
        return Eigen::MatrixXd(matrix);
    }

    double symmetry_defect() const {
        if (spectral_form) return 0.0;  // kernel built symmetric
        SparseSym d = SparseSym(matrix.transpose()) - matrix;
        double m = 0.0;
        for (int c = 0; c < d.outerSize(); ++c)
            for (SparseSym::InnerIterator it(d, c); it; ++it) m = std::max(m, std::abs(it.value()));
        return m;
    }

    // Matrix Market coordinate symmetric real, lower triangle.
    void export_matrix_market(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path);
        out << "%%MatrixMarket matrix coordinate real symmetric\n";
        if (spectral_form) {
            Eigen::MatrixXd M = dense();
            long n = M.rows(), nnz = 0;
            for (long i = 0; i < n; ++i)
                for (long j = 0; j <= i; ++j)
                    if (M(i, j) != 0.0) ++nnz;
            out << n << " " << n << " " << nnz << "\n";
            char buf[64];
            for (long i = 0; i < n; ++i)
                for (long j = 0; j <= i; ++j)
                    if (M(i, j) != 0.0) {
                        std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", i + 1, j + 1, M(i, j));
                        out << buf;
                    }
            return;
        }
        long nnz = 0;
        for (int c = 0; c < matrix.outerSize(); ++c)
            for (SparseSym::InnerIterator it(matrix, c); it; ++it)
                if (it.row() >= it.col()) ++nnz;
        out << matrix.rows() << " " << matrix.cols() << " " << nnz << "\n";
        char buf[64];
        for (int c = 0; c < matrix.outerSize(); ++c)
            for (SparseSym::InnerIterator it(matrix, c); it; ++it)
                if (it.row() >= it.col()) {
                    std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n",
                                  static_cast<long>(it.row()) + 1, static_cast<long>(it.col()) + 1,
                                  it.value());
                    out << buf;
                }
    }
};

// Second-order Dirichlet stencil: 2n/h^2 on the diagonal, -1/h^2 to each
// neighbor, rows of boundary-adjacent nodes simply lose the outside term.
inline BoxOperator laplacian_fd(const BoxGrid& grid) {
    if (grid.boundary != Boundary::dirichlet)
        throw std::invalid_argument("laplacian_fd needs a Dirichlet grid");
    grid.validate();
    const long m = grid.points_per_axis();
    const long n = grid.total_points();
    const double w = 1.0 / (grid.h * grid.h);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n * (2 * grid.dim + 1)));
    std::vector<long> strides(static_cast<std::size_t>(grid.dim));
    long s = 1;
    for (int d = 0; d < grid.dim; ++d) {
        strides[static_cast<std::size_t>(d)] = s;
        s *= m;
    }
    for (long flat = 0; flat < n; ++flat) {
        trip.emplace_back(flat, flat, 2.0 * grid.dim * w);
        long rem = flat;
        for (int d = 0; d < grid.dim; ++d) {
            long ix = rem % m;
            rem /= m;
            if (ix > 0) trip.emplace_back(flat, flat - strides[static_cast<std::size_t>(d)], -w);
            if (ix + 1 < m) trip.emplace_back(flat, flat + strides[static_cast<std::size_t>(d)], -w);
        }
    }
    BoxOperator op;
    op.grid = grid;
    op.kind = BoxKind::laplacian;
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
    return op;
}

// Samples V at the grid nodes (positive part clamped) as a multiplication
// operator.
inline Eigen::VectorXd sample_potential(const PotentialSpec& V, const BoxGrid& grid) {
    if (V.dim() != grid.dim) throw std::invalid_argument("potential/grid dimension mismatch");
    const long n = grid.total_points();
    const double cap = V.clamp_max.value_or(1e12);
    Eigen::VectorXd vals(n);
    for (long flat = 0; flat < n; ++flat) {
        Vec x = grid.point(flat);
        double v;
        try {
            v = V.eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        } catch (const EvalError& e) {
            std::string pt;
            for (int i = 0; i < grid.dim; ++i) pt += (i ? ", " : "(") + std::to_string(x[i]);
            throw EvalError(std::string(e.what()) + " at grid node " + pt + ")", e.subexpr);
        }
        vals[flat] = std::min(v, cap);
    }
    return vals;
}

inline BoxOperator multiplication_op(const PotentialSpec& V, const BoxGrid& grid) {
    BoxOperator op;
    op.grid = grid;
    op.kind = BoxKind::multiplication;
    Eigen::VectorXd vals = sample_potential(V, grid);
    const long n = grid.total_points();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) trip.emplace_back(i, i, vals[i]);
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    return op;
}

// Fourier mode frequencies: p = pi * k / L with k the centered integer mode.
inline double box_mode_frequency(const BoxGrid& grid, long axis_index) {
    long M = grid.points_per_axis();
    long k = axis_index <= M / 2 ? axis_index : axis_index - M;
    return M_PI * static_cast<double>(k) / grid.L;
}

// h(P) on the periodic box: diagonal in the discrete Fourier basis with
// entries symbol(|p|), materialized as a real circulant kernel for the
// dense-apply contract. The symbol must be even in each mode for realness,
// which |p|-dependent symbols are automatically.
inline BoxOperator symbol_operator(const BoxGrid& grid, double m_order,
                                   const std::vector<double>* custom_table = nullptr) {
    if (grid.boundary != Boundary::periodic)
        throw std::invalid_argument("symbol_operator needs a periodic grid");
    grid.validate();
    const long M = grid.points_per_axis();
    const long n = grid.total_points();
    if (n > 4096) throw std::invalid_argument("symbol operators cap at 4096 points (dense kernel)");

    BoxOperator op;
    op.grid = grid;
    op.kind = BoxKind::symbol;
    op.spectral_form = true;
    op.symbol_values.resize(n);
    if (custom_table) {
        if (static_cast<long>(custom_table->size()) != n)
            throw std::invalid_argument("custom symbol table length mismatch");
        for (long i = 0; i < n; ++i) op.symbol_values[i] = (*custom_table)[i];
        // realness of the kernel needs s(k) = s(-k) mode by mode
        std::vector<long> strides(static_cast<std::size_t>(grid.dim));
        long s = 1;
        for (int d = 0; d < grid.dim; ++d) {
            strides[static_cast<std::size_t>(d)] = s;
            s *= M;
        }
        for (long flat = 0; flat < n; ++flat) {
            long rem = flat, mirror = 0;
            for (int d = 0; d < grid.dim; ++d) {
                long ix = rem % M;
                rem /= M;
                mirror += ((M - ix) % M) * strides[static_cast<std::size_t>(d)];
            }
            if (std::abs(op.symbol_values[flat] - op.symbol_values[mirror]) > 1e-12)
                throw std::invalid_argument("custom symbol table is not even: s(k) != s(-k)");
        }
    } else {
        for (long flat = 0; flat < n; ++flat) {
            long rem = flat;
            double p2 = 0.0;
            for (int d = 0; d < grid.dim; ++d) {
                double p = box_mode_frequency(grid, rem % M);
                rem /= M;
                p2 += p * p;
            }
            op.symbol_values[flat] = std::pow(p2, m_order);
        }
    }
    op.position_diag = Eigen::VectorXd::Zero(n);

    // kernel over difference vectors: c(d) = (1/n) sum_k s(k) cos(2 pi <k,d>/M)
    Eigen::VectorXd kernel(n);
    for (long dflat = 0; dflat < n; ++dflat) {
        double acc = 0.0;
        for (long kflat = 0; kflat < n; ++kflat) {
            long kr = kflat, dr = dflat, dot = 0;
            for (int d = 0; d < grid.dim; ++d) {
                dot += (kr % M) * (dr % M) % M;
                kr /= M;
                dr /= M;
            }
            acc += op.symbol_values[kflat] *
                   std::cos(2.0 * M_PI * static_cast<double>(dot % M) / static_cast<double>(M));
        }
        kernel[dflat] = acc / static_cast<double>(n);
    }
    op.dense_kernel.resize(n, n);
    std::vector<long> strides(static_cast<std::size_t>(grid.dim));
    long s = 1;
    for (int d = 0; d < grid.dim; ++d) {
        strides[static_cast<std::size_t>(d)] = s;
        s *= M;
    }
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            long ir = i, jr = j, diff = 0;
            for (int d = 0; d < grid.dim; ++d) {
                long di = ((ir % M) - (jr % M) + M) % M;
                diff += di * strides[static_cast<std::size_t>(d)];
                ir /= M;
                jr /= M;
            }
            op.dense_kernel(i, j) = kernel[diff];
        }
    // enforce exact symmetry against rounding in the trigonometric sums
    op.dense_kernel = 0.5 * (op.dense_kernel + op.dense_kernel.transpose()).eval();
    return op;
}

// H0 + V(Q) on the same grid.
inline BoxOperator form_sum(const BoxOperator& H0, const PotentialSpec& V) {
    Eigen::VectorXd vals = sample_potential(V, H0.grid);
    BoxOperator op = H0;
    op.kind = BoxKind::sum;
    if (H0.spectral_form) {
        op.position_diag += vals;
        return op;
    }
    SparseSym diag(H0.dimension(), H0.dimension());
    std::vector<Eigen::Triplet<double>> trip;
    for (long i = 0; i < H0.dimension(); ++i) trip.emplace_back(i, i, vals[i]);
    diag.setFromTriplets(trip.begin(), trip.end());
    op.matrix = H0.matrix + diag;
    op.matrix.makeCompressed();
    return op;
}

struct FormBoundVerdict {
    bool holds = false;
    double min_eigenvalue = 0.0;
    Eigen::VectorXd minimizer;

    nlohmann::json to_json() const {
        return {{"holds", holds}, {"min_eigenvalue", min_eigenvalue}};
    }
};

// Discrete surrogate of V- <= mu*Delta + nu: positivity of
// mu*laplacian + nu*I - diag(V-) on the Dirichlet grid.
inline FormBoundVerdict form_bound_check(const PotentialSpec& V, double mu, double nu,
                                         const BoxGrid& grid) {
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in (0,1)");
    if (nu <= 0.0) throw std::invalid_argument("nu must be positive");
    auto lap = laplacian_fd(grid);
    PotentialSpec vminus{V.expr.negative_part(), V.clamp_max, V.name + "_minus"};
    Eigen::VectorXd vm = sample_potential(vminus, grid);
    SparseSym M = mu * lap.matrix;
    for (long i = 0; i < grid.total_points(); ++i) M.coeffRef(i, i) += nu - vm[i];
    M.makeCompressed();

    FormBoundVerdict out;
    if (grid.total_points() < 2000) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(M)};
        out.min_eigenvalue = es.eigenvalues()[0];
        out.minimizer = es.eigenvectors().col(0);
    } else {
        auto r = smallest_eigs_lanczos(M, 1, 1e-9);
        out.min_eigenvalue = r.values[0];
    }
    out.holds = out.min_eigenvalue >= -1e-8;
    return out;
}

// -sum_ij d_i a_ij(x) d_j with Dirichlet boundary. Diagonal coefficients use
// harmonic-mean face values (a = I reproduces laplacian_fd exactly); cross
// terms are assembled from the cell quadratic form, so the matrix is
// symmetric by construction. Ellipticity is sample-checked at every node.
inline BoxOperator divergence_form_operator(const BoxGrid& grid,
                                            const std::vector<PotentialSpec>& upper_triangle,
                                            double mu, double nu) {
    if (grid.boundary != Boundary::dirichlet)
        throw std::invalid_argument("divergence_form_operator needs a Dirichlet grid");
    grid.validate();
    const int n = grid.dim;
    if (static_cast<int>(upper_triangle.size()) != n * (n + 1) / 2)
        throw std::invalid_argument("coefficient list must have n(n+1)/2 entries (upper triangle)");

    auto entry = [&](int i, int j) -> const PotentialSpec& {
        if (i > j) std::swap(i, j);
        int idx = 0;
        for (int r = 0; r < i; ++r) idx += n - r;
        idx += j - i;
        return upper_triangle[static_cast<std::size_t>(idx)];
    };
    auto coeff_at = [&](int i, int j, const Vec& x) {
        return entry(i, j).eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    };

    // ellipticity sample check at grid nodes
    const long total = grid.total_points();
    double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
    for (long flat = 0; flat < total; ++flat) {
        Vec x = grid.point(flat);
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) a(i, j) = a(j, i) = coeff_at(i, j, x);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
        double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
        if (lo <= 0.0) {
            std::string pt;
            for (int i = 0; i < n; ++i) pt += (i ? ", " : "(") + std::to_string(x[i]);
            throw std::runtime_error("ellipticity violated at grid node " + pt +
                                     "): min eigenvalue " + std::to_string(lo));
        }
        c1 = std::min(c1, lo);
        c2 = std::max(c2, hi);
    }

    const long m = grid.points_per_axis();
    const double w = 1.0 / (grid.h * grid.h);
    std::vector<long> strides(static_cast<std::size_t>(n));
    long s = 1;
    for (int d = 0; d < n; ++d) {
        strides[static_cast<std::size_t>(d)] = s;
        s *= m;
    }
    std::vector<Eigen::Triplet<double>> trip;

    // diagonal terms, face based with harmonic means
    for (long flat = 0; flat < total; ++flat) {
        Vec x = grid.point(flat);
        long rem = flat;
        for (int d = 0; d < n; ++d) {
            long ix = rem % m;
            rem /= m;
            // face toward +e_d: neighbor node or Dirichlet boundary point
            Vec xp = x;
            xp[d] += grid.h;
            double anode = coeff_at(d, d, x), aneigh = coeff_at(d, d, xp);
            double aface = 2.0 / (1.0 / anode + 1.0 / aneigh);
            trip.emplace_back(flat, flat, aface * w);
            if (ix + 1 < m) {
                long nb = flat + strides[static_cast<std::size_t>(d)];
                trip.emplace_back(nb, nb, aface * w);
                trip.emplace_back(flat, nb, -aface * w);
                trip.emplace_back(nb, flat, -aface * w);
            }
            if (ix == 0) {
                // face toward -e_d hits the boundary; only this node sees it
                Vec xm = x;
                xm[d] -= grid.h;
                double am = coeff_at(d, d, xm);
                trip.emplace_back(flat, flat, 2.0 / (1.0 / anode + 1.0 / am) * w);
            }
        }
    }

    // cross terms from the cell quadratic form with central differences
    if (n > 1) {
        for (long flat = 0; flat < total; ++flat) {
            Vec x = grid.point(flat);
            long rem = flat;
            std::vector<long> ix(static_cast<std::size_t>(n));
            for (int d = 0; d < n; ++d) {
                ix[static_cast<std::size_t>(d)] = rem % m;
                rem /= m;
            }
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double aij = coeff_at(i, j, x);
                    if (aij == 0.0) continue;
                    // D_i u ~ (u(x+he_i) - u(x-he_i)) / 2h, zero outside
                    struct Stencil {
                        long node;
                        double val;
                    };
                    auto central = [&](int d) {
                        std::vector<Stencil> st;
                        if (ix[static_cast<std::size_t>(d)] + 1 < m)
                            st.push_back({flat + strides[static_cast<std::size_t>(d)], 0.5 / grid.h});
                        if (ix[static_cast<std::size_t>(d)] > 0)
                            st.push_back({flat - strides[static_cast<std::size_t>(d)], -0.5 / grid.h});
                        return st;
                    };
                    auto gi = central(i), gj = central(j);
                    for (const auto& p : gi)
                        for (const auto& q : gj) {
                            trip.emplace_back(p.node, q.node, aij * p.val * q.val);
                            trip.emplace_back(q.node, p.node, aij * p.val * q.val);
                        }
                }
        }
    }

    BoxOperator op;
    op.grid = grid;
    op.kind = BoxKind::divergence_form;
    op.matrix.resize(total, total);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();

    // coercivity battery: <f, Lf> >= mu ||grad_h f||^2 - nu ||f||^2
    auto lap = laplacian_fd(grid);
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 16; ++t) {
        Eigen::VectorXd f(total);
        for (long i = 0; i < total; ++i) f[i] = g(rng);
        double lhs = f.dot(op.matrix * f);
        double grad2 = f.dot(lap.matrix * f);
        double rhs = mu * grad2 - nu * f.squaredNorm();
        if (lhs < rhs - 1e-8 * (1.0 + std::abs(rhs)))
            throw std::runtime_error("coercivity check failed on the random battery (mu=" +
                                     std::to_string(mu) + ", nu=" + std::to_string(nu) + ")");
    }
    return op;
}

}  // namespace spectral
