#pragma once

// Finite abelian group model on Z_N^d: translations U_a, modulations V_k,
// Fourier multipliers psi(P), position multipliers phi(Q), resolvents, and
// the norm/decay probes behind the regularity criteria. Conventions:
//   character chi_k(x) = exp(2 pi i <k,x> / N)
//   (F f)(p) = N^{-d/2} sum_x chi_p(x) f(x),   psi(P) = F^H diag(psi) F
// so that V_k psi(P) V_k^* = psi(P+k) and U_a has Fourier symbol chi_p(-a).
//
// Dense kernels cap at 4096 rows; larger groups keep diagonal or matrix-free
// composed forms and norm probes fall back to power iteration (reported).

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <spectral/eigen_core.hpp>

namespace spectral {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr long kDenseLatticeCap = 4096;

struct CyclicGroup {
    long N = 2;
    int d = 1;

    CyclicGroup() = default;
    CyclicGroup(long N_, int d_) : N(N_), d(d_) {
        if (N < 2) throw std::invalid_argument("group side N must be >= 2");
        if (d < 1 || d > 6) throw std::invalid_argument("group dimension must be 1..6");
        long o = 1;
        for (int i = 0; i < d; ++i) {
            if (o > (1L << 40) / N) throw std::invalid_argument("group order too large");
            o *= N;
        }
    }

    long order() const {
        long o = 1;
        for (int i = 0; i < d; ++i) o *= N;
        return o;
    }

    std::vector<long> element(long flat) const {
        std::vector<long> e(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) {
            e[static_cast<std::size_t>(i)] = flat % N;
            flat /= N;
        }
        return e;
    }
    long flatten(const std::vector<long>& e) const {
        long flat = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
            long c = ((e[static_cast<std::size_t>(i)] % N) + N) % N;
            flat += c * stride;
            stride *= N;
        }
        return flat;
    }
    long add(long a, long b) const {
        long flat = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
            flat += ((a % N + b % N) % N) * stride;
            a /= N;
            b /= N;
            stride *= N;
        }
        return flat;
    }
    long neg(long a) const {
        long flat = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
            flat += ((N - a % N) % N) * stride;
            a /= N;
            stride *= N;
        }
        return flat;
    }
    // centered representative of one digit, in (-N/2, N/2]
    long centered(long digit) const { return digit <= N / 2 ? digit : digit - N; }
    double centered_norm(long flat) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            double c = static_cast<double>(centered(flat % N));
            flat /= N;
            s += c * c;
        }
        return std::sqrt(s);
    }
    long dot_mod(long k, long x) const {
        long acc = 0;
        for (int i = 0; i < d; ++i) {
            acc = (acc + (k % N) * (x % N)) % N;
            k /= N;
            x /= N;
        }
        return acc;
    }
    Cplx character(long k, long x) const {
        return std::polar(1.0, 2.0 * M_PI * static_cast<double>(dot_mod(k, x)) / static_cast<double>(N));
    }
    bool operator==(const CyclicGroup& o) const { return N == o.N && d == o.d; }
};

namespace detail {

// in-place radix-2 FFT with positive-sign exponent when inverse=false matches
// our forward convention (F f)(p) = N^{-1/2} sum chi_p(x) f(x) after scaling.
inline void fft_pow2(CVec& a, bool conjugate) {
    const long n = a.size();
    if ((n & (n - 1)) != 0) throw std::invalid_argument("fft needs power-of-two length");
    for (long i = 1, j = 0; i < n; ++i) {
        long bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (long len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (conjugate ? -1.0 : 1.0);
        Cplx wl = std::polar(1.0, ang);
        for (long i = 0; i < n; i += len) {
            Cplx w(1.0, 0.0);
            for (long j = 0; j < len / 2; ++j) {
                Cplx u = a[i + j], v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline bool is_pow2(long n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace detail

// Unitary forward transform: axis-wise FFT for power-of-two N, otherwise the
// naive per-axis DFT. O(n N d) worst case.
inline CVec group_fourier(const CyclicGroup& g, const CVec& f, bool inverse = false) {
    const long n = g.order();
    if (f.size() != n) throw std::invalid_argument("vector/group size mismatch");
    CVec cur = f;
    long stride = 1;
    for (int axis = 0; axis < g.d; ++axis) {
        CVec next(n);
        const long lines = n / g.N;
        CVec line(g.N);
        for (long li = 0; li < lines; ++li) {
            // gather the axis line
            long base = (li / stride) * stride * g.N + (li % stride);
            for (long t = 0; t < g.N; ++t) line[t] = cur[base + t * stride];
            if (detail::is_pow2(g.N)) {
                detail::fft_pow2(line, inverse);
            } else {
                CVec out = CVec::Zero(g.N);
                for (long p = 0; p < g.N; ++p) {
                    Cplx acc(0, 0);
                    for (long x = 0; x < g.N; ++x) {
                        double ang = 2.0 * M_PI * static_cast<double>((p * x) % g.N) /
                                     static_cast<double>(g.N) * (inverse ? -1.0 : 1.0);
                        acc += std::polar(1.0, ang) * line[x];
                    }
                    out[p] = acc;
                }
                line = out;
            }
            for (long t = 0; t < g.N; ++t) next[base + t * stride] = line[t];
        }
        cur = std::move(next);
        stride *= g.N;
    }
    return cur / std::sqrt(static_cast<double>(n));
}

enum class KernelForm { dense, diag_position, diag_fourier, composed };

inline std::string to_string(KernelForm f) {
    switch (f) {
        case KernelForm::dense: return "dense";
        case KernelForm::diag_position: return "diag_position";
        case KernelForm::diag_fourier: return "diag_fourier";
        case KernelForm::composed: return "composed";
    }
    return "?";
}

// Immutable linear operator on l^2(Z_N^d).
class LatticeOperator {
public:
    CyclicGroup group;
    KernelForm form = KernelForm::diag_position;
    CMat kernel;  // dense form
    CVec diag;    // diagonal forms
    std::function<CVec(const CVec&)> apply_fn, apply_adj_fn;  // composed form
    bool hermitian = false;

    static LatticeOperator from_dense(const CyclicGroup& g, CMat m) {
        if (m.rows() != g.order() || m.cols() != g.order())
            throw std::invalid_argument("dense kernel size mismatch");
        if (g.order() > kDenseLatticeCap)
            throw std::invalid_argument("dense lattice kernels cap at 4096 rows");
        LatticeOperator op;
        op.group = g;
        op.form = KernelForm::dense;
        op.hermitian = (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12;
        op.kernel = std::move(m);
        return op;
    }
    static LatticeOperator diag_position_op(const CyclicGroup& g, CVec v) {
        if (v.size() != g.order()) throw std::invalid_argument("diagonal size mismatch");
        LatticeOperator op;
        op.group = g;
        op.form = KernelForm::diag_position;
        op.hermitian = v.imag().cwiseAbs().maxCoeff() <= 1e-12;
        op.diag = std::move(v);
        return op;
    }
    static LatticeOperator diag_fourier_op(const CyclicGroup& g, CVec v) {
        if (v.size() != g.order()) throw std::invalid_argument("diagonal size mismatch");
        LatticeOperator op;
        op.group = g;
        op.form = KernelForm::diag_fourier;
        op.hermitian = v.imag().cwiseAbs().maxCoeff() <= 1e-12;
        op.diag = std::move(v);
        return op;
    }
    static LatticeOperator composed_op(const CyclicGroup& g, std::function<CVec(const CVec&)> f,
                                       std::function<CVec(const CVec&)> fadj, bool herm) {
        LatticeOperator op;
        op.group = g;
        op.form = KernelForm::composed;
        op.apply_fn = std::move(f);
        op.apply_adj_fn = std::move(fadj);
        op.hermitian = herm;
        return op;
    }

    long dim() const { return group.order(); }

    CVec apply(const CVec& x) const {
        switch (form) {
            case KernelForm::dense: return kernel * x;
            case KernelForm::diag_position: return diag.cwiseProduct(x);
            case KernelForm::diag_fourier: {
                CVec xf = group_fourier(group, x);
                return group_fourier(group, CVec(diag.cwiseProduct(xf)), true);
            }
            case KernelForm::composed: return apply_fn(x);
        }
        throw std::logic_error("bad kernel form");
    }
    CVec apply_adjoint(const CVec& x) const {
        switch (form) {
            case KernelForm::dense: return kernel.adjoint() * x;
            case KernelForm::diag_position: return diag.conjugate().cwiseProduct(x);
            case KernelForm::diag_fourier: {
                CVec xf = group_fourier(group, x);
                return group_fourier(group, CVec(diag.conjugate().cwiseProduct(xf)), true);
            }
            case KernelForm::composed: return apply_adj_fn(x);
        }
        throw std::logic_error("bad kernel form");
    }

    // Exact dense materialization (DFT conjugation for diagonal forms).
    CMat to_dense() const {
        const long n = dim();
        if (n > kDenseLatticeCap) throw std::runtime_error("operator too large to densify");
        switch (form) {
            case KernelForm::dense: return kernel;
            case KernelForm::diag_position: return CMat(diag.asDiagonal());
            case KernelForm::diag_fourier:
            case KernelForm::composed: {
                CMat m(n, n);
                CVec e = CVec::Zero(n);
                for (long j = 0; j < n; ++j) {
                    e[j] = 1.0;
                    m.col(j) = apply(e);
                    e[j] = 0.0;
                }
                return m;
            }
        }
        throw std::logic_error("bad kernel form");
    }
};

// (U_a f)(x) = f(x+a): an exact 0/1 permutation kernel.
inline LatticeOperator translation_op(const CyclicGroup& g, const std::vector<long>& a) {
    const long n = g.order();
    const long af = g.flatten(a);
    if (n <= kDenseLatticeCap) {
        CMat m = CMat::Zero(n, n);
        for (long x = 0; x < n; ++x) m(x, g.add(x, af)) = 1.0;
        auto op = LatticeOperator::from_dense(g, std::move(m));
        op.hermitian = (af == 0) || (g.add(af, af) == 0);
        return op;
    }
    auto fwd = [g, af](const CVec& v) {
        CVec out(v.size());
        for (long x = 0; x < v.size(); ++x) out[x] = v[g.add(x, af)];
        return out;
    };
    auto bwd = [g, af](const CVec& v) {
        CVec out(v.size());
        for (long x = 0; x < v.size(); ++x) out[g.add(x, af)] = v[x];
        return out;
    };
    return LatticeOperator::composed_op(g, fwd, bwd, af == 0);
}

// (V_k f)(x) = chi_k(x) f(x): diagonal unitary in position.
inline LatticeOperator modulation_op(const CyclicGroup& g, const std::vector<long>& k) {
    const long n = g.order();
    const long kf = g.flatten(k);
    CVec v(n);
    for (long x = 0; x < n; ++x) v[x] = g.character(kf, x);
    return LatticeOperator::diag_position_op(g, std::move(v));
}

inline LatticeOperator fourier_multiplier(const CyclicGroup& g, const Eigen::VectorXd& psi) {
    return LatticeOperator::diag_fourier_op(g, psi.cast<Cplx>());
}

inline LatticeOperator position_multiplier(const CyclicGroup& g, const Eigen::VectorXd& phi) {
    return LatticeOperator::diag_position_op(g, phi.cast<Cplx>());
}

// Symbol on the dual group with optional ellipticity metadata.
struct SymbolFn {
    Eigen::VectorXd values;  // flat over the dual group
    double order_m = 0.0;
    double c_lower = 0.0, c_upper = 0.0, p0 = 0.0;
    bool elliptic_tagged = false;

    // exhaustive c'|p|^{2m} <= h(p) <= c''|p|^{2m} for centered |p| >= p0
    void verify_elliptic(const CyclicGroup& g) const {
        if (!elliptic_tagged) return;
        for (long p = 0; p < g.order(); ++p) {
            double np = g.centered_norm(p);
            if (np < p0) continue;
            double envelope = std::pow(np, 2.0 * order_m);
            double h = values[p];
            if (h < c_lower * envelope - 1e-12 || h > c_upper * envelope + 1e-12)
                throw std::runtime_error("symbol violates the elliptic envelope at dual point " +
                                         std::to_string(p));
        }
    }
};

// H = h(P) + V(Q), Hermitian, bounded below by min h + min V.
inline LatticeOperator build_hamiltonian(const CyclicGroup& g, const SymbolFn& h,
                                         const Eigen::VectorXd& V) {
    if (h.values.size() != g.order() || V.size() != g.order())
        throw std::invalid_argument("symbol/potential size mismatch");
    h.verify_elliptic(g);
    const long n = g.order();
    if (n <= kDenseLatticeCap) {
        auto hp = fourier_multiplier(g, h.values);
        CMat m = hp.to_dense();
        for (long i = 0; i < n; ++i) m(i, i) += V[i];
        double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (asym > 1e-12) throw std::runtime_error("hamiltonian lost hermiticity: " + std::to_string(asym));
        m = 0.5 * (m + m.adjoint()).eval();
        return LatticeOperator::from_dense(g, std::move(m));
    }
    Eigen::VectorXd hv = h.values, vv = V;
    auto fwd = [g, hv, vv](const CVec& x) {
        CVec xf = group_fourier(g, x);
        CVec y = group_fourier(g, CVec(hv.cast<Cplx>().cwiseProduct(xf)), true);
        return CVec(y + vv.cast<Cplx>().cwiseProduct(x));
    };
    return LatticeOperator::composed_op(g, fwd, fwd, true);
}

// Hermitian spectrum of a dense-representable operator.
inline Eigen::VectorXd lattice_spectrum(const LatticeOperator& H) {
    if (!H.hermitian) throw std::invalid_argument("spectrum requires a Hermitian operator");
    if (H.form == KernelForm::diag_position || H.form == KernelForm::diag_fourier) {
        Eigen::VectorXd v = H.diag.real();
        std::sort(v.begin(), v.end());
        return v;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(H.to_dense());
    return es.eigenvalues();
}

// (H - z)^{-1} with an explicit distance-to-spectrum check and a residual
// contract ||(H-z)R - I||_max <= 1e-10.
inline LatticeOperator resolvent(const LatticeOperator& H, Cplx z) {
    const long n = H.dim();
    if (n > kDenseLatticeCap)
        throw std::runtime_error("resolvent needs a dense-representable operator (<= 4096 rows)");
    Eigen::VectorXd spec = lattice_spectrum(H);
    double dist = std::numeric_limits<double>::infinity();
    for (long i = 0; i < n; ++i) dist = std::min(dist, std::abs(Cplx(spec[i], 0.0) - z));
    if (dist <= 1e-8)
        throw std::runtime_error("z is within 1e-8 of the spectrum (dist=" + std::to_string(dist) + ")");
    CMat A = H.to_dense();
    for (long i = 0; i < n; ++i) A(i, i) -= z;
    CMat R = A.partialPivLu().solve(CMat::Identity(n, n));
    double resid = (A * R - CMat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (resid > 1e-10)
        throw std::runtime_error("resolvent residual " + std::to_string(resid) + " exceeds 1e-10");
    auto op = LatticeOperator::from_dense(H.group, std::move(R));
    op.hermitian = std::abs(z.imag()) < 1e-300 && H.hermitian;
    return op;
}

struct ProbeValue {
    double value = 0.0;
    std::string method = "dense";
};

namespace detail {

// exact largest singular value of a dense kernel
inline double opnorm_dense(const CMat& A) {
    if ((A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-13) {
        Eigen::SelfAdjointEigenSolver<CMat> es(A, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    CMat AtA = A.adjoint() * A;
    Eigen::SelfAdjointEigenSolver<CMat> es(AtA, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// randomized power iteration on D^H D, 1e-6 relative tolerance
inline double opnorm_power(const std::function<CVec(const CVec&)>& ap,
                           const std::function<CVec(const CVec&)>& apadj, long n,
                           std::uint64_t seed = 31) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    CVec x(n);
    for (long i = 0; i < n; ++i) x[i] = Cplx(g(rng), g(rng));
    x.normalize();
    double prev = 0.0;
    for (int it = 0; it < 500; ++it) {
        CVec y = apadj(ap(x));
        double s2 = y.norm();
        if (s2 == 0.0) return 0.0;
        x = y / s2;
        double s = std::sqrt(s2);
        if (it > 4 && std::abs(s - prev) <= 1e-6 * std::max(1e-300, s)) return s;
        prev = s;
    }
    return prev;
}

// conjugation helpers on dense kernels (exact index arithmetic)
inline CMat conjugate_by_translation(const CyclicGroup& g, const CMat& R, long af) {
    const long n = g.order();
    CMat out(n, n);
    for (long x = 0; x < n; ++x) {
        long xs = g.add(x, af);
        for (long y = 0; y < n; ++y) out(x, y) = R(xs, g.add(y, af));
    }
    return out;  // (U_a R U_a^*)(x,y) = R(x+a, y+a)
}

inline CMat conjugate_by_modulation(const CyclicGroup& g, const CMat& R, long kf) {
    const long n = g.order();
    CMat out(n, n);
    for (long x = 0; x < n; ++x) {
        Cplx cx = g.character(kf, x);
        for (long y = 0; y < n; ++y) out(x, y) = cx * R(x, y) * std::conj(g.character(kf, y));
    }
    return out;  // V_k R V_k^*
}

}  // namespace detail

inline ProbeValue operator_norm(const LatticeOperator& A) {
    if (A.form == KernelForm::diag_position || A.form == KernelForm::diag_fourier)
        return {A.diag.cwiseAbs().maxCoeff(), "diagonal"};
    if (A.dim() <= kDenseLatticeCap) return {detail::opnorm_dense(A.to_dense()), "dense"};
    return {detail::opnorm_power([&](const CVec& v) { return A.apply(v); },
                                 [&](const CVec& v) { return A.apply_adjoint(v); }, A.dim()),
            "power_iteration"};
}

// || V_k R V_k^* - R ||
inline ProbeValue modulation_regularity_norm_ex(const LatticeOperator& R, const std::vector<long>& k) {
    const auto& g = R.group;
    const long kf = g.flatten(k);
    switch (R.form) {
        case KernelForm::diag_position:
            return {0.0, "diagonal"};  // V_k commutes with position multipliers
        case KernelForm::diag_fourier: {
            double m = 0.0;
            for (long p = 0; p < g.order(); ++p)
                m = std::max(m, std::abs(R.diag[g.add(p, kf)] - R.diag[p]));
            return {m, "diagonal"};
        }
        case KernelForm::dense: {
            CMat D = detail::conjugate_by_modulation(g, R.kernel, kf) - R.kernel;
            return {detail::opnorm_dense(D), "dense"};
        }
        case KernelForm::composed: {
            auto ap = [&, kf](const CVec& v) {
                CVec vk(v.size());
                for (long x = 0; x < v.size(); ++x) vk[x] = std::conj(g.character(kf, x)) * v[x];
                CVec rv = R.apply(vk);
                for (long x = 0; x < v.size(); ++x) rv[x] = g.character(kf, x) * rv[x];
                return CVec(rv - R.apply(v));
            };
            auto apadj = [&, kf](const CVec& v) {
                CVec vk(v.size());
                for (long x = 0; x < v.size(); ++x) vk[x] = std::conj(g.character(kf, x)) * v[x];
                CVec rv = R.apply_adjoint(vk);
                for (long x = 0; x < v.size(); ++x) rv[x] = g.character(kf, x) * rv[x];
                return CVec(rv - R.apply_adjoint(v));
            };
            return {detail::opnorm_power(ap, apadj, R.dim()), "power_iteration"};
        }
    }
    throw std::logic_error("bad kernel form");
}

inline double modulation_regularity_norm(const LatticeOperator& R, const std::vector<long>& k) {
    return modulation_regularity_norm_ex(R, k).value;
}

// || (U_a - 1) R ||
inline ProbeValue translation_regularity_norm_ex(const LatticeOperator& R, const std::vector<long>& a) {
    const auto& g = R.group;
    const long af = g.flatten(a);
    if (R.form == KernelForm::diag_fourier) {
        double m = 0.0;
        for (long p = 0; p < g.order(); ++p) {
            Cplx u = std::conj(g.character(p, af)) - 1.0;  // U_a Fourier symbol minus 1
            m = std::max(m, std::abs(u * R.diag[p]));
        }
        return {m, "diagonal"};
    }
    if (R.dim() <= kDenseLatticeCap) {
        CMat Rd = R.to_dense();
        CMat D(Rd.rows(), Rd.cols());
        for (long x = 0; x < Rd.rows(); ++x) D.row(x) = Rd.row(g.add(x, af)) - Rd.row(x);
        return {detail::opnorm_dense(D), "dense"};
    }
    auto ap = [&, af](const CVec& v) {
        CVec rv = R.apply(v);
        CVec out(rv.size());
        for (long x = 0; x < rv.size(); ++x) out[x] = rv[g.add(x, af)] - rv[x];
        return out;
    };
    auto apadj = [&, af](const CVec& v) {
        CVec w(v.size());
        for (long x = 0; x < v.size(); ++x) w[g.add(x, af)] = v[x];
        for (long x = 0; x < v.size(); ++x) w[x] -= v[x];
        return R.apply_adjoint(w);
    };
    return {detail::opnorm_power(ap, apadj, R.dim()), "power_iteration"};
}

inline double translation_regularity_norm(const LatticeOperator& R, const std::vector<long>& a) {
    return translation_regularity_norm_ex(R, a).value;
}

// Localized probe battery: a delta spike, two plateau bumps, and per-axis
// low-frequency modulated bumps. All normalized; all localized near 0, so
// their pairings against U_a R U_a^* genuinely probe the translation limit.
inline std::vector<CVec> default_probe_battery(const CyclicGroup& g) {
    const long n = g.order();
    auto plateau = [&](long radius) {
        CVec v = CVec::Zero(n);
        for (long x = 0; x < n; ++x) {
            auto e = g.element(x);
            long m = 0;
            for (int i = 0; i < g.d; ++i)
                m = std::max(m, std::abs(g.centered(e[static_cast<std::size_t>(i)])));
            if (m <= radius) v[x] = 1.0;
        }
        v.normalize();
        return v;
    };
    std::vector<CVec> battery;
    CVec delta = CVec::Zero(n);
    delta[0] = 1.0;
    battery.push_back(delta);
    battery.push_back(plateau(1));
    battery.push_back(plateau(2));
    for (int axis = 0; axis < g.d; ++axis) {
        std::vector<long> k(static_cast<std::size_t>(g.d), 0);
        k[static_cast<std::size_t>(axis)] = 1;
        long kf = g.flatten(k);
        CVec base = plateau(2);
        CVec mod(n);
        for (long x = 0; x < n; ++x) mod[x] = base[x] * g.character(kf, x);
        battery.push_back(mod);
    }
    return battery;
}

// max over battery pairs of |<f, U_a R U_a^* g>| for each a in the ladder.
inline std::vector<double> weak_translation_decay(const LatticeOperator& R,
                                                  const std::vector<std::vector<long>>& a_ladder,
                                                  const std::vector<CVec>& battery) {
    if (battery.empty()) throw std::invalid_argument("empty probe battery");
    const auto& g = R.group;
    std::vector<double> out;
    for (const auto& a : a_ladder) {
        const long af = g.flatten(a);
        double best = 0.0;
        // <f, U_a R U_a^* g> = <U_a^* f, R U_a^* g>; (U_a^* h)(x) = h(x-a)
        std::vector<CVec> shifted;
        shifted.reserve(battery.size());
        for (const auto& f : battery) {
            CVec sf(f.size());
            for (long x = 0; x < f.size(); ++x) sf[g.add(x, af)] = f[x];
            shifted.push_back(std::move(sf));
        }
        for (const auto& sg : shifted) {
            CVec rg = R.apply(sg);
            for (const auto& sf : shifted) best = std::max(best, std::abs(sf.dot(rg)));
        }
        out.push_back(best);
    }
    return out;
}

struct InequalityVerdict {
    bool holds = false;
    double min_eigenvalue = 0.0;
    CVec witness;  // eigenvector of the most negative direction on failure
};

// A <= B as quadratic forms: min eig (B - A) >= -1e-10.
inline InequalityVerdict operator_inequality_check(const LatticeOperator& A,
                                                   const LatticeOperator& B) {
    if (!(A.group == B.group)) throw std::invalid_argument("operator group mismatch");
    if (!A.hermitian || !B.hermitian)
        throw std::invalid_argument("operator inequality needs Hermitian operands");
    CMat D = B.to_dense() - A.to_dense();
    Eigen::SelfAdjointEigenSolver<CMat> es(D);
    InequalityVerdict v;
    v.min_eigenvalue = es.eigenvalues()[0];
    v.holds = v.min_eigenvalue >= -1e-10;
    if (!v.holds) v.witness = es.eigenvectors().col(0);
    return v;
}

struct TailBound {
    double norm = 0.0;   // || phi_perp R phi_perp ||
    double bound = 0.0;  // max_x theta(x) phi_perp(x)^2
    bool within = false;
};

// Hypothesis +-R <= theta(Q) is verified first; then the sandwiched cutoff
// norm is compared against the diagonal bound max theta phi_perp^2.
inline TailBound compact_tail_bound(const LatticeOperator& R, const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& phi) {
    const auto& g = R.group;
    const long n = g.order();
    if (theta.size() != n || phi.size() != n) throw std::invalid_argument("vector size mismatch");
    if (theta.minCoeff() < 0) throw std::invalid_argument("theta must be nonnegative");
    if (phi.minCoeff() < -1e-12 || phi.maxCoeff() > 1.0 + 1e-12)
        throw std::invalid_argument("cutoff phi must satisfy 0 <= phi <= 1");
    auto thetaQ = position_multiplier(g, theta);
    auto plus = operator_inequality_check(R, thetaQ);
    LatticeOperator negR = R;
    if (negR.form == KernelForm::dense)
        negR.kernel = -negR.kernel;
    else
        negR = LatticeOperator::from_dense(g, CMat(-R.to_dense()));
    auto minus = operator_inequality_check(negR, thetaQ);
    if (!plus.holds || !minus.holds)
        throw std::runtime_error("hypothesis +-R <= theta(Q) fails (min eig " +
                                 std::to_string(std::min(plus.min_eigenvalue, minus.min_eigenvalue)) +
                                 ")");
    Eigen::VectorXd perp = Eigen::VectorXd::Ones(n) - phi;
    CMat Rd = R.to_dense();
    CMat T = perp.cast<Cplx>().asDiagonal() * Rd * perp.cast<Cplx>().asDiagonal();
    TailBound out;
    out.norm = detail::opnorm_dense(T);
    out.bound = (theta.array() * perp.array().square()).maxCoeff();
    out.within = out.norm <= out.bound + 1e-10;
    return out;
}

struct ThetaCriterionVerdict {
    bool holds = false;
    double min_eigenvalue = 0.0;
    double growth_surrogate = 0.0;  // min of Theta outside the centered window
    CVec witness;
};

// H >= Theta(Q) (PSD check), with min_{|x|_inf > N/4} Theta reported as the
// growth-at-infinity surrogate.
inline ThetaCriterionVerdict theta_criterion_check(const LatticeOperator& H,
                                                   const Eigen::VectorXd& Theta) {
    const auto& g = H.group;
    auto iq = operator_inequality_check(position_multiplier(g, Theta), H);
    ThetaCriterionVerdict v;
    v.holds = iq.holds;
    v.min_eigenvalue = iq.min_eigenvalue;
    v.witness = iq.witness;
    double m = std::numeric_limits<double>::infinity();
    for (long x = 0; x < g.order(); ++x) {
        auto e = g.element(x);
        long linf = 0;
        for (int i = 0; i < g.d; ++i)
            linf = std::max(linf, std::abs(g.centered(e[static_cast<std::size_t>(i)])));
        if (linf > g.N / 4) m = std::min(m, Theta[x]);
    }
    v.growth_surrogate = std::isfinite(m) ? m : Theta.minCoeff();
    return v;
}

// || (R_k - R) - R_k (h(P) - h(P+k)) R ||  with R = (H+c)^{-1}, H = h(P)+V(Q),
// H_k = V_k H V_k^* = h(P+k) + V(Q). The shift c must make H + c >= 1.
inline double resolvent_identity_check(const CyclicGroup& g, const SymbolFn& h,
                                       const Eigen::VectorXd& V, const std::vector<long>& k,
                                       std::optional<double> shift = std::nullopt) {
    auto H = build_hamiltonian(g, h, V);
    Eigen::VectorXd spec = lattice_spectrum(H);
    double c = shift.value_or(1.0 - spec[0]);
    if (spec[0] + c < 1.0 - 1e-12)
        throw std::invalid_argument("shift too small: H + c is not >= 1");
    const long n = g.order();
    const long kf = g.flatten(k);

    CMat Hd = H.to_dense();
    CMat A = Hd + c * CMat::Identity(n, n);
    CMat R = A.partialPivLu().solve(CMat::Identity(n, n));

    // H_k = h(P+k) + V(Q): shifted symbol
    SymbolFn hk = h;
    for (long p = 0; p < n; ++p) hk.values[p] = h.values[g.add(p, kf)];
    hk.elliptic_tagged = false;
    auto Hk = build_hamiltonian(g, hk, V);
    CMat Ak = Hk.to_dense() + c * CMat::Identity(n, n);
    CMat Rk = Ak.partialPivLu().solve(CMat::Identity(n, n));

    // h(P) - h(P+k) as a Fourier multiplier
    Eigen::VectorXd dh = h.values;
    for (long p = 0; p < n; ++p) dh[p] = h.values[p] - hk.values[p];
    CMat Dh = fourier_multiplier(g, dh).to_dense();

    CMat lhs = Rk - R;
    CMat rhs = Rk * Dh * R;
    return detail::opnorm_dense(lhs - rhs);
}

// Canonical confining instance with self-dual scaling dx = sqrt(2 pi / N):
// the dual step then equals the position step, so both regularity probes
// shrink together as N grows. h(p) = |dx p_c|^2, V(x) = |dx x_c|^4 (or 0).
struct LatticeModel {
    CyclicGroup group;
    SymbolFn h;
    Eigen::VectorXd V;
    double shift = 1.0;

    LatticeOperator hamiltonian() const { return build_hamiltonian(group, h, V); }
    LatticeOperator shifted_resolvent() const {
        auto H = hamiltonian();
        return resolvent(H, Cplx(-shift, 0.0));
    }
};

inline LatticeModel confining_lattice_model(long N, int d, const std::string& confinement) {
    LatticeModel m;
    m.group = CyclicGroup(N, d);
    const long n = m.group.order();
    const double dx = std::sqrt(2.0 * M_PI / static_cast<double>(N));
    m.h.values.resize(n);
    for (long p = 0; p < n; ++p) {
        double s = m.group.centered_norm(p) * dx;
        m.h.values[p] = s * s;
    }
    m.h.order_m = 1.0;
    m.V.resize(n);
    if (confinement == "quartic") {
        for (long x = 0; x < n; ++x) {
            double s = m.group.centered_norm(x) * dx;
            m.V[x] = s * s * s * s;
        }
    } else if (confinement == "zero") {
        m.V.setZero();
    } else {
        throw std::invalid_argument("unknown confinement '" + confinement + "'");
    }
    return m;
}

}  // namespace spectral
