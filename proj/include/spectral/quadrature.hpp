#pragma once

// Quadrature over balls: a deterministic cell-center grid rule and a seeded
// Monte Carlo rule with a fixed chunked seed-splitting scheme, so results do
// not depend on the worker count. Grid is the oracle at n <= 2, Monte Carlo
// the default at n >= 3.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include <spectral/geometry.hpp>

namespace spectral {

enum class QuadMethod { grid, monte_carlo };

inline std::string to_string(QuadMethod m) { return m == QuadMethod::grid ? "grid" : "monte_carlo"; }
inline QuadMethod quad_method_from_string(const std::string& s) {
    if (s == "grid") return QuadMethod::grid;
    if (s == "monte_carlo") return QuadMethod::monte_carlo;
    throw std::runtime_error("unknown quadrature method '" + s + "'");
}

struct MeasureEstimate {
    double value = 0.0;      // Lebesgue measure or integral value
    double std_error = 0.0;  // 0 for the grid rule
    QuadMethod method = QuadMethod::grid;
    long samples = 0;

    nlohmann::json to_json() const {
        return {{"value", value}, {"stderr", std_error}, {"method", to_string(method)}, {"samples", samples}};
    }
};

struct DecayThresholds {
    double decay_ratio = 0.2;  // decaying requires last < decay_ratio * first
    double slope_decay = -0.2; // and fitted log-log slope below this
    double slope_flat = -0.05; // not_decaying requires slope above this
};

struct LadderConfig {
    double a0 = 2.0;
    double factor = 2.0;
    int count = 6;

    std::vector<double> radii() const {
        std::vector<double> r(static_cast<std::size_t>(count));
        double a = a0;
        for (auto& v : r) {
            v = a;
            a *= factor;
        }
        return r;
    }
};

struct QuadratureConfig {
    QuadMethod method = QuadMethod::grid;
    long samples = 100000;   // Monte Carlo samples per ball
    int grid_divisor = 64;   // grid step = radius / grid_divisor
    std::uint64_t seed = 12345;
    int workers = 0;         // 0: hardware concurrency
    bool diagonals = true;   // direction battery includes diagonals
    LadderConfig ladder;
    DecayThresholds thresholds;

    static QuadratureConfig defaults_for(int dim) {
        QuadratureConfig c;
        c.method = dim <= 2 ? QuadMethod::grid : QuadMethod::monte_carlo;
        if (dim == 1) c.grid_divisor = 256;
        return c;
    }

    nlohmann::json to_json() const {
        return {{"method", to_string(method)},
                {"samples", samples},
                {"step", 1.0 / grid_divisor},
                {"seed", seed},
                {"directions", diagonals ? "axes_diagonals" : "axes"},
                {"ladder", {{"a0", ladder.a0}, {"factor", ladder.factor}, {"count", ladder.count}}},
                {"thresholds",
                 {{"decay_ratio", thresholds.decay_ratio},
                  {"slope_decay", thresholds.slope_decay},
                  {"slope_flat", thresholds.slope_flat}}}};
    }
    static QuadratureConfig from_json(const nlohmann::json& j) {
        QuadratureConfig c;
        if (j.contains("method")) c.method = quad_method_from_string(j["method"].get<std::string>());
        if (j.contains("samples")) c.samples = j["samples"].get<long>();
        if (j.contains("step")) c.grid_divisor = static_cast<int>(std::lround(1.0 / j["step"].get<double>()));
        if (j.contains("grid_divisor")) c.grid_divisor = j["grid_divisor"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("directions")) c.diagonals = j["directions"].get<std::string>() != "axes";
        if (j.contains("ladder")) {
            const auto& l = j["ladder"];
            c.ladder.a0 = l.value("a0", c.ladder.a0);
            c.ladder.factor = l.value("factor", c.ladder.factor);
            c.ladder.count = l.value("count", c.ladder.count);
        }
        if (j.contains("thresholds")) {
            const auto& t = j["thresholds"];
            c.thresholds.decay_ratio = t.value("decay_ratio", c.thresholds.decay_ratio);
            c.thresholds.slope_decay = t.value("slope_decay", c.thresholds.slope_decay);
            c.thresholds.slope_flat = t.value("slope_flat", c.thresholds.slope_flat);
        }
        return c;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// least-squares slope of log(values) against log(radii), over positive values
inline double loglog_slope(const std::vector<double>& radii, const std::vector<double>& values) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (values[i] <= 0.0 || radii[i] <= 0.0) continue;
        double x = std::log(radii[i]), y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) return 0.0;
    double denom = m * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (m * sxy - sx * sy) / denom;
}

}  // namespace detail

// Integrates f over the ball with the deterministic grid rule. Cells are
// included when their center lies in the closed ball.
inline MeasureEstimate integrate_ball_grid(const Ball& W, const std::function<double(const Vec&)>& f,
                                           const QuadratureConfig& cfg) {
    const int n = W.dim();
    const double r = W.radius;
    long per_axis = std::max(2L, static_cast<long>(std::lround(2.0 * static_cast<double>(cfg.grid_divisor))));
    double step = 2.0 * r / static_cast<double>(per_axis);
    double cell = std::pow(step, n);
    std::vector<long> idx(static_cast<std::size_t>(n), 0);
    Vec x(n);
    double sum = 0.0;
    long used = 0;
    const double r2 = r * r;
    for (;;) {
        double d2 = 0.0;
        for (int i = 0; i < n; ++i) {
            x[i] = W.center[i] - r + (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5) * step;
            double d = x[i] - W.center[i];
            d2 += d * d;
        }
        if (d2 <= r2) {
            sum += f(x);
            ++used;
        }
        int axis = 0;
        while (axis < n) {
            if (++idx[static_cast<std::size_t>(axis)] < per_axis) break;
            idx[static_cast<std::size_t>(axis)] = 0;
            ++axis;
        }
        if (axis == n) break;
    }
    return {sum * cell, 0.0, QuadMethod::grid, used};
}

// Uniform samples in the ball, drawn in fixed chunks of 8192 with per-chunk
// seeds derived from (seed, chunk index); the reduction is by chunk index, so
// the estimate is identical for any worker count.
inline MeasureEstimate integrate_ball_monte_carlo(const Ball& W,
                                                  const std::function<double(const Vec&)>& f,
                                                  const QuadratureConfig& cfg) {
    const int n = W.dim();
    const double vol = ball_volume(n, W.radius);
    const long total = std::max(1L, cfg.samples);
    const long chunk = 8192;
    const long nchunks = (total + chunk - 1) / chunk;
    std::vector<double> chunk_sum(static_cast<std::size_t>(nchunks), 0.0);
    std::vector<double> chunk_sum2(static_cast<std::size_t>(nchunks), 0.0);

    auto run_chunk = [&](long ci) {
        std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ detail::splitmix64(static_cast<std::uint64_t>(ci))));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        long count = std::min(chunk, total - ci * chunk);
        Vec x(n);
        double s = 0.0, s2 = 0.0;
        for (long i = 0; i < count; ++i) {
            double norm2 = 0.0;
            for (int d = 0; d < n; ++d) {
                x[d] = gauss(rng);
                norm2 += x[d] * x[d];
            }
            double norm = std::sqrt(norm2);
            if (norm == 0.0) norm = 1.0;
            double rad = W.radius * std::pow(unif(rng), 1.0 / n);
            for (int d = 0; d < n; ++d) x[d] = W.center[d] + x[d] / norm * rad;
            double v = f(x);
            s += v;
            s2 += v * v;
        }
        chunk_sum[static_cast<std::size_t>(ci)] = s;
        chunk_sum2[static_cast<std::size_t>(ci)] = s2;
    };

    int workers = std::min<long>(detail::resolve_workers(cfg.workers), nchunks);
    if (workers <= 1) {
        for (long ci = 0; ci < nchunks; ++ci) run_chunk(ci);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (long ci = w; ci < nchunks; ci += workers) run_chunk(ci);
            });
        for (auto& t : pool) t.join();
    }

    double s = 0.0, s2 = 0.0;
    for (long ci = 0; ci < nchunks; ++ci) {
        s += chunk_sum[static_cast<std::size_t>(ci)];
        s2 += chunk_sum2[static_cast<std::size_t>(ci)];
    }
    double mean = s / static_cast<double>(total);
    double var = std::max(0.0, s2 / static_cast<double>(total) - mean * mean);
    double se = vol * std::sqrt(var / static_cast<double>(total));
    return {vol * mean, se, QuadMethod::monte_carlo, total};
}

inline MeasureEstimate integrate_ball(const Ball& W, const std::function<double(const Vec&)>& f,
                                      const QuadratureConfig& cfg) {
    return cfg.method == QuadMethod::grid ? integrate_ball_grid(W, f, cfg)
                                          : integrate_ball_monte_carlo(W, f, cfg);
}

}  // namespace spectral
