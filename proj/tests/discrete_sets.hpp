#pragma once

// Test-only discretized-set machinery: a Borel set is represented by the set
// of occupied cells of a Cartesian grid, measures are cell counts times cell
// volume, and omega(x) counts occupied cells whose centers lie in the closed
// unit ball at x. Everything is exact in the grid measure, which makes the
// covering-number inequality checkable with zero tolerance.

#include <cmath>
#include <random>
#include <vector>

#include <spectral/geometry.hpp>

namespace spectral::testing {

struct DiscreteSet {
    int dim = 1;
    double step = 0.1;
    double extent = 5.0;  // grid spans [-extent, extent]^dim
    std::vector<char> occupied;
    long per_axis = 0;

    static DiscreteSet from_indicator(int dim, double step, double extent,
                                      const std::function<bool(const Vec&)>& inside) {
        DiscreteSet s;
        s.dim = dim;
        s.step = step;
        s.extent = extent;
        s.per_axis = static_cast<long>(std::lround(2.0 * extent / step));
        long total = 1;
        for (int i = 0; i < dim; ++i) total *= s.per_axis;
        s.occupied.assign(static_cast<std::size_t>(total), 0);
        std::vector<long> idx(static_cast<std::size_t>(dim), 0);
        Vec x(dim);
        for (long flat = 0; flat < total; ++flat) {
            for (int i = 0; i < dim; ++i)
                x[i] = -extent + (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5) * step;
            s.occupied[static_cast<std::size_t>(flat)] = inside(x) ? 1 : 0;
            int axis = 0;
            while (axis < dim) {
                if (++idx[static_cast<std::size_t>(axis)] < s.per_axis) break;
                idx[static_cast<std::size_t>(axis)] = 0;
                ++axis;
            }
        }
        return s;
    }

    double cell_volume() const { return std::pow(step, dim); }

    Vec cell_center(long flat) const {
        Vec x(dim);
        long rem = flat;
        for (int i = 0; i < dim; ++i) {
            long ix = rem % per_axis;
            rem /= per_axis;
            x[i] = -extent + (static_cast<double>(ix) + 0.5) * step;
        }
        return x;
    }

    // omega(x): grid measure of {occupied cells with center in closed B_x(1)}
    double omega(const Vec& x) const {
        long count = 0;
        long total = static_cast<long>(occupied.size());
        for (long flat = 0; flat < total; ++flat) {
            if (!occupied[static_cast<std::size_t>(flat)]) continue;
            if ((cell_center(flat) - x).squaredNorm() <= 1.0) ++count;
        }
        return static_cast<double>(count) * cell_volume();
    }

    // sum of omega(center)^p * cellvol over occupied cells with |center| >= R
    double omega_p_tail_integral(double p, double R) const {
        double sum = 0.0;
        long total = static_cast<long>(occupied.size());
        for (long flat = 0; flat < total; ++flat) {
            if (!occupied[static_cast<std::size_t>(flat)]) continue;
            Vec c = cell_center(flat);
            if (c.norm() < R) continue;
            double w = omega(c);
            if (w > 0) sum += std::pow(w, p) * cell_volume();
        }
        return sum;
    }
};

inline DiscreteSet random_union_set(std::mt19937& rng, int dim, double step, double extent) {
    std::uniform_real_distribution<double> uc(-extent + 1.0, extent - 1.0);
    std::uniform_real_distribution<double> ur(0.3, 1.4);
    std::uniform_int_distribution<int> nballs(2, 5);
    int m = nballs(rng);
    std::vector<Vec> centers;
    std::vector<double> radii;
    std::vector<bool> is_box;
    std::bernoulli_distribution box(0.4);
    for (int i = 0; i < m; ++i) {
        Vec c(dim);
        for (int d = 0; d < dim; ++d) c[d] = uc(rng);
        centers.push_back(c);
        radii.push_back(ur(rng));
        is_box.push_back(box(rng));
    }
    return DiscreteSet::from_indicator(dim, step, extent, [&](const Vec& x) {
        for (std::size_t i = 0; i < centers.size(); ++i) {
            if (is_box[i]) {
                bool in = true;
                for (int d = 0; d < dim; ++d)
                    if (std::abs(x[d] - centers[i][d]) > radii[i]) in = false;
                if (in) return true;
            } else if ((x - centers[i]).norm() <= radii[i]) {
                return true;
            }
        }
        return false;
    });
}

}  // namespace spectral::testing
