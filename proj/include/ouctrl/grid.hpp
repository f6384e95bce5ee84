#pragma once

#include "ouctrl/errors.hpp"

#include <cstddef>
#include <numbers>

namespace ouctrl {

// Truncated periodic box [-L, L)^n sampled at N points per axis (N a power of
// two). Grid points x_j = -L + j h double as cell centers of width h; the
// frequency grid is xi_k = pi k / L for k in [-N/2, N/2).
struct GridSpec {
    int n = 1;
    int points = 0;
    double half_width = 0.0;

    static GridSpec make(int n, int points, double half_width) {
        if (n < 1 || n > 3) throw Error("GridSpec: dimension must be 1, 2, or 3");
        if (points < 16 || (points & (points - 1)) != 0)
            throw Error("GridSpec: points per axis must be a power of two >= 16");
        if (!(half_width > 0.0)) throw Error("GridSpec: half_width must be positive");
        return {n, points, half_width};
    }

    bool operator==(const GridSpec&) const = default;

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(points);
        return s;
    }
    double cell_width() const { return 2.0 * half_width / points; }
    double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < n; ++i) v *= cell_width();
        return v;
    }
    double box_volume() const {
        double v = 1.0;
        for (int i = 0; i < n; ++i) v *= 2.0 * half_width;
        return v;
    }
    double freq_step() const { return std::numbers::pi / half_width; }
    int mode_of(int axis_index) const {
        return axis_index < points / 2 ? axis_index : axis_index - points;
    }
    double position(int axis_index) const { return -half_width + axis_index * cell_width(); }
    double frequency(int axis_index) const { return mode_of(axis_index) * freq_step(); }
    double max_frequency() const { return (points / 2) * freq_step(); }

    // row-major decomposition, axis 0 slowest
    void coords(std::size_t linear, int* out) const {
        for (int axis = n - 1; axis >= 0; --axis) {
            out[axis] = static_cast<int>(linear % points);
            linear /= points;
        }
    }
};

} // namespace ouctrl
