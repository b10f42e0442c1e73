#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>

namespace tow {

inline constexpr int kMaxDim = 3;

/// Fixed-capacity point in R^n, n <= kMaxDim. Unused trailing coordinates stay zero.
struct Point {
    std::array<double, kMaxDim> c{};
    int dim = 1;

    Point() = default;
    explicit Point(int n) : dim(n) { assert(n >= 1 && n <= kMaxDim); }
    Point(std::initializer_list<double> xs) : dim(static_cast<int>(xs.size())) {
        assert(dim >= 1 && dim <= kMaxDim);
        int i = 0;
        for (double x : xs) c[i++] = x;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    Point& operator+=(const Point& o) {
        for (int i = 0; i < dim; ++i) c[i] += o.c[i];
        return *this;
    }
    Point& operator-=(const Point& o) {
        for (int i = 0; i < dim; ++i) c[i] -= o.c[i];
        return *this;
    }
    Point& operator*=(double s) {
        for (int i = 0; i < dim; ++i) c[i] *= s;
        return *this;
    }

    friend Point operator+(Point a, const Point& b) { return a += b; }
    friend Point operator-(Point a, const Point& b) { return a -= b; }
    friend Point operator*(Point a, double s) { return a *= s; }
    friend Point operator*(double s, Point a) { return a *= s; }
    friend bool operator==(const Point& a, const Point& b) {
        if (a.dim != b.dim) return false;
        for (int i = 0; i < a.dim; ++i)
            if (a.c[i] != b.c[i]) return false;
        return true;
    }
};

inline double dot(const Point& a, const Point& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a.c[i] * b.c[i];
    return s;
}

inline double norm2(const Point& a) { return dot(a, a); }
inline double norm(const Point& a) { return std::sqrt(norm2(a)); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }

inline Point unit_axis(int dim, int axis, double sign = 1.0) {
    Point e(dim);
    e[axis] = sign;
    return e;
}

}  // namespace tow
