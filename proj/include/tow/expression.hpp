#pragma once

#include <array>
#include <string>
#include <vector>

#include "tow/point.hpp"

#include <json.hpp>

namespace tow {

using Matrix3 = std::array<std::array<double, kMaxDim>, kMaxDim>;

/// Closed-form scalar function of (x, t) picked from a fixed registry.
///
/// Registry kinds and their JSON fields:
///   constant  {value}
///   affine    {slope[n], offset, rate}                 slope·x + offset + rate·t
///   quadratic {hessian (scalar or n×n), center[n], slope[n], offset, rate}
///             offset + slope·x + ½(x-c)ᵀA(x-c) + rate·t
///   sine      {amplitude, frequency[n], phase[n], decay, offset}
///             amplitude·Π sin(π k_i x_i + φ_i)·exp(-decay·t) + offset
///   bump      {amplitude, center[n], width, decay, offset}
///             amplitude·exp(-|x-c|²/(2w²))·exp(-decay·t) + offset
///   sum       {terms[]}
///   max / min {terms[]}      (not differentiable)
class Expression {
public:
    enum class Kind { Constant, Affine, Quadratic, Sine, Bump, Sum, Max, Min };

    static Expression constant(double value);
    static Expression affine(Point slope, double offset, double rate = 0.0);
    static Expression quadratic(Matrix3 hessian, Point center, Point slope, double offset,
                                double rate = 0.0);
    static Expression isotropic_quadratic(int dim, double curvature, Point center, double offset);
    static Expression sine(double amplitude, Point frequency, Point phase, double decay,
                           double offset = 0.0);
    static Expression bump(double amplitude, Point center, double width, double decay = 0.0,
                           double offset = 0.0);
    static Expression sum(std::vector<Expression> terms);
    static Expression max_of(std::vector<Expression> terms);
    static Expression min_of(std::vector<Expression> terms);

    /// Throws ValidationError naming the offending field or unknown kind.
    static Expression from_json(const nlohmann::json& j, int dim);
    nlohmann::json to_json() const;

    Kind kind() const { return kind_; }
    double operator()(const Point& x, double t) const { return value(x, t); }
    double value(const Point& x, double t) const;
    bool differentiable() const;
    Point gradient(const Point& x, double t) const;
    Matrix3 hessian(const Point& x, double t) const;
    double time_derivative(const Point& x, double t) const;

private:
    Kind kind_ = Kind::Constant;
    int dim_ = 1;
    double a_ = 0.0;       // value / amplitude
    double b_ = 0.0;       // offset
    double rate_ = 0.0;    // rate (affine/quadratic) or decay (sine/bump)
    double width_ = 1.0;
    Point v1_;             // slope / frequency / center
    Point v2_;             // center / phase
    Matrix3 m_{};
    std::vector<Expression> terms_;
};

std::string_view to_string(Expression::Kind k);

}  // namespace tow
