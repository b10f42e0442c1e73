#include "tow/expression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tow/error.hpp"

namespace tow {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ValidationError, what); }

double num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) invalid(std::string("expression field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

Point vec(const json& j, const char* key, int dim, double fill) {
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = fill;
    if (!j.contains(key)) return p;
    const json& v = j.at(key);
    if (v.is_number()) {
        for (int i = 0; i < dim; ++i) p[i] = v.get<double>();
        return p;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != dim)
        invalid(std::string("expression field '") + key + "' must be a number or a list of " +
                std::to_string(dim) + " numbers");
    for (int i = 0; i < dim; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number())
            invalid(std::string("expression field '") + key + "' must hold numbers");
        p[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return p;
}

json point_json(const Point& p) {
    json a = json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(p[i]);
    return a;
}

}  // namespace

std::string_view to_string(Expression::Kind k) {
    switch (k) {
        case Expression::Kind::Constant: return "constant";
        case Expression::Kind::Affine: return "affine";
        case Expression::Kind::Quadratic: return "quadratic";
        case Expression::Kind::Sine: return "sine";
        case Expression::Kind::Bump: return "bump";
        case Expression::Kind::Sum: return "sum";
        case Expression::Kind::Max: return "max";
        case Expression::Kind::Min: return "min";
    }
    return "?";
}

Expression Expression::constant(double value) {
    Expression e;
    e.kind_ = Kind::Constant;
    e.a_ = value;
    return e;
}

Expression Expression::affine(Point slope, double offset, double rate) {
    Expression e;
    e.kind_ = Kind::Affine;
    e.dim_ = slope.dim;
    e.v1_ = slope;
    e.b_ = offset;
    e.rate_ = rate;
    return e;
}

Expression Expression::quadratic(Matrix3 hessian, Point center, Point slope, double offset,
                                 double rate) {
    Expression e;
    e.kind_ = Kind::Quadratic;
    e.dim_ = center.dim;
    e.m_ = hessian;
    e.v2_ = center;
    e.v1_ = slope;
    e.b_ = offset;
    e.rate_ = rate;
    return e;
}

Expression Expression::isotropic_quadratic(int dim, double curvature, Point center, double offset) {
    Matrix3 m{};
    for (int i = 0; i < dim; ++i) m[i][i] = curvature;
    return quadratic(m, center, Point(dim), offset);
}

Expression Expression::sine(double amplitude, Point frequency, Point phase, double decay,
                            double offset) {
    Expression e;
    e.kind_ = Kind::Sine;
    e.dim_ = frequency.dim;
    e.a_ = amplitude;
    e.v1_ = frequency;
    e.v2_ = phase;
    e.rate_ = decay;
    e.b_ = offset;
    return e;
}

Expression Expression::bump(double amplitude, Point center, double width, double decay,
                            double offset) {
    if (!(width > 0.0)) invalid("bump width must be positive");
    Expression e;
    e.kind_ = Kind::Bump;
    e.dim_ = center.dim;
    e.a_ = amplitude;
    e.v1_ = center;
    e.width_ = width;
    e.rate_ = decay;
    e.b_ = offset;
    return e;
}

Expression Expression::sum(std::vector<Expression> terms) {
    Expression e;
    e.kind_ = Kind::Sum;
    e.terms_ = std::move(terms);
    return e;
}

Expression Expression::max_of(std::vector<Expression> terms) {
    if (terms.empty()) invalid("max needs at least one term");
    Expression e;
    e.kind_ = Kind::Max;
    e.terms_ = std::move(terms);
    return e;
}

Expression Expression::min_of(std::vector<Expression> terms) {
    if (terms.empty()) invalid("min needs at least one term");
    Expression e;
    e.kind_ = Kind::Min;
    e.terms_ = std::move(terms);
    return e;
}

Expression Expression::from_json(const json& j, int dim) {
    if (j.is_number()) return constant(j.get<double>());
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        invalid("expression must be a number or an object with a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return constant(num(j, "value", 0.0));
    if (kind == "affine") return affine(vec(j, "slope", dim, 0.0), num(j, "offset", 0.0), num(j, "rate", 0.0));
    if (kind == "quadratic") {
        Matrix3 m{};
        if (j.contains("hessian")) {
            const json& hj = j.at("hessian");
            if (hj.is_number()) {
                for (int i = 0; i < dim; ++i) m[i][i] = hj.get<double>();
            } else if (hj.is_array() && static_cast<int>(hj.size()) == dim) {
                for (int r = 0; r < dim; ++r) {
                    const json& row = hj[static_cast<std::size_t>(r)];
                    if (!row.is_array() || static_cast<int>(row.size()) != dim)
                        invalid("quadratic 'hessian' rows must have " + std::to_string(dim) + " entries");
                    for (int c = 0; c < dim; ++c) m[r][c] = row[static_cast<std::size_t>(c)].get<double>();
                }
                for (int r = 0; r < dim; ++r)
                    for (int c = 0; c < r; ++c)
                        if (m[r][c] != m[c][r]) invalid("quadratic 'hessian' must be symmetric");
            } else {
                invalid("quadratic 'hessian' must be a number or an n×n list");
            }
        }
        return quadratic(m, vec(j, "center", dim, 0.0), vec(j, "slope", dim, 0.0), num(j, "offset", 0.0),
                         num(j, "rate", 0.0));
    }
    if (kind == "sine")
        return sine(num(j, "amplitude", 1.0), vec(j, "frequency", dim, 1.0), vec(j, "phase", dim, 0.0),
                    num(j, "decay", 0.0), num(j, "offset", 0.0));
    if (kind == "bump")
        return bump(num(j, "amplitude", 1.0), vec(j, "center", dim, 0.0), num(j, "width", 1.0),
                    num(j, "decay", 0.0), num(j, "offset", 0.0));
    if (kind == "sum" || kind == "max" || kind == "min") {
        if (!j.contains("terms") || !j.at("terms").is_array())
            invalid("'" + kind + "' needs a 'terms' list");
        std::vector<Expression> terms;
        for (const json& t : j.at("terms")) terms.push_back(from_json(t, dim));
        if (kind == "sum") return sum(std::move(terms));
        if (kind == "max") return max_of(std::move(terms));
        return min_of(std::move(terms));
    }
    invalid("unknown function '" + kind + "'");
}

json Expression::to_json() const {
    json j;
    j["kind"] = std::string(to_string(kind_));
    switch (kind_) {
        case Kind::Constant: j["value"] = a_; break;
        case Kind::Affine:
            j["slope"] = point_json(v1_);
            j["offset"] = b_;
            j["rate"] = rate_;
            break;
        case Kind::Quadratic: {
            json h = json::array();
            for (int r = 0; r < dim_; ++r) {
                json row = json::array();
                for (int c = 0; c < dim_; ++c) row.push_back(m_[r][c]);
                h.push_back(row);
            }
            j["hessian"] = h;
            j["center"] = point_json(v2_);
            j["slope"] = point_json(v1_);
            j["offset"] = b_;
            j["rate"] = rate_;
            break;
        }
        case Kind::Sine:
            j["amplitude"] = a_;
            j["frequency"] = point_json(v1_);
            j["phase"] = point_json(v2_);
            j["decay"] = rate_;
            j["offset"] = b_;
            break;
        case Kind::Bump:
            j["amplitude"] = a_;
            j["center"] = point_json(v1_);
            j["width"] = width_;
            j["decay"] = rate_;
            j["offset"] = b_;
            break;
        case Kind::Sum:
        case Kind::Max:
        case Kind::Min: {
            json t = json::array();
            for (const auto& e : terms_) t.push_back(e.to_json());
            j["terms"] = t;
            break;
        }
    }
    return j;
}

double Expression::value(const Point& x, double t) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::Affine: return dot(v1_, x) + b_ + rate_ * t;
        case Kind::Quadratic: {
            const Point d = x - v2_;
            double q = 0.0;
            for (int r = 0; r < dim_; ++r)
                for (int c = 0; c < dim_; ++c) q += d[r] * m_[r][c] * d[c];
            return b_ + dot(v1_, x) + 0.5 * q + rate_ * t;
        }
        case Kind::Sine: {
            double p = a_ * std::exp(-rate_ * t);
            for (int i = 0; i < dim_; ++i) p *= std::sin(std::numbers::pi * v1_[i] * x[i] + v2_[i]);
            return p + b_;
        }
        case Kind::Bump:
            return a_ * std::exp(-norm2(x - v1_) / (2.0 * width_ * width_)) * std::exp(-rate_ * t) + b_;
        case Kind::Sum: {
            double s = 0.0;
            for (const auto& e : terms_) s += e.value(x, t);
            return s;
        }
        case Kind::Max: {
            double m = terms_.front().value(x, t);
            for (const auto& e : terms_) m = std::max(m, e.value(x, t));
            return m;
        }
        case Kind::Min: {
            double m = terms_.front().value(x, t);
            for (const auto& e : terms_) m = std::min(m, e.value(x, t));
            return m;
        }
    }
    return 0.0;
}

bool Expression::differentiable() const {
    if (kind_ == Kind::Max || kind_ == Kind::Min) return false;
    return std::all_of(terms_.begin(), terms_.end(), [](const Expression& e) { return e.differentiable(); });
}

Point Expression::gradient(const Point& x, double t) const {
    Point g(x.dim);
    switch (kind_) {
        case Kind::Constant: break;
        case Kind::Affine: g = v1_; break;
        case Kind::Quadratic: {
            const Point d = x - v2_;
            for (int r = 0; r < dim_; ++r) {
                g[r] = v1_[r];
                for (int c = 0; c < dim_; ++c) g[r] += m_[r][c] * d[c];
            }
            break;
        }
        case Kind::Sine: {
            const double amp = a_ * std::exp(-rate_ * t);
            for (int i = 0; i < dim_; ++i) {
                double p = amp;
                for (int k = 0; k < dim_; ++k) {
                    const double arg = std::numbers::pi * v1_[k] * x[k] + v2_[k];
                    p *= (k == i) ? std::numbers::pi * v1_[k] * std::cos(arg) : std::sin(arg);
                }
                g[i] = p;
            }
            break;
        }
        case Kind::Bump: {
            const double w2 = width_ * width_;
            const double f = a_ * std::exp(-norm2(x - v1_) / (2.0 * w2)) * std::exp(-rate_ * t);
            for (int i = 0; i < dim_; ++i) g[i] = -f * (x[i] - v1_[i]) / w2;
            break;
        }
        case Kind::Sum:
            for (const auto& e : terms_) g += e.gradient(x, t);
            break;
        case Kind::Max:
        case Kind::Min:
            throw Error(ErrorCode::DegenerateGradient, "max/min expressions have no derivatives");
    }
    return g;
}

Matrix3 Expression::hessian(const Point& x, double t) const {
    Matrix3 h{};
    switch (kind_) {
        case Kind::Constant:
        case Kind::Affine: break;
        case Kind::Quadratic: h = m_; break;
        case Kind::Sine: {
            const double amp = a_ * std::exp(-rate_ * t);
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) {
                    double p = amp;
                    for (int k = 0; k < dim_; ++k) {
                        const double w = std::numbers::pi * v1_[k];
                        const double arg = w * x[k] + v2_[k];
                        if (k == i && k == j) p *= -w * w * std::sin(arg);
                        else if (k == i || k == j) p *= w * std::cos(arg);
                        else p *= std::sin(arg);
                    }
                    h[i][j] = p;
                }
            break;
        }
        case Kind::Bump: {
            const double w2 = width_ * width_;
            const double f = a_ * std::exp(-norm2(x - v1_) / (2.0 * w2)) * std::exp(-rate_ * t);
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) {
                    const double di = x[i] - v1_[i], dj = x[j] - v1_[j];
                    h[i][j] = f * (di * dj / (w2 * w2) - (i == j ? 1.0 / w2 : 0.0));
                }
            break;
        }
        case Kind::Sum:
            for (const auto& e : terms_) {
                const Matrix3 s = e.hessian(x, t);
                for (int i = 0; i < kMaxDim; ++i)
                    for (int j = 0; j < kMaxDim; ++j) h[i][j] += s[i][j];
            }
            break;
        case Kind::Max:
        case Kind::Min:
            throw Error(ErrorCode::DegenerateGradient, "max/min expressions have no derivatives");
    }
    return h;
}

double Expression::time_derivative(const Point& x, double t) const {
    switch (kind_) {
        case Kind::Constant: return 0.0;
        case Kind::Affine:
        case Kind::Quadratic: return rate_;
        case Kind::Sine:
        case Kind::Bump: return -rate_ * (value(x, t) - b_);
        case Kind::Sum: {
            double s = 0.0;
            for (const auto& e : terms_) s += e.time_derivative(x, t);
            return s;
        }
        case Kind::Max:
        case Kind::Min:
            throw Error(ErrorCode::DegenerateGradient, "max/min expressions have no derivatives");
    }
    return 0.0;
}

}  // namespace tow
