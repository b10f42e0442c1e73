#include "tow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace tow {

namespace {

// Points whose signed distance is within this fraction of h of zero are
// treated as lying on the boundary (strip side).
constexpr double kBoundarySnap = 1e-12;
// Open-ball membership tolerance, relative to eps.
constexpr double kOpenBallTol = 1e-12;

double box_signed_distance(const Box& b, const Point& x) {
    double outside = 0.0;
    double inside = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < x.dim; ++i) {
        const double q = std::max(b.lo[i] - x[i], x[i] - b.hi[i]);
        if (q > 0.0) outside += q * q;
        inside = std::max(inside, q);
    }
    return std::sqrt(outside) + std::min(inside, 0.0);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidParameter, what);
}

}  // namespace

std::string_view to_string(NodeClass c) {
    switch (c) {
        case NodeClass::Interior: return "interior";
        case NodeClass::LateralStrip: return "strip";
        case NodeClass::Exterior: return "exterior";
    }
    return "?";
}

Domain Domain::box(Point lo, Point hi, double delta) {
    require(lo.dim == hi.dim, "box corners must share a dimension");
    for (int i = 0; i < lo.dim; ++i) require(lo[i] < hi[i], "box requires lo < hi in every axis");
    require(delta > 0.0, "exterior sphere radius must be positive");
    Domain d;
    d.kind_ = Kind::Box;
    d.dim_ = lo.dim;
    d.bounds_ = {lo, hi};
    d.center_ = 0.5 * (lo + hi);
    d.r_outer_ = 0.5 * distance(lo, hi);
    d.delta_ = delta;
    d.label_ = "box";
    return d;
}

Domain Domain::interval(double lo, double hi, double delta) {
    Domain d = box(Point{lo}, Point{hi}, delta);
    d.label_ = "interval";
    return d;
}

Domain Domain::ball(Point center, double radius, double delta) {
    require(radius > 0.0, "ball radius must be positive");
    require(delta > 0.0, "exterior sphere radius must be positive");
    Domain d;
    d.kind_ = Kind::Ball;
    d.dim_ = center.dim;
    d.center_ = center;
    d.r_outer_ = radius;
    d.delta_ = delta;
    Point r(center.dim);
    for (int i = 0; i < center.dim; ++i) r[i] = radius;
    d.bounds_ = {center - r, center + r};
    d.label_ = "ball";
    return d;
}

Domain Domain::annulus(Point center, double inner_radius, double outer_radius, double delta) {
    require(inner_radius > 0.0 && outer_radius > inner_radius, "annulus requires 0 < r_in < r_out");
    if (delta <= 0.0) delta = inner_radius;
    require(delta <= inner_radius,
            "annulus exterior sphere radius must fit inside the hole (delta <= r_in)");
    Domain d = ball(center, outer_radius, delta);
    d.kind_ = Kind::Annulus;
    d.r_inner_ = inner_radius;
    d.label_ = "annulus";
    return d;
}

Domain Domain::generic(int dim, SignedDistance sdf, Box bounds, double delta, std::string label) {
    require(dim >= 1 && dim <= kMaxDim, "dimension must be between 1 and 3");
    require(static_cast<bool>(sdf), "generic domain needs a signed distance");
    require(delta > 0.0, "exterior sphere radius must be positive");
    Domain d;
    d.kind_ = Kind::Generic;
    d.dim_ = dim;
    d.sdf_ = std::move(sdf);
    d.bounds_ = bounds;
    d.center_ = 0.5 * (bounds.lo + bounds.hi);
    d.r_outer_ = 0.5 * distance(bounds.lo, bounds.hi);
    d.delta_ = delta;
    d.label_ = std::move(label);
    return d;
}

std::string_view Domain::kind_name() const {
    switch (kind_) {
        case Kind::Box: return dim_ == 1 ? "interval" : "box";
        case Kind::Ball: return "ball";
        case Kind::Annulus: return "annulus";
        case Kind::Generic: return "generic";
    }
    return "?";
}

double Domain::signed_distance(const Point& x) const {
    switch (kind_) {
        case Kind::Box: return box_signed_distance(bounds_, x);
        case Kind::Ball: return distance(x, center_) - r_outer_;
        case Kind::Annulus: {
            const double r = distance(x, center_);
            return std::max(r - r_outer_, r_inner_ - r);
        }
        case Kind::Generic: return sdf_(x);
    }
    return 0.0;
}

Box Domain::bounding_box(double eps) const {
    Box b = bounds_;
    for (int i = 0; i < dim_; ++i) {
        b.lo[i] -= eps;
        b.hi[i] += eps;
    }
    return b;
}

Point Domain::enclosing_center() const { return center_; }

double Domain::enclosing_radius() const { return r_outer_; }

Point Domain::exterior_normal(const Point& y) const {
    switch (kind_) {
        case Kind::Box: {
            // Sum of the active face normals (corners get the diagonal).
            Point n(dim_);
            const double tol = 1e-9 * (1.0 + r_outer_);
            for (int i = 0; i < dim_; ++i) {
                if (std::abs(y[i] - bounds_.hi[i]) <= tol) n[i] += 1.0;
                if (std::abs(y[i] - bounds_.lo[i]) <= tol) n[i] -= 1.0;
            }
            const double len = norm(n);
            if (len == 0.0) throw Error(ErrorCode::NoWitness, "point is not on the box boundary");
            return n * (1.0 / len);
        }
        case Kind::Ball:
        case Kind::Annulus: {
            Point v = y - center_;
            const double r = norm(v);
            if (r == 0.0) throw Error(ErrorCode::NoWitness, "boundary point coincides with center");
            v *= 1.0 / r;
            if (kind_ == Kind::Annulus && std::abs(r - r_inner_) < std::abs(r - r_outer_)) v *= -1.0;
            return v;
        }
        case Kind::Generic: {
            Point g(dim_);
            const double step = 1e-6 * (1.0 + r_outer_);
            for (int i = 0; i < dim_; ++i) {
                Point a = y, b = y;
                a[i] += step;
                b[i] -= step;
                g[i] = (sdf_(a) - sdf_(b)) / (2.0 * step);
            }
            const double len = norm(g);
            if (!(len > 0.0)) throw Error(ErrorCode::NoWitness, "signed distance has no gradient");
            return g * (1.0 / len);
        }
    }
    return Point(dim_);
}

NodeClass classify_node(const Domain& domain, const Point& x, double eps) {
    const double d = domain.signed_distance(x);
    const double snap = kBoundarySnap * eps;
    if (d < -snap) return NodeClass::Interior;
    if (d <= eps * (1.0 + kOpenBallTol)) return NodeClass::LateralStrip;
    return NodeClass::Exterior;
}

Point exterior_sphere_witness(const Domain& domain, const Point& y) {
    const double delta = domain.exterior_sphere_radius();
    const double scale = 1.0 + domain.enclosing_radius();
    if (std::abs(domain.signed_distance(y)) > 1e-8 * scale)
        throw Error(ErrorCode::NoWitness, "point is not on the boundary");
    const Point z = y + delta * domain.exterior_normal(y);
    if (domain.kind() != Domain::Kind::Generic) return z;

    // Sampled tangency check: the ball B_delta(z) must avoid Omega.
    const int dim = domain.dim();
    const auto dirs = rim_direction_set(dim, 8.0);
    const double tol = 1e-6 * scale;
    for (double frac : {0.0, 0.25, 0.5, 0.75, 0.999}) {
        for (const Point& u : dirs) {
            if (domain.signed_distance(z + (frac * delta) * u) < -tol)
                throw Error(ErrorCode::NoWitness,
                            "asserted exterior sphere radius fails the sampled tangency check");
            if (frac == 0.0) break;
        }
    }
    return z;
}

std::vector<double> ball_mean_weights(std::span<const double> r2, int dim, double eps) {
    const double target = dim * eps * eps / (dim + 2.0);
    double s0 = 0.0, s2 = 0.0, s4 = 0.0, r2max = 0.0;
    for (double r : r2) {
        s0 += 1.0;
        s2 += r;
        s4 += r * r;
        r2max = std::max(r2max, r);
    }
    double b = 0.0;
    const double denom = s4 - target * s2;
    if (denom > 0.0) b = (target * s0 - s2) / denom;
    if (r2max > 0.0) b = std::max(b, -1.0 / r2max);
    if (!std::isfinite(b)) b = 0.0;
    std::vector<double> w(r2.size());
    double total = 0.0;
    for (std::size_t k = 0; k < r2.size(); ++k) {
        w[k] = 1.0 + b * r2[k];
        total += w[k];
    }
    for (double& x : w) x /= total;
    return w;
}

std::vector<Point> rim_direction_set(int dim, double eps_over_h) {
    std::vector<Point> dirs;
    const int ratio = static_cast<int>(std::ceil(eps_over_h - 1e-9));
    if (dim == 1) {
        dirs.push_back(Point{-1.0});
        dirs.push_back(Point{1.0});
    } else if (dim == 2) {
        const int m = std::max(8, 8 * ratio);
        for (int k = 0; k < m; ++k) {
            const double th = 2.0 * std::numbers::pi * k / m;
            dirs.push_back(Point{std::cos(th), std::sin(th)});
        }
    } else {
        const int half = std::max(16, 2 * ratio * ratio);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < 3; ++i) {
            dirs.push_back(unit_axis(3, i, 1.0));
            dirs.push_back(unit_axis(3, i, -1.0));
        }
        for (int k = 0; k < half; ++k) {
            const double z = (k + 0.5) / half;
            const double r = std::sqrt(1.0 - z * z);
            const double ph = golden * k;
            Point u{r * std::cos(ph), r * std::sin(ph), z};
            dirs.push_back(u);
            dirs.push_back(-1.0 * u);
        }
    }
    return dirs;
}

SpaceTimeLattice::SpaceTimeLattice(std::shared_ptr<const Domain> domain, double h, double eps,
                                   double horizon, LatticeOptions options)
    : domain_(std::move(domain)), dim_(domain_->dim()), h_(h), eps_(eps), horizon_(horizon) {
    require(h > 0.0 && std::isfinite(h), "lattice spacing h must be positive");
    require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
    require(horizon > 0.0 && std::isfinite(horizon), "horizon T must be positive");
    require(dim_ >= 1 && dim_ <= kMaxDim, "lattice dimension must be between 1 and 3");
    if (options.enforce_resolution_floor)
        require(eps / h >= 4.0 - 1e-9, "eps/h must be at least 4");

    levels_ = static_cast<int>(std::ceil(2.0 * horizon / (eps * eps) - 1e-9));
    levels_ = std::max(levels_, 1);

    Point anchor = options.has_anchor ? options.anchor : Point(dim_);
    anchor.dim = dim_;
    const Box bb = domain_->bounding_box(eps);
    origin_ = Point(dim_);
    std::int64_t total = 1;
    for (int i = 0; i < dim_; ++i) {
        const auto lo = static_cast<std::int64_t>(std::floor((bb.lo[i] - anchor[i]) / h)) - 2;
        const auto hi = static_cast<std::int64_t>(std::ceil((bb.hi[i] - anchor[i]) / h)) + 2;
        count_[i] = hi - lo + 1;
        origin_[i] = anchor[i] + static_cast<double>(lo) * h;
        total *= count_[i];
    }
    require(total <= 50'000'000, "lattice too large");
    std::int64_t s = 1;
    for (int i = dim_ - 1; i >= 0; --i) {
        stride_[i] = s;
        s *= count_[i];
    }
    // Coordinates are recomputed from the anchor so that anchor-aligned nodes are exact.
    anchor_ = anchor;
    for (int i = 0; i < dim_; ++i)
        first_index_[i] = static_cast<std::int64_t>(std::llround((origin_[i] - anchor[i]) / h));

    classes_.resize(static_cast<std::size_t>(total));
    slot_.assign(static_cast<std::size_t>(total), -1);
    for (NodeId id = 0; id < total; ++id) {
        const NodeClass c = classify_node(*domain_, coordinate(id), eps);
        classes_[static_cast<std::size_t>(id)] = c;
        if (c == NodeClass::Interior) {
            slot_[static_cast<std::size_t>(id)] = static_cast<std::int64_t>(interior_.size());
            interior_.push_back(id);
        } else if (c == NodeClass::LateralStrip) {
            strip_.push_back(id);
        }
    }
    build_stencils();
}

Point SpaceTimeLattice::coordinate(NodeId id) const {
    Point x(dim_);
    for (int i = 0; i < dim_; ++i) {
        const std::int64_t k = (id / stride_[i]) % count_[i];
        x[i] = anchor_[i] + static_cast<double>(first_index_[i] + k) * h_;
    }
    return x;
}

NodeId SpaceTimeLattice::node_id(const std::array<std::int64_t, kMaxDim>& index) const {
    NodeId id = 0;
    for (int i = 0; i < dim_; ++i) {
        if (index[i] < 0 || index[i] >= count_[i]) return -1;
        id += index[i] * stride_[i];
    }
    return id;
}

std::array<std::int64_t, kMaxDim> SpaceTimeLattice::node_index(NodeId id) const {
    std::array<std::int64_t, kMaxDim> idx{};
    for (int i = 0; i < dim_; ++i) idx[i] = (id / stride_[i]) % count_[i];
    return idx;
}

NodeId SpaceTimeLattice::nearest_node(const Point& x) const {
    std::array<std::int64_t, kMaxDim> idx{};
    for (int i = 0; i < dim_; ++i) {
        const auto k = static_cast<std::int64_t>(std::llround((x[i] - origin_[i]) / h_));
        idx[i] = std::clamp<std::int64_t>(k, 0, count_[i] - 1);
    }
    return node_id(idx);
}

bool SpaceTimeLattice::locate(const Point& x, NodeId& base,
                              std::array<double, kMaxDim>& frac) const {
    std::array<std::int64_t, kMaxDim> idx{};
    frac = {};
    for (int i = 0; i < dim_; ++i) {
        const double s = (x[i] - origin_[i]) / h_;
        if (s < 0.0 || s > static_cast<double>(count_[i] - 1)) return false;
        auto k = static_cast<std::int64_t>(std::floor(s));
        k = std::min<std::int64_t>(k, count_[i] - 2);
        idx[i] = k;
        frac[i] = s - static_cast<double>(k);
        // Snap round-off so that lattice points interpolate exactly.
        if (frac[i] < 1e-12) frac[i] = 0.0;
        if (frac[i] > 1.0 - 1e-12) frac[i] = 1.0;
    }
    base = node_id(idx);
    return base >= 0;
}

double SpaceTimeLattice::interpolate(std::span<const double> values, NodeId base,
                                     const std::array<double, kMaxDim>& frac) const {
    double acc = 0.0;
    const int corners = 1 << dim_;
    for (int m = 0; m < corners; ++m) {
        double w = 1.0;
        NodeId id = base;
        for (int i = 0; i < dim_; ++i) {
            if (m & (1 << i)) {
                w *= frac[i];
                id += stride_[i];
            } else {
                w *= 1.0 - frac[i];
            }
        }
        if (w != 0.0) acc += w * values[static_cast<std::size_t>(id)];
    }
    return acc;
}

bool SpaceTimeLattice::interpolation_cell_valid(NodeId base) const {
    const auto idx = node_index(base);
    for (int i = 0; i < dim_; ++i)
        if (idx[i] + 1 >= count_[i]) return false;
    const int corners = 1 << dim_;
    for (int m = 0; m < corners; ++m) {
        NodeId id = base;
        for (int i = 0; i < dim_; ++i)
            if (m & (1 << i)) id += stride_[i];
        if (node_class(id) == NodeClass::Exterior) return false;
    }
    return true;
}

void SpaceTimeLattice::build_stencils() {
    // Integer offsets strictly inside the open ball, in ascending id order.
    const double reach = eps_ * (1.0 - kOpenBallTol);
    const auto r = static_cast<std::int64_t>(std::ceil(eps_ / h_));
    std::vector<std::array<std::int64_t, kMaxDim>> offsets;
    std::array<std::int64_t, kMaxDim> o{};
    const std::int64_t span_len = 2 * r + 1;
    std::int64_t combos = 1;
    for (int i = 0; i < dim_; ++i) combos *= span_len;
    for (std::int64_t c = 0; c < combos; ++c) {
        std::int64_t rem = c;
        double d2 = 0.0;
        for (int i = dim_ - 1; i >= 0; --i) {
            o[i] = rem % span_len - r;
            rem /= span_len;
            d2 += static_cast<double>(o[i] * o[i]) * h_ * h_;
        }
        if (d2 < reach * reach) offsets.push_back(o);
    }
    std::vector<double> r2;
    for (const auto& off : offsets) {
        NodeId delta = 0;
        double d2 = 0.0;
        for (int i = 0; i < dim_; ++i) {
            delta += off[i] * stride_[i];
            d2 += static_cast<double>(off[i] * off[i]) * h_ * h_;
        }
        full_deltas_.push_back(delta);
        r2.push_back(d2);
    }
    full_weights_ = ball_mean_weights(r2, dim_, eps_);

    rim_dirs_ = rim_direction_set(dim_, eps_ / h_);
    const std::size_t nrim = rim_dirs_.size();
    partial_first_.assign(interior_.size(), -1);
    partial_count_.assign(interior_.size(), 0);
    too_small_.assign(interior_.size(), false);
    rim_.resize(interior_.size() * nrim);

    for (std::size_t s = 0; s < interior_.size(); ++s) {
        const NodeId x = interior_[s];
        const auto idx = node_index(x);
        const Point xc = coordinate(x);
        bool full = true;
        std::vector<NodeId> members;
        std::vector<double> mr2;
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            std::array<std::int64_t, kMaxDim> yi{};
            for (int i = 0; i < dim_; ++i) yi[i] = idx[i] + offsets[k][i];
            const NodeId y = node_id(yi);
            if (y < 0 || node_class(y) == NodeClass::Exterior) {
                full = false;
                continue;
            }
            members.push_back(y);
            mr2.push_back(r2[k]);
        }
        if (!full) {
            partial_first_[s] = static_cast<std::int64_t>(partial_members_.size());
            partial_count_[s] = static_cast<std::int64_t>(members.size());
            const auto w = ball_mean_weights(mr2, dim_, eps_);
            partial_members_.insert(partial_members_.end(), members.begin(), members.end());
            partial_weights_.insert(partial_weights_.end(), w.begin(), w.end());
        }
        too_small_[s] = members.size() < 3;

        for (std::size_t k = 0; k < nrim; ++k) {
            RimSample& rs = rim_[s * nrim + k];
            const Point pos = xc + eps_ * rim_dirs_[k];
            if (domain_->signed_distance(pos) >= -kBoundarySnap * eps_) {
                rs.cell_base = RimSample::kStrip;
                continue;
            }
            NodeId base = -1;
            if (locate(pos, base, rs.frac) && interpolation_cell_valid(base))
                rs.cell_base = base;
            else
                rs.cell_base = RimSample::kInvalid;
        }
    }
}

SpaceTimeLattice::StencilView SpaceTimeLattice::stencil(NodeId x) const {
    const std::int64_t s = interior_slot(x);
    if (s < 0) throw Error(ErrorCode::InvalidParameter, "stencils exist only for interior nodes");
    if (too_small_[static_cast<std::size_t>(s)])
        throw Error(ErrorCode::StencilTooSmall,
                    "fewer than 3 lattice nodes inside B_eps(x); eps/h too small or domain thinner than eps");
    const std::int64_t first = partial_first_[static_cast<std::size_t>(s)];
    if (first < 0) return {x, true, full_deltas_, full_weights_};
    const auto count = static_cast<std::size_t>(partial_count_[static_cast<std::size_t>(s)]);
    return {x, false,
            std::span<const NodeId>(partial_members_).subspan(static_cast<std::size_t>(first), count),
            std::span<const double>(partial_weights_).subspan(static_cast<std::size_t>(first), count)};
}

std::span<const RimSample> SpaceTimeLattice::rim_samples(NodeId x) const {
    const std::int64_t s = interior_slot(x);
    if (s < 0) return {};
    const std::size_t n = rim_dirs_.size();
    return std::span<const RimSample>(rim_).subspan(static_cast<std::size_t>(s) * n, n);
}

BallStencil ball_nodes(const SpaceTimeLattice& lattice, NodeId x) {
    if (x < 0 || static_cast<std::size_t>(x) >= lattice.node_count() ||
        lattice.node_class(x) != NodeClass::Interior)
        throw Error(ErrorCode::InvalidParameter, "ball_nodes requires an interior node");
    const auto view = lattice.stencil(x);
    BallStencil out;
    out.center = x;
    out.members.reserve(view.size());
    for (std::size_t k = 0; k < view.size(); ++k) out.members.push_back(view.member(k));
    out.weights.assign(view.weights.begin(), view.weights.end());
    return out;
}

}  // namespace tow
