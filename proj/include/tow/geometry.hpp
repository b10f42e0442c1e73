#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tow/error.hpp"
#include "tow/point.hpp"

namespace tow {

using NodeId = std::int64_t;

enum class NodeClass : std::uint8_t { Interior, LateralStrip, Exterior };

std::string_view to_string(NodeClass c);

struct Box {
    Point lo;
    Point hi;
};

/// Spatial region Omega. Signed distance is negative inside.
class Domain {
public:
    enum class Kind { Box, Ball, Annulus, Generic };

    using SignedDistance = std::function<double(const Point&)>;

    static Domain box(Point lo, Point hi, double delta = 0.5);
    static Domain interval(double lo, double hi, double delta = 0.5);
    static Domain ball(Point center, double radius, double delta = 0.5);
    static Domain annulus(Point center, double inner_radius, double outer_radius,
                          double delta = -1.0);
    /// `delta` is asserted by the caller and only checked by sampling in
    /// exterior_sphere_witness.
    static Domain generic(int dim, SignedDistance sdf, Box bounds, double delta,
                          std::string label = "generic");

    Kind kind() const { return kind_; }
    std::string_view kind_name() const;
    int dim() const { return dim_; }
    double signed_distance(const Point& x) const;
    /// Bounding box of Omega itself (without the strip).
    const Box& bounds() const { return bounds_; }
    /// Bounding box of Omega ∪ S_eps.
    Box bounding_box(double eps) const;
    double exterior_sphere_radius() const { return delta_; }
    Point enclosing_center() const;
    double enclosing_radius() const;

    // shape numbers, meaningful per kind
    const Point& center() const { return center_; }
    double radius() const { return r_outer_; }
    double inner_radius() const { return r_inner_; }
    const std::string& label() const { return label_; }

    /// Outward unit normal of the complement's tangent ball at a boundary point.
    Point exterior_normal(const Point& y) const;

private:
    Domain() = default;

    Kind kind_ = Kind::Box;
    int dim_ = 1;
    Box bounds_;
    Point center_;
    double r_inner_ = 0.0;
    double r_outer_ = 0.0;
    double delta_ = 0.5;
    SignedDistance sdf_;
    std::string label_;
};

/// Interior / lateral strip / exterior rule for a point.
NodeClass classify_node(const Domain& domain, const Point& x, double eps);

/// Center z of an exterior ball B_delta(z) tangent to the boundary at y.
Point exterior_sphere_witness(const Domain& domain, const Point& y);

struct BallStencil {
    NodeId center = -1;
    std::vector<NodeId> members;  // ascending node id, center included
    std::vector<double> weights;  // quadrature weights for the ball mean, sum to 1
};

struct LatticeOptions {
    /// A lattice node is placed at `anchor` (defaults to the origin).
    Point anchor;
    bool has_anchor = false;
    /// When false, ε/h < 4 is accepted (used to probe coarse stencils).
    bool enforce_resolution_floor = true;
};

/// Sample on the sphere |y - x| = eps attached to an interior node, used for
/// the sup/inf part of the averaging operator.
struct RimSample {
    static constexpr NodeId kStrip = -1;
    static constexpr NodeId kInvalid = -2;
    NodeId cell_base = kInvalid;  // lowest corner of the interpolation cell
    std::array<double, kMaxDim> frac{};
};

/// Lattice spanning the bounding box of Omega ∪ S_eps, with time levels
/// t_j = j·eps²/2, j = 0..M.
class SpaceTimeLattice {
public:
    SpaceTimeLattice(std::shared_ptr<const Domain> domain, double h, double eps, double horizon,
                     LatticeOptions options = {});

    const Domain& domain() const { return *domain_; }
    std::shared_ptr<const Domain> domain_ptr() const { return domain_; }
    int dim() const { return dim_; }
    double h() const { return h_; }
    double eps() const { return eps_; }
    double horizon() const { return horizon_; }
    int levels() const { return levels_; }  // M; time levels are 0..M
    double time(int level) const { return 0.5 * eps_ * eps_ * level; }

    std::size_t node_count() const { return classes_.size(); }
    std::array<std::int64_t, kMaxDim> extent() const { return count_; }
    Point coordinate(NodeId id) const;
    NodeClass node_class(NodeId id) const { return classes_[static_cast<std::size_t>(id)]; }
    std::span<const NodeClass> classes() const { return classes_; }
    std::span<const NodeId> interior_nodes() const { return interior_; }
    std::span<const NodeId> strip_nodes() const { return strip_; }
    /// Position of `id` in interior_nodes(), or -1.
    std::int64_t interior_slot(NodeId id) const { return slot_[static_cast<std::size_t>(id)]; }

    NodeId node_id(const std::array<std::int64_t, kMaxDim>& index) const;
    std::array<std::int64_t, kMaxDim> node_index(NodeId id) const;
    NodeId nearest_node(const Point& x) const;
    /// Lowest corner and fractional offsets of the cell containing x
    /// (clamped to the lattice). Returns false if x lies outside the box.
    bool locate(const Point& x, NodeId& base, std::array<double, kMaxDim>& frac) const;
    /// Multilinear interpolation of per-node values; all cell corners with
    /// nonzero weight must hold finite values.
    double interpolate(std::span<const double> values, NodeId base,
                       const std::array<double, kMaxDim>& frac) const;
    bool interpolation_cell_valid(NodeId base) const;

    /// Stencil of an interior node; throws StencilTooSmall on degenerate stencils.
    struct StencilView {
        NodeId center;
        bool relative;                    // members are center + delta
        std::span<const NodeId> entries;  // deltas or absolute ids
        std::span<const double> weights;
        NodeId member(std::size_t k) const { return relative ? center + entries[k] : entries[k]; }
        std::size_t size() const { return entries.size(); }
    };
    StencilView stencil(NodeId interior_node) const;

    std::span<const Point> rim_directions() const { return rim_dirs_; }
    std::span<const RimSample> rim_samples(NodeId interior_node) const;

private:
    void build_stencils();

    std::shared_ptr<const Domain> domain_;
    int dim_;
    double h_, eps_, horizon_;
    int levels_;
    Point origin_;
    Point anchor_;
    std::array<std::int64_t, kMaxDim> first_index_{};
    std::array<std::int64_t, kMaxDim> count_{1, 1, 1};
    std::array<std::int64_t, kMaxDim> stride_{0, 0, 0};
    std::vector<NodeClass> classes_;
    std::vector<NodeId> interior_;
    std::vector<NodeId> strip_;
    std::vector<std::int64_t> slot_;

    // Full-ball stencil shared by every node whose ball avoids the exterior.
    std::vector<NodeId> full_deltas_;
    std::vector<double> full_weights_;
    // Per interior slot: -1 when the full stencil applies, else offset into partial_*.
    std::vector<std::int64_t> partial_first_;
    std::vector<std::int64_t> partial_count_;
    std::vector<NodeId> partial_members_;
    std::vector<double> partial_weights_;
    std::vector<bool> too_small_;

    std::vector<Point> rim_dirs_;
    std::vector<RimSample> rim_;
};

/// All non-exterior nodes strictly inside B_eps(x) for an interior node x.
BallStencil ball_nodes(const SpaceTimeLattice& lattice, NodeId x);

/// Radial weights w = 1 + b·r² normalised so that the weighted second moment
/// of the offsets equals n·eps²/(n+2), the second moment of the uniform ball.
/// Falls back to equal weights when no nonnegative b achieves it.
std::vector<double> ball_mean_weights(std::span<const double> squared_radii, int dim, double eps);

/// Unit directions used for rim samples, closed under negation.
std::vector<Point> rim_direction_set(int dim, double eps_over_h);

}  // namespace tow
