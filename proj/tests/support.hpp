#pragma once

#include <memory>

#include "tow/dpp_solver.hpp"

namespace tow::test {

inline std::shared_ptr<const Domain> interval(double lo, double hi, double delta = 0.5) {
    return std::make_shared<const Domain>(Domain::interval(lo, hi, delta));
}

inline std::shared_ptr<const Problem> make_problem(double p, int n, double eps, double horizon,
                                                   std::shared_ptr<const Domain> domain, Expression F,
                                                   Expression psi) {
    return std::make_shared<const Problem>(
        Problem{make_parameters(p, n, eps, horizon), std::move(domain), BoundaryData::uniform(F), Obstacle{psi, 1.0}});
}

inline std::shared_ptr<const SpaceTimeLattice> make_lattice(const Problem& problem, double h) {
    return std::make_shared<const SpaceTimeLattice>(problem.domain, h, problem.params.eps, problem.params.horizon);
}

inline Matrix3 diag(double a, double b = 0.0, double c = 0.0) {
    Matrix3 m{};
    m[0][0] = a;
    m[1][1] = b;
    m[2][2] = c;
    return m;
}

}  // namespace tow::test
