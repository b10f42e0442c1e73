#pragma once

#include <iosfwd>

#include "tow/dpp_solver.hpp"

namespace tow {

/// One row per non-exterior node and level:
///   level,t,node,class,x1[,x2[,x3]],u
/// Reals use %.17g, so reading the file back reproduces every bit.
void write_field_csv(std::ostream& os, const ValueField& u);

/// Inverse of write_field_csv for the same lattice and problem. Throws
/// ParseError on malformed rows and ValidationError on a lattice mismatch.
ValueField read_field_csv(std::istream& is, std::shared_ptr<const SpaceTimeLattice> lattice,
                          std::shared_ptr<const Problem> problem);

}  // namespace tow
