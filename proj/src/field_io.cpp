#include "tow/field_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tow {

void write_field_csv(std::ostream& os, const ValueField& u) {
    const SpaceTimeLattice& lat = u.lattice();
    const int n = lat.dim();
    os << "level,t,node,class";
    for (int i = 0; i < n; ++i) os << ",x" << (i + 1);
    os << ",u\n";
    char buf[64];
    for (int j = 0; j <= lat.levels(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", lat.time(j));
        const std::string t = buf;
        for (std::size_t i = 0; i < lat.node_count(); ++i) {
            const NodeClass c = lat.classes()[i];
            if (c == NodeClass::Exterior) continue;
            const auto id = static_cast<NodeId>(i);
            os << j << ',' << t << ',' << id << ',' << (c == NodeClass::Interior ? "interior" : "strip");
            const Point x = lat.coordinate(id);
            for (int k = 0; k < n; ++k) {
                std::snprintf(buf, sizeof buf, ",%.17g", x[k]);
                os << buf;
            }
            std::snprintf(buf, sizeof buf, ",%.17g\n", u.at(id, j));
            os << buf;
        }
    }
}

ValueField read_field_csv(std::istream& is, std::shared_ptr<const SpaceTimeLattice> lattice,
                          std::shared_ptr<const Problem> problem) {
    ValueField u(lattice, problem);
    const int n = lattice->dim();
    const std::size_t columns = 5 + static_cast<std::size_t>(n);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "line 1: empty field file");
    std::size_t rows = 0;
    std::vector<std::string> cells;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        cells.clear();
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns)
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                                   std::to_string(columns) + " columns, found " +
                                                   std::to_string(cells.size()));
        char* end = nullptr;
        const long level = std::strtol(cells[0].c_str(), &end, 10);
        const long long node = std::strtoll(cells[2].c_str(), &end, 10);
        const double value = std::strtod(cells.back().c_str(), &end);
        if (*end != '\0')
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad value '" + cells.back() + "'");
        if (level < 0 || level > lattice->levels() || node < 0 ||
            static_cast<std::size_t>(node) >= lattice->node_count() ||
            lattice->node_class(static_cast<NodeId>(node)) == NodeClass::Exterior)
            throw Error(ErrorCode::ValidationError,
                        "line " + std::to_string(line_no) + ": row does not match the lattice");
        u.at(static_cast<NodeId>(node), static_cast<int>(level)) = value;
        ++rows;
    }
    const std::size_t expected =
        (lattice->interior_nodes().size() + lattice->strip_nodes().size()) * static_cast<std::size_t>(lattice->levels() + 1);
    if (rows != expected)
        throw Error(ErrorCode::ValidationError,
                    "field file has " + std::to_string(rows) + " rows, lattice needs " + std::to_string(expected));
    return u;
}

}  // namespace tow
