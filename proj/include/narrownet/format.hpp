#pragma once

#include <iomanip>
#include <sstream>
#include <string>

namespace narrow {

/// 17 significant digits: enough to re-parse any double exactly.
inline std::string exact(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// 4 significant digits, for human-readable summaries.
inline std::string brief(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

}  // namespace narrow
