#include "mayengine/grading.hpp"

namespace may {

std::string TriDegree::str() const {
    return "(" + std::to_string(s) + "," + std::to_string(f) + "," + std::to_string(w) + ")";
}

std::string MayDegree::str() const {
    return "(" + std::to_string(m) + "," + std::to_string(s) + "," + std::to_string(f) + "," +
           std::to_string(w) + ")";
}

MayDegree may_differential_target(const MayDegree& d, int r) {
    if (r < 2) throw std::invalid_argument("may_differential_target: page index r must be >= 2");
    return {d.m - r + 1, d.s - 1, d.f + 1, d.w};
}

TriDegree adams_differential_target(const TriDegree& d, int r) {
    if (r < 2) throw std::invalid_argument("adams_differential_target: page index r must be >= 2");
    return {d.s - 1, d.f + r, d.w};
}

TriDegree classical_to_motivic(int s_cl, int f_cl) {
    if (f_cl < 0) throw std::invalid_argument("classical_to_motivic: f must be >= 0");
    return {2 * s_cl + f_cl, f_cl, s_cl + f_cl};
}

std::pair<int, int> ctau_to_anss(int s, int w) { return {s, 2 * w - s}; }

}  // namespace may
