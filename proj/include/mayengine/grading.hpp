#pragma once
// Degree arithmetic for the four gradings (m,s,f,w), the Chow degree, and the
// fixed degree laws of the spectral-sequence maps.
//
// Conventions: s = stem, f = Adams filtration, w = motivic weight, m = May
// filtration.  tau has degree (0,0,-1).  The engine's window never exceeds
// |s|, f, m, |w| < 512, so plain int is ample.

#include <compare>
#include <stdexcept>
#include <string>

namespace may {

struct TriDegree {
    int s = 0;
    int f = 0;
    int w = 0;

    friend auto operator<=>(const TriDegree&, const TriDegree&) = default;
    TriDegree operator+(const TriDegree& o) const { return {s + o.s, f + o.f, w + o.w}; }
    TriDegree operator-(const TriDegree& o) const { return {s - o.s, f - o.f, w - o.w}; }
    std::string str() const;
};

struct MayDegree {
    int m = 0;
    int s = 0;
    int f = 0;
    int w = 0;

    friend auto operator<=>(const MayDegree&, const MayDegree&) = default;
    MayDegree operator+(const MayDegree& o) const { return {m + o.m, s + o.s, f + o.f, w + o.w}; }
    MayDegree operator-(const MayDegree& o) const { return {m - o.m, s - o.s, f - o.f, w - o.w}; }
    TriDegree tri() const { return {s, f, w}; }
    std::string str() const;
};

// Chow degree s+f-2w (the paper's t-2w with internal degree t = s+f).
inline int chow_degree(const TriDegree& d) { return d.s + d.f - 2 * d.w; }

// May d_r: (m,s,f,w) -> (m-r+1, s-1, f+1, w).  Rejects r < 2.
MayDegree may_differential_target(const MayDegree& d, int r);

// Adams d_r: (s,f,w) -> (s-1, f+r, w).  Rejects r < 2.
TriDegree adams_differential_target(const TriDegree& d, int r);

// Chow-degree-0 embedding of classical degrees: (s,f) -> (2s+f, f, s+f).
TriDegree classical_to_motivic(int s_cl, int f_cl);

// pi_{s,w}(Ctau) -> classical Adams-Novikov E2^{s, 2w-s}: returns (s, 2w-s).
std::pair<int, int> ctau_to_anss(int s, int w);

}  // namespace may
