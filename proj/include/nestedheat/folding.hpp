#pragma once

#include <climits>
#include <vector>

#include "nestedheat/labelling.hpp"

namespace nh {

// Fiber of the projection over a base point y, split by generation shell:
// A[m] holds the preimages whose host cell lies in K^<M+m+1> \ K^<M+m>;
// A[0] splits into B (host cell disjoint from K^<M>) and C (host cell
// touching K^<M> in a single vertex, recorded as the contact).
struct FiberDecomposition {
    Vec2 base;
    int level = 0;
    int m_max = 0;
    std::vector<std::vector<Vec2>> A;  // m = 0..m_max
    std::vector<Vec2> B;
    struct ContactPoint {
        Vec2 point;
        Vec2 contact;  // shared vertex z of the host cell and K^<M>
    };
    std::vector<ContactPoint> C;
    bool includes_base = true;
};

// A boundary vertex z of K^<M> together with a witness external cell whose
// intersection with K^<M> is exactly {z}.
struct BoundaryContact {
    Vec2 z;
    CellAddress cell;
};

// Fold x into the base complex: pi_M(x) = R_Delta(x - translation(Delta)) for
// the labelled cell Delta containing x.  Well-definedness at shared vertices
// is asserted by evaluating through every containing cell.
Vec2 project(const FractalSystem& sys, const Labelling& lab, const Vec2& x, int M);

// Enumerate the fiber over y through every level-M cell in K^<M+m_max+1>.
// y must not be a vertex of K^<M> (rank weighting happens downstream).
FiberDecomposition fiber(const FractalSystem& sys, const Labelling& lab, const Vec2& y,
                         int M, int m_max, std::int64_t cap = kDefaultCellCap);

// Number of level-M cells within K^<J> containing y.
int rank_of(const FractalSystem& sys, const Vec2& y, int M, int J);

// V*_M: vertices of K^<M> at which some external M-cell touches K^<M> in
// exactly one point.  Probed within K^<J>, J >= M+2.
std::vector<BoundaryContact> boundary_set(const FractalSystem& sys, int M, int J = INT_MIN);

// delta_M(x,y) = min over z in V*_M of |x-z| + |z-y|.
double delta(const FractalSystem& sys, const Vec2& x, const Vec2& y, int M, int J = INT_MIN);

// True iff y lies (within tolerance) on a vertex of the level-M lattice.
bool is_lattice_vertex(const FractalSystem& sys, const Vec2& y, int M, int J);

}  // namespace nh
