#pragma once

#include <cstdint>
#include <vector>

#include "nestedheat/geometry.hpp"

namespace nh {

// One of the k admissible rotations about the barycenter of K^<M>: index i
// rotates by 2*pi*i/k counterclockwise; index k is the identity.
struct Rotation {
    int index = 0;  // 1..k
};

// A good labelling of the level-M vertex lattice within K^<J>.  Labels are
// stored zero-based (slot p of the base cell carries label p); the public
// alphabet is a_1..a_k with a_{label+1}.  cell_rotation[c] is the rotation
// index of the cell with lexicographic rank c.
struct Labelling {
    int level = 0;     // M
    int envelope = 0;  // J
    VertexTable verts;
    std::vector<int> label;          // per vertex index, 0..k-1
    std::vector<int> cell_rotation;  // per cell rank, 1..k
};

// Certificate that no consistent labelling exists: a closed chain of cells in
// which consecutive cells share a vertex, such that the slot offsets
// accumulate to a nonzero holonomy mod k.  Any rotation assignment would have
// to satisfy r_{next} = r_{cell} + (slot_here - slot_next) (mod k) along every
// link, which telescopes to holonomy = 0 around a cycle; a nonzero holonomy
// therefore rules out every labelling, independent of construction order.
struct GlpObstruction {
    struct Link {
        CellAddress cell;  // cell_i of the cycle
        Vec2 vertex;       // shared with cell_{i+1}
        int slot_here = 0; // slot of vertex in cell_i
        int slot_next = 0; // slot of vertex in cell_{i+1}
    };
    int level = 0;
    int envelope = 0;
    std::vector<Link> links;
    int holonomy() const;  // sum of (slot_here - slot_next), reduced mod k by caller
};

class NoGlpError : public Error {
  public:
    NoGlpError(const std::string& msg, GlpObstruction obstruction)
        : Error(Errc::NoGLP, msg), obstruction_(std::move(obstruction)) {}
    const GlpObstruction& obstruction() const { return obstruction_; }

  private:
    GlpObstruction obstruction_;
};

// Propagation order knob, used to demonstrate order independence.
enum class BfsOrder { forward, reversed };

// Build the labelling by breadth-first propagation from the base cell; the
// base cell is labelled counterclockwise starting from its lexicographically
// smallest vertex.  Throws NoGlpError with a cycle certificate if some cell
// admits no rotation consistent with already-fixed shared vertices.
Labelling construct_labelling(const FractalSystem& sys, int M, int J,
                              std::int64_t cap = kDefaultCellCap,
                              BfsOrder order = BfsOrder::forward);

// Independent re-check of both labelling conditions on every cell.
struct GlpReport {
    bool ok = true;
    std::vector<CellAddress> violations;
};
GlpReport verify_glp(const FractalSystem& sys, const Labelling& lab);

// Re-verify an obstruction certificate from scratch: recomputes each cell's
// vertices from its address, checks the claimed shared vertices and slots
// geometrically, and accepts iff the holonomy is nonzero mod k.
bool verify_obstruction(const FractalSystem& sys, const GlpObstruction& obstruction);

// Apply rotation index r (1..k) of level M, resp. its inverse.
Vec2 apply_rotation(const FractalSystem& sys, int M, int r, const Vec2& p);
Vec2 apply_rotation_inverse(const FractalSystem& sys, int M, int r, const Vec2& p);

// Label (0..k-1) of a lattice vertex; throws OutsideEnvelope if unknown.
int label_of(const Labelling& lab, const Vec2& v);

// Rotation index of the cell with the given address; throws UnlabelledCell.
int rotation_of(const FractalSystem& sys, const Labelling& lab, const CellAddress& a);

}  // namespace nh
