#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nestedheat/errors.hpp"
#include "nestedheat/rng.hpp"
#include "nestedheat/vec2.hpp"

namespace nh {

// Default ceiling on the number of cells any enumeration may touch.
inline constexpr std::int64_t kDefaultCellCap = 10'000'000;

// Relative quantization factor for vertex identification: two level-m lattice
// points are identified iff they agree to within kVertexQuant * L^m * diam,
// far below the minimal lattice separation.
inline constexpr double kVertexQuant = 1e-6;

// Relative tolerance for geometric predicates (membership, shared vertices).
inline constexpr double kGeomTol = 1e-9;

// One similitude x -> (1/L) U x + nu of the iterated function system.
struct Similitude {
    double scale_factor = 0.5;  // 1/L
    Mat2 isometry;              // U, orthogonal
    Vec2 nu;                    // translation

    Vec2 apply(const Vec2& x) const { return scale_factor * isometry.apply(x) + nu; }
};

// Hausdorff, walk, spectral and chemical dimensions of a system.  d_f and d_s
// are computed; d_w and d_J are configuration inputs.
struct DimensionSet {
    double d_f = 0;
    double d_w = 0;
    double d_s = 0;
    double d_J = 0;
};

// Parsed content of a system description file.
struct SystemSpec {
    double L = 0;
    double angle = 0;          // isometry rotation angle (radians)
    bool reflect = false;      // compose with reflection across the x-axis
    std::vector<Vec2> nu;      // translations, nu[0] must be (0,0)
    double d_w = 0;
    double d_J = 0;
    bool osc_trusted = false;  // open set condition taken on trust from config
};

SystemSpec load_system_spec(const std::string& path);
SystemSpec parse_system_spec(const std::string& json_text);

// Address of a level-M complex inside the envelope K^<J>: the word lists the
// translation digits (i_{M+1}, ..., i_J), one-based, leftmost digit at the
// finest scale L^{M+1}.  An empty word addresses K^<M> itself.
struct CellAddress {
    int level = 0;                   // M
    int envelope = 0;                // J >= level
    std::vector<std::uint8_t> word;  // size J - M, digits in 1..N
};

// A level-M complex: the base complex scaled by L^M and translated.
struct MComplex {
    CellAddress address;
    Vec2 translation;
    std::vector<Vec2> vertices;  // k scaled essential fixed points + translation
};

// Deduplicating store for lattice vertices at one level.  Keys are coordinates
// quantized at kVertexQuant * L^level * diam; nearby keys are probed so float
// jitter across different cell sums cannot split a vertex in two.  Insertion
// order defines the (deterministic) vertex indices.
class VertexTable {
  public:
    VertexTable() = default;
    explicit VertexTable(double quantum) : q_(quantum) {}

    int insert(const Vec2& p);       // index of p, adding it if new
    int find(const Vec2& p) const;   // index of p, or -1
    const std::vector<Vec2>& points() const { return pts_; }
    std::size_t size() const { return pts_.size(); }
    double quantum() const { return q_; }

  private:
    struct KeyHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
            return std::hash<std::int64_t>()(k.first * 0x9e3779b97f4a7c15LL ^ k.second);
        }
    };
    double q_ = 1.0;
    std::vector<Vec2> pts_;
    std::unordered_map<std::pair<std::int64_t, std::int64_t>, int, KeyHash> map_;
};

// Vertex lattice of all m-cells in K^<J>, with per-vertex incidence counts.
struct VertexLattice {
    int level = 0;     // m
    int envelope = 0;  // J
    VertexTable table;
    std::vector<int> rank;  // number of incident m-cells, per vertex index
};

// A validated simple nested fractal system.
class FractalSystem {
  public:
    static FractalSystem build(const SystemSpec& spec);

    int N() const { return static_cast<int>(sims_.size()); }
    int k() const { return static_cast<int>(v0_.size()); }
    double L() const { return L_; }
    const std::vector<Similitude>& similitudes() const { return sims_; }
    const std::vector<Vec2>& fixed_points() const { return fixed_; }

    // Essential fixed points V_0^<0> in counterclockwise order starting from
    // the lexicographically smallest; position p carries label a_{p+1}.
    const std::vector<Vec2>& essential_fixed_points() const { return v0_; }

    const DimensionSet& dims() const { return dims_; }
    Vec2 barycenter() const { return bary_; }
    double diam0() const { return diam0_; }
    double pow_L(int e) const;

    // Convex polygon containing the fractal (hull of the fixed points),
    // counterclockwise.  Invariant under every similitude; used for pruning.
    const std::vector<Vec2>& hull() const { return hull_; }

    // Signed distance proxy: Euclidean distance from x to the hull of the
    // level-M base complex translated by tau (0 inside).
    double hull_distance(const Vec2& x, int M, const Vec2& tau) const;

    // True iff x lies within tol of the fractal set K^<M> + tau.
    bool on_fractal(const Vec2& x, int M, const Vec2& tau = Vec2(), double tol = -1) const;

    bool osc_trusted() const { return osc_trusted_; }

  private:
    FractalSystem() = default;
    double L_ = 0;
    std::vector<Similitude> sims_;
    std::vector<Vec2> fixed_;
    std::vector<Vec2> v0_;
    DimensionSet dims_;
    Vec2 bary_;
    double diam0_ = 0;
    std::vector<Vec2> hull_;
    bool osc_trusted_ = false;
};

// x* = (I - U/L)^{-1} nu, the unique fixed point of a similitude.
Vec2 fixed_point(const Similitude& s, double L);

// Translation Sum_{j} L^{M+1+t} nu_{word[t]} of an address.
Vec2 address_translation(const FractalSystem& sys, const CellAddress& a);

// Materialize the complex (translation and vertex list) for an address.
MComplex cell_from_address(const FractalSystem& sys, const CellAddress& a);

// All N^{J-M} level-M cells in K^<J>, lexicographic by word.
std::vector<CellAddress> enumerate_cells(const FractalSystem& sys, int M, int J,
                                         std::int64_t cap = kDefaultCellCap);

// Streaming variant of enumerate_cells: invokes fn(address, translation) in
// lexicographic order without materializing the list.
void visit_cells(const FractalSystem& sys, int M, int J,
                 const std::function<void(const CellAddress&, const Vec2&)>& fn,
                 std::int64_t cap = kDefaultCellCap);

// Lexicographic rank of an address among enumerate_cells(level, envelope).
std::int64_t address_rank(const FractalSystem& sys, const CellAddress& a);

// Recover the unique address with the given translation (greedy digit
// extraction from the top scale, with backtracking at contact points).
CellAddress address_from_translation(const FractalSystem& sys, const Vec2& tau, int M, int J);

// All level-M cells within K^<J> containing x; singleton unless x is a
// lattice vertex, in which case the count equals the rank of x.
std::vector<CellAddress> containing_cells(const FractalSystem& sys, const Vec2& x, int M, int J);

// Deduplicated vertex set of all m-cells in K^<J> with incidence ranks.
VertexLattice vertex_lattice(const FractalSystem& sys, int m, int J,
                             std::int64_t cap = kDefaultCellCap);

// Absolute geometric tolerance at level M (kGeomTol, scaled by cell size).
inline double geom_tol(const FractalSystem& sys, int M) {
    return kGeomTol * sys.pow_L(M) * sys.diam0();
}

// A point guaranteed to lie on the fractal and never on any lattice vertex:
// the periodic-address point of the (2,1)-cycle, pushed down `depth` random
// digits below level M.  Deterministic given the rng state.
Vec2 sample_point(const FractalSystem& sys, int M, int depth, Rng& rng);

// The fixed on-fractal anchor used by sample_point (depth 0, base cell).
Vec2 anchor_point(const FractalSystem& sys, int M);

}  // namespace nh
