#include "nestedheat/folding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nh {
namespace {

// Shell index of a cell address: 0 for the base complex itself, otherwise the
// smallest m with cell inside K^<level+m>.  Word digits are finest-first, so
// digit t acts at scale level+1+t.
int shell_of(const CellAddress& a) {
    int s = 0;
    for (std::size_t t = 0; t < a.word.size(); ++t)
        if (a.word[t] != 1) s = static_cast<int>(t) + 1;
    return s;
}

// Vertices of the base complex K^<M>.
std::vector<Vec2> base_corners(const FractalSystem& sys, int M) {
    std::vector<Vec2> out;
    const double s = sys.pow_L(M);
    for (const Vec2& v : sys.essential_fixed_points()) out.push_back(s * v);
    return out;
}

}  // namespace

Vec2 project(const FractalSystem& sys, const Labelling& lab, const Vec2& x, int M) {
    if (M != lab.level) fail(Errc::UnlabelledCell, "labelling is for a different level");
    const auto cells = containing_cells(sys, x, M, lab.envelope);
    const double tol = geom_tol(sys, M);
    bool have = false;
    Vec2 image;
    for (const CellAddress& a : cells) {
        const int r = rotation_of(sys, lab, a);
        const Vec2 candidate = apply_rotation(sys, M, r, x - address_translation(sys, a));
        if (!have) {
            image = candidate;
            have = true;
        } else if (dist(image, candidate) > tol) {
            fail(Errc::NoGLP, "projection is ambiguous at a shared vertex");
        }
    }
    return image;
}

int rank_of(const FractalSystem& sys, const Vec2& y, int M, int J) {
    return static_cast<int>(containing_cells(sys, y, M, J).size());
}

FiberDecomposition fiber(const FractalSystem& sys, const Labelling& lab, const Vec2& y,
                         int M, int m_max, std::int64_t cap) {
    if (M != lab.level) fail(Errc::UnlabelledCell, "labelling is for a different level");
    if (m_max < 0) fail(Errc::BadAddress, "fiber needs m_max >= 0");
    containing_cells(sys, y, M, M);  // y must lie in the base complex
    const auto corners = base_corners(sys, M);
    const double tol = geom_tol(sys, M);
    for (const Vec2& z : corners)
        if (dist(y, z) <= tol)
            fail(Errc::VertexBase,
                 "fiber base point is a vertex of the base complex; preimages would coincide");

    FiberDecomposition out;
    out.base = y;
    out.level = M;
    out.m_max = m_max;
    out.A.assign(static_cast<std::size_t>(m_max) + 1, {});
    visit_cells(
        sys, M, M + m_max + 1,
        [&](const CellAddress& a, const Vec2& tau) {
            const int s = shell_of(a);
            if (s == 0) return;  // the base cell contributes y itself
            const int r = rotation_of(sys, lab, a);
            const Vec2 x = apply_rotation_inverse(sys, M, r, y) + tau;
            out.A[static_cast<std::size_t>(s) - 1].push_back(x);
            if (s != 1) return;
            // First shell: split by how the host cell meets the base complex.
            int shared = 0;
            Vec2 contact;
            for (const Vec2& v : cell_from_address(sys, a).vertices) {
                for (const Vec2& z : corners) {
                    if (dist(v, z) <= tol) {
                        ++shared;
                        contact = z;
                    }
                }
            }
            if (shared == 0) {
                out.B.push_back(x);
            } else if (shared == 1) {
                out.C.push_back({x, contact});
            } else {
                fail(Errc::NotNested, "two cells of the same level share more than one vertex");
            }
        },
        cap);
    return out;
}

std::vector<BoundaryContact> boundary_set(const FractalSystem& sys, int M, int J) {
    if (J == INT_MIN) J = M + 2;
    if (J < M + 2) fail(Errc::BadAddress, "boundary probe envelope must be at least level+2");
    const auto corners = base_corners(sys, M);
    const double tol = geom_tol(sys, M);
    std::vector<BoundaryContact> out;
    std::vector<bool> seen(corners.size(), false);
    visit_cells(sys, M, J, [&](const CellAddress& a, const Vec2&) {
        if (shell_of(a) == 0) return;
        int shared = 0;
        std::size_t which = 0;
        for (const Vec2& v : cell_from_address(sys, a).vertices) {
            for (std::size_t i = 0; i < corners.size(); ++i) {
                if (dist(v, corners[i]) <= tol) {
                    ++shared;
                    which = i;
                }
            }
        }
        if (shared > 1)
            fail(Errc::NotNested, "two cells of the same level share more than one vertex");
        if (shared == 1 && !seen[which]) {
            seen[which] = true;
            out.push_back({corners[which], a});
        }
    });
    // Deterministic order: by position in the canonical corner order.
    std::sort(out.begin(), out.end(), [&](const BoundaryContact& a, const BoundaryContact& b) {
        const auto idx = [&](const Vec2& z) {
            for (std::size_t i = 0; i < corners.size(); ++i)
                if (dist(z, corners[i]) <= tol) return i;
            return corners.size();
        };
        return idx(a.z) < idx(b.z);
    });
    return out;
}

double delta(const FractalSystem& sys, const Vec2& x, const Vec2& y, int M, int J) {
    const auto vstar = boundary_set(sys, M, J);
    if (vstar.empty())
        fail(Errc::EmptyBoundary, "no single-contact boundary vertices at this level");
    double best = std::numeric_limits<double>::infinity();
    for (const BoundaryContact& b : vstar) best = std::min(best, dist(x, b.z) + dist(b.z, y));
    return best;
}

bool is_lattice_vertex(const FractalSystem& sys, const Vec2& y, int M, int J) {
    std::vector<CellAddress> cells;
    try {
        cells = containing_cells(sys, y, M, J);
    } catch (const Error& e) {
        if (e.code() == Errc::NotOnFractal) return false;
        throw;
    }
    const double tol = geom_tol(sys, M);
    for (const CellAddress& a : cells)
        for (const Vec2& v : cell_from_address(sys, a).vertices)
            if (dist(y, v) <= tol) return true;
    return false;
}

}  // namespace nh
