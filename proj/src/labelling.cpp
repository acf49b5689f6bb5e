#include "nestedheat/labelling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

namespace nh {
namespace {

// Materialize the address with the given lexicographic rank.
CellAddress address_of_rank(const FractalSystem& sys, int M, int J, std::int64_t rank) {
    CellAddress a;
    a.level = M;
    a.envelope = J;
    a.word.assign(static_cast<std::size_t>(J - M), 1);
    for (int t = J - M - 1; t >= 0; --t) {
        a.word[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(rank % sys.N() + 1);
        rank /= sys.N();
    }
    return a;
}

}  // namespace

Vec2 apply_rotation(const FractalSystem& sys, int M, int r, const Vec2& p) {
    const int k = sys.k();
    if (((r % k) + k) % k == 0) return p;
    const Vec2 center = sys.pow_L(M) * sys.barycenter();
    return rotate_about(p, center, 2.0 * std::numbers::pi * r / k);
}

Vec2 apply_rotation_inverse(const FractalSystem& sys, int M, int r, const Vec2& p) {
    return apply_rotation(sys, M, -r, p);
}

int GlpObstruction::holonomy() const {
    int h = 0;
    for (const Link& l : links) h += l.slot_here - l.slot_next;
    return h;
}

Labelling construct_labelling(const FractalSystem& sys, int M, int J, std::int64_t cap,
                              BfsOrder order) {
    const int k = sys.k();
    Labelling lab;
    lab.level = M;
    lab.envelope = J;
    lab.verts = VertexTable(kVertexQuant * sys.pow_L(M) * sys.diam0());

    // Cell/vertex incidence for the whole envelope.
    const double s = sys.pow_L(M);
    const auto& v0 = sys.essential_fixed_points();
    std::vector<int> cell_vid;
    std::vector<std::vector<std::pair<int, int>>> incident;  // vertex -> (cell, slot)
    std::int64_t n_cells = 0;
    visit_cells(
        sys, M, J,
        [&](const CellAddress&, const Vec2& tau) {
            const int c = static_cast<int>(n_cells++);
            for (int p = 0; p < k; ++p) {
                const int vid = lab.verts.insert(s * v0[static_cast<std::size_t>(p)] + tau);
                cell_vid.push_back(vid);
                if (vid == static_cast<int>(incident.size())) incident.emplace_back();
                incident[static_cast<std::size_t>(vid)].emplace_back(c, p);
            }
        },
        cap);
    const auto C = static_cast<int>(n_cells);
    const auto vid_at = [&](int c, int p) {
        return cell_vid[static_cast<std::size_t>(c) * static_cast<std::size_t>(k) +
                        static_cast<std::size_t>(p)];
    };

    lab.cell_rotation.assign(static_cast<std::size_t>(C), 0);  // 0 = unassigned
    lab.label.assign(lab.verts.size(), -1);
    std::vector<std::pair<int, int>> source(lab.verts.size(), {-1, -1});  // labelling cell, slot
    struct TreeEdge {
        int parent = -1;
        int vertex = -1;      // shared vertex id
        int slot_parent = 0;  // slot of vertex in parent
        int slot_child = 0;   // slot of vertex in child
    };
    std::vector<TreeEdge> tree(static_cast<std::size_t>(C));

    const auto make_obstruction = [&](int cell, int v1, int v2) {
        // Two labelled vertices of `cell` force different rotations; the
        // constraint chain through their labelling cells and the tree closes
        // into a cycle with nonzero holonomy.
        GlpObstruction ob;
        ob.level = M;
        ob.envelope = J;
        const auto path_to_root = [&](int c) {
            std::vector<int> path{c};
            while (tree[static_cast<std::size_t>(path.back())].parent >= 0)
                path.push_back(tree[static_cast<std::size_t>(path.back())].parent);
            return path;
        };
        const int a = source[static_cast<std::size_t>(v1)].first;
        const int b = source[static_cast<std::size_t>(v2)].first;
        std::vector<int> pa = path_to_root(a), pb = path_to_root(b);
        // Both paths end at the root; trim the common tail so that each ends
        // at the lowest common ancestor, then drop it from pb so it appears
        // exactly once in the cycle.
        while (pa.size() > 1 && pb.size() > 1 && pa[pa.size() - 2] == pb[pb.size() - 2]) {
            pa.pop_back();
            pb.pop_back();
        }
        pb.pop_back();
        // Cycle cells: cell -> a -> ... -> LCA -> ... -> b -> cell.
        std::vector<int> cycle{cell};
        cycle.insert(cycle.end(), pa.begin(), pa.end());
        cycle.insert(cycle.end(), pb.rbegin(), pb.rend());
        const auto slot_of_vertex = [&](int c, int vid) {
            for (int p = 0; p < k; ++p)
                if (vid_at(c, p) == vid) return p;
            return -1;
        };
        const auto vertex_pos = [&](int vid) { return lab.verts.points()[static_cast<std::size_t>(vid)]; };
        for (std::size_t i = 0; i < cycle.size(); ++i) {
            const int ci = cycle[i];
            const int cn = cycle[(i + 1) % cycle.size()];
            GlpObstruction::Link link;
            link.cell = address_of_rank(sys, M, J, ci);
            int vid;
            if (i == 0) {
                vid = v1;  // cell -> a, through the first conflicting vertex
            } else if (i + 1 == cycle.size()) {
                vid = v2;  // b -> cell, through the second
            } else {
                // Tree edge between ci and cn (one is the other's parent).
                const TreeEdge& e = tree[static_cast<std::size_t>(
                    tree[static_cast<std::size_t>(ci)].parent == cn ? ci : cn)];
                vid = e.vertex;
            }
            link.vertex = vertex_pos(vid);
            link.slot_here = slot_of_vertex(ci, vid);
            link.slot_next = slot_of_vertex(cn, vid);
            ob.links.push_back(link);
        }
        return ob;
    };

    // Seed: the base cell (word 1...1, rank 0) gets the identity rotation, so
    // its labels read counterclockwise from the lexicographically smallest
    // vertex, which is position 0 of the canonical vertex order.
    lab.cell_rotation[0] = k;
    for (int p = 0; p < k; ++p) {
        lab.label[static_cast<std::size_t>(vid_at(0, p))] = p;
        source[static_cast<std::size_t>(vid_at(0, p))] = {0, p};
    }
    std::deque<int> queue{0};
    std::int64_t assigned = 1;
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        for (int pp = 0; pp < k; ++pp) {
            const int p = order == BfsOrder::forward ? pp : k - 1 - pp;
            const int vid = vid_at(c, p);
            const auto& inc = incident[static_cast<std::size_t>(vid)];
            for (std::size_t qq = 0; qq < inc.size(); ++qq) {
                const int c2 = inc[order == BfsOrder::forward ? qq : inc.size() - 1 - qq].first;
                if (lab.cell_rotation[static_cast<std::size_t>(c2)] != 0) continue;
                // Solve for the unique rotation consistent with every
                // already-labelled vertex of c2.
                int forced = -1, forced_vid = -1;
                for (int p2 = 0; p2 < k; ++p2) {
                    const int v2 = vid_at(c2, p2);
                    const int l2 = lab.label[static_cast<std::size_t>(v2)];
                    if (l2 < 0) continue;
                    const int need = ((l2 - p2) % k + k) % k;  // rotation mod k
                    if (forced < 0) {
                        forced = need;
                        forced_vid = v2;
                    } else if (need != forced) {
                        GlpObstruction ob = make_obstruction(c2, forced_vid, v2);
                        std::ostringstream os;
                        os << "no rotation fits cell " << address_rank(sys, ob.links[0].cell)
                           << " at level " << M << " within envelope " << J
                           << " (cycle holonomy " << ((ob.holonomy() % k) + k) % k << " mod " << k
                           << ")";
                        throw NoGlpError(os.str(), std::move(ob));
                    }
                }
                lab.cell_rotation[static_cast<std::size_t>(c2)] = forced == 0 ? k : forced;
                tree[static_cast<std::size_t>(c2)] = TreeEdge{
                    c, vid, p,
                    [&] {
                        for (int p2 = 0; p2 < k; ++p2)
                            if (vid_at(c2, p2) == vid) return p2;
                        return -1;
                    }()};
                for (int p2 = 0; p2 < k; ++p2) {
                    const int v2 = vid_at(c2, p2);
                    if (lab.label[static_cast<std::size_t>(v2)] < 0) {
                        lab.label[static_cast<std::size_t>(v2)] = (p2 + forced) % k;
                        source[static_cast<std::size_t>(v2)] = {c2, p2};
                    }
                }
                ++assigned;
                queue.push_back(c2);
            }
        }
    }
    if (assigned != C)
        fail(Errc::NotConnected, "cell graph is disconnected; labelling cannot propagate");
    return lab;
}

GlpReport verify_glp(const FractalSystem& sys, const Labelling& lab) {
    GlpReport report;
    const int k = sys.k();
    const double s = sys.pow_L(lab.level);
    const double tol = geom_tol(sys, lab.level);
    const auto& v0 = sys.essential_fixed_points();
    std::int64_t rank = 0;
    visit_cells(sys, lab.level, lab.envelope, [&](const CellAddress& a, const Vec2& tau) {
        const int r = lab.cell_rotation[static_cast<std::size_t>(rank++)];
        bool ok = r >= 1 && r <= k;
        std::vector<bool> seen(static_cast<std::size_t>(k), false);
        for (int p = 0; ok && p < k; ++p) {
            const Vec2 v = s * v0[static_cast<std::size_t>(p)] + tau;
            const int vid = lab.verts.find(v);
            if (vid < 0) {
                ok = false;
                break;
            }
            const int l = lab.label[static_cast<std::size_t>(vid)];
            if (l < 0 || l >= k || seen[static_cast<std::size_t>(l)]) {
                ok = false;  // not a bijection onto the alphabet
                break;
            }
            seen[static_cast<std::size_t>(l)] = true;
            // Rotation condition, checked geometrically: the label of v must
            // equal the label at R_Delta(v - tau) in the base cell.
            const Vec2 w = apply_rotation(sys, lab.level, r, v - tau);
            const int wid = lab.verts.find(w);
            if (wid < 0 || lab.label[static_cast<std::size_t>(wid)] != l) ok = false;
            // The rotated image must itself be a base-cell vertex.
            bool on_base = false;
            for (const Vec2& b : v0) on_base = on_base || dist(w, s * b) <= tol;
            if (!on_base) ok = false;
        }
        if (!ok) {
            report.ok = false;
            report.violations.push_back(a);
        }
    });
    return report;
}

bool verify_obstruction(const FractalSystem& sys, const GlpObstruction& ob) {
    const int k = sys.k();
    if (ob.links.size() < 2) return false;
    const double tol = geom_tol(sys, ob.level);
    for (std::size_t i = 0; i < ob.links.size(); ++i) {
        const auto& link = ob.links[i];
        const auto& next = ob.links[(i + 1) % ob.links.size()];
        if (link.slot_here < 0 || link.slot_here >= k) return false;
        if (link.slot_next < 0 || link.slot_next >= k) return false;
        const MComplex here = cell_from_address(sys, link.cell);
        const MComplex after = cell_from_address(sys, next.cell);
        // The claimed vertex must sit at the claimed slot of both cells.
        if (dist(here.vertices[static_cast<std::size_t>(link.slot_here)], link.vertex) > tol)
            return false;
        if (dist(after.vertices[static_cast<std::size_t>(link.slot_next)], link.vertex) > tol)
            return false;
        // Consecutive cells must be distinct.
        if (dist(here.translation, after.translation) <= tol) return false;
    }
    return ((ob.holonomy() % k) + k) % k != 0;
}

int label_of(const Labelling& lab, const Vec2& v) {
    const int vid = lab.verts.find(v);
    if (vid < 0) fail(Errc::OutsideEnvelope, "vertex is not in the labelled lattice");
    return lab.label[static_cast<std::size_t>(vid)];
}

int rotation_of(const FractalSystem& sys, const Labelling& lab, const CellAddress& a) {
    if (a.level != lab.level) fail(Errc::UnlabelledCell, "labelling is for a different level");
    CellAddress norm = a;
    if (a.envelope > lab.envelope) {
        // Only valid if the extra top digits are 1 (same translation).
        const int extra = a.envelope - lab.envelope;
        for (int t = 0; t < extra; ++t) {
            if (norm.word[norm.word.size() - 1 - static_cast<std::size_t>(t)] != 1)
                fail(Errc::UnlabelledCell, "cell lies outside the labelled envelope");
        }
        norm.word.resize(norm.word.size() - static_cast<std::size_t>(extra));
        norm.envelope = lab.envelope;
    } else if (a.envelope < lab.envelope) {
        norm.word.resize(norm.word.size() + static_cast<std::size_t>(lab.envelope - a.envelope), 1);
        norm.envelope = lab.envelope;
    }
    const std::int64_t rank = address_rank(sys, norm);
    if (rank < 0 || rank >= static_cast<std::int64_t>(lab.cell_rotation.size()))
        fail(Errc::UnlabelledCell, "cell rank outside the labelled envelope");
    return lab.cell_rotation[static_cast<std::size_t>(rank)];
}

}  // namespace nh
