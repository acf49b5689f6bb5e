#include "nestedheat/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nh {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Small planar helpers (convex hulls, polygon distance, clipping).

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone-chain convex hull, counterclockwise, no duplicate endpoint.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const int n = static_cast<int>(pts.size());
    if (n < 3) return pts;
    std::vector<Vec2> h(2 * n);
    int m = 0;
    for (int i = 0; i < n; ++i) {
        while (m >= 2 && cross(h[m - 2], h[m - 1], pts[i]) <= 0) --m;
        h[m++] = pts[i];
    }
    const int lower = m + 1;
    for (int i = n - 2; i >= 0; --i) {
        while (m >= lower && cross(h[m - 2], h[m - 1], pts[i]) <= 0) --m;
        h[m++] = pts[i];
    }
    h.resize(m - 1);
    return h;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.norm2();
    if (len2 == 0) return dist(p, a);
    double s = ((p - a).x * ab.x + (p - a).y * ab.y) / len2;
    s = std::clamp(s, 0.0, 1.0);
    return dist(p, a + s * ab);
}

// Distance from p to a counterclockwise convex polygon (0 inside).
double polygon_distance(const Vec2& p, const std::vector<Vec2>& poly) {
    const std::size_t n = poly.size();
    if (n == 0) return std::numeric_limits<double>::infinity();
    if (n == 1) return dist(p, poly[0]);
    bool inside = n >= 3;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if (cross(a, b, p) < 0) inside = false;
        best = std::min(best, segment_distance(p, a, b));
    }
    return inside ? 0.0 : best;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(a);
}

// Sutherland-Hodgman clip of a convex subject against a convex CCW clipper.
std::vector<Vec2> convex_clip(std::vector<Vec2> subject, const std::vector<Vec2>& clipper) {
    for (std::size_t i = 0; i < clipper.size() && !subject.empty(); ++i) {
        const Vec2& a = clipper[i];
        const Vec2& b = clipper[(i + 1) % clipper.size()];
        std::vector<Vec2> out;
        for (std::size_t j = 0; j < subject.size(); ++j) {
            const Vec2& p = subject[j];
            const Vec2& q = subject[(j + 1) % subject.size()];
            const double cp = cross(a, b, p);
            const double cq = cross(a, b, q);
            if (cp >= 0) out.push_back(p);
            if ((cp > 0 && cq < 0) || (cp < 0 && cq > 0)) {
                const double s = cp / (cp - cq);
                out.push_back(p + s * (q - p));
            }
        }
        subject = std::move(out);
    }
    return subject;
}

Vec2 reflect_across_bisector(const Vec2& p, const Vec2& x, const Vec2& y) {
    const Vec2 d = y - x;
    const double len = d.norm();
    const Vec2 n{d.x / len, d.y / len};
    const Vec2 m = 0.5 * (x + y);
    const double proj = (p - m).x * n.x + (p - m).y * n.y;
    return p - 2.0 * proj * n;
}

std::int64_t checked_cell_count(int N, int M, int J, std::int64_t cap) {
    if (J < M) fail(Errc::BadAddress, "envelope must be at least the level");
    std::int64_t count = 1;
    for (int i = 0; i < J - M; ++i) {
        if (count > cap / N) {
            std::ostringstream os;
            os << "N^(J-M) = " << N << "^" << (J - M) << " exceeds the cell cap " << cap;
            fail(Errc::EnvelopeTooLarge, os.str());
        }
        count *= N;
    }
    if (count > cap) fail(Errc::EnvelopeTooLarge, "cell count exceeds the cap");
    return count;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec file handling

SystemSpec parse_system_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(Errc::BadSpec, std::string("system description is not valid JSON: ") + e.what());
    }
    SystemSpec spec;
    try {
        spec.L = j.at("L").get<double>();
        if (j.contains("isometry")) {
            const auto& iso = j.at("isometry");
            spec.angle = iso.value("angle", 0.0);
            spec.reflect = iso.value("reflect", false);
        }
        for (const auto& row : j.at("nu")) {
            if (!row.is_array() || row.size() != 2)
                fail(Errc::BadSpec, "every nu entry must be a two-element array");
            spec.nu.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
        spec.d_w = j.at("d_w").get<double>();
        spec.d_J = j.at("d_J").get<double>();
        spec.osc_trusted = j.value("osc_trusted", false);
    } catch (const json::exception& e) {
        fail(Errc::BadSpec, std::string("system description is missing a field: ") + e.what());
    }
    return spec;
}

SystemSpec load_system_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::BadSpec, "cannot open system description file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_system_spec(buf.str());
}

// ---------------------------------------------------------------------------
// VertexTable

int VertexTable::insert(const Vec2& p) {
    const auto qx = static_cast<std::int64_t>(std::llround(p.x / q_));
    const auto qy = static_cast<std::int64_t>(std::llround(p.y / q_));
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            const auto it = map_.find({qx + dx, qy + dy});
            if (it != map_.end()) {
                const Vec2& e = pts_[static_cast<std::size_t>(it->second)];
                if (std::abs(e.x - p.x) <= 0.25 * q_ && std::abs(e.y - p.y) <= 0.25 * q_)
                    return it->second;
            }
        }
    }
    const int idx = static_cast<int>(pts_.size());
    pts_.push_back(p);
    map_.emplace(std::make_pair(qx, qy), idx);
    return idx;
}

int VertexTable::find(const Vec2& p) const {
    const auto qx = static_cast<std::int64_t>(std::llround(p.x / q_));
    const auto qy = static_cast<std::int64_t>(std::llround(p.y / q_));
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            const auto it = map_.find({qx + dx, qy + dy});
            if (it != map_.end()) {
                const Vec2& e = pts_[static_cast<std::size_t>(it->second)];
                if (std::abs(e.x - p.x) <= 0.25 * q_ && std::abs(e.y - p.y) <= 0.25 * q_)
                    return it->second;
            }
        }
    }
    return -1;
}

// ---------------------------------------------------------------------------
// FractalSystem build & validation

Vec2 fixed_point(const Similitude& s, double L) {
    // Solve (I - U/L) x = nu.
    const Mat2& u = s.isometry;
    const double a = 1.0 - u.a / L, b = -u.b / L;
    const double c = -u.c / L, d = 1.0 - u.d / L;
    const double det = a * d - b * c;
    return {(d * s.nu.x - b * s.nu.y) / det, (-c * s.nu.x + a * s.nu.y) / det};
}

FractalSystem FractalSystem::build(const SystemSpec& spec) {
    FractalSystem sys;
    if (!(spec.L > 1.0)) fail(Errc::BadSpec, "scale L must exceed 1");
    if (spec.nu.empty()) fail(Errc::BadSpec, "at least one similitude is required");
    if (std::abs(spec.nu[0].x) > 1e-12 || std::abs(spec.nu[0].y) > 1e-12)
        fail(Errc::BadSpec, "the first translation nu_1 must be the origin");
    if (!(spec.d_w > 0)) fail(Errc::BadSpec, "walk dimension d_w must be positive");
    if (!(spec.d_J > 1)) fail(Errc::BadSpec, "chemical exponent d_J must exceed 1");

    sys.L_ = spec.L;
    sys.osc_trusted_ = spec.osc_trusted;
    Mat2 U = Mat2::rotation(spec.angle);
    if (spec.reflect) U = U.mul(Mat2::reflection_x());
    if (std::abs(std::abs(U.det()) - 1.0) > 1e-12)
        fail(Errc::BadSpec, "isometry part is not orthogonal");
    for (const Vec2& nu : spec.nu) {
        if (!std::isfinite(nu.x) || !std::isfinite(nu.y))
            fail(Errc::BadSpec, "translations must be finite");
        sys.sims_.push_back(Similitude{1.0 / spec.L, U, nu});
    }
    const int N = sys.N();

    for (const Similitude& s : sys.sims_) sys.fixed_.push_back(fixed_point(s, spec.L));

    // Scale for absolute tolerances during validation.
    double spread = 1.0;
    for (const Vec2& p : sys.fixed_)
        for (const Vec2& q : sys.fixed_) spread = std::max(spread, dist(p, q));
    const double tol = 1e-9 * spread;

    // Essential fixed points: x such that two distinct similitudes map x and
    // some fixed point y to the same image.
    std::vector<Vec2> essential;
    for (const Vec2& x : sys.fixed_) {
        bool is_essential = false;
        for (int i = 0; i < N && !is_essential; ++i) {
            for (int j = 0; j < N && !is_essential; ++j) {
                if (i == j) continue;
                const Vec2 xi = sys.sims_[static_cast<std::size_t>(i)].apply(x);
                for (const Vec2& y : sys.fixed_) {
                    if (dist(xi, sys.sims_[static_cast<std::size_t>(j)].apply(y)) <= tol) {
                        is_essential = true;
                        break;
                    }
                }
            }
        }
        if (is_essential) {
            bool dup = false;
            for (const Vec2& e : essential) dup = dup || dist(e, x) <= tol;
            if (!dup) essential.push_back(x);
        }
    }
    if (essential.size() < 2)
        fail(Errc::TooFewEssential, "fewer than two essential fixed points");

    // Canonical order: counterclockwise around the barycenter, starting from
    // the lexicographically smallest vertex.
    Vec2 bary{0, 0};
    for (const Vec2& v : essential) bary += v;
    bary = (1.0 / static_cast<double>(essential.size())) * bary;
    std::size_t lex = 0;
    for (std::size_t i = 1; i < essential.size(); ++i) {
        const Vec2& a = essential[i];
        const Vec2& b = essential[lex];
        if (a.x < b.x - tol || (std::abs(a.x - b.x) <= tol && a.y < b.y)) lex = i;
    }
    const double theta0 = std::atan2(essential[lex].y - bary.y, essential[lex].x - bary.x);
    std::sort(essential.begin(), essential.end(), [&](const Vec2& a, const Vec2& b) {
        auto key = [&](const Vec2& v) {
            double th = std::atan2(v.y - bary.y, v.x - bary.x) - theta0;
            while (th < -1e-12) th += 2 * std::numbers::pi;
            return th;
        };
        return key(a) < key(b);
    });
    sys.v0_ = essential;
    sys.bary_ = bary;
    const int k = sys.k();

    // Regular polygon check: equal circumradii and equal angular gaps.
    const double r0 = dist(sys.v0_[0], bary);
    for (const Vec2& v : sys.v0_) {
        if (std::abs(dist(v, bary) - r0) > 1e-6 * spread)
            fail(Errc::BadSpec, "essential fixed points are not equidistant from the barycenter");
    }
    if (k >= 3) {
        for (int i = 0; i < k; ++i) {
            const Vec2& a = sys.v0_[static_cast<std::size_t>(i)];
            const Vec2& b = sys.v0_[static_cast<std::size_t>((i + 1) % k)];
            const double gap = dist(a, b);
            const double expect = 2.0 * r0 * std::sin(std::numbers::pi / k);
            if (std::abs(gap - expect) > 1e-6 * spread)
                fail(Errc::BadSpec, "essential fixed points do not form a regular polygon");
        }
    }

    // Invariant convex hull of the fixed points: every similitude must map
    // fixed points inside it, which makes it contain the whole fractal.
    sys.hull_ = convex_hull(sys.fixed_);
    if (sys.hull_.size() < 3) fail(Errc::BadSpec, "fixed points are degenerate (collinear)");
    for (const Similitude& s : sys.sims_) {
        for (const Vec2& f : sys.fixed_) {
            if (polygon_distance(s.apply(f), sys.hull_) > tol)
                fail(Errc::BadSpec, "fixed-point hull is not invariant under the system");
        }
    }
    for (const Vec2& p : sys.hull_)
        for (const Vec2& q : sys.hull_) sys.diam0_ = std::max(sys.diam0_, dist(p, q));

    // If the common isometry is not the identity it must be a symmetry of the
    // fractal, or translation-only cell addresses would not tile.
    std::vector<Vec2> level_minus1;  // V_{-1}
    {
        VertexTable t(kVertexQuant * sys.diam0_ / spec.L);
        for (const Similitude& s : sys.sims_)
            for (const Vec2& v : sys.v0_) t.insert(s.apply(v));
        level_minus1 = t.points();
    }
    const bool identity_iso = std::abs(U.a - 1) < 1e-12 && std::abs(U.b) < 1e-12 &&
                              std::abs(U.c) < 1e-12 && std::abs(U.d - 1) < 1e-12;
    if (!identity_iso) {
        for (const Vec2& w : level_minus1) {
            const Vec2 img = U.apply(w);
            bool hit = false;
            for (const Vec2& w2 : level_minus1) hit = hit || dist(img, w2) <= tol;
            if (!hit) fail(Errc::BadSpec, "isometry part is not a symmetry of the fractal");
        }
    }

    // Nesting on level -1: child hulls may only meet in sets of zero area.
    const double child_area = polygon_area(sys.hull_) / (spec.L * spec.L);
    for (int i = 0; i < N; ++i) {
        for (int j = i + 1; j < N; ++j) {
            std::vector<Vec2> hi, hj;
            for (const Vec2& h : sys.hull_) {
                hi.push_back(sys.sims_[static_cast<std::size_t>(i)].apply(h));
                hj.push_back(sys.sims_[static_cast<std::size_t>(j)].apply(h));
            }
            const double overlap = polygon_area(convex_clip(hi, hj));
            if (overlap > 1e-9 * child_area) {
                std::ostringstream os;
                os << "level -1 cells " << (i + 1) << " and " << (j + 1)
                   << " overlap with area ratio " << overlap / child_area;
                fail(Errc::NotNested, os.str());
            }
        }
    }

    // Connectivity of the level -1 cell graph (edges = shared vertices).
    {
        std::vector<int> comp(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) comp[static_cast<std::size_t>(i)] = i;
        std::function<int(int)> find = [&](int a) {
            while (comp[static_cast<std::size_t>(a)] != a) {
                comp[static_cast<std::size_t>(a)] =
                    comp[static_cast<std::size_t>(comp[static_cast<std::size_t>(a)])];
                a = comp[static_cast<std::size_t>(a)];
            }
            return a;
        };
        for (int i = 0; i < N; ++i) {
            for (int j = i + 1; j < N; ++j) {
                bool touch = false;
                for (const Vec2& v : sys.v0_) {
                    for (const Vec2& w : sys.v0_) {
                        touch = touch || dist(sys.sims_[static_cast<std::size_t>(i)].apply(v),
                                              sys.sims_[static_cast<std::size_t>(j)].apply(w)) <= tol;
                    }
                }
                if (touch) comp[static_cast<std::size_t>(find(i))] = find(j);
            }
        }
        for (int i = 1; i < N; ++i) {
            if (find(i) != find(0))
                fail(Errc::NotConnected, "level -1 cell graph is disconnected");
        }
    }

    // Bisector symmetry: each reflection swapping a pair of essential fixed
    // points must permute the level -1 vertex set.
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const Vec2& x = sys.v0_[static_cast<std::size_t>(i)];
            const Vec2& y = sys.v0_[static_cast<std::size_t>(j)];
            for (const Vec2& w : level_minus1) {
                const Vec2 img = reflect_across_bisector(w, x, y);
                bool hit = false;
                for (const Vec2& w2 : level_minus1) hit = hit || dist(img, w2) <= tol;
                if (!hit) {
                    std::ostringstream os;
                    os << "bisector symmetry fails for the vertex pair (" << x.x << "," << x.y
                       << ")-(" << y.x << "," << y.y << ")";
                    fail(Errc::BadSpec, os.str());
                }
            }
        }
    }

    sys.dims_.d_f = std::log(static_cast<double>(N)) / std::log(spec.L);
    sys.dims_.d_w = spec.d_w;
    sys.dims_.d_s = 2.0 * sys.dims_.d_f / spec.d_w;
    sys.dims_.d_J = spec.d_J;
    return sys;
}

double FractalSystem::pow_L(int e) const {
    double r = 1.0;
    for (int i = 0; i < std::abs(e); ++i) r *= L_;
    return e >= 0 ? r : 1.0 / r;
}

double FractalSystem::hull_distance(const Vec2& x, int M, const Vec2& tau) const {
    const double s = pow_L(M);
    std::vector<Vec2> poly;
    poly.reserve(hull_.size());
    for (const Vec2& h : hull_) poly.push_back(s * h + tau);
    return polygon_distance(x, poly);
}

bool FractalSystem::on_fractal(const Vec2& x, int M, const Vec2& tau, double tol) const {
    if (tol < 0) tol = kGeomTol * pow_L(M) * diam0_;
    struct Frame {
        int level;
        Vec2 tau;
    };
    std::vector<Frame> stack{{M, tau}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        if (hull_distance(x, f.level, f.tau) > tol) continue;
        if (pow_L(f.level) * diam0_ <= tol) return true;
        const double s = pow_L(f.level);
        for (int i = N() - 1; i >= 0; --i)
            stack.push_back({f.level - 1, f.tau + s * sims_[static_cast<std::size_t>(i)].nu});
    }
    return false;
}

// ---------------------------------------------------------------------------
// Addresses and cells

Vec2 address_translation(const FractalSystem& sys, const CellAddress& a) {
    Vec2 tau{0, 0};
    for (std::size_t t = 0; t < a.word.size(); ++t) {
        const int digit = a.word[t];
        if (digit < 1 || digit > sys.N()) {
            std::ostringstream os;
            os << "address digit " << digit << " is outside 1.." << sys.N();
            fail(Errc::BadAddress, os.str());
        }
        tau += sys.pow_L(a.level + 1 + static_cast<int>(t)) *
               sys.similitudes()[static_cast<std::size_t>(digit - 1)].nu;
    }
    return tau;
}

MComplex cell_from_address(const FractalSystem& sys, const CellAddress& a) {
    if (a.envelope < a.level) fail(Errc::BadAddress, "envelope must be at least the level");
    if (static_cast<int>(a.word.size()) != a.envelope - a.level)
        fail(Errc::BadAddress, "word length must equal envelope minus level");
    MComplex cell;
    cell.address = a;
    cell.translation = address_translation(sys, a);
    const double s = sys.pow_L(a.level);
    for (const Vec2& v : sys.essential_fixed_points())
        cell.vertices.push_back(s * v + cell.translation);
    return cell;
}

void visit_cells(const FractalSystem& sys, int M, int J,
                 const std::function<void(const CellAddress&, const Vec2&)>& fn,
                 std::int64_t cap) {
    checked_cell_count(sys.N(), M, J, cap);
    const int len = J - M;
    CellAddress a;
    a.level = M;
    a.envelope = J;
    a.word.assign(static_cast<std::size_t>(len), 1);
    // Scale factors per digit position, reused for the translation sum.
    std::vector<double> scale(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) scale[static_cast<std::size_t>(t)] = sys.pow_L(M + 1 + t);
    while (true) {
        Vec2 tau{0, 0};
        for (int t = 0; t < len; ++t)
            tau += scale[static_cast<std::size_t>(t)] *
                   sys.similitudes()[static_cast<std::size_t>(a.word[static_cast<std::size_t>(t)] - 1)].nu;
        fn(a, tau);
        int t = len - 1;
        while (t >= 0 && a.word[static_cast<std::size_t>(t)] == sys.N()) {
            a.word[static_cast<std::size_t>(t)] = 1;
            --t;
        }
        if (t < 0) break;
        ++a.word[static_cast<std::size_t>(t)];
    }
}

std::vector<CellAddress> enumerate_cells(const FractalSystem& sys, int M, int J,
                                         std::int64_t cap) {
    const std::int64_t count = checked_cell_count(sys.N(), M, J, cap);
    std::vector<CellAddress> cells;
    cells.reserve(static_cast<std::size_t>(count));
    visit_cells(sys, M, J, [&](const CellAddress& a, const Vec2&) { cells.push_back(a); }, cap);
    return cells;
}

std::int64_t address_rank(const FractalSystem& sys, const CellAddress& a) {
    std::int64_t r = 0;
    for (const std::uint8_t d : a.word) r = r * sys.N() + (d - 1);
    return r;
}

CellAddress address_from_translation(const FractalSystem& sys, const Vec2& tau, int M, int J) {
    if (J < M) fail(Errc::BadAddress, "envelope must be at least the level");
    const int len = J - M;
    const double accept = kVertexQuant * sys.pow_L(M) * sys.diam0();
    CellAddress a;
    a.level = M;
    a.envelope = J;
    a.word.assign(static_cast<std::size_t>(len), 1);
    // Greedy extraction from the top scale; at contact points several digits
    // may look plausible, so backtrack on the residual test.
    std::function<bool(int, Vec2)> descend = [&](int pos, Vec2 rest) {
        if (pos == len) return rest.norm() <= accept;
        const int j = J - pos;  // digit exponent, top first
        const double s = sys.pow_L(j);
        for (int i = 1; i <= sys.N(); ++i) {
            const Vec2 next = rest - s * sys.similitudes()[static_cast<std::size_t>(i - 1)].nu;
            // The remaining sum must be the translation of an M-cell inside
            // K^<j-1>, and those all start at points of K^<j-1>.
            if (sys.hull_distance(next, j - 1, Vec2{0, 0}) > accept) continue;
            a.word[static_cast<std::size_t>(len - 1 - pos)] = static_cast<std::uint8_t>(i);
            if (descend(pos + 1, next)) return true;
        }
        return false;
    };
    if (!descend(0, tau)) fail(Errc::BadAddress, "translation does not address a cell");
    return a;
}

std::vector<CellAddress> containing_cells(const FractalSystem& sys, const Vec2& x, int M, int J) {
    if (J < M) fail(Errc::BadAddress, "envelope must be at least the level");
    const double tol = geom_tol(sys, M);
    if (!sys.on_fractal(x, J, Vec2{0, 0}, std::max(tol, geom_tol(sys, J)))) {
        std::ostringstream os;
        os << "point (" << x.x << "," << x.y << ") is not on the fractal envelope";
        fail(Errc::NotOnFractal, os.str());
    }
    struct Cand {
        Vec2 tau;
        std::vector<std::uint8_t> word;  // digits for exponents J, J-1, ...
    };
    std::vector<Cand> cands{{Vec2{0, 0}, {}}};
    for (int level = J; level > M; --level) {
        const double s = sys.pow_L(level);
        std::vector<Cand> next;
        for (const Cand& c : cands) {
            for (int i = 1; i <= sys.N(); ++i) {
                const Vec2 tau = c.tau + s * sys.similitudes()[static_cast<std::size_t>(i - 1)].nu;
                if (sys.hull_distance(x, level - 1, tau) > tol) continue;
                Cand nc{tau, c.word};
                nc.word.push_back(static_cast<std::uint8_t>(i));
                next.push_back(std::move(nc));
            }
        }
        cands = std::move(next);
    }
    std::vector<CellAddress> out;
    for (const Cand& c : cands) {
        if (!sys.on_fractal(x, M, c.tau, tol)) continue;
        CellAddress a;
        a.level = M;
        a.envelope = J;
        a.word.assign(c.word.rbegin(), c.word.rend());  // finest digit first
        out.push_back(std::move(a));
    }
    std::sort(out.begin(), out.end(),
              [](const CellAddress& a, const CellAddress& b) { return a.word < b.word; });
    if (out.empty()) {
        std::ostringstream os;
        os << "point (" << x.x << "," << x.y << ") is not on any level-" << M << " cell";
        fail(Errc::NotOnFractal, os.str());
    }
    return out;
}

VertexLattice vertex_lattice(const FractalSystem& sys, int m, int J, std::int64_t cap) {
    VertexLattice lat;
    lat.level = m;
    lat.envelope = J;
    lat.table = VertexTable(kVertexQuant * sys.pow_L(m) * sys.diam0());
    const double s = sys.pow_L(m);
    const auto& v0 = sys.essential_fixed_points();
    visit_cells(
        sys, m, J,
        [&](const CellAddress&, const Vec2& tau) {
            for (const Vec2& v : v0) {
                const int idx = lat.table.insert(s * v + tau);
                if (idx == static_cast<int>(lat.rank.size()))
                    lat.rank.push_back(1);
                else
                    lat.rank[static_cast<std::size_t>(idx)] += 1;
            }
        },
        cap);
    return lat;
}

Vec2 anchor_point(const FractalSystem& sys, int M) {
    // Fixed point of Psi_2 o Psi_1: on the fractal, never a lattice vertex
    // (its address is purely 2-periodic, not eventually constant).
    const double L2 = sys.L() * sys.L();
    const Vec2 x0 = (L2 / (L2 - 1.0)) * sys.similitudes()[1].nu;
    return sys.pow_L(M) * x0;
}

Vec2 sample_point(const FractalSystem& sys, int M, int depth, Rng& rng) {
    Vec2 tau{0, 0};
    for (int d = 0; d < depth; ++d) {
        const auto i = static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(sys.N())));
        tau += sys.pow_L(M - d) * sys.similitudes()[i].nu;
    }
    return tau + anchor_point(sys, M - depth);
}

}  // namespace nh
