#include "hilayout/layout_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "hilayout/error.hpp"
#include "hilayout/geometry.hpp"
#include "hilayout/hierarchy_io.hpp"
#include "hilayout/rng.hpp"

namespace hilayout {

using geometry::Rect;

namespace {

constexpr double kImprove = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double& at(Vec2& v, int axis) { return axis == 0 ? v.x : v.y; }
double at(const Vec2& v, int axis) { return axis == 0 ? v.x : v.y; }

double l1(Vec2 a, Vec2 b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

std::uint64_t hash_id(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string io_size(Vec2 v) { return io::format_number(v.x) + " x " + io::format_number(v.y); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Local problem: box 0 is the anchor, boxes 1..n are the members.

class LocalModel {
public:
    LocalModel(const LocalProblem& p, const SolverConfig& cfg) : p_(p), mu_(cfg.edit_weight) {
        half_.push_back(p.anchor_footprint * 0.5);
        target_.push_back({});
        prev_.push_back(p.anchor_previous ? std::optional<Vec2>(p.anchor_previous->center) : std::nullopt);
        for (const auto& m : p.members) {
            half_.push_back(rotated_extents(m.footprint, m.target.theta) * 0.5);
            target_.push_back(m.target.position);
            prev_.push_back(m.previous ? std::optional<Vec2>(m.previous->center) : std::nullopt);
        }
        bound_ = p.area_size * 0.5;
    }

    std::size_t size() const { return half_.size(); }
    Vec2 half(std::size_t i) const { return half_[i]; }
    Vec2 bound() const { return bound_; }
    Vec2 target(std::size_t i) const { return target_[i]; }
    const std::optional<Vec2>& prev(std::size_t i) const { return prev_[i]; }

    double base(const std::vector<Vec2>& c) const {
        double s = 0.0;
        for (std::size_t i = 1; i < c.size(); ++i) s += l1(c[i] - c[0], target_[i]);
        return s;
    }

    double edit(const std::vector<Vec2>& c) const {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (prev_[i]) s += mu_ * l1(c[i], *prev_[i]);
        }
        return s;
    }

    double overlap(const std::vector<Vec2>& c, std::size_t i, std::size_t j) const {
        return geometry::interval_overlap(c[i].x - half_[i].x, c[i].x + half_[i].x, c[j].x - half_[j].x,
                                          c[j].x + half_[j].x) *
               geometry::interval_overlap(c[i].y - half_[i].y, c[i].y + half_[i].y, c[j].y - half_[j].y,
                                          c[j].y + half_[j].y);
    }

    double oob(const std::vector<Vec2>& c, std::size_t i) const {
        const double inside =
            geometry::interval_overlap(c[i].x - half_[i].x, c[i].x + half_[i].x, -bound_.x, bound_.x) *
            geometry::interval_overlap(c[i].y - half_[i].y, c[i].y + half_[i].y, -bound_.y, bound_.y);
        return std::max(0.0, 4.0 * half_[i].x * half_[i].y - inside);
    }

    double penalty(const std::vector<Vec2>& c) const {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            s += oob(c, i);
            for (std::size_t j = i + 1; j < c.size(); ++j) s += overlap(c, i, j);
        }
        return s;
    }

    double total(const std::vector<Vec2>& c, double lambda) const { return base(c) + edit(c) + lambda * penalty(c); }

    Residuals residuals(const std::vector<Vec2>& c) const {
        Residuals r;
        for (std::size_t i = 0; i < c.size(); ++i) {
            r.max_oob = std::max(r.max_oob, oob(c, i));
            for (std::size_t j = i + 1; j < c.size(); ++j) r.max_overlap = std::max(r.max_overlap, overlap(c, i, j));
        }
        return r;
    }

    bool fix_anchor() const { return p_.fix_anchor; }

private:
    const LocalProblem& p_;
    double mu_;
    std::vector<Vec2> half_;
    std::vector<Vec2> target_;
    std::vector<std::optional<Vec2>> prev_;
    Vec2 bound_;
};

/// Exact coordinate descent: along any single coordinate the objective is
/// piecewise linear, so its minimum lies on one of the enumerated kinks.
class LocalDescent {
public:
    LocalDescent(const LocalModel& m, int max_sweeps) : m_(m), max_sweeps_(max_sweeps) {}

    long run(std::vector<Vec2>& c, double lambda) const {
        long moves = 0;
        for (int sweep = 0; sweep < max_sweeps_; ++sweep) {
            bool moved = false;
            if (!m_.fix_anchor()) {
                for (int a = 0; a < 2; ++a) moved |= group_move(c, a, lambda);
            }
            for (std::size_t k = m_.fix_anchor() ? 1 : 0; k < c.size(); ++k) {
                for (int a = 0; a < 2; ++a) moved |= coordinate_move(c, k, a, lambda);
            }
            if (!moved) break;
            ++moves;
        }
        return moves;
    }

private:
    bool coordinate_move(std::vector<Vec2>& c, std::size_t k, int a, double lambda) const {
        std::vector<double> cand;
        const double hk = at(m_.half(k), a);
        if (k > 0) {
            cand.push_back(at(c[0], a) + at(m_.target(k), a));
        } else {
            for (std::size_t i = 1; i < c.size(); ++i) cand.push_back(at(c[i], a) - at(m_.target(i), a));
        }
        if (m_.prev(k)) cand.push_back(at(*m_.prev(k), a));
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j == k) continue;
            const double cj = at(c[j], a);
            const double hj = at(m_.half(j), a);
            cand.insert(cand.end(), {cj + hj + hk, cj - hj - hk, cj - hj + hk, cj + hj - hk});
        }
        const double b = at(m_.bound(), a);
        cand.insert(cand.end(), {b - hk, -b + hk, b + hk, -b - hk});

        const double original = at(c[k], a);
        const double current = m_.total(c, lambda);
        double best = current;
        double best_v = original;
        for (double v : cand) {
            at(c[k], a) = v;
            const double f = m_.total(c, lambda);
            if (f < best - kImprove) {
                best = f;
                best_v = v;
            }
        }
        at(c[k], a) = best_v;
        return best_v != original;
    }

    bool group_move(std::vector<Vec2>& c, int a, double lambda) const {
        std::vector<double> cand;
        const double b = at(m_.bound(), a);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double ci = at(c[i], a);
            const double hi = at(m_.half(i), a);
            cand.insert(cand.end(), {b - hi - ci, -b + hi - ci, b + hi - ci, -b - hi - ci});
            if (m_.prev(i)) cand.push_back(at(*m_.prev(i), a) - ci);
        }
        const std::vector<Vec2> original = c;
        const double current = m_.total(c, lambda);
        double best = current;
        double best_d = 0.0;
        for (double d : cand) {
            for (std::size_t i = 0; i < c.size(); ++i) at(c[i], a) = at(original[i], a) + d;
            const double f = m_.total(c, lambda);
            if (f < best - kImprove) {
                best = f;
                best_d = d;
            }
        }
        for (std::size_t i = 0; i < c.size(); ++i) at(c[i], a) = at(original[i], a) + best_d;
        if (best_d == 0.0) c = original;
        return best_d != 0.0;
    }

    const LocalModel& m_;
    int max_sweeps_;
};

bool feasible(const Residuals& r, const SolverConfig& cfg) {
    return r.max_overlap <= cfg.overlap_tol && r.max_oob <= cfg.oob_tol;
}

/// Zero the smaller axis offset of aligned members whenever the result
/// stays feasible.
void snap_aligned(const LocalProblem& p, const LocalModel& m, std::vector<Vec2>& c, const SolverConfig& cfg) {
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (!p.members[i - 1].aligned) continue;
        const Vec2 d = c[i] - c[0];
        const Vec2 keep = c[i];
        if (std::abs(d.x) <= std::abs(d.y)) {
            c[i].x = c[0].x;
        } else {
            c[i].y = c[0].y;
        }
        if (!feasible(m.residuals(c), cfg)) c[i] = keep;
    }
}

/// Depth-first search over corner-point candidates: each box in turn goes
/// flush against the area bounds or an already placed box, or onto its
/// target or previous position, nearest target first. run() stops at the
/// first feasible arrangement; best() keeps going, with branch and bound,
/// for the cheapest one. Both try member orders until the node budget runs
/// out.
class Packer {
public:
    Packer(const LocalModel& m, const SolverConfig& cfg, long budget) : m_(m), cfg_(cfg), budget_(budget) {}

    /// Cheapest arrangement scoring below `bound`, if any is found.
    std::optional<std::vector<Vec2>> best(double bound) {
        std::vector<std::size_t> order;
        for (std::size_t i = 1; i < m_.size(); ++i) order.push_back(i);
        bound_ = bound;
        found_.reset();
        do {
            c_.assign(m_.size(), Vec2{});
            placed_.clear();
            search_anchor(order);
        } while (budget_ > 0 && std::next_permutation(order.begin(), order.end()));
        return found_;
    }

    std::optional<std::vector<Vec2>> run(std::uint64_t seed) {
        std::vector<std::size_t> order;
        for (std::size_t i = 1; i < m_.size(); ++i) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return m_.half(a).x * m_.half(a).y > m_.half(b).x * m_.half(b).y;
        });
        Rng rng(seed);
        for (int attempt = 0; attempt < 64 && budget_ > 0; ++attempt) {
            if (attempt > 0) {
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            }
            c_.assign(m_.size(), Vec2{});
            placed_.clear();
            if (place_anchor(order)) return c_;
        }
        return std::nullopt;
    }

private:
    bool fits(std::size_t k) const {
        if (m_.oob(c_, k) > cfg_.oob_tol) return false;
        for (std::size_t j : placed_) {
            if (m_.overlap(c_, j, k) > cfg_.overlap_tol) return false;
        }
        return true;
    }

    std::vector<Vec2> candidates(std::size_t k, Vec2 goal) {
        std::vector<double> xs{goal.x}, ys{goal.y};
        if (m_.prev(k)) {
            xs.push_back(m_.prev(k)->x);
            ys.push_back(m_.prev(k)->y);
        }
        const Vec2 hk = m_.half(k);
        const Vec2 b = m_.bound();
        xs.insert(xs.end(), {b.x - hk.x, -b.x + hk.x});
        ys.insert(ys.end(), {b.y - hk.y, -b.y + hk.y});
        for (std::size_t j : placed_) {
            xs.insert(xs.end(), {c_[j].x + m_.half(j).x + hk.x, c_[j].x - m_.half(j).x - hk.x});
            ys.insert(ys.end(), {c_[j].y + m_.half(j).y + hk.y, c_[j].y - m_.half(j).y - hk.y});
        }
        std::vector<std::pair<double, Vec2>> scored;
        for (double x : xs) {
            for (double y : ys) {
                c_[k] = {x, y};
                if (fits(k)) scored.push_back({l1(c_[k], goal), c_[k]});
            }
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Vec2> out;
        for (const auto& s : scored) {
            if (out.empty() || !(out.back() == s.second)) out.push_back(s.second);
        }
        return out;
    }

    bool place_anchor(const std::vector<std::size_t>& order) {
        const Vec2 home = m_.prev(0) ? *m_.prev(0) : Vec2{};
        const std::vector<Vec2> spots = m_.fix_anchor() ? std::vector<Vec2>{Vec2{}} : candidates(0, home);
        for (const Vec2 a : spots) {
            c_[0] = a;
            if (!fits(0)) continue;
            placed_.push_back(0);
            if (place(order, 0)) return true;
            placed_.pop_back();
            if (--budget_ <= 0) return false;
        }
        return false;
    }

    bool place(const std::vector<std::size_t>& order, std::size_t depth) {
        if (depth == order.size()) return true;
        const std::size_t k = order[depth];
        for (const Vec2 v : candidates(k, c_[0] + m_.target(k))) {
            if (--budget_ <= 0) return false;
            c_[k] = v;
            placed_.push_back(k);
            if (place(order, depth + 1)) return true;
            placed_.pop_back();
        }
        return false;
    }

    double cost(std::size_t k) const {
        double s = k == 0 ? 0.0 : l1(c_[k] - c_[0], m_.target(k));
        if (m_.prev(k)) s += cfg_.edit_weight * l1(c_[k], *m_.prev(k));
        return s;
    }

    void search_anchor(const std::vector<std::size_t>& order) {
        const Vec2 home = m_.prev(0) ? *m_.prev(0) : Vec2{};
        const std::vector<Vec2> spots = m_.fix_anchor() ? std::vector<Vec2>{Vec2{}} : candidates(0, home);
        for (const Vec2 a : spots) {
            if (--budget_ <= 0) return;
            c_[0] = a;
            if (!fits(0)) continue;
            const double spent = cost(0);
            if (spent >= bound_ - kImprove) continue;
            placed_.push_back(0);
            search(order, 0, spent);
            placed_.pop_back();
        }
    }

    void search(const std::vector<std::size_t>& order, std::size_t depth, double spent) {
        if (depth == order.size()) {
            bound_ = spent;
            found_ = c_;
            return;
        }
        const std::size_t k = order[depth];
        for (const Vec2 v : candidates(k, c_[0] + m_.target(k))) {
            if (--budget_ <= 0) return;
            c_[k] = v;
            const double s = spent + cost(k);
            // candidates come nearest to the target first, so later ones only cost more
            if (!m_.prev(k) && s >= bound_ - kImprove) break;
            if (s >= bound_ - kImprove) continue;
            placed_.push_back(k);
            search(order, depth + 1, s);
            placed_.pop_back();
        }
    }

    const LocalModel& m_;
    const SolverConfig& cfg_;
    long budget_;
    std::vector<Vec2> c_;
    std::vector<std::size_t> placed_;
    double bound_ = kInf;
    std::optional<std::vector<Vec2>> found_;
};

std::vector<Vec2> local_init(const LocalProblem& p, const LocalModel& m, int restart, std::uint64_t seed) {
    const std::size_t n = m.size();
    std::vector<Vec2> c(n);
    if (restart == 0) {
        if (!p.fix_anchor && p.anchor_previous) c[0] = p.anchor_previous->center;
        for (std::size_t i = 1; i < n; ++i) c[i] = m.prev(i) ? *m.prev(i) : c[0] + m.target(i);
        return c;
    }
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(restart));
    auto uniform_inside = [&](std::size_t i) {
        const double bx = std::max(0.0, m.bound().x - m.half(i).x);
        const double by = std::max(0.0, m.bound().y - m.half(i).y);
        const double x = rng.uniform(-bx, bx);
        const double y = rng.uniform(-by, by);
        return Vec2{x, y};
    };
    if (!p.fix_anchor) c[0] = uniform_inside(0);
    for (std::size_t i = 1; i < n; ++i) {
        if (restart % 2 == 1) {
            const double dx = 0.3 * rng.normal();
            const double dy = 0.3 * rng.normal();
            c[i] = c[0] + m.target(i) + Vec2{dx, dy};
        } else {
            c[i] = uniform_inside(i);
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Global problem: area centers are the variables; the wall assignment fixes
// which coordinate slides along the wall and which one measures D_w.

struct Placement {
    Facing facing;
    Vec2 ext;          // scene-frame extents
    int along;         // axis parallel to the wall
    Vec2 lo, hi;       // admissible center box (keeps the area inside the room)
    double flush;      // center coordinate with the back edge on the wall
    double sign;       // +1 when moving away from the wall increases the coordinate
};

std::optional<Placement> place_on_wall(Vec2 size, Facing f, Vec2 room) {
    Placement pl;
    pl.facing = f;
    pl.ext = rotated_extents(size, facing_rotation(f));
    if (pl.ext.x > room.x + 1e-12 || pl.ext.y > room.y + 1e-12) return std::nullopt;
    const Vec2 free{std::max(0.0, 0.5 * (room.x - pl.ext.x)), std::max(0.0, 0.5 * (room.y - pl.ext.y))};
    pl.lo = {-free.x, -free.y};
    pl.hi = free;
    switch (f) {
        case Facing::PosY: pl.along = 0; pl.flush = -free.y; pl.sign = 1.0; break;
        case Facing::NegY: pl.along = 0; pl.flush = free.y; pl.sign = -1.0; break;
        case Facing::PosX: pl.along = 1; pl.flush = -free.x; pl.sign = 1.0; break;
        case Facing::NegX: pl.along = 1; pl.flush = free.x; pl.sign = -1.0; break;
    }
    return pl;
}

int quarter_distance(Facing a, Facing b) {
    const int d = std::abs(static_cast<int>(a) - static_cast<int>(b));
    return std::min(d, 4 - d);
}

class GlobalModel {
public:
    GlobalModel(const GlobalProblem& p, std::vector<Placement> pl, const SolverConfig& cfg)
        : p_(p), pl_(std::move(pl)), mu_(cfg.edit_weight) {
        for (std::size_t i = 0; i < pl_.size(); ++i) {
            const auto& prev = p.areas[i].previous;
            if (prev) fixed_cost_ += cfg.facing_change_cost * quarter_distance(prev->facing, pl_[i].facing);
        }
    }

    std::size_t size() const { return pl_.size(); }
    const Placement& placement(std::size_t i) const { return pl_[i]; }
    Rect rect(Vec2 c, std::size_t i) const { return Rect::centered(c, pl_[i].ext); }

    double wall(Vec2 c, std::size_t i) const {
        const int b = 1 - pl_[i].along;
        return pl_[i].sign * (at(c, b) - pl_[i].flush);
    }

    // Terms of the objective that involve area i.
    double contrib(const std::vector<Vec2>& c, std::size_t i, double lambda) const {
        double s = wall(c[i], i);
        const Rect ri = rect(c[i], i);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j == i) continue;
            const Rect rj = rect(c[j], j);
            s -= geometry::area_distance(ri, rj);
            s += lambda * geometry::intersection_area(ri, rj);
        }
        if (p_.areas[i].previous) s += mu_ * l1(c[i], p_.areas[i].previous->center);
        return s;
    }

    double total(const std::vector<Vec2>& c, double lambda) const {
        double s = fixed_cost_;
        for (std::size_t i = 0; i < c.size(); ++i) {
            s += wall(c[i], i);
            if (p_.areas[i].previous) s += mu_ * l1(c[i], p_.areas[i].previous->center);
            const Rect ri = rect(c[i], i);
            for (std::size_t j = i + 1; j < c.size(); ++j) {
                const Rect rj = rect(c[j], j);
                s -= geometry::area_distance(ri, rj);
                s += lambda * geometry::intersection_area(ri, rj);
            }
        }
        return s;
    }

    double max_overlap(const std::vector<Vec2>& c) const {
        double m = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (std::size_t j = i + 1; j < c.size(); ++j) {
                m = std::max(m, geometry::intersection_area(rect(c[i], i), rect(c[j], j)));
            }
        }
        return m;
    }

    long descend(std::vector<Vec2>& c, double lambda, int max_sweeps) const {
        long moves = 0;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            bool moved = false;
            for (std::size_t i = 0; i < c.size(); ++i) {
                for (int a = 0; a < 2; ++a) moved |= move(c, i, a, lambda);
            }
            if (!moved) break;
            ++moves;
        }
        return moves;
    }

private:
    bool move(std::vector<Vec2>& c, std::size_t i, int a, double lambda) const {
        const Placement& pl = pl_[i];
        const double lo = at(pl.lo, a);
        const double hi = at(pl.hi, a);
        if (hi - lo <= 0.0) return false;
        const double hk = 0.5 * at(pl.ext, a);
        std::vector<double> cand{lo, hi};
        if (a != pl.along) cand.push_back(pl.flush);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j == i) continue;
            const double cj = at(c[j], a);
            const double hj = 0.5 * at(pl_[j].ext, a);
            cand.insert(cand.end(), {cj + hj + hk, cj - hj - hk, cj - hj + hk, cj + hj - hk});
        }
        if (p_.areas[i].previous) cand.push_back(at(p_.areas[i].previous->center, a));

        const double original = at(c[i], a);
        const double current = contrib(c, i, lambda);
        double best = current;
        double best_v = original;
        for (double v : cand) {
            v = std::clamp(v, lo, hi);
            // the back edge may leave the wall only inward
            if (a != pl.along && pl.sign * (v - pl.flush) < 0.0) v = pl.flush;
            at(c[i], a) = v;
            const double f = contrib(c, i, lambda);
            if (f < best - kImprove) {
                best = f;
                best_v = v;
            }
        }
        at(c[i], a) = best_v;
        return best_v != original;
    }

    const GlobalProblem& p_;
    std::vector<Placement> pl_;
    double mu_;
    double fixed_cost_ = 0.0;
};

struct AssignmentResult {
    bool feasible = false;
    double score = kInf;  // objective with editing terms, penalty-free
    std::vector<Vec2> centers;
    long iterations = 0;
};

AssignmentResult solve_assignment(const GlobalProblem& p, const std::vector<Facing>& facings,
                                  const SolverConfig& cfg) {
    AssignmentResult out;
    std::vector<Placement> pl;
    for (std::size_t i = 0; i < facings.size(); ++i) {
        auto x = place_on_wall(p.areas[i].size, facings[i], p.room);
        if (!x) return out;
        pl.push_back(*x);
    }
    GlobalModel m(p, pl, cfg);

    std::vector<std::vector<Vec2>> inits;
    {
        // spread the areas of each wall evenly along it
        std::vector<Vec2> c(m.size());
        std::map<int, std::vector<std::size_t>> by_wall;
        for (std::size_t i = 0; i < m.size(); ++i) by_wall[static_cast<int>(facings[i])].push_back(i);
        for (const auto& [wall, ids] : by_wall) {
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const auto& q = pl[ids[k]];
                const int a = q.along;
                const double lo = at(q.lo, a);
                const double hi = at(q.hi, a);
                const double t = ids.size() == 1 ? 0.5 : static_cast<double>(k) / (ids.size() - 1);
                Vec2 ci;
                at(ci, a) = lo + t * (hi - lo);
                at(ci, 1 - a) = q.flush;
                c[ids[k]] = ci;
            }
        }
        inits.push_back(std::move(c));
    }
    if (m.size() <= 3) {
        // areas facing each other sit on a plateau until one leaves the
        // other's span, so also start from every mix of wall ends and middles
        std::size_t combos = 1;
        for (std::size_t i = 0; i < m.size(); ++i) combos *= 3;
        for (std::size_t code = 0; code < combos; ++code) {
            std::vector<Vec2> c(m.size());
            std::size_t rest = code;
            for (std::size_t i = 0; i < m.size(); ++i, rest /= 3) {
                const auto& q = pl[i];
                const int a = q.along;
                at(c[i], a) = at(q.lo, a) + 0.5 * static_cast<double>(rest % 3) * (at(q.hi, a) - at(q.lo, a));
                at(c[i], 1 - a) = q.flush;
            }
            inits.push_back(std::move(c));
        }
    }
    bool all_prev = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& prev = p.areas[i].previous;
        all_prev &= prev && prev->facing == facings[i];
    }
    if (all_prev) {
        std::vector<Vec2> c;
        for (const auto& a : p.areas) c.push_back(a.previous->center);
        inits.insert(inits.begin(), std::move(c));
    }

    const double lmax = cfg.lambda_max();
    for (auto& c : inits) {
        double lambda = cfg.lambda0;
        for (int r = 0; r < cfg.rounds; ++r, lambda *= cfg.lambda_growth) {
            const auto keep = c;
            const double before = m.total(c, lmax);
            out.iterations += m.descend(c, lambda, cfg.max_sweeps);
            if (m.total(c, lmax) > before) c = keep;
        }
        const bool ok = m.max_overlap(c) <= cfg.overlap_tol;
        const double score = m.total(c, 0.0);
        if (ok && (!out.feasible || score < out.score - kImprove)) {
            out.feasible = true;
            out.score = score;
            out.centers = c;
        }
    }
    return out;
}

std::vector<Facing> decode_assignment(std::uint64_t index, std::size_t k) {
    std::vector<Facing> f(k);
    for (std::size_t i = k; i-- > 0;) {
        f[i] = static_cast<Facing>(index % 4);
        index /= 4;
    }
    return f;
}

Rect placed_rect(const PlacedObject& o) {
    return geometry::canonicalize(geometry::Obb2D::from_size(o.pose.center, o.size.xy(), o.pose.theta));
}

double rect_oob(const Rect& r, const Rect& bounds) { return std::max(0.0, r.area() - geometry::intersection_area(r, bounds)); }

}  // namespace

// ---------------------------------------------------------------------------

double SolverConfig::lambda_max() const {
    double l = lambda0;
    for (int r = 1; r < rounds; ++r) l *= lambda_growth;
    return l;
}

SolverConfig SolverConfig::from_json(const nlohmann::json& j) {
    SolverConfig c;
    c.lambda0 = j.value("lambda0", c.lambda0);
    c.lambda_growth = j.value("lambda_growth", c.lambda_growth);
    c.rounds = j.value("rounds", c.rounds);
    c.restarts = j.value("restarts", c.restarts);
    c.max_sweeps = j.value("max_sweeps", c.max_sweeps);
    c.edit_weight = j.value("edit_weight", c.edit_weight);
    c.facing_change_cost = j.value("facing_change_cost", c.facing_change_cost);
    c.enumeration_cap = j.value("enumeration_cap", c.enumeration_cap);
    c.anneal_iterations = j.value("anneal_iterations", c.anneal_iterations);
    c.nudge_iterations = j.value("nudge_iterations", c.nudge_iterations);
    c.search_budget = j.value("search_budget", c.search_budget);
    c.overlap_tol = j.value("overlap_tol", c.overlap_tol);
    c.oob_tol = j.value("oob_tol", c.oob_tol);
    if (c.rounds < 1 || c.restarts < 1 || c.lambda0 <= 0 || c.lambda_growth < 1) {
        throw std::invalid_argument("solver config: rounds, restarts, lambda0 and lambda_growth out of range");
    }
    return c;
}

nlohmann::json SolverConfig::to_json() const {
    return {{"lambda0", lambda0},
            {"lambda_growth", lambda_growth},
            {"rounds", rounds},
            {"restarts", restarts},
            {"max_sweeps", max_sweeps},
            {"edit_weight", edit_weight},
            {"facing_change_cost", facing_change_cost},
            {"enumeration_cap", enumeration_cap},
            {"anneal_iterations", anneal_iterations},
            {"nudge_iterations", nudge_iterations},
            {"search_budget", search_budget},
            {"overlap_tol", overlap_tol},
            {"oob_tol", oob_tol}};
}

double local_objective(const LocalProblem& p, const Pose2D& anchor, const std::vector<Pose2D>& members) {
    double s = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        s += l1(rel(members[i], anchor).position, p.members[i].target.position);
    }
    return s;
}

LocalSolution solve_local(const LocalProblem& p, std::uint64_t seed, const SolverConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const LocalModel m(p, cfg);
    const LocalDescent cd(m, cfg.max_sweeps);
    const double lmax = cfg.lambda_max();

    LocalSolution out;
    std::optional<std::vector<Vec2>> best;
    double best_score = kInf;
    for (int r = 0; r < cfg.restarts; ++r) {
        auto c = local_init(p, m, r, seed);
        double lambda = cfg.lambda0;
        out.report.trace.push_back(m.total(c, lmax));
        for (int round = 0; round < cfg.rounds; ++round, lambda *= cfg.lambda_growth) {
            const auto keep = c;
            const double before = m.total(c, lmax);
            out.report.iterations += cd.run(c, lambda);
            if (m.total(c, lmax) > before) c = keep;
            out.report.trace.push_back(m.total(c, lmax));
        }
        if (feasible(m.residuals(c), cfg)) {
            snap_aligned(p, m, c, cfg);
            const double score = m.base(c) + m.edit(c);
            if (score < best_score - kImprove) {
                best_score = score;
                best = c;
            }
        }
    }
    out.report.restarts_used = cfg.restarts;
    if (auto searched = Packer(m, cfg, cfg.search_budget).best(best_score)) {
        snap_aligned(p, m, *searched, cfg);
        const double score = m.base(*searched) + m.edit(*searched);
        if (score < best_score - kImprove) {
            best_score = score;
            best = std::move(searched);
            out.report.notes.push_back("corner search");
        }
    }
    if (!best) {
        best = Packer(m, cfg, cfg.search_budget).run(seed);
        if (best) {
            auto polished = *best;
            cd.run(polished, lmax);
            if (feasible(m.residuals(polished), cfg) && m.base(polished) + m.edit(polished) < m.base(*best) + m.edit(*best)) {
                best = polished;
            }
            snap_aligned(p, m, *best, cfg);
            out.report.notes.push_back("packing fallback");
        }
    }
    if (!best) {
        throw Infeasible("area of anchor '" + p.anchor_id + "': no feasible arrangement of " +
                         std::to_string(p.members.size() + 1) + " objects in " + io_size(p.area_size));
    }
    const auto& c = *best;
    out.anchor = {c[0], Rot4{}};
    for (std::size_t i = 0; i < p.members.size(); ++i) out.members.push_back({c[i + 1], p.members[i].target.theta});
    const Residuals res = m.residuals(c);
    out.report.objective = local_objective(p, out.anchor, out.members);
    out.report.max_overlap = res.max_overlap;
    out.report.max_oob = res.max_oob;
    out.report.feasible = feasible(res, cfg);
    out.report.elapsed_seconds = seconds_since(t0);
    return out;
}

double global_objective(const GlobalProblem& p, const std::vector<AreaPose>& poses) {
    double s = 0.0;
    std::vector<Rect> rects;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const Rect r = Rect::centered(poses[i].center, rotated_extents(p.areas[i].size, facing_rotation(poses[i].facing)));
        s += geometry::wall_distance(r, poses[i].facing, p.room);
        rects.push_back(r);
    }
    for (std::size_t i = 0; i < rects.size(); ++i) {
        for (std::size_t j = i + 1; j < rects.size(); ++j) s -= geometry::area_distance(rects[i], rects[j]);
    }
    return s;
}

GlobalSolution solve_global(const GlobalProblem& p, std::uint64_t seed, const SolverConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    GlobalSolution out;
    const std::size_t k = p.areas.size();
    if (k == 0) {
        out.report.feasible = true;
        return out;
    }

    AssignmentResult best;
    std::vector<Facing> best_facings;
    long iterations = 0;
    auto consider = [&](const std::vector<Facing>& f, const AssignmentResult& r) {
        iterations += r.iterations;
        if (r.feasible && (!best.feasible || r.score < best.score - kImprove)) {
            best = r;
            best_facings = f;
        }
    };

    if (static_cast<int>(k) <= cfg.enumeration_cap) {
        std::uint64_t n = 1;
        for (std::size_t i = 0; i < k; ++i) n *= 4;
        for (std::uint64_t idx = 0; idx < n; ++idx) {
            const auto f = decode_assignment(idx, k);
            consider(f, solve_assignment(p, f, cfg));
        }
    } else {
        out.report.notes.push_back("TooManyAreas: " + std::to_string(k) + " areas exceed the enumeration cap of " +
                                   std::to_string(cfg.enumeration_cap) + "; simulated annealing over wall assignments");
        Rng rng = Rng::derive(seed, 0x61a1);
        std::map<std::vector<Facing>, AssignmentResult> cache;
        auto energy = [&](const std::vector<Facing>& f) -> const AssignmentResult& {
            auto it = cache.find(f);
            if (it == cache.end()) {
                it = cache.emplace(f, solve_assignment(p, f, cfg)).first;
                consider(f, it->second);
            }
            return it->second;
        };
        auto value = [](const AssignmentResult& r) { return r.feasible ? r.score : 1e9; };
        std::vector<Facing> cur(k);
        for (std::size_t i = 0; i < k; ++i) {
            if (p.areas[i].previous) cur[i] = p.areas[i].previous->facing;
            else cur[i] = static_cast<Facing>(i % 4);
        }
        double cur_e = value(energy(cur));
        const int iters = std::max(1, cfg.anneal_iterations);
        for (int it = 0; it < iters; ++it) {
            const double temp = std::pow(1e-3, static_cast<double>(it) / iters);
            auto next = cur;
            const auto i = rng.below(k);
            next[i] = static_cast<Facing>((static_cast<int>(next[i]) + 1 + rng.below(3)) % 4);
            const double e = value(energy(next));
            if (e <= cur_e || rng.uniform() < std::exp((cur_e - e) / temp)) {
                cur = std::move(next);
                cur_e = e;
            }
        }
    }

    if (!best.feasible) {
        throw Infeasible("no wall assignment places " + std::to_string(k) + " areas in the " +
                         io_size(p.room) + " room without overlap");
    }
    for (std::size_t i = 0; i < k; ++i) out.poses.push_back({best.centers[i], best_facings[i]});
    out.report.walls = best_facings;
    out.report.objective = global_objective(p, out.poses);
    out.report.iterations = iterations;
    for (std::size_t i = 0; i < k; ++i) {
        const Rect ri = Rect::centered(out.poses[i].center, rotated_extents(p.areas[i].size, facing_rotation(best_facings[i])));
        out.report.max_oob = std::max(out.report.max_oob, rect_oob(ri, Rect::centered({}, p.room)));
        for (std::size_t j = i + 1; j < k; ++j) {
            const Rect rj = Rect::centered(out.poses[j].center, rotated_extents(p.areas[j].size, facing_rotation(best_facings[j])));
            out.report.max_overlap = std::max(out.report.max_overlap, geometry::intersection_area(ri, rj));
        }
    }
    out.report.feasible = out.report.max_overlap <= cfg.overlap_tol && out.report.max_oob <= cfg.oob_tol;
    out.report.elapsed_seconds = seconds_since(t0);
    return out;
}

// ---------------------------------------------------------------------------

LocalProblem make_local_problem(const SceneHierarchy& h, const FunctionalArea& area, const PlacementMap& predictions,
                                const SceneLayout* previous) {
    LocalProblem p;
    p.area_size = area.size;
    p.anchor_id = area.anchor;
    p.anchor_footprint = h.objects.at(area.anchor).footprint();

    // previous area-local pose of an object that stays in the same area
    auto prev_pose = [&](const std::string& id) -> std::optional<Pose2D> {
        if (!previous) return std::nullopt;
        const auto* owner = previous->hierarchy.area_of(id);
        if (!owner || owner->id != area.id) return std::nullopt;
        const auto it = previous->hierarchy.objects.find(id);
        if (it == previous->hierarchy.objects.end() || !it->second.pose) return std::nullopt;
        return it->second.pose;
    };
    if (auto a = prev_pose(area.anchor); a && a->theta == Rot4{}) p.anchor_previous = a;

    for (const auto& id : area.members) {
        if (id == area.anchor) continue;
        const auto it = predictions.find(id);
        if (it == predictions.end()) throw std::invalid_argument("no placement prediction for object '" + id + "'");
        LocalMember m;
        m.id = id;
        m.footprint = h.objects.at(id).footprint();
        m.target = it->second.as_rel();
        m.aligned = it->second.aligned();
        if (auto q = prev_pose(id); q && q->theta == m.target.theta) m.previous = q;
        p.members.push_back(std::move(m));
    }
    return p;
}

namespace {

std::uint64_t area_seed(std::uint64_t seed, const std::string& area_id) { return Rng::derive(seed, hash_id(area_id)).next_u64(); }

/// Push objects of different areas apart if composition left them
/// touching beyond tolerance. Areas are disjoint after the global solve, so
/// this is a safeguard that normally does nothing.
int nudge(SceneHierarchy& h, SceneLayout& layout, const SolverConfig& cfg) {
    int moves = 0;
    for (int iter = 0; iter < cfg.nudge_iterations; ++iter) {
        bool found = false;
        for (std::size_t i = 0; i < layout.objects.size() && !found; ++i) {
            for (std::size_t j = i + 1; j < layout.objects.size() && !found; ++j) {
                auto& a = layout.objects[i];
                auto& b = layout.objects[j];
                if (a.area == b.area) continue;
                const Rect ra = placed_rect(a);
                const Rect rb = placed_rect(b);
                if (geometry::intersection_area(ra, rb) <= cfg.overlap_tol) continue;
                found = true;
                const FunctionalArea& area = *h.find_area(b.area);
                const Rect bounds = geometry::area_rect(area);
                const Vec2 shifts[4] = {{ra.hi.x - rb.lo.x, 0}, {ra.lo.x - rb.hi.x, 0}, {0, ra.hi.y - rb.lo.y},
                                        {0, ra.lo.y - rb.hi.y}};
                double best = kInf;
                Vec2 best_shift;
                for (const Vec2 s : shifts) {
                    const Rect moved{rb.lo + s, rb.hi + s};
                    if (rect_oob(moved, bounds) > cfg.oob_tol) continue;
                    const double len = std::abs(s.x) + std::abs(s.y);
                    if (len < best) {
                        best = len;
                        best_shift = s;
                    }
                }
                if (best == kInf) return moves;
                b.pose.center = b.pose.center + best_shift;
                h.objects.at(b.id).pose = Pose2D{rel(b.pose, area.pose->as_pose()).position,
                                                 h.objects.at(b.id).pose->theta};
                ++moves;
            }
        }
        if (!found) break;
    }
    return moves;
}

SceneLayout solve_impl(const SceneHierarchy& input, const PlacementMap& predictions, std::uint64_t seed,
                       const SolverConfig& cfg, const SceneLayout* previous) {
    validate(input);
    SceneHierarchy h = input;
    double objective = 0.0;
    for (auto& area : h.areas) {
        const LocalProblem lp = make_local_problem(h, area, predictions, previous);
        const LocalSolution ls = solve_local(lp, area_seed(seed, area.id), cfg);
        objective += ls.report.objective;
        h.objects.at(area.anchor).pose = ls.anchor;
        for (std::size_t i = 0; i < lp.members.size(); ++i) h.objects.at(lp.members[i].id).pose = ls.members[i];
    }

    GlobalProblem gp;
    gp.room = h.root.size;
    for (const auto& area : h.areas) {
        GlobalArea ga{area.id, area.size, std::nullopt};
        if (previous) {
            const auto* old = previous->hierarchy.find_area(area.id);
            if (old && old->pose) ga.previous = old->pose;
        }
        gp.areas.push_back(std::move(ga));
    }
    const GlobalSolution gs = solve_global(gp, Rng::derive(seed, 0x6c0ba1).next_u64(), cfg);
    objective += gs.report.objective;
    for (std::size_t i = 0; i < h.areas.size(); ++i) h.areas[i].pose = gs.poses[i];

    SceneLayout layout = to_scene_frame(h);
    nudge(h, layout, cfg);
    layout.hierarchy = h;
    for (auto& o : layout.objects) {
        const auto* area = h.area_of(o.id);
        if (o.id == area->anchor) continue;
        if (const auto* e = h.relation_from(o.id); e && e->text) o.relation = e->text;
        o.target = predictions.at(o.id).as_rel();
    }
    const Residuals r = layout_residuals(layout);
    layout.report.objective = objective;
    layout.report.max_overlap = r.max_overlap;
    layout.report.max_oob = r.max_oob;
    layout.report.feasible = r.max_overlap <= cfg.overlap_tol && r.max_oob <= cfg.oob_tol;
    return layout;
}

}  // namespace

SceneLayout solve_scene(const SceneHierarchy& h, const PlacementMap& predictions, std::uint64_t seed,
                        const SolverConfig& cfg) {
    return solve_impl(h, predictions, seed, cfg, nullptr);
}

SceneLayout solve_edit(const SceneLayout& previous, const SceneHierarchy& updated, const PlacementMap& predictions,
                       std::uint64_t seed, const SolverConfig& cfg) {
    return solve_impl(updated, predictions, seed, cfg, &previous);
}

Residuals layout_residuals(const SceneLayout& layout) {
    Residuals r;
    const auto& h = layout.hierarchy;
    const Rect room = Rect::centered({}, h.root.size);
    std::vector<Rect> objs;
    for (const auto& o : layout.objects) objs.push_back(placed_rect(o));
    for (std::size_t i = 0; i < objs.size(); ++i) {
        const auto* area = h.find_area(layout.objects[i].area);
        r.max_oob = std::max(r.max_oob, rect_oob(objs[i], room));
        if (area && area->pose) r.max_oob = std::max(r.max_oob, rect_oob(objs[i], geometry::area_rect(*area)));
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
            r.max_overlap = std::max(r.max_overlap, geometry::intersection_area(objs[i], objs[j]));
        }
    }
    for (std::size_t i = 0; i < h.areas.size(); ++i) {
        if (!h.areas[i].pose) continue;
        const Rect ri = geometry::area_rect(h.areas[i]);
        r.max_oob = std::max(r.max_oob, rect_oob(ri, room));
        for (std::size_t j = i + 1; j < h.areas.size(); ++j) {
            if (!h.areas[j].pose) continue;
            r.max_overlap = std::max(r.max_overlap, geometry::intersection_area(ri, geometry::area_rect(h.areas[j])));
        }
    }
    return r;
}

}  // namespace hilayout
