// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include <json.hpp>

#include "ceir/exploration.hpp"
#include "ceir/traversal.hpp"

namespace ceir {

/// Half-open straddle test: min < iso <= max.
inline bool cell_contains_iso(const std::array<double, 8>& corners, double iso) {
    double lo = corners[0], hi = corners[0];
    for (double c : corners) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    return lo < iso && iso <= hi;
}

inline bool cell_contains_iso(const ScalarVolume& vol, const Vec3i& c, double iso) {
    return cell_contains_iso(vol.cell_corners(c.x, c.y, c.z), iso);
}

constexpr int kFaceSubgrid = 64;

/// Corners of a face in its local (u,v) frame: v00 at (0,0), v10 at (1,0), v01 at (0,1), v11 at (1,1).
struct FaceCorners {
    double v00 = 0.0, v10 = 0.0, v01 = 0.0, v11 = 0.0;
};

/// True when the corners alternate around iso, i.e. the bilinear contour has two branches.
inline bool face_has_two_branches(const FaceCorners& f, double iso) {
    const bool a = f.v00 >= iso, b = f.v10 >= iso, c = f.v11 >= iso, d = f.v01 >= iso;
    return a == c && b == d && a != b;
}

/// Arc length of the bilinear iso-contour on a face of size `face_dims` (world units), traced by
/// marching squares on a kFaceSubgrid^2 sub-grid. Ambiguous sub-cells are resolved with the face's
/// saddle value. A two-branch face contributes half its total contour length.
inline double face_contour_length(const FaceCorners& f, double iso, std::array<double, 2> face_dims) {
    const double lo = std::min({f.v00, f.v10, f.v01, f.v11}), hi = std::max({f.v00, f.v10, f.v01, f.v11});
    if (iso > hi || iso <= lo) return 0.0;

    constexpr int N = kFaceSubgrid;
    const double a = f.v10 - f.v00, b = f.v01 - f.v00, d = f.v00 + f.v11 - f.v10 - f.v01;
    // Saddle value of the bilinear interpolant; decides the pairing inside ambiguous sub-cells.
    const bool has_saddle = d != 0.0;
    const bool saddle_above = has_saddle && (f.v00 * f.v11 - f.v10 * f.v01) / d >= iso;

    std::array<double, N + 1> row0{}, row1{};
    auto fill = [&](std::array<double, N + 1>& row, int j) {
        const double y = static_cast<double>(j) / N;
        for (int i = 0; i <= N; ++i) {
            const double x = static_cast<double>(i) / N;
            row[i] = f.v00 + a * x + b * y + d * x * y - iso;
        }
    };
    const double du = face_dims[0] / N, dv = face_dims[1] / N;
    auto seg = [&](double x0, double y0, double x1, double y1) { return std::hypot((x1 - x0) * du, (y1 - y0) * dv); };
    auto frac = [](double p, double q) { return p / (p - q); };

    double total = 0.0;
    fill(row0, 0);
    for (int j = 0; j < N; ++j) {
        fill(row1, j + 1);
        for (int i = 0; i < N; ++i) {
            const double s00 = row0[i], s10 = row0[i + 1], s01 = row1[i], s11 = row1[i + 1];
            const int code = (s00 >= 0.0) | ((s10 >= 0.0) << 1) | ((s11 >= 0.0) << 2) | ((s01 >= 0.0) << 3);
            if (code == 0 || code == 15) continue;
            // Edge crossings in sub-cell units: bottom, right, top, left.
            auto bottom = [&] { return std::array<double, 2>{frac(s00, s10), 0.0}; };
            auto right = [&] { return std::array<double, 2>{1.0, frac(s10, s11)}; };
            auto top = [&] { return std::array<double, 2>{frac(s01, s11), 1.0}; };
            auto left = [&] { return std::array<double, 2>{0.0, frac(s00, s01)}; };
            auto join = [&](std::array<double, 2> p, std::array<double, 2> q) { total += seg(p[0], p[1], q[0], q[1]); };
            switch (code) {
                case 1: case 14: join(left(), bottom()); break;
                case 2: case 13: join(bottom(), right()); break;
                case 4: case 11: join(right(), top()); break;
                case 8: case 7: join(top(), left()); break;
                case 3: case 12: join(left(), right()); break;
                case 6: case 9: join(bottom(), top()); break;
                case 5:  // (0,0) and (1,1) above
                    if (saddle_above) { join(bottom(), right()); join(top(), left()); }
                    else { join(left(), bottom()); join(right(), top()); }
                    break;
                case 10:  // (1,0) and (0,1) above
                    if (saddle_above) { join(left(), bottom()); join(right(), top()); }
                    else { join(bottom(), right()); join(top(), left()); }
                    break;
            }
        }
        row0 = row1;
    }
    return face_has_two_branches(f, iso) ? 0.5 * total : total;
}

inline double face_contour_length(double v00, double v10, double v01, double v11, double iso,
                                  std::array<double, 2> face_dims) {
    return face_contour_length(FaceCorners{v00, v10, v01, v11}, iso, face_dims);
}

/// Face shared by `cell` and its +axis neighbor, with the two remaining axes as (u,v) in ascending order.
inline FaceCorners shared_face(const ScalarVolume& vol, const Vec3i& cell, int axis) {
    const int ua = axis == 0 ? 1 : 0, va = axis == 2 ? 1 : 2;
    Vec3i p = cell;
    p[axis] += 1;
    auto at = [&](int du, int dv) {
        Vec3i q = p;
        q[ua] += du;
        q[va] += dv;
        return vol.at(q.x, q.y, q.z);
    };
    return {at(0, 0), at(1, 0), at(0, 1), at(1, 1)};
}

inline std::array<double, 2> shared_face_dims(const ScalarVolume& vol, int axis) {
    const int ua = axis == 0 ? 1 : 0, va = axis == 2 ? 1 : 2;
    return {vol.spacing()[ua], vol.spacing()[va]};
}

struct IsoEdge {
    std::int64_t a = 0, b = 0;  // cell ids, a < b
    double weight = 0.0;
};

struct IsoGraph {
    std::vector<std::int64_t> nodes;  // ascending cell ids
    std::vector<IsoEdge> edges;

    std::int64_t index_of(std::int64_t cell_id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), cell_id);
        return (it != nodes.end() && *it == cell_id) ? it - nodes.begin() : -1;
    }
};

/// Breadth-first growth from both seed sets over 6-neighbor iso-crossing cells inside `crop`.
/// Edges carry the contour length on the shared face; zero-length faces produce no edge.
inline IsoGraph build_graph(const ScalarVolume& vol, double iso, const SeedSets& seeds, const CropBounds& crop) {
    crop.validate(vol);
    const Vec3i cdims = vol.cell_dims();
    const Vec3i ext{crop.hi.x - crop.lo.x, crop.hi.y - crop.lo.y, crop.hi.z - crop.lo.z};
    auto local = [&](const Vec3i& c) {
        return (c.x - crop.lo.x) + static_cast<std::size_t>(ext.x) *
                                       ((c.y - crop.lo.y) + static_cast<std::size_t>(ext.y) * (c.z - crop.lo.z));
    };
    // 0 = unseen, 1 = queued/visited node, 2 = rejected (not iso-crossing).
    std::vector<std::uint8_t> state(static_cast<std::size_t>(crop.cell_count()), 0);

    std::deque<Vec3i> queue;
    for (const auto* side : {&seeds.foreground(), &seeds.background()})
        for (std::int64_t id : *side) {
            if (id < 0 || id >= vol.cell_count()) throw SeedError("seed cell " + std::to_string(id) + " out of range", id);
            const Vec3i c = cell_index_from_id(id, cdims);
            if (!crop.contains(c)) throw SeedError("seed cell " + std::to_string(id) + " lies outside the crop", id);
            if (!cell_contains_iso(vol, c, iso))
                throw SeedError("seed cell " + std::to_string(id) + " is not on the isosurface", id);
            auto& s = state[local(c)];
            if (s == 0) {
                s = 1;
                queue.push_back(c);
            }
        }

    IsoGraph g;
    while (!queue.empty()) {
        const Vec3i c = queue.front();
        queue.pop_front();
        const std::int64_t cid = linear_cell_id(c, cdims);
        g.nodes.push_back(cid);
        for (int axis = 0; axis < 3; ++axis)
            for (int dir : {-1, 1}) {
                Vec3i n = c;
                n[axis] += dir;
                if (!crop.contains(n)) continue;
                auto& s = state[local(n)];
                if (s == 2) continue;
                if (s == 0) {
                    if (!cell_contains_iso(vol, n, iso)) {
                        s = 2;
                        continue;
                    }
                    s = 1;
                    queue.push_back(n);
                }
                if (dir < 0) continue;  // each undirected edge is emitted from its lower cell
                const double w = face_contour_length(shared_face(vol, c, axis), iso, shared_face_dims(vol, axis));
                if (w > 0.0) g.edges.push_back({cid, linear_cell_id(n, cdims), w});
            }
    }
    std::sort(g.nodes.begin(), g.nodes.end());
    std::sort(g.edges.begin(), g.edges.end(), [](const IsoEdge& x, const IsoEdge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    return g;
}

struct CutResult {
    std::vector<std::int64_t> foreground_cells;
    std::vector<std::int64_t> background_cells;
    double cut_weight = 0.0;
    double max_flow = 0.0;
    std::int64_t node_count = 0;
    std::chrono::duration<double> solve_time{0};
    double iso = 0.0;
};

namespace detail {

/// Dinic max-flow on real capacities. Undirected edges are a pair of arcs that are each
/// other's reverse, both with the edge capacity.
class MaxFlow {
public:
    explicit MaxFlow(int n) : head_(static_cast<std::size_t>(n), -1), level_(n), it_(n) {}

    void add_undirected(int u, int v, double cap) { add_pair(u, v, cap, cap); }
    void add_directed(int u, int v, double cap) { add_pair(u, v, cap, 0.0); }

    double run(int s, int t, double eps) {
        eps_ = eps;
        double flow = 0.0;
        while (bfs(s, t)) {
            for (std::size_t i = 0; i < head_.size(); ++i) it_[i] = head_[i];
            double f;
            while ((f = augment(s, t)) > 0.0) flow += f;
        }
        return flow;
    }

    std::vector<char> reachable_from(int s) const {
        std::vector<char> seen(head_.size(), 0);
        std::vector<int> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int e = head_[u]; e != -1; e = next_[e])
                if (cap_[e] > eps_ && !seen[to_[e]]) {
                    seen[to_[e]] = 1;
                    stack.push_back(to_[e]);
                }
        }
        return seen;
    }

private:
    void add_pair(int u, int v, double c_uv, double c_vu) {
        to_.push_back(v); cap_.push_back(c_uv); next_.push_back(head_[u]); head_[u] = static_cast<int>(to_.size()) - 1;
        to_.push_back(u); cap_.push_back(c_vu); next_.push_back(head_[v]); head_[v] = static_cast<int>(to_.size()) - 1;
    }

    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::deque<int> q{s};
        level_[s] = 0;
        while (!q.empty()) {
            const int u = q.front();
            q.pop_front();
            for (int e = head_[u]; e != -1; e = next_[e])
                if (cap_[e] > eps_ && level_[to_[e]] < 0) {
                    level_[to_[e]] = level_[u] + 1;
                    q.push_back(to_[e]);
                }
        }
        return level_[t] >= 0;
    }

    // One augmenting path in the level graph, found with an explicit stack.
    double augment(int s, int t) {
        std::vector<int> path;  // arc indices
        int u = s;
        while (true) {
            if (u == t) {
                double f = std::numeric_limits<double>::infinity();
                for (int e : path) f = std::min(f, cap_[e]);
                for (int e : path) {
                    cap_[e] -= f;
                    cap_[e ^ 1] += f;
                }
                return f;
            }
            int& e = it_[u];
            while (e != -1 && !(cap_[e] > eps_ && level_[to_[e]] == level_[u] + 1)) e = next_[e];
            if (e != -1) {
                path.push_back(e);
                u = to_[e];
                continue;
            }
            // Dead end: retreat.
            level_[u] = -1;
            if (path.empty()) return 0.0;
            u = to_[path.back() ^ 1];
            path.pop_back();
            it_[u] = next_[it_[u]];
        }
    }

    std::vector<int> head_, next_, to_;
    std::vector<double> cap_;
    std::vector<int> level_, it_;
    double eps_ = 0.0;
};

}  // namespace detail

/// Minimum edge cut separating every foreground seed from every background seed. The foreground
/// side is the set of nodes still reachable from the super-source in the residual graph.
inline CutResult min_cut(const IsoGraph& graph, const SeedSets& seeds) {
    if (seeds.foreground().empty() || seeds.background().empty())
        throw ConfigError("min-cut needs non-empty foreground and background seed sets");
    const auto start = std::chrono::steady_clock::now();
    const int n = static_cast<int>(graph.nodes.size());
    const int src = n, sink = n + 1;
    detail::MaxFlow flow(n + 2);
    double max_w = 0.0;
    for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
    const double inf = 1e9 * (max_w > 0.0 ? max_w : 1.0);
    for (const auto& e : graph.edges) {
        const auto a = graph.index_of(e.a), b = graph.index_of(e.b);
        if (a < 0 || b < 0) throw ContractViolation("edge endpoint missing from graph nodes");
        flow.add_undirected(static_cast<int>(a), static_cast<int>(b), e.weight);
    }
    auto seed_index = [&](std::int64_t id) {
        const auto i = graph.index_of(id);
        if (i < 0) throw SeedError("seed cell " + std::to_string(id) + " is not a graph node", id);
        return static_cast<int>(i);
    };
    for (std::int64_t id : seeds.foreground()) flow.add_directed(src, seed_index(id), inf);
    for (std::int64_t id : seeds.background()) flow.add_directed(seed_index(id), sink, inf);

    CutResult r;
    r.max_flow = flow.run(src, sink, 1e-12 * (max_w > 0.0 ? max_w : 1.0));
    const auto side = flow.reachable_from(src);
    for (int i = 0; i < n; ++i) (side[i] ? r.foreground_cells : r.background_cells).push_back(graph.nodes[i]);
    for (const auto& e : graph.edges)
        if (side[graph.index_of(e.a)] != side[graph.index_of(e.b)]) r.cut_weight += e.weight;
    r.node_count = n;
    r.solve_time = std::chrono::steady_clock::now() - start;
    return r;
}

inline nlohmann::json cut_to_json(const CutResult& r) {
    return {{"iso", r.iso},
            {"foreground_cells", r.foreground_cells},
            {"background_cells", r.background_cells},
            {"cut_weight", r.cut_weight},
            {"node_count", r.node_count}};
}

inline CutResult cut_from_json(const nlohmann::json& j) {
    CutResult r;
    r.iso = j.at("iso").get<double>();
    r.foreground_cells = j.at("foreground_cells").get<std::vector<std::int64_t>>();
    r.background_cells = j.at("background_cells").get<std::vector<std::int64_t>>();
    r.cut_weight = j.at("cut_weight").get<double>();
    r.node_count = j.at("node_count").get<std::int64_t>();
    return r;
}

}  // namespace ceir
