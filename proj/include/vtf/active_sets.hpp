#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vtf/errors.hpp"
#include "vtf/tensor.hpp"

namespace vtf {

using IndexSet = std::vector<MultiIndex>;  // sorted, deduplicated

// admissible: t_i in [k+2 : n_i - k], so every jump block sits strictly inside [k+1 : n_i].
// matching: the tighter box [k+1+(k+2)k : n_i-k+1-(k+2)k] used with derivative matching.
enum class JumpBox { admissible, matching };

inline std::pair<long, long> jump_box(std::size_t n, int k, JumpBox box) {
    const long nn = static_cast<long>(n);
    if (box == JumpBox::admissible) return {k + 2, nn - k};
    const long margin = static_cast<long>(k + 2) * k;
    return {k + 1 + margin, nn - k + 1 - margin};
}

struct ActiveSet {
    Shape shape;
    int k = 1;
    std::vector<MultiIndex> jumps;

    std::size_t size() const { return jumps.size(); }

    void validate(JumpBox box = JumpBox::admissible) const {
        check_shape(shape);
        if (k < 1) throw OrderError("order k must be at least 1");
        for (const auto& t : jumps) {
            if (t.size() != shape.size()) throw ShapeError("jump rank does not match shape");
            for (std::size_t i = 0; i < shape.size(); ++i) {
                auto [lo, hi] = jump_box(shape[i], k, box);
                const long ti = static_cast<long>(t[i]);
                if (ti < lo || ti > hi)
                    throw DomainError("jump coordinate " + std::to_string(ti) + " on axis " + std::to_string(i) +
                                      " outside [" + std::to_string(lo) + ":" + std::to_string(hi) + "]");
            }
        }
    }
};

inline void normalize(IndexSet& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
}

inline bool contains(const IndexSet& s, const MultiIndex& idx) { return std::binary_search(s.begin(), s.end(), idx); }

// Union of the blocks [t_i : t_i + k - 1] over all jumps, clipped to the shape.
inline IndexSet enlarge(const std::vector<MultiIndex>& jumps, const Shape& shape, int k) {
    IndexSet out;
    const std::size_t d = shape.size();
    const Shape block(d, static_cast<std::size_t>(k));
    for (const auto& t : jumps) {
        MultiIndex off(std::vector<std::size_t>(d, 1));
        do {
            MultiIndex j = t;
            bool inside = true;
            for (std::size_t i = 0; i < d; ++i) {
                j[i] = t[i] + off[i] - 1;
                inside = inside && j[i] >= 1 && j[i] <= shape[i];
            }
            if (inside) out.push_back(j);
        } while (next_index(block, off));
    }
    normalize(out);
    return out;
}

inline IndexSet enlarge(const ActiveSet& s) { return enlarge(s.jumps, s.shape, s.k); }

// s_per_axis jumps per axis, centred in equal slots of the jump box, as a full product grid.
inline ActiveSet regular_grid(const Shape& shape, int k, std::size_t s_per_axis, JumpBox box = JumpBox::admissible) {
    check_shape(shape);
    if (s_per_axis < 1) throw DomainError("s_per_axis must be positive");
    std::vector<std::vector<std::size_t>> coords(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        auto [lo, hi] = jump_box(shape[i], k, box);
        const long width = hi - lo + 1;
        if (width < static_cast<long>(s_per_axis))
            throw DomainError("jump box on axis " + std::to_string(i) + " too small for " +
                              std::to_string(s_per_axis) + " jumps");
        for (std::size_t r = 1; r <= s_per_axis; ++r) {
            const double pos = (static_cast<double>(r) - 0.5) * static_cast<double>(width) / s_per_axis - 0.5;
            coords[i].push_back(static_cast<std::size_t>(lo + std::lround(pos)));
        }
        if (box == JumpBox::admissible)
            for (std::size_t r = 1; r < s_per_axis; ++r)
                if (coords[i][r] - coords[i][r - 1] < static_cast<std::size_t>(k) + 1)
                    throw DomainError("jump box on axis " + std::to_string(i) + " too small: blocks would touch");
    }
    ActiveSet s;
    s.shape = shape;
    s.k = k;
    Shape counts(shape.size(), s_per_axis);
    MultiIndex r(std::vector<std::size_t>(shape.size(), 1));
    do {
        MultiIndex t{std::vector<std::size_t>(shape.size())};
        for (std::size_t i = 0; i < shape.size(); ++i) t[i] = coords[i][r[i] - 1];
        s.jumps.push_back(t);
    } while (next_index(counts, r));
    return s;
}

// One closed hyperrectangle per jump; neighbouring cells share their boundary layer.
struct Tessellation {
    ActiveSet active;
    std::vector<MultiIndex> lower;  // t^-_m
    std::vector<MultiIndex> upper;  // t^+_m

    std::size_t size() const { return active.jumps.size(); }
    std::size_t rank() const { return active.shape.size(); }

    std::size_t d_minus(std::size_t m, std::size_t i) const { return active.jumps[m][i] - lower[m][i]; }
    std::size_t d_plus(std::size_t m, std::size_t i) const {
        return upper[m][i] - active.jumps[m][i] - static_cast<std::size_t>(active.k) + 1;
    }
    std::size_t d_max(std::size_t i) const {
        std::size_t r = 0;
        for (std::size_t m = 0; m < size(); ++m) r = std::max({r, d_minus(m, i), d_plus(m, i)});
        return r;
    }

    bool cell_contains(std::size_t m, const MultiIndex& idx) const {
        for (std::size_t i = 0; i < rank(); ++i)
            if (idx[i] < lower[m][i] || idx[i] > upper[m][i]) return false;
        return true;
    }

    // first cell containing idx; boundary points go to the lowest-numbered cell
    std::optional<std::size_t> owner(const MultiIndex& idx) const {
        for (std::size_t m = 0; m < size(); ++m)
            if (cell_contains(m, idx)) return m;
        return std::nullopt;
    }
};

namespace detail {

inline void guillotine(const ActiveSet& s, std::vector<std::size_t> members, MultiIndex lo, MultiIndex hi,
                       Tessellation& out) {
    if (members.size() == 1) {
        out.lower[members[0]] = lo;
        out.upper[members[0]] = hi;
        return;
    }
    const std::size_t d = s.shape.size();
    const std::size_t k = static_cast<std::size_t>(s.k);
    // pick the split that balances the two sides best, then the widest gap, then the lowest axis
    bool found = false;
    std::size_t best_axis = 0, best_cut = 0, best_imbalance = 0, best_gap = 0;
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<std::size_t> c;
        for (auto m : members) c.push_back(s.jumps[m][i]);
        std::sort(c.begin(), c.end());
        for (std::size_t p = 1; p < c.size(); ++p) {
            if (c[p] == c[p - 1]) continue;
            const std::size_t a_end = c[p - 1] + k - 1, b = c[p];
            if (b < a_end + 2) continue;
            const std::size_t imbalance = p > c.size() - p ? 2 * p - c.size() : c.size() - 2 * p;
            const std::size_t gap = b - a_end;
            if (!found || imbalance < best_imbalance || (imbalance == best_imbalance && gap > best_gap)) {
                found = true;
                best_axis = i;
                best_cut = (a_end + b) / 2;
                best_imbalance = imbalance;
                best_gap = gap;
            }
        }
    }
    if (!found) throw TessellationError("jump blocks too close to separate by a hyperrectangular cut");
    std::vector<std::size_t> left, right;
    for (auto m : members) (s.jumps[m][best_axis] < best_cut ? left : right).push_back(m);
    MultiIndex hl = hi, lr = lo;
    hl[best_axis] = best_cut;
    lr[best_axis] = best_cut;
    guillotine(s, left, lo, hl, out);
    guillotine(s, right, lr, hi, out);
}

}  // namespace detail

// Recursive midpoint cuts between jump blocks (odd gaps cut toward the lower index).
inline Tessellation tessellate(const ActiveSet& s) {
    s.validate();
    if (s.jumps.empty()) throw TessellationError("cannot tessellate an empty active set");
    {
        auto sorted = s.jumps;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw TessellationError("duplicate jump locations");
    }
    Tessellation t;
    t.active = s;
    t.lower.resize(s.size());
    t.upper.resize(s.size());
    const std::size_t d = s.shape.size();
    MultiIndex lo{std::vector<std::size_t>(d)}, hi{std::vector<std::size_t>(d)};
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = static_cast<std::size_t>(s.k) + 1;
        hi[i] = s.shape[i];
    }
    std::vector<std::size_t> all(s.size());
    for (std::size_t m = 0; m < s.size(); ++m) all[m] = m;
    detail::guillotine(s, all, lo, hi, t);
    return t;
}

// Independent check of the tessellation conditions; returns a description of every violation.
inline std::vector<std::string> validate_tessellation(const Tessellation& t) {
    std::vector<std::string> bad;
    const auto& s = t.active;
    const std::size_t d = s.shape.size(), k = static_cast<std::size_t>(s.k);
    for (std::size_t m = 0; m < t.size(); ++m)
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t tt = s.jumps[m][i];
            if (t.lower[m][i] < k + 1 || t.upper[m][i] > s.shape[i])
                bad.push_back("cell " + std::to_string(m) + " leaves the index box on axis " + std::to_string(i));
            if (!(t.lower[m][i] < tt && tt + k - 1 < t.upper[m][i]))
                bad.push_back("jump block " + std::to_string(m) + " not interior on axis " + std::to_string(i));
        }
    for (std::size_t a = 0; a < t.size(); ++a)
        for (std::size_t b = a + 1; b < t.size(); ++b) {
            bool overlap = true;
            for (std::size_t i = 0; i < d; ++i)
                overlap = overlap && std::max(t.lower[a][i], t.lower[b][i]) < std::min(t.upper[a][i], t.upper[b][i]);
            if (overlap) bad.push_back("cells " + std::to_string(a) + " and " + std::to_string(b) + " share interior");
        }
    Shape inner(d);
    for (std::size_t i = 0; i < d; ++i) inner[i] = s.shape[i] - k;
    MultiIndex r(std::vector<std::size_t>(d, 1));
    std::size_t uncovered = 0;
    do {
        MultiIndex j = r;
        for (std::size_t i = 0; i < d; ++i) j[i] += k;
        bool hit = false;
        for (std::size_t m = 0; m < t.size() && !hit; ++m) {
            bool in = true;
            for (std::size_t i = 0; i < d; ++i) in = in && j[i] >= t.lower[m][i] && j[i] <= t.upper[m][i];
            hit = in;
        }
        if (!hit) ++uncovered;
    } while (next_index(inner, r));
    if (uncovered) bad.push_back(std::to_string(uncovered) + " indices not covered");
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t dm = 0;
        for (std::size_t m = 0; m < t.size(); ++m) {
            dm = std::max(dm, s.jumps[m][i] - t.lower[m][i]);
            dm = std::max(dm, t.upper[m][i] + 1 - s.jumps[m][i] - k);
        }
        if (dm != t.d_max(i)) bad.push_back("d_max mismatch on axis " + std::to_string(i));
    }
    return bad;
}

// |{i : l_i <= z}| <= z for every z in [d]
inline bool in_mesh_tuple_set(const std::vector<std::size_t>& l) {
    const std::size_t d = l.size();
    for (std::size_t z = 1; z <= d; ++z) {
        std::size_t c = 0;
        for (auto v : l) c += v <= z;
        if (c > z) return false;
    }
    return true;
}

inline std::vector<std::vector<std::size_t>> mesh_tuple_set(std::size_t d) {
    std::vector<std::vector<std::size_t>> out;
    Shape box(d, d);
    MultiIndex l(std::vector<std::size_t>(d, 1));
    do {
        if (in_mesh_tuple_set(l.coords)) out.push_back(l.coords);
    } while (next_index(box, l));
    return out;
}

inline double harmonic_number(std::size_t d) {
    double h = 0.0;
    for (std::size_t i = 1; i <= d; ++i) h += 1.0 / static_cast<double>(i);
    return h;
}

struct MeshGrid {
    Shape shape;
    int k = 1;
    std::size_t delta = 1;
    // levels[i][l-1] = Z_i(l), sorted; Z_i(1) contains Z_i(2) contains ... Z_i(d)
    std::vector<std::vector<std::vector<std::size_t>>> levels;
    std::vector<std::vector<std::size_t>> tuples;
    IndexSet points;    // S
    IndexSet enlarged;  // S tilde

    std::size_t size() const { return points.size(); }
};

// Z_i(l) = {k + round(j L / p_l) : 0 < j < p_l}, L = n_i - 2k + 1, with p_d = delta + 1 and each
// p_l the multiple of p_{l+1} closest to delta^{d/l} + 1, so the levels nest exactly.
inline MeshGrid mesh_grid(const Shape& shape, int k, std::size_t delta) {
    check_shape(shape);
    if (k < 1) throw OrderError("order k must be at least 1");
    if (delta < 1) throw DomainError("delta must be positive");
    const std::size_t d = shape.size();
    std::vector<std::size_t> p(d + 1);
    p[d] = delta + 1;
    for (std::size_t l = d - 1; l >= 1; --l) {
        const double target = std::pow(static_cast<double>(delta), static_cast<double>(d) / l) + 1.0;
        const auto mult = std::max<long>(1, std::lround(target / static_cast<double>(p[l + 1])));
        p[l] = p[l + 1] * static_cast<std::size_t>(mult);
    }
    MeshGrid g;
    g.shape = shape;
    g.k = k;
    g.delta = delta;
    g.levels.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const long L = static_cast<long>(shape[i]) - 2 * k + 1;
        if (L < static_cast<long>(p[1]))
            throw DomainError("delta=" + std::to_string(delta) + " infeasible for extent " + std::to_string(shape[i]));
        for (std::size_t l = 1; l <= d; ++l) {
            std::vector<std::size_t> z;
            for (std::size_t j = 1; j < p[l]; ++j)
                z.push_back(static_cast<std::size_t>(
                    k + std::lround(static_cast<double>(j) * static_cast<double>(L) / static_cast<double>(p[l]))));
            g.levels[i].push_back(std::move(z));
        }
    }
    g.tuples = mesh_tuple_set(d);
    for (const auto& l : g.tuples) {
        Shape counts(d);
        for (std::size_t i = 0; i < d; ++i) counts[i] = g.levels[i][l[i] - 1].size();
        MultiIndex r(std::vector<std::size_t>(d, 1));
        do {
            MultiIndex t{std::vector<std::size_t>(d)};
            for (std::size_t i = 0; i < d; ++i) t[i] = g.levels[i][l[i] - 1][r[i] - 1];
            g.points.push_back(t);
        } while (next_index(counts, r));
    }
    normalize(g.points);
    g.enlarged = enlarge(g.points, shape, k);
    return g;
}

// One 1-based multi-index per line, coordinates separated by spaces.
inline void write_index_set(std::ostream& os, const std::vector<MultiIndex>& s) {
    for (const auto& idx : s) {
        for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? " " : "") << idx[i];
        os << '\n';
    }
}

inline std::vector<MultiIndex> read_index_set(std::istream& is) {
    std::vector<MultiIndex> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<std::size_t> c;
        long v;
        while (ls >> v) {
            if (v < 1) throw FormatError("line " + std::to_string(lineno) + ": indices are 1-based");
            c.push_back(static_cast<std::size_t>(v));
        }
        ls.clear();
        std::string rest;
        if (ls >> rest) throw FormatError("line " + std::to_string(lineno) + ": not an integer list");
        if (!out.empty() && c.size() != out.front().size())
            throw FormatError("line " + std::to_string(lineno) + ": rank differs from earlier lines");
        out.emplace_back(std::move(c));
    }
    return out;
}

}  // namespace vtf
