#include "fusetrack/crf.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace fusetrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::pair<int, int> ordered(int i, int j) {
    return i < j ? std::make_pair(i, j) : std::make_pair(j, i);
}

// Lexicographic order on the bit sequence (s_0, s_1, ...).
bool lex_less(const std::vector<bool>& a, const std::vector<bool>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != b[k]) return !a[k];
    }
    return false;
}

// (energy, count, lex) total order used for every tie-break in this module.
bool better(double ea, const std::vector<bool>& sa, std::size_t ca,
            double eb, const std::vector<bool>& sb, std::size_t cb) {
    if (ea != eb) return ea < eb;
    if (ca != cb) return ca < cb;
    return lex_less(sa, sb);
}

struct VecBoolHash {
    std::size_t operator()(const std::vector<bool>& v) const {
        return std::hash<std::vector<bool>>{}(v);
    }
};

}  // namespace

void EnergyGraph::check_index(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= unaries_.size())
        throw std::invalid_argument("EnergyGraph: node index out of range");
}

void EnergyGraph::add_pairwise(int i, int j, double p) {
    check_index(i);
    check_index(j);
    if (i == j) throw std::invalid_argument("EnergyGraph: pairwise needs two distinct nodes");
    pairwise_[ordered(i, j)] += p;
    adj_dirty_ = true;
}

void EnergyGraph::add_exclusion(int i, int j) {
    check_index(i);
    check_index(j);
    if (i == j) throw std::invalid_argument("EnergyGraph: exclusion needs two distinct nodes");
    exclusions_.insert(ordered(i, j));
    adj_dirty_ = true;
}

void EnergyGraph::rebuild_adjacency() const {
    adj_.assign(unaries_.size(), {});
    excl_adj_.assign(unaries_.size(), {});
    for (const auto& [key, p] : pairwise_) {
        adj_[static_cast<std::size_t>(key.first)].emplace_back(key.second, p);
        adj_[static_cast<std::size_t>(key.second)].emplace_back(key.first, p);
    }
    for (const auto& [i, j] : exclusions_) {
        excl_adj_[static_cast<std::size_t>(i)].push_back(j);
        excl_adj_[static_cast<std::size_t>(j)].push_back(i);
    }
    adj_dirty_ = false;
}

const std::vector<std::pair<int, double>>& EnergyGraph::neighbors(int i) const {
    check_index(i);
    if (adj_dirty_) rebuild_adjacency();
    return adj_[static_cast<std::size_t>(i)];
}

const std::vector<int>& EnergyGraph::excluded(int i) const {
    check_index(i);
    if (adj_dirty_) rebuild_adjacency();
    return excl_adj_[static_cast<std::size_t>(i)];
}

std::size_t Selection::count() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

double energy_of(const EnergyGraph& graph, const std::vector<bool>& selected) {
    if (selected.size() != graph.size())
        throw std::invalid_argument("energy_of: bit vector length mismatch");
    for (const auto& [i, j] : graph.exclusions()) {
        if (selected[static_cast<std::size_t>(i)] && selected[static_cast<std::size_t>(j)])
            return kInf;
    }
    double e = 0.0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (selected[i]) e += graph.unary(static_cast<int>(i));
    }
    for (const auto& [key, p] : graph.pairwise()) {
        if (selected[static_cast<std::size_t>(key.first)] &&
            selected[static_cast<std::size_t>(key.second)])
            e += p;
    }
    return e;
}

Selection solve_exhaustive(const EnergyGraph& graph) {
    const std::size_t n = graph.size();
    if (n > 25) throw std::invalid_argument("solve_exhaustive: refusing more than 25 nodes");

    std::vector<bool> best(n, false);
    double best_e = 0.0;
    std::size_t best_count = 0;

    std::vector<bool> cur(n, false);
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t mask = 1; mask < total; ++mask) {
        for (std::size_t i = 0; i < n; ++i) cur[i] = (mask >> i) & 1u;
        const double e = energy_of(graph, cur);
        if (e == kInf) continue;
        const std::size_t c = static_cast<std::size_t>(__builtin_popcountll(mask));
        if (better(e, cur, c, best_e, best, best_count)) {
            best = cur;
            best_e = e;
            best_count = c;
        }
    }
    return {best, best_e};
}

namespace {

struct BeamState {
    std::vector<bool> sel;
    double energy = 0.0;
    std::size_t count = 0;
};

bool feasible_to_add(const EnergyGraph& g, const std::vector<bool>& sel, int i) {
    for (int j : g.excluded(i)) {
        if (sel[static_cast<std::size_t>(j)]) return false;
    }
    return true;
}

double add_delta(const EnergyGraph& g, const std::vector<bool>& sel, int i) {
    double d = g.unary(i);
    for (const auto& [j, p] : g.neighbors(i)) {
        if (sel[static_cast<std::size_t>(j)]) d += p;
    }
    return d;
}

// Beam search over strictly improving single-node additions.
BeamState beam_run(const EnergyGraph& g, int width) {
    const std::size_t n = g.size();
    BeamState best{std::vector<bool>(n, false), 0.0, 0};
    std::vector<BeamState> beam{best};
    std::unordered_set<std::vector<bool>, VecBoolHash> seen{best.sel};

    for (std::size_t step = 0; step < n; ++step) {
        std::vector<BeamState> candidates;
        for (const BeamState& s : beam) {
            for (int i = 0; i < static_cast<int>(n); ++i) {
                if (s.sel[static_cast<std::size_t>(i)]) continue;
                if (!feasible_to_add(g, s.sel, i)) continue;
                const double d = add_delta(g, s.sel, i);
                if (d >= 0.0) continue;  // only strictly improving flips
                BeamState next = s;
                next.sel[static_cast<std::size_t>(i)] = true;
                next.energy += d;
                next.count += 1;
                if (!seen.insert(next.sel).second) continue;
                candidates.push_back(std::move(next));
            }
        }
        if (candidates.empty()) break;
        std::sort(candidates.begin(), candidates.end(), [](const BeamState& a, const BeamState& b) {
            return better(a.energy, a.sel, a.count, b.energy, b.sel, b.count);
        });
        if (candidates.size() > static_cast<std::size_t>(width)) candidates.resize(static_cast<std::size_t>(width));
        if (better(candidates.front().energy, candidates.front().sel, candidates.front().count,
                   best.energy, best.sel, best.count)) {
            best = candidates.front();
        }
        beam = std::move(candidates);
    }
    return best;
}

// One in-order pass of single-bit flips, applied when strictly improving.
void one_flip_pass(const EnergyGraph& g, BeamState& s) {
    const std::size_t n = g.size();
    for (int i = 0; i < static_cast<int>(n); ++i) {
        const bool on = s.sel[static_cast<std::size_t>(i)];
        double d;
        if (on) {
            // Removing i drops its unary and its pairwise to the rest.
            d = -g.unary(i);
            for (const auto& [j, p] : g.neighbors(i)) {
                if (s.sel[static_cast<std::size_t>(j)]) d -= p;
            }
        } else {
            if (!feasible_to_add(g, s.sel, i)) continue;
            d = add_delta(g, s.sel, i);
        }
        if (d < 0.0) {
            s.sel[static_cast<std::size_t>(i)] = !on;
            s.energy += d;
            s.count += on ? -1 : 1;
        }
    }
}

}  // namespace

Selection solve_multibranch(const EnergyGraph& graph, int branches) {
    if (branches < 1) throw std::invalid_argument("solve_multibranch: branches must be >= 1");

    BeamState best{std::vector<bool>(graph.size(), false), 0.0, 0};
    // Running every width up to `branches` keeps the result monotone in the
    // branch count; a single beam width does not guarantee that.
    for (int w = 1; w <= branches; ++w) {
        BeamState s = beam_run(graph, w);
        one_flip_pass(graph, s);
        if (better(s.energy, s.sel, s.count, best.energy, best.sel, best.count)) best = s;
    }
    // Report the energy recomputed from scratch so it matches energy_of.
    return {best.sel, energy_of(graph, best.sel)};
}

}  // namespace fusetrack
