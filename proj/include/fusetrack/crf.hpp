#ifndef FUSETRACK_CRF_HPP
#define FUSETRACK_CRF_HPP

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace fusetrack {

/// Binary pairwise energy  E(s) = sum_i s_i u_i + sum_{i<j} s_i s_j p_ij,
/// with an optional set of hard-exclusion pairs that may never be selected
/// together. Exclusions are kept explicit instead of big-M penalties so
/// infeasibility is exact.
class EnergyGraph {
public:
    EnergyGraph() = default;
    explicit EnergyGraph(std::size_t node_count) : unaries_(node_count, 0.0) {}

    std::size_t size() const { return unaries_.size(); }

    int add_node(double unary) {
        unaries_.push_back(unary);
        return static_cast<int>(unaries_.size()) - 1;
    }
    void set_unary(int i, double u) { unaries_.at(static_cast<std::size_t>(i)) = u; }
    double unary(int i) const { return unaries_.at(static_cast<std::size_t>(i)); }

    void add_pairwise(int i, int j, double p);
    void add_exclusion(int i, int j);

    const std::map<std::pair<int, int>, double>& pairwise() const { return pairwise_; }
    const std::set<std::pair<int, int>>& exclusions() const { return exclusions_; }

    /// Neighbors of `i` in the pairwise term, with weights.
    const std::vector<std::pair<int, double>>& neighbors(int i) const;
    /// Nodes excluded against `i`.
    const std::vector<int>& excluded(int i) const;

private:
    void check_index(int i) const;

    std::vector<double> unaries_;
    std::map<std::pair<int, int>, double> pairwise_;
    std::set<std::pair<int, int>> exclusions_;
    mutable std::vector<std::vector<std::pair<int, double>>> adj_;
    mutable std::vector<std::vector<int>> excl_adj_;
    mutable bool adj_dirty_ = true;
    void rebuild_adjacency() const;
};

struct Selection {
    std::vector<bool> selected;
    double energy = 0.0;

    std::size_t count() const;
};

/// Energy of a labeling; +infinity if an exclusion pair is fully selected.
/// Throws std::invalid_argument on a length mismatch.
double energy_of(const EnergyGraph& graph, const std::vector<bool>& selected);

/// Global optimum by enumeration. Ties break toward fewer selected nodes,
/// then the lexicographically smallest bit vector. Refuses graphs with more
/// than 25 nodes (throws std::invalid_argument).
Selection solve_exhaustive(const EnergyGraph& graph);

/// Approximate minimizer: beam search over single-node additions starting
/// from the empty selection, beam width `branches`, followed by one pass of
/// single-bit flip improvement. Internally the search is run at every width
/// up to `branches` and the best result is kept, which makes the returned
/// energy non-increasing in `branches`. Never selects an exclusion pair;
/// returned energy is always <= 0.
Selection solve_multibranch(const EnergyGraph& graph, int branches = 8);

}  // namespace fusetrack

#endif
