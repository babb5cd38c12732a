#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "risksea/txgraph.hpp"

namespace risksea {

struct WalkParams {
    int num_walks = 10;        // r: walks per source node
    int walk_length = 10;      // l: nodes per walk (not steps)
    double return_param = 1.0;  // p
    double inout_param = 1.0;   // q
    uint64_t seed = 0;
};

// Walks grouped by source: exactly num_walks entries per requested source,
// ordered by (source address asc, walk index asc).
struct WalkCorpus {
    std::vector<std::vector<Address>> walks;

    size_t size() const { return walks.size(); }
    bool empty() const { return walks.empty(); }

    // One walk per line, space separated. Canonical order is preserved.
    void save(const std::filesystem::path& path) const;
    static WalkCorpus load(const std::filesystem::path& path);
};

// Second-order node2vec bias. For each neighbor n of cur with interaction
// count w: weight = w/p when n == prev, w when n is a neighbor of prev,
// w/q otherwise; first step (no prev) uses the raw counts. Distances are
// evaluated against the truncated top-K lists. Returns store list order;
// empty when cur is absent.
std::vector<std::pair<Address, double>> transition_weights(
    const std::optional<Address>& prev, const Address& cur, StoreCursor& cursor,
    double p, double q);

// The RNG stream is a pure function of (params.seed, source address,
// walk_index), so corpora do not depend on scheduling.
std::vector<Address> generate_walk(StoreCursor& cursor, const Address& source,
                                   const WalkParams& params, int walk_index);

// OpenMP kernel: sources are deduplicated and sorted, walks land in
// preassigned slots, output is identical for any worker count.
WalkCorpus generate_walks(const NeighborStoreReader& reader, std::vector<Address> sources,
                          const WalkParams& params, int workers,
                          size_t cache_capacity = 64);

// Serial reference implementation, kept for byte-for-byte comparison tests
// and the benchmark baseline.
WalkCorpus generate_walks_serial(const NeighborStoreReader& reader,
                                 std::vector<Address> sources, const WalkParams& params,
                                 size_t cache_capacity = 64);

// All store nodes, ascending: the bootstrap source set.
std::vector<Address> all_store_nodes(const NeighborStoreReader& reader);

}  // namespace risksea
