#pragma once

#include <optional>
#include <utility>

#include "risksea/embedder.hpp"
#include "risksea/txgraph.hpp"

namespace risksea {

struct CoverageReport {
    size_t covered = 0;
    size_t total = 0;
    double fraction = 0.0;
};

// Single-line JSON: {"covered": n, "total": m, "fraction": f}
std::string coverage_json(const CoverageReport& rep);

// Uniform sample without replacement from the candidates, seeded and
// deterministic. Result sorted ascending.
std::vector<Address> select_core_set(std::vector<Address> candidates, size_t size,
                                     uint64_t seed);

// One-hop propagation for a single address: identity for core members,
// otherwise the element-wise mean of up to sample_n sampled core neighbors
// (seeded by (seed, address)); nullopt (MISSING) when the address has no
// one-hop core neighbor.
std::optional<std::vector<float>> propagate(const Address& addr,
                                            const EmbeddingTable& core_embeddings,
                                            StoreCursor& cursor, int sample_n,
                                            uint64_t seed);

// Applies propagate to every node of the snapshot. Output is independent of
// the worker count; covered_fraction counts core pass-throughs too.
std::pair<EmbeddingTable, CoverageReport> propagate_all(
    const EmbeddingTable& core_embeddings, const NeighborStoreReader& reader,
    int sample_n, uint64_t seed, int workers);

// Serial reference implementation kept for equivalence tests and benchmarks.
std::pair<EmbeddingTable, CoverageReport> propagate_all_serial(
    const EmbeddingTable& core_embeddings, const NeighborStoreReader& reader,
    int sample_n, uint64_t seed);

}  // namespace risksea
