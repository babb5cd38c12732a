#include "risksea/propagator.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>

namespace risksea {

namespace {

// Shared by the parallel kernel and the serial reference, so the two can
// only differ in scheduling, never in arithmetic.
std::optional<std::vector<float>> propagate_id(NodeId id, const NeighborStoreReader& reader,
                                               const EmbeddingTable& core,
                                               StoreCursor& cursor, int sample_n,
                                               uint64_t seed) {
    const Address& addr = reader.addr(id);
    if (const float* own = core.lookup(addr))
        return std::vector<float>(own, own + core.dim());

    auto list = cursor.get(id);
    std::vector<const float*> hood;
    for (const auto& e : list->entries)
        if (const float* v = core.lookup(reader.addr(e.node))) hood.push_back(v);
    if (hood.empty()) return std::nullopt;

    size_t take = std::min<size_t>(sample_n, hood.size());
    Rng rng(mix64(seed, fnv1a64(addr)));
    rng.partial_shuffle(hood, take);

    std::vector<double> acc(core.dim(), 0.0);
    for (size_t i = 0; i < take; ++i)
        for (int j = 0; j < core.dim(); ++j) acc[j] += hood[i][j];
    std::vector<float> out(core.dim());
    for (int j = 0; j < core.dim(); ++j)
        out[j] = static_cast<float>(acc[j] / static_cast<double>(take));
    return out;
}

void check_sample_n(int sample_n) {
    if (sample_n < 1) throw ConfigError("propagation needs sample_n >= 1");
}

}  // namespace

std::string coverage_json(const CoverageReport& rep) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "{\"covered\": %zu, \"total\": %zu, \"fraction\": %.17g}",
                  rep.covered, rep.total, rep.fraction);
    return buf;
}

std::vector<Address> select_core_set(std::vector<Address> candidates, size_t size,
                                     uint64_t seed) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    if (size > candidates.size())
        throw ConfigError("core set size exceeds candidate count (" + std::to_string(size) +
                          " > " + std::to_string(candidates.size()) + ")");
    Rng rng(mix64(seed));
    rng.partial_shuffle(candidates, size);
    candidates.resize(size);
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

std::optional<std::vector<float>> propagate(const Address& addr,
                                            const EmbeddingTable& core_embeddings,
                                            StoreCursor& cursor, int sample_n,
                                            uint64_t seed) {
    check_sample_n(sample_n);
    if (const float* own = core_embeddings.lookup(addr))
        return std::vector<float>(own, own + core_embeddings.dim());
    auto id = cursor.reader().id_of(addr);
    if (!id) return std::nullopt;  // never transacted: no one-hop neighbors
    return propagate_id(*id, cursor.reader(), core_embeddings, cursor, sample_n, seed);
}

std::pair<EmbeddingTable, CoverageReport> propagate_all(
    const EmbeddingTable& core_embeddings, const NeighborStoreReader& reader,
    int sample_n, uint64_t seed, int workers) {
    check_sample_n(sample_n);
    if (workers < 1) throw ConfigError("workers must be >= 1");

    const size_t n = reader.node_count();
    std::vector<std::optional<std::vector<float>>> results(n);

#pragma omp parallel num_threads(workers)
    {
        StoreCursor cursor(reader, 8);
#pragma omp for schedule(dynamic, 64)
        for (long i = 0; i < static_cast<long>(n); ++i)
            results[i] = propagate_id(static_cast<NodeId>(i), reader, core_embeddings,
                                      cursor, sample_n, seed);
    }

    std::vector<EmbeddingTable::Row> rows;
    CoverageReport rep;
    rep.total = n;
    for (size_t i = 0; i < n; ++i) {
        if (!results[i]) continue;
        ++rep.covered;
        rows.push_back({reader.addr(static_cast<NodeId>(i)), std::move(*results[i])});
    }
    rep.fraction = n ? static_cast<double>(rep.covered) / static_cast<double>(n) : 0.0;
    return {EmbeddingTable::from_rows(core_embeddings.dim(), reader.snapshot_id(),
                                      std::move(rows)),
            rep};
}

std::pair<EmbeddingTable, CoverageReport> propagate_all_serial(
    const EmbeddingTable& core_embeddings, const NeighborStoreReader& reader,
    int sample_n, uint64_t seed) {
    check_sample_n(sample_n);
    StoreCursor cursor(reader, 8);
    std::vector<EmbeddingTable::Row> rows;
    CoverageReport rep;
    rep.total = reader.node_count();
    for (NodeId id = 0; id < reader.node_count(); ++id) {
        auto got = propagate_id(id, reader, core_embeddings, cursor, sample_n, seed);
        if (!got) continue;
        ++rep.covered;
        rows.push_back({reader.addr(id), std::move(*got)});
    }
    rep.fraction =
        rep.total ? static_cast<double>(rep.covered) / static_cast<double>(rep.total) : 0.0;
    return {EmbeddingTable::from_rows(core_embeddings.dim(), reader.snapshot_id(),
                                      std::move(rows)),
            rep};
}

}  // namespace risksea
