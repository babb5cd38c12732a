#include "risksea/walkgen.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>

namespace risksea {

namespace {

uint64_t walk_seed(uint64_t seed, const Address& source, int walk_index) {
    return mix64(seed, fnv1a64(source), static_cast<uint64_t>(walk_index));
}

// One biased step. prev_list may be null (first step).
NodeId pick_next(Rng& rng, const NeighborList& cur_list, NodeId prev,
                 const NeighborList* prev_list, double p, double q,
                 std::vector<double>& weight_buf) {
    weight_buf.clear();
    double total = 0.0;
    for (const auto& e : cur_list.entries) {
        double w = static_cast<double>(e.count);
        if (prev != kNoNode) {
            if (e.node == prev)
                w /= p;
            else if (prev_list && prev_list->has(e.node))
                ;  // distance 1: factor 1
            else
                w /= q;
        }
        weight_buf.push_back(w);
        total += w;
    }
    double x = rng.uniform_real() * total;
    double cum = 0.0;
    for (size_t i = 0; i < weight_buf.size(); ++i) {
        cum += weight_buf[i];
        if (x < cum) return cur_list.entries[i].node;
    }
    return cur_list.entries.back().node;  // guard against rounding at 1.0
}

void walk_from(StoreCursor& cursor, const NeighborStoreReader& reader, NodeId source,
               uint64_t stream_seed, int walk_length, double p, double q,
               std::vector<Address>& out) {
    Rng rng(stream_seed);
    std::vector<double> weight_buf;
    out.clear();
    out.push_back(reader.addr(source));

    NodeId prev = kNoNode;
    NeighborListPtr prev_list;
    NodeId cur = source;
    NeighborListPtr cur_list = cursor.get(cur);
    for (int step = 1; step < walk_length; ++step) {
        if (cur_list->entries.empty()) break;
        NodeId next = pick_next(rng, *cur_list, prev, prev_list.get(), p, q, weight_buf);
        out.push_back(reader.addr(next));
        prev = cur;
        prev_list = cur_list;
        cur = next;
        cur_list = cursor.get(cur);
    }
}

void check_params(const WalkParams& params) {
    if (params.num_walks < 1 || params.walk_length < 1)
        throw ConfigError("walk params need num_walks >= 1 and walk_length >= 1");
    if (params.return_param <= 0 || params.inout_param <= 0)
        throw ConfigError("walk params need p > 0 and q > 0");
}

std::vector<Address> canonical_sources(std::vector<Address> sources) {
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    return sources;
}

}  // namespace

std::vector<std::pair<Address, double>> transition_weights(
    const std::optional<Address>& prev, const Address& cur, StoreCursor& cursor,
    double p, double q) {
    if (p <= 0 || q <= 0) throw ConfigError("transition weights need p > 0 and q > 0");
    const auto& reader = cursor.reader();
    auto cur_id = reader.id_of(cur);
    if (!cur_id) return {};

    NodeId prev_id = kNoNode;
    NeighborListPtr prev_list;
    if (prev) {
        if (auto pid = reader.id_of(*prev)) {
            prev_id = *pid;
            prev_list = cursor.get(prev_id);
        }
    }
    auto cur_list = cursor.get(*cur_id);
    std::vector<std::pair<Address, double>> out;
    out.reserve(cur_list->entries.size());
    for (const auto& e : cur_list->entries) {
        double w = static_cast<double>(e.count);
        if (prev) {
            if (prev_id != kNoNode && e.node == prev_id)
                w /= p;
            else if (prev_list && prev_list->has(e.node))
                ;
            else
                w /= q;
        }
        out.emplace_back(reader.addr(e.node), w);
    }
    return out;
}

std::vector<Address> generate_walk(StoreCursor& cursor, const Address& source,
                                   const WalkParams& params, int walk_index) {
    check_params(params);
    const auto& reader = cursor.reader();
    auto id = reader.id_of(source);
    if (!id) return {source};
    std::vector<Address> out;
    walk_from(cursor, reader, *id, walk_seed(params.seed, source, walk_index),
              params.walk_length, params.return_param, params.inout_param, out);
    return out;
}

WalkCorpus generate_walks(const NeighborStoreReader& reader, std::vector<Address> sources,
                          const WalkParams& params, int workers, size_t cache_capacity) {
    check_params(params);
    if (workers < 1) throw ConfigError("workers must be >= 1");
    sources = canonical_sources(std::move(sources));

    const int r = params.num_walks;
    WalkCorpus corpus;
    corpus.walks.resize(sources.size() * static_cast<size_t>(r));

#pragma omp parallel num_threads(workers)
    {
        StoreCursor cursor(reader, cache_capacity);
#pragma omp for schedule(dynamic, 8)
        for (long i = 0; i < static_cast<long>(sources.size()); ++i) {
            const Address& src = sources[i];
            auto id = reader.id_of(src);
            for (int w = 0; w < r; ++w) {
                auto& slot = corpus.walks[static_cast<size_t>(i) * r + w];
                if (!id) {
                    slot = {src};
                    continue;
                }
                walk_from(cursor, reader, *id, walk_seed(params.seed, src, w),
                          params.walk_length, params.return_param, params.inout_param,
                          slot);
            }
        }
    }
    return corpus;
}

WalkCorpus generate_walks_serial(const NeighborStoreReader& reader,
                                 std::vector<Address> sources, const WalkParams& params,
                                 size_t cache_capacity) {
    check_params(params);
    sources = canonical_sources(std::move(sources));

    WalkCorpus corpus;
    corpus.walks.reserve(sources.size() * static_cast<size_t>(params.num_walks));
    StoreCursor cursor(reader, cache_capacity);
    std::vector<Address> walk;
    for (const Address& src : sources) {
        auto id = reader.id_of(src);
        for (int w = 0; w < params.num_walks; ++w) {
            if (!id) {
                corpus.walks.push_back({src});
                continue;
            }
            walk_from(cursor, reader, *id, walk_seed(params.seed, src, w),
                      params.walk_length, params.return_param, params.inout_param, walk);
            corpus.walks.push_back(walk);
        }
    }
    return corpus;
}

void WalkCorpus::save(const std::filesystem::path& path) const {
    std::string body;
    for (const auto& walk : walks) {
        for (size_t i = 0; i < walk.size(); ++i) {
            if (i) body += ' ';
            body += walk[i];
        }
        body += '\n';
    }
    atomic_write(path, body);
}

WalkCorpus WalkCorpus::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open walk corpus " + path.string());
    WalkCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<Address> walk;
        for (auto tok : split_view(line, ' '))
            if (!tok.empty()) walk.emplace_back(tok);
        corpus.walks.push_back(std::move(walk));
    }
    return corpus;
}

std::vector<Address> all_store_nodes(const NeighborStoreReader& reader) {
    std::vector<Address> out;
    out.reserve(reader.node_count());
    for (NodeId id = 0; id < reader.node_count(); ++id) out.push_back(reader.addr(id));
    return out;
}

}  // namespace risksea
