#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "risksea/common.hpp"

namespace risksea {

enum class AssetKind { Native, Token };

struct Asset {
    AssetKind kind = AssetKind::Native;
    std::string token_id;  // set iff kind == Token

    static std::optional<Asset> parse(std::string_view s);
    std::string str() const;
    bool operator==(const Asset&) const = default;
};

// One directed value transfer. Invariants: timestamp > 0, endpoints
// non-empty, amount >= 0 and finite.
struct TransactionRecord {
    int64_t timestamp = 0;
    Address from_addr;
    Address to_addr;
    double amount = 0.0;
    Asset asset;
};

// Parses one CSV row `timestamp,from,to,amount,asset`. Returns nullopt for
// anything violating the record invariants; callers count those as rejected.
std::optional<TransactionRecord> parse_edge_row(std::string_view line);
std::string format_edge_row(const TransactionRecord& r);

struct IngestReport {
    uint64_t new_nodes = 0;
    uint64_t new_edges = 0;
    uint64_t rejected = 0;
    std::vector<uint64_t> rejected_lines;  // 1-based, capped at 100 entries
};

// Cumulative view of the append-only log up to a snapshot.
struct GraphSnapshot {
    uint32_t snapshot_id = 0;
    int64_t time_upper_bound = 0;
    uint64_t node_count = 0;  // distinct endpoints across snapshots <= id
    uint64_t edge_count = 0;  // raw transactions across snapshots <= id
};

// Append-only edge log: one CSV file per snapshot plus a meta sidecar.
// Snapshots are cumulative views; nothing is ever rewritten.
class EdgeLog {
  public:
    explicit EdgeLog(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }
    uint32_t latest_snapshot() const;  // 0 when the log is empty

    // Appends one batch as snapshot `snapshot_id` (must be latest+1).
    // Rows are validated, sorted by timestamp, and re-serialized in the
    // canonical format. Malformed rows are counted, never fatal.
    // `time_upper_bound`: window bound for this snapshot; defaults to
    // max(batch timestamps, previous bound).
    IngestReport ingest_csv(const std::filesystem::path& csv, uint32_t snapshot_id,
                            std::optional<int64_t> time_upper_bound = {});
    IngestReport ingest_records(std::vector<TransactionRecord> records,
                                uint32_t snapshot_id,
                                std::optional<int64_t> time_upper_bound = {});

    GraphSnapshot snapshot_meta(uint32_t snapshot_id) const;

    // Streams every record of snapshots 1..up_to_id in file order.
    void for_each_record(
        uint32_t up_to_id,
        const std::function<void(const TransactionRecord&)>& fn) const;

    // Endpoints of transactions with timestamp in
    // (bound(prev_id), bound(cur_id)], sorted ascending.
    std::vector<Address> delta_nodes(uint32_t prev_id, uint32_t cur_id) const;

    std::filesystem::path snapshot_csv_path(uint32_t id) const;
    std::filesystem::path snapshot_meta_path(uint32_t id) const;

  private:
    std::filesystem::path dir_;
};

// --- Partitioned top-K neighbor store ------------------------------------

struct NeighborStoreParams {
    int k = 200;  // top-K neighbors kept per node
    int p = 64;   // partition file count
};

// Builds the partition files for `snapshot_id` under `store_dir`:
// part_%05d.txt with lines `node|neighbor:count,...`, neighbor lists sorted
// by (count desc, address asc) and truncated to K, node lines sorted by
// address. The walk graph is undirected: a transaction contributes to the
// interaction count of the pair in both node's lists. Self-transfers carry
// no neighbor information and are skipped.
void build_neighbor_store(const EdgeLog& log, uint32_t snapshot_id,
                          NeighborStoreParams params,
                          const std::filesystem::path& store_dir);

using NodeId = uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

struct NeighborEntry {
    NodeId node;
    uint32_t count;
};

struct NeighborList {
    std::vector<NeighborEntry> entries;  // store order: count desc, addr asc
    std::vector<NodeId> sorted_ids;      // same ids, ascending, for membership

    bool has(NodeId id) const {
        auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
        return it != sorted_ids.end() && *it == id;
    }
};

using NeighborListPtr = std::shared_ptr<const NeighborList>;

// Read access to a built store. The reader keeps only an index
// (node -> partition/offset) in memory; neighbor lists are loaded on demand
// through StoreCursor and their residency is counted, which is how the
// "walks never hold the graph in memory" contract is enforced and tested.
class NeighborStoreReader {
  public:
    explicit NeighborStoreReader(std::filesystem::path store_dir);

    size_t node_count() const { return nodes_.size(); }
    const Address& addr(NodeId id) const { return nodes_[id]; }
    std::optional<NodeId> id_of(std::string_view addr) const;
    uint32_t snapshot_id() const { return snapshot_id_; }
    int k() const { return k_; }
    int partitions() const { return p_; }

    // Residency instrumentation (lists currently alive anywhere).
    int resident_lists() const { return resident_.load(); }
    int resident_high_water() const { return high_water_.load(); }
    void reset_high_water() { high_water_.store(resident_.load()); }

  private:
    friend class StoreCursor;
    struct LineRef {
        uint32_t partition;
        uint64_t offset;
        uint32_t length;
    };

    NeighborListPtr load_list(NodeId id, std::ifstream& stream_for_part) const;
    void note_loaded() const;

    std::filesystem::path dir_;
    std::vector<Address> nodes_;  // ascending; NodeId = index
    std::vector<LineRef> lines_;
    uint32_t snapshot_id_ = 0;
    int k_ = 0;
    int p_ = 0;
    mutable std::atomic<int> resident_{0};
    mutable std::atomic<int> high_water_{0};
};

// Per-worker access path: private file handles plus a bounded LRU of
// neighbor lists. Distinct lists alive per cursor never exceed
// capacity + 1 (the +1 is a fresh load before the LRU evicts).
class StoreCursor {
  public:
    StoreCursor(const NeighborStoreReader& reader, size_t lru_capacity = 64);

    NeighborListPtr get(NodeId id);
    const NeighborStoreReader& reader() const { return reader_; }

  private:
    const NeighborStoreReader& reader_;
    size_t capacity_;
    std::list<std::pair<NodeId, NeighborListPtr>> lru_;
    std::unordered_map<NodeId, decltype(lru_)::iterator> index_;
    std::vector<std::unique_ptr<std::ifstream>> files_;
};

}  // namespace risksea
