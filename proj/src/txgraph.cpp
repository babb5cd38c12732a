#include "risksea/txgraph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace risksea {

namespace fs = std::filesystem;
using nlohmann::json;

// --- records ---------------------------------------------------------------

std::optional<Asset> Asset::parse(std::string_view s) {
    if (s == "ETH") return Asset{AssetKind::Native, {}};
    constexpr std::string_view prefix = "ERC20:";
    if (s.size() > prefix.size() && s.substr(0, prefix.size()) == prefix) {
        return Asset{AssetKind::Token, std::string(s.substr(prefix.size()))};
    }
    return std::nullopt;
}

std::string Asset::str() const {
    return kind == AssetKind::Native ? "ETH" : "ERC20:" + token_id;
}

namespace {

// Addresses end up in '|'/','/':'-delimited store lines; rows whose
// endpoints would break that framing are malformed.
bool valid_address(std::string_view a) {
    if (a.empty()) return false;
    for (char c : a) {
        if (c == '|' || c == ',' || c == ':' || std::isspace(static_cast<unsigned char>(c)))
            return false;
    }
    return true;
}

}  // namespace

std::optional<TransactionRecord> parse_edge_row(std::string_view line) {
    auto fields = split_view(line, ',');
    // ERC20 token ids may not contain ',', so exactly 5 fields.
    if (fields.size() != 5) return std::nullopt;

    TransactionRecord r;
    auto ts = fields[0];
    auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), r.timestamp);
    if (ec != std::errc() || p != ts.data() + ts.size() || r.timestamp <= 0)
        return std::nullopt;

    if (!valid_address(fields[1]) || !valid_address(fields[2])) return std::nullopt;
    r.from_addr = std::string(fields[1]);
    r.to_addr = std::string(fields[2]);

    std::string amt(fields[3]);
    char* end = nullptr;
    r.amount = std::strtod(amt.c_str(), &end);
    if (end != amt.c_str() + amt.size() || amt.empty() || !std::isfinite(r.amount) ||
        r.amount < 0)
        return std::nullopt;

    auto asset = Asset::parse(fields[4]);
    if (!asset) return std::nullopt;
    r.asset = *asset;
    return r;
}

std::string format_edge_row(const TransactionRecord& r) {
    char amt[32];
    std::snprintf(amt, sizeof(amt), "%.17g", r.amount);
    std::string out;
    out += std::to_string(r.timestamp);
    out += ',';
    out += r.from_addr;
    out += ',';
    out += r.to_addr;
    out += ',';
    out += amt;
    out += ',';
    out += r.asset.str();
    return out;
}

// --- edge log ----------------------------------------------------------------

fs::path EdgeLog::snapshot_csv_path(uint32_t id) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snap_%06u.csv", id);
    return dir_ / buf;
}

fs::path EdgeLog::snapshot_meta_path(uint32_t id) const {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "snap_%06u.meta.json", id);
    return dir_ / buf;
}

uint32_t EdgeLog::latest_snapshot() const {
    uint32_t latest = 0;
    while (fs::exists(snapshot_meta_path(latest + 1))) ++latest;
    return latest;
}

GraphSnapshot EdgeLog::snapshot_meta(uint32_t snapshot_id) const {
    auto p = snapshot_meta_path(snapshot_id);
    std::ifstream in(p);
    if (!in) throw DataError("missing edge log snapshot " + std::to_string(snapshot_id) +
                             " (" + p.string() + ")");
    json j = json::parse(in);
    GraphSnapshot s;
    s.snapshot_id = j.at("snapshot_id").get<uint32_t>();
    s.time_upper_bound = j.at("time_upper_bound").get<int64_t>();
    s.node_count = j.at("node_count").get<uint64_t>();
    s.edge_count = j.at("edge_count").get<uint64_t>();
    return s;
}

IngestReport EdgeLog::ingest_csv(const fs::path& csv, uint32_t snapshot_id,
                                 std::optional<int64_t> time_upper_bound) {
    std::ifstream in(csv);
    if (!in) throw DataError("cannot open edge file " + csv.string());

    std::vector<TransactionRecord> records;
    IngestReport pre;
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("timestamp,", 0) == 0) continue;  // header
        if (line.empty()) continue;
        auto rec = parse_edge_row(line);
        if (!rec) {
            ++pre.rejected;
            if (pre.rejected_lines.size() < 100) pre.rejected_lines.push_back(lineno);
            continue;
        }
        records.push_back(std::move(*rec));
    }
    IngestReport rep = ingest_records(std::move(records), snapshot_id, time_upper_bound);
    rep.rejected += pre.rejected;
    rep.rejected_lines.insert(rep.rejected_lines.end(), pre.rejected_lines.begin(),
                              pre.rejected_lines.end());
    return rep;
}

IngestReport EdgeLog::ingest_records(std::vector<TransactionRecord> records,
                                     uint32_t snapshot_id,
                                     std::optional<int64_t> time_upper_bound) {
    uint32_t latest = latest_snapshot();
    if (snapshot_id != latest + 1)
        throw ConfigError("snapshot_id must be latest+1 (latest=" + std::to_string(latest) +
                          ", got " + std::to_string(snapshot_id) + ")");

    std::stable_sort(records.begin(), records.end(),
                     [](const TransactionRecord& a, const TransactionRecord& b) {
                         return a.timestamp < b.timestamp;
                     });

    // Prior node set, to count genuinely new endpoints.
    std::unordered_set<Address> seen;
    uint64_t prev_edges = 0;
    int64_t prev_bound = 0;
    if (latest > 0) {
        for_each_record(latest, [&](const TransactionRecord& r) {
            seen.insert(r.from_addr);
            seen.insert(r.to_addr);
        });
        GraphSnapshot prev = snapshot_meta(latest);
        prev_edges = prev.edge_count;
        prev_bound = prev.time_upper_bound;
    }

    IngestReport rep;
    int64_t batch_max_ts = prev_bound;
    std::string body;
    body.reserve(records.size() * 64);
    for (const auto& r : records) {
        if (seen.insert(r.from_addr).second) ++rep.new_nodes;
        if (seen.insert(r.to_addr).second) ++rep.new_nodes;
        ++rep.new_edges;
        batch_max_ts = std::max(batch_max_ts, r.timestamp);
        body += format_edge_row(r);
        body += '\n';
    }

    int64_t bound = time_upper_bound.value_or(batch_max_ts);
    if (bound < prev_bound)
        throw ConfigError("time_upper_bound must be non-decreasing across snapshots");

    json meta;
    meta["snapshot_id"] = snapshot_id;
    meta["time_upper_bound"] = bound;
    meta["node_count"] = seen.size();
    meta["edge_count"] = prev_edges + rep.new_edges;
    meta["new_nodes"] = rep.new_nodes;
    meta["new_edges"] = rep.new_edges;
    meta["rejected"] = rep.rejected;

    atomic_write(snapshot_csv_path(snapshot_id), body);
    atomic_write(snapshot_meta_path(snapshot_id), meta.dump(2) + "\n");
    return rep;
}

void EdgeLog::for_each_record(
    uint32_t up_to_id, const std::function<void(const TransactionRecord&)>& fn) const {
    for (uint32_t id = 1; id <= up_to_id; ++id) {
        auto p = snapshot_csv_path(id);
        std::ifstream in(p);
        if (!in)
            throw DataError("missing edge log snapshot " + std::to_string(id) + " (" +
                            p.string() + ")");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto rec = parse_edge_row(line);
            if (!rec) throw DataError("corrupt edge log line in " + p.string());
            fn(*rec);
        }
    }
}

std::vector<Address> EdgeLog::delta_nodes(uint32_t prev_id, uint32_t cur_id) const {
    if (prev_id >= cur_id)
        throw ConfigError("delta requires prev_id < cur_id (got " + std::to_string(prev_id) +
                          ", " + std::to_string(cur_id) + ")");
    int64_t lo = snapshot_meta(prev_id).time_upper_bound;
    int64_t hi = snapshot_meta(cur_id).time_upper_bound;
    std::set<Address> out;
    for_each_record(cur_id, [&](const TransactionRecord& r) {
        if (r.timestamp > lo && r.timestamp <= hi) {
            out.insert(r.from_addr);
            out.insert(r.to_addr);
        }
    });
    return {out.begin(), out.end()};
}

// --- neighbor store build ----------------------------------------------------

void build_neighbor_store(const EdgeLog& log, uint32_t snapshot_id,
                          NeighborStoreParams params, const fs::path& store_dir) {
    if (params.k < 1 || params.p < 1) throw ConfigError("neighbor store needs K >= 1, P >= 1");

    // Intern addresses; count undirected pair interactions.
    std::unordered_map<Address, uint32_t> intern;
    std::vector<Address> addrs;
    auto intern_of = [&](const Address& a) {
        auto [it, fresh] = intern.emplace(a, static_cast<uint32_t>(addrs.size()));
        if (fresh) addrs.push_back(a);
        return it->second;
    };
    std::unordered_map<uint64_t, uint32_t> pair_count;
    uint64_t tx_count = 0;
    log.for_each_record(snapshot_id, [&](const TransactionRecord& r) {
        ++tx_count;
        if (r.from_addr == r.to_addr) return;  // self-transfers carry no structure
        uint32_t a = intern_of(r.from_addr);
        uint32_t b = intern_of(r.to_addr);
        uint64_t key = a < b ? (static_cast<uint64_t>(a) << 32) | b
                             : (static_cast<uint64_t>(b) << 32) | a;
        ++pair_count[key];
    });

    std::vector<std::vector<NeighborEntry>> adj(addrs.size());
    for (auto [key, cnt] : pair_count) {
        uint32_t a = static_cast<uint32_t>(key >> 32);
        uint32_t b = static_cast<uint32_t>(key & 0xffffffffu);
        adj[a].push_back({b, cnt});
        adj[b].push_back({a, cnt});
    }

    // Nodes per partition, ordered by address.
    std::vector<uint32_t> order(addrs.size());
    for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](uint32_t x, uint32_t y) { return addrs[x] < addrs[y]; });

    std::vector<std::string> part_body(params.p);
    size_t kept_nodes = 0;
    for (uint32_t id : order) {
        auto& lst = adj[id];
        if (lst.empty()) continue;
        std::sort(lst.begin(), lst.end(), [&](const NeighborEntry& x, const NeighborEntry& y) {
            if (x.count != y.count) return x.count > y.count;
            return addrs[x.node] < addrs[y.node];
        });
        if (lst.size() > static_cast<size_t>(params.k)) lst.resize(params.k);
        ++kept_nodes;
        std::string& body = part_body[fnv1a64(addrs[id]) % params.p];
        body += addrs[id];
        body += '|';
        for (size_t i = 0; i < lst.size(); ++i) {
            if (i) body += ',';
            body += addrs[lst[i].node];
            body += ':';
            body += std::to_string(lst[i].count);
        }
        body += '\n';
    }

    fs::create_directories(store_dir);
    for (int p = 0; p < params.p; ++p) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "part_%05d.txt", p);
        atomic_write(store_dir / buf, part_body[p]);
    }
    json meta;
    meta["snapshot_id"] = snapshot_id;
    meta["k"] = params.k;
    meta["p"] = params.p;
    meta["nodes"] = kept_nodes;
    meta["transactions"] = tx_count;
    meta["time_upper_bound"] = log.snapshot_meta(snapshot_id).time_upper_bound;
    atomic_write(store_dir / "meta.json", meta.dump(2) + "\n");
}

// --- neighbor store read path --------------------------------------------------

NeighborStoreReader::NeighborStoreReader(fs::path store_dir) : dir_(std::move(store_dir)) {
    std::ifstream meta_in(dir_ / "meta.json");
    if (!meta_in) throw DataError("not a neighbor store (no meta.json): " + dir_.string());
    json meta = json::parse(meta_in);
    snapshot_id_ = meta.at("snapshot_id").get<uint32_t>();
    k_ = meta.at("k").get<int>();
    p_ = meta.at("p").get<int>();

    // One scan to index every node line; only addresses and offsets stay
    // in memory, the lists themselves do not.
    struct Tmp {
        Address addr;
        LineRef ref;
    };
    std::vector<Tmp> tmp;
    for (int p = 0; p < p_; ++p) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "part_%05d.txt", p);
        std::ifstream in(dir_ / buf, std::ios::binary);
        if (!in) throw DataError("missing partition file in " + dir_.string());
        std::string line;
        uint64_t offset = 0;
        while (std::getline(in, line)) {
            uint64_t len = line.size();
            auto bar = line.find('|');
            if (bar == std::string::npos) throw DataError("corrupt partition line");
            tmp.push_back({line.substr(0, bar),
                           {static_cast<uint32_t>(p), offset, static_cast<uint32_t>(len)}});
            offset += len + 1;
        }
    }
    std::sort(tmp.begin(), tmp.end(), [](const Tmp& a, const Tmp& b) { return a.addr < b.addr; });
    nodes_.reserve(tmp.size());
    lines_.reserve(tmp.size());
    for (auto& t : tmp) {
        nodes_.push_back(std::move(t.addr));
        lines_.push_back(t.ref);
    }
}

std::optional<NodeId> NeighborStoreReader::id_of(std::string_view addr) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), addr);
    if (it == nodes_.end() || *it != addr) return std::nullopt;
    return static_cast<NodeId>(it - nodes_.begin());
}

void NeighborStoreReader::note_loaded() const {
    int now = resident_.fetch_add(1) + 1;
    int hw = high_water_.load();
    while (now > hw && !high_water_.compare_exchange_weak(hw, now)) {
    }
}

NeighborListPtr NeighborStoreReader::load_list(NodeId id, std::ifstream& in) const {
    const LineRef& ref = lines_[id];
    in.clear();
    in.seekg(static_cast<std::streamoff>(ref.offset));
    std::string line(ref.length, '\0');
    in.read(line.data(), ref.length);
    if (in.gcount() != static_cast<std::streamsize>(ref.length))
        throw DataError("short read from partition file");

    auto bar = line.find('|');
    auto* list = new NeighborList();
    if (bar + 1 < line.size()) {
        for (auto item : split_view(std::string_view(line).substr(bar + 1), ',')) {
            auto colon = item.rfind(':');
            if (colon == std::string_view::npos) throw DataError("corrupt neighbor entry");
            auto nid = id_of(item.substr(0, colon));
            if (!nid) throw DataError("neighbor not present in store index");
            uint32_t cnt = 0;
            auto cs = item.substr(colon + 1);
            std::from_chars(cs.data(), cs.data() + cs.size(), cnt);
            list->entries.push_back({*nid, cnt});
        }
    }
    list->sorted_ids.reserve(list->entries.size());
    for (const auto& e : list->entries) list->sorted_ids.push_back(e.node);
    std::sort(list->sorted_ids.begin(), list->sorted_ids.end());

    note_loaded();
    return NeighborListPtr(list, [this](const NeighborList* l) {
        resident_.fetch_sub(1);
        delete l;
    });
}

StoreCursor::StoreCursor(const NeighborStoreReader& reader, size_t lru_capacity)
    : reader_(reader), capacity_(std::max<size_t>(lru_capacity, 2)) {
    files_.resize(reader.partitions());
}

NeighborListPtr StoreCursor::get(NodeId id) {
    auto hit = index_.find(id);
    if (hit != index_.end()) {
        lru_.splice(lru_.begin(), lru_, hit->second);
        return lru_.front().second;
    }
    uint32_t part = reader_.lines_[id].partition;
    auto& file = files_[part];
    if (!file) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "part_%05d.txt", part);
        file = std::make_unique<std::ifstream>(reader_.dir_ / buf, std::ios::binary);
        if (!*file) throw DataError("cannot open partition file " + std::string(buf));
    }
    NeighborListPtr ptr = reader_.load_list(id, *file);
    lru_.emplace_front(id, ptr);
    index_[id] = lru_.begin();
    if (lru_.size() > capacity_) {
        index_.erase(lru_.back().first);
        lru_.pop_back();
    }
    return ptr;
}

}  // namespace risksea
