#include "risksea/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace risksea {

void BehavioralVector::append_to(std::vector<double>& out, Bucket bucket) const {
    out.insert(out.end(),
               {in_tx_count, out_tx_count, in_amount_sum, out_amount_sum, in_amount_mean,
                out_amount_mean, in_amount_max, out_amount_max, in_amount_std,
                out_amount_std, unique_senders, unique_receivers, active_days,
                lifetime_seconds, mean_inter_tx_gap_seconds, in_out_count_ratio,
                in_out_amount_ratio});
    if (bucket == Bucket::Token) out.push_back(distinct_tokens);
}

namespace {

struct SideStats {
    std::vector<double> amounts;
    std::set<Address> counterparties;

    double sum() const {
        double s = 0;
        for (double a : amounts) s += a;
        return s;
    }
    double mean() const { return amounts.empty() ? 0.0 : sum() / amounts.size(); }
    double max() const {
        double m = 0;
        for (double a : amounts) m = std::max(m, a);
        return m;
    }
    double stddev() const {  // population
        if (amounts.empty()) return 0.0;
        double mu = mean();
        double acc = 0;
        for (double a : amounts) acc += (a - mu) * (a - mu);
        return std::sqrt(acc / amounts.size());
    }
};

bool in_bucket(const TransactionRecord& r, Bucket bucket) {
    return (bucket == Bucket::Native) == (r.asset.kind == AssetKind::Native);
}

constexpr int64_t kSecondsPerDay = 86400;

}  // namespace

BehavioralVector extract_behavioral(const Address& addr,
                                    std::span<const TransactionRecord> records,
                                    Bucket bucket) {
    SideStats in, out;
    std::vector<int64_t> times;
    std::set<int64_t> days;
    std::set<std::string> tokens;

    for (const auto& r : records) {
        if (!in_bucket(r, bucket)) continue;
        bool incoming = r.to_addr == addr;
        bool outgoing = r.from_addr == addr;
        if (!incoming && !outgoing) continue;
        if (incoming) {
            in.amounts.push_back(r.amount);
            in.counterparties.insert(r.from_addr);
        }
        if (outgoing) {
            out.amounts.push_back(r.amount);
            out.counterparties.insert(r.to_addr);
        }
        times.push_back(r.timestamp);
        days.insert(r.timestamp / kSecondsPerDay);
        if (bucket == Bucket::Token) tokens.insert(r.asset.token_id);
    }

    BehavioralVector v;
    if (times.empty()) return v;  // all-zeros vector for an inactive bucket

    v.in_tx_count = static_cast<double>(in.amounts.size());
    v.out_tx_count = static_cast<double>(out.amounts.size());
    v.in_amount_sum = in.sum();
    v.out_amount_sum = out.sum();
    v.in_amount_mean = in.mean();
    v.out_amount_mean = out.mean();
    v.in_amount_max = in.max();
    v.out_amount_max = out.max();
    v.in_amount_std = in.stddev();
    v.out_amount_std = out.stddev();
    v.unique_senders = static_cast<double>(in.counterparties.size());
    v.unique_receivers = static_cast<double>(out.counterparties.size());
    v.active_days = static_cast<double>(days.size());

    std::sort(times.begin(), times.end());
    v.lifetime_seconds = static_cast<double>(times.back() - times.front());
    if (times.size() >= 2) {
        double acc = 0;
        for (size_t i = 1; i < times.size(); ++i)
            acc += static_cast<double>(times[i] - times[i - 1]);
        v.mean_inter_tx_gap_seconds = acc / static_cast<double>(times.size() - 1);
    }
    v.in_out_count_ratio = (v.in_tx_count + 1.0) / (v.out_tx_count + 1.0);
    v.in_out_amount_ratio = (v.in_amount_sum + 1.0) / (v.out_amount_sum + 1.0);
    v.distinct_tokens = static_cast<double>(tokens.size());
    return v;
}

AssembledRow assemble(const Address& addr, const BehavioralVector& native,
                      const BehavioralVector& token, const float* emb, int dim) {
    if (dim < 0) throw ConfigError("negative embedding dimension");
    AssembledRow row;
    row.addr = addr;
    row.values.reserve(assembled_row_length(dim));
    native.append_to(row.values, Bucket::Native);
    token.append_to(row.values, Bucket::Token);
    if (emb) {
        for (int i = 0; i < dim; ++i) row.values.push_back(emb[i]);
        row.values.push_back(1.0);
    } else {
        row.values.insert(row.values.end(), dim, 0.0);
        row.values.push_back(0.0);
    }
    if (static_cast<int>(row.values.size()) != assembled_row_length(dim))
        throw ConfigError("assembled row length mismatch");
    return row;
}

std::vector<std::string> feature_column_names(int dim) {
    static const char* base[] = {
        "in_tx_count",     "out_tx_count",     "in_amount_sum",
        "out_amount_sum",  "in_amount_mean",   "out_amount_mean",
        "in_amount_max",   "out_amount_max",   "in_amount_std",
        "out_amount_std",  "unique_senders",   "unique_receivers",
        "active_days",     "lifetime_seconds", "mean_inter_tx_gap_seconds",
        "in_out_count_ratio", "in_out_amount_ratio"};
    std::vector<std::string> names;
    for (const char* n : base) names.push_back(std::string("native_") + n);
    for (const char* n : base) names.push_back(std::string("token_") + n);
    names.push_back("token_distinct_tokens");
    for (int i = 0; i < dim; ++i) names.push_back("emb_" + std::to_string(i));
    names.push_back("emb_present");
    return names;
}

bool is_amount_column(const std::string& name) {
    for (const char* stat : {"amount_sum", "amount_mean", "amount_max", "amount_std"})
        if (name.find(stat) != std::string::npos) return true;
    return false;
}

std::vector<AssembledRow> build_feature_rows(
    const std::vector<TransactionRecord>& records, const EmbeddingTable& embeddings,
    const std::vector<std::pair<Address, int>>& labels) {
    // Group record indices per endpoint, then extract per address.
    std::map<Address, std::vector<size_t>> touching;
    for (size_t i = 0; i < records.size(); ++i) {
        touching[records[i].from_addr].push_back(i);
        if (records[i].to_addr != records[i].from_addr)
            touching[records[i].to_addr].push_back(i);
    }
    std::unordered_map<Address, int> label_of(labels.begin(), labels.end());

    std::vector<AssembledRow> rows;
    rows.reserve(touching.size());
    std::vector<TransactionRecord> mine;
    for (const auto& [addr, idxs] : touching) {
        mine.clear();
        for (size_t i : idxs) mine.push_back(records[i]);
        auto native = extract_behavioral(addr, mine, Bucket::Native);
        auto token = extract_behavioral(addr, mine, Bucket::Token);
        auto row = assemble(addr, native, token, embeddings.lookup(addr), embeddings.dim());
        if (auto it = label_of.find(addr); it != label_of.end()) row.label = it->second;
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_feature_csv(const std::filesystem::path& path,
                      const std::vector<AssembledRow>& rows, int dim) {
    std::string body = kFeatureSchema;
    body += ":address";
    for (const auto& name : feature_column_names(dim)) {
        body += ',';
        body += name;
    }
    body += ",label\n";

    char buf[40];
    for (const auto& row : rows) {
        if (static_cast<int>(row.values.size()) != assembled_row_length(dim))
            throw ConfigError("feature row length does not match schema");
        body += row.addr;
        for (double v : row.values) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            body += buf;
        }
        body += ',';
        if (row.label) body += std::to_string(*row.label);
        body += '\n';
    }
    atomic_write(path, body);
}

std::pair<std::vector<AssembledRow>, int> load_feature_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature file " + path.string());
    std::string header;
    std::getline(in, header);
    auto colon = header.find(':');
    if (colon == std::string::npos || header.substr(0, colon) != kFeatureSchema)
        throw DataError("unknown feature schema in " + path.string());

    auto cols = split_view(std::string_view(header).substr(colon + 1), ',');
    // address + features + label; features = 36 + dim.
    int dim = static_cast<int>(cols.size()) - 2 - BehavioralVector::kNativeFields -
              BehavioralVector::kTokenFields - 1;
    bool header_ok = dim >= 0;
    if (header_ok) {
        auto names = feature_column_names(dim);
        header_ok = cols.front() == "address" && cols.back() == "label";
        for (size_t i = 0; header_ok && i < names.size(); ++i)
            header_ok = cols[i + 1] == names[i];
    }
    if (!header_ok)
        throw DataError("feature column list does not match schema " +
                        std::string(kFeatureSchema));

    std::vector<AssembledRow> rows;
    std::string line;
    const int n_values = assembled_row_length(dim);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_view(line, ',');
        if (static_cast<int>(fields.size()) != n_values + 2)
            throw DataError("bad feature row in " + path.string());
        AssembledRow row;
        row.addr = std::string(fields[0]);
        row.values.reserve(n_values);
        for (int i = 0; i < n_values; ++i)
            row.values.push_back(std::strtod(std::string(fields[1 + i]).c_str(), nullptr));
        auto label = fields.back();
        if (!label.empty()) row.label = label == "1" ? 1 : 0;
        rows.push_back(std::move(row));
    }
    return {std::move(rows), dim};
}

}  // namespace risksea
