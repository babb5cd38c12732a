#pragma once

#include <optional>
#include <span>
#include <vector>

#include "risksea/embedder.hpp"
#include "risksea/txgraph.hpp"

namespace risksea {

enum class Bucket { Native, Token };

// Per-address, per-bucket transaction statistics. The ratio fields use
// (x+1)/(y+1) smoothing; an address with no transactions in the bucket is
// the all-zeros vector (including the ratios).
struct BehavioralVector {
    double in_tx_count = 0, out_tx_count = 0;
    double in_amount_sum = 0, out_amount_sum = 0;
    double in_amount_mean = 0, out_amount_mean = 0;
    double in_amount_max = 0, out_amount_max = 0;
    double in_amount_std = 0, out_amount_std = 0;
    double unique_senders = 0, unique_receivers = 0;
    double active_days = 0;
    double lifetime_seconds = 0;
    double mean_inter_tx_gap_seconds = 0;
    double in_out_count_ratio = 0, in_out_amount_ratio = 0;
    double distinct_tokens = 0;  // token bucket only

    static constexpr int kNativeFields = 17;
    static constexpr int kTokenFields = 18;

    void append_to(std::vector<double>& out, Bucket bucket) const;
};

// Exact statistics over the address's records in the bucket's asset class.
// Records touching other addresses are ignored; order does not matter.
BehavioralVector extract_behavioral(const Address& addr,
                                    std::span<const TransactionRecord> records,
                                    Bucket bucket);

// address, native(17) || token(18) || embedding(d) || present flag, label.
struct AssembledRow {
    Address addr;
    std::vector<double> values;
    std::optional<int> label;
};

constexpr int assembled_row_length(int dim) {
    return BehavioralVector::kNativeFields + BehavioralVector::kTokenFields + dim + 1;
}

// emb may be null (MISSING): the embedding slots stay zero and the flag is 0.
AssembledRow assemble(const Address& addr, const BehavioralVector& native,
                      const BehavioralVector& token, const float* emb, int dim);

// Column names in canonical order (without the leading address / trailing
// label). Versioned in the feature-file header so extractor and model can
// never silently disagree.
std::vector<std::string> feature_column_names(int dim);
bool is_amount_column(const std::string& name);

// Batch path: one pass over the records, then assembly against a table.
// Addresses = every record endpoint; labels attached where provided.
std::vector<AssembledRow> build_feature_rows(
    const std::vector<TransactionRecord>& records, const EmbeddingTable& embeddings,
    const std::vector<std::pair<Address, int>>& labels);

// CSV with a schema-version header line naming every column in order.
inline constexpr const char* kFeatureSchema = "risksea_features_v1";
void save_feature_csv(const std::filesystem::path& path,
                      const std::vector<AssembledRow>& rows, int dim);
std::pair<std::vector<AssembledRow>, int> load_feature_csv(
    const std::filesystem::path& path);

}  // namespace risksea
