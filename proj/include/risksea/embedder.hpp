#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "risksea/walkgen.hpp"

namespace risksea {

struct SgnsHyper {
    int dim = 128;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr0 = 0.025;
    double lr_min = 0.0001;
    uint64_t seed = 1;
    // Deterministic mode trains single-threaded in corpus order and is the
    // mode all bitwise-equality contracts are stated against. Performance
    // mode runs hogwild over walks; benign races, same no-touch guarantee.
    bool deterministic = true;
    int workers = 1;
};

// Node -> input vector, exported from a model. Lookup of an unknown node
// returns nullptr (MISSING); there is no default vector.
class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    EmbeddingTable(int dim, uint32_t snapshot_id) : dim_(dim), snapshot_id_(snapshot_id) {}

    int dim() const { return dim_; }
    uint32_t snapshot_id() const { return snapshot_id_; }
    size_t size() const { return addrs_.size(); }
    const std::vector<Address>& addresses() const { return addrs_; }

    const float* lookup(std::string_view addr) const;

    struct Row {
        Address addr;
        std::vector<float> vec;
    };
    static EmbeddingTable from_rows(int dim, uint32_t snapshot_id, std::vector<Row> rows);

    EmbeddingTable restricted_to(const std::vector<Address>& subset) const;

    // Text format, canonical: `d=<int> snapshot=<int> count=<int>` header then
    // `address v1 .. vd` rows with 9-significant-digit floats (round-trips
    // binary32 exactly). Rows sorted by address.
    void save(const std::filesystem::path& path) const;
    static EmbeddingTable load(const std::filesystem::path& path);

  private:
    int dim_ = 0;
    uint32_t snapshot_id_ = 0;
    std::vector<Address> addrs_;  // ascending
    std::vector<float> vecs_;     // addrs_.size() x dim_
};

// Skip-gram negative-sampling model with a growable vocabulary.
class SgnsModel {
  public:
    const SgnsHyper& hyper() const { return hyper_; }
    uint32_t snapshot_id() const { return snapshot_id_; }
    size_t vocab_size() const { return words_.size(); }
    const std::vector<Address>& words() const { return words_; }
    std::optional<uint32_t> word_index(std::string_view addr) const;
    uint64_t frequency(uint32_t idx) const { return counts_[idx]; }

    std::span<const float> in_vector(uint32_t idx) const {
        return {in_vec_.data() + static_cast<size_t>(idx) * hyper_.dim,
                static_cast<size_t>(hyper_.dim)};
    }
    std::span<const float> out_vector(uint32_t idx) const {
        return {out_vec_.data() + static_cast<size_t>(idx) * hyper_.dim,
                static_cast<size_t>(hyper_.dim)};
    }

    void save(const std::filesystem::path& path) const;
    static SgnsModel load(const std::filesystem::path& path);

  private:
    friend SgnsModel bootstrap_train(const WalkCorpus&, SgnsHyper, uint32_t);
    friend SgnsModel incremental_train(const SgnsModel&, const WalkCorpus&, SgnsHyper,
                                       uint32_t);
    friend EmbeddingTable export_embeddings(const SgnsModel&);
    friend class SgnsTrainer;

    SgnsHyper hyper_;
    uint32_t snapshot_id_ = 0;
    std::vector<Address> words_;
    std::unordered_map<Address, uint32_t> index_;
    std::vector<uint64_t> counts_;  // cumulative across increments
    std::vector<float> in_vec_;
    std::vector<float> out_vec_;
};

// Static node2vec training on the first snapshot's corpus. Vocabulary is
// every node appearing in the corpus; vectors start uniform in
// [-0.5/d, 0.5/d] from a stream keyed by (seed, address).
SgnsModel bootstrap_train(const WalkCorpus& corpus, SgnsHyper hyper, uint32_t snapshot_id);

// Warm-start retraining on delta walks. New nodes join the vocabulary with
// the keyed init; frequencies accumulate; negatives are drawn from the
// nodes present in the delta corpus so that nodes absent from it keep
// bitwise-identical vectors. An empty corpus only bumps the snapshot id.
SgnsModel incremental_train(const SgnsModel& prev, const WalkCorpus& delta_corpus,
                            SgnsHyper hyper, uint32_t snapshot_id);

EmbeddingTable export_embeddings(const SgnsModel& model);

// Negative-sampling distribution: unigram^0.75 over the eligible nodes,
// renormalized. Exposed for the distribution test.
std::vector<double> negative_sampling_probs(const SgnsModel& model,
                                            const std::vector<uint32_t>& eligible);

// n draws from the sampler the trainer uses, for empirical checks.
std::vector<uint32_t> sample_negative_ids(const SgnsModel& model,
                                          const std::vector<uint32_t>& eligible, size_t n,
                                          uint64_t seed);

}  // namespace risksea
