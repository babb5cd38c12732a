#include "risksea/embedder.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "risksea/sgns_math.hpp"

namespace risksea {

namespace {

constexpr double kNegPower = 0.75;

void check_hyper(const SgnsHyper& h) {
    if (h.dim <= 0) throw ConfigError("embedding dimension must be positive");
    if (h.window < 1 || h.negatives < 0 || h.epochs < 1)
        throw ConfigError("bad sgns hyperparameters");
    if (h.lr0 <= 0 || h.lr_min < 0 || h.lr_min > h.lr0)
        throw ConfigError("bad sgns learning rates");
    if (h.workers < 1) throw ConfigError("workers must be >= 1");
}

// Uniform [-0.5/d, 0.5/d] init, keyed by (seed, address): stable across
// increments and independent of vocabulary order.
void keyed_init(uint64_t seed, const Address& addr, int dim, float* in, float* out) {
    Rng rng(mix64(seed, fnv1a64(addr), 0x1e57u));
    const double half = 0.5 / dim;
    for (int i = 0; i < dim; ++i) in[i] = static_cast<float>(rng.uniform_real(-half, half));
    for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(rng.uniform_real(-half, half));
}

// Exact cumulative unigram^0.75 sampler over the eligible vocabulary subset.
struct NegSampler {
    std::vector<uint32_t> eligible;
    std::vector<double> cdf;

    NegSampler(const std::vector<uint64_t>& counts, std::vector<uint32_t> elig)
        : eligible(std::move(elig)) {
        cdf.reserve(eligible.size());
        double acc = 0.0;
        for (uint32_t id : eligible) {
            acc += std::pow(static_cast<double>(counts[id]), kNegPower);
            cdf.push_back(acc);
        }
    }

    uint32_t draw(Rng& rng) const {
        double x = rng.uniform_real() * cdf.back();
        size_t i = std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin();
        if (i >= eligible.size()) i = eligible.size() - 1;
        return eligible[i];
    }
};

std::vector<std::vector<uint32_t>> corpus_to_ids(const SgnsModel& m, const WalkCorpus& corpus) {
    std::vector<std::vector<uint32_t>> out;
    out.reserve(corpus.walks.size());
    for (const auto& walk : corpus.walks) {
        std::vector<uint32_t> ids;
        ids.reserve(walk.size());
        for (const auto& a : walk) {
            auto idx = m.word_index(a);
            if (!idx) throw DataError("corpus token missing from vocabulary: " + a);
            ids.push_back(*idx);
        }
        out.push_back(std::move(ids));
    }
    return out;
}

}  // namespace

// Shared trainer core for bootstrap and incremental rounds.
class SgnsTrainer {
  public:
    SgnsTrainer(SgnsModel& m, const std::vector<std::vector<uint32_t>>& corpus,
                std::vector<uint32_t> eligible)
        : m_(m), corpus_(corpus), sampler_(m.counts_, std::move(eligible)) {
        for (const auto& w : corpus_) tokens_per_epoch_ += w.size();
    }

    void run() {
        const SgnsHyper& h = m_.hyper_;
        total_tokens_ = tokens_per_epoch_ * static_cast<uint64_t>(h.epochs);
        if (total_tokens_ == 0) return;
        int threads = h.deterministic ? 1 : h.workers;

#pragma omp parallel num_threads(threads)
        {
            // Per-thread scratch; in performance mode vector updates race
            // benignly (hogwild).
            std::vector<float> g_center(h.dim), g_pos(h.dim);
            std::vector<float> g_negs(static_cast<size_t>(h.negatives) * h.dim);
            std::vector<const float*> neg_ptr(h.negatives);
            std::vector<float*> g_neg_ptr(h.negatives);
            std::vector<uint32_t> neg_ids(h.negatives);

            for (int epoch = 0; epoch < h.epochs; ++epoch) {
#pragma omp for schedule(dynamic, 32)
                for (long wi = 0; wi < static_cast<long>(corpus_.size()); ++wi) {
                    Rng rng(mix64(h.seed, static_cast<uint64_t>(epoch) + 1,
                                  static_cast<uint64_t>(wi)));
                    train_walk(corpus_[wi], rng, g_center.data(), g_pos.data(),
                               g_negs.data(), neg_ptr.data(), g_neg_ptr.data(),
                               neg_ids.data());
                }
            }
        }
    }

  private:
    void train_walk(const std::vector<uint32_t>& walk, Rng& rng, float* g_center,
                    float* g_pos, float* g_negs, const float** neg_ptr, float** g_neg_ptr,
                    uint32_t* neg_ids) {
        const SgnsHyper& h = m_.hyper_;
        const int dim = h.dim;
        uint64_t done = progress_.fetch_add(walk.size());
        float alpha = static_cast<float>(
            std::max(h.lr_min, h.lr0 * (1.0 - static_cast<double>(done) /
                                                  static_cast<double>(total_tokens_ + 1))));

        const int n = static_cast<int>(walk.size());
        for (int i = 0; i < n; ++i) {
            int span = 1 + static_cast<int>(rng.uniform(h.window));
            for (int j = std::max(0, i - span); j <= std::min(n - 1, i + span); ++j) {
                if (j == i) continue;
                uint32_t center = walk[i];
                uint32_t context = walk[j];

                int n_negs = 0;
                for (int k = 0; k < h.negatives; ++k) {
                    uint32_t neg = sampler_.draw(rng);
                    if (neg == context) continue;  // draw consumed, pair skipped
                    neg_ids[n_negs] = neg;
                    neg_ptr[n_negs] = m_.out_vec_.data() + static_cast<size_t>(neg) * dim;
                    g_neg_ptr[n_negs] = g_negs + static_cast<size_t>(n_negs) * dim;
                    ++n_negs;
                }

                float* u = m_.in_vec_.data() + static_cast<size_t>(center) * dim;
                float* v = m_.out_vec_.data() + static_cast<size_t>(context) * dim;
                std::memset(g_center, 0, sizeof(float) * dim);
                sgns_pair_grad<float>(u, dim, v, neg_ptr, n_negs, g_center, g_pos,
                                      g_neg_ptr);
                for (int t = 0; t < dim; ++t) u[t] -= alpha * g_center[t];
                for (int t = 0; t < dim; ++t) v[t] -= alpha * g_pos[t];
                for (int k = 0; k < n_negs; ++k) {
                    float* vn = m_.out_vec_.data() + static_cast<size_t>(neg_ids[k]) * dim;
                    const float* g = g_neg_ptr[k];
                    for (int t = 0; t < dim; ++t) vn[t] -= alpha * g[t];
                }
            }
        }
    }

    SgnsModel& m_;
    const std::vector<std::vector<uint32_t>>& corpus_;
    NegSampler sampler_;
    uint64_t tokens_per_epoch_ = 0;
    uint64_t total_tokens_ = 0;
    std::atomic<uint64_t> progress_{0};
};

std::optional<uint32_t> SgnsModel::word_index(std::string_view addr) const {
    auto it = index_.find(std::string(addr));
    return it == index_.end() ? std::nullopt : std::optional<uint32_t>(it->second);
}

SgnsModel bootstrap_train(const WalkCorpus& corpus, SgnsHyper hyper, uint32_t snapshot_id) {
    check_hyper(hyper);
    if (corpus.empty()) throw ConfigError("bootstrap training needs a non-empty corpus");

    SgnsModel m;
    m.hyper_ = hyper;
    m.snapshot_id_ = snapshot_id;

    std::map<Address, uint64_t> freq;  // sorted: stable vocabulary order
    for (const auto& walk : corpus.walks)
        for (const auto& a : walk) ++freq[a];

    m.words_.reserve(freq.size());
    m.counts_.reserve(freq.size());
    m.in_vec_.resize(freq.size() * static_cast<size_t>(hyper.dim));
    m.out_vec_.resize(freq.size() * static_cast<size_t>(hyper.dim));
    for (auto& [addr, count] : freq) {
        uint32_t id = static_cast<uint32_t>(m.words_.size());
        m.index_.emplace(addr, id);
        m.words_.push_back(addr);
        m.counts_.push_back(count);
        keyed_init(hyper.seed, addr, hyper.dim,
                   m.in_vec_.data() + static_cast<size_t>(id) * hyper.dim,
                   m.out_vec_.data() + static_cast<size_t>(id) * hyper.dim);
    }

    std::vector<uint32_t> eligible(m.words_.size());
    for (uint32_t i = 0; i < eligible.size(); ++i) eligible[i] = i;
    SgnsTrainer(m, corpus_to_ids(m, corpus), std::move(eligible)).run();
    return m;
}

SgnsModel incremental_train(const SgnsModel& prev, const WalkCorpus& delta_corpus,
                            SgnsHyper hyper, uint32_t snapshot_id) {
    check_hyper(hyper);
    if (hyper.dim != prev.hyper_.dim)
        throw ConfigError("incremental training cannot change the embedding dimension");

    SgnsModel m = prev;
    m.hyper_ = hyper;
    m.snapshot_id_ = snapshot_id;
    if (delta_corpus.empty()) return m;  // no graph change: model carried forward

    std::map<Address, uint64_t> delta_freq;
    for (const auto& walk : delta_corpus.walks)
        for (const auto& a : walk) ++delta_freq[a];

    // Grow the vocabulary, then accumulate frequencies.
    for (auto& [addr, count] : delta_freq) {
        if (m.index_.contains(addr)) continue;
        uint32_t id = static_cast<uint32_t>(m.words_.size());
        m.index_.emplace(addr, id);
        m.words_.push_back(addr);
        m.counts_.push_back(0);
        m.in_vec_.resize(m.in_vec_.size() + hyper.dim);
        m.out_vec_.resize(m.out_vec_.size() + hyper.dim);
        keyed_init(hyper.seed, addr, hyper.dim,
                   m.in_vec_.data() + static_cast<size_t>(id) * hyper.dim,
                   m.out_vec_.data() + static_cast<size_t>(id) * hyper.dim);
    }
    std::vector<uint32_t> eligible;
    eligible.reserve(delta_freq.size());
    for (auto& [addr, count] : delta_freq) {
        uint32_t id = m.index_.at(addr);
        m.counts_[id] += count;
        eligible.push_back(id);
    }
    std::sort(eligible.begin(), eligible.end());

    SgnsTrainer(m, corpus_to_ids(m, delta_corpus), std::move(eligible)).run();
    return m;
}

std::vector<uint32_t> sample_negative_ids(const SgnsModel& model,
                                          const std::vector<uint32_t>& eligible, size_t n,
                                          uint64_t seed) {
    std::vector<uint64_t> counts(model.vocab_size());
    for (uint32_t i = 0; i < counts.size(); ++i) counts[i] = model.frequency(i);
    NegSampler sampler(counts, eligible);
    Rng rng(seed);
    std::vector<uint32_t> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(sampler.draw(rng));
    return out;
}

std::vector<double> negative_sampling_probs(const SgnsModel& model,
                                            const std::vector<uint32_t>& eligible) {
    std::vector<double> probs;
    probs.reserve(eligible.size());
    double total = 0.0;
    for (uint32_t id : eligible) {
        double w = std::pow(static_cast<double>(model.frequency(id)), kNegPower);
        probs.push_back(w);
        total += w;
    }
    for (double& p : probs) p /= total;
    return probs;
}

// --- embedding table ---------------------------------------------------------

const float* EmbeddingTable::lookup(std::string_view addr) const {
    auto it = std::lower_bound(addrs_.begin(), addrs_.end(), addr);
    if (it == addrs_.end() || *it != addr) return nullptr;
    return vecs_.data() + static_cast<size_t>(it - addrs_.begin()) * dim_;
}

EmbeddingTable EmbeddingTable::from_rows(int dim, uint32_t snapshot_id,
                                         std::vector<Row> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.addr < b.addr; });
    EmbeddingTable t(dim, snapshot_id);
    t.addrs_.reserve(rows.size());
    t.vecs_.reserve(rows.size() * static_cast<size_t>(dim));
    for (auto& r : rows) {
        if (static_cast<int>(r.vec.size()) != dim)
            throw ConfigError("embedding row has wrong dimension");
        t.addrs_.push_back(std::move(r.addr));
        t.vecs_.insert(t.vecs_.end(), r.vec.begin(), r.vec.end());
    }
    return t;
}

EmbeddingTable EmbeddingTable::restricted_to(const std::vector<Address>& subset) const {
    std::vector<Row> rows;
    rows.reserve(subset.size());
    for (const auto& addr : subset) {
        const float* v = lookup(addr);
        if (!v) continue;
        rows.push_back({addr, std::vector<float>(v, v + dim_)});
    }
    return from_rows(dim_, snapshot_id_, std::move(rows));
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
    std::string body = "d=" + std::to_string(dim_) + " snapshot=" +
                       std::to_string(snapshot_id_) + " count=" +
                       std::to_string(addrs_.size()) + "\n";
    for (size_t i = 0; i < addrs_.size(); ++i) {
        body += addrs_[i];
        for (int j = 0; j < dim_; ++j) {
            body += ' ';
            body += format_f32(vecs_[i * dim_ + j]);
        }
        body += '\n';
    }
    atomic_write(path, body);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file " + path.string());
    std::string header;
    std::getline(in, header);
    int dim = 0;
    uint32_t snapshot = 0;
    size_t count = 0;
    if (std::sscanf(header.c_str(), "d=%d snapshot=%u count=%zu", &dim, &snapshot, &count) !=
        3)
        throw DataError("bad embedding file header in " + path.string());

    std::vector<Row> rows;
    rows.reserve(count);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_view(line, ' ');
        if (static_cast<int>(fields.size()) != dim + 1)
            throw DataError("bad embedding row in " + path.string());
        Row r;
        r.addr = std::string(fields[0]);
        r.vec.reserve(dim);
        for (int j = 1; j <= dim; ++j)
            r.vec.push_back(std::strtof(std::string(fields[j]).c_str(), nullptr));
        rows.push_back(std::move(r));
    }
    if (rows.size() != count) throw DataError("embedding row count mismatch");
    return from_rows(dim, snapshot, std::move(rows));
}

EmbeddingTable export_embeddings(const SgnsModel& model) {
    std::vector<EmbeddingTable::Row> rows;
    rows.reserve(model.vocab_size());
    for (uint32_t i = 0; i < model.vocab_size(); ++i) {
        auto v = model.in_vector(i);
        rows.push_back({model.words()[i], std::vector<float>(v.begin(), v.end())});
    }
    return EmbeddingTable::from_rows(model.hyper().dim, model.snapshot_id(),
                                     std::move(rows));
}

// --- model file --------------------------------------------------------------

void SgnsModel::save(const std::filesystem::path& path) const {
    char buf[256];
    std::string body = "risksea-sgns-v1\n";
    std::snprintf(buf, sizeof(buf), "d=%d snapshot=%u vocab=%zu\n", hyper_.dim,
                  snapshot_id_, words_.size());
    body += buf;
    std::snprintf(buf, sizeof(buf),
                  "window=%d negatives=%d epochs=%d lr0=%.17g lr_min=%.17g seed=%llu "
                  "deterministic=%d workers=%d\n",
                  hyper_.window, hyper_.negatives, hyper_.epochs, hyper_.lr0,
                  hyper_.lr_min, static_cast<unsigned long long>(hyper_.seed),
                  hyper_.deterministic ? 1 : 0, hyper_.workers);
    body += buf;
    for (size_t i = 0; i < words_.size(); ++i) {
        body += words_[i];
        body += ' ';
        body += std::to_string(counts_[i]);
        for (int j = 0; j < hyper_.dim; ++j) {
            body += ' ';
            body += format_f32(in_vec_[i * hyper_.dim + j]);
        }
        for (int j = 0; j < hyper_.dim; ++j) {
            body += ' ';
            body += format_f32(out_vec_[i * hyper_.dim + j]);
        }
        body += '\n';
    }
    atomic_write(path, body);
}

SgnsModel SgnsModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "risksea-sgns-v1") throw DataError("not a model file: " + path.string());

    SgnsModel m;
    size_t vocab = 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "d=%d snapshot=%u vocab=%zu", &m.hyper_.dim,
                    &m.snapshot_id_, &vocab) != 3)
        throw DataError("bad model header");
    std::getline(in, line);
    unsigned long long seed = 0;
    int det = 0;
    if (std::sscanf(line.c_str(),
                    "window=%d negatives=%d epochs=%d lr0=%lg lr_min=%lg seed=%llu "
                    "deterministic=%d workers=%d",
                    &m.hyper_.window, &m.hyper_.negatives, &m.hyper_.epochs, &m.hyper_.lr0,
                    &m.hyper_.lr_min, &seed, &det, &m.hyper_.workers) != 8)
        throw DataError("bad model hyperparameter line");
    m.hyper_.seed = seed;
    m.hyper_.deterministic = det != 0;

    const int dim = m.hyper_.dim;
    m.words_.reserve(vocab);
    m.counts_.reserve(vocab);
    m.in_vec_.reserve(vocab * static_cast<size_t>(dim));
    m.out_vec_.reserve(vocab * static_cast<size_t>(dim));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_view(line, ' ');
        if (static_cast<int>(fields.size()) != 2 + 2 * dim)
            throw DataError("bad model row");
        uint32_t id = static_cast<uint32_t>(m.words_.size());
        m.words_.emplace_back(fields[0]);
        m.index_.emplace(m.words_.back(), id);
        uint64_t count = 0;
        auto cs = fields[1];
        std::from_chars(cs.data(), cs.data() + cs.size(), count);
        m.counts_.push_back(count);
        for (int j = 0; j < dim; ++j)
            m.in_vec_.push_back(std::strtof(std::string(fields[2 + j]).c_str(), nullptr));
        for (int j = 0; j < dim; ++j)
            m.out_vec_.push_back(
                std::strtof(std::string(fields[2 + dim + j]).c_str(), nullptr));
    }
    if (m.words_.size() != vocab) throw DataError("model vocab count mismatch");
    return m;
}

}  // namespace risksea
