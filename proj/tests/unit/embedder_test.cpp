#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "risksea/embedder.hpp"
#include "risksea/sgns_math.hpp"

using namespace risksea;
using testutil::TempDir;
using testutil::tx;

namespace {

double cosine(const float* a, const float* b, int d) {
    double num = 0, na = 0, nb = 0;
    for (int i = 0; i < d; ++i) {
        num += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return num / (std::sqrt(na) * std::sqrt(nb) + 1e-30);
}

double cosine(const SgnsModel& m, const Address& a, const Address& b) {
    auto ia = m.word_index(a), ib = m.word_index(b);
    REQUIRE(ia.has_value());
    REQUIRE(ib.has_value());
    return cosine(m.in_vector(*ia).data(), m.in_vector(*ib).data(), m.hyper().dim);
}

WalkCorpus repeat_walks(const std::vector<std::vector<Address>>& patterns, int times) {
    WalkCorpus c;
    for (int t = 0; t < times; ++t)
        for (const auto& w : patterns) c.walks.push_back(w);
    return c;
}

SgnsHyper small_hyper(int dim = 8) {
    SgnsHyper h;
    h.dim = dim;
    h.window = 2;
    h.negatives = 3;
    h.epochs = 3;
    h.seed = 99;
    return h;
}

bool vectors_equal(const SgnsModel& a, const SgnsModel& b, const Address& addr) {
    auto ia = a.word_index(addr), ib = b.word_index(addr);
    REQUIRE(ia.has_value());
    REQUIRE(ib.has_value());
    auto va = a.in_vector(*ia), vb = b.in_vector(*ib);
    auto oa = a.out_vector(*ia), ob = b.out_vector(*ib);
    return std::equal(va.begin(), va.end(), vb.begin()) &&
           std::equal(oa.begin(), oa.end(), ob.begin());
}

}  // namespace

TEST_CASE("two separate cliques embed apart") {
    auto corpus = repeat_walks({{"A", "B", "A", "B"}, {"B", "A", "B", "A"},
                                {"C", "D", "C", "D"}, {"D", "C", "D", "C"}},
                               60);
    auto model = bootstrap_train(corpus, small_hyper(8), 1);
    CHECK(cosine(model, "A", "B") > cosine(model, "A", "C"));
    CHECK(cosine(model, "C", "D") > cosine(model, "B", "D"));
}

TEST_CASE("a corpus without context pairs leaves vectors at their keyed init") {
    auto corpus = repeat_walks({{"A"}}, 10);
    auto model = bootstrap_train(corpus, small_hyper(16), 1);
    REQUIRE(model.vocab_size() == 1);
    CHECK(model.frequency(0) == 10);

    // Same seed, different epochs: still a no-op, so the init must match.
    auto h2 = small_hyper(16);
    h2.epochs = 1;
    auto model2 = bootstrap_train(corpus, h2, 1);
    CHECK(vectors_equal(model, model2, "A"));
    for (float v : model.in_vector(0)) CHECK(std::fabs(v) <= 0.5f / 16 + 1e-9f);
}

TEST_CASE("bootstrap rejects bad input") {
    CHECK_THROWS_AS(bootstrap_train(WalkCorpus{}, small_hyper(), 1), ConfigError);
    auto h = small_hyper(0);
    CHECK_THROWS_AS(bootstrap_train(repeat_walks({{"A", "B"}}, 1), h, 1), ConfigError);
}

TEST_CASE("barbell graph: bells are internally closer than across") {
    TempDir tmp;
    std::vector<TransactionRecord> recs;
    auto node = [](int bell, int i) { return "b" + std::to_string(bell) + "_" + std::to_string(i); };
    int64_t ts = 1;
    for (int bell = 0; bell < 2; ++bell)
        for (int i = 0; i < 15; ++i)
            for (int j = i + 1; j < 15; ++j) recs.push_back(tx(ts++, node(bell, i), node(bell, j)));
    recs.push_back(tx(ts++, node(0, 0), node(1, 0)));  // the bar

    EdgeLog log(tmp.path() / "edges");
    log.ingest_records(recs, 1);
    build_neighbor_store(log, 1, {200, 4}, tmp.path() / "store");
    NeighborStoreReader reader(tmp.path() / "store");

    WalkParams wp;
    wp.num_walks = 8;
    wp.walk_length = 8;
    wp.seed = 5;
    auto corpus = generate_walks(reader, all_store_nodes(reader), wp, 2);

    SgnsHyper h;
    h.dim = 16;
    h.window = 3;
    h.negatives = 5;
    h.epochs = 4;
    h.seed = 17;
    auto model = bootstrap_train(corpus, h, 1);

    int good = 0, total = 0;
    for (int bell = 0; bell < 2; ++bell)
        for (int i = 0; i < 15; ++i)
            for (int j = 0; j < 15; ++j) {
                if (i == j) continue;
                for (int k = 0; k < 15; ++k) {
                    ++total;
                    if (cosine(model, node(bell, i), node(bell, j)) >
                        cosine(model, node(bell, i), node(1 - bell, k)))
                        ++good;
                }
            }
    CHECK(static_cast<double>(good) / total >= 0.90);
}

TEST_CASE("incremental training touches only nodes in the delta corpus") {
    auto base = repeat_walks({{"A", "B", "C", "D"}, {"D", "C", "B", "A"}, {"Z", "Y", "Z", "Y"}}, 40);
    auto h = small_hyper(8);
    auto m1 = bootstrap_train(base, h, 1);

    SUBCASE("deterministic mode") {
        auto delta = repeat_walks({{"A", "B", "A"}}, 10);
        auto m2 = incremental_train(m1, delta, h, 2);
        CHECK(m2.snapshot_id() == 2);
        CHECK(vectors_equal(m1, m2, "Z"));
        CHECK(vectors_equal(m1, m2, "Y"));
        CHECK(vectors_equal(m1, m2, "C"));
        CHECK(vectors_equal(m1, m2, "D"));
        CHECK_FALSE(vectors_equal(m1, m2, "A"));
        // Frequencies accumulate.
        CHECK(m2.frequency(*m2.word_index("A")) ==
              m1.frequency(*m1.word_index("A")) + 20);
    }

    SUBCASE("performance mode keeps the same no-touch guarantee") {
        auto hp = h;
        hp.deterministic = false;
        hp.workers = 4;
        auto delta = repeat_walks({{"A", "B", "A"}, {"B", "A", "B"}}, 10);
        auto m2 = incremental_train(m1, delta, hp, 2);
        CHECK(vectors_equal(m1, m2, "Z"));
        CHECK(vectors_equal(m1, m2, "Y"));
        CHECK(vectors_equal(m1, m2, "C"));
        CHECK(vectors_equal(m1, m2, "D"));
    }

    SUBCASE("empty delta bumps the snapshot id only") {
        auto m2 = incremental_train(m1, WalkCorpus{}, h, 5);
        CHECK(m2.snapshot_id() == 5);
        CHECK(m2.vocab_size() == m1.vocab_size());
        for (const auto& w : m1.words()) CHECK(vectors_equal(m1, m2, w));
    }

    SUBCASE("dimension change is rejected") {
        auto h2 = small_hyper(12);
        CHECK_THROWS_AS(incremental_train(m1, repeat_walks({{"A", "B"}}, 1), h2, 2),
                        ConfigError);
    }
}

TEST_CASE("no-touch invariance holds for random delta corpora") {
    Rng rng(31);
    std::vector<Address> vocab;
    for (int i = 0; i < 30; ++i) vocab.push_back("v" + std::to_string(i));

    auto random_corpus = [&](int walks, int len) {
        WalkCorpus c;
        for (int w = 0; w < walks; ++w) {
            std::vector<Address> walk;
            for (int i = 0; i < len; ++i) walk.push_back(vocab[rng.uniform(vocab.size())]);
            c.walks.push_back(std::move(walk));
        }
        return c;
    };

    auto h = small_hyper(8);
    auto m1 = bootstrap_train(random_corpus(40, 6), h, 1);
    for (int trial = 0; trial < 5; ++trial) {
        auto hp = h;
        hp.deterministic = trial % 2 == 0;
        hp.workers = 4;
        auto delta = random_corpus(5, 4);
        std::set<Address> touched;
        for (const auto& w : delta.walks) touched.insert(w.begin(), w.end());
        auto m2 = incremental_train(m1, delta, hp, 2);
        for (const auto& w : m1.words())
            if (!touched.contains(w)) CHECK(vectors_equal(m1, m2, w));
        m1 = std::move(m2);
    }
}

TEST_CASE("new node lands near its community after an increment") {
    // Two cliques; later a new node N attaches to the X community.
    std::vector<std::vector<Address>> xwalks, ywalks;
    std::vector<Address> xs = {"x1", "x2", "x3", "x4"}, ys = {"y1", "y2", "y3", "y4"};
    Rng rng(8);
    for (int w = 0; w < 120; ++w) {
        std::vector<Address> wx, wy;
        for (int i = 0; i < 6; ++i) {
            wx.push_back(xs[rng.uniform(4)]);
            wy.push_back(ys[rng.uniform(4)]);
        }
        xwalks.push_back(wx);
        ywalks.push_back(wy);
    }
    WalkCorpus base;
    for (size_t i = 0; i < xwalks.size(); ++i) {
        base.walks.push_back(xwalks[i]);
        base.walks.push_back(ywalks[i]);
    }
    auto h = small_hyper(16);
    h.epochs = 6;
    auto m1 = bootstrap_train(base, h, 1);

    WalkCorpus delta;
    for (int w = 0; w < 200; ++w) {
        std::vector<Address> walk = {"N"};
        for (int i = 0; i < 5; ++i) walk.push_back(xs[rng.uniform(4)]);
        delta.walks.push_back(walk);
    }
    auto m2 = incremental_train(m1, delta, h, 2);

    double best_x = -2, best_y = -2;
    for (const auto& x : xs) best_x = std::max(best_x, cosine(m2, "N", x));
    for (const auto& y : ys) best_y = std::max(best_y, cosine(m2, "N", y));
    CHECK(best_x > best_y);
}

TEST_CASE("analytic gradients match central finite differences in double precision") {
    const int dim = 6;
    const int n_negs = 3;
    Rng rng(123);
    std::vector<double> u(dim), pos(dim), negs(n_negs * dim);
    for (auto* v : {&u, &pos})
        for (double& x : *v) x = rng.uniform_real(-0.8, 0.8);
    for (double& x : negs) x = rng.uniform_real(-0.8, 0.8);

    std::vector<const double*> neg_ptr(n_negs);
    for (int j = 0; j < n_negs; ++j) neg_ptr[j] = negs.data() + j * dim;

    std::vector<double> g_u(dim, 0.0), g_pos(dim), g_negs(n_negs * dim);
    std::vector<double*> g_neg_ptr(n_negs);
    for (int j = 0; j < n_negs; ++j) g_neg_ptr[j] = g_negs.data() + j * dim;
    sgns_pair_grad<double>(u.data(), dim, pos.data(), neg_ptr.data(), n_negs, g_u.data(),
                           g_pos.data(), g_neg_ptr.data());

    const double h = 1e-6;
    auto loss = [&]() {
        return sgns_pair_loss<double>(u.data(), dim, pos.data(), neg_ptr.data(), n_negs);
    };
    auto check_fd = [&](double* slot, double analytic) {
        double keep = *slot;
        *slot = keep + h;
        double up = loss();
        *slot = keep - h;
        double down = loss();
        *slot = keep;
        double fd = (up - down) / (2 * h);
        CHECK(std::fabs(fd - analytic) <=
              1e-4 * std::max({std::fabs(fd), std::fabs(analytic), 1e-8}));
    };
    for (int i = 0; i < dim; ++i) check_fd(&u[i], g_u[i]);
    for (int i = 0; i < dim; ++i) check_fd(&pos[i], g_pos[i]);
    for (int j = 0; j < n_negs; ++j)
        for (int i = 0; i < dim; ++i) check_fd(&negs[j * dim + i], g_negs[j * dim + i]);
}

TEST_CASE("negative sampling follows unigram^0.75 empirically") {
    // Skewed frequencies via repeated tokens.
    std::vector<std::vector<Address>> pattern;
    for (int i = 0; i < 16; ++i) {
        std::vector<Address> walk;
        for (int c = 0; c <= i; ++c) walk.push_back("w" + std::to_string(i));
        pattern.push_back(walk);
    }
    auto corpus = repeat_walks(pattern, 3);
    auto h = small_hyper(4);
    h.epochs = 1;
    auto model = bootstrap_train(corpus, h, 1);

    std::vector<uint32_t> eligible(model.vocab_size());
    for (uint32_t i = 0; i < eligible.size(); ++i) eligible[i] = i;
    auto probs = negative_sampling_probs(model, eligible);

    const size_t n = 100000;
    auto draws = sample_negative_ids(model, eligible, n, 77);
    std::vector<size_t> freq(model.vocab_size(), 0);
    for (uint32_t id : draws) freq[id]++;

    double l1 = 0;
    for (uint32_t i = 0; i < eligible.size(); ++i)
        l1 += std::fabs(probs[i] - freq[i] / static_cast<double>(n));
    CHECK(l1 < 0.02);

    // And the analytic distribution really is unigram^0.75.
    double total = 0;
    for (uint32_t i = 0; i < model.vocab_size(); ++i)
        total += std::pow(static_cast<double>(model.frequency(i)), 0.75);
    for (uint32_t i = 0; i < model.vocab_size(); ++i)
        CHECK(probs[i] ==
              doctest::Approx(std::pow(static_cast<double>(model.frequency(i)), 0.75) / total));
}

TEST_CASE("no vector norm diverges during training") {
    Rng rng(55);
    std::vector<Address> vocab;
    for (int i = 0; i < 40; ++i) vocab.push_back("n" + std::to_string(i));
    WalkCorpus corpus;
    for (int w = 0; w < 300; ++w) {
        std::vector<Address> walk;
        for (int i = 0; i < 10; ++i) walk.push_back(vocab[rng.uniform(vocab.size())]);
        corpus.walks.push_back(std::move(walk));
    }
    SgnsHyper h;
    h.dim = 32;
    h.epochs = 5;
    h.seed = 3;
    auto model = bootstrap_train(corpus, h, 1);
    double max_norm = 0;
    for (uint32_t i = 0; i < model.vocab_size(); ++i) {
        double n2 = 0;
        for (float v : model.in_vector(i)) n2 += static_cast<double>(v) * v;
        max_norm = std::max(max_norm, std::sqrt(n2));
        for (float v : model.in_vector(i)) CHECK(std::isfinite(v));
        for (float v : model.out_vector(i)) CHECK(std::isfinite(v));
    }
    CHECK(max_norm < 100.0);
}

TEST_CASE("model and embedding files round-trip bitwise") {
    TempDir tmp;
    auto corpus = repeat_walks({{"A", "B", "C"}, {"C", "B", "A"}}, 30);
    auto model = bootstrap_train(corpus, small_hyper(8), 3);

    auto mpath = tmp.path() / "model.txt";
    model.save(mpath);
    auto loaded = SgnsModel::load(mpath);
    auto mpath2 = tmp.path() / "model2.txt";
    loaded.save(mpath2);
    CHECK(testutil::read_file(mpath) == testutil::read_file(mpath2));
    CHECK(loaded.snapshot_id() == 3);
    for (const auto& w : model.words()) CHECK(vectors_equal(model, loaded, w));

    auto table = export_embeddings(model);
    CHECK(table.size() == model.vocab_size());
    CHECK(table.dim() == 8);
    auto epath = tmp.path() / "emb.txt";
    table.save(epath);
    auto tloaded = EmbeddingTable::load(epath);
    auto epath2 = tmp.path() / "emb2.txt";
    tloaded.save(epath2);
    CHECK(testutil::read_file(epath) == testutil::read_file(epath2));

    CHECK(tloaded.lookup("A") != nullptr);
    CHECK(tloaded.lookup("ghost") == nullptr);  // MISSING, never a default

    // Exported vectors are the model's input vectors, bit for bit.
    auto idx = *model.word_index("B");
    auto vec = model.in_vector(idx);
    const float* got = tloaded.lookup("B");
    REQUIRE(got != nullptr);
    CHECK(std::equal(vec.begin(), vec.end(), got));
}

TEST_CASE("restricted table keeps only the requested addresses") {
    auto corpus = repeat_walks({{"A", "B", "C", "D"}}, 10);
    auto table = export_embeddings(bootstrap_train(corpus, small_hyper(4), 1));
    auto core = table.restricted_to({"B", "D", "ghost"});
    CHECK(core.size() == 2);
    CHECK(core.lookup("B") != nullptr);
    CHECK(core.lookup("A") == nullptr);
}
