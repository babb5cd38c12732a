#include "risksea/riskmodel.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace risksea {

std::map<Address, int> resolve_labels(const std::vector<RiskLabel>& raw) {
    std::map<Address, int> out;
    for (const auto& l : raw) {
        auto [it, fresh] = out.emplace(l.addr, l.cls);
        if (!fresh) it->second = std::max(it->second, l.cls);
    }
    return out;
}

std::vector<RiskLabel> load_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label file " + path.string());
    std::vector<RiskLabel> out;
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("address,", 0) == 0) continue;
        auto fields = split_view(line, ',');
        if (fields.size() != 3 || fields[0].empty() ||
            (fields[1] != "0" && fields[1] != "1"))
            throw DataError("bad label row at line " + std::to_string(lineno) + " in " +
                            path.string());
        out.push_back({std::string(fields[0]), fields[1] == "1" ? 1 : 0,
                       std::string(fields[2])});
    }
    return out;
}

void save_labels_csv(const std::filesystem::path& path,
                     const std::vector<RiskLabel>& labels) {
    std::string body = "address,class,source\n";
    for (const auto& l : labels) {
        body += l.addr;
        body += l.cls ? ",1," : ",0,";
        body += l.source;
        body += '\n';
    }
    atomic_write(path, body);
}

// --- forest ------------------------------------------------------------------

double Tree::predict(std::span<const double> row) const {
    int at = 0;
    while (nodes[at].feature >= 0)
        at = row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                           : nodes[at].right;
    return nodes[at].leaf_fraction;
}

double ForestModel::score(std::span<const double> row) const {
    if (row.size() != n_features_)
        throw ConfigError("row length " + std::to_string(row.size()) +
                          " does not match training schema " + std::to_string(n_features_));
    double acc = 0;
    for (const auto& t : trees_) acc += t.predict(row);
    return trees_.empty() ? 0.0 : acc / static_cast<double>(trees_.size());
}

namespace {

struct TreeBuilder {
    const DataMatrix& x;
    const std::vector<int>& y;
    int max_depth;
    int min_samples_leaf;
    int features_per_split;
    Rng rng;
    Tree tree;

    // Scratch reused across nodes.
    std::vector<uint32_t> feature_pool;
    std::vector<std::pair<double, int>> sorted_vals;

    TreeBuilder(const DataMatrix& x_, const std::vector<int>& y_, const ForestConfig& cfg,
                uint64_t tree_seed)
        : x(x_), y(y_), max_depth(cfg.max_depth), min_samples_leaf(cfg.min_samples_leaf),
          features_per_split(std::max(1, static_cast<int>(std::sqrt(
                                             static_cast<double>(x_.cols))))),
          rng(tree_seed) {
        feature_pool.resize(x.cols);
        std::iota(feature_pool.begin(), feature_pool.end(), 0u);
    }

    int build(std::vector<size_t>& samples, int depth) {
        size_t n = samples.size();
        size_t pos = 0;
        for (size_t i : samples) pos += y[i];

        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        auto as_leaf = [&](int id) {
            tree.nodes[id].feature = -1;
            tree.nodes[id].leaf_fraction = static_cast<double>(pos) / n;
            return id;
        };
        if (depth >= max_depth || pos == 0 || pos == n ||
            n < 2 * static_cast<size_t>(min_samples_leaf))
            return as_leaf(node_id);

        // Best Gini split over a random feature subset.
        rng.partial_shuffle(feature_pool, features_per_split);
        int best_feature = -1;
        double best_threshold = 0, best_score = std::numeric_limits<double>::infinity();
        for (int f = 0; f < features_per_split; ++f) {
            uint32_t feat = feature_pool[f];
            sorted_vals.clear();
            for (size_t i : samples) sorted_vals.emplace_back(x.row(i)[feat], y[i]);
            std::sort(sorted_vals.begin(), sorted_vals.end());

            size_t left_pos = 0;
            for (size_t i = 1; i < n; ++i) {
                left_pos += sorted_vals[i - 1].second;
                if (sorted_vals[i - 1].first == sorted_vals[i].first) continue;
                if (i < static_cast<size_t>(min_samples_leaf) ||
                    n - i < static_cast<size_t>(min_samples_leaf))
                    continue;
                double ln = static_cast<double>(i), rn = static_cast<double>(n - i);
                double lp = left_pos / ln, rp = (pos - left_pos) / rn;
                double gini = ln * 2.0 * lp * (1.0 - lp) + rn * 2.0 * rp * (1.0 - rp);
                if (gini < best_score) {
                    best_score = gini;
                    best_feature = static_cast<int>(feat);
                    best_threshold =
                        sorted_vals[i - 1].first +
                        (sorted_vals[i].first - sorted_vals[i - 1].first) / 2.0;
                }
            }
        }
        if (best_feature < 0) return as_leaf(node_id);

        std::vector<size_t> left, right;
        for (size_t i : samples)
            (x.row(i)[best_feature] <= best_threshold ? left : right).push_back(i);
        if (left.empty() || right.empty()) return as_leaf(node_id);
        samples.clear();
        samples.shrink_to_fit();

        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        int l = build(left, depth + 1);
        tree.nodes[node_id].left = l;
        int r = build(right, depth + 1);
        tree.nodes[node_id].right = r;
        return node_id;
    }
};

}  // namespace

ForestModel train_forest(const DataMatrix& x, const std::vector<int>& y,
                         ForestConfig config) {
    if (x.rows() != y.size() || x.rows() == 0)
        throw ConfigError("forest training needs matching non-empty rows and labels");
    if (config.n_trees < 1 || config.max_depth < 1 || config.min_samples_leaf < 1 ||
        config.workers < 1)
        throw ConfigError("bad forest config");
    size_t pos = 0;
    for (int v : y) pos += v;
    if (pos == 0 || pos == y.size())
        throw ConfigError("forest training needs both classes present");

    const size_t n = x.rows();
    std::vector<Tree> trees(config.n_trees);
#pragma omp parallel for schedule(dynamic) num_threads(config.workers)
    for (int t = 0; t < config.n_trees; ++t) {
        Rng boot(mix64(config.seed, static_cast<uint64_t>(t), 0xb007u));
        std::vector<size_t> samples(n);
        for (size_t i = 0; i < n; ++i) samples[i] = boot.uniform(n);
        TreeBuilder builder(x, y, config, mix64(config.seed, static_cast<uint64_t>(t), 0x7e3eu));
        builder.build(samples, 0);
        trees[t] = std::move(builder.tree);
    }
    return ForestModel(std::move(trees), config, x.cols);
}

// --- evaluation ----------------------------------------------------------------

EvalReport evaluate(const std::vector<std::pair<double, int>>& scored, double threshold) {
    size_t total_pos = 0;
    for (const auto& [s, l] : scored) total_pos += l;
    if (total_pos == 0 || total_pos == scored.size())
        throw ConfigError("evaluation needs at least one positive and one negative label");

    EvalReport rep;
    rep.threshold = threshold;

    size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [s, l] : scored) {
        if (s >= threshold)
            (l ? tp : fp)++;
        else if (l)
            ++fn;
    }
    rep.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    rep.recall = static_cast<double>(tp) / (tp + fn);
    rep.f1 = rep.precision + rep.recall == 0
                 ? 0.0
                 : 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall);

    // PR curve at every distinct score, descending; average precision is the
    // step-wise sum over the same points.
    auto sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    size_t cum_tp = 0, cum_fp = 0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < sorted.size();) {
        size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            cum_tp += sorted[j].second;
            cum_fp += 1 - sorted[j].second;
            ++j;
        }
        double precision = static_cast<double>(cum_tp) / (cum_tp + cum_fp);
        double recall = static_cast<double>(cum_tp) / total_pos;
        rep.pr_curve.emplace_back(recall, precision);
        rep.pr_auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return rep;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["threshold"] = threshold;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["pr_auc"] = pr_auc;
    j["split_seed"] = split_seed;
    auto curve = nlohmann::json::array();
    for (const auto& [r, p] : pr_curve) curve.push_back({r, p});
    j["pr_curve"] = curve;
    return j.dump();
}

SplitIndices stratified_split(const std::vector<int>& y, double test_fraction,
                              uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw ConfigError("test fraction must be in [0, 1]");
    SplitIndices out;
    for (int cls : {0, 1}) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        if (idx.empty()) continue;
        Rng rng(mix64(seed, static_cast<uint64_t>(cls)));
        rng.partial_shuffle(idx, idx.size());
        size_t take = static_cast<size_t>(std::llround(test_fraction * idx.size()));
        if (idx.size() >= 2) take = std::clamp<size_t>(take, 1, idx.size() - 1);
        for (size_t i = 0; i < idx.size(); ++i)
            (i < take ? out.test : out.train).push_back(idx[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// --- model file ------------------------------------------------------------------

void ForestModel::save(const std::filesystem::path& path) const {
    std::string body = "risksea-forest-v1\n";
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "trees=%zu features=%zu max_depth=%d min_samples_leaf=%d seed=%llu\n",
                  trees_.size(), n_features_, config_.max_depth, config_.min_samples_leaf,
                  static_cast<unsigned long long>(config_.seed));
    body += buf;
    for (const auto& tree : trees_) {
        std::snprintf(buf, sizeof(buf), "tree %zu\n", tree.nodes.size());
        body += buf;
        for (const auto& n : tree.nodes) {
            std::snprintf(buf, sizeof(buf), "%d %.17g %d %d %.17g\n", n.feature,
                          n.threshold, n.left, n.right, n.leaf_fraction);
            body += buf;
        }
    }
    atomic_write(path, body);
}

ForestModel ForestModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open forest model " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "risksea-forest-v1") throw DataError("not a forest model: " + path.string());

    size_t n_trees = 0, n_features = 0;
    ForestConfig cfg;
    unsigned long long seed = 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(),
                    "trees=%zu features=%zu max_depth=%d min_samples_leaf=%d seed=%llu",
                    &n_trees, &n_features, &cfg.max_depth, &cfg.min_samples_leaf,
                    &seed) != 5)
        throw DataError("bad forest header");
    cfg.seed = seed;
    cfg.n_trees = static_cast<int>(n_trees);

    std::vector<Tree> trees;
    trees.reserve(n_trees);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t n_nodes = 0;
        if (std::sscanf(line.c_str(), "tree %zu", &n_nodes) != 1)
            throw DataError("bad tree header");
        Tree tree;
        tree.nodes.reserve(n_nodes);
        for (size_t i = 0; i < n_nodes; ++i) {
            if (!std::getline(in, line)) throw DataError("truncated forest model");
            TreeNode n;
            if (std::sscanf(line.c_str(), "%d %lg %d %d %lg", &n.feature, &n.threshold,
                            &n.left, &n.right, &n.leaf_fraction) != 5)
                throw DataError("bad tree node");
            tree.nodes.push_back(n);
        }
        trees.push_back(std::move(tree));
    }
    if (trees.size() != n_trees) throw DataError("forest tree count mismatch");
    return ForestModel(std::move(trees), cfg, n_features);
}

}  // namespace risksea
