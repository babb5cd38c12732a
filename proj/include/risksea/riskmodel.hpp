#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "risksea/common.hpp"

namespace risksea {

struct RiskLabel {
    Address addr;
    int cls = 0;  // 0 good, 1 risky
    std::string source;
};

// Per-address max over sources: a high risk class takes precedence.
std::map<Address, int> resolve_labels(const std::vector<RiskLabel>& raw);

// CSV `address,class,source`.
std::vector<RiskLabel> load_labels_csv(const std::filesystem::path& path);
void save_labels_csv(const std::filesystem::path& path, const std::vector<RiskLabel>& labels);

// Row-major feature matrix.
struct DataMatrix {
    size_t cols = 0;
    std::vector<double> values;

    size_t rows() const { return cols ? values.size() / cols : 0; }
    std::span<const double> row(size_t i) const { return {values.data() + i * cols, cols}; }
    void add_row(std::span<const double> r) {
        if (cols == 0) cols = r.size();
        if (r.size() != cols) throw ConfigError("feature row length mismatch");
        values.insert(values.end(), r.begin(), r.end());
    }
};

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 16;
    int min_samples_leaf = 5;
    uint64_t seed = 7;
    int workers = 1;
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_fraction = 0.0;  // positive fraction at a leaf
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(std::span<const double> row) const;
};

class ForestModel {
  public:
    ForestModel() = default;
    ForestModel(std::vector<Tree> trees, ForestConfig config, size_t n_features)
        : trees_(std::move(trees)), config_(config), n_features_(n_features) {}

    // Mean over trees of the leaf positive fraction; always in [0, 1].
    double score(std::span<const double> row) const;

    size_t n_features() const { return n_features_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const ForestConfig& config() const { return config_; }

    void save(const std::filesystem::path& path) const;
    static ForestModel load(const std::filesystem::path& path);

  private:
    std::vector<Tree> trees_;
    ForestConfig config_;
    size_t n_features_ = 0;
};

// Bootstrap-aggregated Gini trees over sqrt(n_features) random feature
// subsets per node; deterministic under (seed, config) for any worker count.
// Requires at least one row of each class.
ForestModel train_forest(const DataMatrix& x, const std::vector<int>& y,
                         ForestConfig config);

struct EvalReport {
    double threshold = 0.5;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double pr_auc = 0.0;
    std::vector<std::pair<double, double>> pr_curve;  // (recall, precision)
    uint64_t split_seed = 0;  // recorded by harnesses that evaluated on a split

    std::string to_json() const;
};

// Threshold metrics plus the PR curve over every distinct score, descending;
// pr_auc is step-wise average precision. Needs both classes present.
EvalReport evaluate(const std::vector<std::pair<double, int>>& scored, double threshold);

// Seeded stratified split; test gets round(fraction * n) of each class,
// clamped so both sides keep at least one row of any class with >= 2 rows.
struct SplitIndices {
    std::vector<size_t> train;
    std::vector<size_t> test;
};
SplitIndices stratified_split(const std::vector<int>& y, double test_fraction,
                              uint64_t seed);

}  // namespace risksea
