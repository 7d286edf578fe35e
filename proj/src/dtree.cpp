#include "toolwatch/dtree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace toolwatch::dtree {

namespace {

constexpr double kMinDecrease = 1e-12;

ClassHistogram histogram_of(const features::FeatureTable& table, std::span<const std::size_t> rows) {
    ClassHistogram h{};
    for (std::size_t r : rows) ++h[severity(*table[r].label)];
    return h;
}

ToolCondition majority(const ClassHistogram& h) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (h[c] > h[best]) best = c;
    }
    return static_cast<ToolCondition>(best);
}

std::unique_ptr<TreeNode> grow(const features::FeatureTable& table, std::vector<std::size_t> rows,
                               std::size_t depth, const TreeOptions& opt) {
    auto node = std::make_unique<TreeNode>();
    node->class_histogram = histogram_of(table, rows);
    node->gini = gini(node->class_histogram);
    node->sample_count = rows.size();
    node->predicted_label = majority(node->class_histogram);

    if (node->gini == 0.0 || depth >= opt.max_depth || rows.size() < opt.min_samples_split) {
        return node;
    }
    const auto split = best_split(table, rows);
    if (!split) return node;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
        (table[r].values[split->feature] <= split->threshold ? left : right).push_back(r);
    }
    node->split_feature = split->feature;
    node->split_threshold = split->threshold;
    node->left = grow(table, std::move(left), depth + 1, opt);
    node->right = grow(table, std::move(right), depth + 1, opt);
    return node;
}

void walk(const TreeNode& n, const std::function<void(const TreeNode&)>& f) {
    f(n);
    if (!n.is_leaf()) {
        walk(*n.left, f);
        walk(*n.right, f);
    }
}

std::size_t depth_of(const TreeNode& n) {
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_of(*n.left), depth_of(*n.right));
}

}  // namespace

double gini(const ClassHistogram& histogram) {
    const std::size_t total = std::accumulate(histogram.begin(), histogram.end(), std::size_t{0});
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::size_t c : histogram) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

std::optional<SplitCandidate> best_split(const features::FeatureTable& table,
                                         std::span<const std::size_t> rows) {
    const std::size_t n = rows.size();
    if (n < 2) return std::nullopt;
    const ClassHistogram parent = histogram_of(table, rows);
    const double parent_gini = gini(parent);
    const double nd = static_cast<double>(n);

    std::optional<SplitCandidate> best;
    std::vector<std::pair<double, std::size_t>> column(n);
    for (std::size_t f = 0; f < table.dimension(); ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = {table[rows[i]].values[f], severity(*table[rows[i]].label)};
        }
        std::sort(column.begin(), column.end());

        ClassHistogram left{};
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left[column[i].second];
            const double a = column[i].first;
            const double b = column[i + 1].first;
            if (a == b) continue;

            ClassHistogram right{};
            for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = parent[c] - left[c];
            const double nl = static_cast<double>(i + 1);
            const double nr = nd - nl;
            const double decrease = parent_gini - (nl / nd) * gini(left) - (nr / nd) * gini(right);

            double threshold = a + (b - a) / 2.0;
            if (!(threshold < b)) threshold = a;
            if (decrease > kMinDecrease && (!best || decrease > best->impurity_decrease + kMinDecrease)) {
                best = SplitCandidate{f, threshold, decrease};
            }
        }
    }
    return best;
}

DecisionTree fit_tree(const features::FeatureTable& table, const TreeOptions& options) {
    if (table.empty()) throw Error("fit_tree: empty table");
    if (options.max_depth < 1) throw Error("fit_tree: max_depth must be at least 1");
    if (!table.fully_labeled()) throw Error("fit_tree: table has unlabeled rows");

    std::vector<std::size_t> rows(table.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    DecisionTree tree;
    tree.feature_names = table.feature_names();
    tree.root = grow(table, std::move(rows), 0, options);
    return tree;
}

std::size_t DecisionTree::node_count() const {
    std::size_t count = 0;
    if (root) walk(*root, [&](const TreeNode&) { ++count; });
    return count;
}

std::size_t DecisionTree::depth() const { return root ? depth_of(*root) : 0; }

ToolCondition DecisionTree::predict(std::span<const double> row) const {
    if (row.size() != feature_names.size()) throw Error("tree predict: dimension mismatch");
    const TreeNode* n = root.get();
    while (!n->is_leaf()) {
        n = row[n->split_feature] <= n->split_threshold ? n->left.get() : n->right.get();
    }
    return n->predicted_label;
}

ImportanceRanking feature_importance(const DecisionTree& tree, const features::FeatureTable& table) {
    if (tree.feature_names != table.feature_names()) {
        throw Error("feature_importance: table columns differ from the tree's");
    }
    const std::size_t d = tree.feature_names.size();
    std::vector<double> raw(d, 0.0);
    const double total = static_cast<double>(tree.root->sample_count);

    walk(*tree.root, [&](const TreeNode& n) {
        if (n.is_leaf()) return;
        const double nn = static_cast<double>(n.sample_count);
        const double weighted_child =
            (static_cast<double>(n.left->sample_count) / nn) * n.left->gini +
            (static_cast<double>(n.right->sample_count) / nn) * n.right->gini;
        raw[n.split_feature] += (nn / total) * (n.gini - weighted_child);
    });

    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    ImportanceRanking ranking;
    ranking.has_split = !tree.root->is_leaf();
    if (ranking.has_split && sum > 0.0) {
        for (double& v : raw) v /= sum;
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
    for (std::size_t i : order) ranking.entries.emplace_back(tree.feature_names[i], raw[i]);
    return ranking;
}

std::vector<std::string> select_top_k(const ImportanceRanking& ranking, std::size_t k,
                                      std::span<const std::string> column_order) {
    if (k < 1 || k > ranking.entries.size()) {
        throw Error("select_top_k: k = " + std::to_string(k) + " outside [1, " +
                    std::to_string(ranking.entries.size()) + "]");
    }
    std::vector<std::string> chosen;
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(ranking.entries[i].first);

    std::vector<std::string> out;
    for (const auto& name : column_order) {
        if (std::find(chosen.begin(), chosen.end(), name) != chosen.end()) out.push_back(name);
    }
    if (out.size() != k) throw Error("select_top_k: ranking names missing from column order");
    return out;
}

std::string export_dot(const DecisionTree& tree) {
    std::ostringstream out;
    out << std::setprecision(6);
    out << "digraph DecisionTree {\n";
    out << "  node [shape=box, fontname=\"helvetica\"];\n";
    std::size_t next_id = 0;
    std::function<std::size_t(const TreeNode&)> emit = [&](const TreeNode& n) -> std::size_t {
        const std::size_t id = next_id++;
        out << "  n" << id << " [label=\"";
        if (!n.is_leaf()) {
            out << tree.feature_names[n.split_feature] << " <= " << n.split_threshold << "\\n";
        }
        out << "gini = " << n.gini << "\\nsamples = " << n.sample_count << "\\nvalue = ["
            << n.class_histogram[0] << ", " << n.class_histogram[1] << ", " << n.class_histogram[2]
            << "]\\nclass = " << display_name(n.predicted_label) << "\"];\n";
        if (!n.is_leaf()) {
            const std::size_t l = emit(*n.left);
            out << "  n" << id << " -> n" << l << " [label=\"true\"];\n";
            const std::size_t r = emit(*n.right);
            out << "  n" << id << " -> n" << r << " [label=\"false\"];\n";
        }
        return id;
    };
    if (tree.root) emit(*tree.root);
    out << "}\n";
    return out.str();
}

void save_ranking_csv(const ImportanceRanking& ranking, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "feature,importance\n" << std::setprecision(17);
    for (const auto& [name, v] : ranking.entries) out << name << ',' << v << '\n';
}

}  // namespace toolwatch::dtree
