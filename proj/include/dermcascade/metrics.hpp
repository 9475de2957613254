#ifndef DERMCASCADE_METRICS_HPP
#define DERMCASCADE_METRICS_HPP

// Single-label multiclass evaluation.
//
// Definitions used throughout:
//  - accuracy: share of documents whose rank-1 prediction is the truth.
//  - per-class F1 = 2TP / (2TP + FP + FN) from rank-1 decisions.
//  - micro-F1 pools TP/FP/FN over all classes; for single-label data it equals
//    accuracy.
//  - macro-F1 averages per-class F1 over the classes present in the truth.
//  - top-k accuracy: share of documents whose truth is among the first k.
//  - top-k F1 (set-based): a hit is one TP for the true class, a miss one FN;
//    every top-k prediction other than the truth is one FP for that class;
//    then pooled micro-style. Equals micro-F1 at k = 1.

#include "dermcascade/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace dermcascade {

using Ranking = std::vector<std::string>;

struct ConfusionMatrix {
    std::vector<std::string> class_names;   // rows, truth classes
    std::vector<std::string> column_names;  // class_names followed by unseen predicted labels
    std::vector<std::vector<std::size_t>> counts;  // [row][column]
    std::vector<std::string> warnings;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& r : counts)
            for (auto c : r) n += c;
        return n;
    }
};

struct MetricReport {
    double accuracy = 0;
    double micro_f1 = 0;
    double macro_f1 = 0;
    double top_k_accuracy = 0;
    double top_k_f1 = 0;
    std::size_t k = 2;
    std::size_t num_documents = 0;
    std::vector<std::pair<std::string, double>> per_class_f1;  // by descending truth frequency
    ConfusionMatrix confusion;
};

namespace detail {

inline void check_inputs(const std::vector<std::string>& truth, const std::vector<Ranking>& ranked, std::size_t k) {
    if (k < 1) throw Error("k must be >= 1");
    if (truth.size() != ranked.size())
        throw Error("truth has " + std::to_string(truth.size()) + " entries, predictions " +
                    std::to_string(ranked.size()));
    if (truth.empty()) throw Error("evaluation needs at least one document");
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (ranked[i].empty()) throw Error("document " + std::to_string(i) + " has an empty ranking");
}

/// Truth classes by descending frequency, ties by ascending name.
inline std::vector<std::string> classes_by_frequency(const std::vector<std::string>& truth) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : truth) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (auto& [name, c] : v) out.push_back(name);
    return out;
}

inline double f1(double tp, double fp, double fn) {
    const double d = 2 * tp + fp + fn;
    return d == 0 ? 0.0 : 2 * tp / d;
}

} // namespace detail

inline ConfusionMatrix confusion_matrix(const std::vector<std::string>& truth, const std::vector<std::string>& predicted) {
    if (truth.size() != predicted.size()) throw Error("truth and predictions differ in length");
    if (truth.empty()) throw Error("confusion matrix needs at least one document");
    ConfusionMatrix cm;
    cm.class_names = detail::classes_by_frequency(truth);
    cm.column_names = cm.class_names;
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < cm.column_names.size(); ++i) col[cm.column_names[i]] = i;
    for (const auto& p : predicted) {
        if (!col.count(p)) {
            col[p] = cm.column_names.size();
            cm.column_names.push_back(p);
            cm.warnings.push_back("predicted label '" + p + "' does not occur in the truth; added as extra column");
        }
    }
    cm.counts.assign(cm.class_names.size(), std::vector<std::size_t>(cm.column_names.size(), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[col.at(truth[i])][col.at(predicted[i])];
    return cm;
}

struct TopKResult {
    double accuracy;
    double f1;
};

inline TopKResult topk_metrics(const std::vector<std::string>& truth, const std::vector<Ranking>& ranked, std::size_t k) {
    detail::check_inputs(truth, ranked, k);
    std::size_t hits = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::size_t depth = std::min(k, ranked[i].size());
        bool hit = false;
        for (std::size_t r = 0; r < depth; ++r) {
            if (ranked[i][r] == truth[i]) hit = true;
            else ++fp;
        }
        if (hit) ++hits;
        else ++fn;
    }
    const auto n = static_cast<double>(truth.size());
    return {static_cast<double>(hits) / n,
            detail::f1(static_cast<double>(hits), static_cast<double>(fp), static_cast<double>(fn))};
}

/// Rankings may be shorter than k; missing positions count as no prediction.
inline MetricReport evaluate_single_label(const std::vector<std::string>& truth, const std::vector<Ranking>& ranked,
                                          std::size_t k) {
    detail::check_inputs(truth, ranked, k);
    MetricReport report;
    report.k = k;
    report.num_documents = truth.size();

    std::vector<std::string> top1;
    top1.reserve(ranked.size());
    for (const auto& r : ranked) top1.push_back(r.front());
    report.confusion = confusion_matrix(truth, top1);

    const auto& cm = report.confusion;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < cm.class_names.size(); ++i) correct += cm.counts[i][i];
    const auto n = static_cast<double>(truth.size());
    report.accuracy = static_cast<double>(correct) / n;

    // Per-class counts over every column label (truth classes and extras).
    double tp_sum = 0, fp_sum = 0, fn_sum = 0, macro = 0;
    for (std::size_t c = 0; c < cm.column_names.size(); ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t r = 0; r < cm.class_names.size(); ++r) {
            const auto v = static_cast<double>(cm.counts[r][c]);
            if (r == c) tp += v;
            else fp += v;
        }
        if (c < cm.class_names.size()) {
            for (std::size_t cc = 0; cc < cm.column_names.size(); ++cc)
                if (cc != c) fn += static_cast<double>(cm.counts[c][cc]);
            const double score = detail::f1(tp, fp, fn);
            report.per_class_f1.emplace_back(cm.class_names[c], score);
            macro += score;
        }
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn;
    }
    report.micro_f1 = detail::f1(tp_sum, fp_sum, fn_sum);
    report.macro_f1 = macro / static_cast<double>(cm.class_names.size());

    const auto topk = topk_metrics(truth, ranked, k);
    report.top_k_accuracy = topk.accuracy;
    report.top_k_f1 = topk.f1;
    return report;
}

inline nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json j;
    j["class_names"] = cm.class_names;
    j["column_names"] = cm.column_names;
    j["counts"] = cm.counts;
    if (!cm.warnings.empty()) j["warnings"] = cm.warnings;
    return j;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["num_documents"] = r.num_documents;
    j["accuracy"] = r.accuracy;
    j["micro_f1"] = r.micro_f1;
    j["macro_f1"] = r.macro_f1;
    j["k"] = r.k;
    j["top_k_accuracy"] = r.top_k_accuracy;
    j["top_k_f1"] = r.top_k_f1;
    j["macro_f1_scope"] = "classes present in truth";
    j["per_class_f1"] = nlohmann::ordered_json::array();
    for (const auto& [label, f] : r.per_class_f1) j["per_class_f1"].push_back({{"label", label}, {"f1", f}});
    j["confusion"] = to_json(r.confusion);
    return j;
}

/// CSV with a header row of predicted labels; first column is the true label.
inline std::string confusion_to_csv(const ConfusionMatrix& cm) {
    auto esc = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    };
    std::string out = "true\\predicted";
    for (const auto& c : cm.column_names) out += "," + esc(c);
    out += '\n';
    for (std::size_t r = 0; r < cm.class_names.size(); ++r) {
        out += esc(cm.class_names[r]);
        for (auto v : cm.counts[r]) out += "," + std::to_string(v);
        out += '\n';
    }
    return out;
}

} // namespace dermcascade

#endif
