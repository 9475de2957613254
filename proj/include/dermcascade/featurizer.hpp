#ifndef DERMCASCADE_FEATURIZER_HPP
#define DERMCASCADE_FEATURIZER_HPP

#include "dermcascade/error.hpp"
#include "dermcascade/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dermcascade {

inline constexpr std::string_view kMarkerOpen = "⟦";   // ⟦
inline constexpr std::string_view kMarkerClose = "⟧";  // ⟧

/// Lowercase letter runs of at least two code points, accents kept, no
/// stemming. A bracketed span ⟦...⟧ is emitted whole (lowercased, whitespace
/// collapsed) so relation markers never collide with report vocabulary.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    auto flush_words = [&](std::string_view chunk) {
        for (const auto& run : text::letter_runs(chunk)) {
            auto word = chunk.substr(run.begin, run.end - run.begin);
            if (text::codepoint_count(word) >= 2) tokens.push_back(text::lowercase(word));
        }
    };
    while (i < s.size()) {
        const auto open = s.find(kMarkerOpen, i);
        if (open == std::string_view::npos) {
            flush_words(s.substr(i));
            break;
        }
        const auto close = s.find(kMarkerClose, open + kMarkerOpen.size());
        if (close == std::string_view::npos) {
            flush_words(s.substr(i));
            break;
        }
        flush_words(s.substr(i, open - i));
        const auto inner = s.substr(open + kMarkerOpen.size(), close - open - kMarkerOpen.size());
        tokens.push_back(std::string(kMarkerOpen) + text::normalize_label(inner) + std::string(kMarkerClose));
        i = close + kMarkerClose.size();
    }
    return tokens;
}

struct Feature {
    std::uint32_t index;
    double value;

    friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sparse row, sorted by index.
using SparseVector = std::vector<Feature>;

struct FeaturizerConfig {
    std::size_t max_features = 50000;
};

/// TF-IDF with smoothed idf ln((1+N)/(1+df)) + 1 and L2-normalized rows.
/// Terms unseen at fit time are ignored at transform time.
class TfidfFeaturizer {
public:
    TfidfFeaturizer() = default;
    explicit TfidfFeaturizer(FeaturizerConfig config) : config_(config) {}

    /// Builds the vocabulary from `texts`. When the cap binds, the terms with
    /// the highest document frequency are kept (ties by term). Indices follow
    /// lexicographic term order.
    void fit(const std::vector<std::string>& texts) {
        std::map<std::string, std::size_t> df;
        for (const auto& t : texts) {
            auto toks = tokenize(t);
            std::sort(toks.begin(), toks.end());
            toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
            for (auto& tok : toks) ++df[tok];
        }
        std::vector<std::pair<std::string, std::size_t>> terms(df.begin(), df.end());
        if (terms.size() > config_.max_features) {
            std::stable_sort(terms.begin(), terms.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            terms.resize(config_.max_features);
            std::sort(terms.begin(), terms.end());
        }
        num_docs_ = texts.size();
        index_.clear();
        terms_.clear();
        idf_.clear();
        doc_freq_.clear();
        for (auto& [term, count] : terms) {
            index_[term] = static_cast<std::uint32_t>(terms_.size());
            terms_.push_back(term);
            doc_freq_.push_back(count);
            idf_.push_back(std::log((1.0 + static_cast<double>(num_docs_)) / (1.0 + static_cast<double>(count))) + 1.0);
        }
    }

    SparseVector transform(std::string_view s) const {
        std::map<std::uint32_t, double> tf;
        for (const auto& tok : tokenize(s)) {
            auto it = index_.find(tok);
            if (it != index_.end()) tf[it->second] += 1.0;
        }
        SparseVector v;
        v.reserve(tf.size());
        double norm2 = 0;
        for (auto [idx, count] : tf) {
            const double w = count * idf_[idx];
            v.push_back({idx, w});
            norm2 += w * w;
        }
        if (norm2 > 0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (auto& f : v) f.value *= inv;
        }
        return v;
    }

    std::vector<SparseVector> transform_all(const std::vector<std::string>& texts) const {
        std::vector<SparseVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(transform(t));
        return out;
    }

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<std::size_t>& document_frequencies() const noexcept { return doc_freq_; }
    const FeaturizerConfig& config() const noexcept { return config_; }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["max_features"] = config_.max_features;
        j["num_docs"] = num_docs_;
        j["terms"] = terms_;
        j["document_frequencies"] = doc_freq_;
        return j;
    }

    static TfidfFeaturizer from_json(const nlohmann::json& j) {
        TfidfFeaturizer f(FeaturizerConfig{j.at("max_features").get<std::size_t>()});
        f.num_docs_ = j.at("num_docs").get<std::size_t>();
        f.terms_ = j.at("terms").get<std::vector<std::string>>();
        f.doc_freq_ = j.at("document_frequencies").get<std::vector<std::size_t>>();
        if (f.terms_.size() != f.doc_freq_.size()) throw Error("vocabulary and document frequencies differ in length");
        for (std::size_t i = 0; i < f.terms_.size(); ++i) {
            f.index_[f.terms_[i]] = static_cast<std::uint32_t>(i);
            f.idf_.push_back(std::log((1.0 + static_cast<double>(f.num_docs_)) / (1.0 + static_cast<double>(f.doc_freq_[i]))) + 1.0);
        }
        return f;
    }

private:
    FeaturizerConfig config_;
    std::size_t num_docs_ = 0;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::string> terms_;
    std::vector<std::size_t> doc_freq_;
    std::vector<double> idf_;
};

} // namespace dermcascade

#endif
