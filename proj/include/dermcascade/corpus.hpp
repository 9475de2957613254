#ifndef DERMCASCADE_CORPUS_HPP
#define DERMCASCADE_CORPUS_HPP

#include "dermcascade/error.hpp"
#include "dermcascade/rng.hpp"
#include "dermcascade/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dermcascade {

struct ClinicalRecord {
    std::string id;
    std::string text;
    std::string label;

    friend bool operator==(const ClinicalRecord&, const ClinicalRecord&) = default;
};

/// Ordered records plus the per-label counts derived from them.
class LabeledCorpus {
public:
    LabeledCorpus() = default;

    /// Takes ownership of `records`. Throws RowError on an empty label or a
    /// repeated id.
    explicit LabeledCorpus(std::vector<ClinicalRecord> records) : records_(std::move(records)) {
        std::unordered_set<std::string> ids;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (r.label.empty()) throw RowError("blank label", i);
            if (!ids.insert(r.id).second) throw RowError("duplicate id '" + r.id + "'", i);
            ++counts_[r.label];
        }
    }

    const std::vector<ClinicalRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Label -> count, ordered by label.
    const std::map<std::string, std::size_t>& label_counts() const noexcept { return counts_; }
    std::size_t num_labels() const noexcept { return counts_.size(); }

    std::size_t count(const std::string& label) const {
        auto it = counts_.find(label);
        return it == counts_.end() ? 0 : it->second;
    }

    /// Labels by descending count, ties by ascending label.
    std::vector<std::string> labels_by_frequency() const {
        std::vector<std::pair<std::string, std::size_t>> v(counts_.begin(), counts_.end());
        std::stable_sort(v.begin(), v.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        std::vector<std::string> out;
        out.reserve(v.size());
        for (auto& [l, c] : v) out.push_back(l);
        return out;
    }

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(records_.size());
        for (const auto& r : records_) out.push_back(r.text);
        return out;
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(records_.size());
        for (const auto& r : records_) out.push_back(r.label);
        return out;
    }

    friend bool operator==(const LabeledCorpus& a, const LabeledCorpus& b) {
        return a.records_ == b.records_;
    }

private:
    std::vector<ClinicalRecord> records_;
    std::map<std::string, std::size_t> counts_;
};

enum class CorpusFormat { jsonl, csv };

inline CorpusFormat parse_corpus_format(std::string_view s) {
    if (s == "jsonl") return CorpusFormat::jsonl;
    if (s == "csv") return CorpusFormat::csv;
    throw Error("unknown corpus format '" + std::string(s) + "' (expected jsonl or csv)");
}

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    bool stratified = true;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw Error("train fraction must lie strictly between 0 and 1");
    }
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t offset;  // byte offset of the row start
};

/// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
/// CRLF or LF line endings. Blank lines are skipped.
inline std::vector<CsvRow> parse_csv(std::string_view data) {
    std::vector<CsvRow> rows;
    std::size_t i = 0;
    const std::size_t n = data.size();
    if (n >= 3 && data.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    while (i < n) {
        if (data[i] == '\n' || (data[i] == '\r' && i + 1 < n && data[i + 1] == '\n')) {
            i += data[i] == '\r' ? 2 : 1;
            continue;
        }
        CsvRow row{{}, i};
        std::string field;
        bool done = false;
        while (!done) {
            field.clear();
            if (i < n && data[i] == '"') {
                const std::size_t quote_at = i;
                ++i;
                bool closed = false;
                while (i < n) {
                    if (data[i] == '"') {
                        if (i + 1 < n && data[i + 1] == '"') {
                            field += '"';
                            i += 2;
                            continue;
                        }
                        ++i;
                        closed = true;
                        break;
                    }
                    field += data[i++];
                }
                if (!closed) throw ParseError("unterminated quoted field", quote_at);
                if (i < n && data[i] != ',' && data[i] != '\n' && data[i] != '\r')
                    throw ParseError("unexpected character after closing quote", i);
            } else {
                while (i < n && data[i] != ',' && data[i] != '\n' && data[i] != '\r') {
                    if (data[i] == '"') throw ParseError("quote inside unquoted field", i);
                    field += data[i++];
                }
            }
            row.fields.push_back(field);
            if (i >= n) {
                done = true;
            } else if (data[i] == ',') {
                ++i;
            } else if (data[i] == '\n') {
                ++i;
                done = true;
            } else if (data[i] == '\r') {
                if (i + 1 < n && data[i + 1] == '\n') {
                    i += 2;
                } else {
                    throw ParseError("bare carriage return", i);
                }
                done = true;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_escape(std::string_view field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline ClinicalRecord make_record(std::string id, std::string text, std::string_view raw_label,
                                  std::size_t row) {
    std::string label = text::normalize_label(raw_label);
    if (label.empty()) throw RowError("missing or blank label", row);
    if (text::trim(text).empty()) throw RowError("missing or blank text", row);
    return {std::move(id), std::move(text), std::move(label)};
}

inline std::vector<ClinicalRecord> parse_jsonl(std::string_view data) {
    std::vector<ClinicalRecord> records;
    std::size_t pos = 0;
    std::size_t row = 0;
    while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string_view::npos) eol = data.size();
        std::string_view line = data.substr(pos, eol - pos);
        if (!text::trim(line).empty()) {
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                const std::size_t within = e.byte > 0 ? e.byte - 1 : 0;
                throw ParseError(std::string("invalid JSON: ") + e.what(), pos + within);
            }
            if (!obj.is_object()) throw ParseError("JSONL line is not an object", pos);
            auto str_field = [&](const char* key) -> std::string {
                auto it = obj.find(key);
                if (it == obj.end() || it->is_null()) return {};
                if (it->is_string()) return it->get<std::string>();
                if (it->is_number_integer()) return std::to_string(it->get<long long>());
                throw RowError(std::string("field '") + key + "' is not a string", row);
            };
            std::string id = str_field("id");
            if (id.empty()) id = std::to_string(row);
            records.push_back(make_record(std::move(id), str_field("text"), str_field("label"), row));
            ++row;
        }
        pos = eol + 1;
    }
    return records;
}

inline std::vector<ClinicalRecord> parse_csv_corpus(std::string_view data) {
    auto rows = parse_csv(data);
    if (rows.empty()) return {};
    const auto& header = rows.front().fields;
    int id_col = -1, text_col = -1, label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string h = text::normalize_label(header[c]);
        if (h == "id") id_col = static_cast<int>(c);
        else if (h == "text") text_col = static_cast<int>(c);
        else if (h == "label") label_col = static_cast<int>(c);
    }
    if (text_col < 0 || label_col < 0)
        throw ParseError("CSV header must contain 'text' and 'label' columns", rows.front().offset);
    std::vector<ClinicalRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != header.size())
            throw ParseError("row has " + std::to_string(f.size()) + " fields, header has " +
                                 std::to_string(header.size()),
                             rows[r].offset);
        const std::size_t row = r - 1;
        std::string id = id_col >= 0 ? f[static_cast<std::size_t>(id_col)] : std::string{};
        if (id.empty()) id = std::to_string(row);
        records.push_back(make_record(std::move(id), f[static_cast<std::size_t>(text_col)],
                                      f[static_cast<std::size_t>(label_col)], row));
    }
    return records;
}

} // namespace detail

/// Parses corpus content already in memory. Labels are normalized.
inline LabeledCorpus parse_corpus(std::string_view data, CorpusFormat format) {
    return LabeledCorpus(format == CorpusFormat::jsonl ? detail::parse_jsonl(data)
                                                       : detail::parse_csv_corpus(data));
}

inline LabeledCorpus load_corpus(const std::string& path, CorpusFormat format) {
    return parse_corpus(detail::read_file(path), format);
}

inline std::string serialize_corpus(const LabeledCorpus& corpus, CorpusFormat format) {
    std::string out;
    if (format == CorpusFormat::jsonl) {
        for (const auto& r : corpus.records()) {
            nlohmann::ordered_json obj;
            obj["id"] = r.id;
            obj["text"] = r.text;
            obj["label"] = r.label;
            out += obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
            out += '\n';
        }
    } else {
        out += "id,text,label\n";
        for (const auto& r : corpus.records()) {
            out += detail::csv_escape(r.id) + ',' + detail::csv_escape(r.text) + ',' +
                   detail::csv_escape(r.label) + '\n';
        }
    }
    return out;
}

inline void save_corpus(const LabeledCorpus& corpus, const std::string& path, CorpusFormat format) {
    detail::write_file(path, serialize_corpus(corpus, format));
}

/// Keeps the records whose label occurs at least `min_count` times.
inline LabeledCorpus filter_by_min_frequency(const LabeledCorpus& corpus, std::size_t min_count) {
    if (min_count < 1) throw Error("min_count must be >= 1");
    std::vector<ClinicalRecord> kept;
    for (const auto& r : corpus.records())
        if (corpus.count(r.label) >= min_count) kept.push_back(r);
    if (kept.empty())
        throw Error("no classes survive threshold " + std::to_string(min_count));
    return LabeledCorpus(std::move(kept));
}

/// Number of distinct labels with count >= threshold, for each threshold.
inline std::vector<std::size_t> class_counts_by_threshold(const LabeledCorpus& corpus,
                                                          const std::vector<std::size_t>& thresholds) {
    std::vector<std::size_t> out;
    out.reserve(thresholds.size());
    for (auto t : thresholds) {
        std::size_t n = 0;
        for (const auto& [label, count] : corpus.label_counts())
            if (count >= t) ++n;
        out.push_back(n);
    }
    return out;
}

struct CorpusSplit {
    LabeledCorpus train;
    LabeledCorpus test;
};

/// Train share per label is round(fraction * count) clamped to [1, count-1].
/// Both outputs keep the input order.
inline CorpusSplit stratified_split(const LabeledCorpus& corpus, const SplitSpec& spec) {
    spec.validate();
    const auto& records = corpus.records();
    std::vector<bool> in_train(records.size(), false);
    Rng rng(spec.seed);

    auto take = [&](std::vector<std::size_t> idx) {
        const auto c = static_cast<double>(idx.size());
        auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * c));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        rng.shuffle(idx);
        for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
    };

    if (spec.stratified) {
        std::vector<std::string> singletons;
        for (const auto& [label, count] : corpus.label_counts())
            if (count < 2) singletons.push_back(label);
        if (!singletons.empty())
            throw ListError("stratified split needs at least 2 records per label", singletons);
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].label].push_back(i);
        for (auto& [label, idx] : groups) take(std::move(idx));
    } else {
        if (records.size() < 2) throw Error("split needs at least 2 records");
        std::vector<std::size_t> idx(records.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        take(std::move(idx));
    }

    std::vector<ClinicalRecord> train, test;
    for (std::size_t i = 0; i < records.size(); ++i)
        (in_train[i] ? train : test).push_back(records[i]);
    return {LabeledCorpus(std::move(train)), LabeledCorpus(std::move(test))};
}

} // namespace dermcascade

#endif
