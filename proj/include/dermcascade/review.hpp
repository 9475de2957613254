#ifndef DERMCASCADE_REVIEW_HPP
#define DERMCASCADE_REVIEW_HPP

// Validation of the anonymized corpus by two reviewers: a stratified sample is
// split into two equal-size subsets that share a block of records, verdicts on
// the shared block give the inter-rater agreement.

#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dermcascade {

struct ReviewPartition {
    LabeledCorpus sample;
    std::set<std::string> subset_a;
    std::set<std::string> subset_b;
    std::set<std::string> shared_ids;
};

namespace detail {

/// Largest-remainder apportionment of round(fraction * total) across labels.
/// Remainder ties go to the label that comes first alphabetically.
inline std::map<std::string, std::size_t> apportion(const LabeledCorpus& corpus, double fraction) {
    const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(corpus.size())));
    std::map<std::string, std::size_t> alloc;
    std::vector<std::pair<double, std::string>> remainders;
    std::size_t assigned = 0;
    for (const auto& [label, count] : corpus.label_counts()) {
        const double exact = fraction * static_cast<double>(count);
        const auto base = static_cast<std::size_t>(std::floor(exact));
        alloc[label] = base;
        assigned += base;
        remainders.emplace_back(exact - static_cast<double>(base), label);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned)
        ++alloc[remainders[i].second];
    return alloc;
}

} // namespace detail

/// Draws a stratified sample of round(fraction * N) records and splits it into
/// two equal subsets sharing round(overlap_fraction * |sample|) records. When
/// the unshared remainder is odd one record is dropped from the sample so that
/// both subsets keep the same size.
inline ReviewPartition generate_review_partition(const LabeledCorpus& corpus, double fraction,
                                                 double overlap_fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("review fraction must lie in (0, 1]");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
        throw Error("overlap fraction must lie in [0, 1)");

    Rng rng(seed);
    const auto alloc = detail::apportion(corpus, fraction);
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) groups[corpus.records()[i].label].push_back(i);

    std::vector<std::size_t> chosen;
    std::vector<std::string> rounded_up;  // labels allocated above floor
    for (auto& [label, idx] : groups) {
        rng.shuffle(idx);
        const std::size_t n = alloc.at(label);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
        if (static_cast<double>(n) > fraction * static_cast<double>(idx.size())) rounded_up.push_back(label);
    }

    std::size_t sample_size = chosen.size();
    if (sample_size < 2) throw Error("review sample too small: " + std::to_string(sample_size) + " records");
    const auto shared = static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(sample_size)));
    if (overlap_fraction > 0.0 && shared >= sample_size - 1)
        throw Error("review sample of " + std::to_string(sample_size) +
                    " records is too small for overlap fraction " + std::to_string(overlap_fraction));

    if ((sample_size - shared) % 2 == 1) {
        // Drop the last drawn record of a label that was rounded up, otherwise the last drawn.
        std::size_t drop = chosen.size() - 1;
        for (std::size_t i = chosen.size(); i-- > 0;) {
            const auto& label = corpus.records()[chosen[i]].label;
            if (std::find(rounded_up.begin(), rounded_up.end(), label) != rounded_up.end()) {
                drop = i;
                break;
            }
        }
        chosen.erase(chosen.begin() + static_cast<std::ptrdiff_t>(drop));
        --sample_size;
    }

    std::vector<std::size_t> order = chosen;
    rng.shuffle(order);
    ReviewPartition part;
    const std::size_t unique_each = (sample_size - shared) / 2;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& id = corpus.records()[order[i]].id;
        if (i < shared) {
            part.shared_ids.insert(id);
            part.subset_a.insert(id);
            part.subset_b.insert(id);
        } else if (i < shared + unique_each) {
            part.subset_a.insert(id);
        } else {
            part.subset_b.insert(id);
        }
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<ClinicalRecord> sample;
    sample.reserve(chosen.size());
    for (auto i : chosen) sample.push_back(corpus.records()[i]);
    part.sample = LabeledCorpus(std::move(sample));
    return part;
}

inline nlohmann::ordered_json partition_to_json(const ReviewPartition& p) {
    nlohmann::ordered_json j;
    j["format"] = "dermcascade.review-partition/1";
    j["sample_ids"] = nlohmann::ordered_json::array();
    for (const auto& r : p.sample.records()) j["sample_ids"].push_back(r.id);
    j["subset_a"] = p.subset_a;
    j["subset_b"] = p.subset_b;
    j["shared_ids"] = p.shared_ids;
    return j;
}

/// Rebuilds a partition from its JSON form, taking sample records from `corpus`.
inline ReviewPartition partition_from_json(const nlohmann::json& j, const LabeledCorpus& corpus) {
    std::map<std::string, const ClinicalRecord*> by_id;
    for (const auto& r : corpus.records()) by_id[r.id] = &r;
    ReviewPartition p;
    std::vector<ClinicalRecord> sample;
    for (const auto& id : j.at("sample_ids")) {
        auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end()) throw Error("partition references unknown record id '" + id.get<std::string>() + "'");
        sample.push_back(*it->second);
    }
    p.sample = LabeledCorpus(std::move(sample));
    p.subset_a = j.at("subset_a").get<std::set<std::string>>();
    p.subset_b = j.at("subset_b").get<std::set<std::string>>();
    p.shared_ids = j.at("shared_ids").get<std::set<std::string>>();
    return p;
}

enum class Judgment { correct, over_masked, under_masked };

inline const char* to_string(Judgment j) {
    switch (j) {
    case Judgment::correct: return "correct";
    case Judgment::over_masked: return "over-masked";
    case Judgment::under_masked: return "under-masked";
    }
    return "?";
}

inline Judgment parse_judgment(std::string_view s) {
    if (s == "correct") return Judgment::correct;
    if (s == "over-masked") return Judgment::over_masked;
    if (s == "under-masked") return Judgment::under_masked;
    throw Error("unknown judgment '" + std::string(s) + "'");
}

struct Verdict {
    std::string record_id;
    std::string reviewer_id;
    Judgment judgment = Judgment::correct;
    std::optional<std::string> note;
    std::string timestamp;  // ISO-8601, opaque to the library
};

inline nlohmann::ordered_json verdict_to_json(const Verdict& v) {
    nlohmann::ordered_json j;
    j["record_id"] = v.record_id;
    j["reviewer_id"] = v.reviewer_id;
    j["judgment"] = to_string(v.judgment);
    if (v.note) j["note"] = *v.note;
    j["timestamp"] = v.timestamp;
    return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    v.record_id = j.at("record_id").get<std::string>();
    v.reviewer_id = j.at("reviewer_id").get<std::string>();
    v.judgment = parse_judgment(j.at("judgment").get<std::string>());
    if (j.contains("note") && !j["note"].is_null()) v.note = j["note"].get<std::string>();
    v.timestamp = j.value("timestamp", "");
    return v;
}

/// Cohen's kappa from a square contingency table (rows: rater 1).
/// When chance agreement is 1 (both raters used a single category), kappa is
/// 1 if observed agreement is also 1, else 0.
inline double cohen_kappa(const std::vector<std::vector<std::size_t>>& table) {
    const std::size_t k = table.size();
    double n = 0, diag = 0;
    std::vector<double> rows(k, 0), cols(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const auto c = static_cast<double>(table[i][j]);
            n += c;
            rows[i] += c;
            cols[j] += c;
            if (i == j) diag += c;
        }
    if (n == 0) return 0.0;
    const double po = diag / n;
    double pe = 0;
    for (std::size_t i = 0; i < k; ++i) pe += (rows[i] / n) * (cols[i] / n);
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

struct AgreementReport {
    double raw_agreement = 0.0;
    double kappa = 0.0;
    std::vector<std::string> disagreements;  // record ids, sorted
    std::size_t shared = 0;
};

/// Agreement between two reviewers over the shared ids. Without an explicit
/// roster the reviewers are taken from the verdicts in order of first
/// appearance. The latest verdict per (record, reviewer) wins.
inline AgreementReport compute_agreement(
    const std::vector<Verdict>& verdicts, const ReviewPartition& partition,
    const std::optional<std::pair<std::string, std::string>>& roster = std::nullopt) {
    std::vector<std::string> reviewers;
    if (roster) reviewers = {roster->first, roster->second};
    std::map<std::pair<std::string, std::string>, Judgment> latest;
    for (const auto& v : verdicts) {
        if (std::find(reviewers.begin(), reviewers.end(), v.reviewer_id) == reviewers.end()) {
            if (roster) continue;
            reviewers.push_back(v.reviewer_id);
        }
        latest[{v.record_id, v.reviewer_id}] = v.judgment;
    }
    if (reviewers.size() != 2)
        throw Error("agreement needs verdicts from exactly two reviewers, found " + std::to_string(reviewers.size()));
    if (partition.shared_ids.empty()) throw Error("partition has no shared ids");

    std::vector<std::vector<std::size_t>> table(3, std::vector<std::size_t>(3, 0));
    AgreementReport report;
    report.shared = partition.shared_ids.size();
    std::size_t agree = 0;
    for (const auto& id : partition.shared_ids) {
        auto a = latest.find({id, reviewers[0]});
        auto b = latest.find({id, reviewers[1]});
        if (a == latest.end())
            throw Error("missing verdict from reviewer '" + reviewers[0] + "' on shared id '" + id + "'");
        if (b == latest.end())
            throw Error("missing verdict from reviewer '" + reviewers[1] + "' on shared id '" + id + "'");
        ++table[static_cast<std::size_t>(a->second)][static_cast<std::size_t>(b->second)];
        if (a->second == b->second) ++agree;
        else report.disagreements.push_back(id);
    }
    report.raw_agreement = static_cast<double>(agree) / static_cast<double>(report.shared);
    report.kappa = cohen_kappa(table);
    return report;
}

/// Append-only JSONL verdict log. Writes are serialized by an internal mutex;
/// a verdict for an already judged (record, reviewer) pair is rejected unless
/// it is an explicit supersede, which is logged as a new line.
class VerdictStore {
public:
    enum class Outcome { stored, conflict };

    VerdictStore() = default;

    /// Opens (or creates) the log at `path` and replays existing entries.
    explicit VerdictStore(std::string path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                record(verdict_from_json(j));
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError(std::string("bad verdict entry: ") + e.what(), line_no);
            }
        }
    }

    Outcome submit(const Verdict& v, bool supersede = false) {
        std::lock_guard lock(mutex_);
        const bool exists = current_.count({v.record_id, v.reviewer_id}) > 0;
        if (exists && !supersede) return Outcome::conflict;
        if (!exists && supersede) return Outcome::conflict;
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw Error("cannot append to verdict store '" + path_ + "'");
            auto j = verdict_to_json(v);
            if (supersede) j["supersedes"] = true;
            out << j.dump() << '\n';
            out.flush();
        }
        record(v);
        return Outcome::stored;
    }

    std::optional<Verdict> find(const std::string& record_id, const std::string& reviewer_id) const {
        std::lock_guard lock(mutex_);
        auto it = current_.find({record_id, reviewer_id});
        if (it == current_.end()) return std::nullopt;
        return log_[it->second];
    }

    /// Current verdicts (supersedes applied), in first-submission order.
    std::vector<Verdict> current() const {
        std::lock_guard lock(mutex_);
        std::vector<std::pair<std::size_t, Verdict>> ordered;
        for (const auto& [key, i] : current_) ordered.emplace_back(first_seen_.at(key), log_[i]);
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Verdict> out;
        for (auto& [pos, v] : ordered) out.push_back(std::move(v));
        return out;
    }

    /// Every logged verdict including superseded ones.
    std::vector<Verdict> history() const {
        std::lock_guard lock(mutex_);
        return log_;
    }

private:
    void record(const Verdict& v) {
        const auto key = std::make_pair(v.record_id, v.reviewer_id);
        if (!first_seen_.count(key)) first_seen_[key] = log_.size();
        current_[key] = log_.size();
        log_.push_back(v);
    }

    std::string path_;
    mutable std::mutex mutex_;
    std::vector<Verdict> log_;
    std::map<std::pair<std::string, std::string>, std::size_t> current_;
    std::map<std::pair<std::string, std::string>, std::size_t> first_seen_;
};

} // namespace dermcascade

#endif
