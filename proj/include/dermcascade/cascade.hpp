#ifndef DERMCASCADE_CASCADE_HPP
#define DERMCASCADE_CASCADE_HPP

// Cascaded relation -> disease classification.
//
// A schedule orders a subset of the relations {t, gr, sit}. Stage i learns
// schedule[i] from the report augmented with the values of schedule[0..i-1];
// the final model learns the disease from the report augmented with every
// scheduled relation. Training always injects gold relation values (teacher
// forcing). At inference, predictive mode (PR) chains each stage's top
// prediction into the next input; oracle mode (OR) skips the stages and
// injects the gold triple.

#include "dermcascade/classifier.hpp"
#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/metrics.hpp"
#include "dermcascade/ontology.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dermcascade {

enum class Mode { oracle, predictive };

inline const char* to_string(Mode m) { return m == Mode::oracle ? "OR" : "PR"; }

inline Mode parse_mode(std::string_view s) {
    if (s == "OR" || s == "or") return Mode::oracle;
    if (s == "PR" || s == "pr") return Mode::predictive;
    throw Error("unknown mode '" + std::string(s) + "' (expected OR or PR)");
}

class RelationSchedule {
public:
    RelationSchedule() = default;

    explicit RelationSchedule(std::vector<Relation> order) : order_(std::move(order)) {
        if (order_.empty()) throw Error("a schedule needs at least one relation");
        if (order_.size() > kAllRelations.size()) throw Error("a schedule has at most 3 relations");
        std::set<Relation> seen;
        for (auto r : order_)
            if (!seen.insert(r).second) throw Error("schedule repeats relation '" + std::string(short_name(r)) + "'");
    }

    /// Parses "sit,gr,t".
    static RelationSchedule parse(std::string_view s) {
        std::vector<Relation> order;
        for (const auto& part : text::split(s, ',')) {
            const auto name = std::string(text::trim(part));
            auto r = parse_relation(name);
            if (!r) throw Error("unknown relation '" + name + "' in schedule");
            order.push_back(*r);
        }
        return RelationSchedule(std::move(order));
    }

    const std::vector<Relation>& order() const noexcept { return order_; }
    std::size_t size() const noexcept { return order_.size(); }
    Relation operator[](std::size_t i) const { return order_[i]; }

    bool contains(Relation r) const { return std::find(order_.begin(), order_.end(), r) != order_.end(); }

    /// "sit,gr,t"
    std::string to_string() const {
        std::vector<std::string> parts;
        for (auto r : order_) parts.emplace_back(short_name(r));
        return text::join(parts, ",");
    }

    /// "sit → gr → t"
    std::string display() const {
        std::vector<std::string> parts;
        for (auto r : order_) parts.emplace_back(short_name(r));
        return text::join(parts, " → ");
    }

    friend bool operator==(const RelationSchedule&, const RelationSchedule&) = default;

private:
    std::vector<Relation> order_;
};

/// All repetition-free orderings of 1..max_len relations: sum n!/(n-k)!.
/// Sorted by length, then lexicographically with relations ranked t < gr < sit.
inline std::vector<RelationSchedule> enumerate_schedules(std::vector<Relation> relations, std::size_t max_len) {
    std::sort(relations.begin(), relations.end());
    relations.erase(std::unique(relations.begin(), relations.end()), relations.end());
    if (relations.empty()) throw Error("schedule enumeration needs at least one relation");
    if (max_len < 1) throw Error("max_len must be >= 1");
    if (max_len > relations.size())
        throw Error("max_len " + std::to_string(max_len) + " exceeds the " + std::to_string(relations.size()) +
                    " available relations");
    std::vector<RelationSchedule> out;
    std::vector<Relation> current;
    std::vector<bool> used(relations.size(), false);
    std::function<void(std::size_t)> extend = [&](std::size_t target) {
        if (current.size() == target) {
            out.emplace_back(current);
            return;
        }
        for (std::size_t i = 0; i < relations.size(); ++i) {
            if (used[i]) continue;
            used[i] = true;
            current.push_back(relations[i]);
            extend(target);
            current.pop_back();
            used[i] = false;
        }
    };
    for (std::size_t len = 1; len <= max_len; ++len) extend(len);
    return out;
}

/// Marker template: `separator + open + name + assign + value + close` per relation.
struct AugmentationFormat {
    std::string separator = " ";
    std::string open = "⟦REL ";
    std::string assign = "=";
    std::string close = "⟧";

    nlohmann::ordered_json to_json() const {
        return {{"separator", separator}, {"open", open}, {"assign", assign}, {"close", close}};
    }

    static AugmentationFormat from_json(const nlohmann::json& j) {
        AugmentationFormat f;
        f.separator = j.at("separator").get<std::string>();
        f.open = j.at("open").get<std::string>();
        f.assign = j.at("assign").get<std::string>();
        f.close = j.at("close").get<std::string>();
        return f;
    }
};

using RelationValues = std::vector<std::pair<std::string, std::string>>;

/// Appends one marker per (relation, value) pair in order. Names are short
/// relation names (t, gr, sit); values must belong to the relation's closed set.
inline std::string augment_input(std::string_view report, const RelationValues& known,
                                 const AugmentationFormat& format = {}) {
    std::string out(report);
    for (const auto& [name, value] : known) {
        const auto rel = parse_relation(name);
        if (!rel) throw Error("unknown relation name '" + name + "'");
        if (!is_relation_value(*rel, value))
            throw Error("'" + value + "' is not a value of relation '" + name + "'");
        out += format.separator;
        out += format.open;
        out += name;
        out += format.assign;
        out += value;
        out += format.close;
    }
    return out;
}

inline RelationValues gold_values(const RelationTriple& triple, const std::vector<Relation>& relations) {
    RelationValues v;
    for (auto r : relations) v.emplace_back(std::string(short_name(r)), triple.value(r));
    return v;
}

class CascadeModel {
public:
    RelationSchedule schedule;
    std::vector<std::unique_ptr<TextClassifier>> stages;  // one per schedule entry
    std::unique_ptr<TextClassifier> final_model;
    AugmentationFormat format;
    std::vector<std::string> warnings;
};

/// Trainers per role; `stage_overrides` and `final_override` replace
/// `default_trainer` for specific stages or the final model.
struct CascadeBackends {
    const ClassifierTrainer* default_trainer = nullptr;
    std::map<Relation, const ClassifierTrainer*> stage_overrides;
    const ClassifierTrainer* final_override = nullptr;

    const ClassifierTrainer& for_stage(Relation r) const {
        if (auto it = stage_overrides.find(r); it != stage_overrides.end() && it->second) return *it->second;
        if (!default_trainer) throw Error("no trainer configured");
        return *default_trainer;
    }

    const ClassifierTrainer& for_final() const {
        if (final_override) return *final_override;
        if (!default_trainer) throw Error("no trainer configured");
        return *default_trainer;
    }
};

/// Receives each model's training inputs; `target` is empty for the final model.
using TrainingObserver =
    std::function<void(std::optional<Relation> target, const std::vector<std::string>& inputs)>;

namespace detail {

inline const RelationTriple& triple_for(const TripleTable& triples, const std::string& label) {
    auto it = triples.find(label);
    if (it == triples.end()) throw Error("no relation triple for label '" + label + "'");
    return it->second;
}

inline void require_triples(const LabeledCorpus& corpus, const TripleTable& triples) {
    std::vector<std::string> missing;
    for (const auto& [label, count] : corpus.label_counts())
        if (!triples.count(label)) missing.push_back(label);
    if (!missing.empty()) throw ListError("labels without relation triples", missing);
}

} // namespace detail

inline CascadeModel train_cascade(const LabeledCorpus& train, const TripleTable& triples,
                                  const RelationSchedule& schedule, const CascadeBackends& backends,
                                  const AugmentationFormat& format = {}, const TrainingObserver& observer = {}) {
    if (schedule.size() == 0) throw Error("cannot train a cascade with an empty schedule");
    detail::require_triples(train, triples);
    CascadeModel model;
    model.schedule = schedule;
    model.format = format;

    const auto& records = train.records();
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const Relation target = schedule[i];
        const std::vector<Relation> upstream(schedule.order().begin(),
                                             schedule.order().begin() + static_cast<std::ptrdiff_t>(i));
        std::vector<std::string> inputs, labels;
        inputs.reserve(records.size());
        labels.reserve(records.size());
        for (const auto& r : records) {
            const auto& triple = detail::triple_for(triples, r.label);
            inputs.push_back(augment_input(r.text, gold_values(triple, upstream), format));
            labels.push_back(triple.value(target));
        }
        if (observer) observer(target, inputs);
        const std::set<std::string> distinct(labels.begin(), labels.end());
        if (distinct.size() == 1) {
            model.warnings.push_back("stage '" + std::string(short_name(target)) +
                                     "' has a single value in training data ('" + *distinct.begin() +
                                     "'); using a constant predictor");
            model.stages.push_back(std::make_unique<ConstantClassifier>(*distinct.begin()));
        } else {
            model.stages.push_back(backends.for_stage(target).fit(inputs, labels));
        }
    }

    std::vector<std::string> inputs, labels;
    for (const auto& r : records) {
        inputs.push_back(augment_input(r.text, gold_values(detail::triple_for(triples, r.label), schedule.order()), format));
        labels.push_back(r.label);
    }
    if (observer) observer(std::nullopt, inputs);
    model.final_model = backends.for_final().fit(inputs, labels);
    return model;
}

inline CascadeModel train_cascade(const LabeledCorpus& train, const TripleTable& triples,
                                  const RelationSchedule& schedule, const TrainConfig& config,
                                  const AugmentationFormat& format = {}, const TrainingObserver& observer = {}) {
    LinearTrainer trainer(config);
    CascadeBackends backends;
    backends.default_trainer = &trainer;
    return train_cascade(train, triples, schedule, backends, format, observer);
}

struct CascadePrediction {
    RelationValues relations;  // values fed to the final model, in schedule order
    std::vector<ScoredLabel> diseases;
};

inline CascadePrediction infer_cascade_detailed(const CascadeModel& model, std::string_view report, Mode mode,
                                                const std::optional<RelationTriple>& oracle, std::size_t k) {
    if (k < 1) throw Error("k must be >= 1");
    if (mode == Mode::oracle && !oracle) throw Error("oracle mode requires a gold relation triple");
    if (mode == Mode::predictive && oracle) throw Error("predictive mode must not receive a gold relation triple");
    if (!model.final_model || model.stages.size() != model.schedule.size()) throw Error("cascade model is incomplete");

    CascadePrediction out;
    if (mode == Mode::oracle) {
        out.relations = gold_values(*oracle, model.schedule.order());
    } else {
        for (std::size_t i = 0; i < model.schedule.size(); ++i) {
            const std::string input = augment_input(report, out.relations, model.format);
            const auto top = model.stages[i]->predict_topk(input, 1);
            if (top.empty()) throw Error("stage returned no prediction");
            out.relations.emplace_back(std::string(short_name(model.schedule[i])), top.front().label);
        }
    }
    out.diseases = model.final_model->predict_topk(augment_input(report, out.relations, model.format), k);
    return out;
}

inline std::vector<ScoredLabel> infer_cascade(const CascadeModel& model, std::string_view report, Mode mode,
                                              const std::optional<RelationTriple>& oracle, std::size_t k) {
    return infer_cascade_detailed(model, report, mode, oracle, k).diseases;
}

struct CascadeEvaluation {
    MetricReport disease;
    std::vector<std::pair<Relation, MetricReport>> stages;  // PR only: predicted vs gold relation values
};

inline CascadeEvaluation evaluate_cascade(const CascadeModel& model, const LabeledCorpus& corpus,
                                          const TripleTable& triples, Mode mode, std::size_t k) {
    std::vector<std::string> truth;
    std::vector<Ranking> ranked;
    std::vector<std::vector<std::string>> stage_truth(model.schedule.size()), stage_pred(model.schedule.size());
    for (const auto& r : corpus.records()) {
        const auto& triple = detail::triple_for(triples, r.label);
        auto pred = infer_cascade_detailed(model, r.text, mode,
                                           mode == Mode::oracle ? std::optional(triple) : std::nullopt, k);
        truth.push_back(r.label);
        Ranking ranking;
        for (auto& s : pred.diseases) ranking.push_back(std::move(s.label));
        ranked.push_back(std::move(ranking));
        for (std::size_t i = 0; i < model.schedule.size(); ++i) {
            stage_truth[i].push_back(triple.value(model.schedule[i]));
            stage_pred[i].push_back(pred.relations[i].second);
        }
    }
    CascadeEvaluation eval;
    eval.disease = evaluate_single_label(truth, ranked, k);
    if (mode == Mode::predictive) {
        for (std::size_t i = 0; i < model.schedule.size(); ++i) {
            std::vector<Ranking> top1;
            for (auto& p : stage_pred[i]) top1.push_back({p});
            eval.stages.emplace_back(model.schedule[i], evaluate_single_label(stage_truth[i], top1, 1));
        }
    }
    return eval;
}

/// Baseline without relations: the disease classifier alone on raw reports.
inline std::unique_ptr<TextClassifier> train_vanilla(const LabeledCorpus& train, const ClassifierTrainer& trainer) {
    return trainer.fit(train.texts(), train.labels());
}

inline MetricReport evaluate_classifier(const TextClassifier& clf, const LabeledCorpus& corpus, std::size_t k) {
    std::vector<Ranking> ranked;
    for (const auto& r : corpus.records()) {
        Ranking ranking;
        for (auto& s : clf.predict_topk(r.text, k)) ranking.push_back(std::move(s.label));
        ranked.push_back(std::move(ranking));
    }
    return evaluate_single_label(corpus.labels(), ranked, k);
}

// --- schedule search ---------------------------------------------------------

enum class RankKey { accuracy, micro_f1, macro_f1 };

inline RankKey parse_rank_key(std::string_view s) {
    if (s == "accuracy") return RankKey::accuracy;
    if (s == "micro-f1" || s == "micro_f1") return RankKey::micro_f1;
    if (s == "macro-f1" || s == "macro_f1") return RankKey::macro_f1;
    throw Error("unknown ranking key '" + std::string(s) + "'");
}

inline const char* to_string(RankKey k) {
    switch (k) {
    case RankKey::accuracy: return "accuracy";
    case RankKey::micro_f1: return "micro-f1";
    case RankKey::macro_f1: return "macro-f1";
    }
    return "?";
}

inline double rank_value(const MetricReport& r, RankKey key) {
    switch (key) {
    case RankKey::accuracy: return r.accuracy;
    case RankKey::micro_f1: return r.micro_f1;
    case RankKey::macro_f1: return r.macro_f1;
    }
    return 0;
}

struct SearchOptions {
    std::size_t max_len = 3;
    RankKey key = RankKey::accuracy;
    Mode mode = Mode::predictive;
    std::size_t k = 2;
};

struct ScheduleResult {
    RelationSchedule schedule;
    CascadeEvaluation evaluation;
};

/// Trains and evaluates one cascade per enumerated schedule. Results are sorted
/// by the ranking key, descending; ties keep enumeration order.
inline std::vector<ScheduleResult> search_schedules(const LabeledCorpus& train, const LabeledCorpus& validation,
                                                    const TripleTable& triples, const std::vector<Relation>& relations,
                                                    const CascadeBackends& backends, const SearchOptions& options = {},
                                                    const AugmentationFormat& format = {}) {
    std::set<std::string> train_ids;
    for (const auto& r : train.records()) train_ids.insert(r.id);
    for (const auto& r : validation.records())
        if (train_ids.count(r.id)) throw Error("validation record '" + r.id + "' also appears in training data");
    detail::require_triples(train, triples);
    detail::require_triples(validation, triples);

    std::vector<ScheduleResult> results;
    for (const auto& schedule : enumerate_schedules(relations, options.max_len)) {
        auto model = train_cascade(train, triples, schedule, backends, format);
        results.push_back({schedule, evaluate_cascade(model, validation, triples, options.mode, options.k)});
    }
    std::stable_sort(results.begin(), results.end(), [&](const auto& a, const auto& b) {
        return rank_value(a.evaluation.disease, options.key) > rank_value(b.evaluation.disease, options.key);
    });
    return results;
}

inline std::vector<ScheduleResult> search_schedules(const LabeledCorpus& train, const LabeledCorpus& validation,
                                                    const TripleTable& triples, const std::vector<Relation>& relations,
                                                    const TrainConfig& config, const SearchOptions& options = {}) {
    LinearTrainer trainer(config);
    CascadeBackends backends;
    backends.default_trainer = &trainer;
    return search_schedules(train, validation, triples, relations, backends, options);
}

// --- bundle ------------------------------------------------------------------

inline constexpr const char* kBundleFormat = "dermcascade.cascade-bundle/1";

/// Writes manifest.json plus one JSON file per stage and the final model.
inline void save_cascade(const CascadeModel& model, const std::string& dir, RankKey metric_key = RankKey::accuracy) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = kBundleFormat;
    manifest["schedule"] = model.schedule.to_string();
    manifest["augmentation"] = model.format.to_json();
    manifest["metric_key"] = to_string(metric_key);
    manifest["stages"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < model.stages.size(); ++i) {
        const std::string file = "stage_" + std::to_string(i) + "_" + std::string(short_name(model.schedule[i])) + ".json";
        detail::write_file((fs::path(dir) / file).string(), model.stages[i]->to_json().dump());
        manifest["stages"].push_back(file);
    }
    detail::write_file((fs::path(dir) / "final.json").string(), model.final_model->to_json().dump());
    manifest["final"] = "final.json";
    if (!model.warnings.empty()) manifest["warnings"] = model.warnings;
    detail::write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline CascadeModel load_cascade(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto manifest = nlohmann::json::parse(detail::read_file((fs::path(dir) / "manifest.json").string()));
    if (manifest.value("format", "") != kBundleFormat) throw Error("'" + dir + "' is not a cascade bundle");
    CascadeModel model;
    model.schedule = RelationSchedule::parse(manifest.at("schedule").get<std::string>());
    model.format = AugmentationFormat::from_json(manifest.at("augmentation"));
    for (const auto& file : manifest.at("stages"))
        model.stages.push_back(classifier_from_json(
            nlohmann::json::parse(detail::read_file((fs::path(dir) / file.get<std::string>()).string()))));
    if (model.stages.size() != model.schedule.size()) throw Error("bundle stage count does not match its schedule");
    model.final_model = classifier_from_json(
        nlohmann::json::parse(detail::read_file((fs::path(dir) / manifest.at("final").get<std::string>()).string())));
    if (manifest.contains("warnings")) model.warnings = manifest["warnings"].get<std::vector<std::string>>();
    return model;
}

} // namespace dermcascade

#endif
