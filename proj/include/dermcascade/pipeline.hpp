#ifndef DERMCASCADE_PIPELINE_HPP
#define DERMCASCADE_PIPELINE_HPP

// End-to-end experiment orchestration:
//   load -> anonymize (optional) -> filter -> split -> relations -> cascade
//   train -> evaluate (OR and PR) -> reports + manifest.
// Outputs are staged in a sibling directory and renamed into place, so a
// failed run leaves nothing behind. The manifest carries every config value;
// rerunning from it reproduces the reports byte for byte.

#include "dermcascade/anonymizer.hpp"
#include "dermcascade/cascade.hpp"
#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/metrics.hpp"
#include "dermcascade/ontology.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

namespace dermcascade {

inline constexpr const char* kDataRootEnv = "DERMCASCADE_DATA_ROOT";
inline constexpr const char* kManifestFormat = "dermcascade.run-manifest/1";

/// Relative paths that do not exist from the working directory are looked up
/// under $DERMCASCADE_DATA_ROOT when it is set.
inline std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
    if (const char* root = std::getenv(kDataRootEnv); root && *root) return (fs::path(root) / path).string();
    return path;
}

struct ExperimentConfig {
    std::string corpus_path;
    std::optional<CorpusFormat> corpus_format;  // inferred from the extension when empty
    std::string triples_path;                   // precomputed label -> triple table, or
    std::string snapshot_path;                  // snapshot + translations
    std::string translations_path;
    std::string lexicon_dir;
    bool anonymize = false;
    std::size_t min_count = 61;
    std::size_t k = 2;
    std::vector<std::string> schedules;  // e.g. "t,sit"
    bool search = false;
    std::size_t search_max_len = 3;
    RankKey rank_key = RankKey::accuracy;
    double validation_fraction = 0.2;  // share of the training split held out for search
    std::vector<Mode> modes{Mode::oracle, Mode::predictive};
    bool vanilla = true;
    SeverityPrecedence precedence = SeverityPrecedence::strongest_wins;
    TrainConfig train;
    SplitSpec split;
    std::string output_dir;

    void validate() const {
        if (corpus_path.empty()) throw Error("config: corpus path is required");
        if (triples_path.empty() && (snapshot_path.empty() || translations_path.empty()))
            throw Error("config: give a triples table or both a snapshot and a translation table");
        if (anonymize && lexicon_dir.empty()) throw Error("config: anonymize needs a lexicon directory");
        if (min_count < 1) throw Error("config: min_count must be >= 1");
        if (k < 1) throw Error("config: k must be >= 1");
        if (schedules.empty() && !search) throw Error("config: give at least one schedule or enable search");
        for (const auto& s : schedules) RelationSchedule::parse(s);
        if (search && (search_max_len < 1 || search_max_len > 3)) throw Error("config: search_max_len must be 1..3");
        if (search && !(validation_fraction > 0 && validation_fraction < 1))
            throw Error("config: validation_fraction must be in (0, 1)");
        if (modes.empty()) throw Error("config: at least one mode is required");
        train.validate();
        split.validate();
    }
};

inline const char* to_string(SeverityPrecedence p) {
    return p == SeverityPrecedence::strongest_wins ? "strongest-wins" : "first-match";
}

inline SeverityPrecedence parse_precedence(std::string_view s) {
    if (s == "strongest-wins") return SeverityPrecedence::strongest_wins;
    if (s == "first-match") return SeverityPrecedence::first_match;
    throw Error("unknown severity precedence '" + std::string(s) + "'");
}

/// Output directory is deliberately left out: it does not affect results.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["corpus_path"] = c.corpus_path;
    j["corpus_format"] = c.corpus_format ? (*c.corpus_format == CorpusFormat::csv ? "csv" : "jsonl") : "";
    j["triples_path"] = c.triples_path;
    j["snapshot_path"] = c.snapshot_path;
    j["translations_path"] = c.translations_path;
    j["lexicon_dir"] = c.lexicon_dir;
    j["anonymize"] = c.anonymize;
    j["min_count"] = c.min_count;
    j["k"] = c.k;
    j["schedules"] = c.schedules;
    j["search"] = c.search;
    j["search_max_len"] = c.search_max_len;
    j["rank_key"] = to_string(c.rank_key);
    j["validation_fraction"] = c.validation_fraction;
    j["modes"] = nlohmann::ordered_json::array();
    for (auto m : c.modes) j["modes"].push_back(to_string(m));
    j["vanilla"] = c.vanilla;
    j["severity_precedence"] = to_string(c.precedence);
    j["train"] = {{"batch_size", c.train.batch_size}, {"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},         {"l2", c.train.l2},
                  {"seed", c.train.seed},             {"optimizer", to_string(c.train.optimizer)}};
    j["split"] = {{"train_fraction", c.split.train_fraction}, {"seed", c.split.seed}, {"stratified", c.split.stratified}};
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.corpus_path = j.at("corpus_path").get<std::string>();
    if (const auto f = j.value("corpus_format", ""); !f.empty()) c.corpus_format = parse_corpus_format(f);
    c.triples_path = j.value("triples_path", "");
    c.snapshot_path = j.value("snapshot_path", "");
    c.translations_path = j.value("translations_path", "");
    c.lexicon_dir = j.value("lexicon_dir", "");
    c.anonymize = j.value("anonymize", false);
    c.min_count = j.value("min_count", c.min_count);
    c.k = j.value("k", c.k);
    c.schedules = j.value("schedules", std::vector<std::string>{});
    c.search = j.value("search", false);
    c.search_max_len = j.value("search_max_len", c.search_max_len);
    c.rank_key = parse_rank_key(j.value("rank_key", "accuracy"));
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : j["modes"]) c.modes.push_back(parse_mode(m.get<std::string>()));
    }
    c.vanilla = j.value("vanilla", true);
    c.precedence = parse_precedence(j.value("severity_precedence", "strongest-wins"));
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.l2 = t.value("l2", c.train.l2);
        c.train.seed = t.value("seed", c.train.seed);
        c.train.optimizer = parse_optimizer(t.value("optimizer", "adam"));
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
        c.split.seed = s.value("seed", c.split.seed);
        c.split.stratified = s.value("stratified", c.split.stratified);
    }
    return c;
}

namespace detail {

/// FNV-1a, recorded in manifests to pin input assets.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline CorpusFormat infer_format(const std::string& path, const std::optional<CorpusFormat>& given) {
    if (given) return *given;
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".csv") return CorpusFormat::csv;
    if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::jsonl;
    throw Error("cannot infer corpus format from '" + path + "'; set it explicitly");
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error(std::string("stage '") + name + "' failed: " + e.what());
    }
}

inline std::string schedule_slug(const RelationSchedule& s) {
    std::string out = s.to_string();
    for (auto& c : out)
        if (c == ',') c = '-';
    return out;
}

/// Runs `write(tmp)` into a staging directory next to `out`, then renames it
/// into place. On failure the staging directory is removed.
template <typename F>
void write_atomically(const std::string& out, bool overwrite, F&& write) {
    namespace fs = std::filesystem;
    const fs::path target(out);
    if (fs::exists(target) && !fs::is_empty(target) && !overwrite)
        throw Error("output directory '" + out + "' exists and is not empty");
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".partial-" + std::to_string(::getpid());
    fs::remove_all(tmp);
    try {
        fs::create_directories(tmp);
        write(tmp.string());
        fs::remove_all(target);
        fs::rename(tmp, target);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
}

} // namespace detail

/// Checks that every referenced asset exists before any work starts.
inline void preflight(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    config.validate();
    auto need = [](const std::string& what, const std::string& path) {
        if (!path.empty() && !fs::exists(resolve_data_path(path)))
            throw Error("preflight: " + what + " '" + path + "' not found");
    };
    need("corpus", config.corpus_path);
    need("triples table", config.triples_path);
    if (config.triples_path.empty()) {
        need("ontology snapshot", config.snapshot_path);
        need("translation table", config.translations_path);
    }
    if (config.anonymize) need("lexicon directory", config.lexicon_dir);
    detail::infer_format(config.corpus_path, config.corpus_format);
}

struct ConfigurationReport {
    std::string name;  // "vanilla", "OR t,sit", "PR t,sit"
    std::optional<RelationSchedule> schedule;
    std::optional<Mode> mode;
    MetricReport report;
    std::vector<std::pair<Relation, MetricReport>> stages;
};

struct PreparedData {
    LabeledCorpus corpus;  // after anonymization and filtering
    CorpusSplit split;
    TripleTable triples;
    std::size_t loaded_documents = 0;
    std::string corpus_hash;
};

/// Triples for every label of `corpus`, from the precomputed table when one is
/// configured, otherwise extracted from the snapshot.
inline TripleTable relation_table(const ExperimentConfig& config, const LabeledCorpus& corpus) {
    std::vector<std::string> labels;
    for (const auto& [label, n] : corpus.label_counts()) labels.push_back(label);
    if (!config.triples_path.empty()) {
        const auto all = load_triples(resolve_data_path(config.triples_path));
        TripleTable table;
        std::vector<std::string> missing;
        for (const auto& l : labels) {
            if (auto it = all.find(l); it != all.end()) table.insert(*it);
            else missing.push_back(l);
        }
        if (!missing.empty()) throw ListError("labels without relation triples", missing);
        return table;
    }
    auto map = load_translation_map(resolve_data_path(config.translations_path));
    return extract_all(labels, map, load_snapshot(resolve_data_path(config.snapshot_path)), config.precedence);
}

/// load -> anonymize -> filter -> split -> relations
inline PreparedData prepare_data(const ExperimentConfig& config, std::size_t min_count) {
    PreparedData data;
    auto corpus = detail::stage("load", [&] {
        const auto path = resolve_data_path(config.corpus_path);
        const auto raw = detail::read_file(path);
        data.corpus_hash = detail::fnv1a_hex(raw);
        return parse_corpus(raw, detail::infer_format(config.corpus_path, config.corpus_format));
    });
    data.loaded_documents = corpus.size();
    if (config.anonymize)
        corpus = detail::stage("anonymize", [&] {
            return anonymize_corpus(corpus, load_lexicons(resolve_data_path(config.lexicon_dir)));
        });
    data.corpus = detail::stage("filter", [&] { return filter_by_min_frequency(corpus, min_count); });
    data.split = detail::stage("split", [&] { return stratified_split(data.corpus, config.split); });
    data.triples = detail::stage("relations", [&] { return relation_table(config, data.corpus); });
    return data;
}

struct PipelineResult {
    std::vector<ConfigurationReport> reports;
    std::vector<ScheduleResult> search;  // empty unless search was enabled
    std::vector<std::string> warnings;
    nlohmann::ordered_json manifest;
};

inline nlohmann::ordered_json report_json(const ConfigurationReport& r) {
    nlohmann::ordered_json j;
    j["configuration"] = r.name;
    if (r.schedule) j["schedule"] = r.schedule->to_string();
    if (r.mode) j["mode"] = to_string(*r.mode);
    j["metrics"] = to_json(r.report);
    if (!r.stages.empty()) {
        j["stages"] = nlohmann::ordered_json::array();
        for (const auto& [rel, rep] : r.stages)
            j["stages"].push_back({{"relation", short_name(rel)}, {"accuracy", rep.accuracy}, {"macro_f1", rep.macro_f1}});
    }
    return j;
}

inline std::string summary_tsv(const std::vector<ConfigurationReport>& reports, std::size_t k) {
    std::string out = "configuration\taccuracy\tmicro_f1\tmacro_f1\ttop" + std::to_string(k) + "_accuracy\ttop" +
                      std::to_string(k) + "_f1\n";
    char buf[64];
    for (const auto& r : reports) {
        out += r.name;
        for (double v : {r.report.accuracy, r.report.micro_f1, r.report.macro_f1, r.report.top_k_accuracy,
                         r.report.top_k_f1}) {
            std::snprintf(buf, sizeof buf, "\t%.4f", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

/// Runs the experiment and, when `config.output_dir` is set, writes:
///   manifest.json, summary.tsv, reports/<config>.json, reports/<config>_confusion.csv,
///   search.json (with search), models/<schedule>/ cascade bundles.
inline PipelineResult run_pipeline(const ExperimentConfig& config, bool overwrite = false) {
    preflight(config);
    PipelineResult result;
    const auto data = prepare_data(config, config.min_count);
    const auto& train = data.split.train;
    const auto& test = data.split.test;

    LinearTrainer trainer(config.train);
    CascadeBackends backends;
    backends.default_trainer = &trainer;

    std::vector<RelationSchedule> schedules;
    for (const auto& s : config.schedules) schedules.push_back(RelationSchedule::parse(s));
    if (config.search) {
        result.search = detail::stage("search", [&] {
            SplitSpec inner = config.split;
            inner.train_fraction = 1.0 - config.validation_fraction;
            const auto holdout = stratified_split(train, inner);
            SearchOptions options;
            options.max_len = config.search_max_len;
            options.key = config.rank_key;
            options.mode = Mode::predictive;
            options.k = config.k;
            return search_schedules(holdout.train, holdout.test, data.triples,
                                    {Relation::type, Relation::severity, Relation::site}, backends, options);
        });
        const auto& best = result.search.front().schedule;
        if (std::find(schedules.begin(), schedules.end(), best) == schedules.end()) schedules.push_back(best);
    }

    std::unique_ptr<TextClassifier> vanilla;
    if (config.vanilla) {
        vanilla = detail::stage("train vanilla", [&] { return train_vanilla(train, trainer); });
        result.reports.push_back({"vanilla", std::nullopt, std::nullopt,
                                  detail::stage("evaluate vanilla", [&] { return evaluate_classifier(*vanilla, test, config.k); }),
                                  {}});
    }
    std::vector<CascadeModel> models;
    for (const auto& schedule : schedules) {
        models.push_back(detail::stage("cascade train", [&] { return train_cascade(train, data.triples, schedule, backends); }));
        for (const auto& w : models.back().warnings) result.warnings.push_back(schedule.to_string() + ": " + w);
        for (auto mode : config.modes) {
            auto eval = detail::stage("evaluate", [&] { return evaluate_cascade(models.back(), test, data.triples, mode, config.k); });
            result.reports.push_back({std::string(to_string(mode)) + " " + schedule.to_string(), schedule, mode,
                                      std::move(eval.disease), std::move(eval.stages)});
        }
    }
    for (const auto& r : result.reports)
        for (const auto& w : r.report.confusion.warnings) result.warnings.push_back(r.name + ": " + w);

    auto& m = result.manifest;
    m["format"] = kManifestFormat;
    m["config"] = to_json(config);
    m["data"] = {{"corpus_fnv1a", data.corpus_hash},
                 {"loaded_documents", data.loaded_documents},
                 {"documents_after_filter", data.corpus.size()},
                 {"classes", data.corpus.label_counts().size()},
                 {"train_documents", train.size()},
                 {"test_documents", test.size()}};
    m["schedules"] = nlohmann::ordered_json::array();
    for (const auto& s : schedules) m["schedules"].push_back(s.to_string());
    m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& r : result.reports) {
        const std::string base = r.schedule ? std::string(to_string(*r.mode)) + "_" + detail::schedule_slug(*r.schedule)
                                            : std::string("vanilla");
        m["outputs"].push_back("reports/" + base + ".json");
    }
    if (!result.warnings.empty()) m["warnings"] = result.warnings;

    if (!config.output_dir.empty()) {
        detail::stage("write", [&] {
            detail::write_atomically(config.output_dir, overwrite, [&](const std::string& dir) {
                namespace fs = std::filesystem;
                fs::create_directories(fs::path(dir) / "reports");
                for (const auto& r : result.reports) {
                    const std::string base = r.schedule
                        ? std::string(to_string(*r.mode)) + "_" + detail::schedule_slug(*r.schedule)
                        : std::string("vanilla");
                    detail::write_file((fs::path(dir) / "reports" / (base + ".json")).string(), report_json(r).dump(2) + "\n");
                    detail::write_file((fs::path(dir) / "reports" / (base + "_confusion.csv")).string(),
                                       confusion_to_csv(r.report.confusion));
                }
                if (!result.search.empty()) {
                    nlohmann::ordered_json s = nlohmann::ordered_json::array();
                    for (const auto& r : result.search)
                        s.push_back({{"schedule", r.schedule.to_string()},
                                     {"rank_value", rank_value(r.evaluation.disease, config.rank_key)},
                                     {"metrics", to_json(r.evaluation.disease)}});
                    detail::write_file((fs::path(dir) / "search.json").string(), s.dump(2) + "\n");
                }
                for (std::size_t i = 0; i < models.size(); ++i)
                    save_cascade(models[i], (fs::path(dir) / "models" / detail::schedule_slug(schedules[i])).string(),
                                 config.rank_key);
                if (vanilla)
                    detail::write_file((fs::path(dir) / "models" / "vanilla.json").string(), vanilla->to_json().dump());
                detail::write_file((fs::path(dir) / "summary.tsv").string(), summary_tsv(result.reports, config.k));
                detail::write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
            });
            return 0;
        });
    }
    return result;
}

/// Reruns the experiment recorded in a manifest into `output_dir`.
inline PipelineResult rerun_from_manifest(const std::string& manifest_path, const std::string& output_dir,
                                          bool overwrite = false) {
    const auto j = nlohmann::json::parse(detail::read_file(manifest_path));
    if (j.value("format", "") != kManifestFormat) throw Error("'" + manifest_path + "' is not a run manifest");
    auto config = experiment_config_from_json(j.at("config"));
    config.output_dir = output_dir;
    return run_pipeline(config, overwrite);
}

// --- threshold sweep -----------------------------------------------------------

struct SweepRow {
    std::size_t threshold = 0;
    std::size_t class_count = 0;
    std::size_t documents = 0;
    bool feasible = false;
    std::string reason;                                    // set when infeasible
    std::vector<std::pair<std::string, MetricReport>> reports;  // per configuration
};

/// For each threshold (ascending): filter, retrain the first configured
/// schedule, evaluate it in every configured mode. A threshold that leaves
/// fewer than two classes, or a split that cannot be made, marks the row
/// infeasible and the sweep continues.
inline std::vector<SweepRow> threshold_sweep(const ExperimentConfig& config, std::vector<std::size_t> thresholds) {
    if (thresholds.empty()) throw Error("threshold sweep needs at least one threshold");
    std::sort(thresholds.begin(), thresholds.end());
    if (thresholds.front() < 1) throw Error("thresholds must be positive");
    if (std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end())
        throw Error("thresholds must be distinct");
    ExperimentConfig base = config;
    base.search = false;
    if (base.schedules.empty()) throw Error("threshold sweep needs a schedule");
    preflight(base);
    const auto schedule = RelationSchedule::parse(base.schedules.front());

    auto corpus = detail::stage("load", [&] {
        return load_corpus(resolve_data_path(base.corpus_path), detail::infer_format(base.corpus_path, base.corpus_format));
    });
    if (base.anonymize)
        corpus = detail::stage("anonymize", [&] {
            return anonymize_corpus(corpus, load_lexicons(resolve_data_path(base.lexicon_dir)));
        });

    std::vector<SweepRow> rows;
    for (auto t : thresholds) {
        SweepRow row;
        row.threshold = t;
        for (const auto& [label, n] : corpus.label_counts())
            if (n >= t) {
                ++row.class_count;
                row.documents += n;
            }
        if (row.class_count < 2) {
            row.reason = row.class_count == 0 ? "no classes survive the threshold" : "a single class survives";
            rows.push_back(std::move(row));
            continue;
        }
        try {
            base.min_count = t;
            const auto filtered = filter_by_min_frequency(corpus, t);
            const auto split = stratified_split(filtered, base.split);
            const auto triples = relation_table(base, filtered);
            LinearTrainer trainer(base.train);
            CascadeBackends backends;
            backends.default_trainer = &trainer;
            if (base.vanilla) {
                auto v = train_vanilla(split.train, trainer);
                row.reports.emplace_back("vanilla", evaluate_classifier(*v, split.test, base.k));
            }
            auto model = train_cascade(split.train, triples, schedule, backends);
            for (auto mode : base.modes)
                row.reports.emplace_back(std::string(to_string(mode)) + " " + schedule.to_string(),
                                         evaluate_cascade(model, split.test, triples, mode, base.k).disease);
            row.feasible = true;
        } catch (const std::exception& e) {
            row.reason = e.what();
            row.reports.clear();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// One line per threshold and configuration; infeasible rows keep their class
/// count and carry the reason instead of metrics.
inline std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
    std::string out = "threshold\tclasses\tdocuments\tconfiguration\taccuracy\tmicro_f1\tmacro_f1\ttopk_accuracy\ttopk_f1\n";
    char buf[64];
    for (const auto& r : rows) {
        const std::string head = std::to_string(r.threshold) + '\t' + std::to_string(r.class_count) + '\t' +
                                 std::to_string(r.documents) + '\t';
        if (!r.feasible) {
            out += head + "infeasible\t\t\t\t\t# " + r.reason + '\n';
            continue;
        }
        for (const auto& [name, rep] : r.reports) {
            out += head + name;
            for (double v : {rep.accuracy, rep.micro_f1, rep.macro_f1, rep.top_k_accuracy, rep.top_k_f1}) {
                std::snprintf(buf, sizeof buf, "\t%.4f", v);
                out += buf;
            }
            out += '\n';
        }
    }
    return out;
}

inline nlohmann::ordered_json sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["threshold"] = r.threshold;
        row["classes"] = r.class_count;
        row["documents"] = r.documents;
        row["feasible"] = r.feasible;
        if (!r.feasible) row["reason"] = r.reason;
        row["reports"] = nlohmann::ordered_json::object();
        for (const auto& [name, rep] : r.reports) row["reports"][name] = to_json(rep);
        j.push_back(row);
    }
    return j;
}

} // namespace dermcascade

#endif
