// dermcascade command-line interface.

#include "dermcascade.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dermcascade;

namespace {

struct ExperimentFlags {
    ExperimentConfig config;
    std::string format;
    std::vector<std::string> modes;
    std::string rank_key = "accuracy";
    std::string optimizer = "adam";
    std::string precedence = "strongest-wins";
    bool no_vanilla = false;
    bool unstratified = false;

    ExperimentConfig resolve() {
        ExperimentConfig c = config;
        if (!format.empty()) c.corpus_format = parse_corpus_format(format);
        if (!modes.empty()) {
            c.modes.clear();
            for (const auto& m : modes) c.modes.push_back(parse_mode(m));
        }
        c.rank_key = parse_rank_key(rank_key);
        c.train.optimizer = parse_optimizer(optimizer);
        c.precedence = parse_precedence(precedence);
        c.vanilla = !no_vanilla;
        c.split.stratified = !unstratified;
        return c;
    }
};

void add_data_options(CLI::App* app, ExperimentFlags& f) {
    auto& c = f.config;
    app->add_option("--corpus", c.corpus_path, "Corpus file (JSONL or CSV)");
    app->add_option("--format", f.format, "Corpus format")->check(CLI::IsMember({"jsonl", "csv"}));
    app->add_option("--triples", c.triples_path, "Precomputed label/relation table (TSV)");
    app->add_option("--snapshot", c.snapshot_path, "Ontology snapshot (TSV)");
    app->add_option("--translations", c.translations_path, "Spanish to English label table (TSV)");
    app->add_option("--lexicons", c.lexicon_dir, "Lexicon directory");
    app->add_flag("--anonymize", c.anonymize, "Anonymize reports before training");
    app->add_option("--min-count", c.min_count, "Drop labels with fewer records")->capture_default_str();
    app->add_option("--seed", c.split.seed, "Split seed")->capture_default_str();
    app->add_option("--train-fraction", c.split.train_fraction, "Training share per label")->capture_default_str();
    app->add_flag("--unstratified", f.unstratified, "Shuffle-split instead of per-label split");
    app->add_option("--severity-precedence", f.precedence, "Severity derivation")
        ->check(CLI::IsMember({"strongest-wins", "first-match"}))
        ->capture_default_str();
}

void add_train_options(CLI::App* app, ExperimentFlags& f) {
    auto& t = f.config.train;
    app->add_option("--epochs", t.epochs)->capture_default_str();
    app->add_option("--lr", t.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--batch-size", t.batch_size)->capture_default_str();
    app->add_option("--l2", t.l2, "L2 penalty on weights")->capture_default_str();
    app->add_option("--train-seed", t.seed)->capture_default_str();
    app->add_option("--optimizer", f.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
}

void add_eval_options(CLI::App* app, ExperimentFlags& f) {
    app->add_option("--k", f.config.k, "Depth for top-k metrics")->capture_default_str();
    app->add_option("--mode", f.modes, "Evaluation modes (OR, PR)")->check(CLI::IsMember({"OR", "PR"}));
    app->add_flag("--no-vanilla", f.no_vanilla, "Skip the no-relation baseline");
}

CorpusFormat format_for(const std::string& path, const std::string& flag) {
    if (!flag.empty()) return parse_corpus_format(flag);
    return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") std::cout << content;
    else detail::write_file(path, content);
}

void print_report(const std::string& name, const MetricReport& r) {
    std::printf("%-14s acc %.4f  micro-F1 %.4f  macro-F1 %.4f  top%zu-acc %.4f  top%zu-F1 %.4f\n", name.c_str(),
                r.accuracy, r.micro_f1, r.macro_f1, r.k, r.top_k_accuracy, r.k, r.top_k_f1);
}

std::vector<std::string> read_label_list(const std::string& path) {
    const auto ext = fs::path(path).extension().string();
    if (ext == ".jsonl" || ext == ".csv") {
        const auto corpus = load_corpus(path, format_for(path, ""));
        std::vector<std::string> labels;
        for (const auto& [label, n] : corpus.label_counts()) labels.push_back(label);
        return labels;
    }
    std::vector<std::string> labels;
    for (const auto& line : text::split(detail::read_file(path), '\n'))
        if (!text::trim(line).empty() && line.front() != '#') labels.emplace_back(text::trim(line));
    return labels;
}

std::vector<Ranking> read_rankings(const std::string& path, const LabeledCorpus& truth) {
    std::map<std::string, Ranking> by_id;
    std::size_t line_no = 0;
    for (const auto& line : text::split(detail::read_file(path), '\n')) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        Ranking r;
        for (const auto& item : j.at("ranked")) r.push_back(item.is_array() ? item.at(0).get<std::string>() : item.get<std::string>());
        by_id[j.at("id").get<std::string>()] = std::move(r);
    }
    std::vector<Ranking> out;
    for (const auto& rec : truth.records()) {
        auto it = by_id.find(rec.id);
        if (it == by_id.end()) throw Error("no prediction for record '" + rec.id + "'");
        out.push_back(it->second);
    }
    return out;
}

int cmd_anonymize(const std::string& in, const std::string& out, const std::string& lexicons, const std::string& format,
                  const std::string& patch, const std::string& report_path) {
    auto lex = load_lexicons(resolve_data_path(lexicons));
    if (!patch.empty()) apply_rules_patch(lex, detail::read_file(patch));
    const auto fmt = format_for(in, format);
    const auto corpus = load_corpus(resolve_data_path(in), fmt);
    std::vector<ClinicalRecord> records;
    std::string report;
    std::size_t masks = 0, digits = 0;
    for (const auto& r : corpus.records()) {
        auto res = anonymize_document(r.text, lex);
        masks += res.mask_count;
        digits += res.digit_stripped_count;
        if (!report_path.empty()) {
            nlohmann::ordered_json j;
            j["id"] = r.id;
            j["mask_count"] = res.mask_count;
            j["digit_stripped_count"] = res.digit_stripped_count;
            j["applied_rules"] = nlohmann::ordered_json::array();
            for (const auto& a : res.applied_rules)
                j["applied_rules"].push_back({{"begin", a.span.begin}, {"end", a.span.end}, {"rule", a.rule}});
            report += j.dump() + "\n";
        }
        records.push_back({r.id, std::move(res.masked_text), r.label});
    }
    save_corpus(LabeledCorpus(std::move(records)), out, fmt);
    if (!report_path.empty()) detail::write_file(report_path, report);
    std::cerr << corpus.size() << " records, " << masks << " masks, " << digits << " digits removed\n";
    return 0;
}

int cmd_extract(const std::string& labels_path, const std::string& snapshot, const std::string& translations,
                const std::string& out, const std::string& precedence) {
    auto map = load_translation_map(resolve_data_path(translations));
    const auto snap = load_snapshot(resolve_data_path(snapshot));
    const auto table = extract_all(read_label_list(resolve_data_path(labels_path)), map, snap, parse_precedence(precedence));
    write_or_print(out, triples_to_tsv(table));
    return 0;
}

int cmd_make_fixture(const std::string& out, std::size_t documents, std::uint64_t seed, const std::string& lexicons) {
    fs::create_directories(out);
    CascadeFixtureConfig fc;
    fc.num_documents = documents;
    fc.seed = seed;
    const auto fx = make_cascade_fixture(fc);
    save_corpus(fx.corpus, (fs::path(out) / "cascade_corpus.jsonl").string(), CorpusFormat::jsonl);
    detail::write_file((fs::path(out) / "cascade_triples.tsv").string(), triples_to_tsv(fx.triples));
    detail::write_file((fs::path(out) / "cascade_run.ini").string(),
                       "# Cascade fixture experiment. Paths resolve against DERMCASCADE_DATA_ROOT.\n"
                       "[run]\n"
                       "corpus = fixture/cascade_corpus.jsonl\n"
                       "triples = fixture/cascade_triples.tsv\n"
                       "schedule = [\"t,sit\", \"sit,gr,t\"]\n"
                       "mode = [\"OR\", \"PR\"]\n"
                       "k = 2\n"
                       "epochs = 30\n"
                       "lr = 0.01\n");
    if (!lexicons.empty()) {
        const auto docs = make_anonymizer_fixture(load_lexicons(resolve_data_path(lexicons)));
        std::vector<ClinicalRecord> records;
        std::string plants;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const std::string id = "anon-" + std::to_string(i + 1);
            records.push_back({id, docs[i].text, "fixture"});
            nlohmann::ordered_json j;
            j["id"] = id;
            j["names"] = docs[i].names;
            j["exceptions"] = docs[i].exceptions;
            j["digits"] = docs[i].digits;
            plants += j.dump() + "\n";
        }
        save_corpus(LabeledCorpus(std::move(records)), (fs::path(out) / "anonymizer_corpus.jsonl").string(),
                    CorpusFormat::jsonl);
        detail::write_file((fs::path(out) / "anonymizer_plants.jsonl").string(), plants);
    }
    std::cerr << "fixture written to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascaded relation-aware classification of dermatology reports"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML config file; command-line flags win");

    // anonymize
    std::string an_in, an_out, an_lex, an_format, an_patch, an_report;
    auto* anon = app.add_subcommand("anonymize", "Mask digits, names, places and titled names");
    anon->add_option("--in", an_in, "Input corpus")->required();
    anon->add_option("--out", an_out, "Output corpus")->required();
    anon->add_option("--lexicons", an_lex, "Lexicon directory")->required();
    anon->add_option("--format", an_format)->check(CLI::IsMember({"jsonl", "csv"}));
    anon->add_option("--patch", an_patch, "Rule patch: lines 'add|remove <list> <entry>'");
    anon->add_option("--report", an_report, "Per-record JSONL with mask counts and rule spans");

    // review-sample
    std::string rs_corpus, rs_format, rs_out;
    double rs_fraction = 0.1, rs_overlap = 0.126;
    std::uint64_t rs_seed = 42;
    auto* rsample = app.add_subcommand("review-sample", "Draw a stratified two-reviewer partition");
    rsample->add_option("--corpus", rs_corpus)->required();
    rsample->add_option("--format", rs_format)->check(CLI::IsMember({"jsonl", "csv"}));
    rsample->add_option("--fraction", rs_fraction)->capture_default_str();
    rsample->add_option("--overlap", rs_overlap, "Shared share of the sample")->capture_default_str();
    rsample->add_option("--seed", rs_seed)->capture_default_str();
    rsample->add_option("--out", rs_out, "Partition JSON")->required();

    // serve-review
    std::string sr_partition, sr_corpus, sr_format, sr_store, sr_host = "127.0.0.1", sr_originals, sr_static;
    std::vector<std::string> sr_reviewers;
    int sr_port = 8080;
    bool sr_show = false;
    auto* serve = app.add_subcommand("serve-review", "Serve the review API under /api/v1/");
    serve->add_option("--partition", sr_partition)->required();
    serve->add_option("--corpus", sr_corpus, "Masked corpus the partition was drawn from")->required();
    serve->add_option("--format", sr_format)->check(CLI::IsMember({"jsonl", "csv"}));
    serve->add_option("--store", sr_store, "Verdict log (JSONL, append-only)")->required();
    serve->add_option("--reviewers", sr_reviewers, "Exactly two reviewer ids")->required()->expected(2)->delimiter(',');
    serve->add_option("--host", sr_host)->capture_default_str();
    serve->add_option("--port", sr_port)->capture_default_str();
    serve->add_option("--originals", sr_originals, "Unmasked corpus for the side channel");
    serve->add_flag("--show-originals", sr_show, "Include unmasked text in /next responses");
    serve->add_option("--static", sr_static, "Directory with a UI bundle to serve at /");

    // extract-relations
    std::string er_labels, er_snapshot, er_translations, er_out, er_precedence = "strongest-wins";
    auto* extract = app.add_subcommand("extract-relations", "Derive (t, gr, sit) for every label");
    extract->add_option("--labels", er_labels, "Corpus file or one label per line")->required();
    extract->add_option("--snapshot", er_snapshot)->required();
    extract->add_option("--translations", er_translations)->required();
    extract->add_option("--out", er_out, "Triples TSV (stdout when omitted)");
    extract->add_option("--severity-precedence", er_precedence)
        ->check(CLI::IsMember({"strongest-wins", "first-match"}))
        ->capture_default_str();

    // train-cascade
    ExperimentFlags tc_flags;
    std::string tc_schedule, tc_out, tc_report;
    auto* train = app.add_subcommand("train-cascade", "Train one schedule and evaluate it on the held-out split");
    add_data_options(train, tc_flags);
    add_train_options(train, tc_flags);
    add_eval_options(train, tc_flags);
    train->add_option("--schedule", tc_schedule, "e.g. sit,gr,t")->required();
    train->add_option("--out", tc_out, "Bundle directory")->required();
    train->add_option("--report", tc_report, "Metric report JSON");

    // search-schedules
    ExperimentFlags ss_flags;
    std::size_t ss_max_len = 3;
    std::string ss_out;
    auto* search = app.add_subcommand("search-schedules", "Rank every schedule on the held-out split");
    add_data_options(search, ss_flags);
    add_train_options(search, ss_flags);
    add_eval_options(search, ss_flags);
    search->add_option("--max-len", ss_max_len)->capture_default_str();
    search->add_option("--rank-key", ss_flags.rank_key)
        ->check(CLI::IsMember({"accuracy", "micro-f1", "macro-f1"}))
        ->capture_default_str();
    search->add_option("--out", ss_out, "Ranking JSON");

    // infer
    std::string in_model, in_mode = "PR", in_triple, in_text, in_corpus, in_format, in_triples, in_out;
    std::size_t in_k = 2;
    auto* infer = app.add_subcommand("infer", "Rank diseases for one report or a corpus");
    infer->add_option("--model", in_model, "Cascade bundle directory")->required();
    infer->add_option("--mode", in_mode)->check(CLI::IsMember({"OR", "PR"}))->capture_default_str();
    infer->add_option("--triple", in_triple, "Gold relations for OR, e.g. t=precancer,gr=inofensivo,sit=piel");
    infer->add_option("--text", in_text, "A single report");
    infer->add_option("--in", in_corpus, "Corpus to score");
    infer->add_option("--format", in_format)->check(CLI::IsMember({"jsonl", "csv"}));
    infer->add_option("--triples", in_triples, "Gold relations per label for OR over a corpus");
    infer->add_option("--k", in_k)->capture_default_str();
    infer->add_option("--out", in_out, "Predictions JSONL (stdout when omitted)");

    // evaluate
    std::string ev_truth, ev_pred, ev_out, ev_confusion, ev_format;
    std::size_t ev_k = 2;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a labeled corpus");
    evaluate->add_option("--truth", ev_truth, "Labeled corpus")->required();
    evaluate->add_option("--format", ev_format)->check(CLI::IsMember({"jsonl", "csv"}));
    evaluate->add_option("--pred", ev_pred, "Predictions JSONL: {\"id\", \"ranked\"}")->required();
    evaluate->add_option("--k", ev_k)->capture_default_str();
    evaluate->add_option("--out", ev_out, "Report JSON (stdout when omitted)");
    evaluate->add_option("--confusion", ev_confusion, "Confusion matrix CSV");

    // threshold-sweep
    ExperimentFlags ts_flags;
    std::vector<std::size_t> ts_thresholds;
    std::vector<std::string> ts_schedules;
    std::string ts_out, ts_json;
    auto* sweep = app.add_subcommand("threshold-sweep", "Retrain and evaluate at several class-frequency thresholds");
    add_data_options(sweep, ts_flags);
    add_train_options(sweep, ts_flags);
    add_eval_options(sweep, ts_flags);
    sweep->add_option("--thresholds", ts_thresholds)->required()->delimiter(',');
    sweep->add_option("--schedule", ts_schedules, "Schedule to retrain")->required();
    sweep->add_option("--out", ts_out, "Table TSV (stdout when omitted)");
    sweep->add_option("--json", ts_json, "Table JSON");

    // run
    ExperimentFlags run_flags;
    std::string run_manifest;
    bool run_overwrite = false;
    auto* run = app.add_subcommand("run", "Full experiment: reports, confusion matrices, models, manifest");
    add_data_options(run, run_flags);
    add_train_options(run, run_flags);
    add_eval_options(run, run_flags);
    run->add_option("--schedule", run_flags.config.schedules, "Schedules to train (repeatable)");
    run->add_flag("--search", run_flags.config.search, "Also search all schedules and add the best");
    run->add_option("--max-len", run_flags.config.search_max_len)->capture_default_str();
    run->add_option("--rank-key", run_flags.rank_key)
        ->check(CLI::IsMember({"accuracy", "micro-f1", "macro-f1"}))
        ->capture_default_str();
    run->add_option("--out", run_flags.config.output_dir, "Output directory")->required();
    run->add_option("--manifest", run_manifest, "Rerun the experiment recorded in a manifest");
    run->add_flag("--overwrite", run_overwrite, "Replace an existing output directory");

    // make-fixture
    std::string mf_out, mf_lex;
    std::size_t mf_docs = 5000;
    std::uint64_t mf_seed = 7;
    auto* fixture = app.add_subcommand("make-fixture", "Write the synthetic cascade and anonymizer fixtures");
    fixture->add_option("--out", mf_out)->required();
    fixture->add_option("--documents", mf_docs)->capture_default_str();
    fixture->add_option("--seed", mf_seed)->capture_default_str();
    fixture->add_option("--lexicons", mf_lex, "Lexicons for the anonymizer fixture");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*anon) return cmd_anonymize(resolve_data_path(an_in), an_out, an_lex, an_format, an_patch, an_report);

        if (*rsample) {
            const auto corpus = load_corpus(resolve_data_path(rs_corpus), format_for(rs_corpus, rs_format));
            const auto p = generate_review_partition(corpus, rs_fraction, rs_overlap, rs_seed);
            detail::write_file(rs_out, partition_to_json(p).dump(2) + "\n");
            std::cerr << "sample " << p.sample.size() << ", A " << p.subset_a.size() << ", B " << p.subset_b.size()
                      << ", shared " << p.shared_ids.size() << "\n";
            return 0;
        }

        if (*serve) {
            const auto corpus = load_corpus(resolve_data_path(sr_corpus), format_for(sr_corpus, sr_format));
            auto partition = partition_from_json(nlohmann::json::parse(detail::read_file(sr_partition)), corpus);
            std::optional<LabeledCorpus> originals;
            if (!sr_originals.empty())
                originals = load_corpus(resolve_data_path(sr_originals), format_for(sr_originals, sr_format));
            ReviewService service(std::move(partition), std::make_shared<VerdictStore>(sr_store),
                                  {sr_reviewers[0], sr_reviewers[1]}, std::move(originals), sr_show);
            serve_review(service, sr_host, sr_port, [&](int port) {
                std::cerr << "review API on http://" << sr_host << ":" << port << "/api/v1/\n";
            }, sr_static);
            return 0;
        }

        if (*extract) return cmd_extract(er_labels, er_snapshot, er_translations, er_out, er_precedence);

        if (*train) {
            auto config = tc_flags.resolve();
            config.schedules = {tc_schedule};
            preflight(config);
            const auto data = prepare_data(config, config.min_count);
            LinearTrainer trainer(config.train);
            CascadeBackends backends;
            backends.default_trainer = &trainer;
            auto model = train_cascade(data.split.train, data.triples, RelationSchedule::parse(tc_schedule), backends);
            for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
            save_cascade(model, tc_out, config.rank_key);
            nlohmann::ordered_json reports = nlohmann::ordered_json::object();
            for (auto mode : config.modes) {
                const auto eval = evaluate_cascade(model, data.split.test, data.triples, mode, config.k);
                print_report(to_string(mode), eval.disease);
                reports[to_string(mode)] = to_json(eval.disease);
            }
            if (!tc_report.empty()) detail::write_file(tc_report, reports.dump(2) + "\n");
            return 0;
        }

        if (*search) {
            auto config = ss_flags.resolve();
            config.search = true;
            preflight(config);
            const auto data = prepare_data(config, config.min_count);
            LinearTrainer trainer(config.train);
            CascadeBackends backends;
            backends.default_trainer = &trainer;
            SearchOptions options;
            options.max_len = ss_max_len;
            options.key = config.rank_key;
            options.mode = ss_flags.modes.empty() ? Mode::predictive : config.modes.front();
            options.k = config.k;
            const auto results = search_schedules(data.split.train, data.split.test, data.triples,
                                                  {Relation::type, Relation::severity, Relation::site}, backends, options);
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& r : results) {
                print_report(r.schedule.to_string(), r.evaluation.disease);
                out.push_back({{"schedule", r.schedule.to_string()},
                               {"rank_value", rank_value(r.evaluation.disease, options.key)},
                               {"metrics", to_json(r.evaluation.disease)}});
            }
            if (!ss_out.empty()) detail::write_file(ss_out, out.dump(2) + "\n");
            return 0;
        }

        if (*infer) {
            const auto model = load_cascade(in_model);
            const Mode mode = parse_mode(in_mode);
            auto ranked_json = [](const std::vector<ScoredLabel>& ranked) {
                nlohmann::ordered_json a = nlohmann::ordered_json::array();
                for (const auto& s : ranked) a.push_back(nlohmann::ordered_json::array({s.label, s.score}));
                return a;
            };
            if (!in_text.empty()) {
                std::optional<RelationTriple> gold;
                if (mode == Mode::oracle) {
                    if (in_triple.empty()) throw Error("OR mode needs --triple");
                    gold = parse_triple(in_triple);
                }
                const auto pred = infer_cascade_detailed(model, in_text, mode, gold, in_k);
                nlohmann::ordered_json j;
                j["relations"] = nlohmann::ordered_json::object();
                for (const auto& [name, value] : pred.relations) j["relations"][name] = value;
                j["ranked"] = ranked_json(pred.diseases);
                write_or_print(in_out, j.dump(2) + "\n");
                return 0;
            }
            if (in_corpus.empty()) throw Error("give --text or --in");
            const auto corpus = load_corpus(resolve_data_path(in_corpus), format_for(in_corpus, in_format));
            TripleTable triples;
            if (mode == Mode::oracle) {
                if (in_triples.empty()) throw Error("OR mode over a corpus needs --triples");
                triples = load_triples(resolve_data_path(in_triples));
            }
            std::string out;
            for (const auto& r : corpus.records()) {
                std::optional<RelationTriple> gold;
                if (mode == Mode::oracle) {
                    auto it = triples.find(r.label);
                    if (it == triples.end()) throw Error("no relation triple for label '" + r.label + "'");
                    gold = it->second;
                }
                const auto pred = infer_cascade_detailed(model, r.text, mode, gold, in_k);
                nlohmann::ordered_json j;
                j["id"] = r.id;
                j["relations"] = nlohmann::ordered_json::object();
                for (const auto& [name, value] : pred.relations) j["relations"][name] = value;
                j["ranked"] = ranked_json(pred.diseases);
                out += j.dump() + "\n";
            }
            write_or_print(in_out, out);
            return 0;
        }

        if (*evaluate) {
            const auto truth = load_corpus(resolve_data_path(ev_truth), format_for(ev_truth, ev_format));
            const auto report = evaluate_single_label(truth.labels(), read_rankings(ev_pred, truth), ev_k);
            for (const auto& w : report.confusion.warnings) std::cerr << "warning: " << w << "\n";
            write_or_print(ev_out, to_json(report).dump(2) + "\n");
            if (!ev_confusion.empty()) detail::write_file(ev_confusion, confusion_to_csv(report.confusion));
            return 0;
        }

        if (*sweep) {
            auto config = ts_flags.resolve();
            config.schedules = ts_schedules;
            const auto rows = threshold_sweep(config, ts_thresholds);
            write_or_print(ts_out, sweep_to_tsv(rows));
            if (!ts_json.empty()) detail::write_file(ts_json, sweep_to_json(rows).dump(2) + "\n");
            return 0;
        }

        if (*run) {
            PipelineResult result;
            if (!run_manifest.empty()) {
                result = rerun_from_manifest(run_manifest, run_flags.config.output_dir, run_overwrite);
            } else {
                result = run_pipeline(run_flags.resolve(), run_overwrite);
            }
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& r : result.reports) print_report(r.name, r.report);
            return 0;
        }

        if (*fixture) return cmd_make_fixture(mf_out, mf_docs, mf_seed, mf_lex);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
