// Acceptance gate: one PASS/FAIL/SKIP line per criterion, tolerances pinned
// below. Exit status is nonzero when any criterion fails.
//
//   acceptance [--only <name>]
//
// The optional public-dataset check reads $DERMCASCADE_DATASET (JSONL or CSV).

#include "dermcascade.hpp"
#include "nomenclature_table.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace dermcascade;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kMetricsTolerance = 1e-12;
constexpr double kGradientTolerance = 1e-5;
constexpr double kAgreementTarget = 0.9643;
constexpr double kAgreementTolerance = 1e-4;
constexpr double kOracleAccuracyFloor = 0.95;
constexpr double kOracleOverVanillaMargin = 0.15;

constexpr double kNomenclatureSeconds = 1.0;
constexpr double kEnumerationSeconds = 1e-3;
constexpr double kMetricsSeconds = 30.0;
constexpr double kGradientSeconds = 60.0;
constexpr double kAnonymizerSeconds = 10.0;
constexpr double kCascadeSeconds = 300.0;

struct Outcome {
    enum Kind { pass, fail, skip } kind = pass;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

Outcome nomenclature() {
    const auto start = Clock::now();
    auto map = load_translation_map(testing_support::source_path("data/ontology/translations.tsv"));
    const auto snap = load_snapshot(testing_support::source_path("data/ontology/snapshot.tsv"));
    std::size_t matches = 0;
    std::string first_miss;
    for (const auto& row : testing_support::kReferenceNomenclature) {
        const auto t = extract_relations(row.disease, map, snap);
        if (t.value(Relation::type) == row.type && t.value(Relation::severity) == row.severity &&
            t.value(Relation::site) == row.site)
            ++matches;
        else if (first_miss.empty())
            first_miss = row.disease;
    }
    const double secs = seconds_since(start);
    const auto total = testing_support::kReferenceNomenclature.size();
    std::string detail = std::to_string(matches) + "/" + std::to_string(total) + " triples, " + fmt("%.3f s", secs);
    if (!first_miss.empty()) detail += ", first mismatch '" + first_miss + "'";
    return verdict(total == 47 && matches == total && secs < kNomenclatureSeconds, detail);
}

Outcome schedule_enumeration() {
    const auto start = Clock::now();
    const auto s = enumerate_schedules({Relation::type, Relation::severity, Relation::site}, 3);
    const double secs = seconds_since(start);
    const std::size_t closed_form = 3 + 3 * 2 + 3 * 2 * 1;
    std::set<std::string> distinct;
    for (const auto& x : s) distinct.insert(x.to_string());
    return verdict(s.size() == closed_form && distinct.size() == closed_form && secs < kEnumerationSeconds,
                   std::to_string(s.size()) + " schedules (closed form " + std::to_string(closed_form) + "), " +
                       fmt("%.1f us", secs * 1e6));
}

Outcome severity_mapping() {
    const Severity table[8] = {Severity::inofensivo, Severity::leve,    Severity::importante, Severity::importante,
                               Severity::extrema,    Severity::extrema, Severity::extrema,    Severity::extrema};
    std::size_t ok = 0;
    for (SeverityFlags f = 0; f < 8; ++f) ok += derive_severity(f) == table[f];
    const bool singletons = english_severity_name(derive_severity(kMinor)) == std::string("light") &&
                            english_severity_name(derive_severity(kMajor)) == std::string("important") &&
                            english_severity_name(derive_severity(kMorbidity)) == std::string("deadly") &&
                            english_severity_name(derive_severity(0)) == std::string("inoffensive");
    return verdict(ok == 8 && singletons, std::to_string(ok) + "/8 subsets, singleton names " +
                                              (singletons ? "match" : "differ"));
}

Outcome metrics_oracle() {
    const auto start = Clock::now();
    Rng rng(808);
    double worst = 0;
    bool identities = true;
    for (int trial = 0; trial < 200; ++trial) {
        const auto inst = testing_support::random_metrics_instance(rng, 8, 100);
        for (std::size_t k : {std::size_t{1}, std::size_t{2}, inst.num_classes}) {
            const auto r = evaluate_single_label(inst.truth, inst.ranked, k);
            const auto o = testing_support::metrics_oracle(inst.truth, inst.ranked, k);
            for (double d : {r.accuracy - o.accuracy, r.micro_f1 - o.micro_f1, r.macro_f1 - o.macro_f1,
                             r.top_k_accuracy - o.top_k_accuracy, r.top_k_f1 - o.top_k_f1})
                worst = std::max(worst, std::abs(d));
            identities = identities && r.micro_f1 == r.accuracy;
        }
        identities = identities && topk_metrics(inst.truth, inst.ranked, 1).accuracy ==
                                       evaluate_single_label(inst.truth, inst.ranked, 1).accuracy;
        identities = identities && topk_metrics(inst.truth, inst.ranked, inst.num_classes).accuracy == 1.0;
    }
    const double secs = seconds_since(start);
    return verdict(worst <= kMetricsTolerance && identities && secs < kMetricsSeconds,
                   "200 instances, max |diff| " + fmt("%.2e", worst) + ", identities " +
                       (identities ? "hold" : "broken") + ", " + fmt("%.2f s", secs));
}

Outcome gradient_correctness() {
    const auto start = Clock::now();
    Rng rng(4242);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial)
        worst = std::max(worst, testing_support::gradient_error_vs_oracle(testing_support::random_gradient_instance(rng, 5, 50)));
    const double secs = seconds_since(start);
    return verdict(worst < kGradientTolerance && secs < kGradientSeconds,
                   "100 instances, max relative error " + fmt("%.2e", worst) + ", " + fmt("%.2f s", secs));
}

std::size_t count_phrase(const std::string& text, const std::string& phrase) {
    const auto words = text::split(phrase, ' ');
    const auto lower = text::lowercase(text);
    std::vector<std::string> tokens;
    for (const auto& run : text::letter_runs(lower)) tokens.push_back(lower.substr(run.begin, run.end - run.begin));
    std::size_t n = 0;
    for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i)
        if (std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
    return n;
}

Outcome anonymizer() {
    const auto lex = testing_support::shipped_lexicons();
    const auto docs = make_anonymizer_fixture(lex, 1000, 11);
    const auto start = Clock::now();
    std::size_t digits_left = 0, names = 0, names_masked = 0, exceptions = 0, exceptions_masked = 0, not_idempotent = 0;
    for (const auto& d : docs) {
        const auto once = anonymize_document(d.text, lex).masked_text;
        for (char c : once) digits_left += c >= '0' && c <= '9';
        for (const auto& n : d.names) {
            ++names;
            names_masked += count_phrase(once, n) == 0;
        }
        for (const auto& e : d.exceptions) {
            ++exceptions;
            exceptions_masked += count_phrase(once, e) < count_phrase(d.text, e);
        }
        not_idempotent += anonymize_document(once, lex).masked_text != once;
    }
    const double secs = seconds_since(start);
    const bool ok = docs.size() == 1000 && digits_left == 0 && names > 0 && names_masked == names &&
                    exceptions > 0 && exceptions_masked == 0 && not_idempotent == 0 && secs < kAnonymizerSeconds;
    std::ostringstream os;
    os << docs.size() << " docs, " << digits_left << " digits left, " << names_masked << "/" << names
       << " names masked, " << exceptions_masked << "/" << exceptions << " exceptions masked, " << not_idempotent
       << " not idempotent, " << fmt("%.2f s", secs);
    return verdict(ok, os.str());
}

Outcome agreement() {
    const auto p = generate_review_partition(testing_support::release_shaped_corpus(), 0.10, 0.126, 42);
    std::vector<Verdict> verdicts;
    std::size_t i = 0;
    for (const auto& id : p.shared_ids) {
        const bool injected = i % 28 == 13;
        verdicts.push_back({id, "a", Judgment::correct, std::nullopt, "t"});
        verdicts.push_back({id, "b", injected ? Judgment::under_masked : Judgment::correct, std::nullopt, "t"});
        ++i;
    }
    const auto r = compute_agreement(verdicts, p);
    return verdict(r.shared == 112 && r.disagreements.size() == 4 &&
                       std::abs(r.raw_agreement - kAgreementTarget) <= kAgreementTolerance,
                   std::to_string(r.shared) + " shared, " + std::to_string(r.disagreements.size()) +
                       " disagreements, raw agreement " + fmt("%.4f", r.raw_agreement));
}

// Shipped fixture files; they must match the generator's defaults.
struct ShippedFixture {
    std::string corpus = testing_support::source_path("data/fixture/cascade_corpus.jsonl");
    std::string triples = testing_support::source_path("data/fixture/cascade_triples.tsv");
};

ExperimentConfig fixture_config(const ShippedFixture& f) {
    ExperimentConfig c;
    c.corpus_path = f.corpus;
    c.triples_path = f.triples;
    c.schedules = {"t,sit"};
    c.k = 2;
    c.train.epochs = 30;
    c.train.learning_rate = 0.01;
    return c;
}

Outcome cascade_fixture() {
    const ShippedFixture f;
    if (!fs::exists(f.corpus) || !fs::exists(f.triples)) return {Outcome::fail, "shipped fixture missing under data/fixture"};
    const auto generated = make_cascade_fixture();
    if (!(load_corpus(f.corpus, CorpusFormat::jsonl) == generated.corpus) || load_triples(f.triples) != generated.triples)
        return {Outcome::fail, "shipped fixture differs from the generator output"};

    const auto start = Clock::now();
    auto c = fixture_config(f);
    c.search = true;
    c.search_max_len = 3;
    const auto result = run_pipeline(c);
    const double secs = seconds_since(start);

    double vanilla = -1, oracle = -1, predictive = -1;
    for (const auto& r : result.reports) {
        if (r.name == "vanilla") vanilla = r.report.accuracy;
        if (r.name == "OR t,sit") oracle = r.report.accuracy;
        if (r.name == "PR t,sit") predictive = r.report.accuracy;
    }
    const auto& best = result.search.front().schedule;
    const bool a = oracle >= kOracleAccuracyFloor;
    const bool b = oracle - vanilla >= kOracleOverVanillaMargin;
    const bool cc = predictive >= vanilla;
    const bool d = best.contains(Relation::type) && best.contains(Relation::site);
    std::ostringstream os;
    os << "(a) OR " << fmt("%.4f", oracle) << (a ? " ok" : " low") << "; (b) OR-vanilla "
       << fmt("%.4f", oracle - vanilla) << (b ? " ok" : " low") << "; (c) PR " << fmt("%.4f", predictive)
       << " vs vanilla " << fmt("%.4f", vanilla) << (cc ? " ok" : " low") << "; (d) top schedule " << best.display()
       << (d ? " ok" : " lacks t or sit") << "; " << result.search.size() << " schedules searched, "
       << fmt("%.1f s", secs);
    return verdict(a && b && cc && d && secs < kCascadeSeconds, os.str());
}

Outcome public_dataset() {
    const char* path = std::getenv("DERMCASCADE_DATASET");
    if (!path || !*path || !fs::exists(path)) return {Outcome::skip, "public dataset not found; set DERMCASCADE_DATASET"};
    const std::string p(path);
    const auto corpus = load_corpus(p, p.size() > 4 && p.substr(p.size() - 4) == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl);
    const std::vector<std::size_t> thresholds{2, 10, 25, 50, 61, 75, 100};
    const std::vector<std::size_t> expected{173, 76, 44, 27, 25, 20, 15};
    const auto got = class_counts_by_threshold(corpus, thresholds);
    std::ostringstream os;
    os << corpus.size() << " records, " << corpus.num_labels() << " labels; classes per threshold";
    for (std::size_t i = 0; i < thresholds.size(); ++i) os << " " << thresholds[i] << ":" << got[i];
    return verdict(corpus.size() == 8881 && corpus.num_labels() == 173 && got == expected, os.str());
}

Outcome reproducibility() {
    const ShippedFixture f;
    if (!fs::exists(f.corpus)) return {Outcome::fail, "shipped fixture missing under data/fixture"};
    testing_support::TempDir tmp;
    auto c = fixture_config(f);
    c.train.epochs = 5;
    c.output_dir = tmp.file("first");
    run_pipeline(c);
    rerun_from_manifest(tmp.file("first/manifest.json"), tmp.file("second"));
    std::size_t compared = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(tmp.file("first"))) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), tmp.file("first"));
        const auto other = fs::path(tmp.file("second")) / rel;
        ++compared;
        if (!fs::exists(other) || detail::read_file(entry.path().string()) != detail::read_file(other.string()))
            ++differing;
    }
    return verdict(compared > 0 && differing == 0,
                   std::to_string(compared) + " output files compared, " + std::to_string(differing) + " differ");
}

} // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--only") only = argv[i + 1];

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"nomenclature-reproduction", nomenclature},
        {"schedule-enumeration", schedule_enumeration},
        {"severity-mapping", severity_mapping},
        {"metrics-oracle-equivalence", metrics_oracle},
        {"gradient-correctness", gradient_correctness},
        {"anonymizer-guarantees", anonymizer},
        {"agreement-arithmetic", agreement},
        {"cascade-fixture-behavior", cascade_fixture},
        {"public-dataset-checks", public_dataset},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && name != only) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {Outcome::fail, std::string("error: ") + e.what()};
        }
        const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
        std::printf("%s  %-28s %s\n", tag, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failures += o.kind == Outcome::fail;
    }
    return failures == 0 ? 0 : 1;
}
