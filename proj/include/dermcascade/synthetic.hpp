#ifndef DERMCASCADE_SYNTHETIC_HPP
#define DERMCASCADE_SYNTHETIC_HPP

// Generated corpora with known structure, used by tests and the shipped
// fixture under data/fixture.
//
// Cascade fixture: 25 diseases, one per (type, site) pair over five types and
// five sites. Each report carries one type cue word and one site cue word,
// each drawn from the true value's cue list with probability `cue_reliability`
// and from a uniformly random value's list otherwise, plus filler. Severity is
// assigned to diseases at random and has no textual cue.
//
// Anonymizer fixture: short reports built from templates that plant lexicon
// names, places, digits, titles and exception words, with the plants recorded.

#include "dermcascade/anonymizer.hpp"
#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/ontology.hpp"
#include "dermcascade/rng.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

namespace dermcascade {

struct CascadeFixtureConfig {
    std::size_t num_documents = 5000;
    std::uint64_t seed = 7;
    double cue_reliability = 0.75;
    std::size_t cue_words = 12;          // per relation value
    std::size_t filler_vocabulary = 300;
    std::size_t min_filler = 8;
    std::size_t max_filler = 20;
};

struct CascadeFixture {
    LabeledCorpus corpus;
    TripleTable triples;
};

inline constexpr std::array<PathType, 5> kFixtureTypes{PathType::proceso_neoplasico, PathType::proceso_autoinmune,
                                                       PathType::enfermedad, PathType::infeccion, PathType::sintoma};
inline constexpr std::array<Site, 5> kFixtureSites{Site::piel, Site::cara, Site::mano, Site::cabeza, Site::torso};

namespace detail {

/// Pronounceable lowercase pseudo-words, unique within one generator.
class WordForge {
public:
    explicit WordForge(Rng& rng) : rng_(rng) {}

    std::string make() {
        static constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "tr"};
        static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
        for (;;) {
            std::string w;
            const auto syllables = 2 + rng_.index(2);
            for (std::size_t s = 0; s < syllables; ++s) {
                w += kOnsets[rng_.index(std::size(kOnsets))];
                w += kVowels[rng_.index(std::size(kVowels))];
            }
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> make(std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(make());
        return out;
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

inline std::string two_digits(std::size_t n) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02zu", n);
    return buf;
}

} // namespace detail

inline std::string fixture_disease_name(std::size_t type_index, std::size_t site_index) {
    return "dermatosis sintetica " + detail::two_digits(type_index * kFixtureSites.size() + site_index + 1);
}

inline CascadeFixture make_cascade_fixture(const CascadeFixtureConfig& config = {}) {
    if (config.num_documents < 2 * kFixtureTypes.size() * kFixtureSites.size())
        throw Error("cascade fixture needs at least two documents per disease");
    if (config.cue_reliability < 0 || config.cue_reliability > 1) throw Error("cue_reliability must be in [0, 1]");
    if (config.min_filler > config.max_filler) throw Error("min_filler exceeds max_filler");

    Rng rng(config.seed);
    detail::WordForge forge(rng);
    std::vector<std::vector<std::string>> type_cues, site_cues;
    for (std::size_t i = 0; i < kFixtureTypes.size(); ++i) type_cues.push_back(forge.make(config.cue_words));
    for (std::size_t i = 0; i < kFixtureSites.size(); ++i) site_cues.push_back(forge.make(config.cue_words));
    const auto filler = forge.make(config.filler_vocabulary);

    CascadeFixture fx{LabeledCorpus{}, {}};
    for (std::size_t t = 0; t < kFixtureTypes.size(); ++t)
        for (std::size_t s = 0; s < kFixtureSites.size(); ++s)
            fx.triples[fixture_disease_name(t, s)] =
                RelationTriple{kFixtureTypes[t], static_cast<Severity>(rng.index(kSeverityNames.size())), kFixtureSites[s]};

    const std::size_t num_diseases = kFixtureTypes.size() * kFixtureSites.size();
    std::vector<std::size_t> order(config.num_documents);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % num_diseases;
    rng.shuffle(order);

    auto pick_cue = [&](const std::vector<std::vector<std::string>>& cues, std::size_t truth) {
        const std::size_t value = rng.bernoulli(config.cue_reliability) ? truth : rng.index(cues.size());
        return cues[value][rng.index(cues[value].size())];
    };

    std::vector<ClinicalRecord> records;
    records.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t t = order[i] / kFixtureSites.size();
        const std::size_t s = order[i] % kFixtureSites.size();
        std::vector<std::string> words;
        words.push_back(pick_cue(type_cues, t));
        words.push_back(pick_cue(site_cues, s));
        const auto n_filler = config.min_filler + rng.index(config.max_filler - config.min_filler + 1);
        for (std::size_t f = 0; f < n_filler; ++f) words.push_back(filler[rng.index(filler.size())]);
        rng.shuffle(words);
        char id[32];
        std::snprintf(id, sizeof id, "syn-%05zu", i + 1);
        records.push_back({id, text::join(words, " "), fixture_disease_name(t, s)});
    }
    fx.corpus = LabeledCorpus(std::move(records));
    return fx;
}

// --- anonymizer fixture --------------------------------------------------------

struct PlantedDocument {
    std::string text;
    std::vector<std::string> names;       // lexicon keys of planted names and places
    std::vector<std::string> exceptions;  // planted exception words
    std::size_t digits = 0;
};

namespace detail {

/// Entries that the anonymizer must mask wherever they appear: not frequent
/// words, not exceptions, and containing no exception token.
inline std::vector<std::string> maskable(const std::set<std::string>& entries, const LexiconSet& lex) {
    std::vector<std::string> out;
    for (const auto& e : entries) {
        if (lex.frequent_words.count(e) || lex.domain_exceptions.count(e)) continue;
        bool clean = true;
        for (const auto& word : text::split(e, ' '))
            if (lex.domain_exceptions.count(word) || lex.frequent_words.count(word)) clean = false;
        if (clean) out.push_back(e);
    }
    return out;
}

/// Uppercases the first letter of each space-separated word (ASCII and Latin-1).
inline std::string capitalize_words(const std::string& s) {
    std::string out;
    bool start = true;
    for (std::size_t i = 0; i < s.size();) {
        const auto d = text::decode(s, i);
        char32_t cp = d.cp;
        if (start && ((cp >= 'a' && cp <= 'z') || (cp >= 0xE0 && cp <= 0xFE && cp != 0xF7))) cp -= 0x20;
        text::append_utf8(out, cp);
        start = cp == U' ';
        i += d.length;
    }
    return out;
}

} // namespace detail

/// Requires a lexicon set with at least one maskable given name, surname and
/// place, and at least one exception word.
inline std::vector<PlantedDocument> make_anonymizer_fixture(const LexiconSet& lex, std::size_t num_documents = 1000,
                                                            std::uint64_t seed = 11) {
    const auto given = detail::maskable(lex.given_names, lex);
    const auto surnames = detail::maskable(lex.surnames, lex);
    const auto places = detail::maskable(lex.places, lex);
    const std::vector<std::string> exceptions(lex.domain_exceptions.begin(), lex.domain_exceptions.end());
    if (given.empty() || surnames.empty() || places.empty() || exceptions.empty())
        throw Error("lexicons lack maskable names, places or exception words");

    // Clinical filler; anything the lexicons would touch is dropped.
    static const std::vector<std::string> kFiller = {
        "lesión", "eritematosa", "bordes", "bien", "definidos", "prurito", "tratamiento", "biopsia", "control",
        "evolución", "placa", "pápula", "descamación", "antecedentes", "refiere", "consulta", "exploración",
        "tópico", "corticoide", "semanas", "meses", "aspecto", "dermatoscopia", "compatible", "diagnóstico",
        "sospecha", "seguimiento", "crema", "aplicar", "noches"};
    std::vector<std::string> filler;
    for (const auto& w : kFiller) {
        const auto key = detail::lexicon_key(w);
        if (!lex.given_names.count(key) && !lex.surnames.count(key) && !lex.places.count(key) &&
            !lex.domain_exceptions.count(key) &&
            std::find(lex.title_patterns.begin(), lex.title_patterns.end(), key) == lex.title_patterns.end())
            filler.push_back(w);
    }

    Rng rng(seed);
    auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.index(v.size())]; };
    auto number = [&](std::size_t lo, std::size_t hi) { return std::to_string(lo + rng.index(hi - lo + 1)); };
    auto count_digits = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }));
    };
    auto filler_run = [&](std::size_t n) {
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(pick(filler));
        return text::join(w, " ");
    };

    std::vector<PlantedDocument> docs;
    docs.reserve(num_documents);
    for (std::size_t d = 0; d < num_documents; ++d) {
        PlantedDocument doc;
        std::vector<std::string> sentences;

        const auto& g = pick(given);
        const auto& s = pick(surnames);
        const auto& place = pick(places);
        sentences.push_back("Paciente " + detail::capitalize_words(g) + " " + detail::capitalize_words(s) + " de " +
                            number(1, 99) + " años, natural de " + detail::capitalize_words(place) + ".");
        doc.names.push_back(g);
        doc.names.push_back(s);
        doc.names.push_back(place);

        const auto& e1 = pick(exceptions);
        const auto& e2 = pick(exceptions);
        sentences.push_back("Presenta " + e1 + " y " + e2 + " con " + filler_run(2 + rng.index(4)) + ".");
        doc.exceptions.push_back(e1);
        doc.exceptions.push_back(e2);

        if (rng.bernoulli(0.7)) {
            const auto& title = pick(lex.title_patterns);
            const auto& doctor = pick(surnames);
            sentences.push_back("Visto por " + title + " " + detail::capitalize_words(doctor) + " el " + number(1, 28) +
                                "/" + number(1, 12) + "/" + number(2010, 2023) + ".");
            doc.names.push_back(doctor);
        }
        if (rng.bernoulli(0.5)) {
            const auto& e3 = pick(exceptions);
            sentences.push_back("Historia " + number(100000, 999999) + ", " + filler_run(3) + " en " + e3 + ".");
            doc.exceptions.push_back(e3);
        }
        if (rng.bernoulli(0.5)) {
            const auto& title = pick(lex.title_patterns);
            const auto& e4 = pick(exceptions);
            sentences.push_back("Remitido por " + title + " " + e4 + " " + filler_run(2) + ".");
            doc.exceptions.push_back(e4);
        }
        sentences.push_back(detail::capitalize_words(filler_run(1)) + " " + filler_run(4 + rng.index(6)) + ".");
        rng.shuffle(sentences);
        doc.text = text::join(sentences, " ");
        doc.digits = count_digits(doc.text);
        docs.push_back(std::move(doc));
    }
    return docs;
}

} // namespace dermcascade

#endif
