#include "dermcascade/anonymizer.hpp"
#include "dermcascade/synthetic.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace dermcascade;
using testing_support::shipped_lexicons;

namespace {

LexiconSet small_lexicons() {
    LexiconSet lex;
    lex.given_names = {"maría", "rosa"};
    lex.surnames = {"pérez", "garcía", "de la fuente"};
    lex.places = {"madrid", "santiago de compostela"};
    lex.frequent_words = {"de", "la", "sol"};
    lex.domain_exceptions = {"rosa", "cabello", "seco", "benigno", "aspecto"};
    return lex;
}

std::size_t count_word(const std::string& text, const std::string& key) {
    const auto words = text::split(key, ' ');
    std::vector<std::string> tokens;
    const auto lower = text::lowercase(text);
    for (const auto& run : text::letter_runs(lower)) tokens.push_back(lower.substr(run.begin, run.end - run.begin));
    std::size_t n = 0;
    for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i)
        if (std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
    return n;
}

} // namespace

TEST(Anonymizer, EmptyInput) {
    const auto r = anonymize_document("", small_lexicons());
    EXPECT_EQ(r.masked_text, "");
    EXPECT_EQ(r.mask_count, 0u);
    EXPECT_EQ(r.digit_stripped_count, 0u);
    EXPECT_TRUE(r.applied_rules.empty());
}

TEST(Anonymizer, ExceptionsOnlyLeavesTextUnchanged) {
    const std::string s = "paciente con cabello seco, aspecto benigno";
    EXPECT_EQ(anonymize_document(s, small_lexicons()).masked_text, s);
    EXPECT_EQ(anonymize_document(s, shipped_lexicons()).masked_text, s);
}

TEST(Anonymizer, TitleTriggerAndDigits) {
    const auto r = anonymize_document("Visto por la dra Pérez el 12/03", small_lexicons());
    // Stripping the four digits of "12/03" leaves a single slash.
    EXPECT_EQ(r.masked_text, "Visto por la dra [Entidad] el /");
    EXPECT_EQ(r.digit_stripped_count, 4u);
    EXPECT_EQ(r.mask_count, 1u);
    ASSERT_EQ(r.applied_rules.size(), 1u);
    EXPECT_EQ(r.applied_rules[0].rule, "surname");
    EXPECT_EQ(r.masked_text.substr(r.applied_rules[0].span.begin,
                                   r.applied_rules[0].span.end - r.applied_rules[0].span.begin),
              "[Entidad]");
}

TEST(Anonymizer, TitleMasksUnknownWord) {
    const auto r = anonymize_document("Remitido por Dr. Zubizarreta ayer", small_lexicons());
    EXPECT_EQ(r.masked_text, "Remitido por Dr. [Entidad] ayer");
    EXPECT_EQ(r.applied_rules.at(0).rule, "title");
    EXPECT_EQ(anonymize_document("visto por la dra cabello", small_lexicons()).masked_text,
              "visto por la dra cabello");
}

TEST(Anonymizer, MultiWordEntriesMatchLongestFirst) {
    const auto lex = small_lexicons();
    EXPECT_EQ(anonymize_document("Natural de Santiago de Compostela.", lex).masked_text, "Natural de [Entidad].");
    EXPECT_EQ(anonymize_document("Luis de la Fuente, de Madrid", lex).masked_text, "Luis [Entidad], de [Entidad]");
    // punctuation between words breaks a phrase
    EXPECT_EQ(anonymize_document("Santiago, de Compostela", lex).masked_text, "Santiago, de Compostela");
}

TEST(Anonymizer, ExceptionsAndFrequentWordsWin) {
    const auto lex = small_lexicons();
    EXPECT_EQ(anonymize_document("Rosa María tiene sol", lex).masked_text, "Rosa [Entidad] tiene sol");
}

TEST(Anonymizer, CaseInsensitiveWithAccents) {
    EXPECT_EQ(anonymize_document("MARÍA GARCÍA", small_lexicons()).masked_text, "[Entidad] [Entidad]");
}

TEST(Anonymizer, ShippedLexiconsLoad) {
    const auto lex = shipped_lexicons();
    EXPECT_EQ(lex.domain_exceptions.size(), 43u);
    EXPECT_TRUE(lex.domain_exceptions.count("cabello"));
    EXPECT_TRUE(lex.domain_exceptions.count("seco"));
    EXPECT_TRUE(lex.domain_exceptions.count("benigno"));
    EXPECT_EQ(lex.title_patterns, (std::vector<std::string>{"dr", "dra", "doctor", "doctora"}));
    EXPECT_THROW(load_lexicons("/nonexistent/lexicons"), Error);
}

TEST(Anonymizer, RulesPatch) {
    auto lex = small_lexicons();
    apply_rules_patch(lex, "# iteration 2\nadd surnames Zubizarreta\nremove places madrid\nadd title_patterns prof\n");
    EXPECT_TRUE(lex.surnames.count("zubizarreta"));
    EXPECT_FALSE(lex.places.count("madrid"));
    EXPECT_EQ(lex.title_patterns.back(), "prof");
    try {
        apply_rules_patch(lex, "add surnames x\nrename places y\n");
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(apply_rules_patch(lex, "add colours rojo"), SchemaError);
}

TEST(Anonymizer, CorpusKeepsIdsAndLabels) {
    const LabeledCorpus c({{"a", "Paciente María de 40 años", "acné"}});
    const auto out = anonymize_corpus(c, small_lexicons());
    EXPECT_EQ(out.records()[0].id, "a");
    EXPECT_EQ(out.records()[0].label, "acné");
    EXPECT_EQ(out.records()[0].text, "Paciente [Entidad] de  años");
}

// Properties over generated text.

namespace {

std::string random_document(Rng& rng, const LexiconSet& lex) {
    std::vector<std::string> vocab{"lesión", "de", "la", "dr", "dra", "Dr.", "12", "3/4", "[Entidad]", ",", ".",
                                   "doctora", "sol", "ñu", "x9y", "[Entidad]s", "[", "]"};
    for (const auto* set : {&lex.given_names, &lex.surnames, &lex.places, &lex.domain_exceptions})
        for (const auto& e : *set) vocab.push_back(rng.bernoulli(0.5) ? e : text::lowercase(e));
    std::string s;
    const auto n = rng.index(30);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += rng.bernoulli(0.8) ? " " : "";
        s += vocab[rng.index(vocab.size())];
    }
    return s;
}

} // namespace

TEST(AnonymizerProperty, NoDigitsIdempotentExceptionsKept) {
    const auto lex = shipped_lexicons();
    Rng rng(404);
    for (int trial = 0; trial < 500; ++trial) {
        const auto doc = random_document(rng, lex);
        const auto once = anonymize_document(doc, lex).masked_text;
        EXPECT_EQ(once.find_first_of("0123456789"), std::string::npos) << doc;
        EXPECT_EQ(anonymize_document(once, lex).masked_text, once) << doc;
        // stripping digits can fuse neighbouring words, so compare against the stripped input
        std::string stripped;
        for (char c : doc)
            if (c < '0' || c > '9') stripped += c;
        for (const auto& e : lex.domain_exceptions)
            EXPECT_EQ(count_word(once, e), count_word(stripped, e)) << "exception '" << e << "' in: " << doc;
    }
}

TEST(AnonymizerProperty, PlantedFixture) {
    const auto lex = shipped_lexicons();
    const auto docs = make_anonymizer_fixture(lex, 200, 5);
    ASSERT_EQ(docs.size(), 200u);
    for (const auto& d : docs) {
        const auto r = anonymize_document(d.text, lex);
        EXPECT_EQ(r.digit_stripped_count, d.digits);
        for (const auto& name : d.names) EXPECT_EQ(count_word(r.masked_text, name), 0u) << name << " in " << d.text;
        for (const auto& e : d.exceptions) EXPECT_EQ(count_word(r.masked_text, e), count_word(d.text, e));
    }
}
