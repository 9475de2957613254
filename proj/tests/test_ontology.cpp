#include "dermcascade/ontology.hpp"
#include "nomenclature_table.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace dermcascade;
using testing_support::kReferenceNomenclature;
using testing_support::source_path;

namespace {

struct ShippedAssets {
    TranslationMap map = load_translation_map(source_path("data/ontology/translations.tsv"));
    OntologySnapshot snapshot = load_snapshot(source_path("data/ontology/snapshot.tsv"));
};

} // namespace

TEST(Ontology, TranslateLabel) {
    ShippedAssets a;
    EXPECT_EQ(translate_label("psoriasis", a.map), "psoriasis");
    EXPECT_EQ(translate_label("Queratosis  Actínica", a.map), "actinic keratosis");
    try {
        translate_label("zzz-no-existe", a.map);
        FAIL();
    } catch (const UnresolvedLabel& e) {
        EXPECT_EQ(e.label(), "zzz-no-existe");
    }
}

TEST(Ontology, TranslationClientFallbackIsCached) {
    TranslationMap map;
    map.add("acné", "acne");
    int calls = 0;
    map.set_client(std::make_shared<FunctionTranslationClient>([&](const std::string& label) -> std::optional<std::string> {
        ++calls;
        if (label == "sarna") return std::string("Scabies");
        return std::nullopt;
    }));
    EXPECT_EQ(map.translate("acné"), "acne");
    EXPECT_EQ(calls, 0);
    EXPECT_EQ(map.translate("Sarna"), "scabies");
    EXPECT_EQ(map.translate("sarna"), "scabies");
    EXPECT_EQ(calls, 1);
    EXPECT_THROW(map.translate("otra"), UnresolvedLabel);
}

TEST(Ontology, SeverityTableAllSubsets) {
    // Independent table: strongest flag present wins.
    const Severity expected[8] = {
        Severity::inofensivo, // {}
        Severity::leve,       // {minor}
        Severity::importante, // {major}
        Severity::importante, // {minor, major}
        Severity::extrema,    // {morbidity}
        Severity::extrema,    // {minor, morbidity}
        Severity::extrema,    // {major, morbidity}
        Severity::extrema,    // all
    };
    for (SeverityFlags f = 0; f < 8; ++f) EXPECT_EQ(derive_severity(f), expected[f]) << severity_flags_to_string(f);
    EXPECT_EQ(derive_severity(kMajor), Severity::importante);
    EXPECT_EQ(derive_severity(0), Severity::inofensivo);
    EXPECT_EQ(derive_severity(kMinor | kMorbidity), Severity::extrema);
    EXPECT_EQ(english_severity_name(derive_severity(kMinor)), "light");
    EXPECT_EQ(english_severity_name(derive_severity(kMajor)), "important");
    EXPECT_EQ(english_severity_name(derive_severity(kMorbidity)), "deadly");
    EXPECT_EQ(english_severity_name(derive_severity(0)), "inoffensive");
}

TEST(Ontology, FirstMatchPrecedence) {
    EXPECT_EQ(derive_severity(kMinor | kMorbidity, SeverityPrecedence::first_match), Severity::leve);
    EXPECT_EQ(derive_severity(kMajor | kMorbidity, SeverityPrecedence::first_match), Severity::importante);
    EXPECT_EQ(derive_severity(kMorbidity, SeverityPrecedence::first_match), Severity::extrema);
}

TEST(Ontology, ExtractRelationsExamples) {
    ShippedAssets a;
    EXPECT_EQ(extract_relations("carcinoma de células basales", a.map, a.snapshot),
              (RelationTriple{PathType::proceso_neoplasico, Severity::importante, Site::piel}));
    EXPECT_EQ(extract_relations("acné", a.map, a.snapshot),
              (RelationTriple{PathType::enfermedad, Severity::leve, Site::todo}));
    EXPECT_EQ(extract_relations("melanoma", a.map, a.snapshot),
              (RelationTriple{PathType::proceso_neoplasico, Severity::extrema, Site::todo}));
}

TEST(Ontology, ShippedSnapshotReproducesReferenceTable) {
    ShippedAssets a;
    EXPECT_EQ(a.snapshot.size(), 47u);
    EXPECT_EQ(a.map.size(), 47u);
    for (const auto& row : kReferenceNomenclature) {
        const auto t = extract_relations(row.disease, a.map, a.snapshot);
        EXPECT_EQ(t.value(Relation::type), row.type) << row.disease;
        EXPECT_EQ(t.value(Relation::severity), row.severity) << row.disease;
        EXPECT_EQ(t.value(Relation::site), row.site) << row.disease;
        EXPECT_EQ(extract_relations(row.disease, a.map, a.snapshot), t);
    }
}

TEST(Ontology, SnapshotSchema) {
    EXPECT_EQ(parse_snapshot("").size(), 0u);
    TranslationMap map;
    map.add("acné", "acne");
    EXPECT_THROW(extract_relations("acné", map, parse_snapshot("")), UnresolvedLabel);

    try {
        parse_snapshot("# c\nacne\tenfermedad\ttodo\thuge\n");
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse_snapshot("acne\tenfermedad\tluna\t\n"), SchemaError);
    EXPECT_THROW(parse_snapshot("acne\tenfermedad\n"), SchemaError);

    const auto snap = parse_snapshot("english_name\tsemantic_type\tfinding_site\tseverity_flags\n"
                                     "acne\tenfermedad\t\tminor\tICD10=L70\n");
    ASSERT_NE(snap.find("Acne"), nullptr);
    EXPECT_EQ(snap.find("acne")->source_codes.at("ICD10"), "L70");
    try {
        extract_relations("acné", map, snap);
        FAIL();
    } catch (const MissingRelation& e) {
        EXPECT_EQ(e.component(), "finding_site");
    }
}

TEST(Ontology, ExtractAllListsEveryUnresolvedLabel) {
    ShippedAssets a;
    try {
        extract_all({"acné", "zzz", "melanoma", "yyy"}, a.map, a.snapshot);
        FAIL();
    } catch (const ListError& e) {
        EXPECT_EQ(e.items(), (std::vector<std::string>{"zzz", "yyy"}));
    }
    const auto table = extract_all({"acné", "Melanoma"}, a.map, a.snapshot);
    EXPECT_EQ(table.size(), 2u);
    EXPECT_TRUE(table.count("melanoma"));
}

TEST(Ontology, TriplesTsvRoundTrip) {
    ShippedAssets a;
    std::vector<std::string> labels;
    for (const auto& row : kReferenceNomenclature) labels.emplace_back(row.disease);
    const auto table = extract_all(labels, a.map, a.snapshot);
    EXPECT_EQ(parse_triples_tsv(triples_to_tsv(table)), table);
    EXPECT_THROW(parse_triples_tsv("acné\tenfermedad\tleve\n"), SchemaError);
    EXPECT_THROW(parse_triples_tsv("acné\tenfermedad\tfatal\ttodo\n"), SchemaError);
}

TEST(Ontology, ParseTripleAndRelations) {
    EXPECT_EQ(parse_triple("sit=piel,t=precancer,gr=inofensivo"),
              (RelationTriple{PathType::precancer, Severity::inofensivo, Site::piel}));
    EXPECT_THROW(parse_triple("t=precancer,gr=inofensivo"), Error);
    EXPECT_THROW(parse_triple("t=precancer,gr=grave,sit=piel"), Error);
    EXPECT_THROW(parse_triple("x=1,gr=leve,sit=piel"), Error);
    for (auto r : kAllRelations) {
        EXPECT_EQ(parse_relation(short_name(r)), r);
        for (const auto& v : relation_values(r)) EXPECT_TRUE(is_relation_value(r, v));
    }
    EXPECT_EQ(relation_values(Relation::severity).size(), 4u);
}
