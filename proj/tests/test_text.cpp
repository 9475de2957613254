#include "dermcascade/text.hpp"

#include <gtest/gtest.h>

using namespace dermcascade;

TEST(Text, DecodesMultibyteAndRejectsInvalid) {
    const std::string s = "é⟦";
    auto d = text::decode(s, 0);
    EXPECT_EQ(d.cp, U'é');
    EXPECT_EQ(d.length, 2u);
    d = text::decode(s, 2);
    EXPECT_EQ(d.cp, U'⟦');
    EXPECT_EQ(d.length, 3u);

    const std::string bad = "\xC3";
    d = text::decode(bad, 0);
    EXPECT_EQ(d.cp, text::kReplacement);
    EXPECT_EQ(d.length, 1u);
    const std::string overlong = "\xC0\xAF";
    EXPECT_EQ(text::decode(overlong, 0).cp, text::kReplacement);
}

TEST(Text, LowercaseHandlesSpanishLetters) {
    EXPECT_EQ(text::lowercase("ÁNGEL Núñez"), "ángel núñez");
    EXPECT_EQ(text::lowercase("ACNÉ"), "acné");
    const std::string invalid = "A\xFFZ";
    EXPECT_EQ(text::lowercase(invalid), "a\xFFz");
}

TEST(Text, NormalizeLabelTrimsAndCollapses) {
    EXPECT_EQ(text::normalize_label("  Queratosis   Actínica \t"), "queratosis actínica");
    EXPECT_EQ(text::normalize_label("   "), "");
}

TEST(Text, LetterRunsSkipDigitsAndPunctuation) {
    const std::string s = "dra. Pérez-12 ok";
    const auto runs = text::letter_runs(s);
    ASSERT_EQ(runs.size(), 3u);
    EXPECT_EQ(s.substr(runs[0].begin, runs[0].end - runs[0].begin), "dra");
    EXPECT_EQ(s.substr(runs[1].begin, runs[1].end - runs[1].begin), "Pérez");
    EXPECT_EQ(s.substr(runs[2].begin, runs[2].end - runs[2].begin), "ok");
}

TEST(Text, SplitKeepsEmptyFieldsAndJoinInverts) {
    const auto parts = text::split("a,,b,", ',');
    ASSERT_EQ(parts.size(), 4u);
    EXPECT_EQ(parts[1], "");
    EXPECT_EQ(text::join(parts, ","), "a,,b,");
    EXPECT_EQ(text::codepoint_count("acné"), 4u);
}
