#ifndef DERMCASCADE_ANONYMIZER_HPP
#define DERMCASCADE_ANONYMIZER_HPP

// Rule-based de-identification of clinical notes.
//
// The pipeline order is fixed:
//   1. delete every ASCII digit (surrounding punctuation is kept),
//   2. match given names, surnames and places on whole tokens,
//   3. drop matches listed as frequent words or domain exceptions,
//   4. replace surviving matches with the mask token,
//   5. mask the token that follows a title trigger (dr, dra, ...).
// Matching is case-insensitive, accent-sensitive. The mask token is never
// re-matched, which makes the transform idempotent.

#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/text.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace dermcascade {

inline constexpr std::string_view kMaskToken = "[Entidad]";

/// Word lists driving the anonymizer. Entries are stored normalized
/// (lowercase, single spaces between the words of multi-word entries).
struct LexiconSet {
    std::set<std::string> given_names;
    std::set<std::string> surnames;
    std::set<std::string> places;
    std::set<std::string> frequent_words;
    std::set<std::string> domain_exceptions;
    std::vector<std::string> title_patterns{"dr", "dra", "doctor", "doctora"};

    bool has_entities() const {
        return !given_names.empty() || !surnames.empty() || !places.empty();
    }
};

namespace detail {

/// Normalizes a lexicon entry to the form tokens are compared in: lowercase
/// letter runs joined by single spaces.
inline std::string lexicon_key(std::string_view entry) {
    const std::string lower = text::lowercase(entry);
    std::string key;
    for (const auto& run : text::letter_runs(lower)) {
        if (!key.empty()) key += ' ';
        key.append(lower, run.begin, run.end - run.begin);
    }
    return key;
}

inline std::vector<std::string> read_lexicon_lines(std::string_view content) {
    std::vector<std::string> out;
    for (const auto& raw : text::split(content, '\n')) {
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        std::string key = lexicon_key(line);
        if (!key.empty()) out.push_back(std::move(key));
    }
    return out;
}

inline std::set<std::string>* lexicon_category(LexiconSet& lex, std::string_view name) {
    if (name == "given_names") return &lex.given_names;
    if (name == "surnames") return &lex.surnames;
    if (name == "places") return &lex.places;
    if (name == "frequent_words") return &lex.frequent_words;
    if (name == "domain_exceptions") return &lex.domain_exceptions;
    return nullptr;
}

} // namespace detail

/// Reads `<dir>/{given_names,surnames,places,frequent_words,domain_exceptions,
/// title_patterns}.txt`. Missing files leave the list empty, except
/// title_patterns which keeps its default. Throws if no entity list has entries.
inline LexiconSet load_lexicons(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("lexicon directory '" + dir + "' does not exist");
    LexiconSet lex;
    auto load_into = [&](const char* file, std::set<std::string>& target) {
        const fs::path p = fs::path(dir) / file;
        if (!fs::exists(p)) return;
        for (auto& e : detail::read_lexicon_lines(detail::read_file(p.string()))) target.insert(std::move(e));
    };
    load_into("given_names.txt", lex.given_names);
    load_into("surnames.txt", lex.surnames);
    load_into("places.txt", lex.places);
    load_into("frequent_words.txt", lex.frequent_words);
    load_into("domain_exceptions.txt", lex.domain_exceptions);
    const fs::path titles = fs::path(dir) / "title_patterns.txt";
    if (fs::exists(titles)) {
        auto entries = detail::read_lexicon_lines(detail::read_file(titles.string()));
        if (!entries.empty()) lex.title_patterns = std::move(entries);
    }
    if (!lex.has_entities())
        throw Error("lexicon directory '" + dir + "' has no given names, surnames or places");
    return lex;
}

/// Applies a rules patch produced by the review loop. Each non-comment line is
/// `add <category> <entry>` or `remove <category> <entry>`, where category is
/// one of given_names, surnames, places, frequent_words, domain_exceptions,
/// title_patterns.
inline void apply_rules_patch(LexiconSet& lex, std::string_view patch) {
    std::size_t line_no = 0;
    for (const auto& raw : text::split(patch, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto sp1 = line.find(' ');
        if (sp1 == std::string_view::npos) throw SchemaError("expected '<op> <category> <entry>'", line_no);
        const auto op = line.substr(0, sp1);
        auto rest = text::trim(line.substr(sp1 + 1));
        const auto sp2 = rest.find(' ');
        if (sp2 == std::string_view::npos) throw SchemaError("expected '<op> <category> <entry>'", line_no);
        const auto category = rest.substr(0, sp2);
        const std::string entry = detail::lexicon_key(rest.substr(sp2 + 1));
        if (entry.empty()) throw SchemaError("empty entry", line_no);
        if (op != "add" && op != "remove") throw SchemaError("unknown operation '" + std::string(op) + "'", line_no);
        if (category == "title_patterns") {
            auto& t = lex.title_patterns;
            auto it = std::find(t.begin(), t.end(), entry);
            if (op == "add" && it == t.end()) t.push_back(entry);
            if (op == "remove" && it != t.end()) t.erase(it);
            continue;
        }
        auto* target = detail::lexicon_category(lex, category);
        if (!target) throw SchemaError("unknown category '" + std::string(category) + "'", line_no);
        if (op == "add") target->insert(entry);
        else target->erase(entry);
    }
}

struct AppliedRule {
    text::Span span;  // byte span of the mask token in the masked text
    std::string rule;  // given_name, surname, place or title

    friend bool operator==(const AppliedRule&, const AppliedRule&) = default;
};

struct AnonymizationResult {
    std::string masked_text;
    std::size_t mask_count = 0;
    std::size_t digit_stripped_count = 0;  // digit characters deleted
    std::vector<AppliedRule> applied_rules;
};

namespace detail {

struct Token {
    text::Span span;
    std::string key;  // lowercase form, empty for mask tokens
    bool is_mask = false;
};

inline std::vector<Token> tokenize_for_masking(std::string_view s) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.substr(i, kMaskToken.size()) == kMaskToken) {
            tokens.push_back({{i, i + kMaskToken.size()}, {}, true});
            i += kMaskToken.size();
            continue;
        }
        auto d = text::decode(s, i);
        if (!text::is_letter(d.cp)) {
            i += d.length;
            continue;
        }
        const std::size_t begin = i;
        while (i < s.size()) {
            if (s.substr(i, kMaskToken.size()) == kMaskToken) break;
            d = text::decode(s, i);
            if (!text::is_letter(d.cp)) break;
            i += d.length;
        }
        tokens.push_back({{begin, i}, text::lowercase(s.substr(begin, i - begin)), false});
    }
    return tokens;
}

inline bool whitespace_only(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return text::is_space(c); });
}

inline std::size_t max_phrase_words(const LexiconSet& lex) {
    std::size_t m = 1;
    for (const auto* set : {&lex.given_names, &lex.surnames, &lex.places})
        for (const auto& e : *set) m = std::max<std::size_t>(m, 1 + std::count(e.begin(), e.end(), ' '));
    return m;
}

} // namespace detail

inline AnonymizationResult anonymize_document(std::string_view input, const LexiconSet& lex) {
    AnonymizationResult result;

    // 1. digits
    std::string stripped;
    stripped.reserve(input.size());
    for (char c : input) {
        if (text::is_ascii_digit(c)) ++result.digit_stripped_count;
        else stripped += c;
    }

    const auto tokens = detail::tokenize_for_masking(stripped);
    const std::size_t max_words = detail::max_phrase_words(lex);

    struct Match {
        std::size_t first, last;  // token indices, inclusive
        const char* rule;
    };
    std::vector<Match> matches;

    // 2-3. lexicon matches, longest phrase first, filtered by exceptions
    for (std::size_t i = 0; i < tokens.size();) {
        if (tokens[i].is_mask) {
            ++i;
            continue;
        }
        bool matched = false;
        std::string phrase;
        std::vector<std::string> candidates;
        for (std::size_t j = i; j < tokens.size() && j - i < max_words; ++j) {
            if (tokens[j].is_mask) break;
            if (j > i) {
                const auto gap = std::string_view(stripped).substr(
                    tokens[j - 1].span.end, tokens[j].span.begin - tokens[j - 1].span.end);
                if (!detail::whitespace_only(gap)) break;
                phrase += ' ';
            }
            phrase += tokens[j].key;
            candidates.push_back(phrase);
        }
        for (std::size_t len = candidates.size(); len >= 1 && !matched; --len) {
            const auto& p = candidates[len - 1];
            const char* rule = lex.given_names.count(p) ? "given_name"
                             : lex.surnames.count(p)    ? "surname"
                             : lex.places.count(p)      ? "place"
                                                        : nullptr;
            if (!rule) continue;
            if (lex.frequent_words.count(p) || lex.domain_exceptions.count(p)) continue;
            bool has_exception = false;
            for (std::size_t t = i; t < i + len; ++t)
                if (lex.domain_exceptions.count(tokens[t].key)) has_exception = true;
            if (has_exception) continue;
            matches.push_back({i, i + len - 1, rule});
            i += len;
            matched = true;
        }
        if (!matched) ++i;
    }

    std::vector<const char*> masked(tokens.size(), nullptr);
    std::vector<std::size_t> group_end(tokens.size(), 0);
    for (const auto& m : matches) {
        masked[m.first] = m.rule;
        group_end[m.first] = m.last;
        for (std::size_t t = m.first + 1; t <= m.last; ++t) masked[t] = "";
    }

    // 5. title triggers mask the next word token
    const std::unordered_set<std::string> triggers(lex.title_patterns.begin(), lex.title_patterns.end());
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i].is_mask || !triggers.count(tokens[i].key)) continue;
        const auto& next = tokens[i + 1];
        if (next.is_mask || masked[i + 1] || lex.domain_exceptions.count(next.key)) continue;
        masked[i + 1] = "title";
        group_end[i + 1] = i + 1;
    }

    // 4. rebuild with mask tokens
    std::string out;
    out.reserve(stripped.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const char* rule = masked[i];
        if (!rule || *rule == '\0') continue;
        const auto begin = tokens[i].span.begin;
        const auto end = tokens[group_end[i]].span.end;
        out.append(stripped, cursor, begin - cursor);
        const std::size_t at = out.size();
        out += kMaskToken;
        result.applied_rules.push_back({{at, out.size()}, rule});
        ++result.mask_count;
        cursor = end;
    }
    out.append(stripped, cursor, std::string::npos);
    result.masked_text = std::move(out);
    return result;
}

/// Anonymizes every record text; ids and labels are untouched.
inline LabeledCorpus anonymize_corpus(const LabeledCorpus& corpus, const LexiconSet& lex) {
    std::vector<ClinicalRecord> out;
    out.reserve(corpus.size());
    for (const auto& r : corpus.records())
        out.push_back({r.id, anonymize_document(r.text, lex).masked_text, r.label});
    return LabeledCorpus(std::move(out));
}

} // namespace dermcascade

#endif
