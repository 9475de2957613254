#ifndef DERMCASCADE_ONTOLOGY_HPP
#define DERMCASCADE_ONTOLOGY_HPP

// Relation extraction: Spanish pathology label -> English concept -> local
// ontology snapshot -> (type, severity, site).
//
// The snapshot stands in for the terminology services. Its roles:
//   semantic_type  (UMLS role)    -> pathology type
//   finding_site   (SNOMED role)  -> anatomical site
//   severity_flags (ICD-10 role)  -> severity, via derive_severity()
// Source codes are kept as provenance only and never drive extraction.

#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/text.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dermcascade {

enum class PathType {
    proceso_neoplasico,
    proceso_autoinmune,
    precancer,
    enfermedad,
    tumor_benigno,
    sin_enfermedad,
    infeccion,
    sintoma,
    anormalidad,
    sindrome,
    funcion_patologica,
    envenenamiento,
};

enum class Severity { inofensivo, leve, importante, extrema };

enum class Site {
    piel,
    extremidades,
    todo,
    mano,
    articulaciones,
    cabeza,
    cara,
    pierna,
    boca,
    torso,
    genitales,
    tejido_conectivo,
};

inline constexpr std::array<std::string_view, 12> kPathTypeNames{
    "proceso neoplasico", "proceso autoinmune", "precancer",  "enfermedad",
    "tumor benigno",      "sin enfermedad",     "infeccion",  "sintoma",
    "anormalidad",        "sindrome",           "funcion patologica", "envenenamiento"};

inline constexpr std::array<std::string_view, 4> kSeverityNames{"inofensivo", "leve", "importante", "extrema"};

inline constexpr std::array<std::string_view, 12> kSiteNames{
    "piel", "extremidades", "todo",  "mano",  "articulaciones", "cabeza",
    "cara", "pierna",       "boca",  "torso", "genitales",      "tejido conectivo"};

inline std::string_view to_string(PathType v) { return kPathTypeNames[static_cast<std::size_t>(v)]; }
inline std::string_view to_string(Severity v) { return kSeverityNames[static_cast<std::size_t>(v)]; }
inline std::string_view to_string(Site v) { return kSiteNames[static_cast<std::size_t>(v)]; }

namespace detail {
template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
    const std::string key = text::normalize_label(s);
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == key) return static_cast<Enum>(i);
    return std::nullopt;
}
} // namespace detail

inline std::optional<PathType> parse_path_type(std::string_view s) { return detail::lookup<PathType>(kPathTypeNames, s); }
inline std::optional<Severity> parse_severity(std::string_view s) { return detail::lookup<Severity>(kSeverityNames, s); }
inline std::optional<Site> parse_site(std::string_view s) { return detail::lookup<Site>(kSiteNames, s); }

/// The three relations a cascade can learn, with their short names.
enum class Relation { type, severity, site };

inline constexpr std::array<Relation, 3> kAllRelations{Relation::type, Relation::severity, Relation::site};

inline std::string_view short_name(Relation r) {
    switch (r) {
    case Relation::type: return "t";
    case Relation::severity: return "gr";
    case Relation::site: return "sit";
    }
    return "?";
}

inline std::optional<Relation> parse_relation(std::string_view s) {
    if (s == "t") return Relation::type;
    if (s == "gr") return Relation::severity;
    if (s == "sit") return Relation::site;
    return std::nullopt;
}

/// Closed value set of a relation, in enum order.
inline std::vector<std::string> relation_values(Relation r) {
    std::vector<std::string> out;
    auto add = [&](const auto& names) {
        for (auto n : names) out.emplace_back(n);
    };
    switch (r) {
    case Relation::type: add(kPathTypeNames); break;
    case Relation::severity: add(kSeverityNames); break;
    case Relation::site: add(kSiteNames); break;
    }
    return out;
}

inline bool is_relation_value(Relation r, std::string_view value) {
    switch (r) {
    case Relation::type: return parse_path_type(value).has_value();
    case Relation::severity: return parse_severity(value).has_value();
    case Relation::site: return parse_site(value).has_value();
    }
    return false;
}

struct RelationTriple {
    PathType type;
    Severity severity;
    Site site;

    std::string value(Relation r) const {
        switch (r) {
        case Relation::type: return std::string(to_string(type));
        case Relation::severity: return std::string(to_string(severity));
        case Relation::site: return std::string(to_string(site));
        }
        return {};
    }

    friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

/// Parses "t=precancer,gr=inofensivo,sit=piel" (any order, all three required).
inline RelationTriple parse_triple(std::string_view s) {
    std::optional<PathType> t;
    std::optional<Severity> gr;
    std::optional<Site> sit;
    for (const auto& part : text::split(s, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw Error("triple component '" + part + "' is not name=value");
        const auto name = std::string(text::trim(std::string_view(part).substr(0, eq)));
        const auto value = std::string_view(part).substr(eq + 1);
        const auto rel = parse_relation(name);
        if (!rel) throw Error("unknown relation '" + name + "'");
        bool ok = false;
        switch (*rel) {
        case Relation::type: ok = (t = parse_path_type(value)).has_value(); break;
        case Relation::severity: ok = (gr = parse_severity(value)).has_value(); break;
        case Relation::site: ok = (sit = parse_site(value)).has_value(); break;
        }
        if (!ok) throw Error("invalid value '" + std::string(value) + "' for relation '" + name + "'");
    }
    if (!t || !gr || !sit) throw Error("triple must give t, gr and sit");
    return {*t, *gr, *sit};
}

// --- severity --------------------------------------------------------------

enum SeverityFlag : std::uint8_t { kMinor = 1, kMajor = 2, kMorbidity = 4 };
using SeverityFlags = std::uint8_t;

/// How several flags on one concept combine.
enum class SeverityPrecedence {
    strongest_wins,  // morbidity > major > minor
    first_match,     // literal if/elif order: minor, then major, then morbidity
};

inline Severity derive_severity(SeverityFlags flags,
                                SeverityPrecedence precedence = SeverityPrecedence::strongest_wins) {
    if (precedence == SeverityPrecedence::first_match) {
        if (flags & kMinor) return Severity::leve;
        if (flags & kMajor) return Severity::importante;
        if (flags & kMorbidity) return Severity::extrema;
        return Severity::inofensivo;
    }
    if (flags & kMorbidity) return Severity::extrema;
    if (flags & kMajor) return Severity::importante;
    if (flags & kMinor) return Severity::leve;
    return Severity::inofensivo;
}

/// English severity vocabulary used by the extraction procedure.
inline std::string_view english_severity_name(Severity s) {
    switch (s) {
    case Severity::inofensivo: return "inoffensive";
    case Severity::leve: return "light";
    case Severity::importante: return "important";
    case Severity::extrema: return "deadly";
    }
    return "?";
}

inline std::optional<SeverityFlag> parse_severity_flag(std::string_view s) {
    if (s == "minor") return kMinor;
    if (s == "major") return kMajor;
    if (s == "morbidity") return kMorbidity;
    return std::nullopt;
}

inline std::string severity_flags_to_string(SeverityFlags f) {
    std::vector<std::string> parts;
    if (f & kMinor) parts.emplace_back("minor");
    if (f & kMajor) parts.emplace_back("major");
    if (f & kMorbidity) parts.emplace_back("morbidity");
    return text::join(parts, ";");
}

// --- snapshot ---------------------------------------------------------------

struct SnapshotEntry {
    std::optional<PathType> semantic_type;
    std::optional<Site> finding_site;
    SeverityFlags severity_flags = 0;
    std::map<std::string, std::string> source_codes;  // ontology -> code, provenance only
};

class OntologySnapshot {
public:
    void add(std::string english_name, SnapshotEntry entry) {
        entries_[text::normalize_label(english_name)] = std::move(entry);
    }

    const SnapshotEntry* find(std::string_view english_name) const {
        auto it = entries_.find(text::normalize_label(english_name));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<std::string, SnapshotEntry>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, SnapshotEntry> entries_;
};

/// TSV columns: english_name, semantic_type, finding_site, severity_flags
/// (semicolon-joined), codes (ontology=code;...). Lines starting with '#' and a
/// header line starting with "english_name" are skipped. An empty
/// semantic_type or finding_site is allowed and reported at extraction time.
inline OntologySnapshot parse_snapshot(std::string_view content) {
    OntologySnapshot snap;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (text::normalize_label(cols[0]) == "english_name") continue;
        if (cols.size() < 4 || cols.size() > 5)
            throw SchemaError("expected 4 or 5 tab-separated columns, got " + std::to_string(cols.size()), line_no);
        const std::string name = text::normalize_label(cols[0]);
        if (name.empty()) throw SchemaError("empty english_name", line_no);
        SnapshotEntry e;
        if (!text::trim(cols[1]).empty()) {
            e.semantic_type = parse_path_type(cols[1]);
            if (!e.semantic_type) throw SchemaError("unknown semantic_type '" + cols[1] + "'", line_no);
        }
        if (!text::trim(cols[2]).empty()) {
            e.finding_site = parse_site(cols[2]);
            if (!e.finding_site) throw SchemaError("unknown finding_site '" + cols[2] + "'", line_no);
        }
        for (const auto& f : text::split(cols[3], ';')) {
            const auto flag = text::trim(f);
            if (flag.empty()) continue;
            const auto parsed = parse_severity_flag(flag);
            if (!parsed) throw SchemaError("unknown severity flag '" + std::string(flag) + "'", line_no);
            e.severity_flags |= *parsed;
        }
        if (cols.size() == 5) {
            for (const auto& c : text::split(cols[4], ';')) {
                const auto code = text::trim(c);
                if (code.empty()) continue;
                const auto eq = code.find('=');
                if (eq == std::string_view::npos) throw SchemaError("code '" + std::string(code) + "' is not ontology=code", line_no);
                e.source_codes[std::string(code.substr(0, eq))] = std::string(code.substr(eq + 1));
            }
        }
        snap.add(name, std::move(e));
    }
    return snap;
}

inline OntologySnapshot load_snapshot(const std::string& path) { return parse_snapshot(detail::read_file(path)); }

// --- translation ------------------------------------------------------------

/// Pluggable Spanish -> English translator consulted for labels missing from
/// the static map. Implementations may hold network state; the map calls them
/// from one thread at a time.
class TranslationClient {
public:
    virtual ~TranslationClient() = default;
    virtual std::optional<std::string> translate(const std::string& spanish_label) = 0;
};

class FunctionTranslationClient : public TranslationClient {
public:
    explicit FunctionTranslationClient(std::function<std::optional<std::string>(const std::string&)> fn)
        : fn_(std::move(fn)) {}
    std::optional<std::string> translate(const std::string& label) override { return fn_(label); }

private:
    std::function<std::optional<std::string>(const std::string&)> fn_;
};

class TranslationMap {
public:
    TranslationMap() = default;

    void add(std::string_view spanish, std::string_view english) {
        entries_[text::normalize_label(spanish)] = text::normalize_label(english);
    }

    void set_client(std::shared_ptr<TranslationClient> client) { client_ = std::move(client); }

    std::optional<std::string> lookup(std::string_view spanish) const {
        std::lock_guard lock(*mutex_);
        auto it = entries_.find(text::normalize_label(spanish));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    /// Mapped English name; falls back to the client (and caches its answer).
    std::string translate(std::string_view spanish) {
        const std::string key = text::normalize_label(spanish);
        std::lock_guard lock(*mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        if (client_) {
            if (auto answer = client_->translate(key)) {
                auto english = text::normalize_label(*answer);
                entries_[key] = english;
                return english;
            }
        }
        throw UnresolvedLabel(key);
    }

    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::shared_ptr<TranslationClient> client_;
    std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

/// Two-column TSV (spanish, english); '#' lines skipped.
inline TranslationMap parse_translation_map(std::string_view content) {
    TranslationMap map;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 2) throw SchemaError("expected 2 tab-separated columns", line_no);
        if (text::normalize_label(cols[0]).empty() || text::normalize_label(cols[1]).empty())
            throw SchemaError("empty translation column", line_no);
        map.add(cols[0], cols[1]);
    }
    return map;
}

inline TranslationMap load_translation_map(const std::string& path) {
    return parse_translation_map(detail::read_file(path));
}

inline std::string translate_label(std::string_view label, TranslationMap& map) { return map.translate(label); }

inline RelationTriple extract_relations(std::string_view label, TranslationMap& map, const OntologySnapshot& snapshot,
                                        SeverityPrecedence precedence = SeverityPrecedence::strongest_wins) {
    const std::string english = map.translate(label);
    const SnapshotEntry* entry = snapshot.find(english);
    if (!entry) throw UnresolvedLabel(text::normalize_label(label));
    if (!entry->semantic_type) throw MissingRelation(english, "semantic_type");
    if (!entry->finding_site) throw MissingRelation(english, "finding_site");
    return {*entry->semantic_type, derive_severity(entry->severity_flags, precedence), *entry->finding_site};
}

using TripleTable = std::map<std::string, RelationTriple>;

/// Triples for every label; all unresolved labels are reported together.
inline TripleTable extract_all(const std::vector<std::string>& labels, TranslationMap& map,
                               const OntologySnapshot& snapshot,
                               SeverityPrecedence precedence = SeverityPrecedence::strongest_wins) {
    TripleTable out;
    std::vector<std::string> unresolved;
    for (const auto& label : labels) {
        try {
            out[text::normalize_label(label)] = extract_relations(label, map, snapshot, precedence);
        } catch (const UnresolvedLabel&) {
            unresolved.push_back(label);
        }
    }
    if (!unresolved.empty()) throw ListError("labels without relations", unresolved);
    return out;
}

/// label <TAB> t <TAB> gr <TAB> sit, with a header line.
inline std::string triples_to_tsv(const TripleTable& table) {
    std::string out = "label\tt\tgr\tsit\n";
    for (const auto& [label, t] : table)
        out += label + '\t' + t.value(Relation::type) + '\t' + t.value(Relation::severity) + '\t' +
               t.value(Relation::site) + '\n';
    return out;
}

inline TripleTable parse_triples_tsv(std::string_view content) {
    TripleTable out;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 4) throw SchemaError("expected 4 tab-separated columns", line_no);
        if (text::normalize_label(cols[0]) == "label") continue;
        auto t = parse_path_type(cols[1]);
        auto g = parse_severity(cols[2]);
        auto s = parse_site(cols[3]);
        if (!t || !g || !s) throw SchemaError("unknown relation value", line_no);
        out[text::normalize_label(cols[0])] = {*t, *g, *s};
    }
    return out;
}

inline TripleTable load_triples(const std::string& path) { return parse_triples_tsv(detail::read_file(path)); }

} // namespace dermcascade

#endif
