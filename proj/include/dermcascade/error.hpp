#ifndef DERMCASCADE_ERROR_HPP
#define DERMCASCADE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dermcascade {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `offset` is the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A single record violates a precondition. `row` is zero-based.
class RowError : public Error {
public:
    RowError(const std::string& what, std::size_t row)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Schema violation in a line-oriented asset. `line` is one-based.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnresolvedLabel : public Error {
public:
    explicit UnresolvedLabel(std::string label)
        : Error("unresolved label: '" + label + "'"), label_(std::move(label)) {}

    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

class MissingRelation : public Error {
public:
    MissingRelation(const std::string& concept_name, std::string component)
        : Error("concept '" + concept_name + "' has no value for relation '" + component + "'"),
          component_(std::move(component)) {}

    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

/// Error carrying a list of offending labels or ids.
class ListError : public Error {
public:
    ListError(const std::string& what, std::vector<std::string> items)
        : Error(what + ": " + join(items)), items_(std::move(items)) {}

    const std::vector<std::string>& items() const noexcept { return items_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) out += ", ";
            out += items[i];
        }
        return out;
    }

    std::vector<std::string> items_;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace dermcascade

#endif
