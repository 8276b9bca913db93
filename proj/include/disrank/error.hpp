#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace disrank {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based and counts the header row.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return m_line; }

private:
    std::size_t m_line;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Corrupt or truncated binary container (EMBS / NNCK).
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset);
    std::uint64_t offset() const noexcept { return m_offset; }

private:
    std::uint64_t m_offset;
};

/// A key that should be present is not.
class LookupError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Fewer than two judgments for an instance; disagreement is undefined.
class InsufficientJudgmentsError : public Error {
public:
    using Error::Error;
};

/// Rank correlation requested for a constant vector.
class DegenerateRankingError : public Error {
public:
    using Error::Error;
};

} // namespace disrank
