#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace caspar {

/// Broad category of a failure; the CLI maps it onto its exit code.
enum class ErrorKind
{
    usage,
    data,
    numerical,
};

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, std::string name, const std::string& what)
        : std::runtime_error(what), kind_(kind), name_(std::move(name))
    {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Stable machine-readable tag, e.g. "SingularSupport".
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define CASPAR_DEFINE_ERROR(Name, Kind)                                       \
    class Name : public Error                                                 \
    {                                                                         \
    public:                                                                   \
        explicit Name(const std::string& what)                                \
            : Error(ErrorKind::Kind, #Name, what)                             \
        {}                                                                    \
    };

CASPAR_DEFINE_ERROR(InvalidArgument, usage)
CASPAR_DEFINE_ERROR(BadFoldCount, usage)

CASPAR_DEFINE_ERROR(DimensionMismatch, data)
CASPAR_DEFINE_ERROR(InvalidGraph, data)
CASPAR_DEFINE_ERROR(InfeasiblePlacement, data)
CASPAR_DEFINE_ERROR(ZeroTruth, data)
CASPAR_DEFINE_ERROR(LengthMismatch, data)
CASPAR_DEFINE_ERROR(EmptyPanel, data)
CASPAR_DEFINE_ERROR(AllPositionsConstant, data)
CASPAR_DEFINE_ERROR(DuplicateId, data)
CASPAR_DEFINE_ERROR(IoError, data)
CASPAR_DEFINE_ERROR(InvalidValue, data)

CASPAR_DEFINE_ERROR(SingularSupport, numerical)
CASPAR_DEFINE_ERROR(NoConvergence, numerical)
CASPAR_DEFINE_ERROR(AllPointsFailed, numerical)

#undef CASPAR_DEFINE_ERROR

class ConstantColumn : public Error
{
public:
    explicit ConstantColumn(std::size_t column)
        : Error(ErrorKind::data, "ConstantColumn",
                "column " + std::to_string(column) + " has zero variance"),
          column_(column)
    {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(ErrorKind::data, "ParseError",
                source + ":" + std::to_string(line) + ": " + what),
          line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace caspar
