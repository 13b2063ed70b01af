#pragma once

#include <stdexcept>
#include <string>

namespace evex {

// Broad failure categories; the CLI maps these onto exit codes.
enum class ErrorKind {
    Config,
    Io,
    Oracle,
    Parse,
    Data,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct EmptyDocument : Error {
    explicit EmptyDocument(std::string msg = "document text is empty or whitespace-only")
        : Error(ErrorKind::Data, std::move(msg)) {}
};

struct EmptySlot : Error {
    explicit EmptySlot(std::string msg) : Error(ErrorKind::Data, std::move(msg)) {}
};

struct TokenizationMismatch : Error {
    explicit TokenizationMismatch(std::string msg) : Error(ErrorKind::Data, std::move(msg)) {}
};

struct EmptyView : Error {
    explicit EmptyView(std::string msg = "tokenized view holds no sentences")
        : Error(ErrorKind::Data, std::move(msg)) {}
};

struct InvalidPath : Error {
    explicit InvalidPath(std::string msg) : Error(ErrorKind::Internal, std::move(msg)) {}
};

struct InvalidRequest : Error {
    explicit InvalidRequest(std::string msg) : Error(ErrorKind::Oracle, std::move(msg)) {}
};

struct ContextTooLong : Error {
    explicit ContextTooLong(std::string msg) : Error(ErrorKind::Oracle, std::move(msg)) {}
};

struct TransportError : Error {
    explicit TransportError(std::string msg) : Error(ErrorKind::Oracle, std::move(msg)) {}
};

struct OracleFailure : Error {
    explicit OracleFailure(std::string msg) : Error(ErrorKind::Oracle, std::move(msg)) {}
};

struct NoCandidates : Error {
    explicit NoCandidates(std::string msg = "trie has no sentence prefixes to decode")
        : Error(ErrorKind::Data, std::move(msg)) {}
};

struct ParseError : Error {
    explicit ParseError(std::string msg) : Error(ErrorKind::Parse, std::move(msg)) {}
};

struct ConfigError : Error {
    explicit ConfigError(std::string msg) : Error(ErrorKind::Config, std::move(msg)) {}
};

struct IoError : Error {
    explicit IoError(std::string msg) : Error(ErrorKind::Io, std::move(msg)) {}
};

// Rethrows err with a pipeline stage prepended so callers can see where a
// multi-stage run failed.
[[noreturn]] inline void rethrow_with_stage(const Error& err, const std::string& stage) {
    throw Error(err.kind(), stage + ": " + err.what());
}

}  // namespace evex
