// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pigment {

// Every error carries a short machine-readable code. The gateway forwards
// the code verbatim in error envelopes.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// A caller broke a precondition: shape mismatch, bad weights, out-of-range step.
class ContractError : public Error {
public:
    using Error::Error;
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

// Remote backend unreachable, timed out, or replied with garbage.
class TransportError : public Error {
public:
    using Error::Error;
    explicit TransportError(const std::string& what) : Error("transport", what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

// Illegal session state transition (resume while running, rollback while running, ...).
class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error("bad_state", what) {}
};

class LoadError : public Error {
public:
    using Error::Error;
    explicit LoadError(const std::string& what) : Error("load", what) {}
};

class MigrationError : public LoadError {
public:
    explicit MigrationError(const std::string& what) : LoadError("migration", what) {}
};

}  // namespace pigment
