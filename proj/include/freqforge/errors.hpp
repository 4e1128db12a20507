#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace freqforge {

/// Input that violates an operation's precondition (shape, range, cardinality).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad or inconsistent configuration (unknown key, 2K > 64, negative weights...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, truncated or mismatched checkpoint file.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class NanLossError : public std::runtime_error {
public:
    NanLossError(const std::string& what, long epoch, long batch_index, std::map<std::string, double> components = {})
        : std::runtime_error(what), epoch_(epoch), batch_index_(batch_index), components_(std::move(components)) {}

    long epoch() const noexcept { return epoch_; }
    /// -1 when the divergence showed up during validation.
    long batch_index() const noexcept { return batch_index_; }
    /// Loss components of the offending batch, empty when the forward pass already failed.
    const std::map<std::string, double>& components() const noexcept { return components_; }

private:
    long epoch_;
    long batch_index_;
    std::map<std::string, double> components_;
};

} // namespace freqforge
