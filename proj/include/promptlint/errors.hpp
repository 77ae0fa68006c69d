#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace promptlint {

/// Base class for every error thrown by the library.
class error : public std::runtime_error {
  public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Input text is not valid UTF-8.
class encoding_error : public error {
  public:
    using error::error;
};

/// A loaded artifact (block set, rule file, config, ...) violates its invariants.
/// The message names the offending record.
class validation_error : public error {
  public:
    using error::error;
};

/// Structured output could not be parsed. Carries the raw text for audit.
class parse_error : public error {
  public:
    parse_error(const std::string& what, std::string raw)
        : error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

  private:
    std::string raw_;
};

/// LLM-assisted block decomposition failed after retry.
class decomposition_error : public parse_error {
  public:
    using parse_error::parse_error;
};

/// An operation was invoked outside its contract (wrong mode, empty input, ...).
class contract_error : public error {
  public:
    using error::error;
};

/// Config file problems: missing paths, bad values.
class config_error : public error {
  public:
    using error::error;
};

/// Request digest has no recorded response in the replay store.
class replay_miss_error : public error {
  public:
    replay_miss_error(const std::string& what, std::string digest)
        : error(what), digest_(std::move(digest)) {}
    const std::string& digest() const { return digest_; }

  private:
    std::string digest_;
};

/// model_id not present in the roster.
class unknown_model_error : public error {
  public:
    using error::error;
};

/// HTTP or scripted transport failure. Carries the ledger row of the failed attempt.
class transport_error : public error {
  public:
    transport_error(const std::string& what, std::int64_t call_id)
        : error(what), call_id_(call_id) {}
    std::int64_t call_id() const { return call_id_; }

  private:
    std::int64_t call_id_;
};

/// Findings passed to a distribution mix the impact and epistemic severity scales.
class scale_mismatch_error : public error {
  public:
    using error::error;
};

}  // namespace promptlint
