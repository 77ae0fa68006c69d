#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptlint/money.hpp"

namespace promptlint {

struct model_spec {
    std::string model_id;
    std::string provider_route;
    micros price_in = 0;   // per 1M prompt tokens
    micros price_out = 0;  // per 1M completion tokens
};

struct model_roster {
    std::vector<model_spec> models;

    const model_spec* find(std::string_view model_id) const;
    /// Throws unknown_model_error.
    const model_spec& require(std::string_view model_id) const;
};

model_roster load_roster(std::string_view json_text);
std::string serialize_roster(const model_roster& roster);

struct chat_message {
    std::string role;  // system | user | assistant
    std::string content;
};

struct chat_request {
    std::string model_id;
    std::vector<chat_message> messages;
    std::optional<int> max_output_tokens;
};

struct chat_response {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t call_id = 0;
};

/// Replay key: hash of the model id and the full message list (roles and
/// contents, length-prefixed). max_output_tokens does not participate.
std::string request_digest(const chat_request& request);

struct cost_record {
    std::int64_t call_id = 0;
    std::string model_id;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    micros cost = 0;
    std::optional<std::int64_t> retry_of;
    std::string provenance = "computed";  // computed | actual
    bool ok = true;
    std::string error;
};

/// Thread-safe append-only ledger shared by gateway backends.
class cost_ledger {
  public:
    std::int64_t append(cost_record record);  // assigns and returns call_id
    std::vector<cost_record> snapshot() const;
    std::int64_t size() const;
    void clear();

  private:
    mutable std::mutex mu_;
    std::vector<cost_record> records_;
    std::int64_t next_id_ = 1;
};

std::vector<cost_record> load_ledger(std::string_view json_text);
std::string serialize_ledger(const std::vector<cost_record>& records);

class llm_gateway {
  public:
    virtual ~llm_gateway() = default;
    /// One model call. Appends exactly one cost record, also on failure.
    /// retry_of links the record to the failed attempt it retries.
    virtual chat_response complete(const chat_request& request,
                                   std::optional<std::int64_t> retry_of = {}) = 0;
};

struct scripted_reply {
    bool fail = false;
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    micros cost = -1;  // >=0: recorded actual; <0: computed from prices
};

/// Deterministic scripted backend: replies are consumed in order.
/// Running past the script throws contract_error.
class mock_gateway : public llm_gateway {
  public:
    mock_gateway(std::vector<scripted_reply> script, cost_ledger& ledger,
                 const model_roster* roster = nullptr);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;
    std::size_t remaining() const;

  private:
    std::vector<scripted_reply> script_;
    std::size_t next_ = 0;
    cost_ledger& ledger_;
    const model_roster* roster_;
    mutable std::mutex mu_;
};

/// Backend that computes each reply from the request; used to synthesize
/// replay stores for fixtures.
class callback_gateway : public llm_gateway {
  public:
    using handler = std::function<scripted_reply(const chat_request&)>;
    callback_gateway(handler fn, cost_ledger& ledger,
                     const model_roster* roster = nullptr);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;

  private:
    handler fn_;
    cost_ledger& ledger_;
    const model_roster* roster_;
    std::mutex mu_;
};

/// Serves recorded responses from a directory of <digest>.json files.
/// A miss throws replay_miss_error naming the digest.
class replay_gateway : public llm_gateway {
  public:
    replay_gateway(std::string store_dir, cost_ledger& ledger);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;

  private:
    std::string dir_;
    cost_ledger& ledger_;
    std::mutex mu_;
};

/// Tees every successful completion into a replay store directory.
class recording_gateway : public llm_gateway {
  public:
    recording_gateway(llm_gateway& inner, std::string store_dir);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;

  private:
    llm_gateway& inner_;
    std::string dir_;
};

/// Retries transport failures up to max_retries, linking retry_of.
class retrying_gateway : public llm_gateway {
  public:
    retrying_gateway(llm_gateway& inner, int max_retries);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;

  private:
    llm_gateway& inner_;
    int max_retries_;
};

struct live_gateway_options {
    std::string base_url = "https://openrouter.ai/api/v1";
    std::string api_key_env = "OPENROUTER_API_KEY";
    int timeout_ms = 120000;
};

/// OpenAI-compatible chat completion over HTTP. Reads the API key from the
/// environment variable named in the options; never stores it.
class live_gateway : public llm_gateway {
  public:
    live_gateway(model_roster roster, cost_ledger& ledger,
                 live_gateway_options options);
    chat_response complete(const chat_request& request,
                           std::optional<std::int64_t> retry_of = {}) override;

  private:
    model_roster roster_;
    cost_ledger& ledger_;
    live_gateway_options options_;
};

struct model_total {
    std::string model_id;
    std::int64_t calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    micros total = 0;
};

struct ledger_totals_result {
    std::vector<model_total> per_model;  // total desc, calls desc, model_id asc
    micros grand_total = 0;
    std::int64_t total_calls = 0;
};

ledger_totals_result ledger_totals(const std::vector<cost_record>& records);

}  // namespace promptlint
