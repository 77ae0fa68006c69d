#ifdef PROMPTLINT_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include "promptlint/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/fnv.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

micros money_field(const json& j) {
    if (j.is_string()) return parse_money(j.get<std::string>());
    if (j.is_number_integer()) {
        return j.get<std::int64_t>() * micros_per_dollar;
    }
    if (j.is_number_float()) {
        return static_cast<micros>(
            std::llround(j.get<double>() * static_cast<double>(micros_per_dollar)));
    }
    throw validation_error("expected a money value");
}

/// Half-up division for non-negative price * token products.
micros scaled_price(micros price_per_million, std::int64_t tokens) {
    return (price_per_million * tokens + micros_per_dollar / 2) / micros_per_dollar;
}

micros compute_cost(const model_spec& spec, std::int64_t prompt_tokens,
                    std::int64_t completion_tokens) {
    return scaled_price(spec.price_in, prompt_tokens) +
           scaled_price(spec.price_out, completion_tokens);
}

/// Shared tail for scripted backends: record the reply in the ledger and
/// either return a response or throw transport_error carrying the call id.
chat_response finish_scripted(const chat_request& request,
                              const scripted_reply& reply, cost_ledger& ledger,
                              const model_roster* roster,
                              std::optional<std::int64_t> retry_of) {
    cost_record record;
    record.model_id = request.model_id;
    record.prompt_tokens = reply.prompt_tokens;
    record.completion_tokens = reply.completion_tokens;
    record.retry_of = retry_of;
    if (reply.cost >= 0) {
        record.cost = reply.cost;
        record.provenance = "actual";
    } else {
        record.cost = roster == nullptr
                          ? 0
                          : compute_cost(roster->require(request.model_id),
                                         reply.prompt_tokens,
                                         reply.completion_tokens);
        record.provenance = "computed";
    }
    if (reply.fail) {
        record.ok = false;
        record.error = "scripted failure";
        std::int64_t call_id = ledger.append(std::move(record));
        throw transport_error(
            "scripted failure from model '" + request.model_id + "'", call_id);
    }
    chat_response response;
    response.text = reply.text;
    response.prompt_tokens = reply.prompt_tokens;
    response.completion_tokens = reply.completion_tokens;
    response.call_id = ledger.append(std::move(record));
    return response;
}

}  // namespace

const model_spec* model_roster::find(std::string_view model_id) const {
    for (const model_spec& m : models) {
        if (m.model_id == model_id) return &m;
    }
    return nullptr;
}

const model_spec& model_roster::require(std::string_view model_id) const {
    const model_spec* m = find(model_id);
    if (m == nullptr) {
        throw unknown_model_error("model '" + std::string(model_id) +
                                  "' is not in the roster");
    }
    return *m;
}

model_roster load_roster(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed roster JSON", std::string(json_text));
    }
    model_roster roster;
    for (const json& jm : j.at("models")) {
        model_spec spec;
        spec.model_id = jm.at("model_id").get<std::string>();
        spec.provider_route = jm.value("provider_route", spec.model_id);
        if (jm.contains("price_in")) spec.price_in = money_field(jm.at("price_in"));
        if (jm.contains("price_out")) {
            spec.price_out = money_field(jm.at("price_out"));
        }
        if (spec.model_id.empty()) {
            throw validation_error("roster entry with empty model_id");
        }
        if (roster.find(spec.model_id) != nullptr) {
            throw validation_error("duplicate roster entry '" + spec.model_id + "'");
        }
        roster.models.push_back(std::move(spec));
    }
    return roster;
}

std::string serialize_roster(const model_roster& roster) {
    json j;
    j["models"] = json::array();
    for (const model_spec& m : roster.models) {
        json jm;
        jm["model_id"] = m.model_id;
        jm["provider_route"] = m.provider_route;
        jm["price_in"] = format_money_exact(m.price_in);
        jm["price_out"] = format_money_exact(m.price_out);
        j["models"].push_back(std::move(jm));
    }
    return j.dump(2) + "\n";
}

std::string request_digest(const chat_request& request) {
    fnv1a64 h;
    h.update_sized(request.model_id);
    for (const chat_message& m : request.messages) {
        h.update_sized(m.role);
        h.update_sized(m.content);
    }
    return to_hex(h.digest());
}

std::int64_t cost_ledger::append(cost_record record) {
    std::lock_guard lock(mu_);
    record.call_id = next_id_++;
    records_.push_back(std::move(record));
    return records_.back().call_id;
}

std::vector<cost_record> cost_ledger::snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::int64_t cost_ledger::size() const {
    std::lock_guard lock(mu_);
    return static_cast<std::int64_t>(records_.size());
}

void cost_ledger::clear() {
    std::lock_guard lock(mu_);
    records_.clear();
    next_id_ = 1;
}

std::vector<cost_record> load_ledger(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed ledger JSON", std::string(json_text));
    }
    if (j.value("format", "") != "promptlint-ledger/1") {
        throw validation_error("unsupported ledger format version: '" +
                               j.value("format", "") + "'");
    }
    std::vector<cost_record> records;
    for (const json& jr : j.at("records")) {
        cost_record r;
        r.call_id = jr.at("call_id").get<std::int64_t>();
        r.model_id = jr.at("model_id").get<std::string>();
        r.prompt_tokens = jr.value("prompt_tokens", std::int64_t{0});
        r.completion_tokens = jr.value("completion_tokens", std::int64_t{0});
        r.cost = money_field(jr.at("cost"));
        if (jr.contains("retry_of")) {
            r.retry_of = jr.at("retry_of").get<std::int64_t>();
        }
        r.provenance = jr.value("provenance", "computed");
        if (r.provenance != "computed" && r.provenance != "actual") {
            throw validation_error("record " + std::to_string(r.call_id) +
                                   " has unknown provenance '" + r.provenance +
                                   "'");
        }
        r.ok = jr.value("ok", true);
        r.error = jr.value("error", "");
        records.push_back(std::move(r));
    }
    return records;
}

std::string serialize_ledger(const std::vector<cost_record>& records) {
    json j;
    j["format"] = "promptlint-ledger/1";
    j["records"] = json::array();
    for (const cost_record& r : records) {
        json jr;
        jr["call_id"] = r.call_id;
        jr["model_id"] = r.model_id;
        jr["prompt_tokens"] = r.prompt_tokens;
        jr["completion_tokens"] = r.completion_tokens;
        jr["cost"] = format_money_exact(r.cost);
        if (r.retry_of) jr["retry_of"] = *r.retry_of;
        jr["provenance"] = r.provenance;
        jr["ok"] = r.ok;
        if (!r.error.empty()) jr["error"] = r.error;
        j["records"].push_back(std::move(jr));
    }
    return j.dump(2) + "\n";
}

mock_gateway::mock_gateway(std::vector<scripted_reply> script, cost_ledger& ledger,
                           const model_roster* roster)
    : script_(std::move(script)), ledger_(ledger), roster_(roster) {}

chat_response mock_gateway::complete(const chat_request& request,
                                     std::optional<std::int64_t> retry_of) {
    scripted_reply reply;
    {
        std::lock_guard lock(mu_);
        if (next_ >= script_.size()) {
            throw contract_error("mock gateway script exhausted after " +
                                 std::to_string(script_.size()) + " replies");
        }
        reply = script_[next_++];
    }
    return finish_scripted(request, reply, ledger_, roster_, retry_of);
}

std::size_t mock_gateway::remaining() const {
    std::lock_guard lock(mu_);
    return script_.size() - next_;
}

callback_gateway::callback_gateway(handler fn, cost_ledger& ledger,
                                   const model_roster* roster)
    : fn_(std::move(fn)), ledger_(ledger), roster_(roster) {}

chat_response callback_gateway::complete(const chat_request& request,
                                         std::optional<std::int64_t> retry_of) {
    scripted_reply reply;
    {
        std::lock_guard lock(mu_);
        reply = fn_(request);
    }
    return finish_scripted(request, reply, ledger_, roster_, retry_of);
}

namespace {

std::filesystem::path store_path(const std::string& dir,
                                 const chat_request& request) {
    return std::filesystem::path(dir) / (request_digest(request) + ".json");
}

}  // namespace

replay_gateway::replay_gateway(std::string store_dir, cost_ledger& ledger)
    : dir_(std::move(store_dir)), ledger_(ledger) {}

chat_response replay_gateway::complete(const chat_request& request,
                                       std::optional<std::int64_t> retry_of) {
    std::string digest = request_digest(request);
    std::ifstream in(store_path(dir_, request));
    if (!in) {
        throw replay_miss_error(
            "no recorded response for digest " + digest + " in " + dir_, digest);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j = json::parse(buffer.str(), nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed replay file for digest " + digest,
                          buffer.str());
    }

    cost_record record;
    record.model_id = request.model_id;
    record.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    record.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    record.retry_of = retry_of;
    if (j.contains("cost")) {
        record.cost = money_field(j.at("cost"));
        record.provenance = "actual";
    }

    chat_response response;
    response.text = j.value("text", "");
    response.prompt_tokens = record.prompt_tokens;
    response.completion_tokens = record.completion_tokens;
    {
        std::lock_guard lock(mu_);
        response.call_id = ledger_.append(std::move(record));
    }
    return response;
}

recording_gateway::recording_gateway(llm_gateway& inner, std::string store_dir)
    : inner_(inner), dir_(std::move(store_dir)) {}

chat_response recording_gateway::complete(const chat_request& request,
                                          std::optional<std::int64_t> retry_of) {
    chat_response response = inner_.complete(request, retry_of);
    std::filesystem::create_directories(dir_);
    json j;
    j["model_id"] = request.model_id;
    j["text"] = response.text;
    j["prompt_tokens"] = response.prompt_tokens;
    j["completion_tokens"] = response.completion_tokens;
    std::ofstream out(store_path(dir_, request));
    out << j.dump(2) << "\n";
    return response;
}

retrying_gateway::retrying_gateway(llm_gateway& inner, int max_retries)
    : inner_(inner), max_retries_(max_retries) {}

chat_response retrying_gateway::complete(const chat_request& request,
                                         std::optional<std::int64_t> retry_of) {
    std::optional<std::int64_t> link = retry_of;
    for (int attempt = 0;; ++attempt) {
        try {
            return inner_.complete(request, link);
        } catch (const transport_error& e) {
            if (attempt >= max_retries_) throw;
            link = e.call_id();
        }
    }
}

live_gateway::live_gateway(model_roster roster, cost_ledger& ledger,
                           live_gateway_options options)
    : roster_(std::move(roster)), ledger_(ledger), options_(std::move(options)) {}

chat_response live_gateway::complete(const chat_request& request,
                                     std::optional<std::int64_t> retry_of) {
    const model_spec& spec = roster_.require(request.model_id);

    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw config_error("environment variable " + options_.api_key_env +
                           " is not set");
    }

    // Split the base URL into origin and path prefix for httplib.
    std::string origin = options_.base_url;
    std::string prefix;
    std::size_t scheme = origin.find("://");
    std::size_t slash =
        origin.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash != std::string::npos) {
        prefix = origin.substr(slash);
        origin.resize(slash);
    }
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    json body;
    body["model"] = spec.provider_route;
    body["messages"] = json::array();
    for (const chat_message& m : request.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    if (request.max_output_tokens) body["max_tokens"] = *request.max_output_tokens;
    body["usage"] = {{"include", true}};

    auto fail = [&](const std::string& what) -> chat_response {
        cost_record record;
        record.model_id = request.model_id;
        record.retry_of = retry_of;
        record.ok = false;
        record.error = what;
        std::int64_t call_id = ledger_.append(std::move(record));
        throw transport_error(what, call_id);
    };

    httplib::Client client(origin);
    client.set_connection_timeout(options_.timeout_ms / 1000,
                                  options_.timeout_ms % 1000 * 1000);
    client.set_read_timeout(options_.timeout_ms / 1000,
                            options_.timeout_ms % 1000 * 1000);
    client.set_bearer_token_auth(key);

    httplib::Result res =
        client.Post(prefix + "/chat/completions", body.dump(), "application/json");
    if (!res) return fail("transport failure: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        return fail("HTTP " + std::to_string(res->status) + " from " + origin);
    }

    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
        return fail("unparseable completion payload");
    }

    chat_response response;
    response.text =
        j["choices"][0].value("message", json::object()).value("content", "");

    cost_record record;
    record.model_id = request.model_id;
    record.retry_of = retry_of;
    if (j.contains("usage")) {
        const json& usage = j["usage"];
        response.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
        response.completion_tokens =
            usage.value("completion_tokens", std::int64_t{0});
        record.prompt_tokens = response.prompt_tokens;
        record.completion_tokens = response.completion_tokens;
        if (usage.contains("cost")) {
            record.cost = money_field(usage.at("cost"));
            record.provenance = "actual";
        }
    }
    if (record.provenance != "actual") {
        record.cost = compute_cost(spec, record.prompt_tokens,
                                   record.completion_tokens);
        record.provenance = "computed";
    }
    response.call_id = ledger_.append(std::move(record));
    return response;
}

ledger_totals_result ledger_totals(const std::vector<cost_record>& records) {
    ledger_totals_result result;
    std::map<std::string, model_total> by_model;
    for (const cost_record& r : records) {
        model_total& t = by_model[r.model_id];
        t.model_id = r.model_id;
        t.calls += 1;
        t.prompt_tokens += r.prompt_tokens;
        t.completion_tokens += r.completion_tokens;
        t.total += r.cost;
        result.grand_total += r.cost;
        result.total_calls += 1;
    }
    for (auto& [_, t] : by_model) result.per_model.push_back(std::move(t));
    std::sort(result.per_model.begin(), result.per_model.end(),
              [](const model_total& a, const model_total& b) {
                  if (a.total != b.total) return a.total > b.total;
                  if (a.calls != b.calls) return a.calls > b.calls;
                  return a.model_id < b.model_id;
              });
    return result;
}

}  // namespace promptlint
