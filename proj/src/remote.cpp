#include "evex/remote.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "evex/errors.hpp"

namespace evex {

namespace {

nlohmann::json parse_body(const std::string& body, const std::string& what) {
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) {
        throw OracleFailure("malformed JSON in " + what + " response");
    }
    return parsed;
}

std::string server_error(const std::string& body) {
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("error") &&
        parsed["error"].is_string()) {
        return parsed["error"].get<std::string>();
    }
    return body.empty() ? "(no body)" : body;
}

nlohmann::json ids_or_null(const std::optional<std::vector<int>>& ids) {
    if (!ids.has_value()) return nullptr;
    return *ids;
}

}  // namespace

RemoteEndpoint::RemoteEndpoint(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("remote oracle URL is empty");
    client_ = std::make_unique<httplib::Client>(cfg_.base_url);
    client_->set_connection_timeout(cfg_.timeout_seconds, 0);
    client_->set_read_timeout(cfg_.timeout_seconds, 0);
    client_->set_write_timeout(cfg_.timeout_seconds, 0);
    if (!cfg_.bearer_token.empty()) {
        client_->set_bearer_token_auth(cfg_.bearer_token);
    }
}

RemoteEndpoint::~RemoteEndpoint() = default;

std::string RemoteEndpoint::post_json(const std::string& path, const std::string& body) const {
    std::lock_guard<std::mutex> guard(lock_);
    std::string last;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        }
        httplib::Result res = client_->Post(path, body, "application/json");
        if (!res) {
            last = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        if (res->status >= 500) {
            last = "status " + std::to_string(res->status) + ": " + server_error(res->body);
            continue;
        }
        throw OracleFailure("server rejected " + path + " (status " +
                            std::to_string(res->status) + "): " + server_error(res->body));
    }
    throw TransportError("POST " + cfg_.base_url + path + " failed after " +
                         std::to_string(cfg_.max_retries + 1) + " attempts: " + last);
}

std::string RemoteEndpoint::get(const std::string& path) const {
    std::lock_guard<std::mutex> guard(lock_);
    std::string last;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        }
        httplib::Result res = client_->Get(path);
        if (!res) {
            last = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        if (res->status >= 500) {
            last = "status " + std::to_string(res->status) + ": " + server_error(res->body);
            continue;
        }
        throw OracleFailure("server rejected " + path + " (status " +
                            std::to_string(res->status) + "): " + server_error(res->body));
    }
    throw TransportError("GET " + cfg_.base_url + path + " failed after " +
                         std::to_string(cfg_.max_retries + 1) + " attempts: " + last);
}

RemoteTokenSpace::RemoteTokenSpace(std::shared_ptr<RemoteEndpoint> endpoint)
    : endpoint_(std::move(endpoint)) {
    nlohmann::json info = parse_body(endpoint_->get("/v1/tokenizer"), "/v1/tokenizer");
    if (!info.is_object() || !info.contains("vocab_size") || !info.contains("eos_id")) {
        throw OracleFailure("/v1/tokenizer response lacks vocab_size/eos_id");
    }
    vocab_size_ = info["vocab_size"].get<int>();
    eos_id_ = info["eos_id"].get<int>();
    if (vocab_size_ < 1 || eos_id_ < 0 || eos_id_ >= vocab_size_) {
        throw OracleFailure("/v1/tokenizer reported an invalid vocabulary shape");
    }
}

std::vector<int> RemoteTokenSpace::encode(std::string_view text) const {
    nlohmann::json body = {{"text", std::string(text)}};
    nlohmann::json resp = parse_body(endpoint_->post_json("/v1/encode", body.dump()), "/v1/encode");
    if (!resp.is_object() || !resp.contains("ids") || !resp["ids"].is_array()) {
        throw OracleFailure("/v1/encode response lacks ids");
    }
    return resp["ids"].get<std::vector<int>>();
}

std::string RemoteTokenSpace::decode(std::span<const int> ids) const {
    nlohmann::json body = {{"ids", std::vector<int>(ids.begin(), ids.end())}};
    nlohmann::json resp = parse_body(endpoint_->post_json("/v1/decode", body.dump()), "/v1/decode");
    if (!resp.is_object() || !resp.contains("text") || !resp["text"].is_string()) {
        throw OracleFailure("/v1/decode response lacks text");
    }
    return resp["text"].get<std::string>();
}

std::string RemoteTokenSpace::piece(int id) const {
    int ids[1] = {id};
    return decode(std::span<const int>(ids, 1));
}

RemoteOracle::RemoteOracle(std::shared_ptr<RemoteEndpoint> endpoint)
    : endpoint_(std::move(endpoint)),
      space_(std::make_shared<RemoteTokenSpace>(endpoint_)) {}

OracleResponse RemoteOracle::round_trip(const OracleRequest& req, bool want_eos) {
    const int limit = endpoint_->config().max_context_tokens;
    if (limit > 0) {
        std::size_t total = req.context.size() +
                            (req.continuation.has_value() ? req.continuation->size() : 0);
        if (total > static_cast<std::size_t>(limit)) {
            throw ContextTooLong("request spans " + std::to_string(total) +
                                 " tokens, limit is " + std::to_string(limit));
        }
    }

    nlohmann::json body = {{"context", req.context},
                           {"candidates", ids_or_null(req.candidates)},
                           {"continuation", ids_or_null(req.continuation)},
                           {"eos_offsets", nullptr}};
    if (req.eos_offsets.has_value()) body["eos_offsets"] = *req.eos_offsets;

    nlohmann::json resp =
        parse_body(endpoint_->post_json("/v1/logprobs", body.dump()), "/v1/logprobs");
    if (!resp.is_object()) throw OracleFailure("/v1/logprobs response is not an object");

    OracleResponse out;
    if (req.candidates.has_value()) {
        if (!resp.contains("logprobs") || !resp["logprobs"].is_object()) {
            throw OracleFailure("/v1/logprobs response lacks logprobs");
        }
        for (const auto& [key, value] : resp["logprobs"].items()) {
            out.logprobs[std::stoi(key)] = value.get<double>();
        }
        for (int id : *req.candidates) {
            auto it = out.logprobs.find(id);
            if (it == out.logprobs.end()) {
                throw OracleFailure("server returned no logprob for candidate " +
                                    std::to_string(id));
            }
            if (it->second > 1e-9) {
                throw OracleFailure("server returned a positive logprob for token " +
                                    std::to_string(id));
            }
        }
    }
    if (want_eos) {
        if (!resp.contains("eos_logprobs") || !resp["eos_logprobs"].is_array()) {
            throw OracleFailure("/v1/logprobs response lacks eos_logprobs");
        }
        out.eos_logprobs = resp["eos_logprobs"].get<std::vector<double>>();
        if (out.eos_logprobs.size() != req.eos_offsets->size()) {
            throw OracleFailure("server returned " + std::to_string(out.eos_logprobs.size()) +
                                " eos logprobs for " + std::to_string(req.eos_offsets->size()) +
                                " offsets");
        }
    }
    return out;
}

OracleResponse RemoteOracle::score_candidates(const OracleRequest& req) {
    return round_trip(req, false);
}

OracleResponse RemoteOracle::probe_boundaries(const OracleRequest& req) {
    return round_trip(req, true);
}

RemoteEmbeddingScorer::RemoteEmbeddingScorer(std::shared_ptr<RemoteEndpoint> endpoint)
    : endpoint_(std::move(endpoint)) {}

std::vector<double> RemoteEmbeddingScorer::score(const std::string& query,
                                                 const std::vector<Chunk>& chunks) const {
    std::vector<std::string> texts;
    texts.reserve(chunks.size() + 1);
    texts.push_back(query);
    for (const Chunk& c : chunks) texts.push_back(c.text);

    nlohmann::json body = {{"texts", texts}};
    nlohmann::json resp = parse_body(endpoint_->post_json("/v1/embed", body.dump()), "/v1/embed");
    if (!resp.is_object() || !resp.contains("vectors") || !resp["vectors"].is_array() ||
        resp["vectors"].size() != texts.size()) {
        throw OracleFailure("/v1/embed returned a vector count mismatch");
    }
    std::vector<std::vector<double>> vectors =
        resp["vectors"].get<std::vector<std::vector<double>>>();

    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    const std::vector<double>& q = vectors[0];
    const double qn = norm(q);
    std::vector<double> scores(chunks.size(), 0.0);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const std::vector<double>& v = vectors[i + 1];
        if (v.size() != q.size()) throw OracleFailure("/v1/embed returned ragged vectors");
        double dot = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) dot += q[j] * v[j];
        double vn = norm(v);
        scores[i] = qn > 0.0 && vn > 0.0 ? dot / (qn * vn) : 0.0;
    }
    return scores;
}

RemoteGenerator::RemoteGenerator(std::shared_ptr<RemoteEndpoint> endpoint, int max_tokens)
    : endpoint_(std::move(endpoint)), max_tokens_(max_tokens) {}

std::string RemoteGenerator::generate(const PromptEnvelope& prompt) {
    nlohmann::json body = {{"prompt", prompt.rendered}, {"max_tokens", max_tokens_}};
    nlohmann::json resp =
        parse_body(endpoint_->post_json("/v1/generate", body.dump()), "/v1/generate");
    if (!resp.is_object() || !resp.contains("text") || !resp["text"].is_string()) {
        throw OracleFailure("/v1/generate response lacks text");
    }
    return resp["text"].get<std::string>();
}

RemoteQueryGenerator::RemoteQueryGenerator(std::shared_ptr<RemoteEndpoint> endpoint,
                                           int max_tokens)
    : endpoint_(std::move(endpoint)), max_tokens_(max_tokens) {}

std::string RemoteQueryGenerator::make_query(const std::string& evidence) {
    std::string prompt =
        "Write one question that the following passage answers.\nPassage:\n" + evidence +
        "\nQuestion:";
    nlohmann::json body = {{"prompt", prompt}, {"max_tokens", max_tokens_}};
    nlohmann::json resp =
        parse_body(endpoint_->post_json("/v1/generate", body.dump()), "/v1/generate");
    if (!resp.is_object() || !resp.contains("text") || !resp["text"].is_string()) {
        throw OracleFailure("/v1/generate response lacks text");
    }
    return resp["text"].get<std::string>();
}

}  // namespace evex
