#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "evex/chunking.hpp"
#include "evex/eval.hpp"
#include "evex/oracle.hpp"
#include "evex/token_space.hpp"

namespace httplib {
class Client;
}

namespace evex {

struct RemoteConfig {
    std::string base_url;          // e.g. http://127.0.0.1:8700
    std::string bearer_token;      // optional Authorization: Bearer <token>
    int max_retries = 2;           // extra attempts on 5xx / connection failure
    int timeout_seconds = 30;
    int max_context_tokens = 0;    // 0 = defer to the server
};

/// Shared HTTP plumbing: one connection, JSON in/out, retry on transient
/// failures (connection errors and 5xx), single-flight via an internal lock.
/// 4xx responses are terminal and surface the server's {"error": ...}.
class RemoteEndpoint {
public:
    explicit RemoteEndpoint(RemoteConfig cfg);
    ~RemoteEndpoint();

    std::string post_json(const std::string& path, const std::string& body) const;
    std::string get(const std::string& path) const;

    const RemoteConfig& config() const { return cfg_; }

private:
    RemoteConfig cfg_;
    std::unique_ptr<httplib::Client> client_;
    mutable std::mutex lock_;
};

/// Tokenizer of the remote model: GET /v1/tokenizer for the vocabulary
/// shape, POST /v1/encode {"text"} -> {"ids"} and /v1/decode {"ids"} ->
/// {"text"} for the mappings.
class RemoteTokenSpace : public TokenSpace {
public:
    explicit RemoteTokenSpace(std::shared_ptr<RemoteEndpoint> endpoint);

    int vocab_size() const override { return vocab_size_; }
    int eos_id() const override { return eos_id_; }
    std::vector<int> encode(std::string_view text) const override;
    std::string decode(std::span<const int> ids) const override;
    std::string piece(int id) const override;

private:
    std::shared_ptr<RemoteEndpoint> endpoint_;
    int vocab_size_ = 0;
    int eos_id_ = 0;
};

/// Oracle speaking the wire protocol: POST /v1/logprobs with {"context",
/// "candidates" | null, "continuation" | null, "eos_offsets" | null},
/// response {"logprobs": {"<id>": lp}, "eos_logprobs": [lp...]}.
class RemoteOracle : public Oracle {
public:
    explicit RemoteOracle(std::shared_ptr<RemoteEndpoint> endpoint);

    const TokenSpace& token_space() const override { return *space_; }

protected:
    OracleResponse score_candidates(const OracleRequest& req) override;
    OracleResponse probe_boundaries(const OracleRequest& req) override;

private:
    OracleResponse round_trip(const OracleRequest& req, bool want_eos);

    std::shared_ptr<RemoteEndpoint> endpoint_;
    std::shared_ptr<RemoteTokenSpace> space_;
};

/// Chunk scorer using POST /v1/embed {"texts": [...]} -> {"vectors": [...]};
/// the query rides along as the first text, scores are cosine similarities.
class RemoteEmbeddingScorer : public ChunkScorer {
public:
    explicit RemoteEmbeddingScorer(std::shared_ptr<RemoteEndpoint> endpoint);

    std::vector<double> score(const std::string& query,
                              const std::vector<Chunk>& chunks) const override;

private:
    std::shared_ptr<RemoteEndpoint> endpoint_;
};

/// Generator using POST /v1/generate {"prompt", "max_tokens"} -> {"text"}.
class RemoteGenerator : public Generator {
public:
    explicit RemoteGenerator(std::shared_ptr<RemoteEndpoint> endpoint, int max_tokens = 256);

    std::string generate(const PromptEnvelope& prompt) override;

private:
    std::shared_ptr<RemoteEndpoint> endpoint_;
    int max_tokens_;
};

/// Query generator for SFT construction over the same /v1/generate endpoint.
class RemoteQueryGenerator : public QueryGenerator {
public:
    explicit RemoteQueryGenerator(std::shared_ptr<RemoteEndpoint> endpoint, int max_tokens = 64);

    std::string make_query(const std::string& evidence) override;

private:
    std::shared_ptr<RemoteEndpoint> endpoint_;
    int max_tokens_;
};

}  // namespace evex
