#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "evex/token_space.hpp"

namespace evex {

/// One scoring request against the language-model oracle.
///
/// `context` is the rendered prompt plus any generated tokens. Requests come
/// in two shapes: candidate scoring (`candidates` set) asking for next-token
/// logprobs, and boundary probing (`continuation` + `eos_offsets` set) asking
/// for log p([eos]) after each offset of the continuation in one
/// teacher-forced evaluation.
struct OracleRequest {
    std::vector<int> context;
    std::optional<std::vector<int>> candidates;
    std::optional<std::vector<int>> continuation;
    std::optional<std::vector<std::size_t>> eos_offsets;  // strictly increasing, <= |continuation|
};

/// Natural-log probabilities, each <= 0. Over the full vocabulary the
/// exponentials sum to 1; a candidate subset carries just its own entries.
struct OracleResponse {
    std::map<int, double> logprobs;
    std::vector<double> eos_logprobs;
};

/// Token-logprob contract abstracting the language model and its hidden
/// states. Implementations must be deterministic in deterministic mode
/// (identical request, identical response) and tolerate concurrent requests.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual const TokenSpace& token_space() const = 0;

    OracleResponse next_logprobs(const OracleRequest& req);
    OracleResponse boundary_eos_logprobs(const OracleRequest& req);

    // Total scoring calls issued so far; the basis of call accounting.
    std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
    void reset_calls() { calls_.store(0, std::memory_order_relaxed); }

protected:
    virtual OracleResponse score_candidates(const OracleRequest& req) = 0;
    virtual OracleResponse probe_boundaries(const OracleRequest& req) = 0;

private:
    void validate_common(const OracleRequest& req) const;

    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace evex
