#include "evex/oracle.hpp"

#include "evex/errors.hpp"

namespace evex {

void Oracle::validate_common(const OracleRequest& req) const {
    if (req.context.empty()) {
        throw InvalidRequest("oracle request has empty context");
    }
    int vocab = token_space().vocab_size();
    for (int id : req.context) {
        if (id < 0 || id >= vocab) {
            throw InvalidRequest("context token out of vocab: " + std::to_string(id));
        }
    }
}

OracleResponse Oracle::next_logprobs(const OracleRequest& req) {
    validate_common(req);
    if (!req.candidates || req.candidates->empty()) {
        throw InvalidRequest("next_logprobs requires a non-empty candidate set");
    }
    int vocab = token_space().vocab_size();
    for (int id : *req.candidates) {
        if (id < 0 || id >= vocab) {
            throw InvalidRequest("candidate token out of vocab: " + std::to_string(id));
        }
    }
    calls_.fetch_add(1, std::memory_order_relaxed);
    return score_candidates(req);
}

OracleResponse Oracle::boundary_eos_logprobs(const OracleRequest& req) {
    validate_common(req);
    if (!req.eos_offsets || req.eos_offsets->empty()) {
        throw InvalidRequest("boundary probe requires at least one offset");
    }
    std::size_t cont_len = req.continuation ? req.continuation->size() : 0;
    std::size_t prev = 0;
    bool first = true;
    for (std::size_t o : *req.eos_offsets) {
        if (!first && o <= prev) {
            throw InvalidRequest("eos offsets must be strictly increasing");
        }
        if (o > cont_len) {
            throw InvalidRequest("eos offset beyond continuation length");
        }
        prev = o;
        first = false;
    }
    calls_.fetch_add(1, std::memory_order_relaxed);
    return probe_boundaries(req);
}

}  // namespace evex
