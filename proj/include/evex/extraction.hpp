#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evex/document.hpp"
#include "evex/oracle.hpp"
#include "evex/prefix_trie.hpp"

namespace evex {

enum class DecodeMode {
    Deterministic,  // expand every trie-allowed token, exact top-k at the end
    Stochastic,     // sample up to k continuations per step (seeded)
};

struct DecodeConfig {
    int k = 3;                        // passages to return
    int d = 256;                      // boundary-probe horizon, in continuation tokens
    int max_beta = 16;                // hard cap on prefix length
    DecodeMode mode = DecodeMode::Deterministic;
    std::uint64_t seed = 0;           // stochastic mode only
    int max_candidates_expanded = 64; // cap on frontier expansions
    int max_context_tokens = 0;       // 0 = no prompt budget; else truncate article tail

    void validate() const;
};

/// A sentence prefix decoded to the point where it pins down a document
/// position. `score` is the length-normalized sum of the per-token logprobs.
/// When several sentences stay textually indistinguishable (duplicates), the
/// earliest occurrence wins and the rest are recorded as alternates.
struct PrefixCandidate {
    std::vector<int> token_ids;
    std::vector<double> per_token_logprobs;
    double score = 0.0;
    int resolved_sentence = -1;
    std::vector<int> alternates;

    std::size_t beta() const { return token_ids.size(); }
};

/// A verbatim passage: whole sentences from `start_sentence` through
/// `end_sentence`, with char offsets into the source document.
struct EvidenceSpan {
    std::string doc_id;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    int start_sentence = -1;
    int end_sentence = -1;
    std::string text;
    double prefix_score = 0.0;
    double eos_logprob = 0.0;
    bool truncated = false;  // start sentence alone overran the probe horizon
};

struct ExtractionDiagnostics {
    std::uint64_t oracle_calls = 0;      // total calls during decode + probing
    int candidates_expanded = 0;         // frontier expansions performed
    std::vector<int> beta_per_candidate; // prefix length of each resolved candidate
    int sentences_considered = 0;
};

struct ExtractionResult {
    std::string doc_id;
    std::vector<EvidenceSpan> spans;  // descending by prefix_score
    ExtractionDiagnostics diagnostics;
};

/// Decodes sentence-prefix candidates by walking the trie from the root,
/// scoring each step with one oracle call over the node's allowed tokens.
/// A path resolves as soon as it identifies a unique sentence, when a
/// matched sentence's full token sequence ends on it, or when max_beta or
/// the expansion cap forces the earliest occurrence. Returns the top-k
/// candidates ordered by (score desc, sentence asc).
std::vector<PrefixCandidate> decode_prefix_candidates(const PrefixTrie& trie, Oracle& oracle,
                                                      const std::vector<int>& prompt_context,
                                                      const DecodeConfig& cfg,
                                                      ExtractionDiagnostics* diag = nullptr);

/// Extends one resolved prefix to a passage: probes p([eos]) at every
/// sentence boundary within d continuation tokens — one oracle call — and
/// ends the span at the most probable boundary (ties break earlier). A start
/// sentence that alone overruns d becomes a single-sentence span flagged
/// `truncated`.
EvidenceSpan skip_decode(const PrefixCandidate& cand, const SourceDocument& doc,
                         const SentenceMap& map, const TokenizedView& view, Oracle& oracle,
                         const std::vector<int>& prompt_context, const DecodeConfig& cfg);

/// Merges overlapping or sentence-adjacent spans (score = max over members,
/// text re-sliced from the document), then orders by (score desc, start asc)
/// and keeps at most k.
std::vector<EvidenceSpan> rank_and_merge(std::vector<EvidenceSpan> spans, int k,
                                         const SourceDocument& doc, const SentenceMap& map);

/// Full pipeline: prompt -> segmentation -> tokenization -> trie ->
/// prefix decoding -> boundary probing -> merge. Errors from any stage are
/// rethrown with the stage name prefixed.
ExtractionResult extract_evidence(const std::string& query, const SourceDocument& doc,
                                  Oracle& oracle, const DecodeConfig& cfg);

struct AblationResult {
    std::vector<PrefixCandidate> candidates;
    int unmatched_dropped = 0;
};

/// Unconstrained control for the trie ablation: plain beam search (width k,
/// fixed 8 tokens, [eos] excluded) over the whole vocabulary, then each beam
/// is matched back to the earliest sentence whose token sequence starts with
/// it (or a prefix of it reaching the sentence end). Beams matching nothing
/// are dropped and counted.
AblationResult ablation_unconstrained_prefix(const TokenizedView& view, Oracle& oracle,
                                             const std::vector<int>& prompt_context,
                                             const DecodeConfig& cfg);

/// Oracle calls a plain token-by-token decode of the same spans would have
/// issued: one call per generated token plus one for the final [eos].
std::uint64_t simulated_token_by_token_calls(const ExtractionResult& result,
                                             const TokenizedView& view);

}  // namespace evex
