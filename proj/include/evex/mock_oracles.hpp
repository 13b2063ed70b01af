#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "evex/document.hpp"
#include "evex/oracle.hpp"

namespace evex {

/// Token space for scripted tests: ids are opaque integers with no text
/// behind them. encode() is unsupported; decode() renders "<id>" markers.
class IndexTokenSpace : public TokenSpace {
public:
    IndexTokenSpace(int vocab_size, int eos_id) : vocab_size_(vocab_size), eos_id_(eos_id) {}

    int vocab_size() const override { return vocab_size_; }
    int eos_id() const override { return eos_id_; }
    std::vector<int> encode(std::string_view) const override;
    std::string decode(std::span<const int> ids) const override;
    std::string piece(int id) const override;

private:
    int vocab_size_;
    int eos_id_;
};

/// Oracle backed by an explicit context -> distribution table. Lookups are
/// exact; a missing context is an error unless uniform fallback is on.
class ScriptedOracle : public Oracle {
public:
    using Distribution = std::map<int, double>;  // token id -> natural logprob

    ScriptedOracle(int vocab_size, int eos_id,
                   std::map<std::vector<int>, Distribution> table,
                   bool uniform_fallback = false,
                   std::shared_ptr<const TokenSpace> space = nullptr);

    const TokenSpace& token_space() const override { return *space_; }

    static ScriptedOracle from_json_file(const std::string& path,
                                         std::shared_ptr<const TokenSpace> space = nullptr);
    static std::shared_ptr<ScriptedOracle> shared_from_json_file(
        const std::string& path, std::shared_ptr<const TokenSpace> space = nullptr);

protected:
    OracleResponse score_candidates(const OracleRequest& req) override;
    OracleResponse probe_boundaries(const OracleRequest& req) override;

private:
    double lookup(const std::vector<int>& context, int token) const;

    std::map<std::vector<int>, Distribution> table_;
    bool uniform_fallback_;
    std::shared_ptr<const TokenSpace> space_;
};

struct RelevanceOracleConfig {
    double laplace_alpha = 1.0;   // additive smoothing over the vocabulary
    double boost = 8.0;           // multiplier for tokens of query-relevant sentences
    double start_weight = 0.6;    // sentence-start model share at the generation start
    double bigram_weight = 0.7;   // in-document continuation share after the first token
    double eos_base = 0.01;       // floor of the [eos] odds
    double eos_gain = 0.5;        // [eos] odds added per query-overlapping generated token
};

/// Deterministic relevance model over one (query, document) pair.
///
/// Next-token mass interpolates a Laplace-smoothed unigram model of the
/// document (boosted for tokens of sentences that share a content word with
/// the query) with a sentence-start model at the generation start and an
/// in-sentence bigram model after it. The [eos] probability grows with the
/// accumulated query overlap of the generated span, squashed to (0,1), so
/// spans covering the query-relevant region terminate preferentially.
class RelevanceOracle : public Oracle {
public:
    RelevanceOracle(const std::string& query, const SourceDocument& doc,
                    RelevanceOracleConfig cfg = {});

    const TokenSpace& token_space() const override { return *space_; }
    const std::vector<int>& prompt_ids() const { return prompt_ids_; }
    const SentenceMap& sentence_map() const { return map_; }
    const TokenizedView& tokenized_view() const { return view_; }
    const PromptEnvelope& prompt() const { return prompt_; }

    // Probability of [eos] given the generated tokens so far; pure.
    double eos_probability(std::span<const int> generated) const;

protected:
    OracleResponse score_candidates(const OracleRequest& req) override;
    OracleResponse probe_boundaries(const OracleRequest& req) override;

private:
    // Tokens generated beyond the prompt; the whole context when it does not
    // extend this oracle's own prompt.
    std::span<const int> generated_part(const std::vector<int>& context) const;
    double token_logprob(const std::vector<int>& context, int token) const;
    double mix_probability(const std::vector<int>& context, int token) const;

    RelevanceOracleConfig cfg_;
    std::shared_ptr<WhitespaceTokenSpace> space_;
    PromptEnvelope prompt_;
    SentenceMap map_;
    TokenizedView view_;
    std::vector<int> prompt_ids_;

    std::vector<double> unigram_;          // per token id, document counts
    std::vector<double> start_counts_;     // per token id, sentence-initial counts
    std::map<int, std::map<int, double>> bigram_;
    std::vector<char> boosted_;            // per token id
    std::vector<char> query_overlap_;      // per token id: normalized form is a query content word
    double total_tokens_ = 0;
    double total_starts_ = 0;
    double z_unigram_ = 0;                 // sum of boosted smoothed unigram weights
    double z_start_ = 0;
};

}  // namespace evex
