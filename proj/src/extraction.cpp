#include "evex/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <tuple>
#include <utility>

#include "evex/errors.hpp"

namespace evex {

namespace {

constexpr int kAblationSequenceLength = 8;

// One in-flight trie path with its running scores.
struct Partial {
    PrefixTrie::Path path;
    std::vector<double> logprobs;
    double sum = 0.0;
};

std::vector<int> with_path(const std::vector<int>& prompt_context, const PrefixTrie::Path& path) {
    std::vector<int> ctx = prompt_context;
    ctx.insert(ctx.end(), path.token_ids.begin(), path.token_ids.end());
    return ctx;
}

double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Samples up to `take` distinct tokens from the top-k pool, weighted by the
// renormalized probabilities. Returned ascending by token id.
std::vector<int> sample_top_k(const std::map<int, double>& logprobs, int take,
                              std::mt19937_64& rng) {
    std::vector<std::pair<int, double>> pool(logprobs.begin(), logprobs.end());
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (pool.size() > static_cast<std::size_t>(take)) pool.resize(static_cast<std::size_t>(take));

    double top = pool.front().second;
    std::vector<double> weights;
    weights.reserve(pool.size());
    for (const auto& [_, lp] : pool) weights.push_back(std::exp(lp - top));

    std::vector<int> chosen;
    std::vector<bool> used(pool.size(), false);
    for (std::size_t round = 0; round < pool.size(); ++round) {
        double total = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!used[i]) total += weights[i];
        }
        double r = uniform_unit(rng) * total;
        std::size_t pick = 0;
        bool found = false;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            pick = i;
            found = true;
            if (r < weights[i]) break;
            r -= weights[i];
        }
        if (!found) break;
        used[pick] = true;
        chosen.push_back(pool[pick].first);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<int> drop_front(const std::vector<int>& sorted, int value) {
    std::vector<int> rest;
    rest.reserve(sorted.size());
    for (int v : sorted) {
        if (v != value) rest.push_back(v);
    }
    return rest;
}

}  // namespace

void DecodeConfig::validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (d < 1) throw ConfigError("d must be >= 1");
    if (max_beta < 1) throw ConfigError("max_beta must be >= 1");
    if (max_candidates_expanded < 1) throw ConfigError("max_candidates_expanded must be >= 1");
    if (max_context_tokens < 0) throw ConfigError("max_context_tokens must be >= 0");
}

std::vector<PrefixCandidate> decode_prefix_candidates(const PrefixTrie& trie, Oracle& oracle,
                                                      const std::vector<int>& prompt_context,
                                                      const DecodeConfig& cfg,
                                                      ExtractionDiagnostics* diag) {
    cfg.validate();
    if (trie.root().children.empty()) throw NoCandidates();

    std::mt19937_64 rng(cfg.seed);
    std::vector<PrefixCandidate> resolved;
    int expansions = 0;

    auto emit = [&](const Partial& p, int sentence, std::vector<int> alternates) {
        PrefixCandidate c;
        c.token_ids = p.path.token_ids;
        c.per_token_logprobs = p.logprobs;
        c.score = p.sum / static_cast<double>(p.logprobs.size());
        c.resolved_sentence = sentence;
        c.alternates = std::move(alternates);
        if (diag) diag->beta_per_candidate.push_back(static_cast<int>(c.beta()));
        resolved.push_back(std::move(c));
    };

    // Resolution, applied when `p` cannot (or may not) be expanded further:
    // the earliest still-open sentence wins and the rest become alternates.
    // Sentences that ended on this node were already emitted on arrival.
    auto emit_forced = [&](const Partial& p) {
        const auto& node = trie.node(p.path.node);
        std::vector<int> open;
        std::set_difference(node.matched_sentences.begin(), node.matched_sentences.end(),
                            node.ended_sentences.begin(), node.ended_sentences.end(),
                            std::back_inserter(open));
        if (open.empty()) return;
        int chosen = open.front();
        emit(p, chosen, drop_front(open, chosen));
    };

    std::vector<Partial> frontier;
    frontier.push_back(Partial{trie.root_path(), {}, 0.0});

    while (!frontier.empty()) {
        std::vector<Partial> next;
        for (Partial& p : frontier) {
            if (expansions >= cfg.max_candidates_expanded) {
                emit_forced(p);
                continue;
            }
            std::vector<int> allowed = trie.allowed_tokens(p.path);
            OracleRequest req;
            req.context = with_path(prompt_context, p.path);
            req.candidates = allowed;
            OracleResponse resp = oracle.next_logprobs(req);
            ++expansions;

            std::vector<int> chosen = cfg.mode == DecodeMode::Deterministic
                                          ? allowed
                                          : sample_top_k(resp.logprobs, cfg.k, rng);
            for (int token : chosen) {
                PrefixTrie::Path child_path = trie.extend(p.path, token);
                double lp = resp.logprobs.at(token);
                Partial q;
                q.path = std::move(child_path);
                q.logprobs = p.logprobs;
                q.logprobs.push_back(lp);
                q.sum = p.sum + lp;

                const auto& node = trie.node(q.path.node);
                const auto& matched = node.matched_sentences;
                if (matched.size() == 1) {
                    emit(q, matched.front(), {});
                    continue;
                }
                if (!node.ended_sentences.empty()) {
                    // This exact prefix IS a full sentence somewhere; report
                    // its earliest occurrence now, keep walking for the rest.
                    emit(q, node.ended_sentences.front(),
                         drop_front(node.ended_sentences, node.ended_sentences.front()));
                }
                bool open_left = matched.size() > node.ended_sentences.size();
                if (!open_left) continue;
                bool can_continue = !node.children.empty() &&
                                    q.path.depth() < static_cast<std::size_t>(cfg.max_beta);
                if (can_continue) {
                    next.push_back(std::move(q));
                } else {
                    emit_forced(q);
                }
            }
        }
        frontier = std::move(next);
    }

    if (diag) diag->candidates_expanded += expansions;

    std::sort(resolved.begin(), resolved.end(), [](const PrefixCandidate& a, const PrefixCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.resolved_sentence < b.resolved_sentence;
    });
    if (resolved.size() > static_cast<std::size_t>(cfg.k)) {
        resolved.resize(static_cast<std::size_t>(cfg.k));
    }
    return resolved;
}

EvidenceSpan skip_decode(const PrefixCandidate& cand, const SourceDocument& doc,
                         const SentenceMap& map, const TokenizedView& view, Oracle& oracle,
                         const std::vector<int>& prompt_context, const DecodeConfig& cfg) {
    cfg.validate();
    if (cand.resolved_sentence < 0 ||
        static_cast<std::size_t>(cand.resolved_sentence) >= view.size()) {
        throw InvalidRequest("candidate resolves outside the sentence map");
    }
    const int start = cand.resolved_sentence;
    const auto& start_tokens = view.at(start).token_ids;
    const std::size_t beta = std::min(cand.token_ids.size(), start_tokens.size());
    const std::size_t rem0 = start_tokens.size() - beta;
    const std::size_t horizon = static_cast<std::size_t>(cfg.d);

    std::vector<int> continuation(start_tokens.begin() + static_cast<std::ptrdiff_t>(beta),
                                  start_tokens.end());
    std::vector<std::size_t> offsets;
    std::vector<int> boundary_sentence;
    bool truncated = false;

    if (rem0 <= horizon) {
        offsets.push_back(rem0);
        boundary_sentence.push_back(start);
        std::size_t total = rem0;
        for (int s = start + 1; static_cast<std::size_t>(s) < view.size(); ++s) {
            const auto& ids = view.at(s).token_ids;
            if (total + ids.size() > horizon) break;
            continuation.insert(continuation.end(), ids.begin(), ids.end());
            total += ids.size();
            offsets.push_back(total);
            boundary_sentence.push_back(s);
        }
    } else {
        // The start sentence alone overruns the probe horizon: keep it whole,
        // flag the overrun, and still close it with a single probe.
        truncated = true;
        offsets.push_back(rem0);
        boundary_sentence.push_back(start);
    }

    OracleRequest req;
    req.context = prompt_context;
    req.context.insert(req.context.end(), cand.token_ids.begin(), cand.token_ids.end());
    req.continuation = std::move(continuation);
    req.eos_offsets = offsets;
    OracleResponse resp = oracle.boundary_eos_logprobs(req);

    std::size_t best = 0;
    for (std::size_t i = 1; i < resp.eos_logprobs.size(); ++i) {
        if (resp.eos_logprobs[i] > resp.eos_logprobs[best]) best = i;
    }
    const int end = boundary_sentence[best];

    EvidenceSpan span;
    span.doc_id = doc.doc_id();
    span.char_start = map.at(start).char_start;
    span.char_end = map.at(end).char_end;
    span.start_sentence = start;
    span.end_sentence = end;
    span.text = std::string(doc.slice(span.char_start, span.char_end));
    span.prefix_score = cand.score;
    span.eos_logprob = resp.eos_logprobs[best];
    span.truncated = truncated;
    return span;
}

std::vector<EvidenceSpan> rank_and_merge(std::vector<EvidenceSpan> spans, int k,
                                         const SourceDocument& doc, const SentenceMap& map) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (spans.empty()) return spans;

    std::sort(spans.begin(), spans.end(), [](const EvidenceSpan& a, const EvidenceSpan& b) {
        if (a.start_sentence != b.start_sentence) return a.start_sentence < b.start_sentence;
        return a.end_sentence > b.end_sentence;
    });

    std::vector<EvidenceSpan> merged;
    for (EvidenceSpan& span : spans) {
        if (!merged.empty() && span.start_sentence <= merged.back().end_sentence + 1) {
            EvidenceSpan& acc = merged.back();
            acc.end_sentence = std::max(acc.end_sentence, span.end_sentence);
            if (span.prefix_score > acc.prefix_score) {
                acc.prefix_score = span.prefix_score;
                acc.eos_logprob = span.eos_logprob;
            }
            acc.truncated = acc.truncated || span.truncated;
        } else {
            merged.push_back(std::move(span));
        }
    }

    for (EvidenceSpan& span : merged) {
        span.char_start = map.at(span.start_sentence).char_start;
        span.char_end = map.at(span.end_sentence).char_end;
        span.text = std::string(doc.slice(span.char_start, span.char_end));
    }

    std::sort(merged.begin(), merged.end(), [](const EvidenceSpan& a, const EvidenceSpan& b) {
        if (a.prefix_score != b.prefix_score) return a.prefix_score > b.prefix_score;
        return a.start_sentence < b.start_sentence;
    });
    if (merged.size() > static_cast<std::size_t>(k)) merged.resize(static_cast<std::size_t>(k));
    return merged;
}

namespace {

// Longest sentence count m such that the prompt over the first m sentences
// fits the token budget. Throws if not even one sentence fits.
std::size_t fit_context(const std::string& query, const SourceDocument& doc,
                        const SentenceMap& map, const TokenSpace& space, int budget) {
    auto prompt_tokens = [&](std::size_t m) {
        std::string article(doc.slice(0, map.at(static_cast<int>(m) - 1).char_end));
        return space.encode(build_prompt(query, article).rendered).size();
    };
    if (prompt_tokens(1) > static_cast<std::size_t>(budget)) {
        throw ConfigError("max_context_tokens admits no sentence at all");
    }
    std::size_t lo = 1, hi = map.size();
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (prompt_tokens(mid) <= static_cast<std::size_t>(budget)) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

}  // namespace

ExtractionResult extract_evidence(const std::string& query, const SourceDocument& doc,
                                  Oracle& oracle, const DecodeConfig& cfg) {
    cfg.validate();
    const TokenSpace& space = oracle.token_space();

    auto staged = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const Error& err) {
            rethrow_with_stage(err, stage);
        }
    };

    PromptEnvelope prompt =
        staged("build_prompt", [&] { return build_prompt(query, doc.text()); });
    SentenceMap map = staged("segment", [&] { return segment_sentences(doc); });
    TokenizedView view =
        staged("tokenize", [&] { return tokenize_sentences(doc, map, space); });

    if (cfg.max_context_tokens > 0) {
        std::size_t keep = staged("truncate", [&] {
            return fit_context(query, doc, map, space, cfg.max_context_tokens);
        });
        if (keep < map.size()) {
            map.sentences.resize(keep);
            view.sentences.resize(keep);
            std::string article(doc.slice(0, map.at(static_cast<int>(keep) - 1).char_end));
            prompt = staged("build_prompt", [&] { return build_prompt(query, article); });
        }
    }

    std::vector<int> prompt_ids =
        staged("tokenize", [&] { return space.encode(prompt.rendered); });
    PrefixTrie trie = staged("index", [&] { return build_trie(view, cfg.max_beta); });

    ExtractionResult result;
    result.doc_id = doc.doc_id();
    result.diagnostics.sentences_considered = static_cast<int>(view.size());

    const std::uint64_t calls_before = oracle.calls();
    std::vector<PrefixCandidate> candidates = staged("decode", [&] {
        return decode_prefix_candidates(trie, oracle, prompt_ids, cfg, &result.diagnostics);
    });
    if (candidates.empty()) throw NoCandidates();

    std::vector<EvidenceSpan> spans;
    spans.reserve(candidates.size());
    for (const PrefixCandidate& cand : candidates) {
        spans.push_back(staged("skip", [&] {
            return skip_decode(cand, doc, map, view, oracle, prompt_ids, cfg);
        }));
    }
    result.spans =
        staged("merge", [&] { return rank_and_merge(std::move(spans), cfg.k, doc, map); });
    result.diagnostics.oracle_calls = oracle.calls() - calls_before;
    return result;
}

AblationResult ablation_unconstrained_prefix(const TokenizedView& view, Oracle& oracle,
                                             const std::vector<int>& prompt_context,
                                             const DecodeConfig& cfg) {
    cfg.validate();
    if (view.empty()) throw EmptyView();

    const TokenSpace& space = oracle.token_space();
    std::vector<int> vocabulary;
    vocabulary.reserve(static_cast<std::size_t>(space.vocab_size()));
    for (int id = 0; id < space.vocab_size(); ++id) {
        if (id != space.eos_id()) vocabulary.push_back(id);
    }

    struct Beam {
        std::vector<int> token_ids;
        std::vector<double> logprobs;
        double sum = 0.0;
    };
    std::vector<Beam> beams(1);

    for (int step = 0; step < kAblationSequenceLength; ++step) {
        // (cumulative sum, parent beam, token, token logprob)
        std::vector<std::tuple<double, std::size_t, int, double>> pool;
        for (std::size_t b = 0; b < beams.size(); ++b) {
            OracleRequest req;
            req.context = prompt_context;
            req.context.insert(req.context.end(), beams[b].token_ids.begin(),
                               beams[b].token_ids.end());
            req.candidates = vocabulary;
            OracleResponse resp = oracle.next_logprobs(req);
            for (const auto& [token, lp] : resp.logprobs) {
                pool.emplace_back(beams[b].sum + lp, b, token, lp);
            }
        }
        std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });
        std::size_t width = std::min(pool.size(), static_cast<std::size_t>(cfg.k));
        std::vector<Beam> grown;
        grown.reserve(width);
        for (std::size_t i = 0; i < width; ++i) {
            const auto& [sum, parent, token, lp] = pool[i];
            Beam next = beams[parent];
            next.token_ids.push_back(token);
            next.logprobs.push_back(lp);
            next.sum = sum;
            grown.push_back(std::move(next));
        }
        beams = std::move(grown);
    }

    AblationResult out;
    std::set<int> seen;
    for (const Beam& beam : beams) {
        int matched = -1;
        for (std::size_t s = 0; s < view.size(); ++s) {
            const auto& ids = view.at(static_cast<int>(s)).token_ids;
            std::size_t overlap = std::min(beam.token_ids.size(), ids.size());
            if (overlap == 0) continue;
            if (std::equal(beam.token_ids.begin(),
                           beam.token_ids.begin() + static_cast<std::ptrdiff_t>(overlap),
                           ids.begin())) {
                matched = static_cast<int>(s);
                break;
            }
        }
        if (matched < 0) {
            ++out.unmatched_dropped;
            continue;
        }
        if (!seen.insert(matched).second) continue;
        PrefixCandidate cand;
        cand.token_ids = beam.token_ids;
        cand.per_token_logprobs = beam.logprobs;
        cand.score = beam.sum / static_cast<double>(beam.logprobs.size());
        cand.resolved_sentence = matched;
        out.candidates.push_back(std::move(cand));
    }
    std::sort(out.candidates.begin(), out.candidates.end(),
              [](const PrefixCandidate& a, const PrefixCandidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.resolved_sentence < b.resolved_sentence;
              });
    return out;
}

std::uint64_t simulated_token_by_token_calls(const ExtractionResult& result,
                                             const TokenizedView& view) {
    std::uint64_t calls = 0;
    for (const EvidenceSpan& span : result.spans) {
        for (int s = span.start_sentence; s <= span.end_sentence; ++s) {
            calls += view.at(s).token_ids.size();
        }
        calls += 1;  // the closing [eos] step
    }
    return calls;
}

}  // namespace evex
