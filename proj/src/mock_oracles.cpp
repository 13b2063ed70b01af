#include "evex/mock_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "evex/errors.hpp"
#include "evex/text.hpp"

namespace evex {

std::vector<int> IndexTokenSpace::encode(std::string_view) const {
    throw TokenizationMismatch("IndexTokenSpace cannot encode text");
}

std::string IndexTokenSpace::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == eos_id_) continue;
        out += piece(id);
    }
    return out;
}

std::string IndexTokenSpace::piece(int id) const {
    return "<" + std::to_string(id) + ">";
}

ScriptedOracle::ScriptedOracle(int vocab_size, int eos_id,
                               std::map<std::vector<int>, Distribution> table,
                               bool uniform_fallback,
                               std::shared_ptr<const TokenSpace> space)
    : table_(std::move(table)), uniform_fallback_(uniform_fallback), space_(std::move(space)) {
    if (!space_) {
        space_ = std::make_shared<IndexTokenSpace>(vocab_size, eos_id);
    }
}

double ScriptedOracle::lookup(const std::vector<int>& context, int token) const {
    auto it = table_.find(context);
    if (it == table_.end()) {
        if (uniform_fallback_) {
            return -std::log(static_cast<double>(space_->vocab_size()));
        }
        throw OracleFailure("scripted oracle has no entry for context of length " +
                            std::to_string(context.size()));
    }
    auto jt = it->second.find(token);
    if (jt == it->second.end()) {
        if (uniform_fallback_) {
            return -std::log(static_cast<double>(space_->vocab_size()));
        }
        throw OracleFailure("scripted entry lacks token " + std::to_string(token));
    }
    return jt->second;
}

OracleResponse ScriptedOracle::score_candidates(const OracleRequest& req) {
    OracleResponse resp;
    for (int id : *req.candidates) {
        resp.logprobs[id] = lookup(req.context, id);
    }
    return resp;
}

OracleResponse ScriptedOracle::probe_boundaries(const OracleRequest& req) {
    OracleResponse resp;
    int eos = space_->eos_id();
    for (std::size_t offset : *req.eos_offsets) {
        std::vector<int> ctx = req.context;
        if (req.continuation) {
            ctx.insert(ctx.end(), req.continuation->begin(),
                       req.continuation->begin() + static_cast<std::ptrdiff_t>(offset));
        }
        resp.eos_logprobs.push_back(lookup(ctx, eos));
    }
    return resp;
}

namespace {

struct ScriptedTable {
    int vocab_size = 0;
    int eos_id = 0;
    bool uniform_fallback = false;
    std::map<std::vector<int>, ScriptedOracle::Distribution> entries;
};

ScriptedTable load_scripted_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open oracle table: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    ScriptedTable table;
    table.vocab_size = j.value("vocab_size", 0);
    table.eos_id = j.value("eos_id", 0);
    table.uniform_fallback = j.value("uniform_fallback", false);
    for (const auto& entry : j.value("entries", nlohmann::json::array())) {
        std::vector<int> ctx = entry.at("context").get<std::vector<int>>();
        ScriptedOracle::Distribution dist;
        for (const auto& [key, value] : entry.at("logprobs").items()) {
            dist[std::stoi(key)] = value.get<double>();
        }
        table.entries.emplace(std::move(ctx), std::move(dist));
    }
    return table;
}

}  // namespace

ScriptedOracle ScriptedOracle::from_json_file(const std::string& path,
                                              std::shared_ptr<const TokenSpace> space) {
    ScriptedTable table = load_scripted_table(path);
    return ScriptedOracle(table.vocab_size, table.eos_id, std::move(table.entries),
                          table.uniform_fallback, std::move(space));
}

std::shared_ptr<ScriptedOracle> ScriptedOracle::shared_from_json_file(
    const std::string& path, std::shared_ptr<const TokenSpace> space) {
    ScriptedTable table = load_scripted_table(path);
    return std::make_shared<ScriptedOracle>(table.vocab_size, table.eos_id,
                                            std::move(table.entries), table.uniform_fallback,
                                            std::move(space));
}

RelevanceOracle::RelevanceOracle(const std::string& query, const SourceDocument& doc,
                                 RelevanceOracleConfig cfg)
    : cfg_(cfg) {
    prompt_ = build_prompt(query, doc.text());
    space_ = std::make_shared<WhitespaceTokenSpace>(std::vector<std::string>{prompt_.rendered});
    map_ = segment_sentences(doc);
    view_ = tokenize_sentences(doc, map_, *space_);
    prompt_ids_ = space_->encode(prompt_.rendered);

    int vocab = space_->vocab_size();
    unigram_.assign(static_cast<std::size_t>(vocab), 0.0);
    start_counts_.assign(static_cast<std::size_t>(vocab), 0.0);
    boosted_.assign(static_cast<std::size_t>(vocab), 0);
    query_overlap_.assign(static_cast<std::size_t>(vocab), 0);

    std::set<std::string> query_words;
    for (auto w : text::split_words(query)) {
        std::string norm = text::normalize_word(w);
        if (norm.size() >= 3 && !text::is_stopword(norm)) {
            query_words.insert(std::move(norm));
        }
    }
    for (int id = 1; id < vocab; ++id) {
        if (query_words.count(text::normalize_word(space_->piece(id)))) {
            query_overlap_[static_cast<std::size_t>(id)] = 1;
        }
    }

    for (const auto& sent : view_.sentences) {
        if (sent.token_ids.empty()) continue;
        start_counts_[static_cast<std::size_t>(sent.token_ids.front())] += 1.0;
        total_starts_ += 1.0;
        bool relevant = false;
        for (int id : sent.token_ids) {
            unigram_[static_cast<std::size_t>(id)] += 1.0;
            total_tokens_ += 1.0;
            if (query_overlap_[static_cast<std::size_t>(id)]) relevant = true;
        }
        for (std::size_t i = 0; i + 1 < sent.token_ids.size(); ++i) {
            bigram_[sent.token_ids[i]][sent.token_ids[i + 1]] += 1.0;
        }
        if (relevant) {
            for (int id : sent.token_ids) boosted_[static_cast<std::size_t>(id)] = 1;
        }
    }

    auto weight = [&](double count, int id) {
        double w = count + cfg_.laplace_alpha;
        if (boosted_[static_cast<std::size_t>(id)]) w *= cfg_.boost;
        return w;
    };
    for (int id = 1; id < vocab; ++id) {
        z_unigram_ += weight(unigram_[static_cast<std::size_t>(id)], id);
        z_start_ += weight(start_counts_[static_cast<std::size_t>(id)], id);
    }
}

std::span<const int> RelevanceOracle::generated_part(const std::vector<int>& context) const {
    if (context.size() >= prompt_ids_.size() &&
        std::equal(prompt_ids_.begin(), prompt_ids_.end(), context.begin())) {
        return std::span<const int>(context).subspan(prompt_ids_.size());
    }
    return std::span<const int>(context);
}

double RelevanceOracle::eos_probability(std::span<const int> generated) const {
    double overlap = 0;
    for (int id : generated) {
        if (id >= 0 && id < static_cast<int>(query_overlap_.size()) &&
            query_overlap_[static_cast<std::size_t>(id)]) {
            overlap += 1.0;
        }
    }
    double odds = cfg_.eos_base + cfg_.eos_gain * overlap;
    return odds / (1.0 + odds);
}

double RelevanceOracle::mix_probability(const std::vector<int>& context, int token) const {
    int vocab = space_->vocab_size();
    if (token <= 0 || token >= vocab) return 0.0;
    std::size_t t = static_cast<std::size_t>(token);

    double boost = boosted_[t] ? cfg_.boost : 1.0;
    double p_uni = z_unigram_ > 0 ? (unigram_[t] + cfg_.laplace_alpha) * boost / z_unigram_ : 0.0;

    std::span<const int> generated = generated_part(context);
    if (generated.empty()) {
        double p_start = z_start_ > 0 ? (start_counts_[t] + cfg_.laplace_alpha) * boost / z_start_ : 0.0;
        return cfg_.start_weight * p_start + (1.0 - cfg_.start_weight) * p_uni;
    }

    int prev = generated.back();
    auto row = bigram_.find(prev);
    if (row == bigram_.end()) {
        return p_uni;
    }
    double row_sum = 0;
    for (const auto& [_, c] : row->second) row_sum += c;
    auto cell = row->second.find(token);
    double p_big = cell == row->second.end() ? 0.0 : cell->second / row_sum;
    return cfg_.bigram_weight * p_big + (1.0 - cfg_.bigram_weight) * p_uni;
}

double RelevanceOracle::token_logprob(const std::vector<int>& context, int token) const {
    double p_eos = eos_probability(generated_part(context));
    if (token == space_->eos_id()) {
        return std::log(p_eos);
    }
    return std::log((1.0 - p_eos) * mix_probability(context, token));
}

OracleResponse RelevanceOracle::score_candidates(const OracleRequest& req) {
    OracleResponse resp;
    for (int id : *req.candidates) {
        resp.logprobs[id] = token_logprob(req.context, id);
    }
    return resp;
}

OracleResponse RelevanceOracle::probe_boundaries(const OracleRequest& req) {
    OracleResponse resp;
    for (std::size_t offset : *req.eos_offsets) {
        std::vector<int> ctx = req.context;
        if (req.continuation) {
            ctx.insert(ctx.end(), req.continuation->begin(),
                       req.continuation->begin() + static_cast<std::ptrdiff_t>(offset));
        }
        resp.eos_logprobs.push_back(std::log(eos_probability(generated_part(ctx))));
    }
    return resp;
}

}  // namespace evex
