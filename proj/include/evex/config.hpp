#pragma once

#include <string>

#include "evex/extraction.hpp"

namespace evex {

/// Everything a CLI run needs, resolved from defaults, then a config file,
/// then environment overrides (oracle endpoint and credential only), then
/// flags. Field names double as config-file keys.
struct RunConfig {
    std::string oracle = "mock:relevance";  // mock:relevance | mock:scripted | http(s) URL
    std::string scripted_table;             // table path for mock:scripted
    std::string bearer_token;               // EVEX_ORACLE_TOKEN only, never the file
    DecodeConfig decode;
    std::string pipeline = "cfic";
    std::string out;                        // empty = stdout
    int parallelism = 1;
    int max_words = 256;                    // sliding-window budget
    int top_n = 0;                          // 0 = decode.k
    bool lenient = false;                   // dataset loading
    int sft_min_sentences = 1;
    int sft_max_sentences = 6;
    int sft_per_doc = 4;

    void validate() const;  // ConfigError on any bad field
};

// Applies `key=value` lines ('#' comments, blank lines ignored) onto cfg.
// Unknown keys are rejected.
void apply_config_file(RunConfig& cfg, const std::string& path);

// EVEX_ORACLE_URL replaces the oracle selector; EVEX_ORACLE_TOKEN supplies
// the bearer credential.
void apply_env_overrides(RunConfig& cfg);

}  // namespace evex
