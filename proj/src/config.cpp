#include "evex/config.hpp"

#include <cstdlib>
#include <fstream>
#include <string_view>

#include "evex/errors.hpp"
#include "evex/eval.hpp"

namespace evex {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

int parse_int(const std::string& key, std::string_view value) {
    try {
        std::size_t used = 0;
        int parsed = std::stoi(std::string(value), &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not an integer: '" + std::string(value) + "'");
    }
}

std::uint64_t parse_seed(const std::string& key, std::string_view value) {
    try {
        std::size_t used = 0;
        std::uint64_t parsed = std::stoull(std::string(value), &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not an unsigned integer: '" +
                          std::string(value) + "'");
    }
}

bool parse_bool(const std::string& key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key " + key + ": expected true/false: '" + std::string(value) + "'");
}

DecodeMode parse_mode(std::string_view value) {
    if (value == "deterministic") return DecodeMode::Deterministic;
    if (value == "stochastic") return DecodeMode::Stochastic;
    throw ConfigError("mode must be deterministic or stochastic, got '" + std::string(value) +
                      "'");
}

}  // namespace

void RunConfig::validate() const {
    if (oracle != "mock:relevance" && oracle != "mock:scripted" &&
        oracle.rfind("http://", 0) != 0 && oracle.rfind("https://", 0) != 0) {
        throw ConfigError("oracle must be mock:relevance, mock:scripted or an http(s) URL, got '" +
                          oracle + "'");
    }
    decode.validate();
    parse_pipeline(pipeline);
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (max_words < 1) throw ConfigError("max_words must be >= 1");
    if (top_n < 0) throw ConfigError("top_n must be >= 0");
    if (sft_min_sentences < 1) throw ConfigError("sft_min_sentences must be >= 1");
    if (sft_max_sentences < sft_min_sentences) {
        throw ConfigError("sft_max_sentences must be >= sft_min_sentences");
    }
    if (sft_per_doc < 1) throw ConfigError("sft_per_doc must be >= 1");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + std::string(stripped) + "'");
        }
        std::string key(trim(stripped.substr(0, eq)));
        std::string_view value = trim(stripped.substr(eq + 1));

        if (key == "oracle") {
            cfg.oracle = std::string(value);
        } else if (key == "scripted_table") {
            cfg.scripted_table = std::string(value);
        } else if (key == "k") {
            cfg.decode.k = parse_int(key, value);
        } else if (key == "d") {
            cfg.decode.d = parse_int(key, value);
        } else if (key == "max_beta") {
            cfg.decode.max_beta = parse_int(key, value);
        } else if (key == "mode") {
            cfg.decode.mode = parse_mode(value);
        } else if (key == "seed") {
            cfg.decode.seed = parse_seed(key, value);
        } else if (key == "max_candidates_expanded") {
            cfg.decode.max_candidates_expanded = parse_int(key, value);
        } else if (key == "max_context_tokens") {
            cfg.decode.max_context_tokens = parse_int(key, value);
        } else if (key == "pipeline") {
            cfg.pipeline = std::string(value);
        } else if (key == "out") {
            cfg.out = std::string(value);
        } else if (key == "parallelism") {
            cfg.parallelism = parse_int(key, value);
        } else if (key == "max_words") {
            cfg.max_words = parse_int(key, value);
        } else if (key == "top_n") {
            cfg.top_n = parse_int(key, value);
        } else if (key == "lenient") {
            cfg.lenient = parse_bool(key, value);
        } else if (key == "sft_min_sentences") {
            cfg.sft_min_sentences = parse_int(key, value);
        } else if (key == "sft_max_sentences") {
            cfg.sft_max_sentences = parse_int(key, value);
        } else if (key == "sft_per_doc") {
            cfg.sft_per_doc = parse_int(key, value);
        } else {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown config key '" +
                              key + "'");
        }
    }
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* url = std::getenv("EVEX_ORACLE_URL"); url != nullptr && *url != '\0') {
        cfg.oracle = url;
    }
    if (const char* token = std::getenv("EVEX_ORACLE_TOKEN"); token != nullptr && *token != '\0') {
        cfg.bearer_token = token;
    }
}

}  // namespace evex
