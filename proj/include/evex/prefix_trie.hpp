#pragma once

#include <string>
#include <variant>
#include <vector>

#include "evex/document.hpp"

namespace evex {

/// Token-level trie over sentence-start token sequences. Walking any root
/// path corresponds to a sentence prefix occurring in the document; a node
/// whose matched-sentence set has shrunk to one uniquely identifies a
/// position. Immutable after build; shared concurrent reads are safe.
class PrefixTrie {
public:
    struct Node {
        std::vector<std::pair<int, int>> children;  // token id -> node index, ascending by id
        std::vector<int> matched_sentences;          // ascending sentence indices
        std::vector<int> ended_sentences;            // sentences whose full token sequence ends here
        bool exhausted = false;  // shorthand for !ended_sentences.empty()
    };

    struct Path {
        std::vector<int> token_ids;
        int node = 0;  // index into the trie's node arena

        std::size_t depth() const { return token_ids.size(); }
    };

    struct Ambiguous {
        std::vector<int> matches;
    };
    using Resolution = std::variant<int, Ambiguous>;

    const Node& node(int index) const;
    const Node& root() const { return node(0); }
    std::size_t node_count() const { return nodes_.size(); }
    int max_depth() const { return max_depth_; }

    Path root_path() const { return Path{}; }
    // Walks one edge; InvalidPath if the token is not a child.
    Path extend(const Path& path, int token_id) const;

    std::vector<int> allowed_tokens(const Path& path) const;
    Resolution resolve_unique(const Path& path) const;

    // Adjacency dump for inspection.
    std::string debug_json() const;

    friend PrefixTrie build_trie(const TokenizedView& view, int max_depth);

private:
    std::vector<Node> nodes_;
    int max_depth_ = 0;
};

PrefixTrie build_trie(const TokenizedView& view, int max_depth);

}  // namespace evex
