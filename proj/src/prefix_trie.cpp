#include "evex/prefix_trie.hpp"

#include <algorithm>

#include <json.hpp>

#include "evex/errors.hpp"

namespace evex {

namespace {

int find_child(const PrefixTrie::Node& node, int token_id) {
    auto it = std::lower_bound(node.children.begin(), node.children.end(), token_id,
                               [](const auto& edge, int id) { return edge.first < id; });
    if (it == node.children.end() || it->first != token_id) return -1;
    return it->second;
}

}  // namespace

const PrefixTrie::Node& PrefixTrie::node(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= nodes_.size()) {
        throw InvalidPath("trie node index out of range: " + std::to_string(index));
    }
    return nodes_[static_cast<std::size_t>(index)];
}

PrefixTrie::Path PrefixTrie::extend(const Path& path, int token_id) const {
    int child = find_child(node(path.node), token_id);
    if (child < 0) {
        throw InvalidPath("token " + std::to_string(token_id) + " is not a child at depth " +
                          std::to_string(path.depth()));
    }
    Path next = path;
    next.token_ids.push_back(token_id);
    next.node = child;
    return next;
}

std::vector<int> PrefixTrie::allowed_tokens(const Path& path) const {
    const Node& n = node(path.node);
    std::vector<int> out;
    out.reserve(n.children.size());
    for (const auto& [token, _] : n.children) out.push_back(token);
    return out;
}

PrefixTrie::Resolution PrefixTrie::resolve_unique(const Path& path) const {
    const Node& n = node(path.node);
    if (n.matched_sentences.size() == 1) {
        return n.matched_sentences.front();
    }
    return Ambiguous{n.matched_sentences};
}

PrefixTrie build_trie(const TokenizedView& view, int max_depth) {
    if (view.empty()) throw EmptyView();
    if (max_depth < 1) throw ConfigError("trie max_depth must be >= 1");

    PrefixTrie trie;
    trie.max_depth_ = max_depth;
    trie.nodes_.emplace_back();

    auto child_or_create = [&trie](int node_index, int token_id) {
        int found = find_child(trie.nodes_[static_cast<std::size_t>(node_index)], token_id);
        if (found >= 0) return found;
        int created = static_cast<int>(trie.nodes_.size());
        trie.nodes_.emplace_back();
        auto& children = trie.nodes_[static_cast<std::size_t>(node_index)].children;
        auto it = std::lower_bound(children.begin(), children.end(), token_id,
                                   [](const auto& edge, int id) { return edge.first < id; });
        children.insert(it, {token_id, created});
        return created;
    };

    for (const auto& sent : view.sentences) {
        if (sent.token_ids.empty()) continue;
        trie.nodes_[0].matched_sentences.push_back(sent.sentence_index);
        int at = 0;
        std::size_t walk = std::min(sent.token_ids.size(), static_cast<std::size_t>(max_depth));
        for (std::size_t i = 0; i < walk; ++i) {
            at = child_or_create(at, sent.token_ids[i]);
            trie.nodes_[static_cast<std::size_t>(at)].matched_sentences.push_back(
                sent.sentence_index);
        }
        if (sent.token_ids.size() <= static_cast<std::size_t>(max_depth)) {
            auto& end_node = trie.nodes_[static_cast<std::size_t>(at)];
            end_node.exhausted = true;
            end_node.ended_sentences.push_back(sent.sentence_index);
        }
    }

    for (auto& node : trie.nodes_) {
        std::sort(node.matched_sentences.begin(), node.matched_sentences.end());
        node.matched_sentences.erase(
            std::unique(node.matched_sentences.begin(), node.matched_sentences.end()),
            node.matched_sentences.end());
        std::sort(node.ended_sentences.begin(), node.ended_sentences.end());
    }
    if (trie.nodes_[0].children.empty()) {
        throw EmptyView("no sentence contributed tokens to the trie");
    }
    return trie;
}

std::string PrefixTrie::debug_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
        nlohmann::json edges = nlohmann::json::object();
        for (const auto& [token, child] : n.children) {
            edges[std::to_string(token)] = child;
        }
        nodes.push_back({{"children", edges},
                         {"matched_sentences", n.matched_sentences},
                         {"ended_sentences", n.ended_sentences},
                         {"exhausted", n.exhausted}});
    }
    return nlohmann::json{{"nodes", nodes}}.dump();
}

}  // namespace evex
