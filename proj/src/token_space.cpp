#include "evex/token_space.hpp"

#include "evex/errors.hpp"
#include "evex/text.hpp"

namespace evex {

WhitespaceTokenSpace::WhitespaceTokenSpace(const std::vector<std::string>& seed_texts) {
    words_.push_back("");  // [eos] decodes to nothing
    for (const auto& text : seed_texts) {
        for (auto word : text::split_words(text)) {
            std::string w(word);
            if (ids_.emplace(w, static_cast<int>(words_.size())).second) {
                words_.push_back(std::move(w));
            }
        }
    }
}

int WhitespaceTokenSpace::id_of(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    if (it == ids_.end()) {
        throw TokenizationMismatch("word not in token space: \"" + std::string(word) + "\"");
    }
    return it->second;
}

std::vector<int> WhitespaceTokenSpace::encode(std::string_view text) const {
    std::vector<int> out;
    for (auto word : text::split_words(text)) {
        out.push_back(id_of(word));
    }
    return out;
}

std::string WhitespaceTokenSpace::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == eos_id()) continue;
        if (id < 0 || id >= vocab_size()) {
            throw TokenizationMismatch("token id out of range: " + std::to_string(id));
        }
        if (!out.empty()) out.push_back(' ');
        out += words_[static_cast<std::size_t>(id)];
    }
    return out;
}

std::string WhitespaceTokenSpace::piece(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw TokenizationMismatch("token id out of range: " + std::to_string(id));
    }
    return words_[static_cast<std::size_t>(id)];
}

}  // namespace evex
