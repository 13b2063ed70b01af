#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evex {

/// The token vocabulary contract an oracle exposes. Implementations must be
/// immutable after construction; all methods are safe for concurrent calls.
class TokenSpace {
public:
    virtual ~TokenSpace() = default;

    virtual int vocab_size() const = 0;
    virtual int eos_id() const = 0;

    virtual std::vector<int> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const int> ids) const = 0;

    // Decoded text of a single token, used for offset alignment.
    virtual std::string piece(int id) const = 0;
};

/// Whitespace-word tokenizer over a fixed vocabulary collected from seed
/// texts. Token id 0 is [eos]; words get ids in first-seen order. Encoding a
/// word outside the vocabulary is an error, so seed texts must cover every
/// string the pipeline will encode. Decoding joins words with single spaces,
/// which is exact for single-spaced text and lossy otherwise.
class WhitespaceTokenSpace : public TokenSpace {
public:
    explicit WhitespaceTokenSpace(const std::vector<std::string>& seed_texts);

    int vocab_size() const override { return static_cast<int>(words_.size()); }
    int eos_id() const override { return 0; }

    std::vector<int> encode(std::string_view text) const override;
    std::string decode(std::span<const int> ids) const override;
    std::string piece(int id) const override;

    bool contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }
    int id_of(std::string_view word) const;

private:
    std::vector<std::string> words_;       // id -> word; index 0 is [eos]
    std::map<std::string, int> ids_;       // word -> id
};

}  // namespace evex
