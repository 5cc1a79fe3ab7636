#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchinpaint/nn.hpp"

namespace sketchinpaint {

struct TextEmbedderConfig {
    std::uint64_t vocab_seed = 0x5eed7e47ULL;
    int embed_dim = 32;
    int max_tokens = 8;
};

// Frozen stand-in for a caption encoder: each lower-cased whitespace token maps to a
// hash-seeded Gaussian vector, plus a hash-seeded positional vector per row. Rows past
// the caption are filled with the "<pad>" token. The output is always
// (1, 1, max_tokens, embed_dim).
class TextEmbedder {
public:
    TextEmbedder() = default;
    TextEmbedder(const TextEmbedderConfig& config, ParameterSet& params, Rng& rng);

    Grid encode(const std::string& caption) const;
    const Grid& null_embedding() const { return null_.value(); }
    const TextEmbedderConfig& config() const { return config_; }

    // At most max_tokens tokens; longer captions are truncated.
    std::vector<std::string> tokenize(const std::string& caption) const;

private:
    std::vector<double> token_vector(const std::string& token) const;

    TextEmbedderConfig config_;
    ag::Var null_;
};

}  // namespace sketchinpaint
