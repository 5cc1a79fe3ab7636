#include "sketchinpaint/text_embedder.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace sketchinpaint {

TextEmbedder::TextEmbedder(const TextEmbedderConfig& config, ParameterSet& params, Rng& rng) : config_(config) {
    null_ = params.add("text.null_embedding", normal_grid({1, 1, config.max_tokens, config.embed_dim}, rng),
                       ParamGroup::frozen);
}

std::vector<std::string> TextEmbedder::tokenize(const std::string& caption) const {
    std::istringstream in(caption);
    std::vector<std::string> tokens;
    std::string token;
    while (in >> token && static_cast<int>(tokens.size()) < config_.max_tokens) {
        for (char& ch : token) {
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
        tokens.push_back(token);
    }
    return tokens;
}

std::vector<double> TextEmbedder::token_vector(const std::string& token) const {
    Rng rng(mix_seed(config_.vocab_seed, fnv1a(token)));
    std::vector<double> v(static_cast<std::size_t>(config_.embed_dim));
    for (double& x : v) {
        x = standard_normal(rng);
    }
    return v;
}

Grid TextEmbedder::encode(const std::string& caption) const {
    const auto tokens = tokenize(caption);
    if (tokens.empty()) {
        return null_.value();
    }
    Grid out(1, 1, config_.max_tokens, config_.embed_dim);
    for (int row = 0; row < config_.max_tokens; ++row) {
        const auto word = token_vector(row < static_cast<int>(tokens.size()) ? tokens[static_cast<std::size_t>(row)]
                                                                              : std::string("<pad>"));
        const auto position = token_vector("<pos:" + std::to_string(row) + ">");
        for (int d = 0; d < config_.embed_dim; ++d) {
            out.at(0, 0, row, d) = word[static_cast<std::size_t>(d)] + 0.1 * position[static_cast<std::size_t>(d)];
        }
    }
    return out;
}

}  // namespace sketchinpaint
