#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hilayout {

inline constexpr std::size_t kTextDim = 64;

using TextEmbedding = std::array<double, kTextDim>;

/// Lowercased alphanumeric tokens of text.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic stand-in for a frozen text encoder: signed feature hashing
/// of the bag of lowercase tokens into kTextDim buckets (one hash picks the
/// bucket, an independently seeded hash picks the sign), L2-normalized.
/// Empty text maps to the zero vector.
TextEmbedding hash_embed(std::string_view text);

double norm(const TextEmbedding& v);
double cosine(const TextEmbedding& a, const TextEmbedding& b);

/// Hash embedding with optional overrides loaded from an external table of
/// precomputed vectors (any dimension; adapted to kTextDim by truncation or
/// zero padding). Immutable after construction.
class TextEmbedder {
public:
    TextEmbedder() = default;

    /// Table format: one record per line, a quoted string followed by D
    /// whitespace-separated decimals. Throws FormatError on ragged rows.
    static TextEmbedder load_external(const std::string& path);
    static TextEmbedder from_table_text(const std::string& text);

    TextEmbedding embed(std::string_view text) const;
    std::size_t table_size() const { return table_.size(); }
    std::size_t table_dim() const { return table_dim_; }

private:
    std::unordered_map<std::string, TextEmbedding> table_;
    std::size_t table_dim_ = 0;
};

}  // namespace hilayout
