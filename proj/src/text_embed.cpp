#include "hilayout/text_embed.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "hilayout/error.hpp"
#include "hilayout/hierarchy_io.hpp"

namespace hilayout {

namespace {

constexpr std::uint64_t kBucketSeed = 0x5eed0001a11ce5ULL;
constexpr std::uint64_t kSignSeed = 0x5eed0002b0b5a1ULL;

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // final avalanche so nearby seeds give unrelated streams
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

void normalize(TextEmbedding& v) {
    const double n = norm(v);
    if (n == 0.0) return;
    for (auto& x : v) x /= n;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (u >= 0x80) {
            cur.push_back(c);  // non-ASCII bytes are kept verbatim, no locale
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

TextEmbedding hash_embed(std::string_view text) {
    TextEmbedding v{};
    const auto tokens = tokenize(text);
    if (tokens.empty()) return v;
    for (const auto& t : tokens) {
        const auto bucket = fnv1a(t, kBucketSeed) % kTextDim;
        const double sign = (fnv1a(t, kSignSeed) >> 63) ? -1.0 : 1.0;
        v[bucket] += sign;
    }
    if (norm(v) == 0.0) {
        // Signed collisions cancelled out; fall back to unsigned counts so
        // non-empty text never maps to the zero vector.
        for (const auto& t : tokens) v[fnv1a(t, kBucketSeed) % kTextDim] += 1.0;
    }
    normalize(v);
    return v;
}

double norm(const TextEmbedding& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(const TextEmbedding& a, const TextEmbedding& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < kTextDim; ++i) d += a[i] * b[i];
    return d / (na * nb);
}

TextEmbedder TextEmbedder::load_external(const std::string& path) {
    return from_table_text(io::read_file(path));
}

TextEmbedder TextEmbedder::from_table_text(const std::string& text) {
    TextEmbedder e;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++lineno;
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i == line.size()) {
            if (end == text.size()) break;
            continue;
        }
        const std::string where = "embedding table line " + std::to_string(lineno);
        if (line[i] != '"') throw FormatError(where + ": expected a quoted string");
        std::string key;
        ++i;
        bool closed = false;
        while (i < line.size()) {
            const char c = line[i++];
            if (c == '\\' && i < line.size()) {
                key.push_back(line[i++]);
            } else if (c == '"') {
                closed = true;
                break;
            } else {
                key.push_back(c);
            }
        }
        if (!closed) throw FormatError(where + ": unterminated string");
        std::vector<double> values;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i == line.size()) break;
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + j, v);
            if (ec != std::errc() || ptr != line.data() + j) throw FormatError(where + ": bad number");
            values.push_back(v);
            i = j;
        }
        if (values.empty()) throw FormatError(where + ": no vector values");
        if (e.table_dim_ == 0) e.table_dim_ = values.size();
        if (values.size() != e.table_dim_) {
            throw FormatError(where + ": ragged row (" + std::to_string(values.size()) + " values, expected " +
                              std::to_string(e.table_dim_) + ")");
        }
        TextEmbedding v{};
        for (std::size_t k = 0; k < kTextDim && k < values.size(); ++k) v[k] = values[k];
        normalize(v);
        e.table_[key] = v;
        if (end == text.size()) break;
    }
    return e;
}

TextEmbedding TextEmbedder::embed(std::string_view text) const {
    if (!table_.empty()) {
        auto it = table_.find(std::string(text));
        if (it != table_.end()) return it->second;
    }
    return hash_embed(text);
}

}  // namespace hilayout
