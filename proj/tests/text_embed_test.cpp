#include <gtest/gtest.h>

#include <cmath>

#include "hilayout/error.hpp"
#include "hilayout/text_embed.hpp"

using namespace hilayout;

TEST(Tokenize, LowercasesAndSplits) {
    EXPECT_EQ(tokenize("A Wooden-Bed, 2 pillows!"), (std::vector<std::string>{"a", "wooden", "bed", "2", "pillows"}));
    EXPECT_TRUE(tokenize("  ,;  ").empty());
}

TEST(HashEmbed, EmptyTextIsZero) {
    const auto v = hash_embed("");
    EXPECT_EQ(norm(v), 0.0);
    EXPECT_EQ(norm(hash_embed("-- !!")), 0.0);
}

TEST(HashEmbed, UnitNormDeterministicAndOrderFree) {
    for (const char* s : {"bed", "a large double bed", "nightstand", "tv stand facing the sofa", "naïve chair"}) {
        const auto v = hash_embed(s);
        EXPECT_NEAR(norm(v), 1.0, 1e-12) << s;
        EXPECT_EQ(v, hash_embed(s));
    }
    EXPECT_EQ(hash_embed("oak desk"), hash_embed("Desk, OAK"));
}

TEST(HashEmbed, SharedTokensAreCloser) {
    const auto a = hash_embed("wooden study desk");
    const auto b = hash_embed("study desk");
    const auto c = hash_embed("floor lamp");
    EXPECT_GT(cosine(a, b), cosine(a, c));
}

TEST(Cosine, ZeroVectorGivesZero) {
    EXPECT_EQ(cosine(hash_embed(""), hash_embed("bed")), 0.0);
    EXPECT_NEAR(cosine(hash_embed("bed"), hash_embed("bed")), 1.0, 1e-12);
}

TEST(TextEmbedder, ExternalTableOverridesHash) {
    const auto e = TextEmbedder::from_table_text("\"bed\" 3 4\n\n\"a \\\"quoted\\\" lamp\" 0 2\n");
    EXPECT_EQ(e.table_size(), 2u);
    EXPECT_EQ(e.table_dim(), 2u);
    const auto v = e.embed("bed");
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
    EXPECT_DOUBLE_EQ(v[2], 0.0);
    EXPECT_DOUBLE_EQ(e.embed("a \"quoted\" lamp")[1], 1.0);
    EXPECT_EQ(e.embed("sofa"), hash_embed("sofa"));
}

TEST(TextEmbedder, WideRowsAreTruncated) {
    std::string line = "\"x\"";
    for (int i = 0; i < 100; ++i) line += i < 64 ? " 0" : " 1";
    line.replace(4, 1, "1");  // first component
    const auto e = TextEmbedder::from_table_text(line);
    EXPECT_EQ(e.table_dim(), 100u);
    EXPECT_DOUBLE_EQ(e.embed("x")[0], 1.0);
}

TEST(TextEmbedder, EmptyTableFallsBackToHash) {
    const auto e = TextEmbedder::from_table_text("");
    EXPECT_EQ(e.table_size(), 0u);
    EXPECT_EQ(e.embed("chair"), hash_embed("chair"));
}

TEST(TextEmbedder, MalformedTablesThrow) {
    EXPECT_THROW(TextEmbedder::from_table_text("\"a\" 1 2\n\"b\" 1\n"), FormatError);
    EXPECT_THROW(TextEmbedder::from_table_text("a 1 2\n"), FormatError);
    EXPECT_THROW(TextEmbedder::from_table_text("\"a\" 1 x\n"), FormatError);
    EXPECT_THROW(TextEmbedder::from_table_text("\"a\"\n"), FormatError);
    EXPECT_THROW(TextEmbedder::load_external("/nonexistent/table.txt"), IoError);
}
