#include "fairtext/corpus.h"

#include <gtest/gtest.h>

#include <random>

#include "fairtext/error.h"
#include "support/synthetic.h"

namespace fairtext {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, SplitsOnPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("I like this city!"), (Tokens{"i", "like", "this", "city"}));
}

TEST(Tokenize, EmptyInputGivesNoTokens) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, KeepsInnerApostrophes) {
  EXPECT_EQ(tokenize("Don't JUDGE me"), (Tokens{"don't", "judge", "me"}));
}

TEST(Tokenize, StripsQuotingApostrophes) {
  EXPECT_EQ(tokenize("the word 'headscarf' is"), (Tokens{"the", "word", "headscarf", "is"}));
}

TEST(Tokenize, FoldsCurlyApostrophe) {
  EXPECT_EQ(tokenize("Don’t"), (Tokens{"don't"}));
}

TEST(Tokenize, DigitsAndLettersFormOneRun) {
  EXPECT_EQ(tokenize("abc123 4you, 2024."), (Tokens{"abc123", "4you", "2024"}));
}

TEST(Tokenize, NonAsciiLettersStayInWords) {
  EXPECT_EQ(tokenize("Café NAÏVE—ok"), (Tokens{"café", "naïve", "ok"}));
}

TEST(Tokenize, MalformedUtf8DoesNotCrash) {
  const std::string bad = "ok \xC3";
  EXPECT_EQ(tokenize(bad).front(), "ok");
  const std::string truncated = "a\xE2\x82";
  EXPECT_NO_THROW(tokenize(truncated));
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcXYZ' .,!?'019\t";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    const Tokens once = tokenize(text);
    EXPECT_EQ(tokenize(join_tokens(once)), once) << text;
  }
}

TEST(Corpus, EmptyFileLoadsNoDocuments) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "");
  EXPECT_TRUE(load_corpus(dir / "c.jsonl").empty());
}

TEST(Corpus, LinesLoadInOrder) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl",
                   "{\"id\":\"a\",\"text\":\"First one\",\"label\":\"pos\"}\n"
                   "{\"text\":\"second\"}\n");
  const LabeledCorpus c = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.documents[0].id, "a");
  EXPECT_EQ(c.documents[0].tokens, (Tokens{"first", "one"}));
  EXPECT_EQ(c.documents[1].id, "1");
  EXPECT_FALSE(c.documents[1].label.has_value());
  EXPECT_EQ(c.classes, (std::set<std::string>{"pos"}));
  EXPECT_FALSE(c.fully_labeled());
}

TEST(Corpus, MissingTextNamesTheLine) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "{\"text\":\"ok\"}\n{\"label\":\"x\"}\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Corpus, MalformedJsonNamesTheLine) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "{\"text\":\"ok\"}\n\n{oops\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Corpus, UnsupportedLabelTypeIsRejected) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "{\"text\":\"ok\",\"label\":[1]}\n");
  EXPECT_THROW(load_corpus(dir / "c.jsonl"), ValidationError);
}

TEST(Corpus, IntegerLabelsBecomeStrings) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "{\"text\":\"ok\",\"label\":1}\n");
  EXPECT_EQ(load_corpus(dir / "c.jsonl").documents[0].label, "1");
}

TEST(Corpus, DuplicateIdsAreRejected) {
  test::TempDir dir;
  test::write_file(dir / "c.jsonl", "{\"id\":\"x\",\"text\":\"a\"}\n{\"id\":\"x\",\"text\":\"b\"}\n");
  EXPECT_THROW(load_corpus(dir / "c.jsonl"), ValidationError);
}

TEST(Corpus, RoundTripPreservesTextsLabelsAndOrder) {
  test::TempDir dir;
  LabeledCorpus c;
  c.documents.push_back(make_document("1", "I like \"this\" city!", "pos"));
  c.documents.push_back(make_document("2", "Don't JUDGE me\nplease", "neg"));
  c.documents.push_back(make_document("3", "unlabelled café"));
  refresh_classes(c);
  save_corpus(c, dir / "c.jsonl");
  const LabeledCorpus back = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.documents[i].id, c.documents[i].id);
    EXPECT_EQ(back.documents[i].text, c.documents[i].text);
    EXPECT_EQ(back.documents[i].label, c.documents[i].label);
    EXPECT_EQ(back.documents[i].tokens, c.documents[i].tokens);
  }
  EXPECT_EQ(back.classes, c.classes);
}

TEST(Corpus, EmptyRoundTrip) {
  test::TempDir dir;
  save_corpus(LabeledCorpus{}, dir / "c.jsonl");
  EXPECT_TRUE(load_corpus(dir / "c.jsonl").empty());
}

TEST(Corpus, UnwritablePathIsAnIoError) {
  EXPECT_THROW(save_corpus(LabeledCorpus{}, "/nonexistent-dir/x/c.jsonl"), IoError);
}

TEST(Corpus, FindLocatesIds) {
  LabeledCorpus c;
  c.documents.push_back(make_document("a", "x"));
  c.documents.push_back(make_document("b", "y"));
  EXPECT_EQ(c.find("b"), 1u);
  EXPECT_FALSE(c.find("z").has_value());
}

}  // namespace
}  // namespace fairtext
