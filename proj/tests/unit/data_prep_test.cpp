#include <gtest/gtest.h>

#include "drbl/data_prep.hpp"
#include "drbl/embeddings.hpp"
#include "drbl/errors.hpp"
#include "scratch.hpp"

using namespace drbl;

namespace {

using Tokens = std::vector<std::string>;

Vocabulary vocab_of(const std::vector<std::pair<std::string, std::uint64_t>>& words) {
  Tokens t;
  std::vector<std::uint64_t> c;
  for (const auto& [w, n] : words) {
    t.push_back(w);
    c.push_back(n);
  }
  return Vocabulary::from_tokens(t, c);
}

// Misspelled sentences and their corrections.
const std::vector<std::pair<std::string, std::string>> kCorrections = {
    {"Froends ride in an open top vehicle together.", "Friends ride in an open top vehicle together."},
    {"A middle easten store.", "A middle eastern store."},
    {"A woman is looking at a phtographer", "A woman is looking at a photographer"},
    {"The mother and daughter are fighitn.", "The mother and daughter are fighting."},
    {"Two kiled men hold bagpipes", "Two killed men hold bagpipes"},
    {"A woman escapes a from a hostile enviroment", "A woman escapes a from a hostile environment"},
    {"Two daschunds play with a red ball", "Two dachshunds play with a red ball"},
    {"A black dog is running through a marsh-like area.",
     "A black dog is running through a marsh like area."},
    {"a singer wearing a jacker performs on stage", "a singer wearing a jacket performs on stage"},
    {"There is a sculture", "There is a sculpture"},
    {"Taking a neverending break", "Taking a never ending break"},
    {"The woman has sounds emanting from her mouth.",
     "The woman has sounds emanating from her mouth."},
    {"the lady is shpping", "the lady is shopping"},
    {"A Bugatti and a Lambourgini compete in a road race.",
     "A Bugatti and a Lamborghini compete in a road race."},
};

}  // namespace

TEST(Tokenize, DetachesTerminalPunctuation) {
  EXPECT_EQ(tokenize("A man runs."), (Tokens{"_FOL_", "A", "man", "runs", ".", "_EOL_"}));
  EXPECT_EQ(tokenize("  Hi,   there!  "), (Tokens{"_FOL_", "Hi", ",", "there", "!", "_EOL_"}));
  EXPECT_EQ(tokenize("Wait..."), (Tokens{"_FOL_", "Wait", ".", ".", ".", "_EOL_"}));
  EXPECT_EQ(tokenize("U.S. troops"), (Tokens{"_FOL_", "U.S", ".", "troops", "_EOL_"}));
}

TEST(Tokenize, EmptyTextIsAContractError) {
  EXPECT_THROW(tokenize(""), ContractError);
  EXPECT_THROW(tokenize("   "), ContractError);
}

TEST(Tokenize, ParseLeavesAreTheTokens) {
  EXPECT_EQ(tokenize_parse("( ( A man ) ( ( is ( playing guitar ) ) . ) )"),
            (Tokens{"_FOL_", "A", "man", "is", "playing", "guitar", ".", "_EOL_"}));
}

TEST(Tokenize, LongPremiseHasAtLeastTenTokens) {
  const auto t = tokenize("A senior is waiting at the window of a restaurant that serves sandwiches.");
  EXPECT_GE(t.size() - 2, 10u);
  EXPECT_EQ(t.front(), kFirstMarker);
  EXPECT_EQ(t.back(), kLastMarker);
}

TEST(LoadSnli, DropsNoConsensusRecords) {
  SnliLoadStats stats;
  const auto pairs = load_snli(test_data("three_records.jsonl"), &stats);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(stats.records, 4u);
  EXPECT_EQ(stats.dropped_no_consensus, 1u);
  EXPECT_EQ(pairs[0].label, Label::entailment);
  EXPECT_EQ(pairs[1].label, Label::contradiction);
  EXPECT_EQ(pairs[2].label, Label::neutral);
  EXPECT_EQ(pairs[0].id, "r1");
  for (const auto& p : pairs) {
    EXPECT_EQ(p.premise.front(), kFirstMarker);
    EXPECT_EQ(p.hypothesis.back(), kLastMarker);
  }
  // First record carries parses, the others fall back to whitespace.
  EXPECT_EQ(pairs[0].premise, tokenize_parse("( ( A man ) ( runs . ) )"));
  EXPECT_EQ(pairs[1].hypothesis, tokenize("Kids sleep indoors."));
}

TEST(LoadSnli, MalformedRecordReportsLine) {
  const std::string text =
      R"({"gold_label": "neutral", "sentence1": "a b", "sentence2": "c"})"
      "\n\n"
      R"({"gold_label": "neutral", "sentence1": "a b")"
      "\n";
  try {
    parse_snli(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_snli(R"({"gold_label": "neutral", "sentence1": "a"})"), ParseError);
}

TEST(LoadSnli, UnknownLabelIsADataError) {
  EXPECT_THROW(parse_snli(R"({"gold_label": "maybe", "sentence1": "a", "sentence2": "b"})"),
               DataError);
}

TEST(LoadSnli, ToyCorpusIsBalancedAndComplete) {
  const auto pairs = load_snli(test_data("toy_snli.jsonl"));
  ASSERT_EQ(pairs.size(), 64u);
  std::array<int, 3> counts{};
  for (const auto& p : pairs) ++counts[label_index(p.label)];
  EXPECT_EQ(counts[0] + counts[1] + counts[2], 64);
  EXPECT_GT(counts[0], 15);
  EXPECT_GT(counts[1], 15);
  EXPECT_GT(counts[2], 15);
}

TEST(Tokenized, TsvRoundTrip) {
  ScratchDir dir;
  const auto pairs = load_snli(test_data("three_records.jsonl"));
  write_tokenized(dir / "pairs.tsv", pairs);
  const auto first_line = slurp(dir / "pairs.tsv").substr(0, slurp(dir / "pairs.tsv").find('\n'));
  EXPECT_EQ(first_line, "r1\tentailment\t_FOL_ A man runs . _EOL_\t_FOL_ A person moves . _EOL_");
  const auto back = load_pairs(dir / "pairs.tsv");
  ASSERT_EQ(back.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(back[i].id, pairs[i].id);
    EXPECT_EQ(back[i].label, pairs[i].label);
    EXPECT_EQ(back[i].premise, pairs[i].premise);
    EXPECT_EQ(back[i].hypothesis, pairs[i].hypothesis);
  }
}

TEST(EditDistance, UnrestrictedTranspositions) {
  EXPECT_EQ(damerau_levenshtein("", "abc"), 3u);
  EXPECT_EQ(damerau_levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(damerau_levenshtein("ab", "ba"), 1u);
  EXPECT_EQ(damerau_levenshtein("ca", "abc"), 2u);
  EXPECT_EQ(damerau_levenshtein("daschunds", "dachshunds"), 2u);
  EXPECT_EQ(damerau_levenshtein("Froends", "friends"), 2u);
  EXPECT_EQ(damerau_levenshtein("Froends", "friends", true), 1u);
}

TEST(SpellCorrect, CommonMisspellings) {
  const auto v = vocab_of({{"sculpture", 3}, {"jacket", 5}, {"there", 9}, {"Friends", 2}});
  EXPECT_EQ(spell_correct("sculture", v), "sculpture");
  EXPECT_EQ(spell_correct("jacker", v), "jacket");
  EXPECT_EQ(spell_correct("Froends", v), "Friends");
  EXPECT_EQ(spell_correct("qqqqqq", v), std::nullopt);
}

TEST(SpellCorrect, RanksByFrequencyThenDistanceThenSpelling) {
  const auto v = vocab_of({{"cart", 1}, {"cast", 10}, {"cut", 10}, {"cab", 4}, {"bat", 4}});
  // cast (d=1, 10) and cut (d=1, 10): tie on frequency and distance, cast first.
  EXPECT_EQ(spell_correct("cat", v), "cast");
  const auto w = vocab_of({{"abcd", 7}, {"abcdx", 7}, {"ab", 2}});
  // abcd (d=2, 7) loses to abcdx (d=1, 7) despite spelling order.
  EXPECT_EQ(spell_correct("abcdxy", w), "abcdx");
  const auto x = vocab_of({{"carts", 50}, {"cat", 1}});
  // Frequency dominates distance.
  EXPECT_EQ(spell_correct("cas", x), "carts");
}

TEST(SpellCorrect, InVocabularyTokenViolatesThePrecondition) {
  const auto v = vocab_of({{"jacket", 5}});
  EXPECT_THROW(spell_correct("jacket", v), ContractError);
}

TEST(RecoverOov, LowercaseFirst) {
  const auto v = vocab_of({{"dog", 1}, {"Dot", 50}});
  EXPECT_EQ(recover_oov("Dog", v), (Tokens{"dog"}));
}

TEST(RecoverOov, HyphenAndUnSplits) {
  const auto v = vocab_of({{"marsh", 1}, {"like", 1}, {"un", 1}, {"loading", 1}});
  EXPECT_EQ(recover_oov("marsh-like", v), (Tokens{"marsh", "like"}));
  EXPECT_EQ(recover_oov("unloading", v), (Tokens{"un", "loading"}));
  EXPECT_EQ(recover_oov("Marsh-Like", v), (Tokens{"marsh", "like"}));
}

TEST(RecoverOov, FallsBackToUnknown) {
  const auto v = vocab_of({{"cat", 1}});
  EXPECT_EQ(recover_oov("zzzzzzzz", v), (Tokens{kUnknownToken}));
}

TEST(RecoverOov, RunTogetherWords) {
  const auto v = vocab_of({{"never", 3}, {"ending", 2}, {"taking", 1}});
  EXPECT_EQ(recover_oov("neverending", v), (Tokens{"never", "ending"}));
}

TEST(RecoverOov, MisspelledSentences) {
  std::vector<SentencePair> corrected;
  for (const auto& [orig, fixed] : kCorrections) corrected.push_back(make_pair(fixed, fixed));
  const Vocabulary v = Vocabulary::build(corrected);
  for (const auto& [orig, fixed] : kCorrections) {
    EXPECT_EQ(recover_sentence(tokenize(orig), v), tokenize(fixed)) << orig;
  }
}

TEST(RecoverOov, SentenceLevelIsIdempotentAndDeterministic) {
  const auto pairs = load_snli(test_data("toy_snli.jsonl"));
  const Vocabulary v = Vocabulary::build(pairs);
  const auto noisy = tokenize("Two Childern are swiming in a Lake-side pool unbeach.");
  const auto once = recover_sentence(noisy, v);
  EXPECT_EQ(once, recover_sentence(noisy, v));
  EXPECT_EQ(recover_sentence(once, v), once);
}

TEST(RecoverOov, ReducesUnknownsOnHeldOutText) {
  const auto train_pairs = load_snli(test_data("toy_snli.jsonl"));
  const Vocabulary v = Vocabulary::build(train_pairs);
  EXPECT_EQ(count_unknown(train_pairs, v), 0u);
  std::vector<SentencePair> held_out{
      make_pair("A Woman is reading a bok.", "A girl is climing a rock-wall."),
      make_pair("Three people are cookng dinner.", "A dog is asleep outside.")};
  std::vector<SentencePair> recovered = held_out;
  for (auto& p : recovered) {
    p.premise = recover_sentence(p.premise, v);
    p.hypothesis = recover_sentence(p.hypothesis, v);
  }
  EXPECT_LT(count_unknown(recovered, v), count_unknown(held_out, v));
}
