#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "ticketsim/corpus.hpp"

using namespace ticketsim;
using testing_support::ticket;

namespace {

std::string line(const std::string& id, const std::string& extra = "") {
  return R"({"external_id":")" + id + R"(","title":"t )" + id + R"(","description":"d")" + extra + "}\n";
}

}  // namespace

TEST(QueryText, JoinsTitleAndDescriptionWithOneSpace) {
  EXPECT_EQ(query_text(ticket("A", "File Access", "Good morning...")), "File Access Good morning...");
  EXPECT_EQ(query_text(ticket("A", "", "x")), " x");
  EXPECT_EQ(query_text(ticket("A", "a", "")), "a ");
}

TEST(LoadTickets, ReadsEveryLine) {
  std::string text;
  for (int i = 0; i < 300; ++i) text += line("T" + std::to_string(i));
  std::istringstream in(text);
  const auto corpus = parse_tickets(in);
  EXPECT_EQ(corpus.size(), 300u);
  EXPECT_EQ(corpus.position("T17"), 17u);
}

TEST(LoadTickets, EmptyInputGivesEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(parse_tickets(in).empty());
}

TEST(LoadTickets, DuplicateIdNamesTheId) {
  std::istringstream in(line("ABC123456") + line("ABC123456"));
  try {
    parse_tickets(in);
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("ABC123456"), std::string::npos);
  }
}

TEST(LoadTickets, MalformedLineNamesTheLineNumber) {
  std::istringstream in(line("A") + "{not json\n");
  try {
    parse_tickets(in);
    FAIL() << "malformed line accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }
}

TEST(LoadTickets, MissingRequiredFieldIsRejected) {
  std::istringstream in(R"({"external_id":"A","title":"x"})" "\n");
  EXPECT_THROW(parse_tickets(in), Error);
}

TEST(LoadTickets, UnknownFieldIsRejected) {
  std::istringstream in(R"({"external_id":"A","title":"x","description":"y","priority":"high"})" "\n");
  EXPECT_THROW(parse_tickets(in), Error);
}

TEST(LoadTickets, OptionalFieldsRoundTrip) {
  const std::string src =
      R"({"external_id":"A1","title":"File Access","description":"Good morning","category":"Permissions",)"
      R"("date_open":"2021-03-04 08:15:00","date_close":"2021-03-05T10:00:00Z","location":"Berlin",)"
      R"("solution":"Granted access","analysts":"[NAME]"})" "\n";
  std::istringstream in(src);
  const auto corpus = parse_tickets(in);
  ASSERT_EQ(corpus.size(), 1u);
  const auto& t = corpus.at("A1");
  EXPECT_EQ(t.category, "Permissions");
  ASSERT_TRUE(t.date_open.has_value());
  std::ostringstream out;
  write_tickets(out, corpus);
  std::istringstream again(out.str());
  EXPECT_EQ(parse_tickets(again).at("A1"), t);
}

TEST(LoadTickets, BadTimestampIsRejected) {
  std::istringstream in(line("A", R"(,"date_open":"yesterday")"));
  EXPECT_THROW(parse_tickets(in), Error);
}

TEST(Corpus, RecencyRanksOrderNewestFirst) {
  std::istringstream in(line("old", R"(,"date_open":"2020-01-01 00:00")") +
                        line("new", R"(,"date_open":"2022-01-01 00:00")") +
                        line("mid", R"(,"date_open":"2021-01-01T00:00:00+02:00")"));
  const auto corpus = parse_tickets(in);
  const auto ranks = corpus.recency_ranks();
  EXPECT_EQ(ranks[corpus.position("new")], 0u);
  EXPECT_EQ(ranks[corpus.position("mid")], 1u);
  EXPECT_EQ(ranks[corpus.position("old")], 2u);
}

TEST(SplitTrainEval, PartitionsByIds) {
  Corpus c({ticket("a", "", ""), ticket("b", "", ""), ticket("c", "", "")});
  auto [train, eval] = split_train_eval(c, {"b"});
  EXPECT_EQ(train.size(), 2u);
  EXPECT_EQ(eval.size(), 1u);
  EXPECT_TRUE(eval.contains("b"));
  EXPECT_FALSE(train.contains("b"));
}

TEST(SplitTrainEval, DegenerateSplits) {
  Corpus c({ticket("a", "", ""), ticket("b", "", "")});
  EXPECT_EQ(split_train_eval(c, {}).first.size(), 2u);
  EXPECT_EQ(split_train_eval(c, {"a", "b"}).second.size(), 2u);
  EXPECT_TRUE(split_train_eval(c, {"a", "b"}).first.empty());
}

TEST(SplitTrainEval, UnknownIdIsNamed) {
  Corpus c({ticket("a", "", "")});
  try {
    split_train_eval(c, {"zz9"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zz9"), std::string::npos);
  }
}

TEST(Redaction, ReplacesNames) {
  const std::vector<RedactionRule> rules = {{"Leonardo", "[NAME]"}};
  EXPECT_EQ(redact("this text was written by Leonardo", rules), "this text was written by [NAME]");
}

TEST(Redaction, NoMatchIsIdentity) {
  const std::vector<RedactionRule> rules = {{"Leonardo", "[NAME]"}};
  EXPECT_EQ(redact("printer jammed again", rules), "printer jammed again");
}

TEST(Redaction, ReplacesEveryEmail) {
  const std::vector<RedactionRule> rules = {{R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})", "[EMAIL]"}};
  EXPECT_EQ(redact("mail a@b.com and c@d.org", rules), "mail [EMAIL] and [EMAIL]");
}

TEST(Redaction, PrefersLongestMatch) {
  const std::vector<RedactionRule> rules = {{"Ann|Anna Schmidt", "[NAME]"}};
  EXPECT_EQ(redact("ask Anna Schmidt", rules), "ask [NAME]");
}

TEST(Redaction, TagIsInsertedLiterally) {
  const std::vector<RedactionRule> rules = {{"(secret)", "[SECRET]"}};
  EXPECT_EQ(redact("my secret $1", rules), "my [SECRET] $1");
}

TEST(Redaction, InvalidPatternFailsAtLoad) {
  testing_support::TempDir dir;
  testing_support::write_text(dir.file("rules.json"), R"([{"pattern":"(unclosed","tag":"[X]"}])");
  EXPECT_THROW(load_redaction_rules(dir.file("rules.json")), Error);
  testing_support::write_text(dir.file("tag.json"), R"([{"pattern":"x","tag":"lower"}])");
  EXPECT_THROW(load_redaction_rules(dir.file("tag.json")), Error);
}

TEST(Redaction, IsIdempotent) {
  const std::vector<RedactionRule> rules = {{R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})", "[EMAIL]"},
                                            {"Leonardo", "[NAME]"}};
  std::mt19937 gen(7);
  const std::vector<std::string> words = {"Leonardo", "a@b.com", "printer", "x.y@corp.de", "vpn", "  ", "[NAME]"};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (int j = 0; j < 8; ++j) text += words[gen() % words.size()] + " ";
    const auto once = redact(text, rules);
    EXPECT_EQ(redact(once, rules), once);
  }
}

TEST(Redaction, TicketFieldsAreRedacted) {
  auto t = ticket("A", "from Leonardo", "Leonardo again");
  t.solution = "told Leonardo";
  const auto r = Redactor(std::vector<RedactionRule>{{"Leonardo", "[NAME]"}}).apply(t);
  EXPECT_EQ(r.title, "from [NAME]");
  EXPECT_EQ(r.description, "[NAME] again");
  EXPECT_EQ(r.solution, "told [NAME]");
  EXPECT_EQ(r.external_id, "A");
}
