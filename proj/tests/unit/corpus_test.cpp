// Copyright 2026 The mmcoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mmcoir/corpus.hpp"
#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/text_units.hpp"
#include "test_support.hpp"

namespace mmcoir {
namespace {

using nlohmann::json;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Frozen from an independent Python evaluation of the same FNV-1a/splitmix64
// construction.
TEST(Hashing, MatchesFrozenValues) {
  EXPECT_EQ(hash64("", 0), 0x5b21f68ffa77f14cULL);
  EXPECT_EQ(hash64("abc", 0), 0xe6d7af2db17ca299ULL);
  EXPECT_EQ(hash64("[image]", 42), 0xc61ccb4d3343147dULL);
  EXPECT_EQ(content_digest("abc").hex(), "d182cbd260570ad49eb0d61ccc847d8c");
}

TEST(Hashing, DigestBuilderSeparatesFields) {
  EXPECT_NE(DigestBuilder().add("ab").add("c").finish(), DigestBuilder().add("a").add("bc").finish());
  EXPECT_EQ(DigestBuilder().add("ab").add("c").finish(), DigestBuilder().add("ab").add("c").finish());
}

TEST(TextUnits, CountsAndTruncates) {
  EXPECT_EQ(count_units(""), 0U);
  EXPECT_EQ(count_units("  a  bb\n\tccc "), 3U);
  EXPECT_EQ(truncate_units("a b c d", 2), "a b");
  EXPECT_EQ(truncate_units("a b", 5), "a b");
  EXPECT_EQ(truncate_units("  a\n b ", 1), "  a");
  EXPECT_EQ(normalize_whitespace("  x \n\t y  "), "x y");
}

TEST(TextUnits, TruncationIsPrefixMonotone) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int n = static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) s += (rng() % 4 == 0) ? (rng() % 2 ? "\n" : "  ") : std::string(1, 'a' + rng() % 26);
    for (std::size_t b1 = 0; b1 < 20; ++b1) {
      const auto t1 = truncate_units(s, b1);
      const auto t2 = truncate_units(s, b1 + 1 + rng() % 5);
      ASSERT_EQ(t2.substr(0, t1.size()), t1);
      ASSERT_LE(count_units(t1), b1);
    }
  }
}

TEST(Direction, ParsesBothArrows) {
  EXPECT_EQ(parse_direction("qi->rc").tag(), "qi→rc");
  EXPECT_EQ(parse_direction("qtc→ric").tag(), "qtc→ric");
  EXPECT_EQ(code_of([] { parse_direction("qi"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_direction("qi→rt"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_direction("qx→rc"); }), ErrorCode::kInvalidArgument);
}

TEST(IngestTrain, SixKeyImageQueryRow) {
  const std::string row =
      R"({"qry":"Please retrieve the code... [image]","qry_img_path":"a.png","pos_text":"<svg>...</svg>",)"
      R"("pos_img_path":null,"neg_text":"<svg>..</svg>","neg_img_path":null})";
  const TrainingPair p = parse_train_row(row, 7);
  EXPECT_EQ(p.row, 7U);
  EXPECT_EQ(p.qry_img_path, "a.png");
  EXPECT_EQ(p.pos_text, "<svg>...</svg>");
  EXPECT_FALSE(p.pos_img_path);
  const Direction d = infer_train_direction(p);
  EXPECT_TRUE(d.query.has(Modality::kImage));
  EXPECT_FALSE(d.query.has(Modality::kText));
  EXPECT_EQ(d.target.letters(), "c");
}

TEST(IngestTrain, TokenWithoutImageIsMalformed) {
  EXPECT_EQ(code_of([] { parse_train_row(R"({"qry":"x [image]","pos_text":"c"})"); }), ErrorCode::kMalformedRow);
}

TEST(IngestTrain, EmptyStreamGivesNothing) {
  std::istringstream in("");
  const auto r = ingest_train(in);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_TRUE(r.rejects.empty());
}

TEST(IngestTrain, StrictAbortsLenientCounts) {
  const std::string data = R"({"qry":"a","pos_text":"c"})"
                           "\n"
                           R"({"qry":"b [image]","pos_text":"c"})"
                           "\n"
                           R"({"qry":"c","pos_text":"d"})"
                           "\n";
  std::istringstream strict(data);
  EXPECT_EQ(code_of([&] { ingest_train(strict); }), ErrorCode::kMalformedRow);
  std::istringstream lenient(data);
  const auto r = ingest_train(lenient, IngestOptions{true, "ds", ""});
  ASSERT_EQ(r.rows.size(), 2U);
  ASSERT_EQ(r.rejects.size(), 1U);
  EXPECT_EQ(r.rejects[0].line_no, 2U);
  EXPECT_EQ(r.rows[0].row, 0U);
  // Ids are positions in the file, so a rejected line still uses one up.
  EXPECT_EQ(r.rows[1].row, 2U);
  EXPECT_EQ(r.rows[1].dataset_tag, "ds");
}

TEST(IngestTrain, SchemaViolations) {
  EXPECT_EQ(code_of([] { parse_train_row(R"({"pos_text":"c"})"); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of([] { parse_train_row(R"({"qry":"a"})"); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of([] { parse_train_row(R"({"qry":"a","pos_text":"c","extra":"x"})"); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of([] { parse_train_row(R"({"qry":"a","pos_text":3})"); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of([] { parse_train_row(R"(["qry"])"); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of([] { parse_train_row("{not json"); }), ErrorCode::kMalformedRow);
}

TEST(IngestTrain, AbsentNullAndEmptyAreEquivalent) {
  const auto a = parse_train_row(R"({"qry":"a","pos_text":"c"})");
  const auto b = parse_train_row(R"({"qry":"a","pos_text":"c","neg_text":null,"pos_img_path":null})");
  const auto c = parse_train_row(R"({"qry":"a","pos_text":"c","neg_text":"","pos_img_path":""})");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(IngestEval, FourKeyTextToImageRow) {
  const std::string row =
      R"({"qry_text":"Please retrieve the image that matches the description. A red pie chart...",)"
      R"("qry_img_path":null,"tgt_text":null,"tgt_img_path":"c.png"})";
  std::istringstream in(row);
  const auto r = ingest_eval(in, IngestOptions{false, "chart", "qt→ri"});
  ASSERT_EQ(r.rows.size(), 1U);
  EXPECT_EQ(r.rows[0].tgt_img_path, "c.png");
  EXPECT_EQ(r.rows[0].task_tag, "qt→ri");
  EXPECT_EQ(r.rows[0].dataset_tag, "chart");
}

TEST(IngestEval, AllNullIsMalformed) {
  EXPECT_EQ(code_of([] {
              parse_eval_row(R"({"qry_text":null,"qry_img_path":null,"tgt_text":null,"tgt_img_path":null})");
            }),
            ErrorCode::kMalformedRow);
}

TEST(IngestEval, CardinalityAndIndices) {
  std::string data;
  for (int i = 0; i < 2000; ++i) data += R"({"qry_text":"q)" + std::to_string(i) + R"(","tgt_text":"t"})" "\n";
  std::istringstream in(data);
  const auto r = ingest_eval(in, IngestOptions{false, "d", "qt→rc"});
  ASSERT_EQ(r.rows.size(), 2000U);
  for (std::size_t i = 0; i < r.rows.size(); ++i) ASSERT_EQ(r.rows[i].row, i);
}

// Insertion point that does not split a UTF-8 sequence.
std::size_t char_boundary(const std::string& s, std::size_t pos) {
  while (pos < s.size() && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) ++pos;
  return pos;
}

std::optional<std::string> random_field(std::mt19937_64& rng, bool with_token) {
  if (rng() % 3 == 0) return std::nullopt;
  static const char* words[] = {"plot", "x", "é", "<svg>", "\"q\"", "a\\b", "line\nnext", "\t", "日本"};
  std::string s;
  const int n = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) s += std::string(words[rng() % 9]) + " ";
  if (with_token) s.insert(char_boundary(s, rng() % (s.size() + 1)), "[image]");
  return s;
}

TEST(IngestTrain, SerializeParseRoundtripProperty) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    TrainingPair p;
    const bool img = rng() % 2;
    p.qry = random_field(rng, false).value_or("q");
    if (img) {
      p.qry.insert(char_boundary(p.qry, rng() % (p.qry.size() + 1)), "[image]");
      p.qry_img_path = "img/" + std::to_string(trial) + ".png";
    }
    p.pos_img_path = rng() % 2 ? std::optional<std::string>("p.png") : std::nullopt;
    p.pos_text = random_field(rng, false);
    if (!p.pos_text && !p.pos_img_path) p.pos_text = "code";
    p.neg_text = random_field(rng, false);
    p.neg_img_path = rng() % 4 == 0 ? std::optional<std::string>("n.png") : std::nullopt;
    p.row = static_cast<std::size_t>(trial);
    const std::string line = to_jsonl(p);
    ASSERT_EQ(parse_train_row(line, p.row), p) << line;
    ASSERT_EQ(to_jsonl(parse_train_row(line, p.row)), line);
  }
}

TEST(IngestEval, SerializeParseRoundtripProperty) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    EvalPair p;
    const bool qimg = rng() % 2;
    p.qry_text = random_field(rng, qimg);
    if (qimg && p.qry_text) p.qry_img_path = "q.png";
    if (!p.qry_text && !p.qry_img_path) p.qry_text = "q";
    p.tgt_img_path = rng() % 2 ? std::optional<std::string>("t.png") : std::nullopt;
    p.tgt_text = random_field(rng, false);
    if (!p.tgt_text && !p.tgt_img_path) p.tgt_text = "code";
    p.row = static_cast<std::size_t>(trial);
    const std::string line = to_jsonl(p);
    ASSERT_EQ(parse_eval_row(line, p.row), p) << line;
  }
}

TEST(Fixtures, SmokeTrainParsesLosslessly) {
  const auto lines = read_lines(testing::fixture_dir() / "smoke" / "train.jsonl");
  ASSERT_EQ(lines.size(), 50U);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json original = json::parse(lines[i]);
    ASSERT_EQ(original.size(), 6U);
    for (const char* key : {"qry", "qry_img_path", "pos_text", "pos_img_path", "neg_text", "neg_img_path"}) {
      ASSERT_TRUE(original.contains(key)) << key;
    }
    const TrainingPair p = parse_train_row(lines[i], i);
    ASSERT_EQ(json::parse(to_jsonl(p)), original) << "row " << i;
  }
}

TEST(Fixtures, SmokeEvalParsesLosslessly) {
  const auto lines = read_lines(testing::fixture_dir() / "smoke" / "eval.jsonl");
  ASSERT_EQ(lines.size(), 50U);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json original = json::parse(lines[i]);
    ASSERT_EQ(original.size(), 4U);
    const EvalPair p = parse_eval_row(lines[i], i);
    ASSERT_EQ(json::parse(to_jsonl(p)), original) << "row " << i;
  }
}

TEST(Fixtures, EveryImageTokenViolationIsRejected) {
  const auto lines = read_lines(testing::fixture_dir() / "schema" / "image_token_violations.jsonl");
  ASSERT_EQ(lines.size(), 20U);
  for (const auto& line : lines) {
    const json c = json::parse(line);
    const std::string row = c.at("row");
    const ErrorCode code = c.at("kind") == "train" ? code_of([&] { parse_train_row(row); })
                                                   : code_of([&] { parse_eval_row(row); });
    EXPECT_EQ(code, ErrorCode::kMalformedRow) << c.at("case");
  }
}

TEST(Compose, ImageOnlyQuery) {
  ModalItem item;
  item.image_ref = "chart.png";
  const Instruction inst{"v1:qi→rc", "please retrieve the code that matches this image."};
  const SerializedItem s = compose_query(item, inst, 256);
  EXPECT_EQ(s.canonical_text, "please retrieve the code that matches this image.\n[image]");
  EXPECT_EQ(s.image_ref, "chart.png");
  EXPECT_EQ(s.token_budget, 256U);
}

TEST(Compose, TextAndImageQuery) {
  ModalItem item;
  item.text = "change the color of the nodes to purple.";
  item.image_ref = "g.png";
  const Instruction inst = standard_instruction(parse_direction("qti→rc"));
  const SerializedItem s = compose_query(item, inst, 256);
  EXPECT_EQ(s.canonical_text, inst.text + "\nchange the color of the nodes to purple.\n[image]");
}

TEST(Compose, TruncatesToBudget) {
  ModalItem item;
  std::string code;
  for (int i = 0; i < 600; ++i) code += "w" + std::to_string(i) + " ";
  item.code = code;
  const SerializedItem s = compose_target(item, 512);
  EXPECT_EQ(count_units(s.canonical_text), 512U);
  EXPECT_EQ(s.canonical_text.substr(0, 6), "w0 w1 ");
}

TEST(Compose, TargetForms) {
  EXPECT_EQ(compose_target(make_target("plt.show()", std::nullopt), 256).canonical_text, "plt.show()");
  EXPECT_EQ(compose_target(make_target("plt.show()", "r.png"), 256).canonical_text, "[image]\nplt.show()");
  EXPECT_EQ(code_of([] { compose_target(make_target("", std::nullopt), 256); }), ErrorCode::kEmptyItem);
}

TEST(Compose, Errors) {
  ModalItem item;
  item.text = "x";
  EXPECT_EQ(code_of([&] { compose_query(item, Instruction{"i", ""}, 10); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { compose_target(item, 0); }), ErrorCode::kInvalidArgument);
  item.text = "has [image] inside";
  EXPECT_EQ(code_of([&] { compose_target(item, 10); }), ErrorCode::kInvalidArgument);
}

TEST(Compose, DeterminismBijectionAndMonotonicity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    ModalItem item;
    if (rng() % 2) item.text = "text " + std::to_string(rng() % 1000) + std::string(rng() % 40, 'a') + " tail";
    if (rng() % 2) item.code = "code(" + std::to_string(rng()) + ")\n  body body body";
    if (rng() % 2 || item.mask().empty()) item.image_ref = "i.png";
    const Instruction inst{"t", "please retrieve the code that matches this image."};
    const std::size_t b1 = 1 + rng() % 12;
    const std::size_t b2 = b1 + rng() % 12;
    const auto s1 = compose_query(item, inst, b1);
    const auto s2 = compose_query(item, inst, b2);
    ASSERT_EQ(compose_query(item, inst, b1).canonical_text, s1.canonical_text);
    ASSERT_EQ(s2.canonical_text.substr(0, s1.canonical_text.size()), s1.canonical_text);
    const auto full = compose_query(item, inst, 10000);
    ASSERT_EQ(full.canonical_text.find("[image]") != std::string::npos, full.image_ref.has_value());
  }
}

TEST(Instructions, StandardTemplates) {
  EXPECT_EQ(standard_instruction(parse_direction("qi→rc")).text, "please retrieve the code that matches this image.");
  EXPECT_EQ(standard_instruction(parse_direction("qt→ri")).text,
            "Please retrieve the image that matches the description.");
  EXPECT_FALSE(standard_instruction(parse_direction("qtc→ric")).text.empty());
}

TEST(Instructions, DatasetInstructionIsSplitOff) {
  const auto [inst, rest] =
      resolve_instruction("Please retrieve the image that matches the description. A red pie chart.",
                          parse_direction("qt→ri"));
  EXPECT_EQ(inst.text, "Please retrieve the image that matches the description.");
  EXPECT_EQ(rest, "A red pie chart.");
  const auto [std_inst, same] = resolve_instruction("A red pie chart.", parse_direction("qt→ri"));
  EXPECT_EQ(std_inst.text, "Please retrieve the image that matches the description.");
  EXPECT_EQ(same, "A red pie chart.");
}

TEST(Instructions, TextAndCodeQuerySplitsAtFirstNewline) {
  const QuerySpec q = make_query("Make it blue.\nplt.plot(x)\nplt.show()", std::nullopt, parse_direction("qtc→rc"));
  EXPECT_EQ(q.item.text, "Make it blue.");
  EXPECT_EQ(q.item.code, "plt.plot(x)\nplt.show()");
}

TEST(LengthReport, MeanMaxAndSplits) {
  std::vector<TrainingPair> train(2);
  for (int i = 0; i < 10; ++i) train[0].qry += "w ";
  for (int i = 0; i < 30; ++i) train[1].qry += "w ";
  train[0].pos_text = "x";
  train[1].pos_text = "x";
  train[0].dataset_tag = train[1].dataset_tag = "d";
  const auto rows = length_report(train, {});
  ASSERT_EQ(rows.size(), 1U);
  EXPECT_DOUBLE_EQ(rows[0].query_mean, 20.0);
  EXPECT_EQ(rows[0].query_max, 30U);
  EXPECT_TRUE(length_report({}, {}).empty());

  std::vector<EvalPair> eval(2);
  for (int i = 0; i < 2; ++i) {
    eval[i].qry_text = train[i].qry;
    eval[i].tgt_text = "x";
    eval[i].dataset_tag = "d";
  }
  const auto both = length_report(train, eval);
  ASSERT_EQ(both.size(), 2U);
  EXPECT_EQ(both[0].query_mean, both[1].query_mean);
  EXPECT_EQ(both[0].query_max, both[1].query_max);
  EXPECT_EQ(both[0].target_mean, both[1].target_mean);
}

}  // namespace
}  // namespace mmcoir
