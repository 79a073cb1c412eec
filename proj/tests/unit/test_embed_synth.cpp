#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <unistd.h>

#include "ppft/corpus.hpp"
#include "ppft/matrix.hpp"
#include "ppft/vocab.hpp"
#include "test_util.hpp"

using namespace ppft;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    path = std::string("ppft_test_") + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++) + ".jsonl";
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("build_vocab is deterministic") {
  const auto a = build_vocab({"a", "b"}, 8, 42);
  const auto b = build_vocab({"a", "b"}, 8, 42);
  REQUIRE(a.table == b.table);

  const auto c = build_vocab({"a", "b"}, 8, 43);
  REQUIRE_FALSE(a.table == c.table);
}

TEST_CASE("build_vocab rejects duplicates and bad dimensions") {
  REQUIRE_ERROR(build_vocab({"a", "a"}, 8, 42), ErrorCode::DuplicateToken);
  REQUIRE_ERROR(build_vocab({"a"}, 1, 42), ErrorCode::BadDimension);
  REQUIRE_ERROR(build_vocab({}, 8, 42), ErrorCode::EmptyInput);
}

TEST_CASE("vocab vectors are unit norm") {
  const auto vocab = build_vocab({"alpha", "beta", "gamma", "delta"}, 16, 7);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    REQUIRE(std::abs(l2_norm(vocab.table.row(i)) - 1.0) <= 1e-9);
  }
}

TEST_CASE("distinct tokens get distinct vectors") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 50; ++i) tokens.push_back("tok" + std::to_string(i));
  const auto vocab = build_vocab(tokens, 8, 3);
  double min_dist = 10.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (std::size_t j = i + 1; j < vocab.size(); ++j) {
      min_dist = std::min(min_dist, l2_dist(vocab.table.row(i), vocab.table.row(j)));
    }
  }
  REQUIRE(min_dist > 0.0);
}

TEST_CASE("embed looks up rows by id") {
  const auto vocab = build_vocab({"x", "y"}, 8, 1);
  const std::vector<int> ids{0, 0, 1};
  const Matrix h = embed(vocab, ids);
  REQUIRE(h.rows() == 3);
  REQUIRE(l2_dist(h.row(0), h.row(1)) == 0.0);
  REQUIRE(l2_dist(h.row(0), h.row(2)) > 0.0);

  const std::vector<int> one{1};
  const Matrix single = embed(vocab, one);
  REQUIRE(single.rows() == 1);
  REQUIRE(l2_dist(single.row(0), vocab.table.row(1)) == 0.0);
}

TEST_CASE("embed rejects empty input and unknown ids") {
  const auto vocab = build_vocab({"x", "y"}, 8, 1);
  REQUIRE_ERROR(embed(vocab, std::vector<int>{}), ErrorCode::EmptyInput);
  REQUIRE_ERROR(embed(vocab, std::vector<int>{2}), ErrorCode::UnknownToken);
}

TEST_CASE("load_corpus parses well-formed JSONL") {
  TempFile file(
      R"({"prompt": "A 46-year-old male has a history of cough.", "answer": "flu", "attributes": {"age": "46", "sex": "male", "symptoms": ["cough"]}})"
      "\n"
      R"({"prompt": "hello there", "answer": "hi"})"
      "\n"
      R"({"prompt": "third line"})"
      "\n");
  const Corpus corpus = load_corpus(file.path);
  REQUIRE(corpus.size() == 3);
  REQUIRE(corpus.records[0].attributes.at("age") == std::vector<std::string>{"46"});
  REQUIRE(corpus.records[0].attributes.at("symptoms") == std::vector<std::string>{"cough"});
  REQUIRE(corpus.records[1].answer == "hi");
  REQUIRE(corpus.records[2].answer.empty());
}

TEST_CASE("load_corpus reports the failing line") {
  TempFile file(
      R"({"prompt": "fine"})"
      "\n"
      R"({"prompt": "unterminated)"
      "\n");
  try {
    load_corpus(file.path);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::ParseError);
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_corpus enforces the schema") {
  TempFile no_prompt(R"({"answer": "hi"})" "\n");
  REQUIRE_ERROR(load_corpus(no_prompt.path), ErrorCode::SchemaError);

  TempFile stray_attr(R"({"prompt": "short", "attributes": {"age": "46"}})" "\n");
  REQUIRE_ERROR(load_corpus(stray_attr.path), ErrorCode::SchemaError);
}

TEST_CASE("synthetic prompts are deterministic and self-consistent") {
  const AttributePools pools = default_attribute_pools();
  const CorpusRecord a = synth_clinical_prompt(1234, pools);
  const CorpusRecord b = synth_clinical_prompt(1234, pools);
  REQUIRE(a.prompt == b.prompt);
  REQUIRE(a.attributes == b.attributes);

  for (const auto& [name, values] : a.attributes) {
    for (const auto& v : values) {
      INFO(name << " = " << v);
      REQUIRE(a.prompt.find(v) != std::string::npos);
    }
  }
}

TEST_CASE("singleton pools force the prompt") {
  AttributePools pools;
  pools.ages = {"46"};
  pools.sexes = {"male"};
  pools.antecedents = {"diabetes"};
  pools.symptoms = {"cough"};
  pools.diagnoses = {"flu"};
  const CorpusRecord rec = synth_clinical_prompt(999, pools);
  REQUIRE(rec.prompt ==
          "A 46-year-old male has a history of diabetes. The 46-year-old male presents the "
          "symptoms of cough. What is the likely diagnosis?");
  REQUIRE(rec.answer == "flu");
}

TEST_CASE("empty pools are rejected") {
  AttributePools pools = default_attribute_pools();
  pools.symptoms.clear();
  REQUIRE_ERROR(synth_clinical_prompt(1, pools), ErrorCode::EmptyPool);
}

TEST_CASE("corpus round trip through JSONL") {
  const Corpus corpus = make_synthetic_corpus(5, 77);
  TempFile file("");
  save_corpus(corpus, file.path);
  const Corpus loaded = load_corpus(file.path);
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    REQUIRE(loaded.records[i].prompt == corpus.records[i].prompt);
    REQUIRE(loaded.records[i].attributes == corpus.records[i].attributes);
  }
}
