#include <gtest/gtest.h>

#include <sstream>
#include <unistd.h>

#include "common.hpp"
#include "feet/embedding_io.hpp"

using namespace feet;
using feet::testing::TempDir;

namespace {

EmbeddingSet read_text(const std::string& text) {
  std::istringstream in(text);
  return read_canonical(in);
}

ErrorCode code_of(const std::string& text) {
  try {
    read_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::InvalidArgument;
}

const std::string kHeader =
    R"({"format":"FEET-EMB","version":1,"model_id":"m","task_id":"t","regime":"frozen","dim":3,"num_classes":2})";

}  // namespace

TEST(EmbeddingIo, ParsesMinimalFile) {
  const auto s = read_text(kHeader + "\n" + R"({"id":"a","label":0,"vector":[0.5,-1,2]})" + "\n" +
                           R"({"id":"b","label":1,"vector":[1,1,1]})" + "\n");
  EXPECT_EQ(s.model_id, "m");
  EXPECT_EQ(s.regime, Regime::Frozen);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.records[0].vector, (std::vector<float>{0.5f, -1.f, 2.f}));
  EXPECT_EQ(s.records[1].label, 1u);
}

TEST(EmbeddingIo, DimMismatchNamesLineTwo) {
  try {
    read_text(kHeader + "\n" + R"({"id":"a","label":0,"vector":[1,2]})" + "\n");
    FAIL() << "expected DimMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingIo, RejectsBadRecords) {
  EXPECT_EQ(code_of(kHeader + "\n" + R"({"id":"a","label":0,"vector":[1,2,3]})" + "\n" +
                    R"({"id":"a","label":1,"vector":[1,2,3]})" + "\n"),
            ErrorCode::DuplicateId);
  EXPECT_EQ(code_of(kHeader + "\n" + R"({"id":"a","label":2,"vector":[1,2,3]})" + "\n"), ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of(kHeader + "\n" + R"({"id":"a","label":0,"vector":[1,2,1e999]})" + "\n"), ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of(kHeader + "\n" + R"({"id":"a","label":0})" + "\n"), ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of(kHeader + "\nnot json\n"), ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of(R"({"format":"OTHER","version":1})" "\n"), ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of(""), ErrorCode::MalformedRecord);
}

TEST(EmbeddingIo, ShotOnlyForFewShot) {
  EXPECT_EQ(code_of(R"({"format":"FEET-EMB","version":1,"model_id":"m","task_id":"t","regime":"frozen","shot":4,"dim":1,"num_classes":2})" "\n"),
            ErrorCode::MalformedRecord);
  const auto s = read_text(
      R"({"format":"FEET-EMB","version":1,"model_id":"m","task_id":"t","regime":"fewshot","shot":4,"dim":1,"num_classes":2})" "\n");
  EXPECT_EQ(s.shot, 4u);
}

TEST(EmbeddingIo, UnknownHeaderKeysGoToMetadata) {
  const auto s = read_text(
      R"({"format":"FEET-EMB","version":1,"model_id":"m","task_id":"t","regime":"finetuned","dim":1,"num_classes":2,"pooling":"cls","metadata":{"rev":"abc"}})" "\n");
  EXPECT_EQ(s.metadata.at("pooling"), "cls");
  EXPECT_EQ(s.metadata.at("rev"), "abc");
}

TEST(EmbeddingIo, CanonicalRoundTripIsByteIdentical) {
  auto set = feet::testing::tiny_set(25, 7, 3);
  set.metadata = {{"pooling", "mean"}};
  std::ostringstream first;
  write_canonical(first, set);
  const auto back = read_text(first.str());
  std::ostringstream second;
  write_canonical(second, back);
  EXPECT_EQ(first.str(), second.str());
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(back.records[i].vector, set.records[i].vector);
}

TEST(EmbeddingIo, BinaryAndTextAgree) {
  TempDir dir("io");
  const auto set = feet::testing::tiny_set(40, 9, 2);
  save_embedding_set(dir / "a.jsonl", set);
  save_embedding_set(dir / "a.bin", set);
  const auto from_text = load_embedding_set(dir / "a.jsonl");
  const auto from_bin = load_embedding_set(dir / "a.bin");
  ASSERT_EQ(from_text.size(), from_bin.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(from_text.records[i].id, from_bin.records[i].id);
    EXPECT_EQ(from_text.records[i].label, from_bin.records[i].label);
    EXPECT_EQ(from_text.records[i].vector, from_bin.records[i].vector);
  }
  // binary -> text reproduces the canonical bytes
  std::ostringstream a, b;
  write_canonical(a, from_text);
  write_canonical(b, from_bin);
  EXPECT_EQ(a.str(), b.str());
}

TEST(EmbeddingIo, BinaryRejectsTrailingBytesAndTruncation) {
  TempDir dir("iobin");
  save_embedding_set(dir / "a.bin", feet::testing::tiny_set(3, 2, 2));
  std::string bytes = feet::testing::slurp(dir / "a.bin");
  {
    std::ofstream(dir / "b.bin", std::ios::binary) << bytes << 'x';
  }
  EXPECT_THROW(load_embedding_set(dir / "b.bin"), Error);
  {
    std::ofstream(dir / "c.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  }
  EXPECT_THROW(load_embedding_set(dir / "c.bin"), Error);
}

TEST(EmbeddingIo, MissingFileIsIoError) {
  try {
    load_embedding_set("/nonexistent/feet/file.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(EmbeddingIo, ClassCoverageWarns) {
  auto set = feet::testing::tiny_set(4, 2, 2);
  set.num_classes = 3;
  const auto f = class_coverage(set);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].severity, Severity::Warning);
}
