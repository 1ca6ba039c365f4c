#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "lagsim/backends.hpp"
#include "lagsim/codebook.hpp"
#include "lagsim/error.hpp"

using namespace lagsim;

namespace {

Alphabet numbered(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i + 1 < n; ++i) labels.push_back("s" + std::to_string(i));
  labels.push_back("<h>");
  return Alphabet(labels, "<h>");
}

TokenAlphabet tokens(std::size_t n) {
  TokenAlphabet t;
  for (std::size_t i = 0; i < n; ++i) t.tokens.push_back("k" + std::to_string(i));
  t.halt_token = t.tokens.front();
  return t;
}

std::size_t count_kind(const ValidationReport& r, const std::string& kind) {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [&](const Violation& v) { return v.kind == kind; }));
}

}  // namespace

TEST_CASE("pair codebook over 250 symbols and 16 tokens uses 250 distinct pairs") {
  auto a = numbered(250);
  auto book = build_pair_codebook(a, tokens(16));
  std::set<std::vector<Token>> pairs(book.token_words().begin(), book.token_words().end());
  CHECK(pairs.size() == 250);
  for (const auto& w : book.token_words()) CHECK(w.size() == 2);
  CHECK(check_codebook(book, a).empty());
}

TEST_CASE("smallest pair codebook") {
  Alphabet a({"x", "<h>"}, "<h>");
  auto book = build_pair_codebook(a, TokenAlphabet{{"a", "b"}, "a"});
  CHECK(book.token_word(0) == std::vector<Token>{"a", "a"});
  CHECK(book.token_word(1) == std::vector<Token>{"a", "b"});
}

TEST_CASE("too few tokens for the alphabet") {
  CHECK_THROWS_AS(build_pair_codebook(numbered(5), tokens(2)), InsufficientTokens);
}

TEST_CASE("planted collision is one injectivity violation naming both symbols") {
  Alphabet a({"x", "y", "z", "<h>"}, "<h>");
  auto book = Codebook::tokens({{"a", "a"}, {"a", "b"}, {"a", "a"}, {"b", "b"}}, 3);
  auto r = check_codebook(book, a);
  REQUIRE(count_kind(r, "injectivity") == 1);
  auto it = std::find_if(r.begin(), r.end(), [](const Violation& v) { return v.kind == "injectivity"; });
  CHECK(it->symbols == std::vector<std::string>{"x", "z"});
}

TEST_CASE("planted prefix is one prefix violation") {
  Alphabet a({"x", "y", "<h>"}, "<h>");
  auto book = Codebook::tokens({{"a"}, {"a", "b"}, {"b", "b"}}, 2);
  auto r = check_codebook(book, a);
  CHECK(count_kind(r, "prefix") == 1);
}

TEST_CASE("token streams parse codeword by codeword") {
  auto a = numbered(9);
  auto book = build_pair_codebook(a, tokens(3));
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<SymbolId> sym(0, 8);
  for (int trial = 0; trial < 200; ++trial) {
    SymbolString s(static_cast<std::size_t>(trial % 7));
    for (auto& x : s) x = sym(rng);
    std::vector<Token> stream;
    for (SymbolId x : s) UnitCodec<Token>::append(book, x, stream);
    auto parsed = book.parse_tokens(stream);
    REQUIRE(parsed);
    CHECK(*parsed == s);
    if (!stream.empty()) {
      stream.pop_back();
      CHECK_FALSE(book.parse_tokens(stream));
    }
  }
  CHECK_FALSE(book.parse_tokens(std::vector<Token>{"nope", "k0"}));
}

TEST_CASE("codebook JSON round trip") {
  auto a = numbered(6);
  auto book = build_pair_codebook(a, tokens(3));
  auto back = codebook_from_json(codebook_to_json(book, a), a);
  CHECK(back.token_words() == book.token_words());
  CHECK(back.halt() == book.halt());

  Eigen::MatrixXd table = Eigen::MatrixXd::Random(3, 6);
  auto vbook = Codebook::vectors(table, a.halt());
  auto vback = codebook_from_json(codebook_to_json(vbook, a), a);
  CHECK(vback.kind() == CodebookKind::Vector);
  CHECK((vback.vector_table() - table).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quantize: codewords map to themselves, ties go to the lower id") {
  auto a = numbered(4);
  Eigen::MatrixXd t(2, 4);
  t << 1, -1, 0, 5,  //
      0, 0, 3, 5;
  auto book = Codebook::vectors(t, a.halt());
  for (SymbolId s = 0; s < 4; ++s) {
    auto [sym, word] = quantize(t.col(s), book);
    CHECK(sym == s);
    CHECK(word == t.col(s));
  }
  CHECK(quantize(Eigen::Vector2d(0, 0), book).first == 0);  // equidistant from ids 0 and 1
}

TEST_CASE("quantize agrees with an exhaustive scan on random vectors") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd t(5, 12);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  auto book = Codebook::vectors(t, 11);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd v(5);
    for (auto& x : v) x = 2.0 * n(rng);
    SymbolId best = 0;
    double best_d = 1e300;
    for (SymbolId s = 0; s < 12; ++s) {
      double d = 0;
      for (int i = 0; i < 5; ++i) d += (v[i] - t(i, s)) * (v[i] - t(i, s));
      if (d < best_d) best_d = d, best = s;
    }
    CHECK(quantize(v, book).first == best);
  }
}

TEST_CASE("nearest codeword errors") {
  CHECK_THROWS_AS(nearest_column(Eigen::MatrixXd(3, 0), Eigen::VectorXd::Zero(3)), EmptyCodebook);
  CHECK_THROWS_AS(nearest_column(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST_CASE("vector codebook with a duplicate column fails the check") {
  auto a = numbered(3);
  Eigen::MatrixXd t(2, 3);
  t << 1, 1, 0,  //
      2, 2, 0;
  auto r = check_codebook(Codebook::vectors(t, 2), a);
  CHECK(count_kind(r, "injectivity") == 1);
}
