#include <doctest.h>

#include "lagsim/alphabet.hpp"
#include "lagsim/error.hpp"

using namespace lagsim;

TEST_CASE("alphabet interns labels densely") {
  Alphabet a({"A", "B", "<h>"}, "<h>");
  CHECK(a.size() == 3);
  CHECK(a.at("B") == 1);
  CHECK(a.halt() == 2);
  CHECK(a.label(0) == "A");
  CHECK_FALSE(a.find("Z"));
  CHECK_THROWS_AS(a.at("Z"), ForeignSymbol);
  CHECK_FALSE(a.end_marker());
}

TEST_CASE("alphabet rejects malformed definitions") {
  CHECK_THROWS_AS(Alphabet({"A", "A", "<h>"}, "<h>"), Error);
  CHECK_THROWS_AS(Alphabet({"A", "B"}, "<h>"), Error);
  CHECK_THROWS_AS(Alphabet({"<h>"}, "<h>"), Error);
}

TEST_CASE("end marker is optional and must be declared") {
  Alphabet a({"x", "#", "<h>"}, "<h>", "#");
  REQUIRE(a.end_marker());
  CHECK(*a.end_marker() == 1);
  CHECK_THROWS_AS(Alphabet({"x", "<h>"}, "<h>", "#"), Error);
}

TEST_CASE("symbol strings parse and render") {
  Alphabet a({"A", "B", "<h>"}, "<h>");
  auto s = parse_symbols(a, "  A B\tB ");
  CHECK(s == SymbolString{0, 1, 1});
  CHECK(join_symbols(a, s) == "A B B");
  CHECK(render_symbols(a, s) == std::vector<std::string>{"A", "B", "B"});
  CHECK(parse_symbols(a, "").empty());
  CHECK_THROWS_AS(parse_symbols(a, "A C"), ForeignSymbol);
}

TEST_CASE("token alphabet rejects repeats") {
  TokenAlphabet ok{{"a", "b"}, "a"};
  CHECK_NOTHROW(ok.check());
  TokenAlphabet bad{{"a", "a"}, "a"};
  CHECK_THROWS_AS(bad.check(), Error);
}
