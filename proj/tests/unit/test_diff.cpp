#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "cfkit/diff.hpp"

using namespace cfkit;

namespace {

std::vector<std::string> words(const std::string& s) { return text::split(s, ' '); }

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> vocab{"a", "b", "C", "c", "d", "e"};
  std::vector<std::string> out(rng() % (max_len + 1));
  for (auto& t : out) t = vocab[rng() % vocab.size()];
  return out;
}

}  // namespace

TEST_SUITE("diff") {
  TEST_CASE("the kids pair aligns to an insert and a replace") {
    auto spans = align(words("It is great for kids ."), words("It is not great for children ."));
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == EditSpan{{2, 2}, {2, 3}, EditKind::insert});
    CHECK(spans[1] == EditSpan{{4, 5}, {5, 6}, EditKind::replace});
  }

  TEST_CASE("regions one matched token apart are merged") {
    auto spans = align(words("a b c d e"), words("a X c Y e"));
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == EditSpan{{1, 4}, {1, 4}, EditKind::replace});
    auto apart = align(words("a b c d e f"), words("a X c d Y f"));
    CHECK(apart.size() == 2);
  }

  TEST_CASE("matching is case-insensitive") {
    CHECK(align(words("The dog"), words("the DOG")).empty());
    CHECK(levenshtein(words("The dog"), words("the DOG")) == 0);
  }

  TEST_CASE("deletions and pure inserts") {
    auto del = align(words("a b c d"), words("a d"));
    REQUIRE(del.size() == 1);
    CHECK(del[0].kind == EditKind::remove);
    CHECK(to_string(del[0].kind) == "delete");
    auto ins = align(words("a b"), words("x a b"));
    REQUIRE(ins.size() == 1);
    CHECK(ins[0] == EditSpan{{0, 0}, {0, 1}, EditKind::insert});
  }

  TEST_CASE("normalized distance") {
    CHECK(levenshtein_norm(std::vector<std::string>{}, std::vector<std::string>{}) == 0.0);
    CHECK(levenshtein_norm(words("a b c d"), words("a x c d")) == doctest::Approx(0.25));
  }

  TEST_CASE("levenshtein agrees with the DP oracle and spans replay to the revision") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
      auto a = random_tokens(rng, 9), b = random_tokens(rng, 9);
      REQUIRE(levenshtein(a, b) == oracle::levenshtein(a, b));
      auto spans = align(a, b);
      auto folded = b;
      for (auto& t : folded) t = text::casefold(t);
      REQUIRE(replay_edits(a, spans, b) == folded);
      for (std::size_t k = 1; k < spans.size(); ++k) {
        REQUIRE(spans[k].x.begin >= spans[k - 1].x.end + 2);  // merged when closer
      }
    }
  }

  TEST_CASE("edit views attribute inserts to the left neighbour") {
    auto x = testutil::mk("x", "It/PRON/PRP/3/nsubj is/AUX/VBZ/3/cop great/ADJ/JJ/0/root");
    auto y = testutil::mk("y", "It/PRON/PRP/4/nsubj is/AUX/VBZ/4/cop not/PART/RB/4/advmod great/ADJ/JJ/0/root");
    auto v = edit_views(make_perturbation(x, y));
    CHECK(v.edited == std::set<std::size_t>{1});
    CHECK(v.removed.empty());
    CHECK(v.added == std::multiset<std::string>{"not"});
    CHECK(removed_indices(make_perturbation(x, y)).empty());
  }
}
