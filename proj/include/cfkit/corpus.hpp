#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cfkit {

/// Half-open token range [begin, end) into a Sentence.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
  friend auto operator<=>(const TokenRange&, const TokenRange&) = default;
};

inline constexpr int kRootHead = -1;

struct Token {
  std::size_t index = 0;
  std::string surface;
  std::string lemma;
  std::string upos;
  std::string xpos;
  int head = kRootHead;  // 0-based governor, or kRootHead
  std::string deprel;
  // Carried through untouched so CoNLL-U output round-trips.
  std::string feats = "_";
  std::string deps = "_";
  std::string misc = "_";
  bool space_before = false;

  bool is_root() const { return head == kRootHead; }
};

/// A tokenized, tagged, dependency-parsed sentence. Immutable once built; the
/// constructor enforces the tree invariants.
class Sentence {
 public:
  /// Lines that are not word tokens (comments, multiword ranges, empty nodes),
  /// kept with the position they appeared at so output is byte-identical.
  struct ExtraLine {
    std::size_t before_token;
    std::string raw;
  };

  Sentence() = default;
  Sentence(std::string id, std::string text, std::vector<Token> tokens, bool parsed = true,
           std::vector<ExtraLine> extra = {});

  /// Builds an unparsed sentence from raw text: simple tokenization, a flat
  /// tree rooted at the first token, and empty tags.
  static Sentence from_text(std::string id, std::string text);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  bool parsed() const { return parsed_; }
  const std::vector<ExtraLine>& extra_lines() const { return extra_; }

  std::size_t root() const;
  const std::vector<std::size_t>& children(std::size_t i) const;

  /// Surfaces joined with the stored whitespace map.
  std::string detokenize() const;
  std::string span_text(TokenRange r) const;

  /// Character offset of each token's first byte within detokenize().
  std::vector<std::size_t> char_offsets() const;

  std::vector<std::string> surfaces() const;

  /// Copy with a different id. Tokens and tree are shared by value.
  Sentence with_id(std::string id) const;

 private:
  void build_index();

  std::string id_;
  std::string text_;
  std::vector<Token> tokens_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<ExtraLine> extra_;
  bool parsed_ = true;
};

/// Token i plus all of its transitive dependents, in surface order.
std::vector<std::size_t> subtree_indices(const Sentence& s, std::size_t i);

/// True when the sorted index list has no gaps.
bool is_contiguous(const std::vector<std::size_t>& sorted_indices);

/// Maximal spans of a nominal head (NOUN/PROPN/PRON) plus its determiner,
/// adjectival, numeric and compound dependents. Disjoint, surface-ordered.
std::vector<TokenRange> noun_chunks(const Sentence& s);

struct Dataset {
  std::vector<Sentence> sentences;
  /// original id -> revised ids, from `# revision_of = <id>` comments.
  std::map<std::string, std::vector<std::string>> pair_index;

  const Sentence* find(const std::string& id) const;
  const Sentence* find_by_text(const std::string& text) const;
  /// Sentences that are not a revision of another sentence.
  std::vector<const Sentence*> originals() const;
};

Dataset parse_conllu(std::istream& in);
Dataset parse_conllu_file(const std::string& path);
void write_conllu(std::ostream& out, const Dataset& ds);
std::string to_conllu(const Sentence& s);

/// One row of the JSONL sentence-pair format.
struct SentencePair {
  std::string id;
  std::string original;
  std::string revised;
  std::optional<std::string> label_original;
  std::optional<std::string> label_revised;
};

std::vector<SentencePair> parse_pairs_jsonl(std::istream& in);

}  // namespace cfkit
