// Chemical text normalization: Unicode compatibility folding, synonym
// unification against a reagent lexicon, and lexicon-guarded OCR confusion
// repair ("FeCI3" -> "FeCl3").

#ifndef RXN_TEXT_NORMALIZE_H_
#define RXN_TEXT_NORMALIZE_H_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rxn {

struct NormalizedToken {
  std::string text;
  bool raw = false;  // true when the token matched nothing in the lexicon

  bool operator==(const NormalizedToken&) const = default;
};

class Lexicon {
 public:
  Lexicon() = default;

  // JSON object: canonical key -> array of synonyms. Throws SchemaError.
  static Lexicon from_json(std::string_view json_text);
  static Lexicon load_file(const std::filesystem::path& path);

  // Adds (or extends) an entry. Canonical keys may not contain separators.
  void add(const std::string& canonical, const std::vector<std::string>& synonyms);
  void merge(const Lexicon& other);

  bool has_canonical(std::string_view key) const;
  // Case-insensitive phrase lookup over synonyms (and unambiguous
  // lower-cased canonical keys). Returns nullptr when absent.
  const std::string* lookup_phrase(std::string_view lowered_phrase) const;
  std::size_t max_phrase_words() const { return max_words_; }
  std::size_t size() const { return canonical_.size(); }

 private:
  void index(const std::string& phrase, const std::string& canonical);

  std::map<std::string, std::vector<std::string>, std::less<>> canonical_;
  std::map<std::string, std::string, std::less<>> phrases_;
  std::map<std::string, int, std::less<>> lowered_canonical_count_;
  std::size_t max_words_ = 1;
};

// Folds subscript/superscript digits, fullwidth ASCII, typographic dashes
// and exotic spaces to plain ASCII equivalents.
std::string fold_unicode(std::string_view text);

std::vector<NormalizedToken> normalize_text(std::string_view raw,
                                            const Lexicon& lexicon);

// Space-joined token texts.
std::string join_tokens(const std::vector<NormalizedToken>& tokens);

}  // namespace rxn

#endif  // RXN_TEXT_NORMALIZE_H_
