#include "rxn/text_normalize.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "rxn/errors.h"

namespace rxn {
namespace {

bool is_separator(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0 || c == ',' || c == ';';
}

std::string lowered(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (is_separator(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// Decodes one UTF-8 code point at s[i]; returns its length, or 0 if invalid.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  return len;
}

// Replacement text for a code point, or nullopt to keep the original bytes.
std::optional<std::string> fold_code_point(char32_t cp) {
  if (cp >= 0x2080 && cp <= 0x2089) return std::string(1, static_cast<char>('0' + (cp - 0x2080)));
  if (cp >= 0x2074 && cp <= 0x2079) return std::string(1, static_cast<char>('4' + (cp - 0x2074)));
  switch (cp) {
    case 0x2070:
      return "0";
    case 0x00B9:
      return "1";
    case 0x00B2:
      return "2";
    case 0x00B3:
      return "3";
    case 0x207A:
    case 0x208A:
      return "+";
    case 0x207B:
    case 0x208B:
    case 0x2212:
      return "-";
    case 0x00A0:
    case 0x202F:
    case 0x3000:
      return " ";
    case 0x200B:
    case 0x200C:
    case 0x200D:
    case 0xFEFF:
      return "";
    case 0x2018:
    case 0x2019:
      return "'";
    case 0x201C:
    case 0x201D:
      return "\"";
    case 0x2103:
      return "°C";
    default:
      break;
  }
  if (cp >= 0x2010 && cp <= 0x2015) return "-";
  if (cp >= 0x2000 && cp <= 0x200A) return " ";
  if (cp >= 0xFF01 && cp <= 0xFF5E) return std::string(1, static_cast<char>(cp - 0xFEE0));
  return std::nullopt;
}

// OCR confusions repaired only when the result is a lexicon key.
constexpr std::array<std::pair<std::string_view, std::string_view>, 2> kConfusions = {{
    {"CI", "Cl"},
    {"0", "O"},
}};

std::optional<std::string> repair_confusions(std::string_view word,
                                             const Lexicon& lexicon) {
  for (const auto& [wrong, right] : kConfusions) {
    std::string candidate(word);
    bool changed = false;
    for (std::size_t at = candidate.find(wrong); at != std::string::npos;
         at = candidate.find(wrong, at + right.size())) {
      candidate.replace(at, wrong.size(), right);
      changed = true;
    }
    if (changed && lexicon.has_canonical(candidate)) return candidate;
  }
  return std::nullopt;
}

}  // namespace

void Lexicon::add(const std::string& canonical, const std::vector<std::string>& synonyms) {
  if (canonical.empty() ||
      std::any_of(canonical.begin(), canonical.end(), is_separator)) {
    throw SchemaError("/" + canonical, "canonical key must be a single token");
  }
  auto [it, inserted] = canonical_.try_emplace(canonical);
  if (inserted) {
    const std::string low = lowered(canonical);
    const int count = ++lowered_canonical_count_[low];
    if (count == 1) {
      index(low, canonical);
    } else {
      // Case-only collisions (CO vs Co) are matched case-sensitively only.
      phrases_.erase(low);
    }
  }
  for (const std::string& syn : synonyms) {
    it->second.push_back(syn);
    index(lowered(fold_unicode(syn)), canonical);
  }
}

void Lexicon::index(const std::string& phrase, const std::string& canonical) {
  const std::vector<std::string> words = split_words(phrase);
  if (words.empty()) return;
  std::string key;
  for (const std::string& w : words) {
    if (!key.empty()) key += ' ';
    key += w;
  }
  phrases_[key] = canonical;
  max_words_ = std::max(max_words_, words.size());
}

void Lexicon::merge(const Lexicon& other) {
  for (const auto& [canonical, synonyms] : other.canonical_) add(canonical, synonyms);
}

bool Lexicon::has_canonical(std::string_view key) const {
  return canonical_.find(key) != canonical_.end();
}

const std::string* Lexicon::lookup_phrase(std::string_view lowered_phrase) const {
  auto it = phrases_.find(lowered_phrase);
  return it == phrases_.end() ? nullptr : &it->second;
}

Lexicon Lexicon::from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("", std::string("lexicon is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("", "lexicon must be a JSON object");
  Lexicon lex;
  for (const auto& [key, value] : j.items()) {
    if (!key.empty() && key[0] == '_') continue;  // comments / metadata
    if (!value.is_array()) throw SchemaError("/" + key, "synonyms must be an array");
    std::vector<std::string> synonyms;
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!value[i].is_string()) {
        throw SchemaError("/" + key + "/" + std::to_string(i), "synonym must be a string");
      }
      synonyms.push_back(value[i].get<std::string>());
    }
    lex.add(key, synonyms);
  }
  return lex;
}

Lexicon Lexicon::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open lexicon file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string fold_unicode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(text, i, cp);
    if (len == 0) {
      out += text[i++];
      continue;
    }
    if (auto repl = fold_code_point(cp)) {
      out += *repl;
    } else {
      out.append(text.substr(i, len));
    }
    i += len;
  }
  return out;
}

std::vector<NormalizedToken> normalize_text(std::string_view raw, const Lexicon& lexicon) {
  const std::vector<std::string> words = split_words(fold_unicode(raw));
  std::vector<NormalizedToken> tokens;
  std::size_t i = 0;
  while (i < words.size()) {
    // Canonical keys are fixed points, which keeps normalization idempotent.
    if (lexicon.has_canonical(words[i])) {
      tokens.push_back({words[i], false});
      ++i;
      continue;
    }
    // Phrases never swallow a later word that is itself a canonical key.
    std::size_t run = 1;
    while (i + run < words.size() && !lexicon.has_canonical(words[i + run])) ++run;
    bool matched = false;
    const std::size_t longest = std::min(lexicon.max_phrase_words(), run);
    for (std::size_t len = longest; len >= 1 && !matched; --len) {
      std::string phrase;
      for (std::size_t k = i; k < i + len; ++k) {
        if (!phrase.empty()) phrase += ' ';
        phrase += lowered(words[k]);
      }
      if (const std::string* canonical = lexicon.lookup_phrase(phrase)) {
        tokens.push_back({*canonical, false});
        i += len;
        matched = true;
      }
    }
    if (matched) continue;
    if (auto repaired = repair_confusions(words[i], lexicon)) {
      tokens.push_back({*repaired, false});
    } else {
      tokens.push_back({words[i], true});
    }
    ++i;
  }
  return tokens;
}

std::string join_tokens(const std::vector<NormalizedToken>& tokens) {
  std::string out;
  for (const NormalizedToken& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

}  // namespace rxn
