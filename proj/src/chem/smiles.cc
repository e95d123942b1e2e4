#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rxn/chem.h"
#include "rxn/errors.h"

namespace rxn::chem {
namespace {

constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool is_element(std::string_view s) {
  return std::find(kElements.begin(), kElements.end(), s) != kElements.end();
}

// Allowed valences, ascending. Empty for elements outside the table.
const std::vector<int>& standard_valences(std::string_view el) {
  static const std::map<std::string, std::vector<int>, std::less<>> table = {
      {"B", {3}},  {"C", {4}},       {"N", {3, 5}}, {"O", {2}},
      {"P", {3, 5}}, {"S", {2, 4, 6}}, {"F", {1}},    {"Cl", {1}},
      {"Br", {1}}, {"I", {1}}};
  static const std::vector<int> none;
  auto it = table.find(el);
  return it == table.end() ? none : it->second;
}

// Aromatic atoms of these elements take one extra valence unit for the
// delocalized pi bond; aromatic O and S do not.
bool takes_aromatic_adjustment(std::string_view el) {
  return el == "B" || el == "C" || el == "N" || el == "P";
}

int valence_contribution(BondOrder order) {
  switch (order) {
    case BondOrder::kSingle:
    case BondOrder::kAromatic:
      return 1;
    case BondOrder::kDouble:
      return 2;
    case BondOrder::kTriple:
      return 3;
  }
  return 1;
}

struct RingOpening {
  std::size_t atom;
  std::optional<BondOrder> order;
  std::size_t position;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Molecule run() {
    if (text_.empty()) throw SyntaxError(0, "empty SMILES string");
    if (text_.size() > kMaxSmilesLength) {
      throw SyntaxError(kMaxSmilesLength, "input longer than 4096 characters");
    }
    while (pos_ < text_.size()) step();
    finish();
    assign_hydrogens();
    return Molecule(std::move(atoms_), std::move(bonds_), std::string(text_));
  }

 private:
  void step() {
    const char c = text_[pos_];
    switch (c) {
      case '(':
        if (!prev_) throw SyntaxError(pos_, "branch opened without a preceding atom");
        if (pending_) throw SyntaxError(pos_, "bond symbol before '('");
        branches_.push_back({*prev_, pos_, atoms_.size()});
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) throw SyntaxError(pos_, "unbalanced ')'");
        if (pending_) throw SyntaxError(pos_, "dangling bond before ')'");
        if (!atom_since_branch_open()) throw SyntaxError(pos_, "empty branch");
        prev_ = branches_.back().atom;
        branches_.pop_back();
        ++pos_;
        return;
      case '-':
      case '=':
      case '#':
      case ':':
      case '/':
      case '\\':
        if (pending_) throw SyntaxError(pos_, "two consecutive bond symbols");
        if (!prev_) throw SyntaxError(pos_, "bond symbol without a preceding atom");
        pending_ = bond_from_symbol(c);
        pending_pos_ = pos_;
        ++pos_;
        return;
      case '.':
        if (pending_) throw SyntaxError(pos_, "bond symbol before '.'");
        if (!prev_) throw SyntaxError(pos_, "empty component before '.'");
        if (!branches_.empty()) throw SyntaxError(pos_, "'.' inside a branch");
        prev_.reset();
        ++pos_;
        return;
      case '%':
        ring_closure(parse_percent_ring());
        return;
      case '[':
        add_atom(parse_bracket_atom());
        return;
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      const std::size_t at = pos_++;
      ring_closure({c - '0', at});
      return;
    }
    add_atom(parse_organic_atom());
  }

  struct RingLabel {
    int number;
    std::size_t position;
  };

  RingLabel parse_percent_ring() {
    const std::size_t at = pos_;
    if (pos_ + 2 >= text_.size() ||
        !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
        !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
      throw SyntaxError(at, "'%' must be followed by two digits");
    }
    const int number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
    pos_ += 3;
    return {number, at};
  }

  static BondOrder bond_from_symbol(char c) {
    switch (c) {
      case '=':
        return BondOrder::kDouble;
      case '#':
        return BondOrder::kTriple;
      case ':':
        return BondOrder::kAromatic;
      default:
        return BondOrder::kSingle;  // '-', '/', '\' (stereo dropped)
    }
  }

  bool atom_since_branch_open() const {
    return atoms_.size() > branches_.back().atom_count_at_open;
  }

  void ring_closure(RingLabel label) {
    if (!prev_) throw SyntaxError(label.position, "ring bond without a preceding atom");
    auto it = rings_.find(label.number);
    if (it == rings_.end()) {
      rings_.emplace(label.number, RingOpening{*prev_, pending_, label.position});
      pending_.reset();
      return;
    }
    const RingOpening open = it->second;
    rings_.erase(it);
    if (open.atom == *prev_) {
      throw SyntaxError(label.position, "ring bond closes on the same atom");
    }
    std::optional<BondOrder> order = pending_;
    if (open.order && order && *open.order != *order) {
      throw SyntaxError(label.position, "conflicting bond symbols on ring closure");
    }
    if (!order) order = open.order;
    pending_.reset();
    add_bond(open.atom, *prev_, order, label.position);
  }

  void add_bond(std::size_t a, std::size_t b, std::optional<BondOrder> order,
                std::size_t position) {
    auto key = std::minmax(a, b);
    if (!bond_pairs_.insert(key).second) {
      throw SyntaxError(position, "duplicate bond between the same two atoms");
    }
    BondOrder resolved = order.value_or(
        atoms_[a].aromatic && atoms_[b].aromatic ? BondOrder::kAromatic
                                                 : BondOrder::kSingle);
    bonds_.push_back({a, b, resolved});
  }

  void add_atom(Atom atom) {
    const std::size_t index = atoms_.size();
    atoms_.push_back(std::move(atom));
    if (prev_) {
      add_bond(*prev_, index, pending_, pending_pos_);
    }
    pending_.reset();
    prev_ = index;
  }

  Atom parse_organic_atom() {
    const std::size_t at = pos_;
    const char c = text_[pos_];
    Atom atom;
    auto next_is = [&](char n) {
      return pos_ + 1 < text_.size() && text_[pos_ + 1] == n;
    };
    switch (c) {
      case 'C':
        if (next_is('l')) {
          atom.element = "Cl";
          pos_ += 2;
          return atom;
        }
        atom.element = "C";
        break;
      case 'B':
        if (next_is('r')) {
          atom.element = "Br";
          pos_ += 2;
          return atom;
        }
        atom.element = "B";
        break;
      case 'N':
      case 'O':
      case 'P':
      case 'S':
      case 'F':
      case 'I':
        atom.element = std::string(1, c);
        break;
      case 'b':
      case 'c':
      case 'n':
      case 'o':
      case 'p':
      case 's':
        atom.element = std::string(1, static_cast<char>(std::toupper(c)));
        atom.aromatic = true;
        break;
      default:
        if (std::isalpha(static_cast<unsigned char>(c))) {
          throw SyntaxError(at, std::string("unknown element '") + c +
                                    "' outside brackets");
        }
        throw SyntaxError(at, std::string("unexpected character '") + c + "'");
    }
    ++pos_;
    return atom;
  }

  Atom parse_bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;  // '['
    auto peek = [&]() -> char { return pos_ < text_.size() ? text_[pos_] : '\0'; };
    auto is_digit = [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; };

    Atom atom;
    atom.bracket = true;
    while (is_digit(peek())) {
      atom.isotope = atom.isotope * 10 + (peek() - '0');
      if (atom.isotope > 999) throw SyntaxError(pos_, "isotope too large");
      ++pos_;
    }

    const std::size_t symbol_at = pos_;
    const char first = peek();
    if (first == '\0') throw SyntaxError(open, "unclosed '['");
    if (std::islower(static_cast<unsigned char>(first))) {
      // Aromatic bracket symbols.
      if (text_.substr(pos_, 2) == "se" || text_.substr(pos_, 2) == "as") {
        atom.element = std::string(1, static_cast<char>(std::toupper(first))) +
                       std::string(1, text_[pos_ + 1]);
        pos_ += 2;
      } else if (std::string_view("bcnops").find(first) != std::string_view::npos) {
        atom.element = std::string(1, static_cast<char>(std::toupper(first)));
        ++pos_;
      } else {
        throw SyntaxError(symbol_at, std::string("unknown aromatic element '") +
                                         first + "'");
      }
      atom.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(first))) {
      std::string two(text_.substr(pos_, 2));
      if (two.size() == 2 && std::islower(static_cast<unsigned char>(two[1])) &&
          is_element(two)) {
        atom.element = two;
        pos_ += 2;
      } else if (is_element(std::string_view(&first, 1))) {
        atom.element = std::string(1, first);
        ++pos_;
      } else {
        throw SyntaxError(symbol_at, "unknown element in bracket atom");
      }
    } else {
      throw SyntaxError(symbol_at, "expected element symbol in bracket atom");
    }

    // Chirality: '@', '@@', or '@' followed by a class tag such as TH1.
    if (peek() == '@') {
      ++pos_;
      if (peek() == '@') {
        ++pos_;
      } else {
        while (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H') ++pos_;
        while (is_digit(peek())) ++pos_;
      }
    }

    if (peek() == 'H') {
      ++pos_;
      if (is_digit(peek())) {
        atom.explicit_h = 0;
        while (is_digit(peek())) {
          atom.explicit_h = atom.explicit_h * 10 + (peek() - '0');
          ++pos_;
        }
      } else {
        atom.explicit_h = 1;
      }
    }

    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      ++pos_;
      int magnitude = 1;
      if (is_digit(peek())) {
        magnitude = 0;
        while (is_digit(peek())) {
          magnitude = magnitude * 10 + (peek() - '0');
          ++pos_;
        }
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      if (magnitude > 15) throw SyntaxError(pos_, "formal charge out of range");
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }

    if (peek() == ':') {  // atom class, ignored
      ++pos_;
      if (!is_digit(peek())) throw SyntaxError(pos_, "atom class needs digits");
      while (is_digit(peek())) ++pos_;
    }

    if (peek() != ']') {
      if (peek() == '\0') throw SyntaxError(open, "unclosed '['");
      throw SyntaxError(pos_, std::string("unexpected '") + peek() +
                                  "' in bracket atom");
    }
    ++pos_;
    return atom;
  }

  void finish() {
    if (pending_) throw SyntaxError(pending_pos_, "dangling bond at end of input");
    if (!branches_.empty()) {
      throw SyntaxError(branches_.back().position, "unbalanced '('");
    }
    if (!rings_.empty()) {
      const auto& [number, open] = *rings_.begin();
      throw SyntaxError(open.position,
                        "unclosed ring bond " + std::to_string(number));
    }
    if (!prev_) {
      throw SyntaxError(text_.size(), "empty component at end of input");
    }
  }

  void assign_hydrogens() {
    std::vector<int> bond_sum(atoms_.size(), 0);
    for (const Bond& b : bonds_) {
      bond_sum[b.begin] += valence_contribution(b.order);
      bond_sum[b.end] += valence_contribution(b.order);
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      Atom& a = atoms_[i];
      const auto& valences = standard_valences(a.element);
      if (a.bracket) {
        if (a.charge != 0 || valences.empty()) continue;
        const int used = bond_sum[i] + a.explicit_h;
        const int limit = valences.back() + (a.aromatic ? 1 : 0);
        if (used > limit) {
          throw ValenceError("atom " + std::to_string(i) + " (" + a.element +
                             ") has valence " + std::to_string(used) +
                             ", maximum is " + std::to_string(valences.back()));
        }
        continue;
      }
      int used = bond_sum[i];
      if (a.aromatic && takes_aromatic_adjustment(a.element)) used += 1;
      auto fit = std::find_if(valences.begin(), valences.end(),
                              [used](int v) { return v >= used; });
      if (fit != valences.end()) {
        a.implicit_h = *fit - used;
      } else if (a.aromatic) {
        a.implicit_h = 0;
      } else {
        throw ValenceError("atom " + std::to_string(i) + " (" + a.element +
                           ") has valence " + std::to_string(used) +
                           ", maximum is " + std::to_string(valences.back()));
      }
    }
  }

  struct BranchOpen {
    std::size_t atom;
    std::size_t position;
    std::size_t atom_count_at_open = 0;
  };

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::set<std::pair<std::size_t, std::size_t>> bond_pairs_;
  std::optional<std::size_t> prev_;
  std::optional<BondOrder> pending_;
  std::size_t pending_pos_ = 0;
  std::vector<BranchOpen> branches_;
  std::map<int, RingOpening> rings_;
};

}  // namespace

Molecule parse_smiles(std::string_view text) { return Parser(text).run(); }

namespace {

std::string atom_token(const Atom& a) {
  std::string out = "[";
  if (a.isotope > 0) out += std::to_string(a.isotope);
  if (a.aromatic) {
    std::string lower = a.element;
    lower[0] = static_cast<char>(std::tolower(lower[0]));
    out += lower;
  } else {
    out += a.element;
  }
  const int h = a.total_h();
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.charge != 0) {
    out += a.charge > 0 ? '+' : '-';
    const int mag = a.charge > 0 ? a.charge : -a.charge;
    if (mag > 1) out += std::to_string(mag);
  }
  out += ']';
  return out;
}

std::string bond_token(const Molecule& mol, const Bond& b) {
  const bool both_aromatic =
      mol.atoms()[b.begin].aromatic && mol.atoms()[b.end].aromatic;
  switch (b.order) {
    case BondOrder::kSingle:
      return both_aromatic ? "-" : "";
    case BondOrder::kAromatic:
      return both_aromatic ? "" : ":";
    case BondOrder::kDouble:
      return "=";
    case BondOrder::kTriple:
      return "#";
  }
  return "";
}

std::string ring_label(int n) {
  return n < 10 ? std::to_string(n) : "%" + std::to_string(n);
}

class Writer {
 public:
  explicit Writer(const Molecule& mol)
      : mol_(mol),
        visited_(mol.size(), false),
        children_(mol.size()),
        ring_bonds_(mol.size()) {}

  std::string run() {
    std::string out;
    for (std::size_t root = 0; root < mol_.size(); ++root) {
      if (visited_[root]) continue;
      discover(root, SIZE_MAX);
      if (!out.empty()) out += '.';
      emit(root, out);
    }
    return out;
  }

 private:
  // Pass 1: spanning tree plus ring-closure bonds, in DFS preorder.
  void discover(std::size_t atom, std::size_t parent_bond) {
    visited_[atom] = true;
    for (const auto& [nbr, bond] : mol_.neighbors(atom)) {
      if (bond == parent_bond) continue;
      if (visited_[nbr]) {
        if (!ring_seen_.insert(bond).second) continue;
        ring_bonds_[nbr].push_back(bond);
        ring_bonds_[atom].push_back(bond);
        continue;
      }
      children_[atom].emplace_back(nbr, bond);
      discover(nbr, bond);
    }
  }

  void emit(std::size_t atom, std::string& out) {
    out += atom_token(mol_.atoms()[atom]);
    for (std::size_t bond : ring_bonds_[atom]) {
      auto it = open_digits_.find(bond);
      if (it != open_digits_.end()) {
        out += ring_label(it->second);
        free_digits_.insert(it->second);
        open_digits_.erase(it);
      } else {
        const int digit = take_digit();
        out += bond_token(mol_, mol_.bonds()[bond]);
        out += ring_label(digit);
        open_digits_.emplace(bond, digit);
      }
    }
    const auto& kids = children_[atom];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool branch = k + 1 < kids.size();
      if (branch) out += '(';
      out += bond_token(mol_, mol_.bonds()[kids[k].second]);
      emit(kids[k].first, out);
      if (branch) out += ')';
    }
  }

  int take_digit() {
    if (!free_digits_.empty()) {
      const int d = *free_digits_.begin();
      free_digits_.erase(free_digits_.begin());
      return d;
    }
    return next_digit_++;
  }

  const Molecule& mol_;
  std::vector<bool> visited_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> children_;
  std::vector<std::vector<std::size_t>> ring_bonds_;
  std::set<std::size_t> ring_seen_;
  std::map<std::size_t, int> open_digits_;
  std::set<int> free_digits_;
  int next_digit_ = 1;
};

}  // namespace

std::string write_smiles(const Molecule& mol) { return Writer(mol).run(); }

}  // namespace rxn::chem
