#include <bit>
#include <string>
#include <vector>

#include "rxn/chem.h"
#include "rxn/errors.h"

namespace rxn::chem {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string atom_label(const Atom& a) {
  std::string label = a.element;
  if (a.aromatic) label += '~';
  if (a.charge != 0) label += (a.charge > 0 ? "+" : "") + std::to_string(a.charge);
  return label;
}

char bond_label(BondOrder order) {
  switch (order) {
    case BondOrder::kSingle:
      return '-';
    case BondOrder::kAromatic:
      return ':';
    case BondOrder::kDouble:
      return '=';
    case BondOrder::kTriple:
      return '#';
  }
  return '-';
}

class PathEnumerator {
 public:
  PathEnumerator(const Molecule& mol, int max_bonds, Fingerprint& fp)
      : mol_(mol), max_bonds_(max_bonds), fp_(fp), on_path_(mol.size(), false) {
    labels_.reserve(mol.size());
    for (const Atom& a : mol.atoms()) labels_.push_back(atom_label(a));
  }

  void run() {
    for (std::size_t start = 0; start < mol_.size(); ++start) {
      atoms_.assign(1, start);
      bonds_.clear();
      on_path_[start] = true;
      record();
      extend();
      on_path_[start] = false;
    }
  }

 private:
  void extend() {
    if (static_cast<int>(bonds_.size()) >= max_bonds_) return;
    const std::size_t tip = atoms_.back();
    for (const auto& [nbr, bond] : mol_.neighbors(tip)) {
      if (on_path_[nbr]) continue;
      on_path_[nbr] = true;
      atoms_.push_back(nbr);
      bonds_.push_back(bond);
      record();
      extend();
      bonds_.pop_back();
      atoms_.pop_back();
      on_path_[nbr] = false;
    }
  }

  // Each path is visited from both ends; the orientation-free label makes
  // both visits set the same bit.
  void record() {
    std::string forward;
    std::string backward;
    const std::size_t n = atoms_.size();
    for (std::size_t i = 0; i < n; ++i) {
      forward += labels_[atoms_[i]];
      backward += labels_[atoms_[n - 1 - i]];
      if (i + 1 < n) {
        forward += bond_label(mol_.bonds()[bonds_[i]].order);
        backward += bond_label(mol_.bonds()[bonds_[n - 2 - i]].order);
      }
    }
    const std::string& label = std::min(forward, backward);
    fp_.set(fnv1a(label) & (fp_.width() - 1));
  }

  const Molecule& mol_;
  int max_bonds_;
  Fingerprint& fp_;
  std::vector<bool> on_path_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> atoms_;
  std::vector<std::size_t> bonds_;
};

}  // namespace

void FingerprintConfig::validate() const {
  if (width < 256 || !std::has_single_bit(width)) {
    throw ConfigError("fingerprint width must be a power of two >= 256, got " +
                      std::to_string(width));
  }
  if (max_path_length < 1 || max_path_length > 7) {
    throw ConfigError("fingerprint max_path_length must be in [1, 7], got " +
                      std::to_string(max_path_length));
  }
  if (algorithm != "path-fnv1a") {
    throw ConfigError("unknown fingerprint algorithm '" + algorithm + "'");
  }
}

std::string FingerprintConfig::algorithm_tag() const {
  return algorithm + "/" + std::to_string(max_path_length);
}

Fingerprint::Fingerprint(std::size_t width, std::string algorithm_tag)
    : width_(width), tag_(std::move(algorithm_tag)), words_((width + 63) / 64, 0) {}

void Fingerprint::set(std::size_t bit) {
  if (bit >= width_) throw PreconditionError("fingerprint bit out of range");
  words_[bit / 64] |= std::uint64_t{1} << (bit % 64);
}

bool Fingerprint::test(std::size_t bit) const {
  if (bit >= width_) return false;
  return (words_[bit / 64] >> (bit % 64)) & 1U;
}

std::size_t Fingerprint::popcount() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> Fingerprint::on_bits() const {
  std::vector<std::size_t> bits;
  for (std::size_t i = 0; i < width_; ++i) {
    if (test(i)) bits.push_back(i);
  }
  return bits;
}

Fingerprint fingerprint(const Molecule& mol, const FingerprintConfig& config) {
  config.validate();
  Fingerprint fp(config.width, config.algorithm_tag());
  PathEnumerator(mol, config.max_path_length, fp).run();
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width() != b.width() || a.algorithm_tag() != b.algorithm_tag()) {
    throw WidthMismatch("cannot compare fingerprints " + a.algorithm_tag() + "@" +
                        std::to_string(a.width()) + " and " + b.algorithm_tag() +
                        "@" + std::to_string(b.width()));
  }
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(a.words()[i] & b.words()[i]));
    either += static_cast<std::size_t>(std::popcount(a.words()[i] | b.words()[i]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace rxn::chem
