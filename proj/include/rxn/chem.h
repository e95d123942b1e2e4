// Molecular graphs parsed from SMILES, plus the chemistry primitives used by
// the reasoning layer: element counts, formal charges, path fingerprints,
// Tanimoto similarity and conservation residuals.
//
// Everything here is an immutable value after construction and safe to share
// across threads.

#ifndef RXN_CHEM_H_
#define RXN_CHEM_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rxn::chem {

enum class BondOrder : std::uint8_t { kSingle, kAromatic, kDouble, kTriple };

// 1, 1.5, 2 or 3.
double bond_order_value(BondOrder order);

struct Atom {
  std::string element;  // Capitalized symbol, e.g. "C", "Cl".
  int charge = 0;
  int explicit_h = 0;  // From bracket atoms only.
  int implicit_h = 0;  // From the valence model, organic-subset atoms only.
  int isotope = 0;     // 0 when unspecified.
  bool aromatic = false;
  bool bracket = false;

  int total_h() const { return explicit_h + implicit_h; }
  bool operator==(const Atom&) const = default;
};

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::kSingle;

  bool operator==(const Bond&) const = default;
};

class Molecule {
 public:
  // Validates the graph invariants; throws PreconditionError on violation.
  Molecule(std::vector<Atom> atoms, std::vector<Bond> bonds,
           std::string source_text = {});

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::string& source_text() const { return source_text_; }
  std::size_t size() const { return atoms_.size(); }

  // (neighbor atom, bond index) pairs, in bond insertion order.
  const std::vector<std::pair<std::size_t, std::size_t>>& neighbors(
      std::size_t atom) const {
    return adjacency_[atom];
  }

  // Same graph with atom i moved to position perm[i].
  Molecule reindexed(std::span<const std::size_t> perm) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::string source_text_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency_;
};

inline constexpr std::size_t kMaxSmilesLength = 4096;

// Parses the supported SMILES subset: organic-subset and bracket atoms,
// bond symbols - = # :, aromatic atoms, ring closures (digits and %nn),
// branches and dot-disconnection. Stereo marks are accepted and dropped.
// Throws SyntaxError or ValenceError.
Molecule parse_smiles(std::string_view text);

// Non-canonical writer. Every atom is emitted as a bracket atom carrying its
// total hydrogen count, so parse(write(m)) has the same atom counts as m.
std::string write_smiles(const Molecule& mol);

// Per-element tallies; hydrogens (explicit and implicit) are counted under H.
class ElementCounts {
 public:
  ElementCounts() = default;

  std::int64_t get(std::string_view element) const;
  void add(std::string_view element, std::int64_t n);
  const std::map<std::string, std::int64_t, std::less<>>& entries() const {
    return counts_;
  }
  bool empty() const { return counts_.empty(); }

  ElementCounts& operator+=(const ElementCounts& other);
  friend ElementCounts operator+(ElementCounts a, const ElementCounts& b) {
    return a += b;
  }
  bool operator==(const ElementCounts&) const = default;

 private:
  // Zero entries are never stored.
  std::map<std::string, std::int64_t, std::less<>> counts_;
};

// Signed element-wise difference; zero entries are never stored.
class ElementDelta {
 public:
  ElementDelta() = default;

  std::int64_t get(std::string_view element) const;
  void add(std::string_view element, std::int64_t n);
  const std::map<std::string, std::int64_t, std::less<>>& entries() const {
    return deltas_;
  }
  bool is_zero() const { return deltas_.empty(); }

  ElementDelta operator-() const;
  bool operator==(const ElementDelta&) const = default;

 private:
  std::map<std::string, std::int64_t, std::less<>> deltas_;
};

ElementDelta operator-(const ElementCounts& a, const ElementCounts& b);

ElementCounts atom_count_vector(const Molecule& mol);
int formal_charge_sum(const Molecule& mol);

// Hill-style formula string ("C2H6O"), mostly for diagnostics.
std::string formula(const ElementCounts& counts);

struct FingerprintConfig {
  std::size_t width = 2048;  // Power of two, >= 256.
  int max_path_length = 7;   // Bonds per path, in [1, 7].
  std::string algorithm = "path-fnv1a";

  // Throws ConfigError when out of range or the algorithm is unknown.
  void validate() const;
  // Identifies hashing scheme and path length, e.g. "path-fnv1a/7".
  std::string algorithm_tag() const;
};

class Fingerprint {
 public:
  Fingerprint(std::size_t width, std::string algorithm_tag);

  std::size_t width() const { return width_; }
  const std::string& algorithm_tag() const { return tag_; }

  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  std::size_t popcount() const;
  std::vector<std::size_t> on_bits() const;
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool operator==(const Fingerprint&) const = default;

 private:
  std::size_t width_;
  std::string tag_;
  std::vector<std::uint64_t> words_;
};

// Hashed linear-path fingerprint: every simple path of up to
// config.max_path_length bonds (single atoms included) is labelled by its
// element/bond sequence, read in the lexicographically smaller direction,
// and hashed into one bit.
Fingerprint fingerprint(const Molecule& mol, const FingerprintConfig& config = {});

// |a & b| / |a | b|; 1.0 when both are empty. Throws WidthMismatch when the
// widths or algorithm tags differ.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

struct ConservationResidual {
  ElementDelta elements;  // sum a(reactants) - sum a(products)
  int charge = 0;         // sum q(reactants) - sum q(products)

  bool balanced() const { return elements.is_zero() && charge == 0; }
  bool operator==(const ConservationResidual&) const = default;
};

// Throws PreconditionError when either side is empty.
ConservationResidual conservation_residual(std::span<const Molecule> reactants,
                                           std::span<const Molecule> products);

}  // namespace rxn::chem

#endif  // RXN_CHEM_H_
