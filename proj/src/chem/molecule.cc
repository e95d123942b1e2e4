#include <algorithm>
#include <set>
#include <string>
#include <utility>

#include "rxn/chem.h"
#include "rxn/errors.h"

namespace rxn::chem {

double bond_order_value(BondOrder order) {
  switch (order) {
    case BondOrder::kSingle:
      return 1.0;
    case BondOrder::kAromatic:
      return 1.5;
    case BondOrder::kDouble:
      return 2.0;
    case BondOrder::kTriple:
      return 3.0;
  }
  return 1.0;
}

Molecule::Molecule(std::vector<Atom> atoms, std::vector<Bond> bonds,
                   std::string source_text)
    : atoms_(std::move(atoms)),
      bonds_(std::move(bonds)),
      source_text_(std::move(source_text)),
      adjacency_(atoms_.size()) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < bonds_.size(); ++i) {
    const Bond& b = bonds_[i];
    if (b.begin >= atoms_.size() || b.end >= atoms_.size()) {
      throw PreconditionError("bond endpoint out of range");
    }
    if (b.begin == b.end) {
      throw PreconditionError("self-bond on atom " + std::to_string(b.begin));
    }
    auto key = std::minmax(b.begin, b.end);
    if (!seen.insert(key).second) {
      throw PreconditionError("duplicate bond between atoms " +
                              std::to_string(key.first) + " and " +
                              std::to_string(key.second));
    }
    adjacency_[b.begin].emplace_back(b.end, i);
    adjacency_[b.end].emplace_back(b.begin, i);
  }
  for (const Atom& a : atoms_) {
    if (a.implicit_h < 0 || a.explicit_h < 0) {
      throw PreconditionError("negative hydrogen count on " + a.element);
    }
  }
}

Molecule Molecule::reindexed(std::span<const std::size_t> perm) const {
  if (perm.size() != atoms_.size()) {
    throw PreconditionError("permutation size does not match atom count");
  }
  std::vector<Atom> atoms(atoms_.size());
  std::vector<bool> used(atoms_.size(), false);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= atoms_.size() || used[perm[i]]) {
      throw PreconditionError("not a permutation");
    }
    used[perm[i]] = true;
    atoms[perm[i]] = atoms_[i];
  }
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const Bond& b : bonds_) {
    bonds.push_back({perm[b.begin], perm[b.end], b.order});
  }
  return Molecule(std::move(atoms), std::move(bonds), source_text_);
}

std::int64_t ElementCounts::get(std::string_view element) const {
  auto it = counts_.find(element);
  return it == counts_.end() ? 0 : it->second;
}

void ElementCounts::add(std::string_view element, std::int64_t n) {
  if (n < 0) {
    throw PreconditionError("ElementCounts cannot hold negative values");
  }
  if (n == 0) return;
  auto it = counts_.find(element);
  if (it == counts_.end()) {
    counts_.emplace(std::string(element), n);
  } else {
    it->second += n;
  }
}

ElementCounts& ElementCounts::operator+=(const ElementCounts& other) {
  for (const auto& [el, n] : other.counts_) add(el, n);
  return *this;
}

std::int64_t ElementDelta::get(std::string_view element) const {
  auto it = deltas_.find(element);
  return it == deltas_.end() ? 0 : it->second;
}

void ElementDelta::add(std::string_view element, std::int64_t n) {
  if (n == 0) return;
  auto it = deltas_.find(element);
  if (it == deltas_.end()) {
    deltas_.emplace(std::string(element), n);
    return;
  }
  it->second += n;
  if (it->second == 0) deltas_.erase(it);
}

ElementDelta ElementDelta::operator-() const {
  ElementDelta out;
  for (const auto& [el, n] : deltas_) out.add(el, -n);
  return out;
}

ElementDelta operator-(const ElementCounts& a, const ElementCounts& b) {
  ElementDelta out;
  for (const auto& [el, n] : a.entries()) out.add(el, n);
  for (const auto& [el, n] : b.entries()) out.add(el, -n);
  return out;
}

ElementCounts atom_count_vector(const Molecule& mol) {
  ElementCounts counts;
  std::int64_t hydrogens = 0;
  for (const Atom& a : mol.atoms()) {
    counts.add(a.element, 1);
    hydrogens += a.total_h();
  }
  counts.add("H", hydrogens);
  return counts;
}

int formal_charge_sum(const Molecule& mol) {
  int total = 0;
  for (const Atom& a : mol.atoms()) total += a.charge;
  return total;
}

std::string formula(const ElementCounts& counts) {
  // Hill order: C, H, then alphabetical; without carbon, fully alphabetical.
  std::string out;
  auto emit = [&out](const std::string& el, std::int64_t n) {
    out += el;
    if (n > 1) out += std::to_string(n);
  };
  const bool has_carbon = counts.get("C") > 0;
  if (has_carbon) {
    emit("C", counts.get("C"));
    if (counts.get("H") > 0) emit("H", counts.get("H"));
  }
  for (const auto& [el, n] : counts.entries()) {
    if (has_carbon && (el == "C" || el == "H")) continue;
    emit(el, n);
  }
  return out;
}

ConservationResidual conservation_residual(std::span<const Molecule> reactants,
                                           std::span<const Molecule> products) {
  if (reactants.empty() || products.empty()) {
    throw PreconditionError("conservation_residual needs both sides non-empty");
  }
  ElementCounts lhs;
  ElementCounts rhs;
  int charge = 0;
  for (const Molecule& m : reactants) {
    lhs += atom_count_vector(m);
    charge += formal_charge_sum(m);
  }
  for (const Molecule& m : products) {
    rhs += atom_count_vector(m);
    charge -= formal_charge_sum(m);
  }
  return {lhs - rhs, charge};
}

}  // namespace rxn::chem
