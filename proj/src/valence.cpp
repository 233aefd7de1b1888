#include "hiermol/valence.hpp"

#include <algorithm>
#include <array>

namespace hiermol {

namespace {

struct ValenceEntry {
  Element element;
  int charge;
  std::array<int, 3> values;
  int count;
};

// Keep in sync with docs/valence.md.
constexpr ValenceEntry kTable[] = {
    {Element::B, 0, {3}, 1},      {Element::B, -1, {4}, 1},
    {Element::C, 0, {4}, 1},      {Element::C, -1, {3}, 1},     {Element::C, 1, {3}, 1},
    {Element::N, 0, {3}, 1},      {Element::N, 1, {4}, 1},      {Element::N, -1, {2}, 1},
    {Element::O, 0, {2}, 1},      {Element::O, -1, {1}, 1},     {Element::O, 1, {3}, 1},
    {Element::P, 0, {3, 5}, 2},   {Element::P, 1, {4}, 1},
    {Element::S, 0, {2, 4, 6}, 3}, {Element::S, 1, {3}, 1},     {Element::S, -1, {1}, 1},
    {Element::F, 0, {1}, 1},      {Element::F, -1, {0}, 1},
    {Element::Cl, 0, {1}, 1},     {Element::Cl, -1, {0}, 1},
    {Element::Br, 0, {1}, 1},     {Element::Br, -1, {0}, 1},
    {Element::I, 0, {1}, 1},      {Element::I, -1, {0}, 1},
    {Element::H, 0, {1}, 1},      {Element::H, 1, {0}, 1},      {Element::H, -1, {0}, 1},
    {Element::Li, 0, {1}, 1},     {Element::Li, 1, {0}, 1},
    {Element::Na, 0, {1}, 1},     {Element::Na, 1, {0}, 1},
    {Element::K, 0, {1}, 1},      {Element::K, 1, {0}, 1},
    {Element::Mg, 0, {2}, 1},     {Element::Mg, 2, {0}, 1},
    {Element::Ca, 0, {2}, 1},     {Element::Ca, 2, {0}, 1},
};

// Organic-subset defaults used for implicit hydrogens.
std::span<const int> default_valences(Element e) {
  static constexpr int b[] = {3}, c[] = {4}, n[] = {3, 5}, o[] = {2}, p[] = {3, 5}, s[] = {2, 4, 6}, x[] = {1};
  switch (e) {
    case Element::B: return b;
    case Element::C: return c;
    case Element::N: return n;
    case Element::O: return o;
    case Element::P: return p;
    case Element::S: return s;
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I: return x;
    default: return {};
  }
}

}  // namespace

std::span<const int> allowed_valences(Element e, int formal_charge) {
  for (const auto& entry : kTable)
    if (entry.element == e && entry.charge == formal_charge)
      return {entry.values.data(), static_cast<std::size_t>(entry.count)};
  return {};
}

int default_implicit_hydrogens(const Molecule& mol, int atom) {
  const Atom& a = mol.atom(atom);
  auto valences = default_valences(a.element);
  if (valences.empty()) return 0;
  int sum = 0;
  for (const auto& nb : mol.neighbors(atom)) sum += bond_valence(mol.bond(nb.bond).order);
  if (a.aromatic) return std::max(0, valences.front() - sum - 1);
  for (int v : valences)
    if (v >= sum) return v - sum;
  return 0;
}

std::vector<ValenceViolation> validate_valence(const Molecule& mol) {
  std::vector<ValenceViolation> out;
  for (int i = 0; i < mol.num_atoms(); ++i) {
    const Atom& a = mol.atom(i);
    int total = a.hydrogens;
    for (const auto& nb : mol.neighbors(i)) total += bond_valence(mol.bond(nb.bond).order);
    auto allowed = allowed_valences(a.element, a.formal_charge);
    if (allowed.empty()) {
      out.push_back({i, total, "unsupported charge state for " + std::string(element_symbol(a.element))});
      continue;
    }
    auto ok = [&](int v) { return std::find(allowed.begin(), allowed.end(), v) != allowed.end(); };
    if (ok(total) || (a.aromatic && ok(total + 1))) continue;
    out.push_back({i, total, std::string(element_symbol(a.element)) + " with valence " + std::to_string(total)});
  }
  return out;
}

}  // namespace hiermol
