#pragma once
// Resource maps: a step level, a heap of share-annotated cells, and a ghost
// map. A finite Universe pins the enumeration space so satisfaction and
// entailment can be decided by brute force.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cslwb/algebra.hpp"

namespace cslwb {

struct Resource {
  enum class Kind { NonAtomic, AtomicCell };
  Kind kind = Kind::NonAtomic;
  int share = 0;  // numerator in the universe's share lattice; NonAtomic only
  int value = 0;

  auto operator<=>(const Resource&) const = default;
};

using Heap = std::map<int, Resource>;  // address -> resource

struct Rmap {
  int level = 0;
  Heap heap;
  GhostMap ghost;

  auto operator<=>(const Rmap&) const = default;
};

enum class CoreMode { Vst, Iris };

// The finite model: addresses, a value domain, a share lattice, ghost slots
// with fixed algebras, and a level bound. Active slots are what frame
// quantification ranges over; headroom slots exist so allocation can always
// find a name no frame occupies (the finite stand-in for an infinite name
// space). Tags enumerate the predicate arguments own assertions may carry.
struct Universe {
  std::shared_ptr<const AlgebraRegistry> registry;
  std::vector<std::string> addr_names;
  std::vector<int> values;
  ShareLattice shares{1};
  std::vector<int> slots;     // active: ghost name i holds algebra slots[i]
  std::vector<int> headroom;  // ghost name slots.size()+j holds algebra headroom[j]
  std::vector<int> tags{0};
  int max_level = 1;
  CoreMode core_mode = CoreMode::Vst;

  const AlgebraRegistry& reg() const { return *registry; }
  int addr_count() const { return static_cast<int>(addr_names.size()); }
  int name_count() const { return static_cast<int>(slots.size() + headroom.size()); }
  int active_count() const { return static_cast<int>(slots.size()); }

  int slot_algebra(int name) const {
    if (name < 0 || name >= name_count())
      throw usage_error("ghost name " + std::to_string(name) + " outside universe");
    return name < active_count() ? slots[name]
                                 : headroom[name - active_count()];
  }
  int addr(const std::string& name) const {
    for (int i = 0; i < addr_count(); ++i)
      if (addr_names[i] == name) return i;
    throw usage_error("no address named '" + name + "' in universe");
  }
  bool in_values(int v) const {
    for (int x : values)
      if (x == v) return true;
    return false;
  }
};

// ---- joins ----

inline std::optional<Resource> resource_join(const Universe& u, const Resource& a,
                                             const Resource& b) {
  if (a.kind != b.kind) return std::nullopt;
  if (a.kind == Resource::Kind::AtomicCell) return std::nullopt;  // never splits
  if (a.value != b.value) return std::nullopt;
  auto s = u.shares.add(a.share, b.share);
  if (!s) return std::nullopt;
  Resource r = a;
  r.share = *s;
  return r;
}

// Pointwise join. Levels must agree (joining across levels is a misuse, not
// an incompatibility).
inline std::optional<Rmap> rmap_join(const Universe& u, const Rmap& r1,
                                     const Rmap& r2) {
  if (r1.level != r2.level)
    throw usage_error("rmap_join: level mismatch (" + std::to_string(r1.level) +
                      " vs " + std::to_string(r2.level) + ")");
  Rmap out = r1;
  for (auto& [a, res] : r2.heap) {
    auto it = out.heap.find(a);
    if (it == out.heap.end()) {
      out.heap[a] = res;
      continue;
    }
    auto j = resource_join(u, it->second, res);
    if (!j) return std::nullopt;
    it->second = *j;
  }
  auto g = ghost_join(u.reg(), r1.ghost, r2.ghost);
  if (!g) return std::nullopt;
  out.ghost = std::move(*g);
  return out;
}

// ---- level and core operations ----

inline Rmap decrement(const Rmap& r) {
  Rmap out = r;
  if (out.level > 0) --out.level;
  return out;
}

// Replace heap and ghost by their cores. Heap resources have no duplicable
// part, so the heap empties; ghost entries map through the per-algebra core
// of the selected discipline, dropping entries whose core is undefined.
inline Rmap rmap_core(const Universe& u, const Rmap& r, CoreMode mode) {
  Rmap out;
  out.level = r.level;
  for (auto& [g, cell] : r.ghost) {
    const auto& alg = u.reg().at(cell.elem.algebra);
    const auto& core =
        mode == CoreMode::Vst ? alg.vst_core : alg.iris_core;
    if (auto c = core[cell.elem.value])
      out.ghost[g] = GhostCell{{cell.elem.algebra, *c}, cell.tag};
  }
  return out;
}

inline Rmap rmap_core(const Universe& u, const Rmap& r) {
  return rmap_core(u, r, u.core_mode);
}

// ---- enumeration ----

// Heap options per address: absent, each share/value pair, each atomic value.
inline int heap_options(const Universe& u) {
  return 1 + u.shares.full() * static_cast<int>(u.values.size()) +
         static_cast<int>(u.values.size());
}

inline std::optional<Resource> decode_heap_option(const Universe& u, int opt) {
  if (opt == 0) return std::nullopt;
  --opt;
  int nv = static_cast<int>(u.values.size());
  if (opt < u.shares.full() * nv)
    return Resource{Resource::Kind::NonAtomic, opt / nv + 1, u.values[opt % nv]};
  opt -= u.shares.full() * nv;
  return Resource{Resource::Kind::AtomicCell, 0, u.values[opt]};
}

// Ghost options for one slot: absent, or element x tag.
inline int slot_options(const Universe& u, int algebra) {
  return 1 + u.reg().at(algebra).size() * static_cast<int>(u.tags.size());
}

inline std::optional<GhostCell> decode_slot_option(const Universe& u, int algebra,
                                                   int opt) {
  if (opt == 0) return std::nullopt;
  --opt;
  int nt = static_cast<int>(u.tags.size());
  return GhostCell{{algebra, opt / nt}, u.tags[opt % nt]};
}

// Total number of enumerable rmaps (active slots only).
inline std::uint64_t rmap_count(const Universe& u) {
  std::uint64_t n = u.max_level + 1;
  for (int a = 0; a < u.addr_count(); ++a) n *= heap_options(u);
  for (int s : u.slots) n *= slot_options(u, s);
  return n;
}

// Decode the i-th rmap in the fixed mixed-radix order.
inline Rmap decode_rmap(const Universe& u, std::uint64_t ix) {
  Rmap r;
  r.level = static_cast<int>(ix % (u.max_level + 1));
  ix /= (u.max_level + 1);
  for (int a = 0; a < u.addr_count(); ++a) {
    int opts = heap_options(u);
    if (auto res = decode_heap_option(u, static_cast<int>(ix % opts)))
      r.heap[a] = *res;
    ix /= opts;
  }
  for (int s = 0; s < u.active_count(); ++s) {
    int opts = slot_options(u, u.slots[s]);
    if (auto cell = decode_slot_option(u, u.slots[s], static_cast<int>(ix % opts)))
      r.ghost[s] = *cell;
    ix /= opts;
  }
  return r;
}

// Invalid ghost elements are representable but not part of the model.
inline bool rmap_in_model(const Universe& u, const Rmap& r) {
  return ghost_map_valid(u.reg(), r.ghost);
}

// Enumerate all ghost maps over the given names (by universe slot algebra),
// calling fn on each valid one; fn returns false to stop early. Returns false
// if stopped.
inline bool for_each_ghost_map(const Universe& u, const std::vector<int>& names,
                               const std::function<bool(const GhostMap&)>& fn) {
  GhostMap cur;
  std::function<bool(size_t)> go = [&](size_t i) {
    if (i == names.size()) return fn(cur);
    int name = names[i];
    int alg = u.slot_algebra(name);
    if (!go(i + 1)) return false;  // absent
    const auto& spec = u.reg().at(alg);
    for (int e = 0; e < spec.size(); ++e) {
      if (!spec.valid[e]) continue;
      for (int t : u.tags) {
        cur[name] = GhostCell{{alg, e}, t};
        if (!go(i + 1)) {
          cur.erase(name);
          return false;
        }
      }
    }
    cur.erase(name);
    return true;
  };
  return go(0);
}

inline std::vector<int> active_names(const Universe& u) {
  std::vector<int> v;
  for (int i = 0; i < u.active_count(); ++i) v.push_back(i);
  return v;
}

inline std::vector<int> all_names(const Universe& u) {
  std::vector<int> v;
  for (int i = 0; i < u.name_count(); ++i) v.push_back(i);
  return v;
}

// ---- splitting (for separating conjunction) ----

// Enumerate all ways to split r as r1 * r2; fn returns false to stop.
inline bool for_each_split(const Universe& u, const Rmap& r,
                           const std::function<bool(const Rmap&, const Rmap&)>& fn) {
  std::vector<std::pair<int, Resource>> cells(r.heap.begin(), r.heap.end());
  std::vector<std::pair<int, GhostCell>> gcells(r.ghost.begin(), r.ghost.end());

  // Precompute ghost pair choices: (left, right) element options per entry,
  // -1 meaning absent on that side.
  struct GhostChoice {
    int left, right;  // element indices, -1 = absent
  };
  std::vector<std::vector<GhostChoice>> gopts(gcells.size());
  for (size_t i = 0; i < gcells.size(); ++i) {
    const auto& cell = gcells[i].second;
    const auto& alg = u.reg().at(cell.elem.algebra);
    gopts[i].push_back({-1, cell.elem.value});
    gopts[i].push_back({cell.elem.value, -1});
    for (int a = 0; a < alg.size(); ++a) {
      if (!alg.valid[a]) continue;
      for (int b = 0; b < alg.size(); ++b) {
        if (!alg.valid[b]) continue;
        auto j = alg.join_valid(a, b);
        if (j && *j == cell.elem.value) gopts[i].push_back({a, b});
      }
    }
  }

  Rmap r1, r2;
  r1.level = r2.level = r.level;
  std::function<bool(size_t)> goG = [&](size_t i) {
    if (i == gcells.size()) return fn(r1, r2);
    auto [name, cell] = gcells[i];
    for (auto& ch : gopts[i]) {
      if (ch.left >= 0) r1.ghost[name] = GhostCell{{cell.elem.algebra, ch.left}, cell.tag};
      if (ch.right >= 0) r2.ghost[name] = GhostCell{{cell.elem.algebra, ch.right}, cell.tag};
      bool cont = goG(i + 1);
      r1.ghost.erase(name);
      r2.ghost.erase(name);
      if (!cont) return false;
    }
    return true;
  };
  std::function<bool(size_t)> goH = [&](size_t i) {
    if (i == cells.size()) return goG(0);
    auto [addr, res] = cells[i];
    if (res.kind == Resource::Kind::AtomicCell) {
      r1.heap[addr] = res;
      bool cont = goH(i + 1);
      r1.heap.erase(addr);
      if (!cont) return false;
      r2.heap[addr] = res;
      cont = goH(i + 1);
      r2.heap.erase(addr);
      return cont;
    }
    for (int s = 0; s <= res.share; ++s) {
      if (s > 0) r1.heap[addr] = Resource{res.kind, s, res.value};
      if (res.share - s > 0)
        r2.heap[addr] = Resource{res.kind, res.share - s, res.value};
      bool cont = goH(i + 1);
      r1.heap.erase(addr);
      r2.heap.erase(addr);
      if (!cont) return false;
    }
    return true;
  };
  return goH(0);
}

// ---- printing ----

inline std::string show_rmap(const Universe& u, const Rmap& r) {
  std::ostringstream os;
  os << "level " << r.level << "; heap {";
  bool first = true;
  for (auto& [a, res] : r.heap) {
    if (!first) os << ", ";
    first = false;
    std::string an = a < u.addr_count() ? u.addr_names[a] : std::to_string(a);
    if (res.kind == Resource::Kind::NonAtomic)
      os << an << " |-" << u.shares.name(res.share) << "-> " << res.value;
    else
      os << an << " |=> " << res.value;
  }
  os << "}; ghost " << show_ghost_map(u.reg(), r.ghost);
  return os.str();
}

}  // namespace cslwb
