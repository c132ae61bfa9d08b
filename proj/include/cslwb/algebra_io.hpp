#pragma once
// Text format for algebra definitions, so the law checker can be pointed at
// user-supplied algebras. Line oriented:
//
//   algebra <id>
//   elem <name>
//   invalid <name>
//   unit <name>
//   join <a> <b> <c>
//   vst_core <a> <c>
//   iris_core <a> <c>
//
// '#' starts a comment. Element names are whitespace-free tokens and must be
// declared before use. Duplicate join lines are kept verbatim; conflicting
// ones surface as functionality failures in the law check.

#include <istream>
#include <ostream>
#include <sstream>

#include "cslwb/algebra.hpp"

namespace cslwb {

inline AlgebraSpec load_algebra(std::istream& in) {
  AlgebraSpec spec;
  bool named = false;
  std::string line;
  int lineno = 0;
  auto lookup = [&](const std::string& name) {
    for (int i = 0; i < spec.size(); ++i)
      if (spec.names[i] == name) return i;
    throw usage_error("algebra file line " + std::to_string(lineno) +
                      ": undeclared element '" + name + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    auto need = [&](std::string& out) {
      if (!(ls >> out))
        throw usage_error("algebra file line " + std::to_string(lineno) +
                          ": missing argument after '" + kw + "'");
    };
    if (kw == "algebra") {
      need(spec.id);
      named = true;
    } else if (kw == "elem") {
      std::string name;
      need(name);
      if (spec.has_elem(name))
        throw usage_error("algebra file line " + std::to_string(lineno) +
                          ": duplicate element '" + name + "'");
      spec.names.push_back(name);
      spec.valid.push_back(1);
    } else if (kw == "invalid") {
      std::string name;
      need(name);
      spec.valid[lookup(name)] = 0;
    } else if (kw == "unit") {
      std::string name;
      need(name);
      spec.unit = lookup(name);
    } else if (kw == "join") {
      std::string a, b, c;
      need(a), need(b), need(c);
      spec.triples.emplace_back(lookup(a), lookup(b), lookup(c));
    } else if (kw == "vst_core" || kw == "iris_core") {
      std::string a, c;
      need(a), need(c);
      auto& tab = kw == "vst_core" ? spec.vst_core : spec.iris_core;
      tab.resize(spec.names.size());
      tab[lookup(a)] = lookup(c);
    } else {
      throw usage_error("algebra file line " + std::to_string(lineno) +
                        ": unknown keyword '" + kw + "'");
    }
  }
  if (!named) throw usage_error("algebra file: missing 'algebra <id>' line");
  if (spec.names.empty()) throw usage_error("algebra file: no elements declared");
  spec.compile();
  // A declared unit contributes its join rows like the builder does.
  if (spec.unit) {
    for (int x = 0; x < spec.size(); ++x) {
      spec.triples.emplace_back(*spec.unit, x, x);
      if (x != *spec.unit) spec.triples.emplace_back(x, *spec.unit, x);
    }
    spec.compile();
  }
  return spec;
}

inline void dump_algebra(std::ostream& out, const AlgebraSpec& spec) {
  out << "algebra " << spec.id << "\n";
  for (auto& n : spec.names) out << "elem " << n << "\n";
  for (int i = 0; i < spec.size(); ++i)
    if (!spec.valid[i]) out << "invalid " << spec.names[i] << "\n";
  if (spec.unit) out << "unit " << spec.names[*spec.unit] << "\n";
  for (int a = 0; a < spec.size(); ++a)
    for (int b = 0; b < spec.size(); ++b)
      if (auto j = spec.join(a, b))
        out << "join " << spec.names[a] << " " << spec.names[b] << " "
            << spec.names[*j] << "\n";
  for (int a = 0; a < spec.size(); ++a) {
    if (spec.vst_core[a])
      out << "vst_core " << spec.names[a] << " " << spec.names[*spec.vst_core[a]]
          << "\n";
    if (spec.iris_core[a])
      out << "iris_core " << spec.names[a] << " " << spec.names[*spec.iris_core[a]]
          << "\n";
  }
}

}  // namespace cslwb
