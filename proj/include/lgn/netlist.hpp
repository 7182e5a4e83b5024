#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lgn/error.hpp"
#include "lgn/gates.hpp"
#include "lgn/hardnet.hpp"

// Text netlist for discretized networks plus semantics-preserving cleanup
// passes. The format is line-based and fully deterministic so that
// export -> import -> export is byte-identical:
//
//   LGN-NETLIST v1
//   inputs 24
//   classes 4
//   layers 2
//   width 0 100
//   width 1 100
//   g0_0 = AND(i3, i17)
//   ...
//   g1_99 = OR(g0_5, g0_99)
//   group 0 = g1_0 g1_1 ...
//   offset 0 3            (emitted only when nonzero)
//
// Sources are i<j> for network inputs (layer 0 only) and g<l-1>_<k> for the
// directly preceding layer; the strict layer discipline of HardNetwork is
// part of the format.

namespace lgn {

inline void validate_hard(const HardNetwork& net) {
  if (net.input_width <= 0) throw DataError("netlist: input width must be positive");
  if (net.n_classes <= 0) throw DataError("netlist: class count must be positive");
  if (net.groups.size() != size_t(net.n_classes) ||
      net.group_offsets.size() != size_t(net.n_classes))
    throw DataError("netlist: group table does not match class count");
  size_t prev = size_t(net.input_width);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    for (const HardGate& g : net.layers[l]) {
      check_op(g.op);
      if (g.src_a >= prev || g.src_b >= prev)
        throw DataError("netlist: layer " + std::to_string(l) + " references wire beyond fan-in");
    }
    prev = net.layers[l].size();
  }
  size_t last = net.layers.empty() ? 0 : net.layers.back().size();
  for (const auto& members : net.groups)
    for (uint32_t m : members)
      if (m >= last) throw DataError("netlist: group member beyond last layer");
}

inline void export_netlist(const HardNetwork& net, std::ostream& os) {
  os << "LGN-NETLIST v1\n";
  os << "inputs " << net.input_width << "\n";
  os << "classes " << net.n_classes << "\n";
  os << "layers " << net.layers.size() << "\n";
  for (size_t l = 0; l < net.layers.size(); ++l)
    os << "width " << l << " " << net.layers[l].size() << "\n";
  for (size_t l = 0; l < net.layers.size(); ++l) {
    std::string src_prefix = l == 0 ? "i" : ("g" + std::to_string(l - 1) + "_");
    for (size_t k = 0; k < net.layers[l].size(); ++k) {
      const HardGate& g = net.layers[l][k];
      os << "g" << l << "_" << k << " = " << kOpNames[g.op] << "(" << src_prefix << g.src_a
         << ", " << src_prefix << g.src_b << ")\n";
    }
  }
  std::string last_prefix =
      net.layers.empty() ? "i" : ("g" + std::to_string(net.layers.size() - 1) + "_");
  for (int c = 0; c < net.n_classes; ++c) {
    os << "group " << c << " =";
    for (uint32_t m : net.groups[size_t(c)]) os << " " << last_prefix << m;
    os << "\n";
  }
  for (int c = 0; c < net.n_classes; ++c)
    if (net.group_offsets[size_t(c)] != 0)
      os << "offset " << c << " " << net.group_offsets[size_t(c)] << "\n";
}

inline std::string export_netlist(const HardNetwork& net) {
  std::ostringstream ss;
  export_netlist(net, ss);
  return ss.str();
}

namespace detail {

struct NetlistParser {
  std::istream& in;
  int line_no = 0;
  std::string line;

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("netlist line " + std::to_string(line_no) + ": " + msg);
  }

  bool next_line() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty()) return true;
    }
    return false;
  }

  // Digits-only index with an overflow bound; anything else is a parse error.
  uint32_t parse_index(const std::string& digits, const std::string& what) {
    if (digits.empty() || digits.size() > 9) fail("bad index in '" + what + "'");
    uint32_t v = 0;
    for (char ch : digits) {
      if (ch < '0' || ch > '9') fail("bad index in '" + what + "'");
      v = v * 10 + uint32_t(ch - '0');
    }
    return v;
  }

  // Source token: i<j> for layer 0, g<layer-1>_<k> above.
  uint32_t parse_source(const std::string& tok, size_t layer, size_t fan_in) {
    std::string want = layer == 0 ? "i" : ("g" + std::to_string(layer - 1) + "_");
    if (tok.rfind(want, 0) != 0 || tok.size() <= want.size())
      fail("source '" + tok + "' does not address the preceding layer");
    uint32_t idx = parse_index(tok.substr(want.size()), tok);
    if (idx >= fan_in) fail("source '" + tok + "' beyond fan-in " + std::to_string(fan_in));
    return idx;
  }
};

}  // namespace detail

inline HardNetwork import_netlist(std::istream& in) {
  detail::NetlistParser p{in};
  // Sane caps on header counts so a malformed file fails with a parse error
  // instead of a huge allocation; the tightest real bound is parse_index's
  // nine digits on gate references anyway.
  auto expect_kv = [&](const std::string& key, long max_value) -> long {
    if (!p.next_line()) p.fail("unexpected end of netlist");
    std::istringstream ls(p.line);
    std::string k;
    long v = -1;
    ls >> k >> v;
    if (k != key || v < 0) p.fail("expected '" + key + " <count>'");
    if (v > max_value)
      p.fail("'" + key + " " + std::to_string(v) + "' is beyond the sane bound " +
             std::to_string(max_value));
    return v;
  };
  constexpr long kMaxWires = 1L << 28;
  constexpr long kMaxClasses = 1L << 16;
  constexpr long kMaxLayers = 1L << 20;

  if (!p.next_line() || p.line != "LGN-NETLIST v1")
    throw DataError("netlist line 1: missing 'LGN-NETLIST v1' header");
  HardNetwork net;
  net.input_width = int(expect_kv("inputs", kMaxWires));
  net.n_classes = int(expect_kv("classes", kMaxClasses));
  if (net.input_width <= 0) p.fail("inputs must be positive");
  if (net.n_classes <= 0) p.fail("classes must be positive");
  long n_layers = expect_kv("layers", kMaxLayers);

  std::vector<size_t> widths;
  for (long l = 0; l < n_layers; ++l) {
    if (!p.next_line()) p.fail("unexpected end of netlist");
    std::istringstream ls(p.line);
    std::string k;
    long idx = -1, w = -1;
    ls >> k >> idx >> w;
    if (k != "width" || idx != l || w < 0) p.fail("expected 'width " + std::to_string(l) + " <n>'");
    if (w > kMaxWires)
      p.fail("'width " + std::to_string(l) + " " + std::to_string(w) +
             "' is beyond the sane bound " + std::to_string(kMaxWires));
    widths.push_back(size_t(w));
  }

  size_t fan_in = size_t(net.input_width);
  for (size_t l = 0; l < widths.size(); ++l) {
    // Grown one parsed line at a time: memory stays proportional to the
    // input actually read, whatever the declared width says.
    std::vector<HardGate> layer;
    for (size_t k = 0; k < widths[l]; ++k) {
      if (!p.next_line()) p.fail("unexpected end of netlist");
      std::istringstream ls(p.line);
      std::string name, eq, rhs;
      ls >> name >> eq;
      std::getline(ls, rhs);
      std::string want = "g" + std::to_string(l) + "_" + std::to_string(k);
      if (name != want || eq != "=") p.fail("expected gate '" + want + " = ...'");
      size_t open = rhs.find('(');
      size_t comma = rhs.find(',');
      size_t close = rhs.find(')');
      if (open == std::string::npos || comma == std::string::npos || close == std::string::npos ||
          !(open < comma && comma < close))
        p.fail("malformed gate expression '" + rhs + "'");
      auto strip = [](std::string s) {
        size_t b = s.find_first_not_of(' ');
        size_t e = s.find_last_not_of(' ');
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string op_name = strip(rhs.substr(0, open));
      int op = op_from_name(op_name);
      if (op < 0) p.fail("unknown operator '" + op_name + "'");
      HardGate gate;
      gate.op = uint8_t(op);
      gate.src_a = p.parse_source(strip(rhs.substr(open + 1, comma - open - 1)), l, fan_in);
      gate.src_b = p.parse_source(strip(rhs.substr(comma + 1, close - comma - 1)), l, fan_in);
      layer.push_back(gate);
    }
    net.layers.push_back(std::move(layer));
    fan_in = widths[l];
  }

  size_t last = widths.empty() ? 0 : widths.back();
  net.groups.resize(size_t(net.n_classes));
  for (int c = 0; c < net.n_classes; ++c) {
    if (!p.next_line()) p.fail("unexpected end of netlist");
    std::istringstream ls(p.line);
    std::string k, eq;
    long idx = -1;
    ls >> k >> idx >> eq;
    if (k != "group" || idx != c || eq != "=") p.fail("expected 'group " + std::to_string(c) + " = ...'");
    std::string tok;
    std::string member_prefix =
        widths.empty() ? "i" : ("g" + std::to_string(widths.size() - 1) + "_");
    while (ls >> tok) {
      if (tok.rfind(member_prefix, 0) != 0 || tok.size() <= member_prefix.size())
        p.fail("group member '" + tok + "' is not a last-layer gate");
      uint32_t m = p.parse_index(tok.substr(member_prefix.size()), tok);
      if (m >= last) p.fail("group member '" + tok + "' beyond last layer");
      net.groups[size_t(c)].push_back(m);
    }
  }
  net.group_offsets.assign(size_t(net.n_classes), 0);
  while (p.next_line()) {
    std::istringstream ls(p.line);
    std::string k;
    long c = -1, v = -1;
    ls >> k >> c >> v;
    if (k != "offset" || c < 0 || c >= net.n_classes || v < 0)
      p.fail("expected 'offset <class> <count>'");
    net.group_offsets[size_t(c)] = uint32_t(v);
  }
  validate_hard(net);
  return net;
}

inline HardNetwork import_netlist(const std::string& text) {
  std::istringstream ss(text);
  return import_netlist(ss);
}

// ---------------------------------------------------------------------------
// Netlist cleanup. All passes preserve predictions on every input:
//   * constant specialization: inputs known to be 0/1 are folded into the
//     consumer's operator; gates whose operator becomes FALSE/TRUE turn into
//     constant wires (and, in the last layer, into group score offsets);
//   * inverter absorption: a NOT gate flips its consumers' operators and
//     degrades to a pass-through (group members cannot flip, so the last
//     layer keeps its inverters);
//   * canonicalization: operators that ignore input a are mirrored to ignore
//     b instead, equal sources collapse the operator onto its diagonal, and
//     the remaining two-input gates order their sources ascending;
//   * duplicate gates within a layer merge (group membership may then list
//     the survivor several times to keep the popcount unchanged);
//   * unreferenced gates are removed and the layer renumbered densely.
// Pass-through gates that are still referenced are kept: wires may not skip
// layers, so they are genuine repeaters.

namespace detail {

enum class Constness : uint8_t { kUnknown, kZero, kOne };

inline bool optimize_pass(HardNetwork& net) {
  bool changed = false;
  size_t n_layers = net.layers.size();

  // Wire constness for the current fan-in front, then per layer.
  std::vector<Constness> prev_const(size_t(net.input_width), Constness::kUnknown);
  std::vector<std::vector<Constness>> wire_const(n_layers);

  for (size_t l = 0; l < n_layers; ++l) {
    auto& layer = net.layers[l];
    wire_const[l].assign(layer.size(), Constness::kUnknown);
    for (size_t k = 0; k < layer.size(); ++k) {
      HardGate& g = layer[k];
      int op = g.op;
      // Fold known sources into the operator.
      if (op_depends_on_a(op) && prev_const[g.src_a] != Constness::kUnknown) {
        op = op_restrict_a(op, prev_const[g.src_a] == Constness::kOne);
        changed = true;
      }
      if (op_depends_on_b(op) && prev_const[g.src_b] != Constness::kUnknown) {
        op = op_restrict_b(op, prev_const[g.src_b] == Constness::kOne);
        changed = true;
      }
      // Same wire on both inputs: restrict to the diagonal.
      if (g.src_a == g.src_b && op_depends_on_a(op) && op_depends_on_b(op)) {
        int diag = make_op(truth(op, false, false), truth(op, false, false),
                           truth(op, true, true), truth(op, true, true));
        if (diag != op) {
          op = diag;
          changed = true;
        }
      }
      // Prefer depending on input a; order commutative sources ascending.
      if (!op_depends_on_a(op) && op_depends_on_b(op)) {
        op = op_swap_inputs(op);
        std::swap(g.src_a, g.src_b);
        changed = true;
      }
      if (op_depends_on_a(op) && op_depends_on_b(op) && g.src_a > g.src_b &&
          op_swap_inputs(op) == op) {
        std::swap(g.src_a, g.src_b);
        changed = true;
      }
      // Unused source pins point at the used pin (or wire 0) so dead wires
      // lose their last references.
      uint32_t anchor = op_depends_on_a(op) ? g.src_a : 0;
      if (!op_depends_on_a(op) && g.src_a != anchor) {
        g.src_a = anchor;
        changed = true;
      }
      if (!op_depends_on_b(op) && g.src_b != (op_depends_on_a(op) ? g.src_a : 0)) {
        g.src_b = op_depends_on_a(op) ? g.src_a : 0;
        changed = true;
      }
      if (uint8_t(op) != g.op) {
        g.op = uint8_t(op);
        changed = true;
      }
      if (op == kOpFalse) wire_const[l][k] = Constness::kZero;
      if (op == kOpTrue) wire_const[l][k] = Constness::kOne;
    }

    // Inverter absorption: flip consumers, then downgrade to pass-through.
    if (l + 1 < n_layers) {
      std::vector<bool> absorbed(layer.size(), false);
      for (size_t k = 0; k < layer.size(); ++k)
        if (layer[k].op == kOpNotA) absorbed[k] = true;
      bool any = false;
      for (bool a : absorbed) any = any || a;
      if (any) {
        for (HardGate& c : net.layers[l + 1]) {
          if (absorbed[c.src_a] && op_depends_on_a(c.op)) c.op = uint8_t(op_negate_a(c.op));
          if (absorbed[c.src_b] && op_depends_on_b(c.op)) c.op = uint8_t(op_negate_b(c.op));
        }
        for (size_t k = 0; k < layer.size(); ++k)
          if (absorbed[k]) layer[k].op = kOpPassA;
        changed = true;
      }
    }
    prev_const = wire_const[l];
  }

  // Last layer: constant group members become score offsets.
  if (!net.layers.empty()) {
    size_t last = n_layers - 1;
    for (size_t c = 0; c < net.groups.size(); ++c) {
      std::vector<uint32_t> kept;
      for (uint32_t m : net.groups[c]) {
        if (wire_const[last][m] == Constness::kOne) {
          net.group_offsets[c] += 1;
          changed = true;
        } else if (wire_const[last][m] == Constness::kZero) {
          changed = true;  // contributes nothing; drop the member
        } else {
          kept.push_back(m);
        }
      }
      net.groups[c] = std::move(kept);
    }
  }

  // Duplicate merge: identical (op, src_a, src_b) within a layer.
  for (size_t l = 0; l < n_layers; ++l) {
    auto& layer = net.layers[l];
    std::map<std::tuple<uint8_t, uint32_t, uint32_t>, uint32_t> seen;
    std::vector<uint32_t> remap(layer.size());
    bool merged = false;
    for (size_t k = 0; k < layer.size(); ++k) {
      auto key = std::make_tuple(layer[k].op, layer[k].src_a, layer[k].src_b);
      auto [it, inserted] = seen.emplace(key, uint32_t(k));
      remap[k] = it->second;
      merged = merged || !inserted;
    }
    if (!merged) continue;
    changed = true;
    if (l + 1 < n_layers) {
      for (HardGate& c : net.layers[l + 1]) {
        c.src_a = remap[c.src_a];
        c.src_b = remap[c.src_b];
      }
    }
    if (l + 1 == n_layers)
      for (auto& members : net.groups)
        for (uint32_t& m : members) m = remap[m];
  }

  // Liveness from the outputs backwards, then dense renumbering.
  std::vector<std::vector<bool>> live(n_layers);
  for (size_t l = 0; l < n_layers; ++l) live[l].assign(net.layers[l].size(), false);
  if (!net.layers.empty())
    for (const auto& members : net.groups)
      for (uint32_t m : members) live[n_layers - 1][m] = true;
  for (size_t l = n_layers; l-- > 1;) {
    for (size_t k = 0; k < net.layers[l].size(); ++k) {
      if (!live[l][k]) continue;
      const HardGate& g = net.layers[l][k];
      if (op_depends_on_a(g.op)) live[l - 1][g.src_a] = true;
      if (op_depends_on_b(g.op)) live[l - 1][g.src_b] = true;
    }
  }
  for (size_t l = 0; l < n_layers; ++l) {
    auto& layer = net.layers[l];
    std::vector<uint32_t> remap(layer.size(), 0);
    std::vector<HardGate> kept;
    for (size_t k = 0; k < layer.size(); ++k) {
      if (!live[l][k]) continue;
      remap[k] = uint32_t(kept.size());
      kept.push_back(layer[k]);
    }
    if (kept.size() == layer.size()) continue;
    changed = true;
    layer = std::move(kept);
    if (l + 1 < n_layers) {
      for (HardGate& c : net.layers[l + 1]) {
        c.src_a = live[l][c.src_a] ? remap[c.src_a] : 0;
        c.src_b = live[l][c.src_b] ? remap[c.src_b] : 0;
      }
    }
    if (l + 1 == n_layers)
      for (auto& members : net.groups)
        for (uint32_t& m : members) m = remap[m];
  }
  return changed;
}

}  // namespace detail

inline HardNetwork optimize_netlist(const HardNetwork& input) {
  HardNetwork net = input;
  validate_hard(net);
  // Each pass strictly shrinks or canonicalizes; the guard only protects
  // against a cycle slipping into the rewrite rules.
  for (int iter = 0; iter < 64; ++iter)
    if (!detail::optimize_pass(net)) break;
  validate_hard(net);
  return net;
}

}  // namespace lgn
