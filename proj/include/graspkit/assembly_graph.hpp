#pragma once

#include <array>
#include <cctype>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graspkit/common.hpp"
#include "graspkit/rigid_transform.hpp"

namespace graspkit {

/// Assembly file problem; `line()` is 1-based, 0 when not tied to a line.
class AssemblyError : public Error {
 public:
  AssemblyError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Linear expression `c + sum(b_k * param_k)` over part parameters.
struct LinearExpr {
  double constant = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  std::string source;

  double eval(const std::map<std::string, double>& params) const {
    double v = constant;
    for (const auto& [name, coef] : terms) v += coef * params.at(name);
    return v;
  }

  /// Accepts e.g. `0.002+1*hole_offset`, `-0.5*thickness`, `width*0.5-0.001`.
  static LinearExpr parse(const std::string& text) {
    LinearExpr e;
    e.source = text;
    std::size_t pos = 0;
    auto fail = [&] { throw FormatError("malformed expression '" + text + "'"); };
    if (text.empty()) fail();
    while (pos < text.size()) {
      double sign = 1.0;
      if (text[pos] == '+' || text[pos] == '-') {
        sign = text[pos] == '-' ? -1.0 : 1.0;
        ++pos;
      } else if (pos != 0) {
        fail();
      }
      const std::size_t end = text.find_first_of("+-", pos + 1);
      std::string term = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      // keep exponents like 1e-3 inside the term
      std::size_t stop = end;
      while (stop != std::string::npos && stop > 0 && (text[stop - 1] == 'e' || text[stop - 1] == 'E') &&
             stop >= 2 && std::isdigit(static_cast<unsigned char>(text[stop - 2]))) {
        stop = text.find_first_of("+-", stop + 1);
        term = text.substr(pos, stop == std::string::npos ? std::string::npos : stop - pos);
      }
      if (term.empty()) fail();
      double coef = sign;
      std::string ident;
      std::istringstream parts(term);
      std::string factor;
      while (std::getline(parts, factor, '*')) {
        if (factor.empty()) fail();
        if (std::isalpha(static_cast<unsigned char>(factor[0])) || factor[0] == '_') {
          if (!ident.empty()) fail();  // products of parameters are not linear
          for (char ch : factor)
            if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) fail();
          ident = factor;
        } else {
          try {
            std::size_t used = 0;
            coef *= std::stod(factor, &used);
            if (used != factor.size()) fail();
          } catch (const std::invalid_argument&) {
            fail();
          }
        }
      }
      if (ident.empty()) e.constant += coef;
      else e.terms.emplace_back(ident, coef);
      pos = stop == std::string::npos ? text.size() : stop;
    }
    return e;
  }
};

enum class FrameKind { World, PartMain, Subframe };

struct Frame {
  std::string name;
  std::optional<std::string> parent;
  RigidTransform local_transform;  // parent <- this
  FrameKind kind = FrameKind::Subframe;
};

struct SubframeDef {
  std::string part;
  std::string name;
  RigidTransform base;
  std::array<std::optional<LinearExpr>, 3> translation_expr;  // tx, ty, tz overrides
  int line = 0;

  RigidTransform evaluate(const std::map<std::string, double>& params) const {
    Eigen::Vector3d t = base.translation();
    for (int i = 0; i < 3; ++i)
      if (translation_expr[i]) t(i) = translation_expr[i]->eval(params);
    return {base.rotation(), t};
  }

  std::set<std::string> parameters() const {
    std::set<std::string> s;
    for (const auto& e : translation_expr)
      if (e)
        for (const auto& [name, coef] : e->terms) s.insert(name);
    return s;
  }
};

struct PartDef {
  std::string name;
  std::map<std::string, double> params;
  int line = 0;
};

/// `frame_b` is placed relative to `frame_a`: resolve(frame_a, frame_b) == transform.
struct MateDef {
  std::string frame_a;
  std::string frame_b;
  RigidTransform transform;
  int line = 0;
};

struct AssemblyDefinition {
  std::vector<PartDef> parts;
  std::vector<SubframeDef> subframes;
  std::vector<MateDef> mates;
};

inline constexpr const char* kWorldFrame = "world";

/// Strict frame tree built from an assembly definition.
///
/// Each part owns a main frame (named like the part) and subframes attached
/// to it. Mates written between subframes are stored as edges between the
/// owning main frames, composed from the subframe offsets, so the tree only
/// ever links main frames to each other or to the world.
class AssemblyGraph {
 public:
  static AssemblyGraph build(AssemblyDefinition def) {
    AssemblyGraph g;
    g.def_ = std::move(def);
    g.frames_[kWorldFrame] = Frame{kWorldFrame, std::nullopt, RigidTransform::identity(), FrameKind::World};

    auto add_frame = [&](Frame f, int line) {
      if (g.frames_.count(f.name)) throw AssemblyError(line, "duplicate frame name '" + f.name + "'");
      g.frames_[f.name] = std::move(f);
    };
    for (const auto& p : g.def_.parts) {
      add_frame(Frame{p.name, std::string(kWorldFrame), RigidTransform::identity(), FrameKind::PartMain}, p.line);
      g.owner_[p.name] = p.name;
    }
    for (const auto& s : g.def_.subframes) {
      const PartDef* part = g.find_part_def(s.part);
      if (!part) throw AssemblyError(s.line, "frame refers to undefined part '" + s.part + "'");
      for (const auto& name : s.parameters())
        if (!part->params.count(name))
          throw AssemblyError(s.line, "missing parameter '" + name + "' for part '" + s.part + "'");
      add_frame(Frame{s.name, s.part, s.evaluate(part->params), FrameKind::Subframe}, s.line);
      g.owner_[s.name] = s.part;
    }

    std::set<std::string> mated_children;
    for (const auto& m : g.def_.mates) {
      for (const auto* name : {&m.frame_a, &m.frame_b})
        if (!g.frames_.count(*name)) throw AssemblyError(m.line, "undefined frame '" + *name + "'");
      if (m.frame_b == kWorldFrame) throw AssemblyError(m.line, "the world frame cannot be mated as a child");
      const std::string parent_part = m.frame_a == kWorldFrame ? std::string(kWorldFrame) : g.owner_.at(m.frame_a);
      const std::string child_part = g.owner_.at(m.frame_b);
      if (parent_part == child_part) throw AssemblyError(m.line, "cycle: part '" + child_part + "' mated to itself");
      if (!mated_children.insert(child_part).second)
        throw AssemblyError(m.line, "multiple parents for part '" + child_part + "'");
      const RigidTransform parent_offset = g.offset_in_owner(m.frame_a);
      const RigidTransform child_offset = g.offset_in_owner(m.frame_b);
      Frame& child = g.frames_.at(child_part);
      child.parent = parent_part;
      child.local_transform = parent_offset * m.transform * child_offset.inverse();
      g.mate_line_[child_part] = m.line;
    }

    // every main frame must reach the world
    for (const auto& p : g.def_.parts) {
      std::set<std::string> seen;
      std::string cur = p.name;
      while (cur != kWorldFrame) {
        if (!seen.insert(cur).second)
          throw AssemblyError(g.mate_line_.count(cur) ? g.mate_line_.at(cur) : 0,
                              "cycle among mates involving part '" + cur + "'");
        cur = *g.frames_.at(cur).parent;
      }
    }
    return g;
  }

  const std::map<std::string, Frame>& frames() const { return frames_; }
  const AssemblyDefinition& definition() const { return def_; }
  bool has_frame(const std::string& name) const { return frames_.count(name) != 0; }

  const Frame& frame(const std::string& name) const {
    auto it = frames_.find(name);
    if (it == frames_.end()) throw AssemblyError(0, "unknown frame '" + name + "'");
    return it->second;
  }

  /// Part that owns a frame; the world frame owns itself.
  const std::string& owner(const std::string& frame_name) const {
    static const std::string world = kWorldFrame;
    if (frame_name == kWorldFrame) return world;
    return owner_.at(frame_name);
  }

  std::vector<std::string> ancestors(const std::string& name) const {
    std::vector<std::string> chain{name};
    const Frame* f = &frame(name);
    while (f->parent) {
      chain.push_back(*f->parent);
      f = &frame(*f->parent);
    }
    return chain;
  }

  /// Transform mapping coordinates in `to` into `from`, composed through the
  /// lowest common ancestor.
  RigidTransform resolve(const std::string& from, const std::string& to) const {
    const auto up_from = ancestors(from);
    const auto up_to = ancestors(to);
    if (from == to) return RigidTransform::identity();
    std::set<std::string> from_set(up_from.begin(), up_from.end());
    std::string lca;
    for (const auto& n : up_to)
      if (from_set.count(n)) {
        lca = n;
        break;
      }
    auto chain_to_lca = [&](const std::vector<std::string>& chain) {
      RigidTransform t = RigidTransform::identity();  // lca <- frame
      for (const auto& n : chain) {
        if (n == lca) break;
        t = frame(n).local_transform * t;
      }
      return t;
    };
    return chain_to_lca(up_from).inverse() * chain_to_lca(up_to);
  }

  /// Parent edge count; a tree over N frames has N - 1.
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [name, f] : frames_) n += f.parent.has_value();
    return n;
  }

 private:
  const PartDef* find_part_def(const std::string& name) const {
    for (const auto& p : def_.parts)
      if (p.name == name) return &p;
    return nullptr;
  }

  RigidTransform offset_in_owner(const std::string& frame_name) const {
    const Frame& f = frames_.at(frame_name);
    return f.kind == FrameKind::Subframe ? f.local_transform : RigidTransform::identity();
  }

  AssemblyDefinition def_;
  std::map<std::string, Frame> frames_;
  std::map<std::string, std::string> owner_;
  std::map<std::string, int> mate_line_;
};

inline RigidTransform resolve(const AssemblyGraph& g, const std::string& from, const std::string& to) {
  return g.resolve(from, to);
}

namespace detail {

inline bool read_pose(std::istringstream& ls, RigidTransform& out) {
  std::array<double, 7> v{};
  for (auto& x : v)
    if (!(ls >> x)) return false;
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
  if (!(n > 1e-12) || !std::isfinite(n)) return false;
  out = RigidTransform::from_tuple(v);
  return true;
}

inline bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

inline std::pair<std::string, std::string> split_assignment(const std::string& tok, int line) {
  const auto eq = tok.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
    throw AssemblyError(line, "expected key=value, got '" + tok + "'");
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

}  // namespace detail

/// Parses the line-oriented assembly format:
///
///     part <name> [param=value ...]
///     frame <part> <frame_name> <qw qx qy qz tx ty tz> [tx=expr] [ty=expr] [tz=expr]
///     mate <frame_a> <frame_b> <qw qx qy qz tx ty tz>
///
/// `#` starts a comment. Parts must be declared before their frames.
inline AssemblyDefinition parse_assembly_definition(const std::string& text) {
  AssemblyDefinition def;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::set<std::string> part_names;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "part") {
      PartDef p;
      p.line = line;
      if (!(ls >> p.name) || !detail::valid_name(p.name)) throw AssemblyError(line, "malformed part line");
      std::string tok;
      while (ls >> tok) {
        auto [key, value] = detail::split_assignment(tok, line);
        try {
          std::size_t used = 0;
          p.params[key] = std::stod(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
          throw AssemblyError(line, "parameter '" + key + "' is not a number");
        }
      }
      part_names.insert(p.name);
      def.parts.push_back(std::move(p));
    } else if (kind == "frame") {
      SubframeDef s;
      s.line = line;
      if (!(ls >> s.part >> s.name) || !detail::valid_name(s.name) || !detail::read_pose(ls, s.base))
        throw AssemblyError(line, "malformed frame line");
      if (!part_names.count(s.part)) throw AssemblyError(line, "frame refers to undefined part '" + s.part + "'");
      std::string tok;
      while (ls >> tok) {
        auto [key, value] = detail::split_assignment(tok, line);
        const int axis = key == "tx" ? 0 : key == "ty" ? 1 : key == "tz" ? 2 : -1;
        if (axis < 0) throw AssemblyError(line, "unknown frame expression key '" + key + "'");
        try {
          s.translation_expr[axis] = LinearExpr::parse(value);
        } catch (const FormatError& e) {
          throw AssemblyError(line, e.what());
        }
      }
      def.subframes.push_back(std::move(s));
    } else if (kind == "mate") {
      MateDef m;
      m.line = line;
      std::string extra;
      if (!(ls >> m.frame_a >> m.frame_b) || !detail::read_pose(ls, m.transform) || (ls >> extra))
        throw AssemblyError(line, "malformed mate line");
      def.mates.push_back(std::move(m));
    } else {
      throw AssemblyError(line, "unknown record '" + kind + "'");
    }
  }
  return def;
}

inline AssemblyGraph parse_assembly(const std::string& text) {
  return AssemblyGraph::build(parse_assembly_definition(text));
}

/// Replaces a part's parameters and rebuilds the tree. Every parameter used
/// by the part's frame expressions must be present in `new_params`.
inline AssemblyGraph swap_part(const AssemblyGraph& g, const std::string& part,
                               const std::map<std::string, double>& new_params) {
  AssemblyDefinition def = g.definition();
  PartDef* target = nullptr;
  for (auto& p : def.parts)
    if (p.name == part) target = &p;
  if (!target) throw AssemblyError(0, "unknown part '" + part + "'");
  for (const auto& s : def.subframes)
    if (s.part == part)
      for (const auto& name : s.parameters())
        if (!new_params.count(name))
          throw AssemblyError(0, "missing parameter '" + name + "' for part '" + part + "'");
  target->params = new_params;
  return AssemblyGraph::build(std::move(def));
}

inline std::string format_assembly(const AssemblyDefinition& def) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : def.parts) {
    os << "part " << p.name;
    for (const auto& [k, v] : p.params) os << ' ' << k << '=' << v;
    os << '\n';
  }
  static const char* keys[3] = {"tx", "ty", "tz"};
  for (const auto& s : def.subframes) {
    os << "frame " << s.part << ' ' << s.name << ' ' << format_pose(s.base);
    for (int i = 0; i < 3; ++i)
      if (s.translation_expr[i]) os << ' ' << keys[i] << '=' << s.translation_expr[i]->source;
    os << '\n';
  }
  for (const auto& m : def.mates) os << "mate " << m.frame_a << ' ' << m.frame_b << ' ' << format_pose(m.transform) << '\n';
  return os.str();
}

}  // namespace graspkit
