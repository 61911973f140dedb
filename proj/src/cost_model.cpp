#include "tgs/cost_model.hpp"

#include <array>
#include <utility>

namespace tgs {

namespace {

constexpr std::array<std::pair<IndexKind, std::string_view>, 6> kIndexNames{{
    {IndexKind::kLog, "log"},
    {IndexKind::kCopy, "copy"},
    {IndexKind::kCopyLog, "copy-log"},
    {IndexKind::kNodeCentric, "node-centric"},
    {IndexKind::kDeltaGraph, "deltagraph"},
    {IndexKind::kTgi, "tgi"},
}};

constexpr std::array<std::pair<Primitive, std::string_view>, 5> kPrimitiveNames{{
    {Primitive::kSnapshot, "snapshot"},
    {Primitive::kStaticVertex, "static-vertex"},
    {Primitive::kVertexVersions, "vertex-versions"},
    {Primitive::kOneHop, "one-hop"},
    {Primitive::kOneHopVersions, "one-hop-versions"},
}};

}  // namespace

std::string_view to_string(IndexKind k) {
  for (const auto& [kind, name] : kIndexNames) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<IndexKind> parse_index_kind(std::string_view s) {
  for (const auto& [kind, name] : kIndexNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Primitive p) {
  for (const auto& [prim, name] : kPrimitiveNames) {
    if (prim == p) return name;
  }
  return "?";
}

std::optional<Primitive> parse_primitive(std::string_view s) {
  for (const auto& [prim, name] : kPrimitiveNames) {
    if (name == s) return prim;
  }
  return std::nullopt;
}

Cost estimate_cost(IndexKind index, Primitive prim, const CostParams& c) {
  const double G = c.G, S = c.S, E = c.E, h = c.h, V = c.V, R = c.R, p = c.p, N = c.N,
               C = c.C;
  switch (index) {
    case IndexKind::kLog:
      return {G, G / E};
    case IndexKind::kCopy:
      switch (prim) {
        case Primitive::kVertexVersions:
        case Primitive::kOneHopVersions:
          return {S * G, G};
        default:
          return {S, 1};
      }
    case IndexKind::kCopyLog:
      switch (prim) {
        case Primitive::kVertexVersions:
        case Primitive::kOneHopVersions:
          return {G, G / E};
        default:
          return {S + E, 2};
      }
    case IndexKind::kNodeCentric:
      switch (prim) {
        case Primitive::kSnapshot:
          return {2 * G, N};
        case Primitive::kStaticVertex:
        case Primitive::kVertexVersions:
          return {C, 1};
        case Primitive::kOneHop:
        case Primitive::kOneHopVersions:
          return {R * V, R};
      }
      break;
    case IndexKind::kDeltaGraph:
      switch (prim) {
        case Primitive::kSnapshot:
        case Primitive::kStaticVertex:
          return {h * S + E, 2 * h};
        case Primitive::kOneHop:
          return {h * (S + E), 2 * h};
        case Primitive::kVertexVersions:
        case Primitive::kOneHopVersions:
          return {G, G / E};
      }
      break;
    case IndexKind::kTgi:
      switch (prim) {
        case Primitive::kSnapshot:
          return {h * S + E, 2 * h};
        case Primitive::kStaticVertex:
          return {h * S / p + E / p, 2 * h};
        case Primitive::kOneHop:
          return {h * (S + E) / p, 2 * h};
        case Primitive::kVertexVersions:
        case Primitive::kOneHopVersions:
          return {V * (1 + S / p), V + 1};
      }
      break;
  }
  return {};
}

double estimate_storage(IndexKind index, const CostParams& c) {
  switch (index) {
    case IndexKind::kLog:
      return c.G;
    case IndexKind::kCopy:
      return c.G * c.G;
    case IndexKind::kCopyLog:
      return c.G * c.G / c.E;
    case IndexKind::kNodeCentric:
      return 2 * c.G;
    case IndexKind::kDeltaGraph:
      return c.G * (c.h + 1);
    case IndexKind::kTgi:
      return c.G * (2 * c.h + 3);
  }
  return 0;
}

}  // namespace tgs
