#include "icmsim/model_spec.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace icmsim {

std::string_view to_string(ConstructKind kind) {
  switch (kind) {
    case ConstructKind::LatentVariable: return "latent";
    case ConstructKind::CausalFormative: return "causal_formative";
    case ConstructKind::Composite: return "composite";
  }
  return "?";
}

std::string_view to_string(Position position) {
  return position == Position::Exogenous ? "exogenous" : "endogenous";
}

std::string_view to_string(Estimator estimator) {
  return estimator == Estimator::Ml ? "ml" : "pls";
}

ConstructKind parse_construct_kind(std::string_view text) {
  if (text == "latent" || text == "latent_variable" || text == "LatentVariable" || text == "lv")
    return ConstructKind::LatentVariable;
  if (text == "causal_formative" || text == "formative" || text == "CausalFormative" || text == "cf")
    return ConstructKind::CausalFormative;
  if (text == "composite" || text == "Composite" || text == "co") return ConstructKind::Composite;
  throw std::invalid_argument("unknown construct kind '" + std::string(text) + "'");
}

Position parse_position(std::string_view text) {
  if (text == "exogenous" || text == "exo") return Position::Exogenous;
  if (text == "endogenous" || text == "endo") return Position::Endogenous;
  throw std::invalid_argument("unknown position '" + std::string(text) + "'");
}

Estimator parse_estimator(std::string_view text) {
  if (text == "ml") return Estimator::Ml;
  if (text == "pls") return Estimator::Pls;
  throw std::invalid_argument("unknown estimator '" + std::string(text) + "'");
}

std::string_view to_string(MatrixId id) {
  switch (id) {
    case MatrixId::Lambda: return "Lambda";
    case MatrixId::Beta: return "B";
    case MatrixId::Psi: return "Psi";
    case MatrixId::Theta: return "Theta";
    case MatrixId::Gamma: return "Gamma";
  }
  return "?";
}

MatrixId parse_matrix_id(std::string_view text) {
  if (text == "Lambda") return MatrixId::Lambda;
  if (text == "B" || text == "Beta") return MatrixId::Beta;
  if (text == "Psi") return MatrixId::Psi;
  if (text == "Theta") return MatrixId::Theta;
  if (text == "Gamma") return MatrixId::Gamma;
  throw std::invalid_argument("unknown matrix id '" + std::string(text) + "'");
}

const ConstructDecl* ModelSpec::find(std::string_view name) const {
  auto it = std::find_if(constructs.begin(), constructs.end(),
                         [&](const ConstructDecl& c) { return c.name == name; });
  return it == constructs.end() ? nullptr : &*it;
}

const std::vector<std::string>& ModelSpec::block(std::string_view construct) const {
  static const std::vector<std::string> empty;
  auto it = indicators.find(std::string(construct));
  return it == indicators.end() ? empty : it->second;
}

std::vector<std::string> ModelSpec::indicator_order() const {
  std::vector<std::string> out;
  for (const auto& c : constructs) {
    const auto& b = block(c.name);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

Index ModelSpec::num_indicators() const { return static_cast<Index>(indicator_order().size()); }

std::vector<std::string> topological_order(const ModelSpec& spec) {
  const std::size_t m = spec.constructs.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m; ++i) index[spec.constructs[i].name] = i;
  std::vector<int> indegree(m, 0);
  for (const auto& p : spec.paths) {
    if (!index.contains(p.source) || !index.contains(p.target))
      throw SpecError("path " + p.source + " -> " + p.target + " references an unknown construct");
    ++indegree[index[p.target]];
  }
  std::vector<std::string> order;
  std::vector<bool> placed(m, false);
  // Kahn's algorithm, always taking the earliest declared ready construct.
  while (order.size() < m) {
    bool progressed = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (placed[i] || indegree[i] != 0) continue;
      placed[i] = true;
      order.push_back(spec.constructs[i].name);
      for (const auto& p : spec.paths)
        if (p.source == spec.constructs[i].name) --indegree[index[p.target]];
      progressed = true;
      break;
    }
    if (!progressed) throw SpecError("structural graph contains a cycle");
  }
  return order;
}

std::vector<Constraint> scaling_constraints(const ModelSpec& spec, std::string_view construct) {
  std::vector<Constraint> out;
  const auto& blk = spec.block(construct);
  for (const auto& c : spec.constraints) {
    switch (c.matrix) {
      case MatrixId::Lambda:
        if (c.col == construct) out.push_back(c);
        break;
      case MatrixId::Psi:
        if (c.row == construct && c.col == construct) out.push_back(c);
        break;
      case MatrixId::Gamma:
        if (c.row == construct) out.push_back(c);
        break;
      case MatrixId::Beta:
        // A fixed incoming weight scales an indicator-less (augmented formative) construct.
        if (c.row == construct && blk.empty()) out.push_back(c);
        break;
      case MatrixId::Theta:
        break;
    }
  }
  return out;
}

void validate(const ModelSpec& spec) {
  if (spec.constructs.empty()) throw SpecError("model has no constructs");
  std::set<std::string> names;
  for (const auto& c : spec.constructs) {
    if (c.name.empty()) throw SpecError("construct with empty name");
    if (!names.insert(c.name).second) throw SpecError("duplicate construct '" + c.name + "'");
  }
  for (const auto& [name, blk] : spec.indicators)
    if (!names.contains(name)) throw SpecError("indicator block for unknown construct '" + name + "'");

  std::set<std::string> seen_indicators;
  for (const auto& c : spec.constructs) {
    for (const auto& x : spec.block(c.name)) {
      if (x.empty()) throw SpecError("empty indicator name in block of '" + c.name + "'");
      if (!seen_indicators.insert(x).second)
        throw SpecError("indicator '" + x + "' belongs to more than one block");
    }
  }

  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& p : spec.paths) {
    if (!names.contains(p.source) || !names.contains(p.target))
      throw SpecError("path " + p.source + " -> " + p.target + " references an unknown construct");
    if (p.source == p.target) throw SpecError("self-loop on '" + p.source + "'");
    if (!edges.insert({p.source, p.target}).second)
      throw SpecError("duplicate path " + p.source + " -> " + p.target);
  }
  (void)topological_order(spec);

  for (const auto& c : spec.constructs) {
    const bool has_incoming = std::any_of(spec.paths.begin(), spec.paths.end(),
                                          [&](const StructuralPath& p) { return p.target == c.name; });
    if (c.exogenous == has_incoming)
      throw SpecError("exogenous flag of '" + c.name + "' disagrees with its incoming paths");
    const auto& blk = spec.block(c.name);
    if (blk.empty()) {
      // Only augmented formative constructs (endogenous latents fed by weights) may lack indicators.
      if (c.kind != ConstructKind::LatentVariable || c.exogenous)
        throw SpecError("construct '" + c.name + "' has no indicators");
    }
    const auto scaling = scaling_constraints(spec, c.name);
    if (scaling.size() != 1)
      throw SpecError("construct '" + c.name + "' needs exactly one scaling constraint, found " +
                      std::to_string(scaling.size()));
    if (c.kind == ConstructKind::CausalFormative && scaling.front().matrix != MatrixId::Gamma)
      throw SpecError("causal-formative construct '" + c.name + "' must be scaled by a fixed weight");
  }

  std::set<std::tuple<MatrixId, std::string, std::string>> cells;
  for (const auto& k : spec.constraints) {
    if (!std::isfinite(k.value)) throw SpecError("non-finite constraint value");
    auto key = std::make_tuple(k.matrix, k.row, k.col);
    if ((k.matrix == MatrixId::Psi || k.matrix == MatrixId::Theta) && k.row < k.col)
      key = std::make_tuple(k.matrix, k.col, k.row);
    if (!cells.insert(key).second)
      throw SpecError("duplicate constraint on " + std::string(to_string(k.matrix)) + "(" + k.row +
                      ", " + k.col + ")");
    switch (k.matrix) {
      case MatrixId::Lambda:
        if (!seen_indicators.contains(k.row) || !names.contains(k.col))
          throw SpecError("Lambda constraint on unknown cell");
        if (std::find(spec.block(k.col).begin(), spec.block(k.col).end(), k.row) ==
            spec.block(k.col).end())
          throw SpecError("Lambda constraint outside the block of '" + k.col + "'");
        break;
      case MatrixId::Theta:
        if (!seen_indicators.contains(k.row) || !seen_indicators.contains(k.col))
          throw SpecError("Theta constraint on unknown indicator");
        break;
      case MatrixId::Psi:
        if (!names.contains(k.row) || !names.contains(k.col))
          throw SpecError("Psi constraint on unknown construct");
        break;
      case MatrixId::Beta:
        if (!edges.contains({k.col, k.row})) throw SpecError("B constraint on a missing path");
        break;
      case MatrixId::Gamma: {
        const auto* c = spec.find(k.row);
        if (c == nullptr || c->kind != ConstructKind::CausalFormative)
          throw SpecError("Gamma constraint on a non-formative construct");
        const auto& blk = spec.block(k.row);
        if (std::find(blk.begin(), blk.end(), k.col) == blk.end())
          throw SpecError("Gamma constraint on an indicator outside the block");
        break;
      }
    }
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json constructs = nlohmann::json::array();
  for (const auto& c : spec.constructs)
    constructs.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"exogenous", c.exogenous}});
  nlohmann::json indicators = nlohmann::json::object();
  for (const auto& [name, blk] : spec.indicators) indicators[name] = blk;
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : spec.paths) paths.push_back({{"from", p.source}, {"to", p.target}});
  nlohmann::json constraints = nlohmann::json::array();
  for (const auto& k : spec.constraints)
    constraints.push_back(
        {{"matrix", to_string(k.matrix)}, {"row", k.row}, {"col", k.col}, {"value", k.value}});
  return {{"constructs", constructs}, {"indicators", indicators}, {"paths", paths},
          {"constraints", constraints}};
}

ModelSpec model_spec_from_json(const nlohmann::json& doc) {
  ModelSpec spec;
  for (const auto& c : doc.at("constructs"))
    spec.constructs.push_back({c.at("name").get<std::string>(),
                               parse_construct_kind(c.at("kind").get<std::string>()),
                               c.at("exogenous").get<bool>()});
  for (const auto& [name, blk] : doc.at("indicators").items())
    spec.indicators[name] = blk.get<std::vector<std::string>>();
  for (const auto& p : doc.at("paths"))
    spec.paths.push_back({p.at("from").get<std::string>(), p.at("to").get<std::string>()});
  for (const auto& k : doc.at("constraints"))
    spec.constraints.push_back({parse_matrix_id(k.at("matrix").get<std::string>()),
                                k.at("row").get<std::string>(), k.at("col").get<std::string>(),
                                k.at("value").get<double>()});
  return spec;
}

}  // namespace icmsim
