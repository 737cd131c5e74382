#include "icmsim/model.hpp"

#include "icmsim/linalg.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace icmsim {

namespace {

constexpr double kStartLoading = 0.7;
constexpr double kStartErrorVariance = 0.5;
constexpr double kStartVariance = 0.5;

bool has_constraint(const ModelSpec& spec, MatrixId id, std::string_view row, std::string_view col) {
  return std::any_of(spec.constraints.begin(), spec.constraints.end(), [&](const Constraint& k) {
    if (k.matrix != id) return false;
    if (k.row == row && k.col == col) return true;
    return (id == MatrixId::Psi || id == MatrixId::Theta) && k.row == col && k.col == row;
  });
}

}  // namespace

ModelSpec augment_causal_formative(const ModelSpec& spec) {
  const bool any = std::any_of(spec.constructs.begin(), spec.constructs.end(), [](const auto& c) {
    return c.kind == ConstructKind::CausalFormative;
  });
  if (!any) return spec;

  ModelSpec out;
  out.paths = spec.paths;
  for (const auto& c : spec.constructs) {
    if (c.kind != ConstructKind::CausalFormative) {
      out.constructs.push_back(c);
      if (!spec.block(c.name).empty()) out.indicators[c.name] = spec.block(c.name);
      continue;
    }
    for (const auto& x : spec.block(c.name)) {
      const std::string xi = perfect_latent_name(x);
      out.constructs.push_back({xi, ConstructKind::LatentVariable, true});
      out.indicators[xi] = {x};
      out.constraints.push_back({MatrixId::Lambda, x, xi, 1.0});
      out.constraints.push_back({MatrixId::Theta, x, x, 0.0});
      out.paths.push_back({xi, c.name});
    }
    out.constructs.push_back({c.name, ConstructKind::LatentVariable, false});
  }
  for (const auto& k : spec.constraints) {
    if (k.matrix == MatrixId::Gamma)
      out.constraints.push_back({MatrixId::Beta, k.row, perfect_latent_name(k.col), k.value});
    else
      out.constraints.push_back(k);
  }
  return out;
}

std::vector<Index> Model::latent_blocks() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < constructs.size(); ++i) {
    const auto& c = constructs[i];
    if (c.role == ConstructRole::Regular && c.kind == ConstructKind::LatentVariable &&
        !spec.block(c.name).empty())
      out.push_back(static_cast<Index>(i));
  }
  return out;
}

Model compile(const ModelSpec& spec) {
  validate(spec);
  Model model;
  model.spec = spec;
  model.augmented = augment_causal_formative(spec);
  validate(model.augmented);
  const ModelSpec& aug = model.augmented;

  std::map<std::string, ConstructKind> declared_kind;
  for (const auto& c : spec.constructs) declared_kind[c.name] = c.kind;

  // Table construct order: topological, with excrescent variables right after their composite.
  for (const auto& name : topological_order(aug)) {
    const ConstructDecl& decl = *aug.find(name);
    CompiledConstruct cc{name, decl.kind, ConstructRole::Regular, decl.exogenous, name};
    if (declared_kind.contains(name)) {
      cc.kind = declared_kind[name];
      if (cc.kind == ConstructKind::CausalFormative) cc.role = ConstructRole::FormativeHub;
    } else {
      cc.role = ConstructRole::Perfect;
      cc.kind = ConstructKind::CausalFormative;
      const auto x = aug.block(name).front();
      for (const auto& f : spec.constructs)
        for (const auto& y : spec.block(f.name))
          if (y == x) cc.owner = f.name;
    }
    model.constructs.push_back(cc);
    if (cc.kind == ConstructKind::Composite && cc.role == ConstructRole::Regular) {
      const Index k = static_cast<Index>(aug.block(name).size());
      for (Index j = 1; j < k; ++j)
        model.constructs.push_back(
            {excrescent_name(name, j), ConstructKind::Composite, ConstructRole::Excrescent, true, name});
    }
  }

  ParamTableD& t = model.table;
  t.indicators = spec.indicator_order();
  for (const auto& c : model.constructs) t.constructs.push_back(c.name);
  const Index p = static_cast<Index>(t.indicators.size());
  const Index m = static_cast<Index>(t.constructs.size());
  t.lambda = MatrixXd::Zero(p, m);
  t.beta = MatrixXd::Zero(m, m);
  t.psi = MatrixXd::Zero(m, m);
  t.theta = MatrixXd::Zero(p, p);

  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
  Mask lf = Mask::Constant(p, m, false), bf = Mask::Constant(m, m, false),
       pf = Mask::Constant(m, m, false), tf = Mask::Constant(p, p, false);

  for (Index ci = 0; ci < m; ++ci) {
    const auto& c = model.constructs[static_cast<std::size_t>(ci)];
    if (c.role == ConstructRole::Excrescent) continue;
    const auto& blk = aug.block(c.name);
    if (c.kind == ConstructKind::Composite) {
      const Index k = static_cast<Index>(blk.size());
      CompositeScaling scaling = CompositeScaling::Variance;
      const auto sc = scaling_constraints(aug, c.name);
      if (!sc.empty() && sc.front().matrix == MatrixId::Lambda) scaling = CompositeScaling::FirstLoading;
      const HospecBlock hb = build_hospec(k, scaling);
      CompositeBinding binding{ci, {}, {}, scaling};
      for (const auto& x : blk) binding.indicators.push_back(t.indicator_index(x));
      for (Index j = 1; j < k; ++j) binding.excrescent.push_back(ci + j);
      std::vector<Index> cols{ci};
      cols.insert(cols.end(), binding.excrescent.begin(), binding.excrescent.end());
      for (Index r = 0; r < k; ++r)
        for (Index cc = 0; cc < k; ++cc) {
          const Index row = binding.indicators[static_cast<std::size_t>(r)];
          const Index col = cols[static_cast<std::size_t>(cc)];
          t.lambda(row, col) = hb.lambda(r, cc);
          lf(row, col) = hb.lambda_free(r, cc);
        }
      for (Index r = 0; r < k; ++r)
        for (Index cc = 0; cc <= r; ++cc) {
          const Index row = cols[static_cast<std::size_t>(r)];
          const Index col = cols[static_cast<std::size_t>(cc)];
          t.psi(row, col) = t.psi(col, row) = hb.psi(r, cc);
          pf(std::max(row, col), std::min(row, col)) = hb.psi_free(r, cc);
        }
      // The declared loading constraint (not necessarily on the first indicator) fixes the scale.
      if (scaling == CompositeScaling::FirstLoading) lf(binding.indicators.front(), ci) = true;
      model.composites.push_back(std::move(binding));
    } else {
      for (const auto& x : blk) {
        const Index xi = t.indicator_index(x);
        t.lambda(xi, ci) = kStartLoading;
        lf(xi, ci) = true;
        t.theta(xi, xi) = kStartErrorVariance;
        tf(xi, xi) = true;
      }
      t.psi(ci, ci) = kStartVariance;
      pf(ci, ci) = true;
    }
  }

  // Exogenous constructs covary freely; excrescent variables only within their block.
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < a; ++b) {
      const auto& ca = model.constructs[static_cast<std::size_t>(a)];
      const auto& cb = model.constructs[static_cast<std::size_t>(b)];
      if (!ca.exogenous || !cb.exogenous) continue;
      const bool exa = ca.role == ConstructRole::Excrescent, exb = cb.role == ConstructRole::Excrescent;
      if (exa || exb) continue;  // handled by the block pattern
      pf(a, b) = true;
    }

  for (const auto& path : aug.paths) {
    const Index s = t.construct_index(path.source), r = t.construct_index(path.target);
    bf(r, s) = true;
  }

  for (const auto& k : aug.constraints) {
    switch (k.matrix) {
      case MatrixId::Lambda: {
        const Index r = t.indicator_index(k.row), c = t.construct_index(k.col);
        t.lambda(r, c) = k.value;
        lf(r, c) = false;
        break;
      }
      case MatrixId::Beta: {
        const Index r = t.construct_index(k.row), c = t.construct_index(k.col);
        t.beta(r, c) = k.value;
        bf(r, c) = false;
        break;
      }
      case MatrixId::Psi: {
        const Index r = t.construct_index(k.row), c = t.construct_index(k.col);
        t.psi(r, c) = t.psi(c, r) = k.value;
        pf(std::max(r, c), std::min(r, c)) = false;
        break;
      }
      case MatrixId::Theta: {
        const Index r = t.indicator_index(k.row), c = t.indicator_index(k.col);
        t.theta(r, c) = t.theta(c, r) = k.value;
        tf(std::max(r, c), std::min(r, c)) = false;
        break;
      }
      case MatrixId::Gamma:
        break;
    }
  }

  for (Index c = 0; c < m; ++c)
    for (Index r = 0; r < p; ++r)
      if (lf(r, c)) t.free.push_back({MatrixId::Lambda, r, c});
  for (Index c = 0; c < m; ++c)
    for (Index r = 0; r < m; ++r)
      if (bf(r, c)) t.free.push_back({MatrixId::Beta, r, c});
  for (Index c = 0; c < m; ++c)
    for (Index r = c; r < m; ++r)
      if (pf(r, c)) t.free.push_back({MatrixId::Psi, r, c});
  for (Index c = 0; c < p; ++c)
    for (Index r = c; r < p; ++r)
      if (tf(r, c)) t.free.push_back({MatrixId::Theta, r, c});

  for (const auto& path : spec.paths)
    model.reported_paths.push_back({t.construct_index(path.source), t.construct_index(path.target)});
  return model;
}

Index degrees_of_freedom(const Model& model) {
  const Index df = vech_size(model.p()) - model.q();
  if (df < 0)
    throw SpecError("model is over-parameterized: " + std::to_string(model.q()) +
                    " free parameters for " + std::to_string(vech_size(model.p())) + " moments");
  return df;
}

Index degrees_of_freedom(const ModelSpec& spec) { return degrees_of_freedom(compile(spec)); }

std::vector<std::string> check_emitted_paths(const ModelSpec& spec) {
  std::vector<std::string> violations;
  for (const auto& c : spec.constructs) {
    if (c.kind == ConstructKind::Composite) continue;
    if (has_constraint(spec, MatrixId::Psi, c.name, c.name)) continue;
    const auto& blk = spec.block(c.name);
    const bool observed_like =
        c.kind == ConstructKind::LatentVariable && !blk.empty() &&
        std::all_of(blk.begin(), blk.end(),
                    [&](const std::string& x) { return has_constraint(spec, MatrixId::Theta, x, x); });
    if (observed_like) continue;

    int emitted = 0;
    if (c.kind == ConstructKind::LatentVariable)
      for (const auto& x : blk)
        if (!has_constraint(spec, MatrixId::Theta, x, x)) ++emitted;
    for (const auto& path : spec.paths)
      if (path.source == c.name && !has_constraint(spec, MatrixId::Psi, path.target, path.target))
        ++emitted;
    if (emitted < 2) violations.push_back(c.name);
  }
  return violations;
}

std::vector<double> standardized_paths(const Model& model, const ParamTableD& table) {
  const MatrixXd b_std = standardize(table);
  std::vector<double> out;
  out.reserve(model.reported_paths.size());
  for (const auto& pr : model.reported_paths) out.push_back(b_std(pr.target, pr.source));
  return out;
}

Index jacobian_rank(const Model& model, const VectorXd& theta) {
  const Index q = theta.size();
  MatrixXd jac(vech_size(model.p()), q);
  ParamTableD t = model.table;
  for (Index j = 0; j < q; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
    VectorXd tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    t.assign(tp);
    const VectorXd sp = vech(implied_covariance(t));
    t.assign(tm);
    const VectorXd sm = vech(implied_covariance(t));
    jac.col(j) = (sp - sm) / (2 * h);
  }
  Eigen::JacobiSVD<MatrixXd> svd(jac);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  return (sv.array() > 1e-7 * std::max(1.0, sv(0))).count();
}

}  // namespace icmsim
