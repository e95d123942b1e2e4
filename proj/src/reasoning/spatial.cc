#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rxn/errors.h"
#include "rxn/reasoning.h"

namespace rxn {
namespace {

void check_unit(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols,
                                 const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ConfigError(what + ": row " + std::to_string(r) + " must have " +
                        std::to_string(cols) + " numbers");
    }
    for (int c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ConfigError(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

}  // namespace

void ReasoningConfig::validate() const {
  if (k_nn < 0) throw ConfigError("k_nn must be non-negative");
  if (layers < 1) throw ConfigError("layers must be at least 1");
  if (dim < kBaseFeatureDim) {
    throw ConfigError("dim must be at least " + std::to_string(kBaseFeatureDim));
  }
  check_unit("radius", radius);
  check_unit("beta", beta);
  check_unit("tau_chem", tau_chem);
  check_unit("tau_cluster", tau_cluster);
  check_unit("tau_fuse", tau_fuse);
  check_unit("conservation_penalty", conservation_penalty);
  check_unit("arrow_merge_gap", arrow_merge_gap);
  if (exact_search_limit < 0) throw ConfigError("exact_search_limit must be non-negative");
  if (max_parallel < 1) throw ConfigError("max_parallel must be at least 1");
  try {
    FusionWeights{alpha_space, alpha_chem, alpha_init}.validate();
  } catch (const WeightError& e) {
    throw ConfigError(e.what());
  }
  fingerprint.validate();
}

GnnWeights GnnWeights::from_json(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("weights file is not a JSON object");
  GnnWeights w;
  if (!j.contains("dim") || !j["dim"].is_number_integer()) throw ConfigError("weights: missing dim");
  w.dim = j["dim"].get<int>();
  w.edge_dim = j.value("edge_dim", kEdgeFeatureDim);
  if (w.dim < 1 || w.edge_dim < 1) throw ConfigError("weights: dimensions must be positive");
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
    throw ConfigError("weights: layers must be a non-empty array");
  }
  for (std::size_t l = 0; l < j["layers"].size(); ++l) {
    const auto& layer = j["layers"][l];
    const std::string at = "weights layer " + std::to_string(l);
    if (!layer.is_object() || !layer.contains("W1") || !layer.contains("W2")) {
      throw ConfigError(at + ": needs W1 and W2");
    }
    w.layers.push_back({matrix_from_json(layer["W1"], w.dim, w.dim, at + " W1"),
                        matrix_from_json(layer["W2"], w.dim, w.edge_dim, at + " W2")});
  }
  return w;
}

GnnWeights GnnWeights::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

GnnWeights GnnWeights::random(int dim, int edge_dim, int layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GnnWeights w = zeros(dim, edge_dim, layers);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(edge_dim));
  for (GnnLayer& layer : w.layers) {
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) layer.w1(r, c) = s1 * u(rng);
      for (int c = 0; c < edge_dim; ++c) layer.w2(r, c) = s2 * u(rng);
    }
  }
  return w;
}

GnnWeights GnnWeights::zeros(int dim, int edge_dim, int layers) {
  GnnWeights w;
  w.dim = dim;
  w.edge_dim = edge_dim;
  for (int l = 0; l < layers; ++l) {
    w.layers.push_back({Eigen::MatrixXd::Zero(dim, dim), Eigen::MatrixXd::Zero(dim, edge_dim)});
  }
  return w;
}

void GnnWeights::check(int expected_dim, int expected_edge_dim, int expected_layers) const {
  if (dim != expected_dim || edge_dim != expected_edge_dim) {
    throw ConfigError("weights are " + std::to_string(dim) + "x" + std::to_string(edge_dim) +
                      " but the graph needs " + std::to_string(expected_dim) + "x" +
                      std::to_string(expected_edge_dim));
  }
  if (static_cast<int>(layers.size()) < expected_layers) {
    throw ConfigError("weights provide " + std::to_string(layers.size()) + " layers, " +
                      std::to_string(expected_layers) + " requested");
  }
  for (const GnnLayer& l : layers) {
    if (l.w1.rows() != dim || l.w1.cols() != dim || l.w2.rows() != dim ||
        l.w2.cols() != edge_dim) {
      throw ConfigError("weights layer has inconsistent shape");
    }
  }
}

bool SpatialGraph::has_edge(std::size_t i, std::size_t j) const {
  return s_space.count({std::min(i, j), std::max(i, j)}) != 0 ||
         edge_features.count({i, j}) != 0;
}

std::optional<double> SpatialGraph::score(std::size_t i, std::size_t j) const {
  auto it = s_space.find({std::min(i, j), std::max(i, j)});
  if (it == s_space.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::size_t, std::size_t>> SpatialGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [key, _] : edge_features) {
    if (key.first < key.second) out.push_back(key);
  }
  return out;
}

void SpatialGraph::add_edge(std::size_t i, std::size_t j, Eigen::VectorXd e_ij,
                            Eigen::VectorXd e_ji) {
  if (i == j || edge_features.count({i, j})) return;
  edge_features[{i, j}] = std::move(e_ij);
  edge_features[{j, i}] = std::move(e_ji);
  auto insert_sorted = [](std::vector<std::size_t>& v, std::size_t x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
  };
  insert_sorted(neighbors[i], j);
  insert_sorted(neighbors[j], i);
}

Eigen::VectorXd node_features(const Entity& e, const ReactionDocument& doc, int dim,
                              const chem::FingerprintConfig& fp) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(dim);
  h(static_cast<int>(e.kind)) = 1.0;
  const geom::AxisBox& d = doc.diagram_bounds;
  const geom::AxisBox box = geom::bounding_box(e.region);
  const geom::Point c = geom::centroid(e.region);
  const double w = d.width() > 0 ? d.width() : 1.0;
  const double hh = d.height() > 0 ? d.height() : 1.0;
  h(kNumEntityKinds + 0) = (c.x - d.x_min()) / w;
  h(kNumEntityKinds + 1) = (c.y - d.y_min()) / hh;
  h(kNumEntityKinds + 2) = box.width() / w;
  h(kNumEntityKinds + 3) = box.height() / hh;
  if (const MoleculePayload* m = e.molecule(); m != nullptr && m->parsed()) {
    const chem::Fingerprint f = chem::fingerprint(*m->molecule, fp);
    const auto bits = f.on_bits();
    if (!bits.empty()) {
      for (std::size_t b : bits) h(kNumEntityKinds + 4 + static_cast<int>(b % kSketchDim)) += 1.0;
      for (int k = 0; k < kSketchDim; ++k) {
        h(kNumEntityKinds + 4 + k) /= static_cast<double>(bits.size());
      }
    }
  }
  return h;
}

Eigen::VectorXd edge_features(const Entity& from, const Entity& to, const ReactionDocument& doc) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(kEdgeFeatureDim);
  const double diag = doc.diagram_bounds.diagonal() > 0 ? doc.diagram_bounds.diagonal() : 1.0;
  const geom::Point a = geom::centroid(from.region);
  const geom::Point b = geom::centroid(to.region);
  e(0) = (b.x - a.x) / diag;
  e(1) = (b.y - a.y) / diag;
  e(2) = geom::norm(b - a) / diag;
  const double area_a = geom::area(from.region);
  const double area_b = geom::area(to.region);
  e(3) = area_a + area_b > 0 ? area_b / (area_a + area_b) : 0.5;
  e(4 + static_cast<int>(from.kind) * kNumEntityKinds + static_cast<int>(to.kind)) = 1.0;
  return e;
}

SpatialGraph build_spatial_graph(const ReactionDocument& doc, const ReasoningConfig& config) {
  if (config.dim < kBaseFeatureDim) {
    throw ConfigError("dim must be at least " + std::to_string(kBaseFeatureDim));
  }
  const std::size_t n = doc.entities.size();
  SpatialGraph g;
  g.h0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), config.dim);
  g.neighbors.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    g.h0.row(static_cast<Eigen::Index>(i)) =
        node_features(doc.entities[i], doc, config.dim, config.fingerprint).transpose();
  }
  g.h = g.h0;
  if (n < 2) return g;

  const double diag = doc.diagram_bounds.diagonal();
  auto distance = [&](std::size_t i, std::size_t j) {
    const geom::Point d =
        geom::centroid(doc.entities[i].region) - geom::centroid(doc.entities[j].region);
    return diag > 0 ? geom::norm(d) / diag : geom::norm(d);
  };
  auto connect = [&](std::size_t i, std::size_t j) {
    g.add_edge(i, j, edge_features(doc.entities[i], doc.entities[j], doc),
               edge_features(doc.entities[j], doc.entities[i], doc));
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> by_distance;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) by_distance.push_back({distance(i, j), j});
    }
    std::sort(by_distance.begin(), by_distance.end());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.k_nn),
                                                by_distance.size());
    for (std::size_t r = 0; r < k; ++r) connect(i, by_distance[r].second);
    for (const auto& [d, j] : by_distance) {
      if (d < config.radius) connect(i, j);
    }
  }
  return g;
}

double shifted_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return kNeutralScore;
  return std::clamp((1.0 + a.dot(b) / (na * nb)) / 2.0, 0.0, 1.0);
}

void propagate(SpatialGraph& graph, const GnnWeights& weights, int layers) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  const int edge_dim =
      graph.edge_features.empty() ? weights.edge_dim
                                  : static_cast<int>(graph.edge_features.begin()->second.size());
  weights.check(static_cast<int>(graph.h0.cols()), edge_dim, layers);
  Eigen::MatrixXd h = graph.h0;
  for (int l = 0; l < layers; ++l) {
    const GnnLayer& w = weights.layers[static_cast<std::size_t>(l)];
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n, h.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(h.cols());
      for (std::size_t j : graph.neighbors[static_cast<std::size_t>(i)]) {
        acc += w.w1 * h.row(static_cast<Eigen::Index>(j)).transpose();
        acc += w.w2 * graph.edge_features.at({static_cast<std::size_t>(i), j});
      }
      next.row(i) = acc.cwiseMax(0.0).transpose();
    }
    h = std::move(next);
  }
  graph.h = std::move(h);
  graph.s_space.clear();
  for (const auto& [i, j] : graph.edges()) {
    graph.s_space[{i, j}] = shifted_cosine(graph.h.row(static_cast<Eigen::Index>(i)).transpose(),
                                           graph.h.row(static_cast<Eigen::Index>(j)).transpose());
  }
}

}  // namespace rxn
