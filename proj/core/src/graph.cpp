#include "qcons/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

#include "qcons/rng.hpp"

namespace qcons {

Graph::Graph(std::size_t m, std::vector<Edge> edges, std::optional<double> rho_c,
             std::optional<std::vector<Point>> coords)
    : m_(m), rho_c_(rho_c), coords_(std::move(coords)) {
  if (m_ == 0) throw std::invalid_argument("graph must have at least one node");
  if (coords_ && coords_->size() != m_)
    throw std::invalid_argument("coordinate count does not match node count");
  for (auto& [i, j] : edges) {
    if (i == j) throw std::invalid_argument("self-loop at vertex " + std::to_string(i));
    if (i >= m_ || j >= m_)
      throw std::invalid_argument("edge (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") out of range");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(m_, 0);
  for (const auto& [i, j] : edges_) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

std::vector<std::vector<std::size_t>> Graph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(m_);
  for (const auto& [i, j] : edges_) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  return adj;
}

double torus_distance_squared(const Point& a, const Point& b) {
  double dx = std::abs(a.x - b.x);
  double dy = std::abs(a.y - b.y);
  dx = std::min(dx, 1.0 - dx);
  dy = std::min(dy, 1.0 - dy);
  return dx * dx + dy * dy;
}

Graph generate_rgg(std::size_t m, double rho_c, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("generate_rgg: m must be positive");
  if (!(rho_c > 0.0)) throw std::invalid_argument("generate_rgg: rho_c must be positive");

  auto rng = keyed_stream(seed, 0, 0, 0, StreamRole::graph);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> coords(m);
  for (auto& p : coords) {
    p.x = unit(rng);
    p.y = unit(rng);
  }

  const double r2 = rho_c * rho_c;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (torus_distance_squared(coords[i], coords[j]) <= r2) edges.emplace_back(i, j);
  return Graph(m, std::move(edges), rho_c, std::move(coords));
}

ConnectedRgg generate_connected_rgg(std::size_t m, double rho_c, std::uint64_t seed,
                                    int max_attempts) {
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t s =
        attempt == 0 ? seed
                     : mix_key({seed, static_cast<std::uint64_t>(attempt),
                                static_cast<std::uint64_t>(StreamRole::retry)});
    Graph g = generate_rgg(m, rho_c, s);
    if (is_connected(g)) return {std::move(g), s, attempt + 1};
  }
  throw std::runtime_error("no connected RGG (m=" + std::to_string(m) +
                           ", rho_c=" + std::to_string(rho_c) + ") within " +
                           std::to_string(max_attempts) + " attempts");
}

Graph complete_graph(std::size_t m) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) edges.emplace_back(i, j);
  return Graph(m, std::move(edges));
}

Graph path_graph(std::size_t m) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
  return Graph(m, std::move(edges));
}

Graph cycle_graph(std::size_t m) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
  if (m > 2) edges.emplace_back(0, m - 1);
  return Graph(m, std::move(edges));
}

bool is_connected(const Graph& g) {
  const auto adj = g.adjacency();
  std::vector<bool> seen(g.size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop();
    for (std::size_t u : adj[v]) {
      if (!seen[u]) {
        seen[u] = true;
        ++reached;
        frontier.push(u);
      }
    }
  }
  return reached == g.size();
}

WeightMatrix WeightMatrix::from_matrix(Matrix w, double tol) {
  if (w.rows() == 0 || w.rows() != w.cols())
    throw std::invalid_argument("weight matrix must be square and nonempty");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("weight matrix is not symmetric");
  if (w.minCoeff() < -tol) throw std::invalid_argument("weight matrix has negative entries");
  const Vector ones = Vector::Ones(w.rows());
  if ((w * ones - ones).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("weight matrix rows do not sum to one");
  return WeightMatrix(std::move(w));
}

WeightMatrix metropolis_weights(const Graph& g) {
  if (!is_connected(g))
    throw std::invalid_argument("metropolis_weights: graph is disconnected");
  const std::size_t m = g.size();
  const auto deg = g.degrees();
  Matrix w = Matrix::Zero(m, m);
  for (const auto& [i, j] : g.edges()) {
    const double wij = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
    w(i, j) = wij;
    w(j, i) = wij;
  }
  for (std::size_t i = 0; i < m; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return WeightMatrix::from_matrix(std::move(w));
}

double second_largest_eigenvalue(const WeightMatrix& w) {
  const auto m = static_cast<Eigen::Index>(w.size());
  if (m == 1) return 0.0;
  const Matrix shifted = w.matrix() - Matrix::Constant(m, m, 1.0 / static_cast<double>(m));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(shifted, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["m"] = g.size();
  j["rho_c"] = g.rho_c() ? nlohmann::json(*g.rho_c()) : nlohmann::json(nullptr);
  if (g.coords()) {
    auto coords = nlohmann::json::array();
    for (const auto& p : *g.coords()) coords.push_back({p.x, p.y});
    j["coords"] = std::move(coords);
  } else {
    j["coords"] = nullptr;
  }
  auto edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  return j;
}

Graph graph_from_json(const nlohmann::json& j) {
  const auto m = j.at("m").get<std::size_t>();
  std::optional<double> rho_c;
  if (j.contains("rho_c") && !j["rho_c"].is_null()) rho_c = j["rho_c"].get<double>();
  std::optional<std::vector<Point>> coords;
  if (j.contains("coords") && !j["coords"].is_null()) {
    coords.emplace();
    for (const auto& p : j["coords"]) coords->push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges"))
    edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  return Graph(m, std::move(edges), rho_c, std::move(coords));
}

}  // namespace qcons
