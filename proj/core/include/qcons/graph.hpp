#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace qcons {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

/// Undirected edge, stored with first < second.
using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple graph on vertices 0..m-1, optionally carrying the
/// torus coordinates and radius it was generated from.
class Graph {
 public:
  /// Edges are normalized to (min, max), sorted and deduplicated. Throws
  /// std::invalid_argument on self-loops, out-of-range vertices, m == 0, or
  /// a coordinate list whose size differs from m.
  Graph(std::size_t m, std::vector<Edge> edges,
        std::optional<double> rho_c = std::nullopt,
        std::optional<std::vector<Point>> coords = std::nullopt);

  std::size_t size() const noexcept { return m_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::optional<double>& rho_c() const noexcept { return rho_c_; }
  const std::optional<std::vector<Point>>& coords() const noexcept {
    return coords_;
  }

  bool has_edge(std::size_t i, std::size_t j) const;
  std::vector<std::size_t> degrees() const;
  std::vector<std::vector<std::size_t>> adjacency() const;

  bool operator==(const Graph&) const = default;

 private:
  std::size_t m_;
  std::vector<Edge> edges_;
  std::optional<double> rho_c_;
  std::optional<std::vector<Point>> coords_;
};

/// Squared wraparound distance on the unit torus.
double torus_distance_squared(const Point& a, const Point& b);

/// Random geometric graph on the unit torus: m i.i.d. uniform points in
/// [0,1)^2, edge iff torus distance <= rho_c. May be disconnected.
Graph generate_rgg(std::size_t m, double rho_c, std::uint64_t seed);

struct ConnectedRgg {
  Graph graph;
  std::uint64_t seed;  // seed that produced `graph`
  int attempts;
};

/// Redraws with derived seeds until the RGG is connected. The first attempt
/// uses `seed` itself. Throws std::runtime_error after `max_attempts`.
ConnectedRgg generate_connected_rgg(std::size_t m, double rho_c,
                                    std::uint64_t seed, int max_attempts = 100);

Graph complete_graph(std::size_t m);
Graph path_graph(std::size_t m);
Graph cycle_graph(std::size_t m);

bool is_connected(const Graph& g);

/// Symmetric, doubly stochastic, elementwise nonnegative consensus matrix.
class WeightMatrix {
 public:
  /// Validates the invariants (symmetry, unit row/column sums, nonnegativity)
  /// to `tol` and throws std::invalid_argument otherwise.
  static WeightMatrix from_matrix(Matrix w, double tol = 1e-12);

  const Matrix& matrix() const noexcept { return w_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return w_(i, j); }

 private:
  explicit WeightMatrix(Matrix w) : w_(std::move(w)) {}
  Matrix w_;
};

/// W_ij = 1 / (1 + max(deg_i, deg_j)) on edges, W_ii = 1 - sum of the row.
/// Throws std::invalid_argument for disconnected graphs.
WeightMatrix metropolis_weights(const Graph& g);

/// Largest |eigenvalue| of W restricted to the complement of the all-ones
/// vector. Zero for m == 1.
double second_largest_eigenvalue(const WeightMatrix& w);

nlohmann::json graph_to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j);

}  // namespace qcons
