#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Independent reference implementations shared by the unit and acceptance tests.
namespace testing_support {

// Plain recursion with memo on (i, j); no shared code with the DP under test.
inline std::size_t oracle_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return memo[key] = best;
  };
  return go(0, 0);
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  std::vector<std::string> out(len(rng));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return out;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline Eigen::VectorXd score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) g += (y(i) - sigmoid(x.row(i).dot(beta))) * x.row(i).transpose();
  return g;
}

struct Simulated {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

inline Simulated simulate_logit(std::size_t n, const Eigen::Vector3d& beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> secs(0.0, 20.0), u(0.0, 1.0);
  Simulated s{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    s.x.row(i) << 1.0, coin(rng) ? 1.0 : 0.0, secs(rng);
    s.y(i) = u(rng) < sigmoid(s.x.row(i).dot(beta)) ? 1.0 : 0.0;
  }
  return s;
}

// Greedy replay with an explicitly inverted covariance.
inline std::vector<std::pair<std::size_t, std::size_t>> matching_oracle(const Eigen::MatrixXd& t,
                                                                        const Eigen::MatrixXd& c, double caliper) {
  Eigen::MatrixXd all(t.rows() + c.rows(), t.cols());
  all << t, c;
  const Eigen::MatrixXd centered = all.rowwise() - all.colwise().mean();
  const Eigen::MatrixXd inv = (centered.transpose() * centered / (all.rows() - 1.0)).inverse();
  auto dist = [&](Eigen::Index i, Eigen::Index j) {
    const Eigen::VectorXd d = (t.row(i) - c.row(j)).transpose();
    return std::sqrt(d.dot(inv * d));
  };
  std::vector<double> all_d, nearest(t.rows(), 1e300);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      all_d.push_back(dist(i, j));
      nearest[i] = std::min(nearest[i], all_d.back());
    }
  double mean = 0.0;
  for (double v : all_d) mean += v / all_d.size();
  double var = 0.0;
  for (double v : all_d) var += (v - mean) * (v - mean) / (all_d.size() - 1.0);
  const double limit = caliper * std::sqrt(var);

  std::vector<std::size_t> order(t.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return nearest[a] > nearest[b]; });
  std::vector<bool> used(c.rows());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto i : order) {
    int best = -1;
    for (Eigen::Index j = 0; j < c.rows(); ++j)
      if (!used[j] && (best < 0 || dist(i, j) < dist(i, best))) best = static_cast<int>(j);
    if (best < 0) break;
    if (dist(i, best) > limit) continue;
    used[best] = true;
    pairs.emplace_back(i, best);
  }
  return pairs;
}

}  // namespace testing_support
