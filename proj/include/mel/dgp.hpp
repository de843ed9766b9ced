#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "mel/array.hpp"
#include "mel/errors.hpp"
#include "mel/rng.hpp"

namespace mel {

/// Draw-kind tags for the stream-splitting scheme in rng.hpp.
namespace draw_kind {
inline constexpr std::uint8_t kRowEffect = 0;
inline constexpr std::uint8_t kColEffect = 1;
inline constexpr std::uint8_t kNoise = 2;
inline constexpr std::uint8_t kRowMembership = 3;
inline constexpr std::uint8_t kColMembership = 4;
inline constexpr std::uint8_t kEdge = 5;
inline constexpr std::uint8_t kSlabEffect = 6;
inline constexpr std::uint8_t kPairRowCol = 7;
inline constexpr std::uint8_t kPairRowSlab = 8;
inline constexpr std::uint8_t kPairColSlab = 9;
}  // namespace draw_kind

/// Realized components of X_ij = theta + L_i0 + L_0j + W_ij + R_ij for a
/// generated array, together with the population variance components of
/// the design. The reconstruction identity holds exactly, by construction,
/// for both implemented designs.
struct HoeffdingOracle {
  double theta = 0.0;
  int rows = 0, cols = 0;
  Eigen::VectorXd row_effects;  // L_i0
  Eigen::VectorXd col_effects;  // L_0j
  Eigen::MatrixXd interaction;  // W_ij
  Eigen::MatrixXd residual;     // R_ij

  // Population variances of the components.
  double var_L_row = 0.0;
  double var_L_col = 0.0;
  double var_R = 0.0;

  double n() const { return double(rows + cols); }
  double n_min() const { return double(rows < cols ? rows : cols); }
  /// sigma_L^2 = n { Var(L_10)/N + Var(L_01)/M }
  double sigma_L2() const {
    return n() * (var_L_row / rows + var_L_col / cols);
  }
  double sigma_R2() const { return var_R; }
  /// Variance of the limiting normal term: n_min sigma_L^2 + sigma_R^2.
  double xi_variance() const { return n_min() * sigma_L2() + sigma_R2(); }
  /// Normalizer of the EL quadratic form: n_min sigma_L^2 + 2 sigma_R^2.
  double omega() const { return n_min() * sigma_L2() + 2.0 * sigma_R2(); }

  double reconstruct(int i, int j) const {
    return theta + row_effects[i] + col_effects[j] + interaction(i, j) +
           residual(i, j);
  }
};

/// Additive Gaussian random-effect design:
/// X_ij = theta + a_i + b_j + eps_ij with a, b ~ N(0, sigma2) and
/// eps ~ N(0, noise_variance).
struct RandomEffectDGP {
  double theta = 1.0;
  double sigma2 = 1.0;
  int rows = 50;
  int cols = 5;
  double noise_variance = 1.0;
};

inline TwoWayArray generate(const RandomEffectDGP& dgp, std::uint64_t seed,
                            std::uint64_t replication,
                            HoeffdingOracle* oracle = nullptr) {
  if (dgp.sigma2 < 0.0 || dgp.noise_variance < 0.0) {
    throw ConfigError("variances must be nonnegative");
  }
  const double effect_sd = std::sqrt(dgp.sigma2);
  const double noise_sd = std::sqrt(dgp.noise_variance);

  rng::Stream rows_stream(seed, rng::make_stream_id(replication, draw_kind::kRowEffect));
  rng::Stream cols_stream(seed, rng::make_stream_id(replication, draw_kind::kColEffect));
  rng::Stream noise_stream(seed, rng::make_stream_id(replication, draw_kind::kNoise));

  Eigen::VectorXd a(dgp.rows), b(dgp.cols);
  for (int i = 0; i < dgp.rows; ++i) a[i] = effect_sd * rows_stream.normal();
  for (int j = 0; j < dgp.cols; ++j) b[j] = effect_sd * cols_stream.normal();

  TwoWayArray array(dgp.rows, dgp.cols, 1);
  Eigen::MatrixXd residual(dgp.rows, dgp.cols);
  for (int i = 0; i < dgp.rows; ++i) {
    for (int j = 0; j < dgp.cols; ++j) {
      const double eps = noise_sd * noise_stream.normal();
      residual(i, j) = eps;
      array.at(i, j) = dgp.theta + a[i] + b[j] + eps;
    }
  }
  if (oracle != nullptr) {
    oracle->theta = dgp.theta;
    oracle->rows = dgp.rows;
    oracle->cols = dgp.cols;
    oracle->row_effects = a;
    oracle->col_effects = b;
    oracle->interaction = Eigen::MatrixXd::Zero(dgp.rows, dgp.cols);
    oracle->residual = residual;
    oracle->var_L_row = dgp.sigma2;
    oracle->var_L_col = dgp.sigma2;
    oracle->var_R = dgp.noise_variance;
  }
  return array;
}

/// Bipartite stochastic block model: rows take community a in {1,2} with
/// probabilities pi1, columns take b in {1,2} with probabilities pi2, and
/// edges form with probability scale * S_ab, where the scale is chosen so
/// that the mean edge probability pi1' F pi2 equals theta. Memberships are
/// redrawn every replication.
struct BipartiteSBMDGP {
  Eigen::Vector2d pi1{0.7, 0.3};
  Eigen::Vector2d pi2{0.2, 0.8};
  Eigen::Matrix2d S{{0.6, 0.4}, {0.3, 0.7}};
  double theta = 0.5;
  int rows = 50;
  int cols = 5;

  double base_mean() const { return pi1.dot(S * pi2); }
  double scale() const { return theta / base_mean(); }
};

inline TwoWayArray generate(const BipartiteSBMDGP& dgp, std::uint64_t seed,
                            std::uint64_t replication,
                            HoeffdingOracle* oracle = nullptr) {
  const double s = dgp.scale();
  if (s * dgp.S.maxCoeff() > 1.0) {
    throw SbmScaleError("edge probabilities exceed one at the requested mean");
  }

  rng::Stream row_stream(seed, rng::make_stream_id(replication, draw_kind::kRowMembership));
  rng::Stream col_stream(seed, rng::make_stream_id(replication, draw_kind::kColMembership));
  rng::Stream edge_stream(seed, rng::make_stream_id(replication, draw_kind::kEdge));

  const double row_cum[2] = {dgp.pi1[0], 1.0};
  const double col_cum[2] = {dgp.pi2[0], 1.0};
  std::vector<int> a(dgp.rows), b(dgp.cols);
  for (int i = 0; i < dgp.rows; ++i) a[i] = row_stream.categorical(row_cum, 2);
  for (int j = 0; j < dgp.cols; ++j) b[j] = col_stream.categorical(col_cum, 2);

  const Eigen::Matrix2d F = s * dgp.S;
  TwoWayArray array(dgp.rows, dgp.cols, 1);
  Eigen::MatrixXd residual(dgp.rows, dgp.cols);
  for (int i = 0; i < dgp.rows; ++i) {
    for (int j = 0; j < dgp.cols; ++j) {
      const double p = F(a[i], b[j]);
      const double x = edge_stream.bernoulli(p) ? 1.0 : 0.0;
      array.at(i, j) = x;
      residual(i, j) = x - p;
    }
  }
  if (oracle != nullptr) {
    const Eigen::Vector2d row_mean = F * dgp.pi2;   // E[X_ij | a_i = a]
    const Eigen::Vector2d col_mean = F.transpose() * dgp.pi1;
    oracle->theta = dgp.theta;
    oracle->rows = dgp.rows;
    oracle->cols = dgp.cols;
    oracle->row_effects.resize(dgp.rows);
    oracle->col_effects.resize(dgp.cols);
    oracle->interaction.resize(dgp.rows, dgp.cols);
    for (int i = 0; i < dgp.rows; ++i) {
      oracle->row_effects[i] = row_mean[a[i]] - dgp.theta;
    }
    for (int j = 0; j < dgp.cols; ++j) {
      oracle->col_effects[j] = col_mean[b[j]] - dgp.theta;
    }
    for (int i = 0; i < dgp.rows; ++i) {
      for (int j = 0; j < dgp.cols; ++j) {
        oracle->interaction(i, j) =
            F(a[i], b[j]) - row_mean[a[i]] - col_mean[b[j]] + dgp.theta;
      }
    }
    oracle->residual = residual;
    oracle->var_L_row = dgp.pi1[0] * std::pow(row_mean[0] - dgp.theta, 2) +
                        dgp.pi1[1] * std::pow(row_mean[1] - dgp.theta, 2);
    oracle->var_L_col = dgp.pi2[0] * std::pow(col_mean[0] - dgp.theta, 2) +
                        dgp.pi2[1] * std::pow(col_mean[1] - dgp.theta, 2);
    double var_r = 0.0;
    for (int u = 0; u < 2; ++u) {
      for (int v = 0; v < 2; ++v) {
        var_r += dgp.pi1[u] * dgp.pi2[v] * F(u, v) * (1.0 - F(u, v));
      }
    }
    oracle->var_R = var_r;
  }
  return array;
}

/// Three-way Gaussian random effects with optional pairwise interactions:
/// X_ijt = theta + a_i + b_j + c_t + e_ij + f_it + g_jt + eps_ijt.
struct ThreeWayRandomEffectDGP {
  double theta = 1.0;
  double sigma2_main = 1.0;
  double sigma2_pair = 0.0;
  double sigma2_noise = 1.0;
  int rows = 40;
  int cols = 40;
  int slabs = 40;
};

inline ThreeWayArray generate(const ThreeWayRandomEffectDGP& dgp,
                              std::uint64_t seed, std::uint64_t replication) {
  if (dgp.sigma2_main < 0.0 || dgp.sigma2_pair < 0.0 || dgp.sigma2_noise < 0.0) {
    throw ConfigError("variances must be nonnegative");
  }
  const double main_sd = std::sqrt(dgp.sigma2_main);
  const double pair_sd = std::sqrt(dgp.sigma2_pair);
  const double noise_sd = std::sqrt(dgp.sigma2_noise);

  auto stream = [&](std::uint8_t kind) {
    return rng::Stream(seed, rng::make_stream_id(replication, kind));
  };
  rng::Stream sa = stream(draw_kind::kRowEffect);
  rng::Stream sb = stream(draw_kind::kColEffect);
  rng::Stream sc = stream(draw_kind::kSlabEffect);
  rng::Stream sij = stream(draw_kind::kPairRowCol);
  rng::Stream sit = stream(draw_kind::kPairRowSlab);
  rng::Stream sjt = stream(draw_kind::kPairColSlab);
  rng::Stream snoise = stream(draw_kind::kNoise);

  Eigen::VectorXd a(dgp.rows), b(dgp.cols), c(dgp.slabs);
  for (int i = 0; i < dgp.rows; ++i) a[i] = main_sd * sa.normal();
  for (int j = 0; j < dgp.cols; ++j) b[j] = main_sd * sb.normal();
  for (int t = 0; t < dgp.slabs; ++t) c[t] = main_sd * sc.normal();

  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dgp.rows, dgp.cols);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(dgp.rows, dgp.slabs);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dgp.cols, dgp.slabs);
  if (pair_sd > 0.0) {
    for (int i = 0; i < dgp.rows; ++i) {
      for (int j = 0; j < dgp.cols; ++j) e(i, j) = pair_sd * sij.normal();
    }
    for (int i = 0; i < dgp.rows; ++i) {
      for (int t = 0; t < dgp.slabs; ++t) f(i, t) = pair_sd * sit.normal();
    }
    for (int j = 0; j < dgp.cols; ++j) {
      for (int t = 0; t < dgp.slabs; ++t) g(j, t) = pair_sd * sjt.normal();
    }
  }

  ThreeWayArray array(dgp.rows, dgp.cols, dgp.slabs, 1);
  for (int i = 0; i < dgp.rows; ++i) {
    for (int j = 0; j < dgp.cols; ++j) {
      for (int t = 0; t < dgp.slabs; ++t) {
        array.at(i, j, t) = dgp.theta + a[i] + b[j] + c[t] + e(i, j) + f(i, t) +
                            g(j, t) + noise_sd * snoise.normal();
      }
    }
  }
  return array;
}

}  // namespace mel
