#include "singtrace/projection/tsne.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "singtrace/error.h"

namespace singtrace::projection {

namespace {

MatrixD squared_distances(const MatrixD& X) {
  const Eigen::Index n = X.rows();
  MatrixD D = MatrixD::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (X.row(i) - X.row(j)).squaredNorm();
      D(i, j) = d;
      D(j, i) = d;
    }
  }
  return D;
}

// Conditional row P_{.|i} for precision beta; returns its entropy.
double conditional_row(const MatrixD& D, Eigen::Index i, double beta, double dmin,
                       std::vector<double>& row) {
  const Eigen::Index n = D.rows();
  double z = 0.0, weighted = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = D(i, j) - dmin;
    row[j] = std::exp(-beta * shifted);
    z += row[j];
    weighted += row[j] * shifted;
  }
  for (Eigen::Index j = 0; j < n; ++j) row[j] /= z;
  return std::log(z) + beta * weighted / z;
}

}  // namespace

Affinities perplexity_affinities(const MatrixD& X, double perplexity) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw InvalidArgument("affinities: need at least two rows");
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n)) {
    throw InvalidArgument("affinities: perplexity must lie in (0, rows)");
  }
  if (!X.allFinite()) throw InvalidArgument("affinities: non-finite input");
  MatrixD D = squared_distances(X);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && D(i, j) <= 0.0) D(i, j) = 1e-10;
    }
  }
  const double target = std::log(perplexity);
  Affinities a;
  a.beta.resize(n);
  a.row_entropy.resize(n);
  MatrixD cond(n, n);
  std::vector<double> row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    double dmean = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dmin = std::min(dmin, D(i, j));
      dmean += D(i, j);
    }
    dmean /= static_cast<double>(n - 1);
    // Entropy decreases monotonically in beta; bisect in log(beta).
    double lo = std::log(1e-20 / std::max(dmean, 1e-300));
    double hi = std::log(1e20 / std::max(dmean, 1e-300));
    double beta = 1.0 / std::max(dmean, 1e-300);
    double h = conditional_row(D, i, beta, dmin, row);
    for (int it = 0; it < 200 && std::abs(h - target) > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      beta = std::exp(mid);
      h = conditional_row(D, i, beta, dmin, row);
      if (h > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    a.beta[i] = beta;
    a.row_entropy[i] = h;
    for (Eigen::Index j = 0; j < n; ++j) cond(i, j) = row[j];
  }
  a.P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  return a;
}

double effective_perplexity(int rows, double requested) {
  return std::min(requested, (rows - 1) / 3.0);
}

ProjectionMap tsne(const MatrixD& X, const std::vector<int>& steps, const TsneConfig& cfg) {
  const int n = static_cast<int>(X.rows());
  if (n < kMinProjectionRows) {
    throw InvalidArgument("tsne: need at least " + std::to_string(kMinProjectionRows) + " rows");
  }
  if (static_cast<int>(steps.size()) != n) throw InvalidArgument("tsne: one label per row");
  if (cfg.iterations < 1 || cfg.learning_rate <= 0.0) {
    throw InvalidArgument("tsne: iterations and learning rate must be positive");
  }
  ProjectionMap map;
  map.steps = steps;
  map.perplexity = effective_perplexity(n, cfg.perplexity);
  const MatrixD P = perplexity_affinities(X, map.perplexity).P;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, cfg.init_stddev);
  MatrixD Y(n, 2);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = gauss(rng);
  MatrixD update = MatrixD::Zero(n, 2);
  MatrixD gains = MatrixD::Ones(n, 2);
  MatrixD num(n, n);
  MatrixD grad(n, 2);

  auto kernel = [&] {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
        num(i, j) = v;
        num(j, i) = v;
        sum += 2.0 * v;
      }
    }
    return sum;
  };
  auto kl_divergence = [&](double sum) {
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || P(i, j) <= 0.0) continue;
        const double q = std::max(num(i, j) / sum, 1e-300);
        kl += P(i, j) * std::log(P(i, j) / q);
      }
    }
    return kl;
  };

  map.kl.reserve(cfg.iterations + 1);
  map.kl.push_back(kl_divergence(kernel()));
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool early = it < cfg.exaggeration_iterations;
    const double exag = early ? cfg.exaggeration : 1.0;
    const double momentum = early ? cfg.initial_momentum : cfg.final_momentum;
    const double sum = kernel();
    grad.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (exag * P(i, j) - num(i, j) / sum) * num(i, j);
        grad.row(i) += 4.0 * w * (Y.row(i) - Y.row(j));
      }
    }
    if (!grad.allFinite()) {
      throw NumericError("tsne: non-finite gradient at iteration " + std::to_string(it));
    }
    for (Eigen::Index k = 0; k < Y.size(); ++k) {
      double& g = gains.data()[k];
      const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
      g = same_sign ? std::max(g * 0.8, 0.01) : g + 0.2;
      update.data()[k] = momentum * update.data()[k] - cfg.learning_rate * g * grad.data()[k];
    }
    Y += update;
    Y.rowwise() -= Y.colwise().mean();
    map.kl.push_back(kl_divergence(kernel()));
  }
  Y.rowwise() -= Y.colwise().mean();
  map.points = std::move(Y);
  return map;
}

ProjectionMap tsne(const diffusion::EmbeddingSequence& seq, const TsneConfig& cfg) {
  return tsne(seq.matrix, seq.steps, cfg);
}

JointProjection joint_tsne(const std::vector<const diffusion::EmbeddingSequence*>& seqs,
                           const TsneConfig& cfg) {
  if (seqs.empty()) throw InvalidArgument("joint_tsne: no sequences");
  Eigen::Index rows = 0;
  const Eigen::Index cols = seqs.front()->matrix.cols();
  for (const auto* s : seqs) {
    if (s->matrix.cols() != cols) throw InvalidArgument("joint_tsne: dimensions differ");
    rows += s->matrix.rows();
  }
  JointProjection out;
  MatrixD X(rows, cols);
  std::vector<int> steps;
  Eigen::Index at = 0;
  for (const auto* s : seqs) {
    out.offsets.push_back(static_cast<int>(at));
    X.middleRows(at, s->matrix.rows()) = s->matrix;
    steps.insert(steps.end(), s->steps.begin(), s->steps.end());
    at += s->matrix.rows();
  }
  out.map = tsne(X, steps, cfg);
  return out;
}

Trajectory trajectory(const ProjectionMap& map) {
  Trajectory t;
  t.vertices.reserve(map.steps.size());
  for (std::size_t i = 0; i < map.steps.size(); ++i) {
    t.vertices.push_back({map.points(i, 0), map.points(i, 1), map.steps[i]});
  }
  return t;
}

}  // namespace singtrace::projection
