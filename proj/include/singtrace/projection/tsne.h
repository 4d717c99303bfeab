#ifndef SINGTRACE_PROJECTION_TSNE_H_
#define SINGTRACE_PROJECTION_TSNE_H_

#include <cstdint>
#include <vector>

#include "singtrace/diffusion/embedding.h"
#include "singtrace/diffusion/tensor.h"

namespace singtrace::projection {

using diffusion::MatrixD;

struct Affinities {
  MatrixD P;                        // symmetric, zero diagonal, sums to 1
  std::vector<double> beta;         // per-row precision 1 / (2 sigma^2)
  std::vector<double> row_entropy;  // achieved entropy (nats) of P_{.|i}
};

// Gaussian conditional affinities with each row's bandwidth found by
// bisection so that its entropy equals log(perplexity), then symmetrised as
// (P_{j|i} + P_{i|j}) / 2n. Requires 0 < perplexity < rows. Exact duplicate
// rows are separated by a 1e-10 distance jitter.
Affinities perplexity_affinities(const MatrixD& X, double perplexity);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;  // from the end of early exaggeration on
  double init_stddev = 1e-4;
  std::uint64_t seed = 0;
};

inline constexpr int kMinProjectionRows = 5;

// Requested perplexity limited to (rows - 1) / 3.
double effective_perplexity(int rows, double requested);

struct ProjectionMap {
  std::vector<int> steps;    // label of each row, in row order
  MatrixD points;            // rows x 2, centred
  std::vector<double> kl;    // KL(P || Q) before the first update and after each iteration
  double perplexity = 0.0;   // value actually used
};

// Exact t-SNE (Student-t kernel, gains, momentum, early exaggeration).
// Throws InvalidArgument for fewer than kMinProjectionRows rows or a label
// count mismatch, NumericError naming the iteration on a non-finite
// gradient.
ProjectionMap tsne(const MatrixD& X, const std::vector<int>& steps, const TsneConfig& cfg = {});
ProjectionMap tsne(const diffusion::EmbeddingSequence& seq, const TsneConfig& cfg = {});

// Projects the row-concatenation of several sequences into one space.
// `offsets[k]` is the first row of sequence k in the result.
struct JointProjection {
  ProjectionMap map;
  std::vector<int> offsets;
};
JointProjection joint_tsne(const std::vector<const diffusion::EmbeddingSequence*>& seqs,
                           const TsneConfig& cfg = {});

struct TrajectoryVertex {
  double x = 0.0;
  double y = 0.0;
  int step = 0;
};

// Points joined in visit order (first vertex is the first visited step).
struct Trajectory {
  std::vector<TrajectoryVertex> vertices;
  int step_at(std::size_t index) const { return vertices.at(index).step; }
};

Trajectory trajectory(const ProjectionMap& map);

}  // namespace singtrace::projection

#endif  // SINGTRACE_PROJECTION_TSNE_H_
