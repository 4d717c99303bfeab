#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "singtrace/diffusion/denoiser.h"
#include "singtrace/diffusion/embedding.h"
#include "singtrace/diffusion/sampler.h"
#include "singtrace/diffusion/schedule.h"
#include "singtrace/error.h"
#include "singtrace/projection/tsne.h"

namespace singtrace::projection {
namespace {

MatrixD random_matrix(int rows, int cols, std::uint64_t seed) {
  return diffusion::gaussian_matrix(rows, cols, seed);
}

std::vector<int> descending(int n) {
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = n - 1 - i;
  return s;
}

// Entropy (nats) of the conditional row i recomputed from beta.
double row_entropy(const MatrixD& X, int i, double beta) {
  std::vector<double> p;
  double z = 0.0;
  for (int j = 0; j < X.rows(); ++j) {
    if (j == i) continue;
    const double d2 = (X.row(i) - X.row(j)).squaredNorm();
    p.push_back(std::exp(-beta * d2));
    z += p.back();
  }
  double h = 0.0;
  for (double v : p) {
    const double q = v / z;
    if (q > 0) h -= q * std::log(q);
  }
  return h;
}

TEST(Affinities, SumToOneAndHitPerplexity) {
  const MatrixD X = random_matrix(60, 10, 1);
  for (double perp : {5.0, 12.0, 19.0}) {
    const Affinities a = perplexity_affinities(X, perp);
    EXPECT_NEAR(a.P.sum(), 1.0, 1e-6);
    EXPECT_LE((a.P - a.P.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(a.P.minCoeff(), 0.0);
    for (int i = 0; i < X.rows(); ++i) {
      EXPECT_EQ(a.P(i, i), 0.0);
      // Independent recomputation of the achieved entropy from the bandwidth.
      const double h = row_entropy(X, i, a.beta[i]);
      EXPECT_LE(std::abs(h - std::log(perp)), 1e-3) << "row " << i;
      EXPECT_NEAR(a.row_entropy[i], h, 1e-9);
    }
  }
}

TEST(Affinities, EquilateralPointsAreUniform) {
  MatrixD X(3, 2);
  X << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
  // Two equidistant neighbours: perplexity 2 is the only attainable value.
  const Affinities a = perplexity_affinities(X, 2.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_NEAR(a.P(i, j), 1.0 / 6.0, 1e-9);
      }
    }
  }
}

TEST(Affinities, DuplicateRowsAreNotAnError) {
  MatrixD X = random_matrix(20, 4, 2);
  X.row(3) = X.row(7);
  X.row(5) = X.row(7);
  const Affinities a = perplexity_affinities(X, 5.0);
  EXPECT_TRUE(a.P.allFinite());
  EXPECT_NEAR(a.P.sum(), 1.0, 1e-6);
  EXPECT_THROW(perplexity_affinities(X, 20.0), InvalidArgument);
  EXPECT_THROW(perplexity_affinities(X, 0.0), InvalidArgument);
}

TEST(Tsne, KlDecreasesAndMapIsCentred) {
  const auto start = std::chrono::steady_clock::now();
  const MatrixD X = random_matrix(100, 16, 3);
  const ProjectionMap m = tsne(X, descending(100));
  ASSERT_EQ(m.points.rows(), 100);
  ASSERT_EQ(m.points.cols(), 2);
  ASSERT_EQ(m.kl.size(), 1001u);
  EXPECT_LT(m.kl.back(), m.kl.front());
  EXPECT_TRUE(m.points.allFinite());
  EXPECT_LE(std::abs(m.points.col(0).mean()), 1e-6);
  EXPECT_LE(std::abs(m.points.col(1).mean()), 1e-6);
  EXPECT_DOUBLE_EQ(m.perplexity, 30.0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}

TEST(Tsne, DeterministicUnderSeed) {
  const MatrixD X = random_matrix(40, 8, 4);
  TsneConfig cfg;
  cfg.seed = 7;
  const ProjectionMap a = tsne(X, descending(40), cfg);
  const ProjectionMap b = tsne(X, descending(40), cfg);
  EXPECT_TRUE(a.points == b.points);
  EXPECT_EQ(a.kl, b.kl);
  cfg.seed = 8;
  EXPECT_FALSE(tsne(X, descending(40), cfg).points == a.points);
}

TEST(Tsne, SeparatesTwoClusters) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixD X(40, 16);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(16);
  offset(0) = 10.0;
  std::vector<int> label(40);
  for (int i = 0; i < 40; ++i) {
    label[i] = i % 2;
    for (int k = 0; k < 16; ++k) X(i, k) = n(rng) + (label[i] ? offset(k) : 0.0);
  }
  const ProjectionMap m = tsne(X, descending(40));
  Eigen::Vector2d c[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  for (int i = 0; i < 40; ++i) c[label[i]] += m.points.row(i).transpose() / 20.0;
  int correct = 0;
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector2d p = m.points.row(i).transpose();
    const int guess = (p - c[0]).norm() <= (p - c[1]).norm() ? 0 : 1;
    correct += guess == label[i];
  }
  EXPECT_EQ(correct, 40);
}

// The optimiser amplifies last-bit differences in P over 1000 iterations, so
// invariance is checked on the affinities and the starting objective.
TEST(Tsne, RotationLeavesAffinitiesAndInitialObjectiveUnchanged) {
  const MatrixD X = random_matrix(50, 6, 6);
  const Eigen::HouseholderQR<MatrixD> qr(random_matrix(6, 6, 7));
  const MatrixD Q = qr.householderQ();
  const MatrixD R = X * Q;
  const Affinities pa = perplexity_affinities(X, 10.0), pb = perplexity_affinities(R, 10.0);
  EXPECT_LE((pa.P - pb.P).cwiseAbs().maxCoeff(), 1e-9);
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  const ProjectionMap a = tsne(X, descending(50), cfg);
  const ProjectionMap b = tsne(R, descending(50), cfg);
  EXPECT_NEAR(a.kl.front(), b.kl.front(), 1e-6);
  EXPECT_LT(a.kl.back(), a.kl.front());
  EXPECT_LT(b.kl.back(), b.kl.front());
}

TEST(Tsne, ShortSequencesClampPerplexity) {
  EXPECT_DOUBLE_EQ(effective_perplexity(10, 30.0), 3.0);
  EXPECT_DOUBLE_EQ(effective_perplexity(1000, 30.0), 30.0);
  const ProjectionMap m = tsne(random_matrix(10, 4, 8), descending(10));
  EXPECT_DOUBLE_EQ(m.perplexity, 3.0);
  EXPECT_LT(m.kl.back(), m.kl.front());
  EXPECT_THROW(tsne(random_matrix(4, 4, 8), descending(4)), InvalidArgument);
  EXPECT_THROW(tsne(random_matrix(10, 4, 8), descending(9)), InvalidArgument);
}

TEST(Tsne, NonFiniteInputIsReported) {
  MatrixD X = random_matrix(10, 3, 9);
  X(2, 1) = std::nan("");
  EXPECT_ANY_THROW(tsne(X, descending(10)));
}

TEST(Trajectory, FollowsVisitOrder) {
  const MatrixD X = random_matrix(30, 5, 10);
  const ProjectionMap m = tsne(X, descending(30));
  const Trajectory t = trajectory(m);
  ASSERT_EQ(t.vertices.size(), 30u);
  EXPECT_EQ(t.step_at(0), 29);
  EXPECT_EQ(t.step_at(29), 0);
  for (std::size_t i = 0; i < t.vertices.size(); ++i) {
    EXPECT_EQ(t.step_at(i), m.steps[i]);
    EXPECT_EQ(t.vertices[i].x, m.points(i, 0));
    EXPECT_EQ(t.vertices[i].y, m.points(i, 1));
  }
}

diffusion::EmbeddingSequence denoiser_sequence(std::uint64_t seed) {
  diffusion::ArchConfig arch;
  arch.n_mels = 10;
  arch.channels = 12;
  arch.layers = 2;
  arch.n_speakers = 1;
  arch.excitation = false;
  const diffusion::Denoiser net(arch, seed, diffusion::OutputInit::kRandom);
  const diffusion::DenoiserPredictor pred(net);
  diffusion::ConditionSet c;
  c.content = diffusion::gaussian_matrix(8, diffusion::kContentDim, seed).cast<float>();
  c.melody = diffusion::MatrixF::Zero(8, diffusion::kMelodyDim);
  std::vector<int> steps;
  std::vector<diffusion::EmbeddingTaps> taps;
  diffusion::ddim_sample(pred, c, diffusion::make_schedule(40, 1e-3, 0.2), 40, seed,
                         [&](const diffusion::StepRecord& r) {
                           steps.push_back(r.step);
                           taps.push_back(*r.taps);
                         });
  return diffusion::capture_embeddings(steps, taps, diffusion::TapKind::kStepNoiseCond,
                                       diffusion::TapLayer::kLast);
}

TEST(Tsne, EmbeddingSequencesKeepStepLabels) {
  const diffusion::EmbeddingSequence seq = denoiser_sequence(1);
  const ProjectionMap m = tsne(seq);
  EXPECT_EQ(m.steps, seq.steps);
  EXPECT_LT(m.kl.back(), m.kl.front());
}

TEST(JointTsne, OffsetsPartitionRows) {
  const diffusion::EmbeddingSequence a = denoiser_sequence(1), b = denoiser_sequence(2);
  const JointProjection j = joint_tsne({&a, &b});
  EXPECT_EQ(j.offsets, (std::vector<int>{0, 40}));
  ASSERT_EQ(j.map.points.rows(), 80);
  for (int i = 0; i < 40; ++i) {
    EXPECT_EQ(j.map.steps[i], a.steps[i]);
    EXPECT_EQ(j.map.steps[40 + i], b.steps[i]);
  }
  EXPECT_LT(j.map.kl.back(), j.map.kl.front());
}

}  // namespace
}  // namespace singtrace::projection
