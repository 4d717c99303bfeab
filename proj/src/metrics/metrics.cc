#include "singtrace/metrics/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "singtrace/error.h"

namespace singtrace::metrics {

TimbreEmbedding timbre_embed(const audio::MelSpectrogram& m) {
  if (m.frames < 2) throw InvalidArgument("timbre_embed: need at least two frames");
  const int n = m.n_mels;
  TimbreEmbedding e(2 * n, 0.0);
  for (int f = 0; f < m.frames; ++f) {
    for (int k = 0; k < n; ++k) e[k] += m.at(f, k);
  }
  for (int k = 0; k < n; ++k) e[k] /= m.frames;
  for (int f = 0; f < m.frames; ++f) {
    for (int k = 0; k < n; ++k) {
      const double d = m.at(f, k) - e[k];
      e[n + k] += d * d;
    }
  }
  for (int k = 0; k < n; ++k) e[n + k] = std::sqrt(e[n + k] / m.frames);
  return e;
}

double dembed(const TimbreEmbedding& a, const TimbreEmbedding& b) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument("dembed: embeddings differ in dimension");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw InvalidArgument("dembed: zero embedding");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

namespace {

// Jointly voiced (f, g) pairs.
std::vector<std::pair<double, double>> joint_voiced(const audio::PitchContour& f,
                                                    const audio::PitchContour& g) {
  if (f.size() != g.size()) throw InvalidArgument("pitch contours differ in length");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.voiced(i) && g.voiced(i)) out.emplace_back(f.f0_hz[i], g.f0_hz[i]);
  }
  return out;
}

}  // namespace

double f0corr(const audio::PitchContour& f, const audio::PitchContour& g) {
  const auto pairs = joint_voiced(f, g);
  if (pairs.size() < 2) throw NumericError("f0corr: fewer than two jointly voiced frames");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= pairs.size();
  my /= pairs.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw NumericError("f0corr: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double f0rmse(const audio::PitchContour& f, const audio::PitchContour& g) {
  const auto pairs = joint_voiced(f, g);
  if (pairs.empty()) throw NumericError("f0rmse: no jointly voiced frames");
  double s = 0.0;
  for (const auto& [x, y] : pairs) s += (x - y) * (x - y);
  return std::sqrt(s / pairs.size());
}

DtwResult dtw_align(const audio::CepstralSequence& a, const audio::CepstralSequence& b) {
  if (a.frames < 1 || b.frames < 1) throw InvalidArgument("dtw: empty cepstral sequence");
  if (a.order != b.order) throw InvalidArgument("dtw: cepstral orders differ");
  const int n = a.frames, m = b.frames, K = a.order;
  std::vector<double> d(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    const auto ra = a.row(i);
    for (int j = 0; j < m; ++j) {
      const auto rb = b.row(j);
      double s = 0.0;
      for (int k = 1; k <= K; ++k) s += (ra[k] - rb[k]) * (ra[k] - rb[k]);
      d[static_cast<std::size_t>(i) * m + j] = std::sqrt(s);
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> D(d.size(), kInf);
  auto at = [m](int i, int j) { return static_cast<std::size_t>(i) * m + j; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double best = (i == 0 && j == 0) ? 0.0 : kInf;
      if (i > 0 && j > 0) best = std::min(best, D[at(i - 1, j - 1)]);
      if (i > 0) best = std::min(best, D[at(i - 1, j)]);
      if (j > 0) best = std::min(best, D[at(i, j - 1)]);
      D[at(i, j)] = best + d[at(i, j)];
    }
  }
  DtwResult r;
  r.cost = D[at(n - 1, m - 1)];
  int i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && D[at(i - 1, j - 1)] <= D[at(i - 1, j)] &&
        D[at(i - 1, j - 1)] <= D[at(i, j - 1)]) {
      --i;
      --j;
    } else if (i > 0 && (j == 0 || D[at(i - 1, j)] <= D[at(i, j - 1)])) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double mcd(const audio::CepstralSequence& a, const audio::CepstralSequence& b) {
  const DtwResult r = dtw_align(a, b);
  return kMcdScale * r.cost / static_cast<double>(r.path.size());
}

namespace {

void moments(const std::vector<std::vector<double>>& x, Eigen::VectorXd& mu,
             Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(x.size());
  const int dim = static_cast<int>(x[0].size());
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(x[i].size()) != dim) {
      throw InvalidArgument("fad: samples differ in dimension");
    }
    m.row(i) = Eigen::Map<const Eigen::RowVectorXd>(x[i].data(), dim);
  }
  mu = m.colwise().mean().transpose();
  const Eigen::MatrixXd c = m.rowwise() - mu.transpose();
  sigma = (c.transpose() * c) / (n - 1);
  sigma = 0.5 * (sigma + sigma.transpose());
  if (n <= dim) sigma.diagonal().array() += 1e-6;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fad(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("fad: need at least two samples per set");
  if (a[0].size() != b[0].size()) throw InvalidArgument("fad: sets differ in dimension");
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd s_a, s_b;
  moments(a, mu_a, s_a);
  moments(b, mu_b, s_b);
  const Eigen::MatrixXd root_a = sym_sqrt(s_a);
  Eigen::MatrixXd inner = root_a * s_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  const double tr_cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_cross;
  return std::max(0.0, value);
}

std::vector<TimbreEmbedding> window_embeddings(const audio::MelSpectrogram& m) {
  const int window = static_cast<int>(m.sample_rate / m.hop_length);
  const int hop = std::max(1, window / 2);
  std::vector<TimbreEmbedding> out;
  if (m.frames <= window) {
    out.push_back(timbre_embed(m));
    return out;
  }
  audio::MelSpectrogram w = m;
  w.frames = window;
  for (int start = 0; start + window <= m.frames; start += hop) {
    w.values.assign(m.values.begin() + static_cast<std::ptrdiff_t>(start) * m.n_mels,
                    m.values.begin() + static_cast<std::ptrdiff_t>(start + window) * m.n_mels);
    out.push_back(timbre_embed(w));
  }
  return out;
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kDembed: return "Dembed";
    case MetricKind::kF0Corr: return "F0CORR";
    case MetricKind::kFad: return "FAD";
    case MetricKind::kF0Rmse: return "F0RMSE";
    case MetricKind::kMcd: return "MCD";
  }
  return "?";
}

std::optional<MetricKind> parse_metric_kind(std::string_view s) {
  for (MetricKind k : kMetricKinds) {
    const std::string_view name = to_string(k);
    if (name.size() == s.size() &&
        std::equal(name.begin(), name.end(), s.begin(), [](char x, char y) {
          return std::tolower(static_cast<unsigned char>(x)) ==
                 std::tolower(static_cast<unsigned char>(y));
        })) {
      return k;
    }
  }
  return std::nullopt;
}

bool higher_is_better(MetricKind kind) {
  return kind == MetricKind::kDembed || kind == MetricKind::kF0Corr;
}

}  // namespace singtrace::metrics
