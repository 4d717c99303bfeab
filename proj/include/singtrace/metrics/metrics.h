#ifndef SINGTRACE_METRICS_METRICS_H_
#define SINGTRACE_METRICS_METRICS_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "singtrace/audio/cepstrum.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/pitch.h"

namespace singtrace::metrics {

// Per-channel mean followed by per-channel (population) standard deviation.
using TimbreEmbedding = std::vector<double>;

// Throws InvalidArgument for fewer than two frames.
TimbreEmbedding timbre_embed(const audio::MelSpectrogram& m);

// Cosine similarity. Throws InvalidArgument on dimension mismatch or a zero
// vector.
double dembed(const TimbreEmbedding& a, const TimbreEmbedding& b);

// Pearson r over frames voiced in both contours. Throws InvalidArgument on
// length mismatch and NumericError when fewer than two frames are jointly
// voiced or either restricted sequence has zero variance.
double f0corr(const audio::PitchContour& f, const audio::PitchContour& g);

// RMSE in Hz over jointly voiced frames. Throws NumericError when no frame
// is jointly voiced.
double f0rmse(const audio::PitchContour& f, const audio::PitchContour& g);

struct DtwResult {
  double cost = 0.0;                       // summed distance along the path
  std::vector<std::pair<int, int>> path;   // (i, j) from (0, 0) to (n-1, m-1)
};

// Monotone alignment with steps (1,0), (0,1), (1,1) minimising the summed
// Euclidean distance over cepstral coefficients 1..order.
DtwResult dtw_align(const audio::CepstralSequence& a, const audio::CepstralSequence& b);

// (10 / ln 10) * sqrt(2) * mean path distance, in dB.
double mcd(const audio::CepstralSequence& a, const audio::CepstralSequence& b);
inline constexpr double kMcdScale = 6.141851463713754;  // 10 / ln(10) * sqrt(2)

// Frechet distance between Gaussian fits of two sample sets (rows are
// samples). Sigma + 1e-6 I is used when a set has no more samples than
// dimensions. Throws InvalidArgument for fewer than two samples per set.
double fad(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

// Timbre embeddings of 1 s windows with 50 % overlap (62 frames, hop 31 at
// the default frame rate). Inputs shorter than one window give one
// embedding over the whole input.
std::vector<TimbreEmbedding> window_embeddings(const audio::MelSpectrogram& m);

enum class MetricKind { kDembed, kF0Corr, kFad, kF0Rmse, kMcd };
inline constexpr std::array<MetricKind, 5> kMetricKinds = {
    MetricKind::kDembed, MetricKind::kF0Corr, MetricKind::kFad, MetricKind::kF0Rmse,
    MetricKind::kMcd};

std::string_view to_string(MetricKind kind);
// Case-insensitive.
std::optional<MetricKind> parse_metric_kind(std::string_view s);
bool higher_is_better(MetricKind kind);

}  // namespace singtrace::metrics

#endif  // SINGTRACE_METRICS_METRICS_H_
