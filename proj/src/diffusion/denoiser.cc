#include "singtrace/diffusion/denoiser.h"

#include <cmath>
#include <random>

#include "singtrace/error.h"

namespace singtrace::diffusion {

namespace {

// Flat-vector offsets of every tensor, in layout order.
struct Offsets {
  struct Layer {
    std::size_t step_w, step_b, conv_w, conv_b, cond_w, cond_b, out_w, out_b;
  };
  std::size_t in_w, in_b, fc1_w, fc1_b, fc2_w, fc2_b;
  std::size_t content_w, melody_w, excitation_w = 0, speaker, cond_b;
  std::vector<Layer> layers;
  std::size_t skip_w, skip_b, final_w, final_b, gain_w, gain_b;
};

std::vector<ParamSlot> build_layout(const ArchConfig& a, Offsets* off) {
  std::vector<ParamSlot> slots;
  std::size_t pos = 0;
  auto add = [&](std::string name, int rows, int cols) {
    slots.push_back({std::move(name), pos, rows, cols});
    const std::size_t at = pos;
    pos += static_cast<std::size_t>(rows) * cols;
    return at;
  };
  const int c = a.channels;
  Offsets o;
  o.in_w = add("input.w", a.n_mels, c);
  o.in_b = add("input.b", 1, c);
  o.fc1_w = add("step.fc1.w", kStepCodeDim, c);
  o.fc1_b = add("step.fc1.b", 1, c);
  o.fc2_w = add("step.fc2.w", c, c);
  o.fc2_b = add("step.fc2.b", 1, c);
  o.content_w = add("cond.content.w", kContentDim, c);
  o.melody_w = add("cond.melody.w", a.melody_features(), c);
  if (a.excitation) o.excitation_w = add("cond.excitation.w", a.n_mels, c);
  o.speaker = add("cond.speaker_table", a.n_speakers, c);
  o.cond_b = add("cond.b", 1, c);
  for (int l = 0; l < a.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Offsets::Layer L;
    L.step_w = add(p + "step.w", c, c);
    L.step_b = add(p + "step.b", 1, c);
    L.conv_w = add(p + "conv.w", a.kernel_size * c, 2 * c);
    L.conv_b = add(p + "conv.b", 1, 2 * c);
    L.cond_w = add(p + "cond.w", c, 2 * c);
    L.cond_b = add(p + "cond.b", 1, 2 * c);
    L.out_w = add(p + "out.w", c, 2 * c);
    L.out_b = add(p + "out.b", 1, 2 * c);
    o.layers.push_back(L);
  }
  o.skip_w = add("head.skip.w", c, c);
  o.skip_b = add("head.skip.b", 1, c);
  o.final_w = add("head.out.w", c, a.n_mels);
  o.final_b = add("head.out.b", 1, a.n_mels);
  o.gain_w = add("head.out.gain.w", c, a.n_mels);
  o.gain_b = add("head.out.gain.b", 1, a.n_mels);
  if (off != nullptr) *off = o;
  return slots;
}

template <typename Scalar>
using ConstMap = Eigen::Map<const Matrix<Scalar>>;
template <typename Scalar>
using MutMap = Eigen::Map<Matrix<Scalar>>;

template <typename Scalar>
ConstMap<Scalar> view(const std::vector<Scalar>& p, std::size_t offset, int rows, int cols) {
  return ConstMap<Scalar>(p.data() + offset, rows, cols);
}

template <typename Scalar>
MutMap<Scalar> view(std::vector<Scalar>& p, std::size_t offset, int rows, int cols) {
  return MutMap<Scalar>(p.data() + offset, rows, cols);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse();
}

template <typename Scalar>
Matrix<Scalar> swish(const Matrix<Scalar>& x) {
  return (x.array() * sigmoid(x.array())).matrix();
}

// d swish(u) / du = s + u * s * (1 - s), s = sigmoid(u).
template <typename Scalar>
Matrix<Scalar> swish_grad(const Matrix<Scalar>& u) {
  const auto s = sigmoid(u.array()).eval();
  return (s + u.array() * s * (Scalar(1) - s)).matrix();
}

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

}  // namespace

void ArchConfig::validate() const {
  if (n_mels < 1 || channels < 1 || layers < 1 || n_speakers < 1) {
    throw InvalidArgument("arch: dimensions must be positive");
  }
  if (dilation_cycle < 1 || dilation_cycle > 12) {
    throw InvalidArgument("arch: dilation cycle must lie in [1, 12]");
  }
  if (kernel_size != 3) throw InvalidArgument("arch: kernel size must be 3");
  if (pitch_bins < 0 || (pitch_bins > 1 && !(pitch_max > pitch_min))) {
    throw InvalidArgument("arch: invalid pitch-bin range");
  }
}

template <typename Scalar>
Matrix<Scalar> melody_features(const MatrixF& melody, const ArchConfig& arch) {
  const int bins = arch.pitch_bins;
  Matrix<Scalar> f = Matrix<Scalar>::Zero(melody.rows(), kMelodyDim + bins);
  f.leftCols(kMelodyDim) = melody.template cast<Scalar>();
  if (bins == 0) return f;
  const double spacing = bins > 1 ? (arch.pitch_max - arch.pitch_min) / (bins - 1) : 1.0;
  for (Eigen::Index i = 0; i < melody.rows(); ++i) {
    if (melody(i, 1) <= 0.0f) continue;
    for (int b = 0; b < bins; ++b) {
      const double u = (melody(i, 0) - (arch.pitch_min + b * spacing)) / spacing;
      f(i, kMelodyDim + b) = static_cast<Scalar>(std::exp(-0.5 * u * u));
    }
  }
  return f;
}

template Matrix<float> melody_features<float>(const MatrixF&, const ArchConfig&);
template Matrix<double> melody_features<double>(const MatrixF&, const ArchConfig&);

std::vector<double> step_code(int t) {
  const int half = kStepCodeDim / 2;
  std::vector<double> code(kStepCodeDim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10.0, 4.0 * i / (half - 1));
    code[i] = std::sin(t * freq);
    code[half + i] = std::cos(t * freq);
  }
  return code;
}

std::vector<ParamSlot> param_layout(const ArchConfig& arch) {
  return build_layout(arch, nullptr);
}

std::size_t param_count(const ArchConfig& arch) {
  const auto slots = param_layout(arch);
  return slots.back().offset + slots.back().size();
}

template <typename Scalar>
BasicDenoiser<Scalar>::BasicDenoiser(const ArchConfig& arch, std::uint64_t seed,
                                     OutputInit output_init)
    : arch_(arch) {
  arch_.validate();
  layout_ = param_layout(arch_);
  params_.assign(diffusion::param_count(arch_), Scalar(0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const ParamSlot& slot : layout_) {
    const bool bias = slot.name.ends_with(".b");
    const bool head = slot.name.starts_with("head.out");
    if (bias || (head && output_init == OutputInit::kZero)) continue;
    double stddev = 1.0 / std::sqrt(static_cast<double>(slot.rows));
    if (slot.name == "cond.speaker_table") stddev = 0.5;
    for (std::size_t i = 0; i < slot.size(); ++i) {
      params_[slot.offset + i] = static_cast<Scalar>(stddev * gauss(rng));
    }
  }
}

template <typename Scalar>
BasicDenoiser<Scalar>::BasicDenoiser(const ArchConfig& arch, std::vector<Scalar> params)
    : arch_(arch), params_(std::move(params)) {
  arch_.validate();
  layout_ = param_layout(arch_);
  if (params_.size() != diffusion::param_count(arch_)) {
    throw InvalidArgument("denoiser: parameter count does not match architecture");
  }
}

template <typename Scalar>
typename BasicDenoiser<Scalar>::Mat BasicDenoiser<Scalar>::forward(
    const Mat& y_t, int t, const ConditionSet& c, EmbeddingTaps* taps,
    Cache* cache) const {
  c.validate();
  if (y_t.cols() != arch_.n_mels) throw InvalidArgument("denoiser: n_mels mismatch");
  if (c.frames() != y_t.rows()) {
    throw InvalidArgument("denoiser: condition frame count differs from input");
  }
  if (c.speaker < 0 || c.speaker >= arch_.n_speakers) {
    throw InvalidArgument("denoiser: speaker index outside look-up table");
  }
  if (arch_.excitation && c.excitation.cols() != arch_.n_mels) {
    throw InvalidArgument("denoiser: conditions lack the excitation stream");
  }
  Offsets o;
  build_layout(arch_, &o);
  const auto& p = params_;
  const int ch = arch_.channels;
  const int frames = static_cast<int>(y_t.rows());
  const Scalar inv_sqrt2 = Scalar(1.0 / std::sqrt(2.0));

  const Mat x0_pre =
      (y_t * view(p, o.in_w, arch_.n_mels, ch)).rowwise() +
      view(p, o.in_b, 1, ch).row(0);
  Mat x = relu(x0_pre);

  const std::vector<double> code_d = step_code(t);
  RowVector<Scalar> code(kStepCodeDim);
  for (int i = 0; i < kStepCodeDim; ++i) code[i] = static_cast<Scalar>(code_d[i]);
  const Mat fc1_pre = code * view(p, o.fc1_w, kStepCodeDim, ch) + view(p, o.fc1_b, 1, ch);
  const Mat fc1 = swish(fc1_pre);
  const Mat fc2_pre = fc1 * view(p, o.fc2_w, ch, ch) + view(p, o.fc2_b, 1, ch);
  const Mat fc2 = swish(fc2_pre);

  const Mat content = c.content.template cast<Scalar>();
  const Mat melody = melody_features<Scalar>(c.melody, arch_);
  Mat cond_pre = content * view(p, o.content_w, kContentDim, ch) +
                 melody * view(p, o.melody_w, arch_.melody_features(), ch);
  Mat excitation;
  if (arch_.excitation) {
    excitation = c.excitation.template cast<Scalar>();
    cond_pre.noalias() += excitation * view(p, o.excitation_w, arch_.n_mels, ch);
  }
  cond_pre.rowwise() += view(p, o.speaker, arch_.n_speakers, ch).row(c.speaker) +
                        view(p, o.cond_b, 1, ch).row(0);
  const Mat cond = swish(cond_pre);

  if (taps != nullptr) {
    taps->step.assign(code_d.begin(), code_d.end());
  }
  if (cache != nullptr) {
    cache->t = t;
    cache->speaker = c.speaker;
    cache->y = y_t;
    cache->x0_pre = x0_pre;
    cache->content = content;
    cache->melody = melody;
    cache->excitation = excitation;
    cache->cond_pre = cond_pre;
    cache->cond = cond;
    cache->code = code;
    cache->fc1_pre = fc1_pre;
    cache->fc1 = fc1;
    cache->fc2_pre = fc2_pre;
    cache->fc2 = fc2;
    cache->layers.assign(arch_.layers, {});
  }

  const auto tapped = arch_.tapped_layers();
  Mat skip_acc = Mat::Zero(frames, ch);
  for (int l = 0; l < arch_.layers; ++l) {
    const auto& L = o.layers[l];
    const int d = arch_.dilation(l);
    Mat h = x;
    h.rowwise() += (fc2 * view(p, L.step_w, ch, ch) + view(p, L.step_b, 1, ch)).row(0);

    Mat z = cond * view(p, L.cond_w, ch, 2 * ch);
    z.rowwise() += view(p, L.conv_b, 1, 2 * ch).row(0) + view(p, L.cond_b, 1, 2 * ch).row(0);
    for (int k = 0; k < arch_.kernel_size; ++k) {
      const int shift = (k - 1) * d;
      const int len = frames - std::abs(shift);
      if (len <= 0) continue;
      const int dst = std::max(0, -shift);
      const int src = std::max(0, shift);
      z.middleRows(dst, len).noalias() +=
          h.middleRows(src, len) * view(p, L.conv_w + static_cast<std::size_t>(k) * ch * 2 * ch, ch, 2 * ch);
    }
    const Mat gate = (z.leftCols(ch).array().tanh() * sigmoid(z.rightCols(ch).array())).matrix();
    const Mat out = (gate * view(p, L.out_w, ch, 2 * ch)).rowwise() +
                    view(p, L.out_b, 1, 2 * ch).row(0);
    x = (x + out.leftCols(ch)) * inv_sqrt2;
    skip_acc += out.rightCols(ch);

    if (taps != nullptr) {
      for (int slot = 0; slot < 3; ++slot) {
        if (tapped[slot] != l) continue;
        const RowVector<Scalar> hm = h.colwise().mean();
        const RowVector<Scalar> gm = gate.colwise().mean();
        taps->step_noise[slot].assign(hm.data(), hm.data() + ch);
        taps->step_noise_cond[slot].assign(gm.data(), gm.data() + ch);
      }
    }
    if (cache != nullptr) {
      cache->layers[l] = {std::move(h), std::move(z), gate};
    }
  }

  const Mat skip = skip_acc * Scalar(1.0 / std::sqrt(static_cast<double>(arch_.layers)));
  const Mat head_pre = (skip * view(p, o.skip_w, ch, ch)).rowwise() + view(p, o.skip_b, 1, ch).row(0);
  Mat eps = (relu(head_pre) * view(p, o.final_w, ch, arch_.n_mels)).rowwise() +
            view(p, o.final_b, 1, arch_.n_mels).row(0);
  const RowVector<Scalar> gain =
      fc2 * view(p, o.gain_w, ch, arch_.n_mels) + view(p, o.gain_b, 1, arch_.n_mels);
  eps.array() += y_t.array().rowwise() * gain.array();
  if (cache != nullptr) {
    cache->skip = skip;
    cache->head_pre = head_pre;
  }
  return eps;
}

template <typename Scalar>
void BasicDenoiser<Scalar>::backward(const Cache& cache, const Mat& d_eps,
                                     std::vector<Scalar>& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), Scalar(0));
  Offsets o;
  build_layout(arch_, &o);
  const auto& p = params_;
  auto& g = grad;
  const int ch = arch_.channels;
  const int nm = arch_.n_mels;
  const int frames = static_cast<int>(cache.y.rows());
  const Scalar inv_sqrt2 = Scalar(1.0 / std::sqrt(2.0));

  // Step-dependent per-channel bypass gain.
  const RowVector<Scalar> d_gain = (d_eps.array() * cache.y.array()).colwise().sum();
  view(g, o.gain_w, ch, nm).noalias() += cache.fc2.transpose() * d_gain;
  view(g, o.gain_b, 1, nm) += d_gain;

  // Output head.
  const Mat head = relu(cache.head_pre);
  view(g, o.final_w, ch, nm).noalias() += head.transpose() * d_eps;
  view(g, o.final_b, 1, nm) += d_eps.colwise().sum();
  Mat d_head_pre = d_eps * view(p, o.final_w, ch, nm).transpose();
  d_head_pre.array() *= (cache.head_pre.array() > Scalar(0)).template cast<Scalar>();
  view(g, o.skip_w, ch, ch).noalias() += cache.skip.transpose() * d_head_pre;
  view(g, o.skip_b, 1, ch) += d_head_pre.colwise().sum();
  const Mat d_skip_acc = (d_head_pre * view(p, o.skip_w, ch, ch).transpose()) *
                         Scalar(1.0 / std::sqrt(static_cast<double>(arch_.layers)));

  Mat d_x = Mat::Zero(frames, ch);
  Mat d_cond = Mat::Zero(frames, ch);
  RowVector<Scalar> d_fc2 = d_gain * view(p, o.gain_w, ch, nm).transpose();
  for (int l = arch_.layers - 1; l >= 0; --l) {
    const auto& L = o.layers[l];
    const auto& C = cache.layers[l];
    const int d = arch_.dilation(l);

    Mat d_out(frames, 2 * ch);
    d_out.leftCols(ch) = d_x * inv_sqrt2;
    d_out.rightCols(ch) = d_skip_acc;
    Mat d_x_in = d_x * inv_sqrt2;
    view(g, L.out_w, ch, 2 * ch).noalias() += C.gate.transpose() * d_out;
    view(g, L.out_b, 1, 2 * ch) += d_out.colwise().sum();
    const Mat d_gate = d_out * view(p, L.out_w, ch, 2 * ch).transpose();

    const auto a = C.z.leftCols(ch).array().tanh().eval();
    const auto b = sigmoid(C.z.rightCols(ch).array()).eval();
    Mat d_z(frames, 2 * ch);
    d_z.leftCols(ch) = (d_gate.array() * b * (Scalar(1) - a * a)).matrix();
    d_z.rightCols(ch) = (d_gate.array() * a * b * (Scalar(1) - b)).matrix();

    const RowVector<Scalar> dz_sum = d_z.colwise().sum();
    view(g, L.conv_b, 1, 2 * ch) += dz_sum;
    view(g, L.cond_b, 1, 2 * ch) += dz_sum;
    view(g, L.cond_w, ch, 2 * ch).noalias() += cache.cond.transpose() * d_z;
    d_cond.noalias() += d_z * view(p, L.cond_w, ch, 2 * ch).transpose();

    Mat d_h = Mat::Zero(frames, ch);
    for (int k = 0; k < arch_.kernel_size; ++k) {
      const int shift = (k - 1) * d;
      const int len = frames - std::abs(shift);
      if (len <= 0) continue;
      const int dst = std::max(0, -shift);
      const int src = std::max(0, shift);
      const std::size_t wk = L.conv_w + static_cast<std::size_t>(k) * ch * 2 * ch;
      view(g, wk, ch, 2 * ch).noalias() += C.h.middleRows(src, len).transpose() * d_z.middleRows(dst, len);
      d_h.middleRows(src, len).noalias() += d_z.middleRows(dst, len) * view(p, wk, ch, 2 * ch).transpose();
    }

    d_x_in += d_h;
    const RowVector<Scalar> d_sp = d_h.colwise().sum();
    view(g, L.step_w, ch, ch).noalias() += cache.fc2.transpose() * d_sp;
    view(g, L.step_b, 1, ch) += d_sp;
    d_fc2.noalias() += d_sp * view(p, L.step_w, ch, ch).transpose();
    d_x = std::move(d_x_in);
  }

  // Input projection.
  Mat d_x0_pre = d_x;
  d_x0_pre.array() *= (cache.x0_pre.array() > Scalar(0)).template cast<Scalar>();
  view(g, o.in_w, nm, ch).noalias() += cache.y.transpose() * d_x0_pre;
  view(g, o.in_b, 1, ch) += d_x0_pre.colwise().sum();

  // Condition encoder.
  const Mat d_cond_pre = (d_cond.array() * swish_grad(cache.cond_pre).array()).matrix();
  view(g, o.content_w, kContentDim, ch).noalias() += cache.content.transpose() * d_cond_pre;
  view(g, o.melody_w, arch_.melody_features(), ch).noalias() += cache.melody.transpose() * d_cond_pre;
  if (arch_.excitation) {
    view(g, o.excitation_w, nm, ch).noalias() += cache.excitation.transpose() * d_cond_pre;
  }
  const RowVector<Scalar> dc_sum = d_cond_pre.colwise().sum();
  view(g, o.speaker, arch_.n_speakers, ch).row(cache.speaker) += dc_sum;
  view(g, o.cond_b, 1, ch) += dc_sum;

  // Step pathway.
  const Mat d_fc2_pre = (d_fc2.array() * swish_grad(cache.fc2_pre).array()).matrix();
  view(g, o.fc2_w, ch, ch).noalias() += cache.fc1.transpose() * d_fc2_pre;
  view(g, o.fc2_b, 1, ch) += d_fc2_pre;
  const Mat d_fc1 = d_fc2_pre * view(p, o.fc2_w, ch, ch).transpose();
  const Mat d_fc1_pre = (d_fc1.array() * swish_grad(cache.fc1_pre).array()).matrix();
  view(g, o.fc1_w, kStepCodeDim, ch).noalias() += cache.code.transpose() * d_fc1_pre;
  view(g, o.fc1_b, 1, ch) += d_fc1_pre;
}

template class BasicDenoiser<float>;
template class BasicDenoiser<double>;

}  // namespace singtrace::diffusion
