#include "segkey/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segkey/errors.hpp"

namespace segkey {

namespace {

// Output columns [first, last] whose input column ox*stride + k - pad is
// inside [0, in_w). Returns false when the range is empty.
bool valid_columns(std::size_t k, std::size_t pad, std::size_t stride,
                   std::size_t in_w, std::size_t out_w, std::size_t& first,
                   std::size_t& last) {
  const long lk = static_cast<long>(k), lpad = static_cast<long>(pad);
  const long ls = static_cast<long>(stride);
  long lo = 0;
  if (lpad > lk) lo = (lpad - lk + ls - 1) / ls;
  const long hi_num = static_cast<long>(in_w) - 1 + lpad - lk;
  if (hi_num < 0) return false;
  const long hi = std::min(hi_num / ls, static_cast<long>(out_w) - 1);
  if (lo > hi) return false;
  first = static_cast<std::size_t>(lo);
  last = static_cast<std::size_t>(hi);
  return true;
}

void check_conv(const FeatureMap& x, const ConvShape& shape,
                std::size_t weight_count, std::size_t bias_count) {
  if (x.channels() != shape.in_channels) {
    throw InvalidArgument("conv2d expects " + std::to_string(shape.in_channels) +
                          " input channels, got " +
                          std::to_string(x.channels()));
  }
  if (weight_count != shape.weight_count() || bias_count != shape.out_channels) {
    throw InvalidArgument("conv2d parameter size mismatch");
  }
  if (shape.kernel == 0 || shape.stride == 0) {
    throw InvalidArgument("conv2d kernel and stride must be positive");
  }
}

}  // namespace

FeatureMap conv2d(const FeatureMap& x, const ConvShape& shape,
                  std::span<const double> weights, std::span<const double> bias) {
  check_conv(x, shape, weights.size(), bias.size());
  const std::size_t k = shape.kernel, s = shape.stride, pad = k / 2;
  const std::size_t in_h = x.height(), in_w = x.width();
  const std::size_t out_h = shape.out_extent(in_h);
  const std::size_t out_w = shape.out_extent(in_w);
  FeatureMap out(shape.out_channels, out_h, out_w);

  for (std::size_t oc = 0; oc < shape.out_channels; ++oc) {
    auto out_plane = out.plane(oc);
    std::ranges::fill(out_plane, bias[oc]);
    for (std::size_t ic = 0; ic < shape.in_channels; ++ic) {
      const auto in_plane = x.plane(ic);
      const double* w = &weights[(oc * shape.in_channels + ic) * k * k];
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = w[ky * k + kx];
          std::size_t ox0, ox1;
          if (!valid_columns(kx, pad, s, in_w, out_w, ox0, ox1)) continue;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
            const double* in_row = &in_plane[static_cast<std::size_t>(iy) * in_w];
            double* out_row = &out_plane[oy * out_w];
            for (std::size_t ox = ox0; ox <= ox1; ++ox) {
              out_row[ox] += wv * in_row[ox * s + kx - pad];
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureMap conv2d_backward(const FeatureMap& x, const FeatureMap& grad_out,
                           const ConvShape& shape,
                           std::span<const double> weights,
                           std::span<double> grad_weights,
                           std::span<double> grad_bias) {
  check_conv(x, shape, weights.size(), grad_bias.size());
  if (grad_weights.size() != weights.size()) {
    throw InvalidArgument("conv2d gradient buffer size mismatch");
  }
  const std::size_t k = shape.kernel, s = shape.stride, pad = k / 2;
  const std::size_t in_h = x.height(), in_w = x.width();
  const std::size_t out_h = grad_out.height(), out_w = grad_out.width();
  if (grad_out.channels() != shape.out_channels ||
      out_h != shape.out_extent(in_h) || out_w != shape.out_extent(in_w)) {
    throw InvalidArgument("conv2d upstream gradient has the wrong shape");
  }
  FeatureMap grad_in(x.channels(), in_h, in_w);

  for (std::size_t oc = 0; oc < shape.out_channels; ++oc) {
    const auto g_plane = grad_out.plane(oc);
    double bias_sum = 0.0;
    for (double g : g_plane) bias_sum += g;
    grad_bias[oc] += bias_sum;
    for (std::size_t ic = 0; ic < shape.in_channels; ++ic) {
      const auto in_plane = x.plane(ic);
      auto gin_plane = grad_in.plane(ic);
      const std::size_t base = (oc * shape.in_channels + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = weights[base + ky * k + kx];
          double gw = 0.0;
          std::size_t ox0, ox1;
          if (!valid_columns(kx, pad, s, in_w, out_w, ox0, ox1)) continue;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
            const std::size_t row = static_cast<std::size_t>(iy) * in_w;
            const double* in_row = &in_plane[row];
            double* gin_row = &gin_plane[row];
            const double* g_row = &g_plane[oy * out_w];
            for (std::size_t ox = ox0; ox <= ox1; ++ox) {
              const std::size_t ix = ox * s + kx - pad;
              gw += g_row[ox] * in_row[ix];
              gin_row[ix] += wv * g_row[ox];
            }
          }
          grad_weights[base + ky * k + kx] += gw;
        }
      }
    }
  }
  return grad_in;
}

void relu_inplace(FeatureMap& x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(FeatureMap& grad, const FeatureMap& activation) {
  auto& g = grad.data();
  const auto& a = activation.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(a[i] > 0.0)) g[i] = 0.0;
  }
}

namespace {

struct Tap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<Tap> upsample_taps(std::size_t in, std::size_t factor) {
  std::vector<Tap> taps(in * factor);
  for (std::size_t d = 0; d < taps.size(); ++d) {
    double src = (static_cast<double>(d) + 0.5) / static_cast<double>(factor) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

FeatureMap bilinear_upsample(const FeatureMap& x, std::size_t factor) {
  if (factor == 0) throw InvalidArgument("upsample factor must be >= 1");
  if (factor == 1) return x;
  const auto rows = upsample_taps(x.height(), factor);
  const auto cols = upsample_taps(x.width(), factor);
  FeatureMap out(x.channels(), rows.size(), cols.size());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < rows.size(); ++y) {
      const Tap& ry = rows[y];
      for (std::size_t xo = 0; xo < cols.size(); ++xo) {
        const Tap& rx = cols[xo];
        const double a = x.at(c, ry.i0, rx.i0), b = x.at(c, ry.i0, rx.i1);
        const double d = x.at(c, ry.i1, rx.i0), e = x.at(c, ry.i1, rx.i1);
        const double top = a + rx.frac * (b - a);
        const double bottom = d + rx.frac * (e - d);
        out.at(c, y, xo) = top + ry.frac * (bottom - top);
      }
    }
  }
  return out;
}

FeatureMap bilinear_upsample_backward(const FeatureMap& grad_out,
                                      std::size_t factor) {
  if (factor == 0) throw InvalidArgument("upsample factor must be >= 1");
  if (factor == 1) return grad_out;
  if (grad_out.height() % factor != 0 || grad_out.width() % factor != 0) {
    throw InvalidArgument("upsample gradient extent not divisible by factor");
  }
  const std::size_t in_h = grad_out.height() / factor;
  const std::size_t in_w = grad_out.width() / factor;
  const auto rows = upsample_taps(in_h, factor);
  const auto cols = upsample_taps(in_w, factor);
  FeatureMap grad_in(grad_out.channels(), in_h, in_w);
  for (std::size_t c = 0; c < grad_out.channels(); ++c) {
    for (std::size_t y = 0; y < rows.size(); ++y) {
      const Tap& ry = rows[y];
      for (std::size_t xo = 0; xo < cols.size(); ++xo) {
        const Tap& rx = cols[xo];
        const double g = grad_out.at(c, y, xo);
        const double g_top = (1.0 - ry.frac) * g, g_bottom = ry.frac * g;
        grad_in.at(c, ry.i0, rx.i0) += (1.0 - rx.frac) * g_top;
        grad_in.at(c, ry.i0, rx.i1) += rx.frac * g_top;
        grad_in.at(c, ry.i1, rx.i0) += (1.0 - rx.frac) * g_bottom;
        grad_in.at(c, ry.i1, rx.i1) += rx.frac * g_bottom;
      }
    }
  }
  return grad_in;
}

CrossEntropyResult cross_entropy(const FeatureMap& logits,
                                 const LabelMap& labels,
                                 std::optional<int> ignore_index) {
  if (logits.height() != labels.height || logits.width() != labels.width) {
    throw InvalidArgument("cross_entropy: logits and labels differ in size");
  }
  const std::size_t classes = logits.channels();
  const std::size_t plane = logits.plane_size();
  CrossEntropyResult result;
  result.grad = FeatureMap(classes, logits.height(), logits.width());

  for (std::size_t i = 0; i < plane; ++i) {
    const int label = labels.data[i];
    if (ignore_index && label == *ignore_index) continue;
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
    ++result.counted;
  }
  if (result.counted == 0) return result;

  const double inv_count = 1.0 / static_cast<double>(result.counted);
  const auto& in = logits.data();
  auto& grad = result.grad.data();
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const int label = labels.data[i];
    if (ignore_index && label == *ignore_index) continue;
    double max_logit = in[i];
    for (std::size_t c = 1; c < classes; ++c) {
      max_logit = std::max(max_logit, in[c * plane + i]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double e = std::exp(in[c * plane + i] - max_logit);
      grad[c * plane + i] = e;
      sum += e;
    }
    const double log_sum = std::log(sum);
    total += -(in[static_cast<std::size_t>(label) * plane + i] - max_logit - log_sum);
    for (std::size_t c = 0; c < classes; ++c) {
      grad[c * plane + i] *= inv_count / sum;
    }
    grad[static_cast<std::size_t>(label) * plane + i] -= inv_count;
  }
  result.loss = total * inv_count;
  return result;
}

LabelMap argmax_channels(const FeatureMap& logits) {
  LabelMap out(logits.height(), logits.width());
  const std::size_t plane = logits.plane_size();
  const auto& in = logits.data();
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.channels(); ++c) {
      if (in[c * plane + i] > in[best * plane + i]) best = c;
    }
    out.data[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace segkey
