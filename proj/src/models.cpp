#include "amda/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "amda/error.hpp"
#include "amda/random.hpp"

namespace amda::models {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct DenseLayer {
  std::size_t in = 0, out = 0;
  std::size_t w = 0, b = 0;  // offsets; W is out x in column-major
};

struct ConvLayer {
  std::size_t cin = 0, cout = 0, dilation = 1;
  std::size_t w = 0, b = 0;  // kernel tap k occupies [w + k*cout*cin, ...)
};

struct Layout {
  std::vector<DenseLayer> dense;
  std::vector<ConvLayer> conv;
  std::size_t head_gap = 0, head_center = 0, head_bias = 0;
  std::size_t total = 0;
};

Layout make_layout(const ModelSpec& spec) {
  Layout l;
  std::size_t off = 0;
  if (spec.arch == Arch::DilatedConv) {
    std::size_t cin = 1;
    for (std::size_t d : spec.conv.dilations) {
      ConvLayer c{cin, spec.conv.channels, d, off, 0};
      off += spec.conv.kernel * c.cout * c.cin;
      c.b = off;
      off += c.cout;
      l.conv.push_back(c);
      cin = spec.conv.channels;
    }
    l.head_gap = off;
    off += spec.conv.channels;
    l.head_center = off;
    off += spec.conv.channels;
    l.head_bias = off++;
  } else {
    std::vector<std::size_t> sizes{spec.input_len};
    if (spec.arch == Arch::MLP) sizes.insert(sizes.end(), spec.hidden_sizes.begin(), spec.hidden_sizes.end());
    sizes.push_back(1);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      DenseLayer d{sizes[i], sizes[i + 1], off, 0};
      off += d.in * d.out;
      d.b = off;
      off += d.out;
      l.dense.push_back(d);
    }
  }
  l.total = off;
  return l;
}

// Signed offset of kernel tap k: (k - (K-1)/2) * dilation.
inline std::ptrdiff_t tap_offset(std::size_t k, std::size_t kernel, std::size_t dilation) {
  return (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(kernel - 1) / 2) *
         static_cast<std::ptrdiff_t>(dilation);
}

// Output columns [t0, t0 + n) read input columns [t0 + o, t0 + o + n).
inline void tap_range(std::ptrdiff_t o, std::size_t len, std::ptrdiff_t& t0, std::ptrdiff_t& n) {
  const auto L = static_cast<std::ptrdiff_t>(len);
  t0 = std::max<std::ptrdiff_t>(0, -o);
  n = std::min(L, L - o) - t0;
}

template <class T>
class Network {
 public:
  explicit Network(const ModelSpec& spec) : spec_(spec), layout_(make_layout(spec)) {}

  std::size_t size() const { return layout_.total; }

  void forward(const T* params, const T* x, std::size_t batch, T* out) const {
    if (spec_.arch == Arch::DilatedConv) {
      ConvCache cache;
      for (std::size_t b = 0; b < batch; ++b) out[b] = conv_forward(params, x + b * spec_.input_len, nullptr, cache);
    } else {
      std::vector<Mat<T>> acts;
      const Mat<T> y = dense_forward(params, x, batch, acts);
      for (std::size_t b = 0; b < batch; ++b) out[b] = y(0, static_cast<Eigen::Index>(b));
    }
  }

  /// Mean squared error over the batch; adds dL/dtheta into `grad` when
  /// non-null. `dropout` enables training-mode dropout.
  double loss_grad(const T* params, const T* x, const T* y, std::size_t batch, T* grad, Rng* dropout) const {
    if (grad) std::fill(grad, grad + layout_.total, T(0));
    const T scale = T(2) / static_cast<T>(batch);
    double loss = 0.0;
    if (spec_.arch == Arch::DilatedConv) {
      ConvCache cache;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xb = x + b * spec_.input_len;
        const T pred = conv_forward(params, xb, dropout, cache);
        const T err = pred - y[b];
        loss += static_cast<double>(err) * static_cast<double>(err);
        if (grad) conv_backward(params, cache, scale * err, grad);
      }
    } else {
      std::vector<Mat<T>> acts;
      const Mat<T> pred = dense_forward(params, x, batch, acts);
      Mat<T> dz(1, static_cast<Eigen::Index>(batch));
      for (std::size_t b = 0; b < batch; ++b) {
        const T err = pred(0, static_cast<Eigen::Index>(b)) - y[b];
        loss += static_cast<double>(err) * static_cast<double>(err);
        dz(0, static_cast<Eigen::Index>(b)) = scale * err;
      }
      if (grad) dense_backward(params, acts, dz, grad);
    }
    return loss / static_cast<double>(batch);
  }

 private:
  struct ConvCache {
    std::vector<Mat<T>> z;     // pre-activations per layer
    std::vector<Mat<T>> a;     // a[0] is the input, a[i + 1] the output of layer i
    std::vector<Mat<T>> mask;  // dropout multipliers; empty when disabled
  };

  Mat<T> dense_forward(const T* params, const T* x, std::size_t batch, std::vector<Mat<T>>& acts) const {
    const auto B = static_cast<Eigen::Index>(batch);
    acts.clear();
    acts.emplace_back(Eigen::Map<const Mat<T>>(x, static_cast<Eigen::Index>(spec_.input_len), B));
    Mat<T> z;
    for (std::size_t l = 0; l < layout_.dense.size(); ++l) {
      const DenseLayer& d = layout_.dense[l];
      Eigen::Map<const Mat<T>> W(params + d.w, static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.in));
      Eigen::Map<const Vec<T>> bias(params + d.b, static_cast<Eigen::Index>(d.out));
      z = W * acts.back();
      z.colwise() += bias;
      if (l + 1 < layout_.dense.size()) acts.emplace_back(z.cwiseMax(T(0)));
    }
    return z;
  }

  void dense_backward(const T* params, const std::vector<Mat<T>>& acts, Mat<T> dz, T* grad) const {
    for (std::size_t l = layout_.dense.size(); l-- > 0;) {
      const DenseLayer& d = layout_.dense[l];
      const auto out = static_cast<Eigen::Index>(d.out);
      const auto in = static_cast<Eigen::Index>(d.in);
      Eigen::Map<Mat<T>> gW(grad + d.w, out, in);
      Eigen::Map<Vec<T>> gb(grad + d.b, out);
      gW.noalias() += dz * acts[l].transpose();
      gb += dz.rowwise().sum();
      if (l == 0) break;
      Eigen::Map<const Mat<T>> W(params + d.w, out, in);
      Mat<T> da = W.transpose() * dz;
      dz = da.cwiseProduct((acts[l].array() > T(0)).template cast<T>().matrix());
    }
  }

  T conv_forward(const T* params, const T* x, Rng* dropout, ConvCache& c) const {
    const auto L = static_cast<Eigen::Index>(spec_.input_len);
    const std::size_t K = spec_.conv.kernel;
    const std::size_t layers = layout_.conv.size();
    c.z.resize(layers);
    c.a.resize(layers + 1);
    c.mask.resize(dropout ? layers : 0);
    c.a[0] = Eigen::Map<const Mat<T>>(x, 1, L);
    const T keep = T(1) - static_cast<T>(spec_.conv.dropout);
    for (std::size_t i = 0; i < layers; ++i) {
      const ConvLayer& cl = layout_.conv[i];
      const auto co = static_cast<Eigen::Index>(cl.cout);
      const auto ci = static_cast<Eigen::Index>(cl.cin);
      Eigen::Map<const Vec<T>> bias(params + cl.b, co);
      Mat<T>& z = c.z[i];
      z = bias.replicate(1, L);
      for (std::size_t k = 0; k < K; ++k) {
        Eigen::Map<const Mat<T>> W(params + cl.w + k * cl.cout * cl.cin, co, ci);
        std::ptrdiff_t t0, n;
        const std::ptrdiff_t o = tap_offset(k, K, cl.dilation);
        tap_range(o, spec_.input_len, t0, n);
        if (n > 0) z.middleCols(t0, n).noalias() += W * c.a[i].middleCols(t0 + o, n);
      }
      c.a[i + 1] = z.cwiseMax(T(0));
      if (dropout && spec_.conv.dropout > 0.0) {
        Mat<T>& m = c.mask[i];
        m.resize(co, L);
        for (Eigen::Index j = 0; j < m.size(); ++j) {
          m(j) = dropout->uniform() < static_cast<double>(keep) ? T(1) / keep : T(0);
        }
        c.a[i + 1] = c.a[i + 1].cwiseProduct(m);
      } else if (dropout) {
        c.mask[i] = Mat<T>::Ones(co, L);
      }
    }
    const auto C = static_cast<Eigen::Index>(spec_.conv.channels);
    Eigen::Map<const Vec<T>> wg(params + layout_.head_gap, C);
    Eigen::Map<const Vec<T>> wc(params + layout_.head_center, C);
    const Mat<T>& last = c.a[layers];
    const Vec<T> gap = last.rowwise().mean();
    return wg.dot(gap) + wc.dot(last.col(static_cast<Eigen::Index>(spec_.center_index))) + params[layout_.head_bias];
  }

  void conv_backward(const T* params, const ConvCache& c, T dout, T* grad) const {
    const auto L = static_cast<Eigen::Index>(spec_.input_len);
    const auto C = static_cast<Eigen::Index>(spec_.conv.channels);
    const auto center = static_cast<Eigen::Index>(spec_.center_index);
    const std::size_t K = spec_.conv.kernel;
    const std::size_t layers = layout_.conv.size();
    const Mat<T>& last = c.a[layers];

    Eigen::Map<const Vec<T>> wg(params + layout_.head_gap, C);
    Eigen::Map<const Vec<T>> wc(params + layout_.head_center, C);
    Eigen::Map<Vec<T>>(grad + layout_.head_gap, C) += dout * last.rowwise().mean();
    Eigen::Map<Vec<T>>(grad + layout_.head_center, C) += dout * last.col(center);
    grad[layout_.head_bias] += dout;

    Mat<T> da = (wg * (dout / static_cast<T>(L))).replicate(1, L);
    da.col(center) += dout * wc;
    for (std::size_t i = layers; i-- > 0;) {
      const ConvLayer& cl = layout_.conv[i];
      const auto co = static_cast<Eigen::Index>(cl.cout);
      const auto ci = static_cast<Eigen::Index>(cl.cin);
      Mat<T> dz = da.cwiseProduct((c.z[i].array() > T(0)).template cast<T>().matrix());
      if (!c.mask.empty()) dz = dz.cwiseProduct(c.mask[i]);
      Eigen::Map<Vec<T>>(grad + cl.b, co) += dz.rowwise().sum();
      Mat<T> da_prev;
      if (i > 0) da_prev = Mat<T>::Zero(ci, L);
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t off = cl.w + k * cl.cout * cl.cin;
        std::ptrdiff_t t0, n;
        const std::ptrdiff_t o = tap_offset(k, K, cl.dilation);
        tap_range(o, spec_.input_len, t0, n);
        if (n <= 0) continue;
        Eigen::Map<Mat<T>>(grad + off, co, ci).noalias() +=
            dz.middleCols(t0, n) * c.a[i].middleCols(t0 + o, n).transpose();
        if (i > 0) {
          Eigen::Map<const Mat<T>> W(params + off, co, ci);
          da_prev.middleCols(t0 + o, n).noalias() += W.transpose() * dz.middleCols(t0, n);
        }
      }
      if (i > 0) da = std::move(da_prev);
    }
  }

  ModelSpec spec_;
  Layout layout_;
};

void check_windows(const ModelSpec& spec, const pipeline::WindowedDataset& ds, const char* what) {
  if (ds.size() == 0) throw DataError(std::string(what) + " set is empty");
  if (ds.spec.window_len != spec.input_len) {
    throw DataError(std::string(what) + " windows have length " + std::to_string(ds.spec.window_len) +
                    ", model expects " + std::to_string(spec.input_len));
  }
}

double mse_float(const Network<float>& net, const std::vector<float>& params, const pipeline::WindowedDataset& ds) {
  constexpr std::size_t chunk = 256;
  std::vector<float> pred(chunk);
  double sum = 0.0;
  const std::size_t w = ds.spec.window_len;
  for (std::size_t s = 0; s < ds.size(); s += chunk) {
    const std::size_t b = std::min(chunk, ds.size() - s);
    net.forward(params.data(), ds.inputs.data() + s * w, b, pred.data());
    for (std::size_t i = 0; i < b; ++i) {
      const double e = static_cast<double>(pred[i]) - static_cast<double>(ds.targets[s + i]);
      sum += e * e;
    }
  }
  return sum / static_cast<double>(ds.size());
}

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (1u << 20)) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("truncated checkpoint");
  return s;
}

constexpr char kMagic[8] = {'A', 'M', 'D', 'A', 'C', 'K', 'P', '1'};

}  // namespace

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::Linear: return "linear";
    case Arch::MLP: return "mlp";
    case Arch::DilatedConv: return "dilated-conv";
  }
  return "?";
}

Arch parse_arch(const std::string& text) {
  if (text == "linear") return Arch::Linear;
  if (text == "mlp") return Arch::MLP;
  if (text == "dilated-conv" || text == "conv") return Arch::DilatedConv;
  throw ConfigError("unknown model architecture '" + text + "' (expected linear, mlp or dilated-conv)");
}

void ModelSpec::validate() const {
  if (input_len == 0) throw ConfigError("model input length must be positive");
  if (center_index >= input_len) throw ConfigError("model center index must lie inside the window");
  if (arch == Arch::MLP) {
    for (std::size_t h : hidden_sizes) {
      if (h == 0) throw ConfigError("MLP hidden sizes must be positive");
    }
  }
  if (arch == Arch::DilatedConv) {
    if (conv.channels == 0) throw ConfigError("conv channels must be positive");
    if (conv.kernel % 2 == 0) throw ConfigError("conv kernel size must be odd");
    if (conv.dilations.empty()) throw ConfigError("conv needs at least one dilation");
    if (!(conv.dropout >= 0.0 && conv.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    for (std::size_t d : conv.dilations) {
      if (d == 0) throw ConfigError("conv dilations must be positive");
    }
  }
}

std::size_t ModelSpec::parameter_count() const { return make_layout(*this).total; }

std::size_t ModelSpec::macs_per_window() const {
  const Layout l = make_layout(*this);
  std::size_t macs = 0;
  for (const DenseLayer& d : l.dense) macs += d.in * d.out;
  for (const ConvLayer& c : l.conv) macs += input_len * c.cout * c.cin * conv.kernel;
  if (arch == Arch::DilatedConv) macs += 2 * conv.channels;
  return macs;
}

void TrainOpts::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1 || patience >= max_epochs) throw ConfigError("patience must satisfy 1 <= patience < max_epochs");
}

double TrainedModel::best_val_loss() const {
  for (const EpochLog& e : log) {
    if (e.epoch == best_epoch) return e.val_loss;
  }
  throw DataError("best epoch missing from training log");
}

std::vector<float> init_parameters(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Layout l = make_layout(spec);
  std::vector<float> p(l.total, 0.0f);
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, bool relu) {
    const double a = std::sqrt((relu ? 6.0 : 3.0) / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) p[off + i] = static_cast<float>(rng.uniform(-a, a));
  };
  for (std::size_t i = 0; i < l.dense.size(); ++i) {
    const DenseLayer& d = l.dense[i];
    fill(d.w, d.in * d.out, d.in, i + 1 < l.dense.size());
  }
  for (const ConvLayer& c : l.conv) fill(c.w, spec.conv.kernel * c.cin * c.cout, spec.conv.kernel * c.cin, true);
  if (spec.arch == Arch::DilatedConv) fill(l.head_gap, 2 * spec.conv.channels, 2 * spec.conv.channels, false);
  return p;
}

TrainedModel train(const ModelSpec& spec, const pipeline::WindowedDataset& train_set,
                   const pipeline::WindowedDataset& val_set, const TrainOpts& opts) {
  spec.validate();
  opts.validate();
  check_windows(spec, train_set, "training");
  check_windows(spec, val_set, "validation");

  const Network<float> net(spec);
  TrainedModel model;
  model.spec = spec;
  std::vector<float> params = init_parameters(spec, derive_seed(opts.seed, "init"));
  std::vector<float> best = params;
  std::vector<float> grad(params.size());
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);

  const std::size_t w = spec.input_len;
  const std::size_t n = train_set.size();
  const std::size_t bs = std::min(opts.batch_size, n);
  std::vector<float> xb(bs * w);
  std::vector<float> yb(bs);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(opts.seed, "shuffle"));
  Rng dropout_rng(derive_seed(opts.seed, "dropout"));

  double best_val = mse_float(net, params, val_set);
  model.log.push_back({0, mse_float(net, params, train_set), best_val});
  int since_best = 0;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t s = 0; s < n; s += bs, ++batch_index) {
      const std::size_t b = std::min(bs, n - s);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t k = order[s + i];
        std::copy_n(train_set.inputs.data() + k * w, w, xb.data() + i * w);
        yb[i] = train_set.targets[k];
      }
      const double loss = net.loss_grad(params.data(), xb.data(), yb.data(), b, grad.data(), &dropout_rng);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      epoch_loss += loss * static_cast<double>(b);
      ++step;
      const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < params.size(); ++j) {
        const double g = grad[j];
        m[j] = opts.beta1 * m[j] + (1.0 - opts.beta1) * g;
        v[j] = opts.beta2 * v[j] + (1.0 - opts.beta2) * g * g;
        params[j] -= static_cast<float>(opts.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + opts.adam_eps));
      }
    }
    const double val = mse_float(net, params, val_set);
    if (!std::isfinite(val)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    model.log.push_back({epoch, epoch_loss / static_cast<double>(n), val});
    if (val < best_val) {
      best_val = val;
      best = params;
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  model.parameters = std::move(best);
  return model;
}

std::vector<float> predict(const ModelSpec& spec, std::span<const float> parameters, std::span<const float> inputs) {
  spec.validate();
  const Network<float> net(spec);
  if (parameters.size() != net.size()) {
    throw DataError("parameter vector has " + std::to_string(parameters.size()) + " entries, model expects " +
                    std::to_string(net.size()));
  }
  if (inputs.size() % spec.input_len != 0) throw DataError("input size is not a multiple of the window length");
  const std::size_t count = inputs.size() / spec.input_len;
  std::vector<float> out(count);
  constexpr std::size_t chunk = 256;
  for (std::size_t s = 0; s < count; s += chunk) {
    const std::size_t b = std::min(chunk, count - s);
    net.forward(parameters.data(), inputs.data() + s * spec.input_len, b, out.data() + s);
  }
  return out;
}

std::vector<float> predict(const TrainedModel& model, const pipeline::WindowedDataset& windows) {
  if (windows.spec.window_len != model.spec.input_len) {
    throw DataError("window length " + std::to_string(windows.spec.window_len) + " does not match model input " +
                    std::to_string(model.spec.input_len));
  }
  return predict(model.spec, model.parameters, windows.inputs);
}

double evaluate_mse(const TrainedModel& model, const pipeline::WindowedDataset& windows) {
  check_windows(model.spec, windows, "evaluation");
  return mse_float(Network<float>(model.spec), model.parameters, windows);
}

double loss_and_gradient(const ModelSpec& spec, std::span<const double> parameters, std::span<const double> inputs,
                         std::span<const double> targets, std::vector<double>& gradient) {
  spec.validate();
  const Network<double> net(spec);
  if (parameters.size() != net.size()) throw DataError("parameter vector size does not match the model");
  if (targets.empty() || inputs.size() != targets.size() * spec.input_len) {
    throw DataError("inputs and targets do not describe the same batch");
  }
  gradient.assign(net.size(), 0.0);
  return net.loss_grad(parameters.data(), inputs.data(), targets.data(), targets.size(), gradient.data(), nullptr);
}

GradientCheckResult gradient_check(const ModelSpec& spec, std::span<const double> parameters,
                                   std::span<const double> inputs, std::span<const double> targets) {
  GradientCheckResult r;
  loss_and_gradient(spec, parameters, inputs, targets, r.analytic);
  const Network<double> net(spec);
  std::vector<double> p(parameters.begin(), parameters.end());
  r.numeric.resize(p.size());
  const double h = kFiniteDifferenceStep;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = net.loss_grad(p.data(), inputs.data(), targets.data(), targets.size(), nullptr, nullptr);
    p[i] = saved - h;
    const double down = net.loss_grad(p.data(), inputs.data(), targets.data(), targets.size(), nullptr, nullptr);
    p[i] = saved;
    r.numeric[i] = (up - down) / (2.0 * h);
    const double a = r.analytic[i];
    const double num = r.numeric[i];
    const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6});
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_parameter = i;
    }
  }
  return r;
}

void write_checkpoint(std::ostream& out, const TrainedModel& model) {
  const ModelSpec& s = model.spec;
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.arch));
  write_pod<std::uint64_t>(out, s.input_len);
  write_pod<std::uint64_t>(out, s.center_index);
  write_pod<std::uint64_t>(out, s.hidden_sizes.size());
  for (std::size_t h : s.hidden_sizes) write_pod<std::uint64_t>(out, h);
  write_pod<std::uint64_t>(out, s.conv.channels);
  write_pod<std::uint64_t>(out, s.conv.kernel);
  write_pod<std::uint64_t>(out, s.conv.dilations.size());
  for (std::size_t d : s.conv.dilations) write_pod<std::uint64_t>(out, d);
  write_pod<double>(out, s.conv.dropout);
  write_pod<std::uint64_t>(out, model.parameters.size());
  out.write(reinterpret_cast<const char*>(model.parameters.data()),
            static_cast<std::streamsize>(model.parameters.size() * sizeof(float)));
  write_pod<std::uint64_t>(out, model.log.size());
  for (const EpochLog& e : model.log) {
    write_pod<std::int32_t>(out, e.epoch);
    write_pod<double>(out, e.train_loss);
    write_pod<double>(out, e.val_loss);
  }
  write_pod<std::int32_t>(out, model.best_epoch);
  write_pod<std::uint64_t>(out, model.metadata.size());
  for (const auto& [k, v] : model.metadata) {
    write_string(out, k);
    write_string(out, v);
  }
}

TrainedModel read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError("not a model checkpoint (bad magic)");
  }
  auto bounded = [&](std::uint64_t limit, const char* what) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > limit) throw DataError(std::string("checkpoint field out of range: ") + what);
    return static_cast<std::size_t>(n);
  };
  TrainedModel m;
  ModelSpec& s = m.spec;
  const auto arch = read_pod<std::uint32_t>(in);
  if (arch > static_cast<std::uint32_t>(Arch::DilatedConv)) throw DataError("unknown architecture in checkpoint");
  s.arch = static_cast<Arch>(arch);
  s.input_len = bounded(1u << 24, "input_len");
  s.center_index = bounded(1u << 24, "center_index");
  s.hidden_sizes.resize(bounded(64, "hidden layer count"));
  for (std::size_t& h : s.hidden_sizes) h = bounded(1u << 20, "hidden size");
  s.conv.channels = bounded(1u << 16, "channels");
  s.conv.kernel = bounded(1u << 10, "kernel");
  s.conv.dilations.resize(bounded(64, "dilation count"));
  for (std::size_t& d : s.conv.dilations) d = bounded(1u << 20, "dilation");
  s.conv.dropout = read_pod<double>(in);
  s.validate();
  const std::size_t n = bounded(1u << 28, "parameter count");
  if (n != s.parameter_count()) throw DataError("checkpoint parameter count does not match its model spec");
  m.parameters.resize(n);
  if (!in.read(reinterpret_cast<char*>(m.parameters.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw DataError("truncated checkpoint");
  }
  m.log.resize(bounded(1u << 20, "log length"));
  for (EpochLog& e : m.log) {
    e.epoch = read_pod<std::int32_t>(in);
    e.train_loss = read_pod<double>(in);
    e.val_loss = read_pod<double>(in);
  }
  m.best_epoch = read_pod<std::int32_t>(in);
  const std::size_t meta = bounded(1u << 16, "metadata count");
  for (std::size_t i = 0; i < meta; ++i) {
    std::string k = read_string(in);
    m.metadata[k] = read_string(in);
  }
  return m;
}

}  // namespace amda::models
