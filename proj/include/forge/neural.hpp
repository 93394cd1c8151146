#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "forge/csv.hpp"
#include "forge/resample.hpp"
#include "forge/table.hpp"

namespace forge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputMode : std::uint32_t { Softmax = 0, Linear = 1 };
enum class InitScheme { GlorotUniform, HeUniform };
enum class OptimizerKind { Adam, Sgd };

/// Dense feed-forward network: ReLU hidden layers, softmax or linear output.
/// Layer l maps size[l] -> size[l+1] with weights of shape (size[l+1] x size[l]).
struct MLPModel {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  OutputMode output_mode = OutputMode::Softmax;

  static MLPModel create(std::vector<std::size_t> sizes, OutputMode mode, InitScheme init, std::uint64_t seed) {
    if (sizes.size() < 2) throw Error(ErrorKind::ShapeMismatch, "an MLP needs input and output sizes");
    for (auto s : sizes) {
      if (s == 0) throw Error(ErrorKind::ShapeMismatch, "layer sizes must be positive");
    }
    MLPModel m;
    m.layer_sizes = std::move(sizes);
    m.output_mode = mode;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      const auto fan_in = static_cast<double>(m.layer_sizes[l]);
      const auto fan_out = static_cast<double>(m.layer_sizes[l + 1]);
      const double limit = init == InitScheme::HeUniform ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Matrix w(m.layer_sizes[l + 1], m.layer_sizes[l]);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
      m.weights.push_back(std::move(w));
      m.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(m.layer_sizes[l + 1])));
    }
    return m;
  }

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t n_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
  }
};

/// Parameter-shaped container, used for gradients and optimizer moments.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const MLPModel& m) {
    Gradients g;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      g.weights.push_back(Matrix::Zero(m.weights[l].rows(), m.weights[l].cols()));
      g.biases.push_back(Vector::Zero(m.biases[l].size()));
    }
    return g;
  }
};

/// Pre-activations and activations of every layer; activations[0] is the input.
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> act;

  const Matrix& output() const { return act.back(); }
};

namespace neural_detail {

inline void softmax_rows(Matrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp().matrix();
    z.row(r) /= z.row(r).sum();
  }
}

inline void check_input(const MLPModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_size()) {
    throw Error(ErrorKind::ShapeMismatch, "batch has " + std::to_string(x.cols()) + " columns, model expects " +
                                              std::to_string(model.input_size()));
  }
}

/// Lowest index of the row maximum.
inline std::int32_t argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return static_cast<std::int32_t>(best);
}

}  // namespace neural_detail

inline ForwardTrace forward_trace(const MLPModel& model, const Matrix& x) {
  neural_detail::check_input(model, x);
  ForwardTrace t;
  t.act.push_back(x);
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    Matrix z = t.act.back() * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    t.pre.push_back(z);
    if (l + 1 < model.n_layers()) {
      t.act.push_back(z.cwiseMax(0.0));
    } else {
      if (model.output_mode == OutputMode::Softmax) neural_detail::softmax_rows(z);
      t.act.push_back(std::move(z));
    }
  }
  return t;
}

/// Softmax mode returns per-row probabilities; Linear mode raw scores.
inline Matrix forward(const MLPModel& model, const Matrix& x) { return forward_trace(model, x).output(); }

/// Mean over rows of -w(label) * ln p(label).
inline double loss_weighted_sce(const Matrix& probs, std::span<const std::int32_t> labels, const ClassWeights& w) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) throw Error(ErrorKind::ShapeMismatch, "labels/probs length");
  if (labels.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols() || static_cast<std::size_t>(labels[i]) >= kNumClasses) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(labels[i]));
    }
    const double p = std::max(probs(static_cast<Eigen::Index>(i), labels[i]), std::numeric_limits<double>::min());
    total -= w[static_cast<std::size_t>(labels[i])] * std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

/// Back-propagates a gradient w.r.t. the output-layer pre-activations.
inline Gradients backprop(const MLPModel& model, const ForwardTrace& trace, Matrix delta) {
  Gradients g = Gradients::zeros_like(model);
  for (std::size_t l = model.n_layers(); l-- > 0;) {
    g.weights[l] = delta.transpose() * trace.act[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * model.weights[l];
      const Matrix& z = trace.pre[l - 1];
      delta = back.array() * (z.array() > 0.0).cast<double>();
    }
  }
  return g;
}

struct LossAndGradients {
  double loss = 0;
  Gradients grads;
};

/// Weighted sparse categorical cross-entropy (Softmax mode), plus an optional
/// L2 penalty (l2 / 2) * sum ||W||^2 on the weight matrices.
inline LossAndGradients backward(const MLPModel& model, const Matrix& x, std::span<const std::int32_t> labels,
                                 const ClassWeights& w, double l2 = 0.0) {
  if (model.output_mode != OutputMode::Softmax) throw Error(ErrorKind::ShapeMismatch, "backward needs a Softmax model");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw Error(ErrorKind::ShapeMismatch, "labels/batch length");
  auto trace = forward_trace(model, x);
  const Matrix& p = trace.output();
  LossAndGradients out;
  out.loss = loss_weighted_sce(p, labels, w);
  Matrix delta = p;
  const double n = static_cast<double>(labels.size());
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    delta(i, y) -= 1.0;
    delta.row(i) *= w[static_cast<std::size_t>(y)] / n;
  }
  out.grads = backprop(model, trace, std::move(delta));
  if (l2 > 0) {
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
      out.loss += 0.5 * l2 * model.weights[l].squaredNorm();
      out.grads.weights[l] += l2 * model.weights[l];
    }
  }
  return out;
}

/// Mean squared error between Q(s_i, a_i) and targets_i (Linear mode); only the
/// taken action's output receives gradient.
inline LossAndGradients backward_q(const MLPModel& model, const Matrix& states, std::span<const std::int32_t> actions,
                                   std::span<const double> targets) {
  if (model.output_mode != OutputMode::Linear) throw Error(ErrorKind::ShapeMismatch, "backward_q needs a Linear model");
  if (static_cast<std::size_t>(states.rows()) != actions.size() || actions.size() != targets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "states/actions/targets length");
  }
  auto trace = forward_trace(model, states);
  const Matrix& q = trace.output();
  Matrix delta = Matrix::Zero(q.rows(), q.cols());
  LossAndGradients out;
  const double n = static_cast<double>(actions.size());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const auto a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= q.cols()) throw Error(ErrorKind::InvalidAction, "action " + std::to_string(a));
    const double err = q(i, a) - targets[static_cast<std::size_t>(i)];
    out.loss += err * err / n;
    delta(i, a) = 2.0 * err / n;
  }
  out.grads = backprop(model, trace, std::move(delta));
  return out;
}

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  static AdamState for_model(const MLPModel& model) {
    AdamState s;
    s.m = Gradients::zeros_like(model);
    s.v = Gradients::zeros_like(model);
    return s;
  }
};

namespace neural_detail {
inline void check_shapes(const MLPModel& model, const Gradients& g) {
  if (g.weights.size() != model.n_layers() || g.biases.size() != model.n_layers()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient layer count");
  }
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    if (g.weights[l].rows() != model.weights[l].rows() || g.weights[l].cols() != model.weights[l].cols() ||
        g.biases[l].size() != model.biases[l].size()) {
      throw Error(ErrorKind::ShapeMismatch, "gradient shape at layer " + std::to_string(l));
    }
  }
}
}  // namespace neural_detail

/// Adam with bias correction.
inline void adam_step(MLPModel& model, const Gradients& g, AdamState& s, double lr) {
  neural_detail::check_shapes(model, g);
  neural_detail::check_shapes(model, s.m);
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    update(model.weights[l], g.weights[l], s.m.weights[l], s.v.weights[l]);
    update(model.biases[l], g.biases[l], s.m.biases[l], s.v.biases[l]);
  }
}

inline void sgd_step(MLPModel& model, const Gradients& g, double lr) {
  neural_detail::check_shapes(model, g);
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    model.weights[l] -= lr * g.weights[l];
    model.biases[l] -= lr * g.biases[l];
  }
}

/// Either optimizer behind one interface.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, const MLPModel& model)
      : kind_(kind), lr_(lr), adam_(AdamState::for_model(model)) {}

  void step(MLPModel& model, const Gradients& g) {
    if (kind_ == OptimizerKind::Adam) {
      adam_step(model, g, adam_, lr_);
    } else {
      sgd_step(model, g, lr_);
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamState adam_;
};

/// Argmax per row, ties toward the lower class code.
inline std::vector<std::int32_t> predict_classes(const MLPModel& model, const Matrix& x) {
  if (model.output_mode != OutputMode::Softmax) throw Error(ErrorKind::ShapeMismatch, "predict_classes needs Softmax");
  Matrix p = forward(model, x);
  std::vector<std::int32_t> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = neural_detail::argmax_row(p, r);
  return out;
}

// ---- checkpoints ----
//
// Little-endian binary layout:
//   char[8]  magic "FORGEMLP"
//   u32      version (1)
//   u32      number of layer sizes L
//   u64[L]   layer sizes
//   u32      output mode (0 softmax, 1 linear)
//   for each of the L-1 layers: f64 weights (out x in, row-major), f64 bias[out]

inline constexpr char kCheckpointMagic[8] = {'F', 'O', 'R', 'G', 'E', 'M', 'L', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace neural_detail {
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::Io, "truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace neural_detail

inline std::string serialize_model(const MLPModel& m) {
  using neural_detail::put;
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_sizes.size()));
  for (auto s : m.layer_sizes) put<std::uint64_t>(out, s);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.output_mode));
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) put<double>(out, m.weights[l](r, c));
    for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) put<double>(out, m.biases[l](r));
  }
  return out;
}

inline MLPModel deserialize_model(std::string_view in) {
  using neural_detail::get;
  if (in.size() < 8 || std::memcmp(in.data(), kCheckpointMagic, 8) != 0) throw Error(ErrorKind::Io, "not a model checkpoint");
  std::size_t pos = 8;
  auto version = get<std::uint32_t>(in, pos);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  auto count = get<std::uint32_t>(in, pos);
  if (count < 2) throw Error(ErrorKind::ShapeMismatch, "checkpoint has fewer than two layer sizes");
  MLPModel m;
  for (std::uint32_t i = 0; i < count; ++i) m.layer_sizes.push_back(get<std::uint64_t>(in, pos));
  auto mode = get<std::uint32_t>(in, pos);
  if (mode > 1) throw Error(ErrorKind::Io, "unknown output mode in checkpoint");
  m.output_mode = static_cast<OutputMode>(mode);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(m.layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(m.layer_sizes[l]);
    Matrix w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = get<double>(in, pos);
    Vector b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) b(r) = get<double>(in, pos);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  if (pos != in.size()) throw Error(ErrorKind::Io, "trailing bytes in checkpoint");
  return m;
}

inline void save_model(const std::filesystem::path& path, const MLPModel& m) { write_file(path, serialize_model(m)); }
inline MLPModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

// ---- tabular encoding ----

enum class NominalEncoding { Integer, OneHot };

/// Turns Feature columns into a dense matrix. Numerical columns are
/// standardised with training statistics; nominal columns are fed as their
/// integer codes, or one-hot over the training categories.
class FeatureEncoder {
 public:
  struct Field {
    std::string name;
    FeatureKind kind = FeatureKind::Numerical;
    double mean = 0;
    double scale = 1;
    std::vector<std::int32_t> categories;  // one-hot only
  };

  static FeatureEncoder fit(const DataTable& train, NominalEncoding nominal = NominalEncoding::Integer) {
    FeatureEncoder enc;
    enc.nominal_ = nominal;
    for (auto i : train.feature_indices()) {
      const auto& c = train.column(i);
      if (c.kind() == FeatureKind::Text) continue;
      Field f;
      f.name = c.name();
      f.kind = c.kind();
      if (c.missing_count() > 0) throw Error(ErrorKind::MissingValuesPresent, "feature '" + c.name() + "' has missing cells");
      if (c.kind() == FeatureKind::Numerical) {
        double s = 0;
        for (double v : c.values()) s += v;
        f.mean = c.size() ? s / static_cast<double>(c.size()) : 0.0;
        double ss = 0;
        for (double v : c.values()) ss += (v - f.mean) * (v - f.mean);
        double sd = c.size() ? std::sqrt(ss / static_cast<double>(c.size())) : 0.0;
        f.scale = sd > 0 ? sd : 1.0;
      } else if (nominal == NominalEncoding::OneHot) {
        f.categories.assign(c.codes().begin(), c.codes().end());
        std::sort(f.categories.begin(), f.categories.end());
        f.categories.erase(std::unique(f.categories.begin(), f.categories.end()), f.categories.end());
      }
      enc.fields_.push_back(std::move(f));
    }
    return enc;
  }

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& f : fields_) w += f.kind == FeatureKind::Nominal && nominal_ == NominalEncoding::OneHot ? f.categories.size() : 1;
    return w;
  }

  Matrix encode(const DataTable& table) const {
    Matrix x(static_cast<Eigen::Index>(table.n_rows()), static_cast<Eigen::Index>(width()));
    Eigen::Index col = 0;
    for (const auto& f : fields_) {
      auto idx = table.find(f.name);
      if (!idx || table.column(*idx).kind() != f.kind) {
        throw Error(ErrorKind::SchemaMismatch, "encoder field '" + f.name + "' missing or of another kind");
      }
      const auto& c = table.column(*idx);
      if (c.missing_count() > 0) throw Error(ErrorKind::MissingValuesPresent, "feature '" + f.name + "' has missing cells");
      if (f.kind == FeatureKind::Numerical) {
        for (std::size_t r = 0; r < table.n_rows(); ++r) x(static_cast<Eigen::Index>(r), col) = (c.values()[r] - f.mean) / f.scale;
        ++col;
      } else if (nominal_ == NominalEncoding::OneHot) {
        for (std::size_t r = 0; r < table.n_rows(); ++r) {
          for (std::size_t k = 0; k < f.categories.size(); ++k) {
            x(static_cast<Eigen::Index>(r), col + static_cast<Eigen::Index>(k)) = c.codes()[r] == f.categories[k] ? 1.0 : 0.0;
          }
        }
        col += static_cast<Eigen::Index>(f.categories.size());
      } else {
        for (std::size_t r = 0; r < table.n_rows(); ++r) x(static_cast<Eigen::Index>(r), col) = c.codes()[r];
        ++col;
      }
    }
    return x;
  }

  const std::vector<Field>& fields() const { return fields_; }
  NominalEncoding nominal_encoding() const { return nominal_; }

  std::string serialize() const {
    std::string out = std::string("encoding,") + (nominal_ == NominalEncoding::OneHot ? "onehot" : "integer") + "\n";
    for (const auto& f : fields_) {
      out += f.name + "," + std::string(to_string(f.kind)) + "," + format_number(f.mean) + "," + format_number(f.scale) + ",";
      for (std::size_t k = 0; k < f.categories.size(); ++k) out += (k ? "|" : "") + std::to_string(f.categories[k]);
      out += "\n";
    }
    return out;
  }

  static FeatureEncoder deserialize(std::string_view text) {
    FeatureEncoder enc;
    std::istringstream in{std::string(text)};
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> parts;
      std::size_t start = 0;
      while (true) {
        auto comma = line.find(',', start);
        parts.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (first) {
        if (parts.size() != 2 || parts[0] != "encoding") throw Error(ErrorKind::Io, "bad encoder header");
        enc.nominal_ = parts[1] == "onehot" ? NominalEncoding::OneHot : NominalEncoding::Integer;
        first = false;
        continue;
      }
      if (parts.size() != 5) throw Error(ErrorKind::Io, "bad encoder line '" + line + "'");
      Field f;
      f.name = parts[0];
      f.kind = parse_kind(parts[1]);
      f.mean = std::stod(parts[2]);
      f.scale = std::stod(parts[3]);
      std::size_t s = 0;
      while (!parts[4].empty() && s <= parts[4].size()) {
        auto bar = parts[4].find('|', s);
        f.categories.push_back(std::stoi(parts[4].substr(s, bar - s)));
        if (bar == std::string::npos) break;
        s = bar + 1;
      }
      enc.fields_.push_back(std::move(f));
    }
    return enc;
  }

 private:
  NominalEncoding nominal_ = NominalEncoding::Integer;
  std::vector<Field> fields_;
};

/// Encoder plus network: what a trained supervised model needs to score a table.
struct Classifier {
  FeatureEncoder encoder;
  MLPModel model;

  std::vector<std::int32_t> predict(const DataTable& table) const { return predict_classes(model, encoder.encode(table)); }
};

// ---- supervised training ----

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  std::size_t early_stopping_patience = 5;
  double learning_rate = 1e-3;
  InitScheme init = InitScheme::HeUniform;
  ClassWeights class_weights;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double l2 = 0.0;
  NominalEncoding nominal_encoding = NominalEncoding::Integer;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  std::array<double, kNumClasses> val_class_accuracy{};
  std::vector<std::int32_t> val_predictions;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

inline std::string format_training_log(const TrainingLog& log) {
  std::string out = "epoch,train_loss,val_loss,val_accuracy,val_acc_slight,val_acc_serious,val_acc_fatal\n";
  for (const auto& e : log.epochs) {
    out += std::to_string(e.epoch) + "," + format_number(e.train_loss) + "," + format_number(e.val_loss) + "," +
           format_number(e.val_accuracy);
    for (double a : e.val_class_accuracy) out += "," + format_number(a);
    out += "\n";
  }
  return out;
}

/// Mini-batch training on pre-encoded matrices. Validation loss uses the same
/// class weights as training; the returned model is the best-validation-loss
/// one, and training stops once `patience` epochs pass without improvement.
inline std::pair<MLPModel, TrainingLog> train_matrix(const Matrix& x, std::span<const std::int32_t> y, const Matrix& vx,
                                                     std::span<const std::int32_t> vy,
                                                     const std::vector<std::size_t>& hidden, const TrainConfig& cfg) {
  if (cfg.batch_size < 1 || cfg.early_stopping_patience < 1) {
    throw Error(ErrorKind::InvalidArgument, "batch_size and patience must be >= 1");
  }
  if (x.rows() == 0) throw Error(ErrorKind::EmptyTable, "empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size() || static_cast<std::size_t>(vx.rows()) != vy.size()) {
    throw Error(ErrorKind::ShapeMismatch, "label length mismatch");
  }
  std::vector<std::size_t> sizes{static_cast<std::size_t>(x.cols())};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kNumClasses);
  MLPModel model = MLPModel::create(sizes, OutputMode::Softmax, cfg.init, cfg.seed);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  TrainingLog log;
  MLPModel best = model;
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      Matrix bx(static_cast<Eigen::Index>(len), x.cols());
      std::vector<std::int32_t> by(len);
      for (std::size_t i = 0; i < len; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
        by[i] = y[order[start + i]];
      }
      auto lg = backward(model, bx, by, cfg.class_weights, cfg.l2);
      loss_sum += lg.loss * static_cast<double>(len);
      opt.step(model, lg.grads);
    }
    if (!model.all_finite()) throw Error(ErrorKind::InvalidArgument, "non-finite parameters after epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (vx.rows() > 0) {
      Matrix vp = forward(model, vx);
      rec.val_loss = loss_weighted_sce(vp, vy, cfg.class_weights);
      if (cfg.l2 > 0) {
        for (const auto& w : model.weights) rec.val_loss += 0.5 * cfg.l2 * w.squaredNorm();
      }
      std::array<double, kNumClasses> hit{}, tot{};
      double hits = 0;
      rec.val_predictions.resize(vy.size());
      for (Eigen::Index r = 0; r < vp.rows(); ++r) {
        auto pred = neural_detail::argmax_row(vp, r);
        auto truth = static_cast<std::size_t>(vy[static_cast<std::size_t>(r)]);
        rec.val_predictions[static_cast<std::size_t>(r)] = pred;
        tot[truth] += 1;
        if (static_cast<std::size_t>(pred) == truth) {
          hit[truth] += 1;
          hits += 1;
        }
      }
      rec.val_accuracy = hits / static_cast<double>(vy.size());
      for (std::size_t c = 0; c < kNumClasses; ++c) rec.val_class_accuracy[c] = tot[c] > 0 ? hit[c] / tot[c] : 0.0;
    } else {
      rec.val_loss = rec.train_loss;
    }
    log.epochs.push_back(rec);
    if (rec.val_loss < log.best_val_loss) {
      log.best_val_loss = rec.val_loss;
      log.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= cfg.early_stopping_patience) {
      log.stopped_early = true;
      break;
    }
  }
  return {std::move(best), std::move(log)};
}

/// Fits an encoder on `train`, then trains a Softmax MLP with the given hidden
/// layer sizes.
inline std::pair<Classifier, TrainingLog> train_supervised(const DataTable& train, const DataTable& val,
                                                           const std::vector<std::size_t>& hidden,
                                                           const TrainConfig& cfg) {
  Classifier clf;
  clf.encoder = FeatureEncoder::fit(train, cfg.nominal_encoding);
  Matrix x = clf.encoder.encode(train);
  Matrix vx = clf.encoder.encode(val);
  auto y = target_labels(train);
  auto vy = target_labels(val);
  auto [model, log] = train_matrix(x, y, vx, vy, hidden, cfg);
  clf.model = std::move(model);
  return {std::move(clf), std::move(log)};
}

/// Multinomial logistic regression: the zero-hidden-layer Softmax network with
/// an L2 penalty, trained by the same incremental-gradient loop.
inline std::pair<Classifier, TrainingLog> train_logreg(const DataTable& train, const DataTable& val, TrainConfig cfg,
                                                       double l2) {
  cfg.l2 = l2;
  return train_supervised(train, val, {}, cfg);
}

}  // namespace forge
