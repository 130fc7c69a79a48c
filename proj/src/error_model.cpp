#include "idlearn/error_model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace idlearn {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr double kMinScale = 1e-8;

using Matrix = Eigen::MatrixXd;

void apply_prelu(Matrix& z, double alpha) {
  z = z.array().max(0.0) + alpha * z.array().min(0.0);
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_widths.empty() || layer_widths.back() != 1) {
    throw std::invalid_argument("mlp: layer widths must end in a single output");
  }
  for (int w : layer_widths) {
    if (w <= 0) throw std::invalid_argument("mlp: layer widths must be positive");
  }
  if (input_dim <= 0) throw std::invalid_argument("mlp: input_dim must be positive");
}

Mlp::Mlp(const MlpSpec& spec) {
  spec.validate();
  Eigen::Index off = 0;
  int in = spec.input_dim;
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    Shape s;
    s.in = in;
    s.out = spec.layer_widths[l];
    s.activated = l + 1 < spec.layer_widths.size();
    s.w_off = off;
    off += static_cast<Eigen::Index>(s.in) * s.out;
    s.b_off = off;
    off += s.out;
    s.a_off = off;
    if (s.activated) off += 1;
    shapes_.push_back(s);
    in = s.out;
  }
  params_ = Vec::Zero(off);
  for (const auto& s : shapes_) {
    if (s.activated) params_[s.a_off] = spec.prelu_alpha_init;
  }
}

Mlp Mlp::he_init(const MlpSpec& spec, Rng& rng) {
  Mlp net(spec);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = spec.prelu_alpha_init;
  for (const auto& s : net.shapes_) {
    const double std_dev = std::sqrt(2.0 / ((1.0 + a * a) * s.in));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.in) * s.out; ++i) {
      net.params_[s.w_off + i] = std_dev * normal(rng);
    }
  }
  return net;
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t l) const {
  const auto& s = shapes_[l];
  return {params_.data() + s.w_off, s.out, s.in};
}

Eigen::Map<const Vec> Mlp::bias(std::size_t l) const {
  const auto& s = shapes_[l];
  return {params_.data() + s.b_off, s.out};
}

double Mlp::alpha(std::size_t l) const {
  return shapes_[l].activated ? params_[shapes_[l].a_off] : 1.0;
}

double Mlp::forward(const Eigen::Ref<const Vec>& x) const {
  Vec a = x;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    Vec z = weight(l) * a + bias(l);
    if (shapes_[l].activated) {
      const double al = alpha(l);
      z = z.unaryExpr([al](double v) { return prelu(v, al); });
    }
    a = std::move(z);
  }
  return a[0];
}

Eigen::RowVectorXd Mlp::forward_batch(const Matrix& x) const {
  Matrix a = x;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    Matrix z(shapes_[l].out, a.cols());
    z.noalias() = weight(l) * a;
    z.colwise() += bias(l);
    if (shapes_[l].activated) apply_prelu(z, alpha(l));
    a = std::move(z);
  }
  return a.row(0);
}

double Mlp::loss_and_gradient(const Matrix& x, const Eigen::RowVectorXd& y,
                              Vec* grad) const {
  const std::size_t n_layers = shapes_.size();
  const double batch = static_cast<double>(x.cols());

  // pre[l] is layer l's pre-activation; post[l] is its input.
  std::vector<Matrix> pre(n_layers);
  std::vector<Matrix> post(n_layers + 1);
  post[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l].resize(shapes_[l].out, x.cols());
    pre[l].noalias() = weight(l) * post[l];
    pre[l].colwise() += bias(l);
    post[l + 1] = pre[l];
    if (shapes_[l].activated) apply_prelu(post[l + 1], alpha(l));
  }

  const Eigen::RowVectorXd resid = post[n_layers].row(0) - y;
  const double loss = resid.squaredNorm() / batch;
  if (grad == nullptr) return loss;

  grad->setZero(params_.size());
  Matrix delta = (2.0 / batch) * resid;  // dL/d(post[l+1])
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& s = shapes_[l];
    if (s.activated) {
      const double al = alpha(l);
      (*grad)[s.a_off] = (delta.array() * pre[l].array().min(0.0)).sum();
      delta = (pre[l].array() >= 0.0).select(delta, al * delta);
    }
    Eigen::Map<Matrix> gw(grad->data() + s.w_off, s.out, s.in);
    gw.noalias() = delta * post[l].transpose();
    Eigen::Map<Vec>(grad->data() + s.b_off, s.out) = delta.rowwise().sum();
    if (l > 0) {
      Matrix next(s.in, x.cols());
      next.noalias() = weight(l).transpose() * delta;
      delta = std::move(next);
    }
  }
  return loss;
}

NormStats NormStats::identity(int input_dim, int dim) {
  return NormStats{Vec::Zero(input_dim), Vec::Ones(input_dim), Vec::Zero(dim),
                   Vec::Ones(dim)};
}

NormStats NormStats::fit(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("norm: empty dataset");
  const auto n = static_cast<double>(data.size());
  const auto in = 3 * data.samples.front().x.dim();
  const auto out = data.samples.front().y.size();
  NormStats s{Vec::Zero(in), Vec::Zero(in), Vec::Zero(out), Vec::Zero(out)};
  for (const auto& smp : data.samples) {
    s.x_mean += smp.x.stacked();
    s.y_mean += smp.y;
  }
  s.x_mean /= n;
  s.y_mean /= n;
  for (const auto& smp : data.samples) {
    s.x_scale += (smp.x.stacked() - s.x_mean).cwiseAbs2();
    s.y_scale += (smp.y - s.y_mean).cwiseAbs2();
  }
  auto finish = [n](Vec& v) {
    v = (v / n).cwiseSqrt();
    for (auto& e : v) {
      if (!(e > kMinScale)) e = 1.0;
    }
  };
  finish(s.x_scale);
  finish(s.y_scale);
  return s;
}

Vec NormStats::standardize(const Vec& x) const {
  return (x - x_mean).cwiseQuotient(x_scale);
}

Vec NormStats::destandardize(const Vec& z) const {
  return z.cwiseProduct(x_scale) + x_mean;
}

ErrorModel ErrorModel::untrained(const MlpSpec& spec, int dim,
                                 double output_clamp) {
  spec.validate();
  if (spec.input_dim != 3 * dim) {
    throw std::invalid_argument("error model: input_dim must equal 3 * dim");
  }
  ErrorModel m;
  m.spec = spec;
  m.dim = dim;
  m.norm = NormStats::identity(spec.input_dim, dim);
  m.output_clamp = output_clamp;
  return m;
}

Vec predict_unclamped(const ErrorModel& model, const Vec& stacked_x) {
  if (stacked_x.size() != model.spec.input_dim) {
    throw std::invalid_argument("predict: input dimension mismatch");
  }
  Vec out = Vec::Zero(model.dim);
  if (!model.trained()) return out;
  const Vec z = model.norm.standardize(stacked_x);
  for (int j = 0; j < model.dim; ++j) {
    out[j] = model.norm.y_mean[j] + model.norm.y_scale[j] * model.nets[j].forward(z);
  }
  return out;
}

Vec predict(const ErrorModel& model, const InputPoint& x) {
  const double c = model.output_clamp;
  return predict_unclamped(model, x.stacked()).cwiseMax(-c).cwiseMin(c);
}

TrainResult train(const ErrorModel& model, const Dataset& data,
                  const TrainOptions& options, Rng& rng) {
  if (data.empty()) return TrainResult{model, true};

  TrainResult result{model, false};
  ErrorModel& next = result.model;
  if (next.nets.empty()) {
    for (int j = 0; j < next.dim; ++j) next.nets.push_back(Mlp::he_init(next.spec, rng));
  }
  next.norm = NormStats::fit(data);
  next.iteration = model.iteration + 1;

  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix x(next.spec.input_dim, n);
  Matrix y(next.dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& smp = data.samples[static_cast<std::size_t>(i)];
    x.col(i) = next.norm.standardize(smp.x.stacked());
    y.col(i) = (smp.y - next.norm.y_mean).cwiseQuotient(next.norm.y_scale);
  }

  const Eigen::Index batch = std::max(1, options.batch_size);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int j = 0; j < next.dim; ++j) {
    Mlp& net = next.nets[static_cast<std::size_t>(j)];
    Vec m = Vec::Zero(net.num_params());
    Vec v = Vec::Zero(net.num_params());
    Vec grad;
    double b1t = 1.0, b2t = 1.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (Eigen::Index start = 0; start < n; start += batch) {
        const Eigen::Index len = std::min(batch, n - start);
        Matrix xb(x.rows(), len);
        Eigen::RowVectorXd yb(len);
        for (Eigen::Index c = 0; c < len; ++c) {
          const auto src = order[static_cast<std::size_t>(start + c)];
          xb.col(c) = x.col(src);
          yb[c] = y(j, src);
        }
        net.loss_and_gradient(xb, yb, &grad);
        b1t *= options.beta1;
        b2t *= options.beta2;
        m = options.beta1 * m + (1.0 - options.beta1) * grad;
        v = options.beta2 * v + (1.0 - options.beta2) * grad.cwiseAbs2();
        const double step = options.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        net.params().array() -=
            step * m.array() / (v.array().sqrt() + options.epsilon);
      }
    }
  }
  return result;
}

double mse_loss(const ErrorModel& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("mse_loss: empty dataset");
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix resid(model.dim, n);
  if (!model.trained()) {
    for (Eigen::Index i = 0; i < n; ++i) resid.col(i) = data.samples[i].y;
  } else {
    Matrix x(model.spec.input_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.col(i) = model.norm.standardize(data.samples[i].x.stacked());
    }
    const double c = model.output_clamp;
    for (int j = 0; j < model.dim; ++j) {
      const Eigen::RowVectorXd out = model.nets[j].forward_batch(x);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pred = std::clamp(
            model.norm.y_mean[j] + model.norm.y_scale[j] * out[i], -c, c);
        resid(j, i) = data.samples[i].y[j] - pred;
      }
    }
  }
  return resid.squaredNorm() / static_cast<double>(resid.size());
}

namespace {

nlohmann::json vec_json(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec json_vec(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void save_checkpoint(const ErrorModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "idlearn-error-model";
  j["version"] = kCheckpointVersion;
  j["dim"] = model.dim;
  j["iteration"] = model.iteration;
  j["output_clamp"] = model.output_clamp;
  j["spec"] = {{"layer_widths", model.spec.layer_widths},
               {"prelu_alpha_init", model.spec.prelu_alpha_init},
               {"input_dim", model.spec.input_dim}};
  j["norm"] = {{"x_mean", vec_json(model.norm.x_mean)},
               {"x_scale", vec_json(model.norm.x_scale)},
               {"y_mean", vec_json(model.norm.y_mean)},
               {"y_scale", vec_json(model.norm.y_scale)}};
  j["nets"] = nlohmann::json::array();
  for (const auto& net : model.nets) j["nets"].push_back(vec_json(net.params()));

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  // nlohmann emits doubles in shortest round-trip form.
  os << j.dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ErrorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  const auto j = nlohmann::json::parse(is);
  if (j.at("format") != "idlearn-error-model") {
    throw std::runtime_error("not an error-model checkpoint: " + path.string());
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  MlpSpec spec;
  spec.layer_widths = j.at("spec").at("layer_widths").get<std::vector<int>>();
  spec.prelu_alpha_init = j.at("spec").at("prelu_alpha_init").get<double>();
  spec.input_dim = j.at("spec").at("input_dim").get<int>();

  ErrorModel m = ErrorModel::untrained(spec, j.at("dim").get<int>(),
                                       j.at("output_clamp").get<double>());
  m.iteration = j.at("iteration").get<int>();
  const auto& norm = j.at("norm");
  m.norm = NormStats{json_vec(norm.at("x_mean")), json_vec(norm.at("x_scale")),
                     json_vec(norm.at("y_mean")), json_vec(norm.at("y_scale"))};
  for (const auto& p : j.at("nets")) {
    Mlp net(spec);
    Vec params = json_vec(p);
    if (params.size() != net.num_params()) {
      throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    net.params() = std::move(params);
    m.nets.push_back(std::move(net));
  }
  if (!m.nets.empty() && static_cast<int>(m.nets.size()) != m.dim) {
    throw std::runtime_error("checkpoint: expected one network per joint");
  }
  return m;
}

}  // namespace idlearn
