#pragma once

#include "idlearn/dataset.hpp"
#include "idlearn/dynamics.hpp"

#include <filesystem>
#include <vector>

namespace idlearn {

struct MlpSpec {
  // Hidden widths followed by the single output unit.
  std::vector<int> layer_widths{200, 100, 50, 20, 1};
  double prelu_alpha_init = 0.25;
  int input_dim = 6;

  void validate() const;
};

inline double prelu(double z, double alpha) { return z >= 0.0 ? z : alpha * z; }

// Fully connected network with a learned per-layer PReLU slope after every
// layer except the last. All parameters live in one flat vector; per layer
// the layout is W (out x in, column-major), b (out), then alpha if the layer
// is activated.
class Mlp {
 public:
  struct Shape {
    int in = 0;
    int out = 0;
    bool activated = false;
    Eigen::Index w_off = 0;
    Eigen::Index b_off = 0;
    Eigen::Index a_off = 0;
  };

  Mlp() = default;
  explicit Mlp(const MlpSpec& spec);

  // He initialisation scaled for PReLU: std = sqrt(2 / ((1 + a^2) fan_in)).
  static Mlp he_init(const MlpSpec& spec, Rng& rng);

  double forward(const Eigen::Ref<const Vec>& x) const;
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& x) const;

  // Mean of (f(x_j) - y_j)^2 over the columns of x; fills grad (flat layout)
  // when it is non-null.
  double loss_and_gradient(const Eigen::MatrixXd& x,
                           const Eigen::RowVectorXd& y, Vec* grad) const;

  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  Eigen::Index num_params() const { return params_.size(); }
  const std::vector<Shape>& shapes() const { return shapes_; }

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const;
  Eigen::Map<const Vec> bias(std::size_t l) const;
  double alpha(std::size_t l) const;

 private:
  std::vector<Shape> shapes_;
  Vec params_;
};

// Standardisation statistics, frozen at training time. Inputs use one entry
// per stacked input dimension, targets one entry per joint.
struct NormStats {
  Vec x_mean;
  Vec x_scale;
  Vec y_mean;
  Vec y_scale;

  static NormStats identity(int input_dim, int dim);
  static NormStats fit(const Dataset& data);
  Vec standardize(const Vec& x) const;
  Vec destandardize(const Vec& z) const;
};

// Learned additive torque correction, one network per joint. At iteration 0
// the model predicts exactly zero.
struct ErrorModel {
  MlpSpec spec;
  int dim = 2;
  std::vector<Mlp> nets;
  NormStats norm;
  int iteration = 0;
  double output_clamp = 20.0;

  static ErrorModel untrained(const MlpSpec& spec, int dim,
                              double output_clamp);
  bool trained() const { return iteration > 0 && !nets.empty(); }
};

Vec predict(const ErrorModel& model, const InputPoint& x);
// Same as predict but without the output clamp. Zero at iteration 0.
Vec predict_unclamped(const ErrorModel& model, const Vec& stacked_x);

struct TrainOptions {
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainResult {
  ErrorModel model;
  bool refused = false;  // set when the dataset was empty
};

// Shuffled minibatch Adam on the per-joint squared torque error, warm
// started from `model` (networks are He-initialised when `model` has
// none). Norm stats are refit on `data`; the iteration counter advances.
TrainResult train(const ErrorModel& model, const Dataset& data,
                  const TrainOptions& options, Rng& rng);

// Mean over samples and joints of the squared residual between targets and
// (clamped) predictions. Throws on an empty dataset.
double mse_loss(const ErrorModel& model, const Dataset& data);

void save_checkpoint(const ErrorModel& model, const std::filesystem::path& path);
ErrorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace idlearn
