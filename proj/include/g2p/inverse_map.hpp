#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "g2p/errors.hpp"
#include "g2p/limb_dynamics.hpp"
#include "g2p/rng.hpp"

namespace g2p {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Per-channel input normalization, frozen after calibration.
struct Scaler {
  Vec6 factors = Vec6::Ones();
  std::array<bool, 6> degenerate{};  // near-constant channels pass through
  bool by_variance = false;

  Vec6 apply(const Vec6& x) const { return x.cwiseQuotient(factors); }
};

/// One training pair: limb kinematics (q1, q2, dq1, dq2, ddq1, ddq2) and the
/// tendon activations that produced them. `phase` records provenance:
/// 0 = motor babbling, k >= 1 = appended during refinement k.
struct KinematicSample {
  Vec6 input = Vec6::Zero();
  Vec3 target = Vec3::Zero();
  int phase = 0;
};

using Dataset = std::vector<KinematicSample>;

/// Sample standard deviation per input channel (variance with the flag set,
/// for the normalize-by-variance reading of the same recipe). Channels with
/// spread below 1e-9 would blow up under division, so they keep factor 1 and
/// are flagged.
inline Scaler calibrate_scaler(const Dataset& data, bool by_variance = false) {
  if (data.size() < 2) {
    throw ConfigError("scaler: need at least 2 calibration samples");
  }
  const auto n = static_cast<double>(data.size());
  Vec6 mean = Vec6::Zero();
  for (const KinematicSample& s : data) mean += s.input;
  mean /= n;
  Vec6 ssd = Vec6::Zero();
  for (const KinematicSample& s : data) {
    const Vec6 d = s.input - mean;
    ssd += d.cwiseProduct(d);
  }
  Scaler out;
  out.by_variance = by_variance;
  for (int j = 0; j < 6; ++j) {
    const double sd = std::sqrt(ssd[j] / (n - 1.0));
    if (sd < 1e-9) {
      out.factors[j] = 1.0;
      out.degenerate[static_cast<std::size_t>(j)] = true;
    } else {
      out.factors[j] = by_variance ? sd * sd : sd;
    }
  }
  return out;
}

struct TrainOptions {
  int epochs = 50;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainReport {
  double final_mse = 0.0;           // over the full dataset, pre-clamp
  std::vector<double> epoch_mse;    // same, after each epoch
};

/// Two-layer network with linear activations mapping scaled kinematics to
/// three tendon activations: y = W2 (W1 x + b1) + b2. Linear-in-linear is
/// exactly affine (see collapse()), which is the point: the learner can only
/// interpolate and extrapolate linearly from what babbling showed it.
/// Outputs are clamped to [0, 1] at predict() time only; the training loss
/// sees the raw affine output.
class InverseMap {
 public:
  explicit InverseMap(int hidden_size = 6) : hidden_(hidden_size) {
    if (hidden_size < 1 || hidden_size > 1024) {
      throw ConfigError("inverse map: hidden_size out of range [1, 1024]");
    }
    W1_ = MatX::Zero(hidden_, 6);
    b1_ = VecX::Zero(hidden_);
    W2_ = MatX::Zero(3, hidden_);
    b2_ = Vec3::Zero();
    reset_adam();
  }

  int hidden_size() const { return hidden_; }

  /// Uniform(-r, r) with r = 1 / sqrt(fan_in) per layer, biases zero.
  /// Also clears the optimizer state: this starts a fresh model.
  void init_weights(std::uint64_t seed) {
    rng::Engine eng(seed);
    const double r1 = 1.0 / std::sqrt(6.0);
    for (int i = 0; i < hidden_; ++i) {
      for (int j = 0; j < 6; ++j) W1_(i, j) = eng.uniform(-r1, r1);
    }
    b1_.setZero();
    const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < hidden_; ++j) W2_(i, j) = eng.uniform(-r2, r2);
    }
    b2_.setZero();
    reset_adam();
  }

  void set_scaler(const Scaler& s) { scaler_ = s; }
  const Scaler& scaler() const { return scaler_; }

  Vec3 predict_raw(const Vec6& x) const {
    return W2_ * (W1_ * scaler_.apply(x) + b1_) + b2_;
  }

  Vec3 predict(const Vec6& x) const { return clamp01(predict_raw(x)); }

  /// The end-to-end affine map from raw (unscaled) kinematics to raw outputs:
  /// predict_raw(x) == A x + c exactly.
  struct Affine {
    Eigen::Matrix<double, 3, 6> A;
    Vec3 c;
  };
  Affine collapse() const {
    Affine out;
    out.A = (W2_ * W1_) * scaler_.factors.cwiseInverse().asDiagonal();
    out.c = W2_ * b1_ + b2_;
    return out;
  }

  /// Mean squared error over the dataset, mean over n * 3 output entries,
  /// on the raw (pre-clamp) outputs.
  double mse(const Dataset& data) const {
    if (data.empty()) throw ConfigError("inverse map: mse of empty dataset");
    MatX X, Y;
    to_matrices(data, X, Y);
    return batch_loss(X, Y);
  }

  /// Minibatch Adam on the MSE loss. Never reinitializes: calling train()
  /// again continues from the current weights and optimizer state, which is
  /// how refinements warm-start from the babbling fit.
  TrainReport train(const Dataset& data, const TrainOptions& opt) {
    if (data.empty()) throw ConfigError("inverse map: empty training set");
    if (opt.epochs < 0) throw ConfigError("inverse map: epochs must be >= 0");
    if (opt.batch_size < 1) {
      throw ConfigError("inverse map: batch_size must be >= 1");
    }
    if (!(opt.learning_rate > 0.0)) {
      throw ConfigError("inverse map: learning_rate must be positive");
    }
    MatX X, Y;
    to_matrices(data, X, Y);
    const auto n = static_cast<std::size_t>(X.cols());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::Engine eng(opt.seed);
    const auto bs = static_cast<std::size_t>(opt.batch_size);
    const std::size_t num_batches = (n + bs - 1) / bs;
    MatX Xb, Yb;
    TrainReport report;
    report.epoch_mse.reserve(static_cast<std::size_t>(opt.epochs));
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
      eng.shuffle(order);
      for (std::size_t batch = 0; batch < num_batches; ++batch) {
        const std::size_t lo = batch * bs;
        const std::size_t hi = std::min(lo + bs, n);
        const auto cols = static_cast<Eigen::Index>(hi - lo);
        Xb.resize(6, cols);
        Yb.resize(3, cols);
        for (std::size_t i = lo; i < hi; ++i) {
          Xb.col(static_cast<Eigen::Index>(i - lo)) =
              X.col(static_cast<Eigen::Index>(order[i]));
          Yb.col(static_cast<Eigen::Index>(i - lo)) =
              Y.col(static_cast<Eigen::Index>(order[i]));
        }
        const Grads g = loss_and_grads(Xb, Yb);
        if (!std::isfinite(g.loss)) {
          throw TrainingFault("training diverged: non-finite batch loss",
                              epoch, static_cast<int>(batch));
        }
        ++adam_t_;
        const double bc1 =
            1.0 - std::pow(opt.beta1, static_cast<double>(adam_t_));
        const double bc2 =
            1.0 - std::pow(opt.beta2, static_cast<double>(adam_t_));
        auto update = [&](auto& w, auto& m, auto& v, const auto& grad) {
          m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
          v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
          w.array() -= opt.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + opt.epsilon);
        };
        update(W1_, mW1_, vW1_, g.W1);
        update(b1_, mb1_, vb1_, g.b1);
        update(W2_, mW2_, vW2_, g.W2);
        update(b2_, mb2_, vb2_, g.b2);
      }
      report.epoch_mse.push_back(batch_loss(X, Y));
    }
    report.final_mse =
        report.epoch_mse.empty() ? batch_loss(X, Y) : report.epoch_mse.back();
    if (!std::isfinite(report.final_mse)) {
      throw TrainingFault("training diverged: non-finite parameters",
                          opt.epochs > 0 ? opt.epochs - 1 : 0,
                          static_cast<int>(num_batches) - 1);
    }
    return report;
  }

  /// Max relative disagreement between the backprop gradient and a central
  /// finite difference of the loss, over every parameter entry.
  double gradient_check(const Dataset& data, double h = 1e-5) const {
    if (data.empty()) {
      throw ConfigError("inverse map: gradient check needs samples");
    }
    MatX X, Y;
    to_matrices(data, X, Y);
    const Grads g = loss_and_grads(X, Y);
    InverseMap probe = *this;
    struct Entry {
      double* coeff;
      double analytic;
    };
    std::vector<Entry> entries;
    auto add = [&entries](double* coeffs, const double* grads,
                          Eigen::Index count) {
      for (Eigen::Index i = 0; i < count; ++i) {
        entries.push_back(Entry{coeffs + i, grads[i]});
      }
    };
    add(probe.W1_.data(), g.W1.data(), W1_.size());
    add(probe.b1_.data(), g.b1.data(), b1_.size());
    add(probe.W2_.data(), g.W2.data(), W2_.size());
    add(probe.b2_.data(), g.b2.data(), b2_.size());
    double worst = 0.0;
    for (const Entry& e : entries) {
      const double keep = *e.coeff;
      *e.coeff = keep + h;
      const double lp = probe.batch_loss(X, Y);
      *e.coeff = keep - h;
      const double lm = probe.batch_loss(X, Y);
      *e.coeff = keep;
      const double fd = (lp - lm) / (2.0 * h);
      const double denom = std::max(std::abs(e.analytic) + std::abs(fd), 1e-8);
      worst = std::max(worst, std::abs(e.analytic - fd) / denom);
    }
    return worst;
  }

  // Raw parameter and optimizer access for checkpointing.
  const MatX& W1() const { return W1_; }
  const VecX& b1() const { return b1_; }
  const MatX& W2() const { return W2_; }
  const Vec3& b2() const { return b2_; }

  struct AdamState {
    MatX mW1, vW1, mW2, vW2;
    VecX mb1, vb1;
    Vec3 mb2, vb2;
    std::int64_t t = 0;
  };

  AdamState adam_state() const {
    return AdamState{mW1_, vW1_, mW2_, vW2_, mb1_, vb1_, mb2_, vb2_, adam_t_};
  }

  void restore(const MatX& W1, const VecX& b1, const MatX& W2, const Vec3& b2,
               const AdamState& adam, const Scaler& scaler) {
    auto first_shape = [this](const MatX& m) {
      return m.rows() == hidden_ && m.cols() == 6;
    };
    auto second_shape = [this](const MatX& m) {
      return m.rows() == 3 && m.cols() == hidden_;
    };
    if (!first_shape(W1) || !second_shape(W2) || b1.size() != hidden_ ||
        !first_shape(adam.mW1) || !first_shape(adam.vW1) ||
        !second_shape(adam.mW2) || !second_shape(adam.vW2) ||
        adam.mb1.size() != hidden_ || adam.vb1.size() != hidden_ ||
        adam.t < 0) {
      throw ConfigError("inverse map: restore shape mismatch");
    }
    W1_ = W1;
    b1_ = b1;
    W2_ = W2;
    b2_ = b2;
    mW1_ = adam.mW1;
    vW1_ = adam.vW1;
    mW2_ = adam.mW2;
    vW2_ = adam.vW2;
    mb1_ = adam.mb1;
    vb1_ = adam.vb1;
    mb2_ = adam.mb2;
    vb2_ = adam.vb2;
    adam_t_ = adam.t;
    scaler_ = scaler;
  }

 private:
  struct Grads {
    MatX W1, W2;
    VecX b1;
    Vec3 b2;
    double loss = 0.0;
  };

  void reset_adam() {
    mW1_ = MatX::Zero(hidden_, 6);
    vW1_ = MatX::Zero(hidden_, 6);
    mb1_ = VecX::Zero(hidden_);
    vb1_ = VecX::Zero(hidden_);
    mW2_ = MatX::Zero(3, hidden_);
    vW2_ = MatX::Zero(3, hidden_);
    mb2_ = Vec3::Zero();
    vb2_ = Vec3::Zero();
    adam_t_ = 0;
  }

  void to_matrices(const Dataset& data, MatX& X, MatX& Y) const {
    const auto n = static_cast<Eigen::Index>(data.size());
    X.resize(6, n);
    Y.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X.col(i) = scaler_.apply(data[static_cast<std::size_t>(i)].input);
      Y.col(i) = data[static_cast<std::size_t>(i)].target;
    }
  }

  double batch_loss(const MatX& X, const MatX& Y) const {
    const MatX P = ((W2_ * ((W1_ * X).colwise() + b1_)).colwise() + b2_);
    return (P - Y).squaredNorm() / (3.0 * static_cast<double>(X.cols()));
  }

  Grads loss_and_grads(const MatX& X, const MatX& Y) const {
    const double inv = 1.0 / (3.0 * static_cast<double>(X.cols()));
    const MatX H = (W1_ * X).colwise() + b1_;
    const MatX P = (W2_ * H).colwise() + b2_;
    const MatX E = P - Y;
    Grads g;
    g.loss = E.squaredNorm() * inv;
    const MatX dP = (2.0 * inv) * E;
    g.W2 = dP * H.transpose();
    g.b2 = dP.rowwise().sum();
    const MatX dH = W2_.transpose() * dP;
    g.W1 = dH * X.transpose();
    g.b1 = dH.rowwise().sum();
    return g;
  }

  int hidden_;
  MatX W1_, W2_;
  VecX b1_;
  Vec3 b2_;
  MatX mW1_, vW1_, mW2_, vW2_;
  VecX mb1_, vb1_;
  Vec3 mb2_, vb2_;
  std::int64_t adam_t_ = 0;
  Scaler scaler_;
};

}  // namespace g2p
