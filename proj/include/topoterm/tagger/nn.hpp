#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace topoterm::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Rng = std::mt19937_64;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool decay = true;  // subject to decoupled weight decay
};

// Flat, ordered registry of trainable tensors. Layers refer to parameters by
// index so models stay copyable.
class ParameterStore {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, bool decay);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in_uniform(Mat& m, std::size_t fan_in, Rng& rng);

double gelu(double x);
double gelu_grad(double x);

// Inverted dropout mask (entries 0 or 1/(1-p)); all ones when rng is null.
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng);

struct Linear {
  std::size_t weight = 0;  // out x in
  std::size_t bias = 0;    // 1 x out
  std::size_t in = 0, out = 0;

  static Linear create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng);
  Mat forward(const ParameterStore& ps, const Mat& x) const;
  // Accumulates parameter gradients; returns dL/dx.
  Mat backward(ParameterStore& ps, const Mat& x, const Mat& dy) const;
};

struct LayerNorm {
  std::size_t gain = 0, shift = 0;
  std::size_t dim = 0;
  double eps = 1e-5;

  struct Cache {
    Mat normalized;
    Eigen::VectorXd inv_std;
  };

  static LayerNorm create(ParameterStore& ps, const std::string& name, std::size_t dim);
  Mat forward(const ParameterStore& ps, const Mat& x, Cache* cache) const;
  Mat backward(ParameterStore& ps, const Cache& cache, const Mat& dy) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t heads = 1;
  std::size_t dim = 0;

  struct Cache {
    Mat input, q, k, v, concat;
    std::vector<Mat> probs;     // per head, after softmax
    std::vector<Mat> dropout;   // per head masks applied to probs
  };

  static MultiHeadAttention create(ParameterStore& ps, const std::string& name, std::size_t dim,
                                   std::size_t heads, Rng& rng);
  Mat forward(const ParameterStore& ps, const Mat& x, double dropout, Rng* rng, Cache* cache) const;
  Mat backward(ParameterStore& ps, const Cache& cache, const Mat& dy) const;
};

// Single-channel valid 2-D convolution over one image per token, flattened
// row-major on both sides.
struct Conv2dValid {
  std::size_t kernel = 0;  // kh x kw
  std::size_t bias = 0;    // 1 x 1
  std::size_t in_h = 0, in_w = 0, k_h = 0, k_w = 0;

  std::size_t out_h() const { return in_h - k_h + 1; }
  std::size_t out_w() const { return in_w - k_w + 1; }
  std::size_t out_size() const { return out_h() * out_w(); }

  static Conv2dValid create(ParameterStore& ps, const std::string& name, std::size_t in_h,
                            std::size_t in_w, std::size_t k_h, std::size_t k_w, Rng& rng);
  // x: tokens x (in_h*in_w); returns tokens x out_size().
  Mat forward(const ParameterStore& ps, const Mat& x) const;
  void backward(ParameterStore& ps, const Mat& x, const Mat& dy) const;
};

// Row-wise softmax.
Mat softmax_rows(const Mat& logits);

}  // namespace topoterm::nn
