#include "topoterm/tagger/nn.hpp"

#include <cmath>
#include <numbers>

namespace topoterm::nn {

std::size_t ParameterStore::add(std::string name, Eigen::Index rows, Eigen::Index cols, bool decay) {
  Parameter p;
  p.name = std::move(name);
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.decay = decay;
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void init_fan_in_uniform(Mat& m, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

double gelu(double x) { return 0.5 * x * std::erfc(-x / std::numbers::sqrt2); }

double gelu_grad(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  Mat mask = Mat::Ones(rows, cols);
  if (rng == nullptr || p <= 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
  return mask;
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// ---------------------------------------------------------------------------

Linear Linear::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out,
                      Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = ps.add(name + ".weight", static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in), true);
  l.bias = ps.add(name + ".bias", 1, static_cast<Eigen::Index>(out), false);
  init_fan_in_uniform(ps[l.weight].value, in, rng);
  init_fan_in_uniform(ps[l.bias].value, in, rng);
  return l;
}

Mat Linear::forward(const ParameterStore& ps, const Mat& x) const {
  Mat y = x * ps[weight].value.transpose();
  y.rowwise() += ps[bias].value.row(0);
  return y;
}

Mat Linear::backward(ParameterStore& ps, const Mat& x, const Mat& dy) const {
  ps[weight].grad.noalias() += dy.transpose() * x;
  ps[bias].grad.row(0) += dy.colwise().sum();
  return dy * ps[weight].value;
}

// ---------------------------------------------------------------------------

LayerNorm LayerNorm::create(ParameterStore& ps, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.gain = ps.add(name + ".gain", 1, static_cast<Eigen::Index>(dim), false);
  ln.shift = ps.add(name + ".shift", 1, static_cast<Eigen::Index>(dim), false);
  ps[ln.gain].value.setOnes();
  return ln;
}

Mat LayerNorm::forward(const ParameterStore& ps, const Mat& x, Cache* cache) const {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Mat xhat(n, x.cols());
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mean).matrix();
    const double var = centered.squaredNorm() / d;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  Mat y = xhat.array().rowwise() * ps[gain].value.row(0).array();
  y.rowwise() += ps[shift].value.row(0);
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat LayerNorm::backward(ParameterStore& ps, const Cache& cache, const Mat& dy) const {
  const Mat& xhat = cache.normalized;
  ps[gain].grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  ps[shift].grad.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * ps[gain].value.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_dxhat = dxhat.row(r).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(r).dot(xhat.row(r)) / d;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------

MultiHeadAttention MultiHeadAttention::create(ParameterStore& ps, const std::string& name,
                                              std::size_t dim, std::size_t heads, Rng& rng) {
  MultiHeadAttention a;
  a.dim = dim;
  a.heads = heads;
  a.query = Linear::create(ps, name + ".query", dim, dim, rng);
  a.key = Linear::create(ps, name + ".key", dim, dim, rng);
  a.value = Linear::create(ps, name + ".value", dim, dim, rng);
  a.output = Linear::create(ps, name + ".output", dim, dim, rng);
  return a;
}

Mat MultiHeadAttention::forward(const ParameterStore& ps, const Mat& x, double dropout, Rng* rng,
                                Cache* cache) const {
  const Eigen::Index t = x.rows();
  const Eigen::Index hd = static_cast<Eigen::Index>(dim / heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Mat q = query.forward(ps, x);
  Mat k = key.forward(ps, x);
  Mat v = value.forward(ps, x);
  Mat concat(t, static_cast<Eigen::Index>(dim));
  std::vector<Mat> probs, masks;
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * hd;
    const Mat scores = (q.middleCols(c0, hd) * k.middleCols(c0, hd).transpose()) * scale;
    Mat p = softmax_rows(scores);
    Mat mask = dropout_mask(t, t, dropout, rng);
    concat.middleCols(c0, hd) = (p.array() * mask.array()).matrix() * v.middleCols(c0, hd);
    if (cache) {
      probs.push_back(std::move(p));
      masks.push_back(std::move(mask));
    }
  }
  Mat y = output.forward(ps, concat);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = std::move(probs);
    cache->dropout = std::move(masks);
  }
  return y;
}

Mat MultiHeadAttention::backward(ParameterStore& ps, const Cache& cache, const Mat& dy) const {
  const Eigen::Index t = cache.input.rows();
  const Eigen::Index hd = static_cast<Eigen::Index>(dim / heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const Mat dconcat = output.backward(ps, cache.concat, dy);
  Mat dq(t, static_cast<Eigen::Index>(dim)), dk(t, static_cast<Eigen::Index>(dim)),
      dv(t, static_cast<Eigen::Index>(dim));
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * hd;
    const Mat& p = cache.probs[h];
    const Mat& mask = cache.dropout[h];
    const Mat pd = (p.array() * mask.array()).matrix();
    const auto dout = dconcat.middleCols(c0, hd);
    dv.middleCols(c0, hd) = pd.transpose() * dout;
    const Mat dpd = dout * cache.v.middleCols(c0, hd).transpose();
    const Mat dp = (dpd.array() * mask.array()).matrix();
    // Softmax Jacobian applied row by row.
    const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
    const Mat ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
    dq.middleCols(c0, hd) = ds * cache.k.middleCols(c0, hd);
    dk.middleCols(c0, hd) = ds.transpose() * cache.q.middleCols(c0, hd);
  }
  Mat dx = query.backward(ps, cache.input, dq);
  dx += key.backward(ps, cache.input, dk);
  dx += value.backward(ps, cache.input, dv);
  return dx;
}

// ---------------------------------------------------------------------------

Conv2dValid Conv2dValid::create(ParameterStore& ps, const std::string& name, std::size_t in_h,
                                std::size_t in_w, std::size_t k_h, std::size_t k_w, Rng& rng) {
  Conv2dValid c;
  c.in_h = in_h;
  c.in_w = in_w;
  c.k_h = k_h;
  c.k_w = k_w;
  c.kernel = ps.add(name + ".kernel", static_cast<Eigen::Index>(k_h), static_cast<Eigen::Index>(k_w), true);
  c.bias = ps.add(name + ".bias", 1, 1, false);
  init_fan_in_uniform(ps[c.kernel].value, k_h * k_w, rng);
  init_fan_in_uniform(ps[c.bias].value, k_h * k_w, rng);
  return c;
}

Mat Conv2dValid::forward(const ParameterStore& ps, const Mat& x) const {
  const Mat& kern = ps[kernel].value;
  const double b = ps[bias].value(0, 0);
  const std::size_t oh = out_h(), ow = out_w();
  Mat y(x.rows(), static_cast<Eigen::Index>(oh * ow));
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double* img = x.row(t).data();
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double s = b;
        for (std::size_t a = 0; a < k_h; ++a) {
          const double* in_row = img + (i + a) * in_w + j;
          const double* k_row = kern.data() + a * k_w;
          for (std::size_t c = 0; c < k_w; ++c) s += k_row[c] * in_row[c];
        }
        y(t, static_cast<Eigen::Index>(i * ow + j)) = s;
      }
    }
  }
  return y;
}

void Conv2dValid::backward(ParameterStore& ps, const Mat& x, const Mat& dy) const {
  Mat& dk = ps[kernel].grad;
  double db = 0.0;
  const std::size_t oh = out_h(), ow = out_w();
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double* img = x.row(t).data();
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double g = dy(t, static_cast<Eigen::Index>(i * ow + j));
        if (g == 0.0) continue;
        db += g;
        for (std::size_t a = 0; a < k_h; ++a) {
          const double* in_row = img + (i + a) * in_w + j;
          double* dk_row = dk.data() + a * k_w;
          for (std::size_t c = 0; c < k_w; ++c) dk_row[c] += g * in_row[c];
        }
      }
    }
  }
  ps[bias].grad(0, 0) += db;
}

}  // namespace topoterm::nn
