#include "scda/net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "scda/error.hpp"

namespace scda {

namespace {

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Identity: return z;
  }
  return z;
}

double activation_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

Matrix uniform_matrix(int rows, int cols, double s, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m.at(i, j) = rng.uniform(-s, s);
  return m;
}

std::vector<double> uniform_vector(int n, double s, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-s, s);
  return v;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) sums[j] += m.at(i, j);
  return sums;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ParseError("unknown activation: " + name);
}

Mlp make_mlp(int input_dim, const std::vector<int>& hidden_dims,
             int feature_dim, Rng& rng) {
  if (input_dim < 1 || feature_dim < 1) {
    throw ContractViolation("make_mlp: dims must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw ContractViolation("make_mlp: hidden dims must be >= 1");
  }
  Mlp f;
  f.input_dim = input_dim;
  f.feature_dim = feature_dim;
  int in = input_dim;
  for (int h : hidden_dims) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    f.layers.push_back(
        {uniform_matrix(in, h, s, rng), uniform_vector(h, s, rng),
         Activation::Relu});
    in = h;
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  f.layers.push_back({uniform_matrix(in, feature_dim, s, rng),
                      uniform_vector(feature_dim, s, rng),
                      Activation::Identity});
  return f;
}

SoftmaxClassifier make_classifier(int feature_dim, int num_known, int k,
                                  Rng& rng) {
  if (feature_dim < 1) {
    throw ContractViolation("make_classifier: feature_dim must be >= 1");
  }
  if (num_known < 1 || k < 1) {
    throw ContractViolation("make_classifier: num_known and k must be >= 1");
  }
  SoftmaxClassifier c;
  c.num_known = num_known;
  const double s = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  c.weights = uniform_matrix(feature_dim, num_known + k, s, rng);
  c.bias = uniform_vector(num_known + k, s, rng);
  return c;
}

SoftmaxClassifier restructure(const SoftmaxClassifier& c, int new_k,
                              Rng& rng) {
  if (new_k < 1) throw ContractViolation("restructure: new_k must be >= 1");
  return make_classifier(c.feature_dim(), c.num_known, new_k, rng);
}

Matrix softmax(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    double mx = logits.at(i, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < logits.cols(); ++j) {
      const double e = std::exp(logits.at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < logits.cols(); ++j) probs.at(i, j) /= sum;
  }
  return probs;
}

ForwardResult forward(const Mlp& f, const SoftmaxClassifier& c,
                      const Matrix& x) {
  if (x.cols() != f.input_dim) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) +
                     " columns, extractor expects " +
                     std::to_string(f.input_dim));
  }
  if (c.feature_dim() != f.feature_dim) {
    throw ShapeError("forward: classifier expects feature dim " +
                     std::to_string(c.feature_dim()) + ", extractor yields " +
                     std::to_string(f.feature_dim));
  }
  ForwardCache cache;
  cache.input = x;
  cache.f_version = f.version;
  cache.c_version = c.version;

  Matrix a = x;
  for (const Layer& layer : f.layers) {
    Matrix z = matmul(a, layer.weights);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z.at(i, j) += layer.bias[j];
    cache.pre.push_back(z);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j)
        z.at(i, j) = apply_activation(layer.activation, z.at(i, j));
    cache.post.push_back(z);
    a = std::move(z);
  }

  Matrix logits = matmul(a, c.weights);
  for (int i = 0; i < logits.rows(); ++i)
    for (int j = 0; j < logits.cols(); ++j) logits.at(i, j) += c.bias[j];
  cache.logits = logits;
  cache.probs = softmax(logits);

  ForwardResult out;
  out.features = cache.post.back();
  out.probs = cache.probs;
  out.cache = std::move(cache);
  return out;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (f_weights.size() != other.f_weights.size() ||
      !c_weights.same_shape(other.c_weights) ||
      c_bias.size() != other.c_bias.size()) {
    throw ShapeError("Gradients::operator+=: mismatched structure");
  }
  for (std::size_t l = 0; l < f_weights.size(); ++l) {
    add_inplace(f_weights[l], other.f_weights[l]);
    if (f_bias[l].size() != other.f_bias[l].size()) {
      throw ShapeError("Gradients::operator+=: mismatched bias shape");
    }
    for (std::size_t j = 0; j < f_bias[l].size(); ++j)
      f_bias[l][j] += other.f_bias[l][j];
  }
  add_inplace(c_weights, other.c_weights);
  for (std::size_t j = 0; j < c_bias.size(); ++j) c_bias[j] += other.c_bias[j];
  return *this;
}

Gradients zero_gradients(const Mlp& f, const SoftmaxClassifier& c) {
  Gradients g;
  for (const Layer& layer : f.layers) {
    g.f_weights.emplace_back(layer.weights.rows(), layer.weights.cols());
    g.f_bias.emplace_back(layer.bias.size(), 0.0);
  }
  g.c_weights = Matrix(c.weights.rows(), c.weights.cols());
  g.c_bias.assign(c.bias.size(), 0.0);
  return g;
}

Gradients backward_from_logits(const Mlp& f, const SoftmaxClassifier& c,
                               const ForwardCache& cache,
                               const Matrix& d_logits, GradScale scale,
                               Matrix* d_input) {
  if (cache.f_version != f.version || cache.c_version != c.version) {
    throw ContractViolation(
        "backward: model parameters changed after forward (stale cache)");
  }
  if (!d_logits.same_shape(cache.logits)) {
    throw ShapeError("backward: d_logits shape does not match cached logits");
  }

  Gradients g;
  const Matrix& features = cache.post.back();
  g.c_weights = matmul_transpose_a(features, d_logits);
  g.c_bias = column_sums(d_logits);

  Matrix d_post = matmul_transpose_b(d_logits, c.weights);
  scale_inplace(d_post, scale.lambda);

  g.f_weights.resize(f.layers.size());
  g.f_bias.resize(f.layers.size());
  for (int l = static_cast<int>(f.layers.size()) - 1; l >= 0; --l) {
    const Layer& layer = f.layers[l];
    Matrix d_pre = std::move(d_post);
    const Matrix& pre = cache.pre[l];
    for (int i = 0; i < d_pre.rows(); ++i)
      for (int j = 0; j < d_pre.cols(); ++j)
        d_pre.at(i, j) *= activation_derivative(layer.activation, pre.at(i, j));
    const Matrix& prev = l == 0 ? cache.input : cache.post[l - 1];
    g.f_weights[l] = matmul_transpose_a(prev, d_pre);
    g.f_bias[l] = column_sums(d_pre);
    if (l > 0 || d_input != nullptr) {
      d_post = matmul_transpose_b(d_pre, layer.weights);
    }
  }
  if (d_input != nullptr) *d_input = std::move(d_post);
  return g;
}

Gradients backward_from_probs(const Mlp& f, const SoftmaxClassifier& c,
                              const ForwardCache& cache, const Matrix& d_probs,
                              GradScale scale, Matrix* d_input) {
  if (!d_probs.same_shape(cache.probs)) {
    throw ShapeError("backward: d_probs shape does not match cached probs");
  }
  const Matrix& p = cache.probs;
  Matrix d_logits(p.rows(), p.cols());
  for (int i = 0; i < p.rows(); ++i) {
    double dot = 0.0;
    for (int j = 0; j < p.cols(); ++j) dot += d_probs.at(i, j) * p.at(i, j);
    for (int j = 0; j < p.cols(); ++j)
      d_logits.at(i, j) = p.at(i, j) * (d_probs.at(i, j) - dot);
  }
  return backward_from_logits(f, c, cache, d_logits, scale, d_input);
}

SgdState make_sgd_state(const Mlp& f, const SoftmaxClassifier& c,
                        SgdConfig config) {
  SgdState s;
  s.config = config;
  for (const Layer& layer : f.layers) {
    s.f_w_velocity.emplace_back(layer.weights.rows(), layer.weights.cols());
    s.f_b_velocity.emplace_back(layer.bias.size(), 0.0);
  }
  s.c_w_velocity = Matrix(c.weights.rows(), c.weights.cols());
  s.c_b_velocity.assign(c.bias.size(), 0.0);
  return s;
}

namespace {

void sgd_update(std::span<double> param, std::span<const double> grad,
                std::span<double> velocity, const SgdConfig& cfg) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] + grad[i] +
                  cfg.weight_decay * param[i];
    param[i] -= cfg.learning_rate * velocity[i];
  }
}

}  // namespace

void sgd_step(Mlp& f, SoftmaxClassifier& c, const Gradients& g, SgdState& s) {
  if (g.f_weights.size() != f.layers.size() ||
      s.f_w_velocity.size() != f.layers.size() ||
      !g.c_weights.same_shape(c.weights) ||
      !s.c_w_velocity.same_shape(c.weights)) {
    throw ShapeError("sgd_step: gradient/velocity structure mismatch");
  }
  for (std::size_t l = 0; l < f.layers.size(); ++l) {
    sgd_update(f.layers[l].weights.values(), g.f_weights[l].values(),
               s.f_w_velocity[l].values(), s.config);
    sgd_update(f.layers[l].bias, g.f_bias[l], s.f_b_velocity[l], s.config);
  }
  sgd_update(c.weights.values(), g.c_weights.values(), s.c_w_velocity.values(),
             s.config);
  sgd_update(c.bias, g.c_bias, s.c_b_velocity, s.config);
  ++f.version;
  ++c.version;
}

namespace {

nlohmann::ordered_json flat_array(const std::vector<double>& v) {
  return nlohmann::ordered_json(v);
}

std::vector<double> parse_flat_array(const nlohmann::ordered_json& j,
                                     std::size_t expected, const char* what) {
  if (!j.is_array() || j.size() != expected) {
    throw ParseError(std::string("checkpoint: ") + what +
                     " must be an array of " + std::to_string(expected) +
                     " numbers");
  }
  std::vector<double> v;
  v.reserve(expected);
  for (const auto& e : j) {
    if (!e.is_number()) {
      throw ParseError(std::string("checkpoint: ") + what +
                       " contains a non-numeric entry");
    }
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace

nlohmann::ordered_json checkpoint_to_json(const Mlp& f,
                                          const SoftmaxClassifier& c) {
  nlohmann::ordered_json doc;
  doc["format"] = "scda-checkpoint";
  doc["version"] = 1;
  nlohmann::ordered_json fe;
  fe["input_dim"] = f.input_dim;
  fe["feature_dim"] = f.feature_dim;
  fe["layers"] = nlohmann::ordered_json::array();
  for (const Layer& layer : f.layers) {
    nlohmann::ordered_json lj;
    lj["in"] = layer.weights.rows();
    lj["out"] = layer.weights.cols();
    lj["activation"] = activation_name(layer.activation);
    lj["weights"] = flat_array(layer.weights.values());
    lj["bias"] = flat_array(layer.bias);
    fe["layers"].push_back(std::move(lj));
  }
  doc["feature_extractor"] = std::move(fe);
  nlohmann::ordered_json cj;
  cj["feature_dim"] = c.feature_dim();
  cj["out_dim"] = c.out_dim();
  cj["num_known"] = c.num_known;
  cj["weights"] = flat_array(c.weights.values());
  cj["bias"] = flat_array(c.bias);
  doc["classifier"] = std::move(cj);
  return doc;
}

void checkpoint_from_json(const nlohmann::ordered_json& doc, Mlp& f,
                          SoftmaxClassifier& c) {
  try {
    if (doc.value("format", "") != "scda-checkpoint") {
      throw ParseError("checkpoint: missing or wrong \"format\" marker");
    }
    if (doc.value("version", -1) != 1) {
      throw ParseError("checkpoint: unsupported version");
    }
    const auto& fe = doc.at("feature_extractor");
    Mlp nf;
    nf.input_dim = fe.at("input_dim").get<int>();
    nf.feature_dim = fe.at("feature_dim").get<int>();
    int chain = nf.input_dim;
    for (const auto& lj : fe.at("layers")) {
      const int in = lj.at("in").get<int>();
      const int out = lj.at("out").get<int>();
      if (in != chain || in < 1 || out < 1) {
        throw ParseError("checkpoint: layer dims do not chain");
      }
      Layer layer;
      layer.activation = activation_from_name(lj.at("activation").get<std::string>());
      std::vector<double> w = parse_flat_array(
          lj.at("weights"), static_cast<std::size_t>(in) * out, "layer weights");
      layer.weights = Matrix(in, out, std::move(w));
      layer.bias = parse_flat_array(lj.at("bias"), out, "layer bias");
      nf.layers.push_back(std::move(layer));
      chain = out;
    }
    if (nf.layers.empty() || chain != nf.feature_dim) {
      throw ParseError("checkpoint: final layer width != feature_dim");
    }
    const auto& cj = doc.at("classifier");
    SoftmaxClassifier nc;
    const int fd = cj.at("feature_dim").get<int>();
    const int od = cj.at("out_dim").get<int>();
    nc.num_known = cj.at("num_known").get<int>();
    if (fd != nf.feature_dim) {
      throw ParseError("checkpoint: classifier feature_dim mismatch");
    }
    if (nc.num_known < 1 || od < nc.num_known + 1) {
      throw ParseError("checkpoint: out_dim must be >= num_known + 1");
    }
    std::vector<double> w = parse_flat_array(
        cj.at("weights"), static_cast<std::size_t>(fd) * od, "classifier weights");
    nc.weights = Matrix(fd, od, std::move(w));
    nc.bias = parse_flat_array(cj.at("bias"), od, "classifier bias");
    for (const Layer& layer : nf.layers) {
      require_finite(layer.weights, "checkpoint weights");
      for (double b : layer.bias)
        if (!std::isfinite(b)) throw ParseError("checkpoint: non-finite bias");
    }
    require_finite(nc.weights, "checkpoint weights");
    for (double b : nc.bias)
      if (!std::isfinite(b)) throw ParseError("checkpoint: non-finite bias");
    f = std::move(nf);
    c = std::move(nc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: malformed document: ") +
                     e.what());
  }
}

std::string checkpoint_to_string(const Mlp& f, const SoftmaxClassifier& c) {
  return checkpoint_to_json(f, c).dump(2) + "\n";
}

void checkpoint_from_string(const std::string& text, Mlp& f,
                            SoftmaxClassifier& c) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  checkpoint_from_json(doc, f, c);
}

void save_checkpoint(const std::string& path, const Mlp& f,
                     const SoftmaxClassifier& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << checkpoint_to_string(f, c);
  if (!out) throw IoError("write failed: " + path);
}

void load_checkpoint(const std::string& path, Mlp& f, SoftmaxClassifier& c) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  checkpoint_from_string(buf.str(), f, c);
}

}  // namespace scda
