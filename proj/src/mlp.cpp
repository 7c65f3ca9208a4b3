#include "detq/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "detq/rng.hpp"

namespace detq {

namespace {

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

}  // namespace

long Mlp::param_count() const {
  long n = 0;
  for (int l = 0; l < depth(); ++l) {
    n += static_cast<long>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

void validate(const Mlp& net) {
  if (net.layer_sizes.size() < 2) {
    throw std::invalid_argument("net needs at least input and output widths");
  }
  for (int s : net.layer_sizes) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  if (net.head == Head::SigmoidScalar && net.output_width() != 1) {
    throw std::invalid_argument("sigmoid head requires output width 1");
  }
  if (net.head == Head::SoftmaxPair && net.output_width() != 2) {
    throw std::invalid_argument("softmax head requires output width 2");
  }
  if (net.weights.size() != static_cast<size_t>(net.depth()) ||
      net.biases.size() != static_cast<size_t>(net.depth())) {
    throw std::invalid_argument("weight/bias layer count mismatch");
  }
  for (int l = 0; l < net.depth(); ++l) {
    size_t rows = net.layer_sizes[l + 1], cols = net.layer_sizes[l];
    if (net.weights[l].size() != rows * cols || net.biases[l].size() != rows) {
      throw std::invalid_argument("parameter shape mismatch at layer " +
                                  std::to_string(l));
    }
    for (double v : net.weights[l]) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight");
    }
    for (double v : net.biases[l]) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite bias");
    }
  }
}

Mlp init_params(const std::vector<int>& layer_sizes, Head head, uint64_t seed) {
  Mlp net;
  net.layer_sizes = layer_sizes;
  net.head = head;
  RngStream rng(seed);
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    int fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
    for (double& v : w) {
      v = (2.0 * rng.uniform01() - 1.0) * bound;
    }
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  validate(net);
  return net;
}

std::vector<double> forward(const Mlp& net, const std::vector<double>& x,
                            ForwardTrace* trace) {
  if (static_cast<int>(x.size()) != net.input_width()) {
    throw std::invalid_argument("input width mismatch");
  }
  if (trace) {
    trace->activations.assign(1, x);
    trace->preacts.clear();
  }
  std::vector<double> a = x;
  std::vector<double> z;
  const int depth = net.depth();
  for (int l = 0; l < depth; ++l) {
    const int rows = net.layer_sizes[l + 1], cols = net.layer_sizes[l];
    z.assign(rows, 0.0);
    const double* w = net.weights[l].data();
    for (int i = 0; i < rows; ++i) {
      double acc = net.biases[l][i];
      const double* wrow = w + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) acc += wrow[j] * a[j];
      z[i] = acc;
    }
    if (trace) trace->preacts.push_back(z);
    if (l + 1 < depth) {
      for (double& v : z) v = std::tanh(v);
      a = z;
      if (trace) trace->activations.push_back(a);
    } else {
      a = z;
    }
  }

  std::vector<double> raw, out;
  if (net.head == Head::SigmoidScalar) {
    double y = 1.0 / (1.0 + std::exp(-a[0]));
    raw = {y};
    out = {clamp_prob(y)};
  } else {
    double m = std::max(a[0], a[1]);
    double e0 = std::exp(a[0] - m), e1 = std::exp(a[1] - m);
    double y0 = e0 / (e0 + e1);
    raw = {y0, 1.0 - y0};
    double c0 = clamp_prob(y0);
    out = {c0, 1.0 - c0};
  }
  if (trace) {
    trace->head_raw = raw;
    trace->output = out;
  }
  return out;
}

double forward_scalar(const Mlp& net, double x) { return forward(net, {x})[0]; }

void Gradients::add(const Gradients& other) {
  for (size_t l = 0; l < w.size(); ++l) {
    for (size_t i = 0; i < w[l].size(); ++i) w[l][i] += other.w[l][i];
    for (size_t i = 0; i < b[l].size(); ++i) b[l][i] += other.b[l][i];
  }
}

void Gradients::scale(double s) {
  for (auto& layer : w)
    for (double& v : layer) v *= s;
  for (auto& layer : b)
    for (double& v : layer) v *= s;
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.depth(); ++l) {
    g.w.emplace_back(net.weights[l].size(), 0.0);
    g.b.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void backward(const Mlp& net, const ForwardTrace& trace,
              const std::vector<double>& upstream, Gradients& accum) {
  const int depth = net.depth();
  if (trace.preacts.size() != static_cast<size_t>(depth) ||
      trace.activations.size() != static_cast<size_t>(depth) ||
      trace.head_raw.empty()) {
    throw std::invalid_argument("trace does not match net");
  }
  if (static_cast<int>(upstream.size()) != net.output_width()) {
    throw std::invalid_argument("upstream gradient width mismatch");
  }
  for (int l = 0; l < depth; ++l) {
    if (trace.activations[l].size() != static_cast<size_t>(net.layer_sizes[l]) ||
        trace.preacts[l].size() != static_cast<size_t>(net.layer_sizes[l + 1])) {
      throw std::invalid_argument("trace does not match net");
    }
  }

  // Gradient with respect to the final pre-activation.
  std::vector<double> dz;
  if (net.head == Head::SigmoidScalar) {
    double y = trace.head_raw[0];
    dz = {upstream[0] * y * (1.0 - y)};
  } else {
    double y0 = trace.head_raw[0], y1 = trace.head_raw[1];
    double dot = upstream[0] * y0 + upstream[1] * y1;
    dz = {y0 * (upstream[0] - dot), y1 * (upstream[1] - dot)};
  }

  for (int l = depth - 1; l >= 0; --l) {
    const int rows = net.layer_sizes[l + 1], cols = net.layer_sizes[l];
    const std::vector<double>& a_prev = trace.activations[l];
    double* gw = accum.w[l].data();
    for (int i = 0; i < rows; ++i) {
      double d = dz[i];
      accum.b[l][i] += d;
      double* grow = gw + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) grow[j] += d * a_prev[j];
    }
    if (l == 0) break;
    std::vector<double> da(cols, 0.0);
    const double* w = net.weights[l].data();
    for (int i = 0; i < rows; ++i) {
      double d = dz[i];
      const double* wrow = w + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) da[j] += wrow[j] * d;
    }
    // tanh'(z) expressed through the stored activation.
    dz.assign(cols, 0.0);
    for (int j = 0; j < cols; ++j) {
      double a = a_prev[j];
      dz[j] = da[j] * (1.0 - a * a);
    }
  }
}

AdamState make_adam_state(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (int l = 0; l < net.depth(); ++l) {
    s.m_w.emplace_back(net.weights[l].size(), 0.0);
    s.v_w.emplace_back(net.weights[l].size(), 0.0);
    s.m_b.emplace_back(net.biases[l].size(), 0.0);
    s.v_b.emplace_back(net.biases[l].size(), 0.0);
  }
  return s;
}

namespace {

void adam_update(std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, const AdamState& s, double bc1,
                 double bc2) {
  for (size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw std::runtime_error("non-finite gradient in adam_step");
    }
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

void adam_step(Mlp& net, AdamState& state, const Gradients& grads) {
  if (grads.w.size() != net.weights.size()) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (int l = 0; l < net.depth(); ++l) {
    adam_update(net.weights[l], state.m_w[l], state.v_w[l], grads.w[l], state, bc1, bc2);
    adam_update(net.biases[l], state.m_b[l], state.v_b[l], grads.b[l], state, bc1, bc2);
  }
}

void save_checkpoint(const Mlp& net, uint64_t init_seed, uint64_t train_seed,
                     const std::string& path) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes;
  j["head"] = net.head == Head::SigmoidScalar ? "sigmoid" : "softmax";
  j["weights"] = net.weights;
  j["biases"] = net.biases;
  j["init_seed"] = init_seed;
  j["train_seed"] = train_seed;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
}

Mlp load_checkpoint(const std::string& path, uint64_t* init_seed,
                    uint64_t* train_seed) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  nlohmann::json j = nlohmann::json::parse(in);
  Mlp net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  std::string head = j.at("head").get<std::string>();
  if (head == "sigmoid") {
    net.head = Head::SigmoidScalar;
  } else if (head == "softmax") {
    net.head = Head::SoftmaxPair;
  } else {
    throw std::runtime_error("unknown head kind in " + path);
  }
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (init_seed) *init_seed = j.at("init_seed").get<uint64_t>();
  if (train_seed) *train_seed = j.at("train_seed").get<uint64_t>();
  validate(net);
  return net;
}

}  // namespace detq
