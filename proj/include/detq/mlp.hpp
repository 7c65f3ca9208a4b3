#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace detq {

enum class Head { SigmoidScalar, SoftmaxPair };

// Probability outputs are kept inside [kProbClamp, 1 - kProbClamp]; the
// closed-form losses are undefined at exact 0/1.
inline constexpr double kProbClamp = 1e-9;

// Dense multi-layer perceptron with tanh hidden activations. Weights are
// row-major (out x in) per layer. `layer_sizes` includes input and output
// widths, so a net with no hidden layer has two entries.
struct Mlp {
  std::vector<int> layer_sizes;
  Head head = Head::SigmoidScalar;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  long param_count() const;
};

// Throws if dimensions are inconsistent, the head width is wrong, or any
// parameter is non-finite.
void validate(const Mlp& net);

// Glorot-uniform weights, zero biases, drawn layer by layer in row-major
// order from RngStream(seed).
Mlp init_params(const std::vector<int>& layer_sizes, Head head, uint64_t seed);

struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // activations[0] is the input
  std::vector<std::vector<double>> preacts;
  std::vector<double> head_raw;  // head output before clamping
  std::vector<double> output;    // clamped head output
};

// Runs the net; the optional trace is required for backward(). The sigmoid
// head returns one value in (0,1); the softmax head a pair summing to 1.
std::vector<double> forward(const Mlp& net, const std::vector<double>& x,
                            ForwardTrace* trace = nullptr);

// Scalar-input, scalar-output convenience (sigmoid head).
double forward_scalar(const Mlp& net, double x);

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  void add(const Gradients& other);
  void scale(double s);
};

Gradients zero_gradients(const Mlp& net);

// Accumulates parameter gradients for one sample into `accum`, given the
// gradient of the loss with respect to the head output. The trace must come
// from forward() on the same net.
void backward(const Mlp& net, const ForwardTrace& trace,
              const std::vector<double>& upstream, Gradients& accum);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
};

AdamState make_adam_state(const Mlp& net, double lr);

// Standard bias-corrected Adam update; rejects non-finite gradients.
void adam_step(Mlp& net, AdamState& state, const Gradients& grads);

// Parameter checkpoint JSON: layer sizes, head kind, row-major weight and
// bias arrays, and the seeds that produced them.
void save_checkpoint(const Mlp& net, uint64_t init_seed, uint64_t train_seed,
                     const std::string& path);
Mlp load_checkpoint(const std::string& path, uint64_t* init_seed = nullptr,
                    uint64_t* train_seed = nullptr);

}  // namespace detq
