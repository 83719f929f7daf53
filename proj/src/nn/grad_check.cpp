#include "flamesentinel/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flamesentinel/core/rng.hpp"

namespace flamesentinel::nn {
namespace {

double loss_at(Sequential<double>& net, const Tensor<double>& input, const Tensor<double>& target,
               std::uint64_t dropout_seed) {
  net.reseed_dropout(dropout_seed);
  return mse_loss(net.forward(input, Mode::train), target).value;
}

std::vector<std::size_t> pick_entries(std::size_t count, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= count) return idx;
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct Analytic {
  std::vector<Tensor<double>> params;
  Tensor<double> input;
};

void score(GradCheckReport& report, double analytic, double numeric, double floor,
           const std::string& label) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  const double rel = std::abs(analytic - numeric) / denom;
  ++report.entries_checked;
  if (report.worst_entry.empty() || rel > report.max_relative_error) {
    report.max_relative_error = rel;
    report.worst_entry = label;
  }
}

// `probe` may alias `input`.
double central_difference(Sequential<double>& net, Tensor<double>& probe, std::size_t i,
                          const Tensor<double>& input, const Tensor<double>& target,
                          const GradCheckOptions& options) {
  const double saved = probe[i];
  probe[i] = saved + options.step;
  const double up = loss_at(net, input, target, options.dropout_seed);
  probe[i] = saved - options.step;
  const double down = loss_at(net, input, target, options.dropout_seed);
  probe[i] = saved;
  return (up - down) / (2.0 * options.step);
}

GradCheckReport compare(Sequential<double>& net, const Analytic& analytic, Tensor<double> input,
                        const Tensor<double>& target, double tolerance,
                        const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(options.sample_seed);

  struct Entry {
    double analytic, numeric;
    std::string label;
  };
  std::vector<Entry> entries;
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& value = params[p]->value;
    for (std::size_t i : pick_entries(value.size(), options.max_entries_per_tensor, rng)) {
      entries.push_back({analytic.params[p][i], central_difference(net, value, i, input, target, options),
                         params[p]->name + "[" + std::to_string(i) + "]"});
    }
  }
  if (options.include_input && !analytic.input.empty()) {
    for (std::size_t i : pick_entries(input.size(), options.max_entries_per_tensor, rng)) {
      entries.push_back({analytic.input[i], central_difference(net, input, i, input, target, options),
                         "input[" + std::to_string(i) + "]"});
    }
  }
  double scale = 0.0;
  for (const auto& e : entries) scale = std::max(scale, std::abs(e.numeric));
  const double floor = std::max(options.denominator_floor, options.scale_floor * scale);
  for (const auto& e : entries) score(report, e.analytic, e.numeric, floor, e.label);
  report.passed = report.entries_checked > 0 && report.max_relative_error < tolerance;
  return report;
}

template <class T>
Analytic analytic_gradients(Sequential<T>& net, const Tensor<T>& input, const Tensor<T>& target,
                            std::uint64_t dropout_seed) {
  net.reseed_dropout(dropout_seed);
  net.zero_grad();
  const Tensor<T> out = net.forward(input, Mode::train);
  const Loss<T> loss = mse_loss(out, target);
  const Tensor<T> grad_in = net.backward(loss.grad);
  Analytic a;
  for (auto* p : net.parameters()) a.params.push_back(tensor_cast<double>(p->grad));
  if (!grad_in.empty()) a.input = tensor_cast<double>(grad_in);
  return a;
}

}  // namespace

GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input,
                           const Tensor<double>& target, double tolerance,
                           const GradCheckOptions& options) {
  const Analytic analytic = analytic_gradients(net, input, target, options.dropout_seed);
  return compare(net, analytic, input, target, tolerance, options);
}

GradCheckReport grad_check_mixed(Sequential<float>& net, Sequential<double>& reference,
                                 const Tensor<double>& input, const Tensor<double>& target,
                                 double tolerance, const GradCheckOptions& options) {
  copy_state(net, reference);
  const Analytic analytic = analytic_gradients(net, tensor_cast<float>(input),
                                               tensor_cast<float>(target), options.dropout_seed);
  // Train-mode forwards move the running statistics; they do not enter the
  // train-mode loss, so the reference may keep its own copies.
  return compare(reference, analytic, input, target, tolerance, options);
}

}  // namespace flamesentinel::nn
