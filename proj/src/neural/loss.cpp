#include <algorithm>
#include <cmath>

#include "qmoe/error.hpp"
#include "qmoe/neural.hpp"

namespace qmoe::neural {

LossResult mse_loss(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw InputError("mse_loss: length mismatch");
  if (x.size() == 0) throw InputError("mse_loss: empty input");
  const double n = static_cast<double>(x.size());
  const Vector diff = y - x;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

LossResult bce_loss(const Vector& labels, const Vector& probs) {
  if (labels.size() != probs.size()) throw InputError("bce_loss: length mismatch");
  if (labels.size() == 0) throw InputError("bce_loss: empty input");
  const double n = static_cast<double>(labels.size());
  LossResult r;
  r.grad = Vector::Zero(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double y = labels[i];
    const double raw = probs[i];
    const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
    r.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (raw > kProbClamp && raw < 1.0 - kProbClamp) {
      r.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
    }
  }
  r.loss /= n;
  return r;
}

}  // namespace qmoe::neural
