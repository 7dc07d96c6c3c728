#include "hitlq/model.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hitlq {

double beta_reg(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  Eigen::Array<double, 1, 1> aa, bb, xx;
  aa(0) = a;
  bb(0) = b;
  xx(0) = x;
  return Eigen::betainc(aa, bb, xx)(0);
}

double beta_density(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) return 0.0;
  if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity()
                               : (a == 1.0 ? b : 0.0);
  if (x == 1.0) return b < 1.0 ? std::numeric_limits<double>::infinity()
                               : (b == 1.0 ? a : 0.0);
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
                  lbeta);
}

void RiskModel::validate() const {
  if (!(dist_alpha > 0.0) || !(dist_beta > 0.0))
    throw std::invalid_argument("RiskModel: Beta shape parameters must be > 0");
  if (cost_coeffs.size() < 1)
    throw std::invalid_argument("RiskModel: need at least one regime cost coefficient");
  for (int i = 0; i < cost_coeffs.size(); ++i)
    if (!(cost_coeffs[i] > 0.0))
      throw std::invalid_argument("RiskModel: cost coefficients must be > 0");
  if (!(cost_exponent >= 1.0))
    throw std::invalid_argument("RiskModel: cost exponent must be >= 1");
}

double RiskModel::cost_auto(double s, int theta) const {
  if (s < 0.0 || s > 1.0)
    throw std::domain_error("cost_auto: risk score outside [0,1]");
  if (theta < 0 || theta >= num_regimes())
    throw std::domain_error("cost_auto: unknown regime index");
  return cost_coeffs[theta] * std::pow(s, cost_exponent);
}

double RiskModel::invert_cost_auto(double target, int theta) const {
  if (target < 0.0)
    throw std::domain_error("invert_cost_auto: negative target");
  if (theta < 0 || theta >= num_regimes())
    throw std::domain_error("invert_cost_auto: unknown regime index");
  const double a = cost_coeffs[theta];
  if (target == 0.0) return 0.0;
  if (target > a * (1.0 + 1e-15)) return kNever;
  return std::min(1.0, std::pow(target / a, 1.0 / cost_exponent));
}

double RiskModel::cost_auto_slope(double s, int theta) const {
  const double p = cost_exponent;
  if (s <= 0.0) return p == 1.0 ? cost_coeffs[theta] : 0.0;
  return cost_coeffs[theta] * p * std::pow(s, p - 1.0);
}

double RiskModel::risk_cdf(double s) const {
  if (s < 0.0 || s > 1.0)
    throw std::domain_error("risk_cdf: score outside [0,1]");
  return beta_reg(dist_alpha, dist_beta, s);
}

double RiskModel::risk_pdf(double s) const {
  return beta_density(dist_alpha, dist_beta, s);
}

double RiskModel::risk_quantile(double u) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  double x = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double f = beta_reg(dist_alpha, dist_beta, x) - u;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double d = beta_density(dist_alpha, dist_beta, x);
    double step = d > 0.0 ? f / d : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-14) return next;
    x = next;
  }
  return x;
}

double DriftChain::max_exit_rate() const {
  double m = 0.0;
  for (int i = 0; i < num_states(); ++i) m = std::max(m, exit_rate(i));
  return m;
}

void DriftChain::validate() const {
  const int k = num_states();
  if (k < 1 || generator.cols() != k)
    throw std::invalid_argument("DriftChain: generator must be square, K >= 1");
  for (int i = 0; i < k; ++i) {
    double row = 0.0;
    for (int j = 0; j < k; ++j) {
      if (i != j && generator(i, j) < 0.0)
        throw std::invalid_argument(
            "DriftChain: negative off-diagonal rate at row " +
            std::to_string(i));
      row += generator(i, j);
    }
    const double scale = std::max(1.0, generator.row(i).cwiseAbs().maxCoeff());
    if (std::abs(row) > 1e-9 * scale)
      throw std::invalid_argument("DriftChain: row " + std::to_string(i) +
                                  " does not sum to zero");
  }
}

DriftChain scale_drift_intensity(const DriftChain& chain, double multiplier) {
  if (!(multiplier >= 0.0))
    throw std::invalid_argument("scale_drift_intensity: multiplier must be >= 0");
  DriftChain out = chain;
  const int k = chain.num_states();
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) out.generator(i, j) *= multiplier;
    double row = 0.0;
    for (int j = 0; j < k; ++j)
      if (j != i) row += out.generator(i, j);
    out.generator(i, i) = -row;
  }
  return out;
}

namespace {

// Reachability sets under edges with positive rate; used to report the
// communicating classes of a reducible chain.
std::vector<bool> reachable_from(const Matrix& gen, int start, bool reverse) {
  const int k = static_cast<int>(gen.rows());
  std::vector<bool> seen(k, false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < k; ++j) {
      const double rate = reverse ? gen(j, i) : gen(i, j);
      if (i != j && rate > 0.0 && !seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

}  // namespace

Vector stationary_distribution(const DriftChain& chain) {
  chain.validate();
  const int k = chain.num_states();
  if (k == 1) return Vector::Ones(1);

  const auto fwd = reachable_from(chain.generator, 0, false);
  const auto bwd = reachable_from(chain.generator, 0, true);
  std::vector<int> outside;
  for (int i = 0; i < k; ++i)
    if (!fwd[i] || !bwd[i]) outside.push_back(i);
  if (!outside.empty()) {
    std::ostringstream os;
    os << "DriftChain is reducible: states {";
    for (size_t i = 0; i < outside.size(); ++i)
      os << (i ? "," : "") << outside[i];
    os << "} do not communicate with state 0";
    throw std::invalid_argument(os.str());
  }

  // pi Q = 0 with the last column of Q^T replaced by the normalization row.
  Matrix a = chain.generator.transpose();
  a.row(k - 1).setOnes();
  Vector b = Vector::Zero(k);
  b[k - 1] = 1.0;
  Vector pi = a.fullPivLu().solve(b);
  const double resid =
      (pi.transpose() * chain.generator).cwiseAbs().maxCoeff();
  if (resid > 1e-10 || pi.minCoeff() <= 0.0)
    throw std::invalid_argument(
        "stationary_distribution: balance equations ill-conditioned");
  return pi;
}

void QueueEconomics::validate() const {
  if (!(arrival_rate >= 0.0))
    throw std::invalid_argument("QueueEconomics: arrival_rate must be >= 0");
  if (n_servers < 1)
    throw std::invalid_argument("QueueEconomics: n_servers must be >= 1");
  if (!(service_rate > 0.0))
    throw std::invalid_argument("QueueEconomics: service_rate must be > 0");
  if (!(escalation_fee >= 0.0))
    throw std::invalid_argument("QueueEconomics: escalation_fee must be >= 0");
  if (!(holding_coeff >= 0.0))
    throw std::invalid_argument("QueueEconomics: holding_coeff must be >= 0");
}

std::string SupermodularityReport::summary() const {
  if (pass) return "supermodularity: pass";
  std::ostringstream os;
  os << "supermodularity: fail at s=(" << s_low << "," << s_high
     << ") theta=(" << theta_low << "," << theta_high << ") deficit "
     << deficit;
  return os.str();
}

SupermodularityReport check_supermodularity(const RiskModel& model,
                                            int grid_size) {
  if (grid_size < 2)
    throw std::invalid_argument("check_supermodularity: grid_size must be >= 2");
  SupermodularityReport rep;
  const int k = model.num_regimes();
  const double h = 1.0 / (grid_size - 1);
  for (int tl = 0; tl < k; ++tl) {
    for (int th = tl + 1; th < k; ++th) {
      for (int i = 0; i < grid_size; ++i) {
        for (int j = i + 1; j < grid_size; ++j) {
          const double s = i * h, sp = j * h;
          const double lhs =
              model.cost_auto(sp, th) - model.cost_auto(s, th);
          const double rhs =
              model.cost_auto(sp, tl) - model.cost_auto(s, tl);
          if (lhs < rhs - 1e-12) {
            rep.pass = false;
            rep.s_low = s;
            rep.s_high = sp;
            rep.theta_low = tl;
            rep.theta_high = th;
            rep.deficit = rhs - lhs;
            return rep;
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace hitlq
