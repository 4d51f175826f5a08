#include "sbamp/ds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sbamp/spline.hpp"
#include "sbamp/strings.hpp"

namespace sbamp {
namespace ds {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// log N(xi; mean, cov) for SPD cov.
double log_gaussian(const Vec2& xi, const Vec2& mean, const Mat2& cov) {
  const double det = cov.determinant();
  if (det <= 0.0) return -std::numeric_limits<double>::infinity();
  const Mat2 inv = cov.inverse();
  const Vec2 d = xi - mean;
  const double q = d.dot(inv * d);
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * q;
}

}  // namespace

void MixtureModel::check_invariants() const {
  const size_t n = components.size();
  if (n == 0) throw InvalidDataError("mixture has no components");
  if (means.size() != n || covariances.size() != n || priors.size() != n)
    throw InvalidDataError("mixture parameter arrays disagree in length");
  double prior_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (priors[i] < 0.0) throw InvalidDataError("negative mixture prior");
    prior_sum += priors[i];
    const Mat2& cov = covariances[i];
    if (std::abs(cov.m01 - cov.m10) > 1e-9 || cov.m00 <= 0.0 || cov.determinant() <= 0.0)
      throw InvalidDataError("covariance is not SPD");
    const SymEigenvalues eig = sym_eigenvalues(components[i].A + components[i].A.transpose());
    if (eig.hi > -eps_stab + 1e-9)
      throw InvalidDataError("component violates the stability margin");
    const Vec2 expected_b = -(components[i].A * attractor);
    if ((components[i].b - expected_b).norm() > 1e-9)
      throw InvalidDataError("b_k != -A_k * attractor");
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw InvalidDataError("priors do not sum to 1");
}

Responsibilities responsibilities(const MixtureModel& model, const Vec2& xi) {
  const int k = model.k();
  Responsibilities out;
  out.weights.assign(static_cast<size_t>(k), 0.0);
  if (k == 1) {
    out.weights[0] = 1.0;
    return out;
  }

  std::vector<double> logw(static_cast<size_t>(k));
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const double lp = model.priors[static_cast<size_t>(i)] > 0.0
                          ? std::log(model.priors[static_cast<size_t>(i)])
                          : -std::numeric_limits<double>::infinity();
    logw[static_cast<size_t>(i)] =
        lp + log_gaussian(xi, model.means[static_cast<size_t>(i)],
                          model.covariances[static_cast<size_t>(i)]);
    max_log = std::max(max_log, logw[static_cast<size_t>(i)]);
  }

  if (!std::isfinite(max_log)) {
    // All densities underflowed: fall back to a one-hot on the nearest mean.
    out.underflow_fallback = true;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      const double d = (xi - model.means[static_cast<size_t>(i)]).norm_sq();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.weights[static_cast<size_t>(best)] = 1.0;
    return out;
  }

  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = std::exp(logw[static_cast<size_t>(i)] - max_log);
    out.weights[static_cast<size_t>(i)] = w;
    sum += w;
  }
  for (double& w : out.weights) w /= sum;
  return out;
}

Vec2 evaluate(const MixtureModel& model, const Vec2& xi) {
  const Responsibilities resp = responsibilities(model, xi);
  Vec2 v;
  for (int i = 0; i < model.k(); ++i) {
    const LinearSubsystem& c = model.components[static_cast<size_t>(i)];
    v += resp.weights[static_cast<size_t>(i)] * (c.A * xi + c.b);
  }
  return v;
}

MixtureModel shift_attractor(const MixtureModel& model, const Vec2& x) {
  MixtureModel out = model;
  out.attractor = x;
  for (LinearSubsystem& c : out.components) c.b = -(c.A * x);
  return out;
}

DemoDataset synthesize_demo(const WaypointPath& path, double nominal_speed,
                            double sample_spacing) {
  if (path.waypoints.size() < 2) throw DegeneratePathError("path needs >= 2 waypoints");
  if (nominal_speed <= 0.0 || sample_spacing <= 0.0)
    throw ConfigError("nominal_speed and sample_spacing must be > 0");

  const CubicSpline2 spline(path.waypoints);
  const double total = spline.total_arclength();

  DemoDataset demo;
  demo.rate_hz = nominal_speed / sample_spacing;
  // The last regular sample keeps at least half a spacing of clearance from
  // the terminal one, so the zero-velocity endpoint never sits on top of a
  // full-speed sample.
  for (double s = 0.0; s < total - 0.5 * sample_spacing; s += sample_spacing) {
    const double u = spline.param_at_arclength(s);
    const Vec2 tangent = spline.derivative(u).normalized();
    demo.samples.push_back({spline.position(u), tangent * nominal_speed});
  }
  // Terminal attractor sample: exact end position, zero velocity.
  demo.samples.push_back({spline.position(spline.knot_max()), Vec2{}});
  return demo;
}

Mat2 StableParam::to_matrix(double eps_stab) const {
  // A = S - (L L^T + eps I)
  const double g00 = l00 * l00;
  const double g10 = l10 * l00;
  const double g11 = l10 * l10 + l11 * l11;
  return {-g00 - eps_stab, skew - g10, -skew - g10, -g11 - eps_stab};
}

StableParam StableParam::from_matrix(const Mat2& A, double eps_stab) {
  StableParam p;
  p.skew = 0.5 * (A.m01 - A.m10);
  Mat2 sym = A.symmetric_part();
  // Clamp the symmetric part's eigenvalues to the margin so -sym - eps I is
  // PSD even for infeasible inputs.
  const SymEigenvalues eig = sym_eigenvalues(sym);
  if (eig.hi > -eps_stab) {
    const double shift = eig.hi + eps_stab;
    sym.m00 -= shift;
    sym.m11 -= shift;
  }
  const Mat2 gram = Mat2{-sym.m00 - eps_stab, -sym.m01, -sym.m10, -sym.m11 - eps_stab};
  Mat2 l;
  cholesky_lower(gram, &l);
  // A zero diagonal entry would freeze its gradient direction; nudge off it.
  p.l00 = std::max(l.m00, 1e-6);
  p.l10 = l.m10;
  p.l11 = std::max(l.m11, 1e-6);
  return p;
}

double fit_objective(const FitProblem& problem, std::span<const StableParam> params) {
  const size_t n = problem.offsets.size();
  const size_t k = static_cast<size_t>(problem.k);
  std::vector<Mat2> mats(k);
  for (size_t i = 0; i < k; ++i) mats[i] = params[i].to_matrix(problem.eps_stab);

  double j = 0.0;
  for (size_t s = 0; s < n; ++s) {
    Vec2 f;
    for (size_t i = 0; i < k; ++i)
      f += problem.weights[s * k + i] * (mats[i] * problem.offsets[s]);
    j += (problem.velocities[s] - f).norm_sq();
  }
  return j;
}

void fit_gradient(const FitProblem& problem, std::span<const StableParam> params,
                  std::span<StableParam> grad) {
  const size_t n = problem.offsets.size();
  const size_t k = static_cast<size_t>(problem.k);
  std::vector<Mat2> mats(k);
  for (size_t i = 0; i < k; ++i) mats[i] = params[i].to_matrix(problem.eps_stab);

  // dJ/dA_k = -2 sum_n w_nk r_n u_n^T, then chain to (skew, L).
  std::vector<Mat2> g_mat(k, Mat2{});
  for (size_t s = 0; s < n; ++s) {
    Vec2 f;
    for (size_t i = 0; i < k; ++i)
      f += problem.weights[s * k + i] * (mats[i] * problem.offsets[s]);
    const Vec2 r = problem.velocities[s] - f;
    for (size_t i = 0; i < k; ++i) {
      const double w = problem.weights[s * k + i];
      if (w == 0.0) continue;
      g_mat[i] = g_mat[i] + (-2.0 * w) * outer(r, problem.offsets[s]);
    }
  }

  for (size_t i = 0; i < k; ++i) {
    const Mat2& g = g_mat[i];
    const StableParam& p = params[i];
    // dA/ds = [[0, 1], [-1, 0]]
    grad[i].skew = g.m01 - g.m10;
    // A depends on L through -(L L^T); d(LL^T)/dl terms below.
    grad[i].l00 = -(2.0 * p.l00 * g.m00 + p.l10 * (g.m01 + g.m10));
    grad[i].l10 = -(p.l00 * (g.m01 + g.m10) + 2.0 * p.l10 * g.m11);
    grad[i].l11 = -(2.0 * p.l11 * g.m11);
  }
}

namespace {

struct EmResult {
  std::vector<Vec2> means;
  std::vector<Mat2> covariances;
  std::vector<double> priors;
  std::vector<double> weights;  // row-major n x k responsibilities
  int pruned = 0;
};

EmResult fit_em(const std::vector<Vec2>& points, int k, const FitConfig& config) {
  const size_t n = points.size();
  EmResult em;

  // Deterministic init: means spread along the sample order, shared isotropic
  // covariance from the data spread.
  Vec2 mean_all;
  for (const Vec2& p : points) mean_all += p;
  mean_all = mean_all / static_cast<double>(n);
  double spread = 0.0;
  for (const Vec2& p : points) spread += (p - mean_all).norm_sq();
  spread = std::max(spread / static_cast<double>(n), 1e-4);

  for (int i = 0; i < k; ++i) {
    const size_t idx = static_cast<size_t>((i + 0.5) * static_cast<double>(n) / k);
    em.means.push_back(points[std::min(idx, n - 1)]);
    em.covariances.push_back(Mat2::diagonal(spread, spread));
    em.priors.push_back(1.0 / k);
  }

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.em_max_iterations; ++iter) {
    const size_t kk = em.means.size();
    em.weights.assign(n * kk, 0.0);
    double ll = 0.0;

    // E-step.
    for (size_t s = 0; s < n; ++s) {
      std::vector<double> logw(kk);
      double max_log = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < kk; ++i) {
        logw[i] = (em.priors[i] > 0.0 ? std::log(em.priors[i])
                                      : -std::numeric_limits<double>::infinity()) +
                  log_gaussian(points[s], em.means[i], em.covariances[i]);
        max_log = std::max(max_log, logw[i]);
      }
      double sum = 0.0;
      for (size_t i = 0; i < kk; ++i) sum += std::exp(logw[i] - max_log);
      ll += max_log + std::log(sum);
      for (size_t i = 0; i < kk; ++i)
        em.weights[s * kk + i] = std::exp(logw[i] - max_log) / sum;
    }

    // M-step with covariance floor.
    std::vector<size_t> keep;
    std::vector<Vec2> new_means(kk);
    std::vector<Mat2> new_covs(kk);
    std::vector<double> new_priors(kk);
    for (size_t i = 0; i < kk; ++i) {
      double mass = 0.0;
      Vec2 mu;
      for (size_t s = 0; s < n; ++s) {
        mass += em.weights[s * kk + i];
        mu += em.weights[s * kk + i] * points[s];
      }
      if (mass * static_cast<double>(kk) < config.prune_prior * static_cast<double>(n) ||
          mass < 1e-12) {
        ++em.pruned;
        continue;  // degenerate cluster: prune
      }
      mu = mu / mass;
      Mat2 cov;
      for (size_t s = 0; s < n; ++s) {
        const Vec2 d = points[s] - mu;
        cov = cov + em.weights[s * kk + i] * outer(d, d);
      }
      cov = cov * (1.0 / mass);
      cov.m00 += config.covariance_floor;
      cov.m11 += config.covariance_floor;
      new_means[i] = mu;
      new_covs[i] = cov;
      new_priors[i] = mass / static_cast<double>(n);
      keep.push_back(i);
    }

    if (keep.size() < kk) {
      // Rebuild without the pruned components and renormalize.
      std::vector<Vec2> means;
      std::vector<Mat2> covs;
      std::vector<double> priors;
      double total = 0.0;
      for (size_t i : keep) total += new_priors[i];
      for (size_t i : keep) {
        means.push_back(new_means[i]);
        covs.push_back(new_covs[i]);
        priors.push_back(new_priors[i] / total);
      }
      if (means.empty()) throw InvalidDataError("EM pruned every component");
      em.means = std::move(means);
      em.covariances = std::move(covs);
      em.priors = std::move(priors);
      prev_ll = -std::numeric_limits<double>::infinity();
      continue;
    }

    em.means = std::move(new_means);
    em.covariances = std::move(new_covs);
    double total = 0.0;
    for (double p : new_priors) total += p;
    for (double& p : new_priors) p /= total;
    em.priors = std::move(new_priors);

    if (std::abs(ll - prev_ll) < config.em_tol * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
  }

  // Final E-step so the returned weights match the returned parameters.
  const size_t kk = em.means.size();
  em.weights.assign(n * kk, 0.0);
  for (size_t s = 0; s < n; ++s) {
    std::vector<double> logw(kk);
    double max_log = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < kk; ++i) {
      logw[i] = std::log(em.priors[i]) + log_gaussian(points[s], em.means[i], em.covariances[i]);
      max_log = std::max(max_log, logw[i]);
    }
    double sum = 0.0;
    for (size_t i = 0; i < kk; ++i) sum += std::exp(logw[i] - max_log);
    for (size_t i = 0; i < kk; ++i) em.weights[s * kk + i] = std::exp(logw[i] - max_log) / sum;
  }
  return em;
}

/// Per-component weighted least squares A = (sum w v u^T)(sum w u u^T + l I)^-1,
/// used as the gradient-descent starting point. The relative ridge keeps the
/// directions the data barely constrains near zero instead of letting them
/// blow up; descent on the plain residual leaves such directions alone.
Mat2 weighted_ls_matrix(const FitProblem& problem, size_t comp) {
  Mat2 vu, uu;
  const size_t k = static_cast<size_t>(problem.k);
  for (size_t s = 0; s < problem.offsets.size(); ++s) {
    const double w = problem.weights[s * k + comp];
    vu = vu + w * outer(problem.velocities[s], problem.offsets[s]);
    uu = uu + w * outer(problem.offsets[s], problem.offsets[s]);
  }
  const double ridge = 1e-2 * 0.5 * uu.trace() + 1e-9;
  uu.m00 += ridge;
  uu.m11 += ridge;
  return vu * uu.inverse();
}

}  // namespace

FitResult fit(const DemoDataset& data, int k, double eps_stab, const FitConfig& config) {
  const size_t n = data.samples.size();
  if (k < 1) throw InvalidDataError("fit needs k >= 1");
  if (n < static_cast<size_t>(k) * 4)
    throw InvalidDataError("fit needs at least 4 samples per component");
  for (const DemoSample& s : data.samples)
    if (!finite(s.position) || !finite(s.velocity))
      throw InvalidDataError("non-finite demonstration sample");
  if (eps_stab <= 0.0) throw ConfigError("eps_stab must be > 0");

  const Vec2 attractor = data.samples.back().position;

  std::vector<Vec2> points(n);
  for (size_t s = 0; s < n; ++s) points[s] = data.samples[s].position;
  EmResult em = fit_em(points, k, config);
  const int kk = static_cast<int>(em.means.size());

  FitProblem problem;
  problem.k = kk;
  problem.eps_stab = eps_stab;
  problem.weights = em.weights;
  problem.offsets.resize(n);
  problem.velocities.resize(n);
  for (size_t s = 0; s < n; ++s) {
    problem.offsets[s] = data.samples[s].position - attractor;
    problem.velocities[s] = data.samples[s].velocity;
  }

  // Starting point: warm-start matrices when provided and compatible,
  // otherwise per-component stability-projected least squares.
  std::vector<StableParam> params(static_cast<size_t>(kk));
  const bool warm = config.warm_start != nullptr && config.warm_start->k() == kk &&
                    config.warm_start->eps_stab == eps_stab;
  for (int i = 0; i < kk; ++i) {
    const Mat2 a0 = warm ? config.warm_start->components[static_cast<size_t>(i)].A
                         : weighted_ls_matrix(problem, static_cast<size_t>(i));
    params[static_cast<size_t>(i)] = StableParam::from_matrix(a0, eps_stab);
  }

  // Gradient descent with Armijo backtracking on the feasible parameterization.
  std::vector<StableParam> grad(static_cast<size_t>(kk));
  std::vector<StableParam> trial(static_cast<size_t>(kk));
  double j = fit_objective(problem, params);
  double step = 0.1;
  int iterations = 0;
  for (; iterations < config.gd_max_iterations; ++iterations) {
    fit_gradient(problem, params, grad);
    double g2 = 0.0;
    for (const StableParam& g : grad)
      g2 += g.skew * g.skew + g.l00 * g.l00 + g.l10 * g.l10 + g.l11 * g.l11;
    if (g2 < config.gd_tol * (1.0 + j)) break;

    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (int i = 0; i < kk; ++i) {
        const size_t ii = static_cast<size_t>(i);
        trial[ii].skew = params[ii].skew - step * grad[ii].skew;
        trial[ii].l00 = params[ii].l00 - step * grad[ii].l00;
        trial[ii].l10 = params[ii].l10 - step * grad[ii].l10;
        trial[ii].l11 = params[ii].l11 - step * grad[ii].l11;
      }
      const double j_trial = fit_objective(problem, trial);
      if (j_trial <= j - 1e-4 * step * g2) {
        params.swap(trial);
        j = j_trial;
        step *= 2.0;  // let the accepted step grow again
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  FitResult result;
  result.components_pruned = em.pruned;
  result.gd_iterations = iterations;
  result.mean_squared_residual = j / static_cast<double>(n);
  result.model.eps_stab = eps_stab;
  result.model.means = std::move(em.means);
  result.model.covariances = std::move(em.covariances);
  result.model.priors = std::move(em.priors);
  result.model.components.resize(static_cast<size_t>(kk));
  for (int i = 0; i < kk; ++i)
    result.model.components[static_cast<size_t>(i)].A =
        params[static_cast<size_t>(i)].to_matrix(eps_stab);
  result.model = shift_attractor(result.model, attractor);
  result.model.check_invariants();
  return result;
}

namespace {

nlohmann::json mat_to_json(const Mat2& m) {
  return nlohmann::json::array({m.m00, m.m01, m.m10, m.m11});
}

Mat2 mat_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

}  // namespace

std::string model_to_json(const MixtureModel& model) {
  nlohmann::json j;
  j["k"] = model.k();
  j["eps_stab"] = model.eps_stab;
  j["attractor"] = {model.attractor.x, model.attractor.y};
  j["components"] = nlohmann::json::array();
  for (int i = 0; i < model.k(); ++i) {
    const size_t ii = static_cast<size_t>(i);
    nlohmann::json c;
    c["A"] = mat_to_json(model.components[ii].A);
    c["b"] = {model.components[ii].b.x, model.components[ii].b.y};
    c["mu"] = {model.means[ii].x, model.means[ii].y};
    c["sigma"] = mat_to_json(model.covariances[ii]);
    c["pi"] = model.priors[ii];
    j["components"].push_back(c);
  }
  return j.dump(2) + "\n";
}

MixtureModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  MixtureModel model;
  model.eps_stab = j.at("eps_stab").get<double>();
  model.attractor = {j.at("attractor").at(0).get<double>(), j.at("attractor").at(1).get<double>()};
  for (const auto& c : j.at("components")) {
    model.components.push_back(
        {mat_from_json(c.at("A")), {c.at("b").at(0).get<double>(), c.at("b").at(1).get<double>()}});
    model.means.push_back({c.at("mu").at(0).get<double>(), c.at("mu").at(1).get<double>()});
    model.covariances.push_back(mat_from_json(c.at("sigma")));
    model.priors.push_back(c.at("pi").get<double>());
  }
  if (model.k() != j.at("k").get<int>()) throw ParseError("model JSON: k mismatch");
  model.check_invariants();
  return model;
}

void save_model(const MixtureModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path);
  out << model_to_json(model);
}

MixtureModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace ds
}  // namespace sbamp
