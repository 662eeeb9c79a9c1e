#pragma once

// Inter-GM: per-agent Gaussian mixture whose category weights are indexed by
// a sign shared between two agents. Conjugate Dirichlet / Normal-Wishart
// updates, log-space category posteriors and a Gibbs fitter.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mhng/common.hpp"

namespace mhng {

struct Hyperparams {
  Eigen::VectorXd alpha;  // Dirichlet concentration over categories (K)
  double beta = 1.0;      // Normal-Wishart mean scale
  Eigen::Vector3d m = Eigen::Vector3d(50.0, 0.0, 0.0);
  Eigen::Matrix3d w_inv = Eigen::Matrix3d::Identity() * 200.0;
  double nu = 5.0;        // Wishart degrees of freedom
  Eigen::VectorXd pi;     // prior over signs (L)

  int categories() const { return static_cast<int>(alpha.size()); }
  int signs() const { return static_cast<int>(pi.size()); }

  /// The analysis configuration: K = L = 5, alpha = 0.1, beta = 1,
  /// m = (50,0,0), W^-1 = 200 I, uniform pi. nu defaults to dimension + 2.
  static Hyperparams defaults(int categories = 5, int signs = 5) {
    Hyperparams h;
    h.alpha = Eigen::VectorXd::Constant(categories, 0.1);
    h.pi = Eigen::VectorXd::Constant(signs, 1.0 / signs);
    return h;
  }

  void validate() const {
    require(categories() >= 1 && signs() >= 1, "K and L must be positive");
    require((alpha.array() > 0.0).all(), "alpha entries must be positive");
    require(beta > 0.0, "beta must be positive");
    require(nu > 2.0, "nu must exceed dimension - 1");
    require(m.allFinite(), "m must be finite");
    require((w_inv - w_inv.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, w_inv.cwiseAbs().maxCoeff()),
            "W^-1 must be symmetric");
    require(w_inv.llt().info() == Eigen::Success, "W^-1 must be positive-definite");
    require((pi.array() > 0.0).all(), "pi entries must be positive");
    require(std::abs(pi.sum() - 1.0) <= 1e-9, "pi must sum to 1");
  }
};

struct GaussParams {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d precision = Eigen::Matrix3d::Identity();
};

struct AgentState {
  Eigen::MatrixXd theta;  // L x K, row l is P(category | sign l)
  std::vector<GaussParams> gauss;
  std::vector<CategoryIndex> assignments;
  std::vector<SignIndex> signs;

  int categories() const { return static_cast<int>(theta.cols()); }
  int sign_count() const { return static_cast<int>(theta.rows()); }
};

// --- distributions ----------------------------------------------------------

/// Gamma(shape >= 1, 1) by Marsaglia-Tsang; `normal` is reused so its cached
/// second variate is not discarded.
inline double sample_gamma_ge1(double shape, Rng& rng, std::normal_distribution<double>& normal) {
  const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// Gamma(shape, 1) in log space; stable for shape << 1 where draws underflow.
inline double sample_log_gamma(double shape, Rng& rng, std::normal_distribution<double>& normal) {
  require(shape > 0.0, "gamma shape must be positive");
  if (shape >= 1.0) return std::log(sample_gamma_ge1(shape, rng, normal));
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::log(sample_gamma_ge1(shape + 1.0, rng, normal)) + std::log(u) / shape;
}

inline double sample_log_gamma(double shape, Rng& rng) {
  std::normal_distribution<double> normal;
  return sample_log_gamma(shape, rng, normal);
}

/// Dirichlet draw written to out[0..k). Small shapes use g * u^(1/shape);
/// if every component underflows the row is redrawn in log space.
inline void sample_dirichlet_into(const double* concentration, Eigen::Index k, double* out, Rng& rng,
                                  std::normal_distribution<double>& normal) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double a = concentration[i];
    if (a >= 1.0) {
      out[i] = sample_gamma_ge1(a, rng, normal);
    } else {
      require(a > 0.0, "gamma shape must be positive");
      out[i] = sample_gamma_ge1(a + 1.0, rng, normal) * std::pow(uniform01(rng), 1.0 / a);
    }
    sum += out[i];
  }
  if (sum > 0.0 && std::isfinite(sum)) {
    for (Eigen::Index i = 0; i < k; ++i) out[i] /= sum;
    return;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) mx = std::max(mx, out[i] = sample_log_gamma(concentration[i], rng, normal));
  sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) sum += out[i] = std::exp(out[i] - mx);
  for (Eigen::Index i = 0; i < k; ++i) out[i] /= sum;
}

inline Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentration, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd w(concentration.size());
  sample_dirichlet_into(concentration.data(), concentration.size(), w.data(), rng, normal);
  return w;
}

inline int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = uniform01(rng) * probs.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
    if (probs(i) > 0.0) return static_cast<int>(i);
  return 0;
}

/// Wishart(nu, W) via the Bartlett decomposition; scale_chol is chol(W).
inline Eigen::Matrix3d sample_wishart(double nu, const Eigen::Matrix3d& scale_chol, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    a(i, i) = std::sqrt(2.0 * std::gamma_distribution<double>((nu - i) / 2.0, 1.0)(rng));
    for (int j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::Matrix3d la = scale_chol * a;
  Eigen::Matrix3d out = la * la.transpose();
  return 0.5 * (out + out.transpose());
}

inline double log_normal_density(const Eigen::Vector3d& x, const GaussParams& g) {
  const Eigen::LLT<Eigen::Matrix3d> llt(g.precision);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::Vector3d d = x - g.mean;
  return 0.5 * log_det - 1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * d.dot(g.precision * d);
}

// --- sufficient statistics --------------------------------------------------

struct SufficientStats {
  Eigen::MatrixXi sign_category_counts;  // L x K
  std::vector<int> counts;               // per category
  std::vector<Eigen::Vector3d> sums;
  std::vector<Eigen::Matrix3d> scatter;  // centered: sum (x - xbar)(x - xbar)^T

  int categories() const { return static_cast<int>(counts.size()); }

  static SufficientStats accumulate(std::span<const Eigen::Vector3d> xs, std::span<const CategoryIndex> c,
                                    std::span<const SignIndex> s, int categories, int signs) {
    require(xs.size() == c.size() && xs.size() == s.size(), "observations, categories and signs must align");
    SufficientStats st;
    st.sign_category_counts = Eigen::MatrixXi::Zero(signs, categories);
    st.counts.assign(categories, 0);
    st.sums.assign(categories, Eigen::Vector3d::Zero());
    for (std::size_t n = 0; n < xs.size(); ++n) {
      require(c[n] >= 0 && c[n] < categories, "category index out of range");
      require(s[n] >= 0 && s[n] < signs, "sign index out of range");
      st.sign_category_counts(s[n], c[n]) += 1;
      st.counts[c[n]] += 1;
      st.sums[c[n]] += xs[n];
    }
    st.scatter.assign(categories, Eigen::Matrix3d::Zero());
    for (std::size_t n = 0; n < xs.size(); ++n) {
      const Eigen::Vector3d d = xs[n] - st.sums[c[n]] / st.counts[c[n]];
      st.scatter[c[n]] += d * d.transpose();
    }
    return st;
  }
};

// --- conjugate posteriors ---------------------------------------------------

struct ThetaPosterior {
  Eigen::MatrixXd sample;
  Eigen::MatrixXd mean;
};

/// Row-wise Dir(alpha + counts_l) posterior: one draw and the analytic mean.
inline ThetaPosterior posterior_theta(const Eigen::MatrixXi& counts, const Eigen::VectorXd& alpha, Rng& rng) {
  require(counts.cols() == alpha.size(), "counts and alpha disagree on K");
  require((counts.array() >= 0).all(), "counts must be non-negative");
  ThetaPosterior out{Eigen::MatrixXd(counts.rows(), counts.cols()), Eigen::MatrixXd(counts.rows(), counts.cols())};
  for (Eigen::Index l = 0; l < counts.rows(); ++l) {
    const Eigen::VectorXd conc = alpha + counts.row(l).transpose().cast<double>();
    out.mean.row(l) = (conc / conc.sum()).transpose();
    out.sample.row(l) = sample_dirichlet(conc, rng).transpose();
  }
  return out;
}

inline Eigen::MatrixXd posterior_theta_mean(const Eigen::MatrixXi& counts, const Eigen::VectorXd& alpha) {
  Eigen::MatrixXd mean(counts.rows(), counts.cols());
  for (Eigen::Index l = 0; l < counts.rows(); ++l) {
    const Eigen::VectorXd conc = alpha + counts.row(l).transpose().cast<double>();
    mean.row(l) = (conc / conc.sum()).transpose();
  }
  return mean;
}

/// Normal-Wishart parameters (m, beta, W, nu); W is the scale, not its inverse.
struct NormalWishart {
  Eigen::Vector3d m;
  double beta;
  Eigen::Matrix3d w;
  double nu;

  GaussParams mean() const { return {m, nu * w}; }

  GaussParams sample(Rng& rng) const {
    const Eigen::Matrix3d lw = w.llt().matrixL();
    GaussParams g;
    g.precision = sample_wishart(nu, lw, rng);
    const Eigen::Matrix3d lp = (beta * g.precision).llt().matrixL();
    std::normal_distribution<double> normal;
    const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
    g.mean = m + lp.transpose().triangularView<Eigen::Upper>().solve(z);
    return g;
  }
};

inline NormalWishart prior_normal_wishart(const Hyperparams& h) { return {h.m, h.beta, h.w_inv.inverse(), h.nu}; }

inline NormalWishart posterior_normal_wishart(const Hyperparams& h, int count, const Eigen::Vector3d& sum,
                                              const Eigen::Matrix3d& scatter) {
  if (count == 0) return prior_normal_wishart(h);
  const double n = count;
  const Eigen::Vector3d xbar = sum / n;
  const double beta_n = h.beta + n;
  const Eigen::Vector3d d = xbar - h.m;
  Eigen::Matrix3d w_inv_n = h.w_inv + scatter + (h.beta * n / beta_n) * d * d.transpose();
  w_inv_n = 0.5 * (w_inv_n + w_inv_n.transpose());
  Eigen::Matrix3d w_n = w_inv_n.inverse();
  w_n = 0.5 * (w_n + w_n.transpose());
  return {(h.beta * h.m + sum) / beta_n, beta_n, w_n, h.nu + n};
}

struct GaussPosterior {
  std::vector<GaussParams> samples;
  std::vector<GaussParams> means;
};

inline GaussPosterior posterior_gauss(const SufficientStats& stats, const Hyperparams& h, Rng& rng) {
  GaussPosterior out;
  for (int k = 0; k < stats.categories(); ++k) {
    const auto& sc = stats.scatter[k];
    require((sc - sc.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, sc.cwiseAbs().maxCoeff()),
            "scatter matrix must be symmetric");
    const auto nw = posterior_normal_wishart(h, stats.counts[k], stats.sums[k], sc);
    out.means.push_back(nw.mean());
    out.samples.push_back(nw.sample(rng));
  }
  return out;
}

// --- per-observation queries -----------------------------------------------

/// P(c | x, s, state), normalized from log-weights with one max subtraction.
struct CategoryPosterior {
  Eigen::VectorXd probabilities;
  bool fallback = false;  // no finite log-weight; probabilities put all mass on the argmax
};

inline CategoryPosterior category_posterior(const Eigen::Vector3d& x, SignIndex s, const AgentState& state) {
  require(s >= 0 && s < state.sign_count(), "sign index out of range");
  const int k = state.categories();
  Eigen::VectorXd logw(k);
  for (int c = 0; c < k; ++c) logw(c) = std::log(state.theta(s, c)) + log_normal_density(x, state.gauss[c]);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < k; ++c)
    if (logw(c) > logw(best) || std::isnan(logw(best))) best = c;
  const double mx = logw(best);
  CategoryPosterior out{Eigen::VectorXd::Zero(k), false};
  if (!std::isfinite(mx)) {
    out.probabilities(best) = 1.0;
    out.fallback = true;
    return out;
  }
  out.probabilities = (logw.array() - mx).exp();
  out.probabilities /= out.probabilities.sum();
  return out;
}

struct CategoryDraw {
  CategoryIndex category = 0;
  bool fallback = false;
};

inline CategoryDraw sample_category(const Eigen::Vector3d& x, SignIndex s, const AgentState& state, Rng& rng) {
  const auto post = category_posterior(x, s, state);
  if (post.fallback) {
    Eigen::Index best;
    post.probabilities.maxCoeff(&best);
    return {static_cast<CategoryIndex>(best), true};
  }
  return {sample_categorical(post.probabilities, rng), false};
}

inline double category_given_sign(CategoryIndex c, SignIndex s, const Eigen::MatrixXd& theta) {
  require(s >= 0 && s < theta.rows(), "sign index out of range");
  require(c >= 0 && c < theta.cols(), "category index out of range");
  return theta(s, c);
}

/// P(s | theta, c) proportional to pi_s * theta_s[c].
inline Eigen::VectorXd sign_posterior(CategoryIndex c, const Eigen::MatrixXd& theta, const Eigen::VectorXd& pi) {
  require(c >= 0 && c < theta.cols(), "category index out of range");
  require(pi.size() == theta.rows(), "pi and theta disagree on L");
  Eigen::VectorXd w = pi.cwiseProduct(theta.col(c));
  const double total = w.sum();
  require(total > 0.0 && std::isfinite(total), "sign posterior has no mass");
  return w / total;
}

// --- generative process -----------------------------------------------------

struct GeneratedData {
  std::vector<SignIndex> signs;
  std::array<AgentState, 2> agents;
  std::array<std::vector<Eigen::Vector3d>, 2> observations;
};

inline GeneratedData generate(const Hyperparams& h, std::size_t n, std::uint64_t seed) {
  h.validate();
  Rng rng = make_rng(seed);
  GeneratedData out;
  out.signs.resize(n);
  for (auto& s : out.signs) s = sample_categorical(h.pi, rng);
  const auto prior = prior_normal_wishart(h);
  for (int a = 0; a < 2; ++a) {
    AgentState& st = out.agents[a];
    st.gauss.clear();
    for (int k = 0; k < h.categories(); ++k) st.gauss.push_back(prior.sample(rng));
    st.theta.resize(h.signs(), h.categories());
    for (int l = 0; l < h.signs(); ++l) st.theta.row(l) = sample_dirichlet(h.alpha, rng).transpose();
    st.signs = out.signs;
    st.assignments.resize(n);
    auto& xs = out.observations[a];
    xs.resize(n);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = sample_categorical(st.theta.row(out.signs[i]).transpose(), rng);
      st.assignments[i] = c;
      const Eigen::Matrix3d cov_chol = st.gauss[c].precision.inverse().llt().matrixL();
      const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
      xs[i] = st.gauss[c].mean + cov_chol * z;
    }
  }
  return out;
}

// --- Gibbs fitter -------------------------------------------------------------

struct GibbsOptions {
  int iterations = 2000;
  int burn_in = 500;
  std::uint64_t seed = 0;
  /// Skip Normal-Wishart draws and report their analytic posterior mean.
  bool theta_only = false;
};

struct GibbsDiagnostics {
  int category_fallbacks = 0;
};

/// Posterior-mean parameters of one agent. With `fixed_c` the chain draws
/// independent conjugate samples; without it the chain alternates category
/// sampling and parameter draws, and `assignments` holds the final sweep.
inline AgentState gibbs_fit(std::span<const Eigen::Vector3d> xs, std::optional<std::span<const CategoryIndex>> fixed_c,
                            std::span<const SignIndex> fixed_s, const Hyperparams& h, const GibbsOptions& opt = {},
                            GibbsDiagnostics* diag = nullptr) {
  h.validate();
  require(opt.iterations > opt.burn_in && opt.burn_in >= 0, "iterations must exceed burn_in");
  require(fixed_s.size() == xs.size(), "signs must align with observations");
  if (fixed_c) require(fixed_c->size() == xs.size(), "categories must align with observations");
  const int k = h.categories(), l = h.signs();
  Rng rng = make_rng(opt.seed);

  AgentState cur;
  cur.signs.assign(fixed_s.begin(), fixed_s.end());
  if (fixed_c) {
    cur.assignments.assign(fixed_c->begin(), fixed_c->end());
  } else {
    std::uniform_int_distribution<int> pick(0, k - 1);
    cur.assignments.resize(xs.size());
    for (auto& c : cur.assignments) c = pick(rng);
  }

  Eigen::MatrixXd theta_acc = Eigen::MatrixXd::Zero(l, k);
  std::vector<Eigen::Vector3d> mean_acc(k, Eigen::Vector3d::Zero());
  std::vector<Eigen::Matrix3d> prec_acc(k, Eigen::Matrix3d::Zero());
  const int kept = opt.iterations - opt.burn_in;
  std::vector<GaussParams> analytic_gauss;

  auto stats = SufficientStats::accumulate(xs, cur.assignments, cur.signs, k, l);
  // With c fixed every draw is independent, so burn-in draws would be discarded unused.
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  auto concentration = [&] {
    RowMatrix c = stats.sign_category_counts.cast<double>();
    c.rowwise() += h.alpha.transpose();
    return c;
  };
  RowMatrix conc = concentration(), theta(l, k);
  std::normal_distribution<double> normal;
  for (int it = fixed_c ? opt.burn_in : 0; it < opt.iterations; ++it) {
    for (int row = 0; row < l; ++row) sample_dirichlet_into(conc.row(row).data(), k, theta.row(row).data(), rng, normal);
    cur.theta = theta;
    if (opt.theta_only && fixed_c) {
      if (analytic_gauss.empty()) {
        for (int c = 0; c < k; ++c)
          analytic_gauss.push_back(
              posterior_normal_wishart(h, stats.counts[c], stats.sums[c], stats.scatter[c]).mean());
        cur.gauss = analytic_gauss;
      }
    } else {
      cur.gauss = posterior_gauss(stats, h, rng).samples;
    }
    if (!fixed_c) {
      for (std::size_t n = 0; n < xs.size(); ++n) {
        const auto draw = sample_category(xs[n], cur.signs[n], cur, rng);
        if (draw.fallback && diag) ++diag->category_fallbacks;
        cur.assignments[n] = draw.category;
      }
      stats = SufficientStats::accumulate(xs, cur.assignments, cur.signs, k, l);
      conc = concentration();
    }
    if (it >= opt.burn_in) {
      theta_acc += cur.theta;
      for (int c = 0; c < k; ++c) {
        mean_acc[c] += cur.gauss[c].mean;
        prec_acc[c] += cur.gauss[c].precision;
      }
    }
  }

  AgentState out;
  out.theta = theta_acc / kept;
  for (int c = 0; c < k; ++c) {
    Eigen::Matrix3d p = prec_acc[c] / kept;
    out.gauss.push_back({mean_acc[c] / kept, 0.5 * (p + p.transpose())});
  }
  out.assignments = cur.assignments;
  out.signs = cur.signs;
  return out;
}

/// Throws unless every theta row is on the simplex and every precision is SPD.
inline void validate_agent(const AgentState& st) {
  require(st.theta.size() > 0, "theta is empty");
  require((st.theta.array() >= 0.0).all(), "theta entries must be non-negative");
  for (Eigen::Index l = 0; l < st.theta.rows(); ++l)
    require(std::abs(st.theta.row(l).sum() - 1.0) <= 1e-9, "theta rows must sum to 1");
  require(static_cast<int>(st.gauss.size()) == st.categories(), "one Gaussian per category required");
  for (const auto& g : st.gauss) {
    require((g.precision - g.precision.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, g.precision.cwiseAbs().maxCoeff()),
            "precision must be symmetric");
    require(g.precision.llt().info() == Eigen::Success, "precision must be positive-definite");
  }
  require(st.assignments.size() == st.signs.size(), "assignments and signs must align");
}

// --- serialization ----------------------------------------------------------

inline constexpr const char* kAgentSchema = "mhng.agent/1";

inline nlohmann::ordered_json to_json(const AgentState& st) {
  nlohmann::ordered_json j;
  j["schema"] = kAgentSchema;
  auto theta = nlohmann::ordered_json::array();
  for (Eigen::Index l = 0; l < st.theta.rows(); ++l) {
    std::vector<double> row(st.theta.cols());
    for (Eigen::Index c = 0; c < st.theta.cols(); ++c) row[c] = st.theta(l, c);
    theta.push_back(row);
  }
  j["theta"] = theta;
  auto gauss = nlohmann::ordered_json::array();
  for (const auto& g : st.gauss) {
    nlohmann::ordered_json gj;
    gj["mean"] = {g.mean(0), g.mean(1), g.mean(2)};
    auto p = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) p.push_back({g.precision(r, 0), g.precision(r, 1), g.precision(r, 2)});
    gj["precision"] = p;
    gauss.push_back(gj);
  }
  j["gauss"] = gauss;
  j["assignments"] = st.assignments;
  j["signs"] = st.signs;
  return j;
}

template <class Json>
AgentState agent_state_from_json(const Json& j) {
  try {
    require(j.at("schema").template get<std::string>() == kAgentSchema, "unsupported agent schema");
    AgentState st;
    const auto& theta = j.at("theta");
    const auto rows = static_cast<Eigen::Index>(theta.size());
    const auto cols = rows ? static_cast<Eigen::Index>(theta.at(0).size()) : 0;
    st.theta.resize(rows, cols);
    for (Eigen::Index l = 0; l < rows; ++l)
      for (Eigen::Index c = 0; c < cols; ++c) st.theta(l, c) = theta.at(l).at(c).template get<double>();
    for (const auto& gj : j.at("gauss")) {
      GaussParams g;
      for (int d = 0; d < 3; ++d) {
        g.mean(d) = gj.at("mean").at(d).template get<double>();
        for (int e = 0; e < 3; ++e) g.precision(d, e) = gj.at("precision").at(d).at(e).template get<double>();
      }
      st.gauss.push_back(g);
    }
    st.assignments = j.at("assignments").template get<std::vector<int>>();
    st.signs = j.at("signs").template get<std::vector<int>>();
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed agent document: ") + e.what());
  }
}

}  // namespace mhng
