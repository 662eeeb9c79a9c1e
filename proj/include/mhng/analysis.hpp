#pragma once

// Behavioural analysis of naming-game decisions.
//
// Test 1: fit Bern(z | a * r_mh + b) by maximum likelihood and compare the
// slope with a randomization null where every decision is redrawn from
// Bern(b_bar).
// Test 2: simulate each comparative acceptance model against the recorded
// trials, score agreement with the recorded decisions, and compare models
// with one-sided Mann-Whitney U tests.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhng/common.hpp"
#include "mhng/engine.hpp"
#include "mhng/event_log.hpp"
#include "mhng/inter_gm.hpp"
#include "mhng/parallel.hpp"

namespace mhng {

struct DecisionRecord {
  std::string participant_id;
  std::string dataset_id;
  std::size_t trial_index = 0;
  double r_mh = 1.0;
  double numerator = 0.0;
  double denominator = 0.0;
  int z = 0;
};

// --- decision inference ----------------------------------------------------------

struct InferOptions {
  Hyperparams hyper = Hyperparams::defaults();
  int iterations = 2000;
  int burn_in = 500;
  std::uint64_t seed = 0;
};

struct InferenceResult {
  std::vector<DecisionRecord> records;
  std::size_t skipped = 0;  // trials without a usable categorization snapshot
  std::vector<std::string> warnings;
};

/// Refits each listener's theta from the labelling recorded with every trial
/// and recomputes the MH acceptance terms for the proposed sign.
inline InferenceResult infer_decisions(const SessionLog& log, const InferOptions& opt = {}) {
  opt.hyper.validate();
  const int k = opt.hyper.categories(), l = opt.hyper.signs();
  InferenceResult out;
  struct Job {
    const LoggedTrial* trial;
    const StimulusSet* stimuli;
  };
  std::vector<Job> jobs;
  for (const auto& lt : log.trials) {
    const auto& t = lt.trial;
    auto warn = [&](const std::string& why) {
      ++out.skipped;
      out.warnings.push_back(lt.session_id + " trial " + std::to_string(t.trial_index) + ": " + why);
    };
    const auto hit = log.sessions.find(lt.session_id);
    if (hit == log.sessions.end()) { warn("no session header"); continue; }
    const StimulusSet* set = hit->second.dataset(t.dataset_id);
    if (!set) { warn("unknown dataset " + t.dataset_id); continue; }
    const auto n = set->size();
    const bool complete = t.listener_categories.size() == n && t.listener_signs.size() == n &&
                          std::all_of(t.listener_categories.begin(), t.listener_categories.end(),
                                      [&](int c) { return c >= 0 && c < k; }) &&
                          std::all_of(t.listener_signs.begin(), t.listener_signs.end(),
                                      [&](int s) { return s >= 0 && s < l; });
    if (!complete) { warn("missing categorization"); continue; }
    if (t.stimulus_index >= n || t.speaker_sign >= l || t.listener_sign >= l || t.listener_category >= k) {
      warn("label out of range");
      continue;
    }
    jobs.push_back({&lt, set});
  }

  // theta depends only on the sign/category count matrix; fits are keyed by it
  // so identical labellings share one chain.
  std::map<std::string, std::size_t> key_index;
  std::vector<std::string> keys;
  std::vector<std::size_t> job_key(jobs.size());
  std::vector<const Job*> key_job;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& t = jobs[i].trial->trial;
    const auto counts = sign_category_counts(t.listener_categories, t.listener_signs, k, l);
    std::string key(static_cast<std::size_t>(counts.size()), '\0');
    for (Eigen::Index e = 0; e < counts.size(); ++e) key[e] = static_cast<char>(std::min(counts.data()[e], 255));
    key += '#' + std::to_string(t.listener_categories.size());
    auto [it, fresh] = key_index.emplace(key, keys.size());
    if (fresh) {
      keys.push_back(key);
      key_job.push_back(&jobs[i]);
    }
    job_key[i] = it->second;
  }
  std::vector<Eigen::MatrixXd> thetas(keys.size());
  parallel_for(keys.size(), [&](std::size_t i) {
    const Job& job = *key_job[i];
    const auto& t = job.trial->trial;
    const auto xs = job.stimuli->observations();
    GibbsOptions g;
    g.iterations = opt.iterations;
    g.burn_in = opt.burn_in;
    g.seed = derive_seed(opt.seed, fnv1a(keys[i]));
    g.theta_only = true;
    std::span<const CategoryIndex> c(t.listener_categories);
    thetas[i] = gibbs_fit(xs, c, t.listener_signs, opt.hyper, g).theta;
  });

  out.records.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& lt = *jobs[i].trial;
    const auto& t = lt.trial;
    const auto terms = acceptance_terms(thetas[job_key[i]], t.listener_category, t.speaker_sign, t.listener_sign);
    out.records.push_back({lt.session_id + ":" + t.listener_id, t.dataset_id, t.trial_index, terms.r_mh,
                           terms.numerator, terms.denominator, t.decision});
  }
  return out;
}

// --- affine Bernoulli fit -----------------------------------------------------------

inline constexpr double kProbabilityGuard = 1e-12;

struct FitResult {
  double a = 0.0;
  double b = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  bool on_boundary = false;
  bool degenerate = false;  // all decisions equal, or all r_mh equal
};

struct FitOptions {
  int restarts = 10;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

/// Sum of log Bern(z_n | a r_n + b), probabilities guarded inside [1e-12, 1 - 1e-12].
inline double affine_log_likelihood(std::span<const double> r, std::span<const int> z, double a, double b) {
  double ll = 0.0;
  for (std::size_t n = 0; n < r.size(); ++n) {
    const double p = std::clamp(a * r[n] + b, kProbabilityGuard, 1.0 - kProbabilityGuard);
    ll += z[n] ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

namespace detail {

/// Decisions pooled by distinct r: the likelihood only needs, per r, how
/// many trials were accepted and rejected.
struct GroupedDecisions {
  std::vector<double> r;
  std::vector<double> accepted;
  std::vector<double> rejected;
  std::vector<std::size_t> group_of;  // input index -> group
};

inline GroupedDecisions group_by_r(std::span<const double> r) {
  GroupedDecisions g;
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
  g.group_of.resize(r.size());
  for (std::size_t i : order) {
    if (g.r.empty() || g.r.back() != r[i]) g.r.push_back(r[i]);
    g.group_of[i] = g.r.size() - 1;
  }
  g.accepted.assign(g.r.size(), 0.0);
  g.rejected.assign(g.r.size(), 0.0);
  return g;
}

inline void count_decisions(GroupedDecisions& g, std::span<const int> z) {
  std::fill(g.accepted.begin(), g.accepted.end(), 0.0);
  std::fill(g.rejected.begin(), g.rejected.end(), 0.0);
  for (std::size_t n = 0; n < z.size(); ++n) (z[n] ? g.accepted : g.rejected)[g.group_of[n]] += 1.0;
}

// The fit works in (b, t) with t = a + b, so p(r) = b (1 - r) + t r and the
// feasible set is the unit box.
struct AffineObjective {
  const GroupedDecisions& g;

  static double prob(const Eigen::Vector2d& x, double r) {
    return std::clamp(x(0) * (1.0 - r) + x(1) * r, kProbabilityGuard, 1.0 - kProbabilityGuard);
  }

  double value(const Eigen::Vector2d& x) const {
    double ll = 0.0;
    for (std::size_t i = 0; i < g.r.size(); ++i) {
      const double p = prob(x, g.r[i]);
      if (g.accepted[i] > 0.0) ll += g.accepted[i] * std::log(p);
      if (g.rejected[i] > 0.0) ll += g.rejected[i] * std::log1p(-p);
    }
    return ll;
  }

  void derivatives(const Eigen::Vector2d& x, Eigen::Vector2d& grad, Eigen::Matrix2d& hess) const {
    grad.setZero();
    hess.setZero();
    for (std::size_t i = 0; i < g.r.size(); ++i) {
      const double w0 = 1.0 - g.r[i], w1 = g.r[i];
      const double p = prob(x, g.r[i]);
      const double d = g.accepted[i] / p - g.rejected[i] / (1.0 - p);
      const double h = -(g.accepted[i] / (p * p) + g.rejected[i] / ((1.0 - p) * (1.0 - p)));
      grad(0) += d * w0;
      grad(1) += d * w1;
      hess(0, 0) += h * w0 * w0;
      hess(0, 1) += h * w0 * w1;
      hess(1, 1) += h * w1 * w1;
    }
    hess(1, 0) = hess(0, 1);
  }
};

inline Eigen::Vector2d project_box(Eigen::Vector2d x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

/// Bound-constrained projected Newton ascent with step halving; falls back
/// to the projected gradient when the reduced Hessian is not negative definite.
inline std::pair<Eigen::Vector2d, double> ascend(const AffineObjective& f, Eigen::Vector2d x, const FitOptions& opt) {
  x = project_box(x);
  double fx = f.value(x);
  constexpr double eps = 1e-12;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::Vector2d g;
    Eigen::Matrix2d h;
    f.derivatives(x, g, h);
    std::array<bool, 2> active{};
    for (int i = 0; i < 2; ++i) active[i] = (x(i) <= eps && g(i) < 0.0) || (x(i) >= 1.0 - eps && g(i) > 0.0);
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    if (!active[0] && !active[1]) {
      if (h.determinant() > 0.0 && h(0, 0) < 0.0) d = -h.ldlt().solve(g);
    } else {
      for (int i = 0; i < 2; ++i)
        if (!active[i] && active[1 - i] && h(i, i) < 0.0) d(i) = -g(i) / h(i, i);
    }
    if (!d.allFinite() || d.dot(g) <= 0.0) {
      d = g;
      for (int i = 0; i < 2; ++i)
        if (active[i]) d(i) = 0.0;
      d /= std::max(1.0, std::abs(h.trace()));
    }
    if (d.norm() == 0.0) break;
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      const Eigen::Vector2d cand = project_box(x + step * d);
      const double fc = f.value(cand);
      if (fc > fx) {
        const double gain = fc - fx;
        x = cand;
        fx = fc;
        moved = true;
        if (gain < opt.tolerance) return {x, fx};
        break;
      }
    }
    if (!moved) break;
  }
  return {x, fx};
}

inline FitResult fit_grouped(const GroupedDecisions& g, const FitOptions& opt) {
  const AffineObjective f{g};
  Rng rng = make_rng(opt.seed);
  FitResult best;
  Eigen::Vector2d best_x(0.5, 0.5);
  for (int s = 0; s < std::max(1, opt.restarts); ++s) {
    const Eigen::Vector2d start = s == 0 ? Eigen::Vector2d(0.5, 0.5) : Eigen::Vector2d(uniform01(rng), uniform01(rng));
    const auto [x, fx] = ascend(f, start, opt);
    if (fx > best.log_likelihood) {
      best.log_likelihood = fx;
      best_x = x;
    }
  }
  best.b = best_x(0);
  best.a = best_x(1) - best_x(0);
  constexpr double edge = 1e-9;
  best.on_boundary = best_x(0) <= edge || best_x(0) >= 1.0 - edge || best_x(1) <= edge || best_x(1) >= 1.0 - edge;
  const double acc = std::accumulate(g.accepted.begin(), g.accepted.end(), 0.0);
  const double rej = std::accumulate(g.rejected.begin(), g.rejected.end(), 0.0);
  best.degenerate = acc == 0.0 || rej == 0.0 || g.r.size() == 1;
  return best;
}

inline void check_decisions(std::span<const double> r, std::span<const int> z) {
  require(r.size() == z.size(), "r and z must align");
  require(!r.empty(), "fit needs at least one record");
  for (std::size_t n = 0; n < r.size(); ++n) {
    require(r[n] >= 0.0 && r[n] <= 1.0, "r_mh must lie in [0,1]");
    require(z[n] == 0 || z[n] == 1, "decisions must be 0 or 1");
  }
}

}  // namespace detail

/// Maximizes the affine-Bernoulli log-likelihood over 0 <= b <= 1 and
/// 0 <= a + b <= 1 (the Bernoulli parameter stays valid for every r in [0,1]).
/// Ten starts: the box centre and nine seeded uniform points.
inline FitResult fit_affine_bernoulli(std::span<const double> r, std::span<const int> z, const FitOptions& opt = {}) {
  detail::check_decisions(r, z);
  auto g = detail::group_by_r(r);
  detail::count_decisions(g, z);
  return detail::fit_grouped(g, opt);
}

inline FitResult fit_affine_bernoulli(std::span<const DecisionRecord> records, const FitOptions& opt = {}) {
  std::vector<double> r;
  std::vector<int> z;
  for (const auto& d : records) {
    r.push_back(d.r_mh);
    z.push_back(d.z);
  }
  return fit_affine_bernoulli(r, z, opt);
}

/// Log-likelihood gradient with respect to (a, b), guarded as in the objective.
inline Eigen::Vector2d affine_gradient(std::span<const double> r, std::span<const int> z, double a, double b) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (std::size_t n = 0; n < r.size(); ++n) {
    const double p = std::clamp(a * r[n] + b, kProbabilityGuard, 1.0 - kProbabilityGuard);
    const double d = z[n] ? 1.0 / p : -1.0 / (1.0 - p);
    g(0) += d * r[n];
    g(1) += d;
  }
  return g;
}

// --- randomization test ---------------------------------------------------------------

/// Upper-tail fraction (1/L) * |{l : sample_l >= x}|.
inline double empirical_cdf_value(std::span<const double> samples, double x) {
  require(!samples.empty(), "empirical CDF needs samples");
  const auto hits = std::count_if(samples.begin(), samples.end(), [&](double s) { return s >= x; });
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

inline constexpr double kSlopeAlpha = 0.001;
inline constexpr double kInterceptLowerTail = 0.0005;
inline constexpr double kInterceptUpperTail = 0.9995;

struct Test1Report {
  double a_hat = 0.0;
  double b_hat = 0.0;
  double log_likelihood = 0.0;
  bool fit_on_boundary = false;
  double b_bar = 0.0;
  std::size_t decisions = 0;
  std::vector<double> null_a_samples;
  std::vector<double> null_b_samples;
  double p_a = 1.0;
  double p_b = 1.0;
  bool reject_a = false;
  bool reject_b = false;
  std::vector<std::string> warnings;
};

inline Test1Report randomization_test(std::span<const double> r, std::span<const int> z, int replicates = 1000,
                                      std::uint64_t seed = 0, const FitOptions& fit_opt = {}) {
  require(!r.empty(), "randomization test needs records");
  require(replicates >= 1, "replicates must be positive");
  Test1Report rep;
  if (replicates < 100) rep.warnings.push_back("fewer than 100 replicates; tail estimates are unstable");
  FitOptions observed_opt = fit_opt;
  observed_opt.seed = derive_seed(seed, 0xf17);
  const auto fit = fit_affine_bernoulli(r, z, observed_opt);
  rep.a_hat = fit.a;
  rep.b_hat = fit.b;
  rep.log_likelihood = fit.log_likelihood;
  rep.fit_on_boundary = fit.on_boundary;
  rep.decisions = r.size();
  rep.b_bar = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());

  rep.null_a_samples.resize(replicates);
  rep.null_b_samples.resize(replicates);
  const auto groups = detail::group_by_r(r);
  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(seed, i));
    std::vector<int> zs(r.size());
    for (auto& v : zs) v = bernoulli(rng, rep.b_bar) ? 1 : 0;
    auto g = groups;
    detail::count_decisions(g, zs);
    FitOptions o = fit_opt;
    o.seed = derive_seed(seed, i + 0x100000000ULL);
    const auto f = detail::fit_grouped(g, o);
    rep.null_a_samples[i] = f.a;
    rep.null_b_samples[i] = f.b;
  });
  rep.p_a = empirical_cdf_value(rep.null_a_samples, rep.a_hat);
  rep.p_b = empirical_cdf_value(rep.null_b_samples, rep.b_hat);
  rep.reject_a = rep.p_a <= kSlopeAlpha;
  rep.reject_b = rep.p_b >= kInterceptUpperTail || rep.p_b <= kInterceptLowerTail;
  return rep;
}

inline Test1Report randomization_test(std::span<const DecisionRecord> records, int replicates = 1000,
                                      std::uint64_t seed = 0, const FitOptions& fit_opt = {}) {
  std::vector<double> r;
  std::vector<int> z;
  for (const auto& d : records) {
    r.push_back(d.r_mh);
    z.push_back(d.z);
  }
  return randomization_test(r, z, replicates, seed, fit_opt);
}

/// Empirical tails cannot certify zero: 0 prints as "< 1/replicates".
inline std::string format_p_value(double p, std::size_t replicates) {
  if (p <= 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "< %g", 1.0 / static_cast<double>(replicates));
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

// --- model comparison ------------------------------------------------------------------

inline const std::array<AcceptanceModel, 5>& comparison_models() {
  static const std::array<AcceptanceModel, 5> models{ConstantModel{}, MhModel{}, NumeratorModel{}, SubtractionModel{},
                                                     BinaryModel{}};
  return models;
}

inline std::map<std::string, double> acceptance_rates(std::span<const DecisionRecord> records) {
  std::map<std::string, std::pair<double, double>> acc;
  for (const auto& d : records) {
    acc[d.participant_id].first += d.z;
    acc[d.participant_id].second += 1.0;
  }
  std::map<std::string, double> out;
  for (const auto& [id, v] : acc) out[id] = v.first / v.second;
  return out;
}

/// replicates x trials decision matrix; Constant uses each participant's own b_bar.
inline std::vector<std::vector<int>> simulate_model_decisions(std::span<const DecisionRecord> records,
                                                              const AcceptanceModel& kind, int replicates = 100,
                                                              std::uint64_t seed = 0) {
  require(replicates >= 1, "replicates must be positive");
  const auto rates = acceptance_rates(records);
  std::vector<double> probs(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& d = records[i];
    AcceptanceModel m = kind;
    if (std::holds_alternative<ConstantModel>(m)) m = ConstantModel{rates.at(d.participant_id)};
    probs[i] = model_acceptance(m, d.r_mh, d.numerator, d.denominator).probability;
  }
  std::vector<std::vector<int>> out(replicates, std::vector<int>(records.size()));
  Rng rng = make_rng(seed);
  for (auto& rep : out)
    for (std::size_t i = 0; i < probs.size(); ++i) rep[i] = bernoulli(rng, probs[i]) ? 1 : 0;
  return out;
}

inline double precision(std::span<const int> human, std::span<const int> model) {
  require(human.size() == model.size(), "decision vectors must have equal length");
  require(!human.empty(), "decision vectors are empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < human.size(); ++i) hits += human[i] == model[i];
  return static_cast<double>(hits) / static_cast<double>(human.size());
}

// --- Mann-Whitney U ---------------------------------------------------------------------

enum class Alternative { greater, less, two_sided };
enum class UMethod { asymptotic, exact };

namespace detail {

inline std::vector<double> midranks(std::span<const double> pooled, double& tie_term) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

/// Null frequencies of U for sample sizes (n, m) without ties: coefficients
/// of the Gaussian binomial [n+m choose n]_q, normalized to probabilities.
inline std::vector<long double> exact_u_distribution(std::size_t n, std::size_t m) {
  // Product over i of (1 - q^(m+i)) / (1 - q^i); intermediate degrees reach n*m + m + n.
  std::vector<long double> poly(n * m + n + m + 1, 0.0L);
  poly[0] = 1.0L;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t up = m + i;
    for (std::size_t d = poly.size(); d-- > up;) poly[d] -= poly[d - up];
    for (std::size_t d = i; d < poly.size(); ++d) poly[d] += poly[d - i];
  }
  poly.resize(n * m + 1);
  long double total = 0.0L;
  for (auto v : poly) total += v;
  for (auto& v : poly) v /= total;
  return poly;
}

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

/// p-value of the Mann-Whitney U test for H1: x stochastically larger than y
/// (Alternative::greater). Asymptotic method uses midranks, tie correction
/// and a 0.5 continuity correction.
inline double mann_whitney_u(std::span<const double> x, std::span<const double> y,
                             Alternative alt = Alternative::greater, UMethod method = UMethod::asymptotic) {
  require(!x.empty() && !y.empty(), "U test needs non-empty samples");
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  double tie_term = 0.0;
  const auto ranks = detail::midranks(pooled, tie_term);
  const double rx = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(x.size()), 0.0);
  const double u = rx - nx * (nx + 1.0) / 2.0;

  if (method == UMethod::exact) {
    require(tie_term == 0.0, "exact U test requires untied samples");
    const auto dist = detail::exact_u_distribution(x.size(), y.size());
    const auto ui = static_cast<std::size_t>(std::llround(u));
    long double upper = 0.0L, lower = 0.0L;
    for (std::size_t k = ui; k < dist.size(); ++k) upper += dist[k];
    for (std::size_t k = 0; k <= ui; ++k) lower += dist[k];
    const double pu = std::min(1.0, static_cast<double>(upper)), pl = std::min(1.0, static_cast<double>(lower));
    if (alt == Alternative::greater) return pu;
    if (alt == Alternative::less) return pl;
    return std::min(1.0, 2.0 * std::min(pu, pl));
  }

  const double n = nx + ny;
  const double mean = nx * ny / 2.0;
  const double var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;
  const double sd = std::sqrt(var);
  switch (alt) {
    case Alternative::greater: return detail::normal_upper_tail((u - mean - 0.5) / sd);
    case Alternative::less: return detail::normal_upper_tail((mean - u - 0.5) / sd);
    case Alternative::two_sided: {
      const double zabs = (std::abs(u - mean) - 0.5) / sd;
      return std::min(1.0, 2.0 * detail::normal_upper_tail(zabs));
    }
  }
  return 1.0;
}

// --- Test 2 ---------------------------------------------------------------------------------

inline constexpr double kModelAlpha = 0.001;

struct ModelComparison {
  std::string participant_id;  // "All" for the pooled comparison
  std::size_t decisions = 0;
  std::array<std::vector<double>, 5> precision_samples;
  Eigen::Matrix<double, 5, 5> p_values;  // (m, m'): H1 Prec_m > Prec_m'; diagonal NaN
};

struct Test2Report {
  std::vector<ModelComparison> participants;
  ModelComparison pooled;
  Eigen::Matrix<int, 5, 5> rejection_counts = Eigen::Matrix<int, 5, 5>::Zero();  // participants with p < 0.001
};

inline ModelComparison compare_models(std::span<const DecisionRecord> records, std::string label, int replicates,
                                      std::uint64_t seed) {
  ModelComparison mc;
  mc.participant_id = std::move(label);
  mc.decisions = records.size();
  std::vector<int> human(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) human[i] = records[i].z;
  const auto& models = comparison_models();
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto sims = simulate_model_decisions(records, models[m], replicates, derive_seed(seed, m));
    for (const auto& s : sims) mc.precision_samples[m].push_back(precision(human, s));
  }
  for (int m = 0; m < 5; ++m)
    for (int mp = 0; mp < 5; ++mp)
      mc.p_values(m, mp) = m == mp ? std::numeric_limits<double>::quiet_NaN()
                                   : mann_whitney_u(mc.precision_samples[m], mc.precision_samples[mp]);
  return mc;
}

inline Test2Report pairwise_model_tests(std::span<const DecisionRecord> records, std::uint64_t seed = 0,
                                        int replicates = 100) {
  require(!records.empty(), "model comparison needs records");
  std::map<std::string, std::vector<DecisionRecord>> by_participant;
  for (const auto& d : records) by_participant[d.participant_id].push_back(d);
  Test2Report rep;
  std::vector<std::pair<std::string, std::vector<DecisionRecord>>> groups(by_participant.begin(), by_participant.end());
  rep.participants.resize(groups.size());
  parallel_for(groups.size(), [&](std::size_t i) {
    rep.participants[i] = compare_models(groups[i].second, groups[i].first, replicates, derive_seed(seed, i + 1));
  });
  for (const auto& p : rep.participants)
    for (int m = 0; m < 5; ++m)
      for (int mp = 0; mp < 5; ++mp)
        if (m != mp && p.p_values(m, mp) < kModelAlpha) rep.rejection_counts(m, mp) += 1;
  rep.pooled = compare_models(records, "All", replicates, derive_seed(seed, 0));
  return rep;
}

// --- reports ----------------------------------------------------------------------------------

inline Json to_json(const FitResult& f) {
  Json j;
  j["a"] = f.a;
  j["b"] = f.b;
  j["log_likelihood"] = f.log_likelihood;
  j["on_boundary"] = f.on_boundary;
  j["degenerate"] = f.degenerate;
  return j;
}

inline Json to_json(const Test1Report& t) {
  Json j;
  j["a_hat"] = t.a_hat;
  j["b_hat"] = t.b_hat;
  j["log_likelihood"] = t.log_likelihood;
  j["fit_on_boundary"] = t.fit_on_boundary;
  j["b_bar"] = t.b_bar;
  j["decisions"] = t.decisions;
  j["replicates"] = t.null_a_samples.size();
  j["p_a"] = t.p_a;
  j["p_b"] = t.p_b;
  j["p_a_display"] = format_p_value(t.p_a, t.null_a_samples.size());
  j["p_b_display"] = format_p_value(t.p_b, t.null_b_samples.size());
  j["reject_a"] = t.reject_a;
  j["reject_b"] = t.reject_b;
  j["null_a_samples"] = t.null_a_samples;
  j["null_b_samples"] = t.null_b_samples;
  j["warnings"] = t.warnings;
  return j;
}

inline Json to_json(const ModelComparison& mc) {
  Json j;
  j["participant_id"] = mc.participant_id;
  j["decisions"] = mc.decisions;
  const auto& models = comparison_models();
  Json prec;
  for (std::size_t m = 0; m < models.size(); ++m) prec[model_name(models[m])] = mc.precision_samples[m];
  j["precision_samples"] = prec;
  Json pm = Json::array();
  for (int m = 0; m < 5; ++m) {
    Json row = Json::array();
    for (int mp = 0; mp < 5; ++mp) row.push_back(m == mp ? Json() : Json(mc.p_values(m, mp)));
    pm.push_back(row);
  }
  j["p_values"] = pm;
  return j;
}

inline Json to_json(const Test2Report& t) {
  Json j;
  Json names = Json::array();
  for (const auto& m : comparison_models()) names.push_back(model_name(m));
  j["models"] = names;
  j["pooled"] = to_json(t.pooled);
  Json counts = Json::array();
  for (int m = 0; m < 5; ++m) {
    Json row = Json::array();
    for (int mp = 0; mp < 5; ++mp) row.push_back(t.rejection_counts(m, mp));
    counts.push_back(row);
  }
  j["rejection_counts"] = counts;
  Json parts = Json::array();
  for (const auto& p : t.participants) parts.push_back(to_json(p));
  j["participants"] = parts;
  return j;
}

struct AcceptanceBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t total = 0;
  std::size_t accepted = 0;
};

/// Acceptance counts per r_mh bin; the last bin is closed at 1.
inline std::vector<AcceptanceBin> acceptance_histogram(std::span<const DecisionRecord> records, int bins = 10) {
  require(bins >= 1, "need at least one bin");
  std::vector<AcceptanceBin> out(bins);
  for (int i = 0; i < bins; ++i) out[i] = {static_cast<double>(i) / bins, static_cast<double>(i + 1) / bins, 0, 0};
  for (const auto& d : records) {
    const int i = std::min(bins - 1, static_cast<int>(d.r_mh * bins));
    out[i].total += 1;
    out[i].accepted += static_cast<std::size_t>(d.z);
  }
  return out;
}

// --- result table -----------------------------------------------------------------------------

struct Test1Row {
  std::string participant_id;  // "All" for the pooled row
  Test1Report report;
};

/// Test 1 per participant plus the pooled "All" row, in participant order.
inline std::vector<Test1Row> test1_table(std::span<const DecisionRecord> records, int replicates, std::uint64_t seed) {
  require(!records.empty(), "no decisions");
  std::map<std::string, std::vector<DecisionRecord>> by_participant;
  for (const auto& d : records) by_participant[d.participant_id].push_back(d);
  std::vector<Test1Row> rows;
  std::size_t i = 1;
  for (const auto& [id, recs] : by_participant)
    rows.push_back({id, randomization_test(std::span<const DecisionRecord>(recs), replicates, derive_seed(seed, i++))});
  rows.push_back({"All", randomization_test(records, replicates, derive_seed(seed, 0))});
  return rows;
}

inline std::string test1_csv(const std::vector<Test1Row>& rows) {
  std::string out = "participant,decisions,b_bar,a,b,p_a,p_b,reject_a,reject_b\n";
  char buf[256];
  for (const auto& row : rows) {
    const auto& t = row.report;
    std::snprintf(buf, sizeof buf, ",%zu,%.4f,%.4f,%.4f,%s,%s,%d,%d\n", t.decisions, t.b_bar, t.a_hat, t.b_hat,
                  format_p_value(t.p_a, t.null_a_samples.size()).c_str(),
                  format_p_value(t.p_b, t.null_b_samples.size()).c_str(), t.reject_a ? 1 : 0, t.reject_b ? 1 : 0);
    out += row.participant_id + buf;
  }
  return out;
}

inline std::string histogram_csv(const std::vector<AcceptanceBin>& bins, const FitResult& fit) {
  std::string out = "r_lower,r_upper,total,accepted,acceptance_rate,fitted\n";
  char buf[256];
  for (const auto& b : bins) {
    const double mid = 0.5 * (b.lower + b.upper);
    const double rate = b.total ? static_cast<double>(b.accepted) / static_cast<double>(b.total) : 0.0;
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%zu,%zu,%.4f,%.4f\n", b.lower, b.upper, b.total, b.accepted, rate,
                  fit.a * mid + fit.b);
    out += buf;
  }
  return out;
}

}  // namespace mhng
