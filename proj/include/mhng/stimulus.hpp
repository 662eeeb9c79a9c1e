#pragma once

// Color-patch stimuli: three-component Gaussian mixtures in CIE-L*u*v*,
// conversion to sRGB for display, and the dataset manifest document.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mhng/common.hpp"

namespace mhng {

/// A point in CIE-L*u*v*. Stored unclamped; rendering clamps.
struct ColorPoint {
  double l = 0.0;
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector3d vec() const { return {l, u, v}; }
  static ColorPoint from(const Eigen::Vector3d& x) { return {x(0), x(1), x(2)}; }
  bool operator==(const ColorPoint&) const = default;
};

struct GaussianComponentSpec {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
};

using MixtureSpec = std::array<GaussianComponentSpec, 3>;

struct Stimulus {
  ColorPoint color;
  int component = 1;  // 1-based index of the generating component
  bool operator==(const Stimulus&) const = default;
};

struct StimulusSet {
  std::string id;
  std::uint64_t seed = 0;
  MixtureSpec spec{};
  std::vector<Stimulus> stimuli;

  std::size_t size() const { return stimuli.size(); }
  std::vector<Eigen::Vector3d> observations() const {
    std::vector<Eigen::Vector3d> xs;
    xs.reserve(stimuli.size());
    for (const auto& s : stimuli) xs.push_back(s.color.vec());
    return xs;
  }
};

inline constexpr std::size_t kDefaultStimulusCount = 15;

struct BuiltinDatasets {
  MixtureSpec hard;
  MixtureSpec easy;
};

/// Means and shared covariances of the two experimental datasets.
inline BuiltinDatasets builtin_dataset_specs() {
  const Eigen::Matrix3d hard_cov = Eigen::Vector3d(25.0, 81.0, 81.0).asDiagonal();
  const Eigen::Matrix3d easy_cov = Eigen::Vector3d(25.0, 100.0, 100.0).asDiagonal();
  BuiltinDatasets d;
  d.hard = {GaussianComponentSpec{{60.0, -10.0, 20.0}, hard_cov},
            GaussianComponentSpec{{60.0, -20.0, -10.0}, hard_cov},
            GaussianComponentSpec{{60.0, 20.0, 10.0}, hard_cov}};
  d.easy = {GaussianComponentSpec{{60.0, 30.0, 30.0}, easy_cov},
            GaussianComponentSpec{{60.0, 30.0, -30.0}, easy_cov},
            GaussianComponentSpec{{60.0, -30.0, -30.0}, easy_cov}};
  return d;
}

inline MixtureSpec builtin_spec(const std::string& name) {
  const auto d = builtin_dataset_specs();
  if (name == "hard") return d.hard;
  if (name == "easy") return d.easy;
  throw ValidationError("unknown dataset '" + name + "' (expected hard|easy)");
}

/// Throws ValidationError unless the covariance is symmetric positive-definite.
inline void validate_component(const GaussianComponentSpec& c) {
  require(c.mean.allFinite() && c.covariance.allFinite(), "component parameters must be finite");
  const double scale = std::max(1.0, c.covariance.cwiseAbs().maxCoeff());
  require((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c.covariance, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, "covariance must be positive-definite");
}

/// Draws `n` stimuli: uniform component choice, then a multivariate normal draw.
inline StimulusSet sample_stimuli(const MixtureSpec& spec, std::size_t n, std::uint64_t seed,
                                  std::string id = "custom") {
  require(n >= 1, "stimulus count must be at least 1");
  std::array<Eigen::Matrix3d, 3> chol;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    validate_component(spec[k]);
    chol[k] = spec[k].covariance.llt().matrixL();
  }
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  std::normal_distribution<double> normal;
  StimulusSet out{std::move(id), seed, spec, {}};
  out.stimuli.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = pick(rng);
    Eigen::Vector3d z;
    for (int d = 0; d < 3; ++d) z(d) = normal(rng);
    const Eigen::Vector3d x = spec[k].mean + chol[k] * z;
    out.stimuli.push_back({ColorPoint::from(x), k + 1});
  }
  return out;
}

struct WhitePoint {
  double x = 0.95047;
  double y = 1.0;
  double z = 1.08883;
};

inline constexpr WhitePoint kD65{};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

/// CIE-L*u*v* -> XYZ -> sRGB. Out-of-gamut channels are clamped to [0,1].
inline Rgb luv_to_srgb(const ColorPoint& p, const WhitePoint& white = kD65) {
  if (p.l <= 0.0) return {};
  constexpr double kappa = 24389.0 / 27.0;
  const double y = p.l > 8.0 ? white.y * std::pow((p.l + 16.0) / 116.0, 3.0) : white.y * p.l / kappa;
  const double denom = white.x + 15.0 * white.y + 3.0 * white.z;
  const double u0 = 4.0 * white.x / denom;
  const double v0 = 9.0 * white.y / denom;
  const double up = p.u / (13.0 * p.l) + u0;
  const double vp = p.v / (13.0 * p.l) + v0;
  double x = 0.0, z = 0.0;
  if (vp != 0.0) {
    x = y * 9.0 * up / (4.0 * vp);
    z = y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp);
  }
  const double lin[3] = {
      3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
      -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
      0.0556434 * x - 0.2040259 * y + 1.0572252 * z,
  };
  auto encode = [](double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
  };
  return {std::clamp(encode(lin[0]), 0.0, 1.0), std::clamp(encode(lin[1]), 0.0, 1.0),
          std::clamp(encode(lin[2]), 0.0, 1.0)};
}

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::array<std::uint8_t, 3> at(int x, int y) const {
    const auto i = static_cast<std::size_t>((y * width + x) * 3);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  bool operator==(const Image&) const = default;
};

struct PatchStyle {
  std::array<std::uint8_t, 3> background{128, 128, 128};
  double radius_fraction = 0.4;  // of the image side
};

inline constexpr int kDefaultPatchSize = 128;

inline std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

/// A filled circle of the stimulus color centered on a neutral background.
inline Image render_patch(const ColorPoint& p, int size_px = kDefaultPatchSize,
                          const PatchStyle& style = {}) {
  require(size_px >= 16, "patch size must be at least 16 px");
  const Rgb c = luv_to_srgb(p);
  const std::array<std::uint8_t, 3> fill{to_byte(c.r), to_byte(c.g), to_byte(c.b)};
  Image img{size_px, size_px, std::vector<std::uint8_t>(static_cast<std::size_t>(size_px * size_px * 3))};
  const double center = (size_px - 1) / 2.0;
  const double radius = style.radius_fraction * size_px;
  for (int y = 0; y < size_px; ++y) {
    for (int x = 0; x < size_px; ++x) {
      const double dx = x - center, dy = y - center;
      const bool inside = dx * dx + dy * dy <= radius * radius;
      const auto& px = inside ? fill : style.background;
      std::copy(px.begin(), px.end(), img.pixels.begin() + (y * size_px + x) * 3);
    }
  }
  return img;
}

// --- manifest document ----------------------------------------------------

inline constexpr const char* kManifestSchema = "mhng.manifest/1";

inline nlohmann::ordered_json to_json(const StimulusSet& set) {
  nlohmann::ordered_json j;
  j["schema"] = kManifestSchema;
  j["id"] = set.id;
  j["seed"] = set.seed;
  auto comps = nlohmann::ordered_json::array();
  for (const auto& c : set.spec) {
    nlohmann::ordered_json cj;
    cj["mean"] = {c.mean(0), c.mean(1), c.mean(2)};
    auto cov = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) cov.push_back({c.covariance(r, 0), c.covariance(r, 1), c.covariance(r, 2)});
    cj["covariance"] = cov;
    comps.push_back(cj);
  }
  j["components"] = comps;
  auto stims = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < set.stimuli.size(); ++i) {
    const auto& s = set.stimuli[i];
    nlohmann::ordered_json sj;
    sj["index"] = i;
    sj["l"] = s.color.l;
    sj["u"] = s.color.u;
    sj["v"] = s.color.v;
    sj["component"] = s.component;
    stims.push_back(sj);
  }
  j["stimuli"] = stims;
  return j;
}

template <class Json>
StimulusSet stimulus_set_from_json(const Json& j) {
  try {
    require(j.at("schema").template get<std::string>() == kManifestSchema, "unsupported manifest schema");
    StimulusSet set;
    set.id = j.at("id").template get<std::string>();
    set.seed = j.at("seed").template get<std::uint64_t>();
    const auto& comps = j.at("components");
    require(comps.size() == 3, "manifest must list three components");
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& m = comps[k].at("mean");
      const auto& c = comps[k].at("covariance");
      for (int d = 0; d < 3; ++d) {
        set.spec[k].mean(d) = m.at(d).template get<double>();
        for (int e = 0; e < 3; ++e) set.spec[k].covariance(d, e) = c.at(d).at(e).template get<double>();
      }
    }
    for (const auto& sj : j.at("stimuli")) {
      Stimulus s;
      s.color = {sj.at("l").template get<double>(), sj.at("u").template get<double>(),
                 sj.at("v").template get<double>()};
      s.component = sj.at("component").template get<int>();
      require(s.component >= 1 && s.component <= 3, "component index out of range");
      set.stimuli.push_back(s);
    }
    require(!set.stimuli.empty(), "manifest lists no stimuli");
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

inline void write_manifest(const std::string& path, const StimulusSet& set) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(set).dump(2) << '\n';
}

inline StimulusSet read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return stimulus_set_from_json(nlohmann::ordered_json::parse(in));
}

}  // namespace mhng
