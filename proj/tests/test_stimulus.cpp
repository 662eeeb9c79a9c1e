#include <catch_amalgamated.hpp>

#include <filesystem>

#include "mhng/png.hpp"
#include "mhng/stimulus.hpp"

using namespace mhng;
using Catch::Approx;

TEST_CASE("built-in datasets carry the experimental means and covariances") {
  const auto d = builtin_dataset_specs();
  CHECK(d.hard[0].mean == Eigen::Vector3d(60, -10, 20));
  CHECK(d.hard[1].mean == Eigen::Vector3d(60, -20, -10));
  CHECK(d.hard[2].mean == Eigen::Vector3d(60, 20, 10));
  CHECK(d.easy[0].mean == Eigen::Vector3d(60, 30, 30));
  CHECK(d.easy[1].mean == Eigen::Vector3d(60, 30, -30));
  CHECK(d.easy[2].mean == Eigen::Vector3d(60, -30, -30));
  for (const auto& c : d.hard) CHECK(c.covariance.diagonal() == Eigen::Vector3d(25, 81, 81));
  for (const auto& c : d.easy) CHECK(c.covariance.diagonal() == Eigen::Vector3d(25, 100, 100));
  CHECK_THROWS_AS(builtin_spec("medium"), ValidationError);
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto a = sample_stimuli(builtin_spec("hard"), 15, 7, "hard");
  const auto b = sample_stimuli(builtin_spec("hard"), 15, 7, "hard");
  const auto c = sample_stimuli(builtin_spec("hard"), 15, 8, "hard");
  REQUIRE(a.size() == 15);
  CHECK(a.stimuli == b.stimuli);
  CHECK_FALSE(a.stimuli == c.stimuli);
  for (const auto& s : a.stimuli) CHECK((s.component >= 1 && s.component <= 3));
}

TEST_CASE("invalid sampling requests are rejected") {
  CHECK_THROWS_AS(sample_stimuli(builtin_spec("easy"), 0, 1), ValidationError);
  auto spec = builtin_spec("easy");
  spec[1].covariance(0, 0) = -1.0;
  CHECK_THROWS_AS(sample_stimuli(spec, 5, 1), ValidationError);
  spec = builtin_spec("easy");
  spec[2].covariance(0, 1) = 3.0;  // asymmetric
  CHECK_THROWS_AS(sample_stimuli(spec, 5, 1), ValidationError);
}

TEST_CASE("sample moments approach the component parameters") {
  const auto set = sample_stimuli(builtin_spec("easy"), 6000, 3, "easy");
  std::array<Eigen::Vector3d, 3> sum{};
  std::array<int, 3> n{};
  for (auto& s : sum) s.setZero();
  for (const auto& s : set.stimuli) {
    sum[s.component - 1] += s.color.vec();
    ++n[s.component - 1];
  }
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d mean = sum[k] / n[k];
    const Eigen::Vector3d sd = builtin_spec("easy")[k].covariance.diagonal().cwiseSqrt();
    for (int d = 0; d < 3; ++d) CHECK(std::abs(mean(d) - builtin_spec("easy")[k].mean(d)) < 4.0 * sd(d) / std::sqrt(n[k]));
  }
}

// Reference sRGB values from scikit-image luv2rgb (D65, 2 degree observer).
TEST_CASE("Luv to sRGB matches an independent converter") {
  struct Case {
    ColorPoint p;
    double r, g, b;
  };
  const Case cases[] = {
      {{60, -10, 20}, 0.5112889703310604, 0.5901148490319882, 0.47471433593779994},
      {{60, 30, -30}, 0.7187963834467376, 0.49424988628165706, 0.6856138490648046},
      {{50, 0, 0}, 0.4663282336420464, 0.4663243477360151, 0.46634423289776333},
      {{90, 80, 10}, 1.0, 0.754883747577685, 0.7984914982037719},
  };
  for (const auto& c : cases) {
    const auto rgb = luv_to_srgb(c.p);
    CHECK(rgb.r == Approx(c.r).margin(1e-3));
    CHECK(rgb.g == Approx(c.g).margin(1e-3));
    CHECK(rgb.b == Approx(c.b).margin(1e-3));
  }
  const auto black = luv_to_srgb({0, 10, 10});
  CHECK((black.r == 0.0 && black.g == 0.0 && black.b == 0.0));
}

TEST_CASE("patches are a stimulus-colored disc on gray") {
  const ColorPoint p{60, 30, 30};
  const auto img = render_patch(p, 64);
  REQUIRE(img.width == 64);
  REQUIRE(img.pixels.size() == 64u * 64u * 3u);
  const auto rgb = luv_to_srgb(p);
  const auto centre = img.at(32, 32);
  CHECK(centre[0] == to_byte(rgb.r));
  CHECK(centre[1] == to_byte(rgb.g));
  CHECK(centre[2] == to_byte(rgb.b));
  CHECK(img.at(0, 0) == std::array<std::uint8_t, 3>{128, 128, 128});
  CHECK(render_patch(p, 64) == img);
  CHECK_THROWS_AS(render_patch(p, 8), ValidationError);
}

TEST_CASE("PNG encoding produces a valid header") {
  const auto bytes = encode_png(render_patch({60, -10, 20}, 32));
  REQUIRE(bytes.size() > 33);
  const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  CHECK(std::equal(std::begin(sig), std::end(sig), bytes.begin()));
  // IHDR width and height, big-endian
  CHECK(bytes[19] == 32);
  CHECK(bytes[23] == 32);
  CHECK(patch_filename("hard", 3) == "hard_3.png");
}

TEST_CASE("manifests round-trip through JSON and disk") {
  const auto set = sample_stimuli(builtin_spec("hard"), 15, 11, "hard");
  const auto back = stimulus_set_from_json(to_json(set));
  CHECK(back.id == "hard");
  CHECK(back.seed == 11);
  CHECK(back.stimuli == set.stimuli);
  const auto path = (std::filesystem::temp_directory_path() / "mhng_manifest_test.json").string();
  write_manifest(path, set);
  CHECK(read_manifest(path).stimuli == set.stimuli);
  std::filesystem::remove(path);

  auto bad = to_json(set);
  bad["schema"] = "other/1";
  CHECK_THROWS_AS(stimulus_set_from_json(bad), ValidationError);
  auto missing = to_json(set);
  missing.erase("stimuli");
  CHECK_THROWS_AS(stimulus_set_from_json(missing), ValidationError);
}
