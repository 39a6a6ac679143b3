#include <doctest.h>

#include "mdctcodec/discriminator.hpp"
#include "mdctcodec/error.hpp"
#include "support.hpp"

using namespace mdctcodec;
using testing_support::random_tensor;

namespace {

DiscConfig narrow() {
  DiscConfig c;
  c.channels = 4;
  return c;
}

}  // namespace

TEST_CASE("three finite score maps with five features each") {
  std::mt19937_64 rng(1);
  MdctDiscriminator<double> d(narrow(), rng);
  const auto x = random_tensor({2, 1600}, rng, 0.3, false);
  const auto out = d.forward(x);
  REQUIRE(out.size() == 3);
  for (const auto& o : out) {
    CHECK(o.features.size() == 5);
    CHECK(o.score.extent(1) == 1);
    for (double v : o.score.values()) CHECK(std::isfinite(v));
  }
  CHECK(d.forward(x)[2].score.values() == out[2].score.values());
}

TEST_CASE("time extents per resolution") {
  std::mt19937_64 rng(2);
  MdctDiscriminator<float> d(narrow(), rng);
  NoGradGuard guard;
  const auto out = d.forward(Tensor<float>::zeros({1, 48000}));
  CHECK(out[0].features[0].extent(2) == 240);
  CHECK(out[1].features[0].extent(2) == 960);
  CHECK(out[2].features[0].extent(2) == 2400);
  CHECK(out[0].features[0].extent(3) == 200);
  CHECK(out[0].score.extent(2) < out[1].score.extent(2));
  CHECK(out[1].score.extent(2) < out[2].score.extent(2));
}

TEST_CASE("gradient reaches the waveform") {
  std::mt19937_64 rng(3);
  MdctDiscriminator<double> d(narrow(), rng);
  auto x = random_tensor({1, 800}, rng, 0.3);
  Tensor<double> total;
  for (const auto& o : d.forward(x)) total = total.defined() ? add(total, mean(o.score)) : mean(o.score);
  total.backward();
  double m = 0;
  for (double g : x.grad()) m = std::max(m, std::abs(g));
  CHECK(m > 0.0);
}

TEST_CASE("sub-discriminator passes finite differences") {
  std::mt19937_64 rng(4);
  DiscConfig cfg = narrow();
  cfg.channels = 2;
  SubDiscriminator<double> sub(20, cfg, rng);
  auto x = random_tensor({1, 160}, rng, 0.5);
  const auto f = [&sub](const std::vector<Tensor<double>>& v) {
    const auto o = sub.forward(v[0]);
    return add(testing_support::project(o.score), testing_support::project(o.features[2], 5));
  };
  CHECK(testing_support::gradient_error(f, {x}, 1e-6, 40) < 1e-4);
}

TEST_CASE("too-short input is a contract error") {
  std::mt19937_64 rng(5);
  MdctDiscriminator<double> d(narrow(), rng);
  CHECK_THROWS_AS(d.forward(Tensor<double>::zeros({1, 100})), Error);
}
