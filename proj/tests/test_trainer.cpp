#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "mdctcodec/checkpoint.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/trainer.hpp"

using namespace mdctcodec;
using testing_support::sine_corpus;
using testing_support::tiny_config;

namespace {

std::vector<std::vector<double>> snapshot(const NamedTensors<double>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, p] : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

NamedTensors<double> disc_params(Trainer<double>& t) {
  NamedTensors<double> p;
  t.discriminator().collect("disc", p);
  return p;
}

}  // namespace

TEST_CASE("generator pass shapes at the tiny config") {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(0);
  Generator<double> g(cfg, rng);
  const auto w = testing_support::sine_mixture(3200, 1);
  const Tensor<double> x({1, 3200}, w.samples);
  const auto p = run_generator(g, x);
  CHECK(p.spectrum.shape() == Shape{1, 80, 40});
  CHECK(p.code.shape() == Shape{1, 10, 8});
  CHECK(p.quantized.tokens.size() == 20);
  CHECK(p.decoded.shape() == Shape{1, 80, 40});
  CHECK(p.waveform.shape() == Shape{1, 3200});
}

TEST_CASE("fixed seed runs are bit identical") {
  const auto cfg = tiny_config();
  const auto corpus = sine_corpus(4, 6000, 3);
  Trainer<double> a(cfg, &corpus), b(cfg, &corpus);
  for (int i = 0; i < 3; ++i) {
    const auto ma = a.step(), mb = b.step();
    CHECK(ma.same_losses(mb));
    CHECK(ma.to_line().substr(0, ma.to_line().find(" seconds=")) ==
          mb.to_line().substr(0, mb.to_line().find(" seconds=")));
  }
  CHECK(a.save_bytes() == b.save_bytes());
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
  const auto cfg = tiny_config();
  const auto corpus = sine_corpus(3, 7000, 5);
  Trainer<double> straight(cfg, &corpus);
  straight.step();
  straight.step();
  const auto saved = straight.save_bytes();
  const auto m3 = straight.step();
  const auto m4 = straight.step();

  Trainer<double> resumed(cfg, &corpus);
  resumed.load_bytes(saved);
  CHECK(resumed.steps_done() == 2);
  CHECK(resumed.step().same_losses(m3));
  CHECK(resumed.step().same_losses(m4));
  CHECK(resumed.save_bytes() == straight.save_bytes());
}

TEST_CASE("checkpoints are byte deterministic and guarded") {
  auto cfg = tiny_config();
  const auto corpus = sine_corpus(2, 4000, 8);
  Trainer<double> t(cfg, &corpus);
  t.step();
  const auto bytes = t.save_bytes();
  CHECK(bytes == t.save_bytes());

  auto other = cfg;
  other.set("lambda_mel", "1");
  Trainer<double> wrong(other, &corpus);
  try {
    wrong.load_bytes(bytes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFingerprintMismatch);
  }
  CHECK_NOTHROW(wrong.load_bytes(bytes, true));
  CHECK(wrong.steps_done() == 1);

  auto tampered = bytes;
  tampered[tampered.size() / 2] ^= 0x10;
  try {
    Trainer<double>(cfg, &corpus).load_bytes(tampered);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIntegrity);
  }
  CHECK_THROWS_AS(Trainer<float>(cfg, &corpus).load_bytes(bytes), Error);
}

TEST_CASE("checkpoint container keeps every entry kind") {
  Checkpoint c;
  c.dtype = 'f';
  c.config_text = "a=1\n";
  c.fingerprint[3] = 7;
  const std::uint64_t u[] = {1, 2, std::numeric_limits<std::uint64_t>::max()};
  c.put_u64("u", u);
  c.put_string("s", std::string("x\0y", 3));
  const float f[] = {1.5f, -2.f};
  c.put_values<float>("f", {2, 1}, f);
  const auto back = Checkpoint::deserialize(c.serialize());
  CHECK(back.config_text == "a=1\n");
  CHECK(back.fingerprint == c.fingerprint);
  CHECK(back.get_u64("u") == std::vector<std::uint64_t>(std::begin(u), std::end(u)));
  CHECK(back.get_string("s") == std::string("x\0y", 3));
  float out[2];
  back.get_values<float>("f", out);
  CHECK(out[1] == -2.f);
  CHECK(back.at("f").shape == std::vector<std::uint64_t>{2, 1});
  CHECK_THROWS_AS(back.at("missing"), Error);
  double wrong_type[2];
  CHECK_THROWS_AS(back.get_values<double>("f", wrong_type), Error);
}

TEST_CASE("all-zero loss weights leave every parameter unchanged") {
  auto cfg = tiny_config();
  for (const char* k : {"lambda_adv", "lambda_fm", "lambda_mdct", "lambda_mel", "lambda_cb", "lambda_com"})
    cfg.set(k, "0");
  const auto corpus = sine_corpus(2, 4000, 1);
  Trainer<double> t(cfg, &corpus);
  t.step();  // codebook initialization happens here
  const auto g0 = snapshot(t.generator().parameters());
  const auto d0 = snapshot(disc_params(t));
  const auto m = t.step();
  CHECK(m.loss_g == 0.0);
  CHECK(m.loss_d == 0.0);
  CHECK(snapshot(t.generator().parameters()) == g0);
  CHECK(snapshot(disc_params(t)) == d0);
}

TEST_CASE("alternating updates touch both networks") {
  const auto cfg = tiny_config();
  const auto corpus = sine_corpus(2, 4000, 2);
  Trainer<double> t(cfg, &corpus);
  const auto d0 = snapshot(disc_params(t));
  const auto m = t.step();
  CHECK(m.loss_d > 0.0);
  CHECK(std::isfinite(m.loss_g));
  CHECK(snapshot(disc_params(t)) != d0);
  for (const auto& [name, p] : disc_params(t)) CHECK(p.requires_grad());
}

TEST_CASE("without adversarial terms the discriminator is never updated") {
  auto cfg = tiny_config();
  cfg.set("lambda_adv", "0");
  cfg.set("lambda_fm", "0");
  const auto corpus = sine_corpus(2, 4000, 2);
  Trainer<double> t(cfg, &corpus);
  const auto d0 = snapshot(disc_params(t));
  const auto g_before = snapshot(t.generator().parameters());
  const auto m = t.step();
  CHECK(m.loss_d == 0.0);
  CHECK(m.adv_g == 0.0);
  CHECK(snapshot(disc_params(t)) == d0);
  CHECK(snapshot(t.generator().parameters()) != g_before);
}

TEST_CASE("generator loss leaves no gradient on a frozen discriminator") {
  const auto cfg = tiny_config();
  const auto corpus = sine_corpus(2, 4000, 2);
  Trainer<double> t(cfg, &corpus);
  t.step();
  auto& d = t.discriminator_optimizer();
  d.zero_grad();
  d.set_requires_grad(false);
  const auto w = testing_support::sine_mixture(3200, 4);
  const Tensor<double> x({1, 3200}, w.samples);
  const auto pass = run_generator(t.generator(), x);
  const auto parts = generator_losses(t.generator(), t.discriminator(), pass, x, cfg.loss);
  total_generator_loss(parts, cfg.loss).backward();
  d.set_requires_grad(true);
  for (const auto& [name, p] : d.params()) CHECK_FALSE(p.has_grad());
  CHECK(t.generator().encoder.conv_in.weight.has_grad());
}

TEST_CASE("a non-finite loss aborts the step with a diverged error") {
  const auto cfg = tiny_config();
  const auto corpus = sine_corpus(2, 4000, 6);
  Trainer<double> t(cfg, &corpus);
  t.step();
  const auto before = t.save_bytes();
  Batch b;
  b.batch_size = 2;
  b.segment = cfg.effective_segment();
  b.samples.assign(b.batch_size * b.segment, 0.1);
  b.samples[17] = std::numeric_limits<double>::quiet_NaN();
  try {
    t.train_step(b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDiverged);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
  CHECK(t.save_bytes() == before);
}

TEST_CASE("metrics line carries every component") {
  StepMetrics m;
  m.step = 3;
  m.mel = 0.5;
  const auto line = m.to_line();
  for (const char* k : {"step=3", "epoch=", "lr=", "loss_g=", "adv_g=", "fm=", "mdct=", "mel=0.5", "cb=",
                        "com=", "loss_d=", "revived=", "seconds="})
    CHECK_MESSAGE(line.find(k) != std::string::npos, k);
}

TEST_CASE("corpus at another rate is rejected") {
  auto corpus = sine_corpus(1, 4000, 1);
  corpus.sample_rate = 16000;
  try {
    Trainer<double> t(tiny_config(), &corpus);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRateMismatch);
  }
}
