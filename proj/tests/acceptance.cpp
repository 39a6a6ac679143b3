// Acceptance run: one PASS/FAIL line per criterion on stdout.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mdctcodec/bitstream.hpp"
#include "mdctcodec/cli.hpp"
#include "mdctcodec/codec.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/trainer.hpp"
#include "mdctcodec/transform.hpp"
#include "mdctcodec/wav.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mdctcodec;
using testing_support::gradient_error;
using testing_support::project;
using testing_support::random_tensor;
using testing_support::relative_error;
using TD = Tensor<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------

Outcome perfect_reconstruction() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> len(40, 48000);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto cfg = MdctConfig::with_bins(40);
  double worst = 0.0;
  std::size_t bad_length = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Waveform x;
    x.samples.resize(len(rng));
    for (double& v : x.samples) v = u(rng);
    const auto y = imdct(mdct(x, cfg));
    const std::size_t T = x.samples.size();
    if (y.samples.size() < T) {
      ++bad_length;
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 20; i + 20 < T; ++i) err = std::max(err, std::abs(y.samples[i] - x.samples[i]));
    worst = std::max(worst, err / (1.0 + max_abs(x.samples)));
  }
  const double secs = since(t0);
  return {worst < 1e-6 && bad_length == 0 && secs < 10.0,
          fmt("worst_scaled_err=%.3g short_outputs=%zu seconds=%.2f", worst, bad_length, secs)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t K : {2u, 4u, 8u}) {
    const auto cfg = MdctConfig::with_bins(K);
    for (std::size_t N = 1; N <= 8; ++N) {
      Waveform x;
      x.samples.resize(N * K);
      for (double& v : x.samples) v = u(rng);
      const auto fast = mdct(x, cfg);
      const auto slow = oracle::mdct(x.samples, K);
      worst = std::max(worst, relative_error(fast.values.values, slow.values));

      Matrix Y(N, K);
      for (double& v : Y.values) v = u(rng);
      const auto y_fast = imdct(MdctSpectrum{Y, cfg, 48000});
      const auto y_slow = oracle::imdct(Y);
      worst = std::max(worst, relative_error(y_fast.samples, y_slow));
    }
  }
  return {worst < 1e-9, fmt("worst_relative_err=%.3g cases=48", worst)};
}

Outcome princen_bradley() {
  double worst = 0.0;
  for (std::size_t K : {20u, 40u, 50u, 200u}) {
    const auto w = make_window(K);
    for (std::size_t l = 0; l < K; ++l) worst = std::max(worst, std::abs(w[l] * w[l] + w[l + K] * w[l + K] - 1.0));
  }
  return {worst < 1e-12, fmt("worst_deviation=%.3g", worst)};
}

Outcome bitrate() {
  bool ok = true;
  std::string d;
  for (std::size_t q : {4u, 6u, 8u}) {
    const double b = bitrate_bps(48000, 40, 8, q, 1024);
    CodecConfig c;
    c.rvq.num_quantizers = q;
    ok = ok && b == 1500.0 * q && c.bitrate() == b;
    d += fmt("Q%zu=%.17g ", q, b);
  }
  CodecConfig c;
  const NeuralCodec<double> codec(c);
  const auto x = testing_support::sine_mixture(48000, 3);
  const auto enc = codec.encode(x);
  const auto s = unpack(enc.bytes);
  const bool payload = s.header.payload_bytes() == 750 && enc.payload_bits == 6000 &&
                       enc.bytes.size() == kStreamHeaderBytes + 750 + kStreamTrailerBytes;
  d += fmt("one_second_payload_bytes=%zu", s.header.payload_bytes());
  return {ok && payload, d};
}

// --- gradients -------------------------------------------------------------

struct GradCase {
  std::string name;
  double error;
  double tolerance;
};

// Keeps inputs away from kinks so central differences are meaningful.
TD away_from(TD t, double at, double gap) {
  for (double& v : t.data()) v = at + (v >= at ? 1.0 : -1.0) * (std::abs(v - at) + gap);
  return t;
}

TD positive(TD t, double gap = 0.5) {
  for (double& v : t.data()) v = std::abs(v) + gap;
  return t;
}

void randomize(const NamedTensors<double>& params, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (const auto& [name, p] : params) {
    TD t = p;
    for (double& v : t.data()) v += n(rng);
  }
}

std::vector<TD> handles(const NamedTensors<double>& params) {
  std::vector<TD> out;
  for (const auto& [name, p] : params) out.push_back(p);
  return out;
}

std::vector<GradCase> op_gradients() {
  std::mt19937_64 rng(201);
  std::vector<GradCase> cases;
  const double tol = 1e-4, tol_lin = 1e-6;
  auto add_case = [&](std::string name, const testing_support::Fn& f, std::vector<TD> in, double t,
                      std::size_t probes = 0) {
    cases.push_back({std::move(name), gradient_error(f, std::move(in), 1e-6, probes), t});
  };
  auto r = [&](Shape s, double scale = 1.0) { return random_tensor(std::move(s), rng, scale); };

  add_case("add", [](auto& v) { return project(add(v[0], v[1])); }, {r({3, 4}), r({4})}, tol);
  add_case("sub", [](auto& v) { return project(sub(v[0], v[1])); }, {r({3, 4}), r({3, 1})}, tol);
  add_case("mul", [](auto& v) { return project(mul(v[0], v[1])); }, {r({2, 3, 4}), r({3, 4})}, tol);
  add_case("div", [](auto& v) { return project(div(v[0], v[1])); }, {r({3, 4}), positive(r({4}))}, tol);
  add_case("scalars", [](auto& v) { return project(rsub_scalar(2.0, mul_scalar(add_scalar(v[0], 0.5), 3.0))); },
           {r({5})}, tol);
  add_case("neg_square", [](auto& v) { return project(square(neg(v[0]))); }, {r({6})}, tol);
  add_case("abs", [](auto& v) { return project(abs(v[0])); }, {away_from(r({6}), 0.0, 0.1)}, tol);
  add_case("sqrt", [](auto& v) { return project(sqrt(v[0])); }, {positive(r({6}))}, tol);
  add_case("log", [](auto& v) { return project(log(v[0])); }, {positive(r({6}))}, tol);
  add_case("maximum", [](auto& v) { return project(maximum(v[0], 0.2)); }, {away_from(r({8}), 0.2, 0.1)}, tol);
  add_case("relu", [](auto& v) { return project(relu(v[0])); }, {away_from(r({8}), 0.0, 0.1)}, tol);
  add_case("log_clamped", [](auto& v) { return project(log_clamped(v[0], 0.3)); },
           {away_from(positive(r({8}), 0.0), 0.3, 0.1)}, tol);
  add_case("gelu", [](auto& v) { return project(gelu(v[0])); }, {r({8}, 2.0)}, tol);
  add_case("leaky_relu", [](auto& v) { return project(leaky_relu(v[0], 0.1)); }, {away_from(r({8}), 0.0, 0.1)}, tol);
  add_case("sum_mean", [](auto& v) { return add(sum(square(v[0])), mean(square(v[0]))); }, {r({3, 4})}, tol);
  add_case("axis_reductions", [](auto& v) { return add(project(sum(v[0], 1, true)), project(mean(v[0], 0, false))); },
           {r({2, 3, 4})}, tol);
  add_case("reshape_transpose", [](auto& v) { return project(transpose(reshape(v[0], {4, 6}), 0, 1)); },
           {r({2, 3, 4})}, tol);
  add_case("matmul", [](auto& v) { return project(matmul(v[0], v[1])); }, {r({3, 4}), r({4, 5})}, tol_lin);
  add_case("matmul_batched", [](auto& v) { return project(matmul(v[0], v[1])); }, {r({2, 3, 4}), r({2, 4, 2})},
           tol_lin);
  add_case("linear", [](auto& v) { return project(linear(v[0], v[1], v[2])); }, {r({2, 3, 4}), r({5, 4}), r({5})},
           tol_lin);
  add_case("layer_norm", [](auto& v) { return project(layer_norm(v[0], v[1], v[2], 1e-6)); },
           {r({3, 6}), r({6}), r({6})}, tol);
  add_case("gather_rows",
           [](auto& v) {
             const std::size_t idx[] = {2, 0, 2, 1};
             return project(gather_rows(v[0], std::span<const std::size_t>(idx)));
           },
           {r({3, 4})}, tol);

  Conv1dGeometry strided;
  strided.stride = 2;
  strided.dilation = 2;
  strided.pad_left = 2;
  strided.pad_right = 3;
  strided.groups = 2;
  add_case("conv1d", [strided](auto& v) { return project(conv1d(v[0], v[1], v[2], strided)); },
           {r({2, 4, 11}), r({6, 2, 3}), r({6})}, tol);
  const auto up = same_padding_1d(12, 4, 2);
  add_case("conv_transpose1d", [up](auto& v) { return project(conv_transpose1d(v[0], v[1], v[2], up, 12)); },
           {r({2, 3, 6}), r({3, 2, 4}), r({2})}, tol);
  const auto g2 = same_padding_2d(7, 6, 3, 3, 2, 1);
  add_case("conv2d", [g2](auto& v) { return project(conv2d(v[0], v[1], v[2], g2)); },
           {r({1, 2, 7, 6}), r({3, 2, 3, 3}), r({3})}, tol);
  add_case("frame_signal", [](auto& v) { return project(frame_signal(v[0], 6, 3, 2, 5)); }, {r({2, 13})}, tol);
  add_case("overlap_add", [](auto& v) { return project(overlap_add(v[0], 3, 2, 13)); }, {r({2, 5, 6})}, tol);
  add_case("rfft_magnitude", [](auto& v) { return project(rfft_magnitude(v[0])); }, {r({2, 3, 16})}, tol);

  // Layers, with every branch live.
  {
    Conv1dSpec s;
    s.in_channels = s.out_channels = s.groups = 4;
    s.kernel_size = 7;
    Conv1d<double> dw(s, rng);
    const auto x = r({2, 4, 9});
    add_case("Conv1d_depthwise", [dw](auto& v) { return project(dw.forward(v[0])); }, {x, dw.weight, dw.bias}, tol);

    Conv1dSpec u;
    u.in_channels = 4;
    u.out_channels = 3;
    u.kernel_size = 16;
    u.stride = 8;
    ConvTranspose1d<double> ct(u, rng);
    add_case("ConvTranspose1d", [ct](auto& v) { return project(ct.forward(v[0])); },
             {r({1, 4, 3}), ct.weight, ct.bias}, tol);

    Conv2dSpec c2{2, 3, 5, 3, 2, 2};
    Conv2d<double> cv(c2, rng);
    add_case("Conv2d", [cv](auto& v) { return project(cv.forward(v[0])); }, {r({1, 2, 9, 7}), cv.weight, cv.bias},
             tol);

    Linear<double> lin(4, 5, rng);
    add_case("Linear", [lin](auto& v) { return project(lin.forward(v[0])); }, {r({3, 4}), lin.weight, lin.bias},
             tol_lin);

    LayerNorm<double> ln(5);
    NamedTensors<double> lp;
    ln.collect("ln", lp);
    randomize(lp, rng, 0.3);
    add_case("LayerNorm", [ln](auto& v) { return project(ln.forward(v[0])); }, {r({2, 3, 5}), ln.gamma, ln.beta},
             tol);

    Grn<double> grn(5);
    NamedTensors<double> gp;
    grn.collect("grn", gp);
    randomize(gp, rng, 0.5);
    add_case("GRN", [grn](auto& v) { return project(grn.forward(v[0])); }, {r({2, 4, 5}), grn.gamma, grn.beta}, tol);

    ConvNextBlock<double> block(6, 12, 7, rng);
    NamedTensors<double> bp;
    block.collect("block", bp);
    randomize(bp, rng, 0.2);
    auto in = handles(bp);
    in.insert(in.begin(), r({2, 9, 6}));
    add_case("ConvNeXt_block", [block](auto& v) { return project(block.forward(v[0])); }, in, tol);
  }
  {
    ModelConfig m;
    m.spectrum_bins = 8;
    m.hidden_width = 8;
    m.block_intermediate = 16;
    m.num_blocks = 1;
    m.latent_dim = 4;
    m.downsample_rate = 2;
    Encoder<double> enc(m, rng);
    Decoder<double> dec(m, rng);
    NamedTensors<double> ep, dp;
    enc.collect("encoder", ep);
    dec.collect("decoder", dp);
    randomize(ep, rng, 0.2);
    randomize(dp, rng, 0.2);
    auto in = handles(ep);
    in.insert(in.begin(), r({1, 8, 8}));
    add_case("Encoder", [enc](auto& v) { return project(enc.forward(v[0])); }, in, tol, 6);
    in = handles(dp);
    in.insert(in.begin(), r({1, 4, 4}));
    add_case("Decoder", [dec](auto& v) { return project(dec.forward(v[0])); }, in, tol, 6);
  }
  {
    const MdctOp<double> op(MdctConfig::with_bins(8));
    add_case("MDCT_analysis", [op](auto& v) { return project(op.analysis(v[0])); }, {r({2, 37})}, tol);
    add_case("MDCT_synthesis", [op](auto& v) { return project(op.synthesis(v[0])); }, {r({2, 5, 8})}, tol);
    MelConfig mc;
    mc.sample_rate = 8000;
    mc.fft_size = 64;
    mc.hop = 8;
    mc.mel_bins = 10;
    mc.f_max = 4000;
    const MelOp<double> mel(mc);
    add_case("log_mel", [mel](auto& v) { return project(mel(v[0])); }, {r({1, 64})}, tol);
  }
  {
    DiscConfig dc;
    dc.resolutions = {8, 4};
    dc.channels = 2;
    MdctDiscriminator<double> disc(dc, rng);
    NamedTensors<double> pp;
    disc.collect("disc", pp);
    randomize(pp, rng, 0.3);
    auto in = handles(pp);
    in.insert(in.begin(), r({1, 256}));
    add_case("multi_resolution_discriminator",
             [disc](auto& v) {
               TD acc = TD::scalar(0.0);
               unsigned seed = 1;
               for (const auto& o : disc.forward(v[0])) {
                 acc = add(acc, project(o.score, seed++));
                 for (const auto& f : o.features) acc = add(acc, project(f, seed++));
               }
               return acc;
             },
             in, tol, 8);
  }
  // Losses.
  add_case("adv_generator", [](auto& v) { return adv_loss_generator<double>({v[0], v[1]}); },
           {away_from(r({1, 1, 3, 4}), 1.0, 0.05), away_from(r({1, 1, 2, 2}), 1.0, 0.05)}, tol);
  add_case("adv_discriminator", [](auto& v) { return adv_loss_discriminator<double>({v[0]}, {v[1]}); },
           {away_from(r({1, 1, 3, 4}), 1.0, 0.05), away_from(r({1, 1, 3, 4}), -1.0, 0.05)}, tol);
  {
    const auto real_a = r({1, 2, 3, 3}, 1.0), real_b = r({1, 2, 2, 2}, 1.0);
    TD fake_a = add(real_a, away_from(r({1, 2, 3, 3}), 0.0, 0.05)).detach();
    TD fake_b = add(real_b, away_from(r({1, 2, 2, 2}), 0.0, 0.05)).detach();
    fake_a.set_requires_grad(true);
    fake_b.set_requires_grad(true);
    add_case("feature_matching",
             [real_a, real_b](auto& v) {
               return feature_matching<double>({{real_a.detach(), real_b.detach()}}, {{v[0], v[1]}});
             },
             {fake_a, fake_b}, tol);
  }
  {
    const auto target = r({2, 5, 4}).detach();
    add_case("mdct_loss", [target](auto& v) { return mdct_loss(v[0], target); }, {r({2, 5, 4})}, tol);
    TD pred = add(target, away_from(r({2, 5, 4}), 0.0, 0.05)).detach();
    pred.set_requires_grad(true);
    add_case("mel_loss", [target](auto& v) { return mel_loss(v[0], target); }, {pred}, tol);
  }
  {
    LossWeights w;
    add_case("total_generator_loss",
             [w](auto& v) {
               GeneratorLossParts<double> p{square(v[0]), square(v[1]), square(v[2]), square(v[3]), square(v[4]),
                                            square(v[5])};
               return total_generator_loss(p, w);
             },
             {r({1}), r({1}), r({1}), r({1}), r({1}), r({1})}, tol);
  }
  {
    // One stage so neither loss sees a detached dependence on its own input.
    ResidualVq<double> vq(RvqConfig{1, 8, 3}, rng);
    const auto code = r({6, 3});
    add_case("codebook_loss", [vq, code](auto& v) { (void)v; return vq.quantize(code.detach()).codebook_loss; },
             {vq.codebooks[0]}, tol);
    add_case("commitment_loss", [vq](auto& v) { return vq.quantize(v[0]).commitment_loss; }, {code}, tol);
  }
  return cases;
}

// Full generator objective of a micro model against central differences of a
// smooth surrogate: tokens, straight-through offset, stop-gradient targets and
// the discriminator's real-side features are frozen at the base point.
GradCase generator_objective_gradient(double* value_gap) {
  auto cfg = testing_support::tiny_config();
  cfg.set("segment_samples", "3200");
  std::mt19937_64 rng(cfg.train.seed);
  Generator<double> g(cfg, rng);
  MdctDiscriminator<double> d(cfg.disc, rng);
  const auto& w = cfg.loss;

  const auto wave = testing_support::sine_mixture(3200, 9);
  const TD x({1, 3200}, wave.samples);
  {
    NoGradGuard ng;
    g.rvq.initialize(g.encoder.forward(g.mdct.analysis(x)), rng);
  }
  NamedTensors<double> net;
  g.encoder.collect("encoder", net);
  g.decoder.collect("decoder", net);
  randomize(net, rng, 0.02);
  NamedTensors<double> dp;
  d.collect("disc", dp);
  randomize(dp, rng, 0.3);
  for (auto& [name, p] : dp) p.set_requires_grad(false);

  const auto params = g.parameters();
  for (auto [name, p] : params) p.zero_grad();
  const auto pass = run_generator(g, x);
  const auto total = total_generator_loss(generator_losses(g, d, pass, x, w), w);
  total.backward();

  const std::size_t Q = g.rvq.config().num_quantizers, dim = g.rvq.config().code_dim;
  const std::size_t rows = pass.code.numel() / dim;
  std::vector<std::vector<std::size_t>> tokens(Q, std::vector<std::size_t>(rows));
  std::vector<TD> stage_in, picked;
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t i = 0; i < rows; ++i) tokens[q][i] = pass.quantized.tokens[i * Q + q];
    stage_in.emplace_back(Shape{rows, dim}, pass.quantized.stage_residuals[q]);
    NoGradGuard ng;
    picked.push_back(gather_rows(g.rvq.codebooks[q], std::span<const std::size_t>(tokens[q])).detach());
  }
  const TD offset = sub(pass.quantized.quantized.detach(), pass.code.detach()).detach();
  TD mel_target;
  std::vector<std::vector<TD>> real_feats;
  {
    NoGradGuard ng;
    mel_target = g.mel(x);
    for (auto& o : d.forward(x)) real_feats.push_back(o.features);
  }

  auto surrogate = [&]() {
    NoGradGuard ng;
    GeneratorLossParts<double> p;
    const auto X = g.mdct.analysis(x);
    const auto C = g.encoder.forward(X);
    auto residual = reshape(C, {rows, dim});
    TD cb = TD::scalar(0.0), com = TD::scalar(0.0);
    for (std::size_t q = 0; q < Q; ++q) {
      const auto pick = gather_rows(g.rvq.codebooks[q], std::span<const std::size_t>(tokens[q]));
      cb = add(cb, mean(square(sub(pick, stage_in[q]))));
      com = add(com, mean(square(sub(residual, picked[q]))));
      residual = sub(residual, picked[q]);
    }
    p.cb = mul_scalar(cb, 1.0 / Q);
    p.com = mul_scalar(com, 1.0 / Q);
    const auto Xhat = g.decoder.forward(add(C, offset));
    const auto xhat = g.mdct.synthesis(Xhat);
    p.mdct = mdct_loss(Xhat, X);
    p.mel = mel_loss(g.mel(xhat), mel_target);
    std::vector<TD> scores;
    std::vector<std::vector<TD>> fake_feats;
    for (auto& o : d.forward(xhat)) {
      scores.push_back(o.score);
      fake_feats.push_back(o.features);
    }
    p.adv = adv_loss_generator(scores);
    p.fm = feature_matching(real_feats, fake_feats);
    return total_generator_loss(p, w).item();
  };
  *value_gap = std::abs(surrogate() - total.item()) / std::abs(total.item());

  std::vector<double> analytic, numeric;
  const double h = 1e-6;
  std::mt19937_64 pick_rng(5);
  for (auto [name, p] : params) {
    const auto grad = p.grad();
    std::vector<std::size_t> idx(p.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick_rng);
    idx.resize(std::min<std::size_t>(idx.size(), 3));
    for (std::size_t i : idx) {
      const double saved = p.data()[i];
      p.data()[i] = saved + h;
      const double upv = surrogate();
      p.data()[i] = saved - h;
      const double down = surrogate();
      p.data()[i] = saved;
      analytic.push_back(grad[i]);
      numeric.push_back((upv - down) / (2 * h));
    }
  }
  return {fmt("generator_objective(%zu probes)", analytic.size()), relative_error(analytic, numeric), 1e-3};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  auto cases = op_gradients();
  double gap = 0.0;
  cases.push_back(generator_objective_gradient(&gap));
  const double secs = since(t0);
  bool ok = secs < 60.0 && gap < 1e-9;
  std::string failed;
  double worst = 0.0;
  for (const auto& c : cases) {
    std::fprintf(stderr, "  grad %-34s rel_err=%.3g tol=%.0e\n", c.name.c_str(), c.error, c.tolerance);
    if (!(c.error < c.tolerance)) {
      ok = false;
      failed += " " + c.name;
    }
    if (c.tolerance < 1e-3) worst = std::max(worst, c.error);
  }
  return {ok, fmt("cases=%zu worst_op_err=%.3g objective_err=%.3g surrogate_gap=%.2g seconds=%.2f", cases.size(),
                  worst, cases.back().error, gap, secs) +
                  (failed.empty() ? "" : " failed:" + failed)};
}

// --- quantizer -------------------------------------------------------------

Outcome rvq_properties() {
  std::mt19937_64 rng(301);
  bool ok = true;
  std::string d;

  // Stage energies over 100 held-out batches of 100 rows, codebooks fit once.
  {
    ResidualVq<double> vq(RvqConfig{8, 64, 8}, rng);
    vq.initialize(random_tensor({4000, 8}, rng, 1.0, false), rng);
    std::size_t violations = 0, row_violations = 0;
    for (int b = 0; b < 100; ++b) {
      const auto out = vq.quantize(random_tensor({100, 8}, rng, 1.0, false));
      for (std::size_t q = 1; q < out.residual_energy.size(); ++q)
        if (out.residual_energy[q] > out.residual_energy[q - 1]) ++violations;
      for (std::size_t i = 0; i < 100; ++i)
        for (std::size_t q = 1; q < out.stage_residuals.size(); ++q) {
          double e0 = 0, e1 = 0;
          for (std::size_t k = 0; k < 8; ++k) {
            e0 += out.stage_residuals[q - 1][i * 8 + k] * out.stage_residuals[q - 1][i * 8 + k];
            e1 += out.stage_residuals[q][i * 8 + k] * out.stage_residuals[q][i * 8 + k];
          }
          if (e1 > e0) ++row_violations;
        }
    }
    ok = ok && violations == 0;
    d += fmt("batch_violations=%zu(row_level=%zu) ", violations, row_violations);
  }
  // Exact codeword inputs: zero losses, exact reconstruction.
  {
    ResidualVq<double> vq(RvqConfig{3, 16, 4}, rng);
    for (std::size_t q = 1; q < 3; ++q)
      for (std::size_t k = 0; k < 4; ++k) vq.codebooks[q].data()[k] = 0.0;
    const auto& b0 = vq.codebooks[0].values();
    const TD code({16, 4}, std::vector<double>(b0.begin(), b0.end()));
    const auto out = vq.quantize(code);
    const bool exact = out.codebook_loss.item() == 0.0 && out.commitment_loss.item() == 0.0 &&
                       out.quantized.values() == code.values();
    ok = ok && exact;
    d += fmt("exact_match_zero_loss=%s ", exact ? "yes" : "no");
  }
  // Straight-through: dL/dC equals dL/dq exactly.
  {
    ResidualVq<double> vq(RvqConfig{4, 32, 6}, rng);
    const auto code = random_tensor({7, 6}, rng);
    const auto weights = random_tensor({7, 6}, rng, 1.0, false);
    sum(mul(vq.quantize(code).quantized, weights)).backward();
    const bool identity = code.grad() == weights.values();
    ok = ok && identity;
    d += fmt("straight_through_identity=%s ", identity ? "yes" : "no");
  }
  // Tokens survive quantize -> pack -> unpack -> dequantize.
  {
    std::size_t points = 0, failures = 0;
    for (std::size_t Q : {1u, 2u, 4u, 6u, 8u})
      for (unsigned bits = 1; bits <= 16; ++bits) {
        const std::size_t M = std::size_t{1} << bits, frames = 5;
        ResidualVq<double> vq(RvqConfig{Q, M, 4}, rng);
        const auto out = vq.quantize(random_tensor({frames, 4}, rng, 0.05, false));
        Bitstream s;
        s.header.num_quantizers = static_cast<std::uint8_t>(Q);
        s.header.log2_codebook = static_cast<std::uint8_t>(bits);
        s.header.num_frames = frames;
        s.header.sample_count = frames * 320;
        s.tokens = out.tokens;
        const auto back = unpack(pack(s));
        const auto values = vq.dequantize(back.tokens);
        ++points;
        if (back.tokens != out.tokens || values != out.quantized.values()) ++failures;
      }
    ok = ok && failures == 0;
    d += fmt("token_round_trip=%zu/%zu", points - failures, points);
  }
  return {ok, d};
}

// --- shapes and init -------------------------------------------------------

Outcome shape_contract() {
  const CodecConfig cfg;
  std::mt19937_64 rng(cfg.train.seed);
  const Generator<double> g(cfg, rng);
  NoGradGuard ng;
  const auto wave = testing_support::sine_mixture(48000, 4);
  const TD x({1, 48000}, wave.samples);
  const auto p = run_generator(g, x);
  const auto shape = [](const TD& t) { return shape_string(t.shape()); };
  const std::size_t token_frames = p.quantized.tokens.size() / cfg.rvq.num_quantizers;
  const bool ok = p.spectrum.shape() == Shape{1, 1200, 40} && p.code.shape() == Shape{1, 150, 32} &&
                  token_frames == 150 && p.decoded.shape() == Shape{1, 1200, 40} &&
                  p.waveform.shape() == Shape{1, 48000};
  return {ok, "x=" + shape(x) + " X=" + shape(p.spectrum) + " C=" + shape(p.code) +
                  fmt(" token_frames=%zu ", token_frames) + "Xhat=" + shape(p.decoded) + " xhat=" + shape(p.waveform)};
}

Outcome identity_at_init() {
  const CodecConfig cfg;
  std::mt19937_64 rng(cfg.train.seed);
  const Generator<double> g(cfg, rng);
  NoGradGuard ng;
  double worst = 0.0;
  std::size_t blocks = 0;
  auto check = [&](const ConvNextBlock<double>& b) {
    const auto x = random_tensor({2, 37, cfg.model.hidden_width}, rng, 1.0, false);
    const auto y = b.forward(x);
    for (std::size_t i = 0; i < x.numel(); ++i) worst = std::max(worst, std::abs(y.data()[i] - x.data()[i]));
    ++blocks;
  };
  for (const auto& b : g.encoder.blocks) check(b);
  for (const auto& b : g.decoder.blocks) check(b);
  return {worst == 0.0 && blocks == 2 * cfg.model.num_blocks,
          fmt("blocks=%zu max_abs_deviation=%.3g", blocks, worst)};
}

// --- training --------------------------------------------------------------

CodecConfig micro_config() {
  CodecConfig c;
  for (const char* kv : {"hidden_width=64", "block_intermediate=128", "num_blocks=2", "mdct_bins=40",
                         "num_quantizers=2", "codebook_size=64", "batch_size=4", "precision=f32",
                         "disc_channels=32", "seed=5"})
    c.set_assignment(kv);
  c.validate();
  return c;
}

Outcome convergence() {
  const auto t0 = Clock::now();
  const auto cfg = micro_config();
  const auto corpus = testing_support::sine_corpus(64, 48000, 1000);
  Trainer<float> t(cfg, &corpus);
  std::vector<StepMetrics> log;
  bool d_ok = true;
  for (int i = 0; i < 500; ++i) {
    log.push_back(t.step());
    d_ok = d_ok && std::isfinite(log.back().loss_d) && log.back().loss_d > 0.0;
    if ((i + 1) % 50 == 0)
      std::fprintf(stderr, "  train step=%d mel=%.4f loss_d=%.4f elapsed=%.0fs\n", i + 1, log.back().mel,
                   log.back().loss_d, since(t0));
  }
  const double secs = since(t0);
  const double first = log.front().mel, last = log.back().mel;
  double tail = 0.0;
  for (std::size_t i = log.size() - 10; i < log.size(); ++i) tail += log[i].mel / 10.0;
  const bool ok = last < 0.5 * first && d_ok && secs < 900.0;
  return {ok, fmt("mel_step1=%.4f mel_step500=%.4f ratio=%.3f tail10_ratio=%.3f loss_d_finite_positive=%s "
                  "seconds=%.0f",
                  first, last, last / first, tail / first, d_ok ? "yes" : "no", secs)};
}

Outcome determinism() {
  auto cfg = testing_support::tiny_config();
  const auto corpus = testing_support::sine_corpus(8, 9600, 400);
  auto run = [&](Trainer<double>& t, int steps) {
    std::vector<StepMetrics> m;
    for (int i = 0; i < steps; ++i) m.push_back(t.step());
    return m;
  };
  Trainer<double> a(cfg, &corpus), b(cfg, &corpus);
  const auto ma = run(a, 10), mb = run(b, 10);
  bool same = true;
  for (std::size_t i = 0; i < 10; ++i) same = same && ma[i].same_losses(mb[i]);
  const bool bytes_same = a.save_bytes() == b.save_bytes();

  testing_support::TempDir dir("acceptance_resume");
  Trainer<double> c(cfg, &corpus);
  run(c, 5);
  c.save(dir.file("half.ckpt"));
  Trainer<double> r(cfg, &corpus);
  r.load(dir.file("half.ckpt"));
  const auto mr = run(r, 5);
  bool resumed = true;
  for (std::size_t i = 0; i < 5; ++i) resumed = resumed && mr[i].same_losses(ma[5 + i]);
  const bool final_same = r.save_bytes() == a.save_bytes();
  return {same && bytes_same && resumed && final_same,
          fmt("runs_identical=%s state_bytes_identical=%s resumed_trajectory=%s resumed_state=%s",
              same ? "yes" : "no", bytes_same ? "yes" : "no", resumed ? "yes" : "no", final_same ? "yes" : "no")};
}

// --- command line ----------------------------------------------------------

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "mdctcodec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::fprintf(stderr, "  cli exit %d: %s", code, err.str().c_str());
  return code;
}

Outcome cli_round_trip() {
  testing_support::TempDir dir("acceptance_cli");
  CodecConfig cfg;
  cfg.set("batch_size", "1");
  cfg.set("precision", "f32");
  const auto corpus = testing_support::sine_corpus(2, 16000, 77);
  {
    Trainer<float> t(cfg, &corpus);
    t.step();
    t.save(dir.file("model.ckpt"));
  }
  bool ok = true;
  std::string d;
  for (std::size_t n : {504000u, 480624u}) {
    auto x = testing_support::sine_mixture(n, n);
    write_wav(dir.file("in.wav"), x, SampleFormat::kPcm16);
    x = read_wav(dir.file("in.wav"));
    const int e = cli({"encode", "--checkpoint", dir.file("model.ckpt"), "--out", dir.file("s.mdc"), dir.file("in.wav")});
    const int dc = cli({"decode", "--checkpoint", dir.file("model.ckpt"), "--out", dir.file("out.wav"), dir.file("s.mdc")});
    if (e != 0 || dc != 0) return {false, fmt("encode_exit=%d decode_exit=%d", e, dc)};
    const auto y = read_wav(dir.file("out.wav"));
    const auto s = unpack(read_file_bytes(dir.file("s.mdc")));
    const double duration = static_cast<double>(n) / 48000.0;
    const double achieved = s.header.payload_bits() / duration;
    const double self = lsd(x, x);
    const bool this_ok = y.samples.size() == n && std::abs(achieved - 6000.0) <= 60.0 && self == 0.0 &&
                         std::isfinite(lsd(x, y));
    ok = ok && this_ok;
    d += fmt("[%.3fs: out_samples=%zu/%zu bitrate=%.2f lsd_self=%g] ", duration, y.samples.size(), n, achieved, self);
  }
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"perfect reconstruction", perfect_reconstruction},
      {"oracle equivalence", oracle_equivalence},
      {"Princen-Bradley window", princen_bradley},
      {"bitrate", bitrate},
      {"gradient checks", gradients},
      {"RVQ properties", rvq_properties},
      {"shape contract", shape_contract},
      {"identity at init", identity_at_init},
      {"training convergence", convergence},
      {"determinism and resume", determinism},
      {"CLI round trip", cli_round_trip},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
