#include "mdctcodec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

template <typename T>
constexpr char dtype_tag() {
  return sizeof(T) == 4 ? 'f' : 'd';
}

double value_or_zero(const auto& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; }

void check_finite(double v, const char* what, std::uint64_t step) {
  require(std::isfinite(v), ErrorKind::kDiverged,
          std::string("non-finite ") + what + " at step " + std::to_string(step));
}

template <typename T>
void check_finite_grads(const AdamW<T>& opt, const char* what, std::uint64_t step) {
  for (const auto& [name, p] : opt.params()) {
    if (!p.has_grad()) continue;
    for (T g : p.grad())
      require(std::isfinite(static_cast<double>(g)), ErrorKind::kDiverged,
              std::string("non-finite ") + what + " gradient in " + name + " at step " + std::to_string(step));
  }
}

// Discriminator parameters stay frozen while the generator loss is built and
// back-propagated, so that pass leaves no gradient on them.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(AdamW<T>& opt) : opt_(opt) { opt_.set_requires_grad(false); }
  ~FreezeGuard() { opt_.set_requires_grad(true); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  AdamW<T>& opt_;
};

template <typename T>
void store_optimizer(const AdamW<T>& opt, const std::string& prefix, Checkpoint& c) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    c.put_values<T>(prefix + ".m." + name, p.shape(), opt.first_moments()[i]);
    c.put_values<T>(prefix + ".v." + name, p.shape(), opt.second_moments()[i]);
  }
  const std::uint64_t t = opt.steps();
  c.put_u64(prefix + ".t", std::span(&t, 1));
}

template <typename T>
void restore_optimizer(const Checkpoint& c, const std::string& prefix, AdamW<T>& opt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].first;
    c.get_values<T>(prefix + ".m." + name, std::span<T>(opt.first_moments()[i]));
    c.get_values<T>(prefix + ".v." + name, std::span<T>(opt.second_moments()[i]));
  }
  opt.set_steps(c.get_u64(prefix + ".t").at(0));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

template <typename T>
Generator<T>::Generator(const CodecConfig& cfg, std::mt19937_64& rng)
    : mdct(cfg.mdct()), mel(cfg.mel()), encoder(cfg.model, rng), decoder(cfg.model, rng), rvq(cfg.rvq, rng) {}

template <typename T>
NamedTensors<T> Generator<T>::parameters() const {
  NamedTensors<T> out;
  encoder.collect("encoder", out);
  decoder.collect("decoder", out);
  rvq.collect("rvq", out);
  return out;
}

template <typename T>
GeneratorPass<T> run_generator(const Generator<T>& g, const Tensor<T>& x) {
  GeneratorPass<T> p;
  p.spectrum = g.mdct.analysis(x);
  p.code = g.encoder.forward(p.spectrum);
  p.quantized = g.rvq.quantize(p.code);
  p.decoded = g.decoder.forward(p.quantized.quantized);
  p.waveform = g.mdct.synthesis(p.decoded);
  return p;
}

template <typename T>
GeneratorLossParts<T> generator_losses(const Generator<T>& g, const MdctDiscriminator<T>& d,
                                       const GeneratorPass<T>& pass, const Tensor<T>& x,
                                       const LossWeights& w) {
  GeneratorLossParts<T> parts;
  if (w.mdct > 0) parts.mdct = mdct_loss(pass.decoded, pass.spectrum);
  if (w.mel > 0) {
    Tensor<T> target;
    {
      NoGradGuard ng;
      target = g.mel(x);
    }
    parts.mel = mel_loss(g.mel(pass.waveform), target);
  }
  parts.cb = pass.quantized.codebook_loss;
  parts.com = pass.quantized.commitment_loss;
  if (w.adv > 0 || w.fm > 0) {
    const auto fake = d.forward(pass.waveform);
    std::vector<DiscOutput<T>> real;
    {
      NoGradGuard ng;
      real = d.forward(x);
    }
    std::vector<Tensor<T>> scores;
    std::vector<std::vector<Tensor<T>>> fake_feats, real_feats;
    for (std::size_t i = 0; i < fake.size(); ++i) {
      scores.push_back(fake[i].score);
      fake_feats.push_back(fake[i].features);
      real_feats.push_back(real[i].features);
    }
    if (w.adv > 0) parts.adv = adv_loss_generator(scores);
    if (w.fm > 0) parts.fm = feature_matching(real_feats, fake_feats);
  }
  return parts;
}

template <typename T>
void store_generator(const Generator<T>& g, Checkpoint& c) {
  for (const auto& [name, p] : g.parameters()) c.put_tensor(name, p);
  std::vector<std::uint64_t> idle;
  for (const auto& stage : g.rvq.idle) idle.insert(idle.end(), stage.begin(), stage.end());
  c.put_u64("rvq.idle", idle);
  const std::uint64_t init = g.rvq.initialized() ? 1 : 0;
  c.put_u64("rvq.initialized", std::span(&init, 1));
}

template <typename T>
void restore_generator(const Checkpoint& c, Generator<T>& g) {
  for (auto& [name, p] : g.parameters()) c.get_tensor(name, p);
  const auto idle = c.get_u64("rvq.idle");
  std::size_t at = 0;
  for (auto& stage : g.rvq.idle) {
    require(idle.size() >= at + stage.size(), ErrorKind::kShape, "checkpoint idle counters do not match the quantizer");
    for (auto& v : stage) v = static_cast<std::uint32_t>(idle[at++]);
  }
  require(at == idle.size(), ErrorKind::kShape, "checkpoint idle counters do not match the quantizer");
  g.rvq.set_initialized(c.get_u64("rvq.initialized").at(0) != 0);
}

std::string StepMetrics::to_line() const {
  std::string s = "step=" + std::to_string(step) + " epoch=" + std::to_string(epoch);
  const std::pair<const char*, double> fields[] = {{"lr", lr},     {"loss_g", loss_g}, {"adv_g", adv_g},
                                                   {"fm", fm},     {"mdct", mdct},     {"mel", mel},
                                                   {"cb", cb},     {"com", com},       {"loss_d", loss_d}};
  for (const auto& [k, v] : fields) s += std::string(" ") + k + "=" + format_double(v);
  s += " revived=" + std::to_string(revived) + " seconds=" + format_double(seconds);
  return s;
}

bool StepMetrics::same_losses(const StepMetrics& o) const {
  return step == o.step && epoch == o.epoch && lr == o.lr && loss_g == o.loss_g && adv_g == o.adv_g &&
         fm == o.fm && mdct == o.mdct && mel == o.mel && cb == o.cb && com == o.com &&
         loss_d == o.loss_d && revived == o.revived;
}

template <typename T>
Trainer<T>::Trainer(const CodecConfig& cfg, const Corpus* corpus)
    : cfg_((cfg.validate(), cfg)),
      rng_(cfg.train.seed),
      gen_(cfg_, rng_),
      disc_(cfg_.disc, rng_),
      gen_opt_(gen_.parameters(), AdamWConfig{cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps,
                                              cfg.train.weight_decay}),
      disc_opt_(
          [this] {
            NamedTensors<T> p;
            disc_.collect("disc", p);
            return p;
          }(),
          AdamWConfig{cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps, cfg.train.weight_decay}) {
  if (corpus) {
    require(corpus->sample_rate == cfg.sample_rate, ErrorKind::kRateMismatch,
            "corpus rate " + std::to_string(corpus->sample_rate) + " differs from the config rate " +
                std::to_string(cfg.sample_rate));
    sampler_.emplace(*corpus, cfg_.effective_segment(), cfg_.train.seed);
  }
}

template <typename T>
StepMetrics Trainer<T>::train_step(const Batch& batch) {
  const auto start = std::chrono::steady_clock::now();
  require(batch.samples.size() == batch.batch_size * batch.segment && batch.batch_size > 0,
          ErrorKind::kShape, "batch holds " + std::to_string(batch.samples.size()) + " samples, expected " +
                                 std::to_string(batch.batch_size) + " x " + std::to_string(batch.segment));
  std::vector<T> values(batch.samples.begin(), batch.samples.end());
  const Tensor<T> x({batch.batch_size, batch.segment}, std::move(values));
  const auto& w = cfg_.loss;
  const std::uint64_t this_step = step_ + 1;

  StepMetrics m;
  m.step = this_step;
  m.epoch = batch.epoch;
  m.lr = lr_schedule(cfg_.train.lr, cfg_.train.lr_decay_per_epoch, batch.epoch);

  if (!gen_.rvq.initialized()) {
    NoGradGuard ng;
    gen_.rvq.initialize(gen_.encoder.forward(gen_.mdct.analysis(x)), rng_);
  }

  const auto pass = run_generator(gen_, x);

  if (w.adv > 0 || w.fm > 0) {
    disc_opt_.zero_grad();
    std::vector<Tensor<T>> real_scores, fake_scores;
    for (auto& o : disc_.forward(x)) real_scores.push_back(o.score);
    for (auto& o : disc_.forward(pass.waveform.detach())) fake_scores.push_back(o.score);
    const auto loss_d = adv_loss_discriminator(real_scores, fake_scores);
    m.loss_d = static_cast<double>(loss_d.item());
    check_finite(m.loss_d, "discriminator loss", this_step);
    loss_d.backward();
    check_finite_grads(disc_opt_, "discriminator", this_step);
    disc_opt_.step(m.lr);
  }

  {
    FreezeGuard<T> freeze(disc_opt_);
    const auto parts = generator_losses(gen_, disc_, pass, x, w);
    const auto total = total_generator_loss(parts, w);
    m.adv_g = value_or_zero(parts.adv);
    m.fm = value_or_zero(parts.fm);
    m.mdct = value_or_zero(parts.mdct);
    m.mel = value_or_zero(parts.mel);
    m.cb = value_or_zero(parts.cb);
    m.com = value_or_zero(parts.com);
    m.loss_g = value_or_zero(total);
    const std::pair<const char*, double> named[] = {{"adversarial loss", m.adv_g}, {"feature-matching loss", m.fm},
                                                    {"MDCT loss", m.mdct},         {"mel loss", m.mel},
                                                    {"codebook loss", m.cb},       {"commitment loss", m.com},
                                                    {"generator loss", m.loss_g}};
    for (const auto& [what, v] : named) check_finite(v, what, this_step);
    gen_opt_.zero_grad();
    total.backward();
    check_finite_grads(gen_opt_, "generator", this_step);
    gen_opt_.step(m.lr);
  }

  m.revived = gen_.rvq.update_usage(pass.quantized, rng_);
  step_ = this_step;
  epoch_ = batch.epoch;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

template <typename T>
StepMetrics Trainer<T>::step() {
  require(sampler_.has_value(), ErrorKind::kContract, "trainer has no corpus to draw batches from");
  return train_step(sampler_->next(cfg_.train.batch_size));
}

template <typename T>
std::vector<std::uint8_t> Trainer<T>::save_bytes() const {
  Checkpoint c;
  c.dtype = dtype_tag<T>();
  c.config_text = cfg_.to_text();
  c.fingerprint = cfg_.fingerprint();
  store_generator(gen_, c);
  NamedTensors<T> dparams;
  disc_.collect("disc", dparams);
  for (const auto& [name, p] : dparams) c.put_tensor(name, p);
  store_optimizer(gen_opt_, "opt.generator", c);
  store_optimizer(disc_opt_, "opt.disc", c);
  const std::uint64_t counters[] = {step_, epoch_};
  c.put_u64("state.counters", counters);
  if (sampler_) {
    const std::uint64_t cur[] = {sampler_->cursor().epoch, sampler_->cursor().position};
    c.put_u64("state.cursor", cur);
  }
  std::ostringstream rng;
  rng << rng_;
  c.put_string("state.rng", rng.str());
  return c.serialize();
}

template <typename T>
void Trainer<T>::save(const std::string& path) const {
  write_file_bytes(path, save_bytes());
}

template <typename T>
void Trainer<T>::load_bytes(std::span<const std::uint8_t> bytes, bool force) {
  const auto c = Checkpoint::deserialize(bytes);
  require(c.dtype == dtype_tag<T>(), ErrorKind::kUnsupported,
          std::string("checkpoint precision '") + c.dtype + "' differs from the configured precision");
  if (!force)
    require(c.fingerprint == cfg_.fingerprint(), ErrorKind::kFingerprintMismatch,
            "checkpoint fingerprint " + hex(c.fingerprint) + " differs from the config fingerprint " +
                hex(cfg_.fingerprint()));
  restore_generator(c, gen_);
  NamedTensors<T> dparams;
  disc_.collect("disc", dparams);
  for (auto& [name, p] : dparams) c.get_tensor(name, p);
  restore_optimizer(c, "opt.generator", gen_opt_);
  restore_optimizer(c, "opt.disc", disc_opt_);
  const auto counters = c.get_u64("state.counters");
  require(counters.size() == 2, ErrorKind::kIntegrity, "malformed checkpoint counters");
  step_ = counters[0];
  epoch_ = counters[1];
  if (sampler_ && c.has("state.cursor")) {
    const auto cur = c.get_u64("state.cursor");
    require(cur.size() == 2, ErrorKind::kIntegrity, "malformed checkpoint cursor");
    sampler_->set_cursor(DatasetCursor{cur[0], cur[1]});
  }
  std::istringstream rng(c.get_string("state.rng"));
  rng >> rng_;
  require(!rng.fail(), ErrorKind::kIntegrity, "malformed checkpoint generator state");
}

template <typename T>
void Trainer<T>::load(const std::string& path, bool force) {
  load_bytes(read_file_bytes(path), force);
}

template struct Generator<float>;
template struct Generator<double>;
template GeneratorPass<float> run_generator(const Generator<float>&, const Tensor<float>&);
template GeneratorPass<double> run_generator(const Generator<double>&, const Tensor<double>&);
template GeneratorLossParts<float> generator_losses(const Generator<float>&, const MdctDiscriminator<float>&,
                                                    const GeneratorPass<float>&, const Tensor<float>&,
                                                    const LossWeights&);
template GeneratorLossParts<double> generator_losses(const Generator<double>&, const MdctDiscriminator<double>&,
                                                     const GeneratorPass<double>&, const Tensor<double>&,
                                                     const LossWeights&);
template void store_generator(const Generator<float>&, Checkpoint&);
template void store_generator(const Generator<double>&, Checkpoint&);
template void restore_generator(const Checkpoint&, Generator<float>&);
template void restore_generator(const Checkpoint&, Generator<double>&);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace mdctcodec
