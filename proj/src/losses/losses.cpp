#include "mdctcodec/losses.hpp"

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

template <typename T>
Tensor<T> accumulate(const Tensor<T>& total, const Tensor<T>& term) {
  return total.defined() ? add(total, term) : term;
}

template <typename T>
Tensor<T> or_zero(const Tensor<T>& t) {
  return t.defined() ? t : Tensor<T>::scalar(T(0));
}

void check_same(const Shape& a, const Shape& b, const char* what) {
  require(a == b, ErrorKind::kContract,
          std::string(what) + " shapes differ: " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {adv, fm, mdct, mel, cb, com})
    require(v >= 0.0, ErrorKind::kInvalidConfig, "loss weights must be non-negative");
}

template <typename T>
Tensor<T> adv_loss_generator(const std::vector<Tensor<T>>& fake_scores) {
  Tensor<T> total;
  for (const auto& s : fake_scores) total = accumulate(total, mean(relu(rsub_scalar(T(1), s))));
  return or_zero(total);
}

template <typename T>
Tensor<T> adv_loss_discriminator(const std::vector<Tensor<T>>& real_scores,
                                 const std::vector<Tensor<T>>& fake_scores) {
  require(real_scores.size() == fake_scores.size(), ErrorKind::kContract,
          "real and fake score counts differ");
  Tensor<T> total;
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    total = accumulate(total, mean(relu(rsub_scalar(T(1), real_scores[i]))));
    total = accumulate(total, mean(relu(add_scalar(fake_scores[i], T(1)))));
  }
  return or_zero(total);
}

template <typename T>
Tensor<T> feature_matching(const std::vector<std::vector<Tensor<T>>>& real_features,
                           const std::vector<std::vector<Tensor<T>>>& fake_features) {
  require(real_features.size() == fake_features.size(), ErrorKind::kContract,
          "feature matching needs equal sub-discriminator counts");
  Tensor<T> total;
  for (std::size_t i = 0; i < real_features.size(); ++i) {
    require(real_features[i].size() == fake_features[i].size(), ErrorKind::kContract,
            "feature matching needs equal layer counts");
    for (std::size_t j = 0; j < real_features[i].size(); ++j) {
      const auto& r = real_features[i][j];
      const auto& f = fake_features[i][j];
      check_same(r.shape(), f.shape(), "feature map");
      total = accumulate(total, mean(abs(sub(f, r.detach()))));
    }
  }
  return or_zero(total);
}

template <typename T>
Tensor<T> mdct_loss(const Tensor<T>& predicted, const Tensor<T>& target) {
  check_same(predicted.shape(), target.shape(), "MDCT loss");
  return mean(square(sub(predicted, target.detach())));
}

template <typename T>
Tensor<T> mel_loss(const Tensor<T>& predicted, const Tensor<T>& target) {
  check_same(predicted.shape(), target.shape(), "mel loss");
  const auto d = sub(predicted, target.detach());
  return add(mean(abs(d)), mean(square(d)));
}

template <typename T>
Tensor<T> total_generator_loss(const GeneratorLossParts<T>& p, const LossWeights& w) {
  Tensor<T> total;
  const auto term = [&](const Tensor<T>& part, double weight) {
    if (part.defined() && weight != 0.0)
      total = accumulate(total, mul_scalar(part, static_cast<T>(weight)));
  };
  term(p.adv, w.adv);
  term(p.fm, w.fm);
  term(p.mdct, w.mdct);
  term(p.mel, w.mel);
  term(p.cb, w.cb);
  term(p.com, w.com);
  return or_zero(total);
}

#define MDCTCODEC_INSTANTIATE_LOSSES(T)                                                        \
  template Tensor<T> adv_loss_generator(const std::vector<Tensor<T>>&);                        \
  template Tensor<T> adv_loss_discriminator(const std::vector<Tensor<T>>&,                     \
                                            const std::vector<Tensor<T>>&);                    \
  template Tensor<T> feature_matching(const std::vector<std::vector<Tensor<T>>>&,              \
                                      const std::vector<std::vector<Tensor<T>>>&);             \
  template Tensor<T> mdct_loss(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mel_loss(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> total_generator_loss(const GeneratorLossParts<T>&, const LossWeights&);

MDCTCODEC_INSTANTIATE_LOSSES(float)
MDCTCODEC_INSTANTIATE_LOSSES(double)

}  // namespace mdctcodec
