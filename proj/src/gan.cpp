#include "embryoforge/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "embryoforge/autograd.hpp"
#include "embryoforge/ops.hpp"
#include "embryoforge/synth.hpp"

namespace embryoforge {

std::string_view loss_kind_name(LossKind kind) {
  return kind == LossKind::minimax ? "minimax" : "wgan_gp";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "minimax") return LossKind::minimax;
  if (name == "wgan_gp" || name == "wgan-gp") return LossKind::wgan_gp;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (n_critic < 1) throw std::invalid_argument("n_critic must be >= 1");
  if (!(penalty_weight >= 0)) throw std::invalid_argument("penalty weight must be >= 0");
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (epochs < 0 || iterations < 0) throw std::invalid_argument("epochs/iterations must be >= 0");
  if (!(lr_classifier > 0) || !(lr_gan > 0)) throw std::invalid_argument("learning rates must be > 0");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw std::invalid_argument("dropout rate must be in [0,1)");
  if (sample_every < 0 || sample_grid < 1) throw std::invalid_argument("bad sample grid settings");
}

// ---------------------------------------------------------------- trace

void LossTrace::append(const TraceRow& row) {
  if (!rows_.empty() && row.iter <= rows_.back().iter) {
    throw std::invalid_argument("trace iterations must increase");
  }
  for (double v : {row.critic_obj, row.gen_obj, row.penalty, row.wall_ms}) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite trace value");
  }
  rows_.push_back(row);
}

std::string LossTrace::to_csv() const {
  std::string out(kHeader);
  out += '\n';
  char line[256];
  for (const auto& r : rows_) {
    std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.3f\n", static_cast<long long>(r.iter),
                  r.critic_obj, r.gen_obj, r.penalty, r.wall_ms);
    out += line;
  }
  return out;
}

LossTrace LossTrace::from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::invalid_argument("bad trace header");
  LossTrace t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow r;
    long long iter = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf", &iter, &r.critic_obj, &r.gen_obj,
                    &r.penalty, &r.wall_ms) != 5) {
      throw std::invalid_argument("bad trace row '" + line + "'");
    }
    r.iter = iter;
    t.append(r);
  }
  return t;
}

bool LossTrace::same_values(const LossTrace& other) const {
  if (rows_.size() != other.rows_.size()) return false;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& a = rows_[i];
    const auto& b = other.rows_[i];
    if (a.iter != b.iter || a.critic_obj != b.critic_obj || a.gen_obj != b.gen_obj ||
        a.penalty != b.penalty) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- losses

namespace {

bool all_finite(const Tensor& t) {
  for (double v : t.to_vector())
    if (!std::isfinite(v)) return false;
  return true;
}

constexpr double kProbEps = 1e-7;

void check_probabilities(const Tensor& p, const char* which) {
  for (double v : p.to_vector()) {
    if (!(v >= -kProbEps && v <= 1.0 + kProbEps)) {
      throw std::invalid_argument(std::string(which) + " value " + std::to_string(v) +
                                  " is not a probability (missing sigmoid?)");
    }
  }
}

}  // namespace

MinimaxLosses minimax_loss(const Tensor& d_real, const Tensor& d_fake, bool literal) {
  check_probabilities(d_real, "d_real");
  check_probabilities(d_fake, "d_fake");
  const Tensor r = clamp(d_real, kProbEps, 1.0 - kProbEps);
  const Tensor f = clamp(d_fake, kProbEps, 1.0 - kProbEps);
  const Tensor log_r = mean(log(r));
  const Tensor log_1mf = mean(log(1.0 - f));
  MinimaxLosses out;
  out.d_loss = -log_r - log_1mf;
  out.g_loss = literal ? log_1mf : -mean(log(f));
  out.objective = log_r.item() + log_1mf.item();
  return out;
}

WassersteinLosses wasserstein_objective(const Tensor& d_real, const Tensor& d_fake,
                                        const Tensor& penalty) {
  if (!all_finite(d_real) || !all_finite(d_fake)) {
    throw std::invalid_argument("non-finite critic scores");
  }
  const Tensor mr = mean(d_real);
  const Tensor mf = mean(d_fake);
  WassersteinLosses out;
  out.critic_loss = penalty.defined() ? mf - mr + penalty : mf - mr;
  out.gen_loss = -mf;
  out.estimate = mr.item() - mf.item();
  return out;
}

PenaltyResult gradient_penalty(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng) {
  if (real.shape() != fake.shape()) {
    throw DimensionError("penalty inputs differ: real " + shape_str(real.shape()) + ", fake " +
                         shape_str(fake.shape()));
  }
  if (real.rank() < 2) throw DimensionError("penalty inputs must be batched, got " + shape_str(real.shape()));
  const std::int64_t n = real.dim(0);
  Shape eshape(real.rank(), 1);
  eshape[0] = n;
  std::vector<double> e(static_cast<std::size_t>(n));
  for (auto& v : e) v = rng.uniform();
  const Tensor eps = Tensor::from_vector(eshape, std::move(e), real.dtype());
  Tensor xhat;
  {
    NoGradGuard ng;
    xhat = eps * real.detach() + (1.0 - eps) * fake.detach();
  }
  xhat = xhat.detach();
  xhat.requires_grad_();
  EnableGradGuard eg;
  const Tensor scores = critic(xhat);
  const Tensor g = grad(sum(scores), {xhat}, /*higher_order=*/true)[0];
  const Tensor flat = reshape(g, {n, real.numel() / n});
  const Tensor norms = sqrt(sum_to(square(flat), {n, 1}));
  PenaltyResult out;
  out.penalty = lambda * mean(square(norms - 1.0));
  out.grad_norms = norms.to_vector();
  return out;
}

PenaltyResult gradient_penalty(Network& critic, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng) {
  if (critic.couples_batch(NormMode::train)) {
    throw std::invalid_argument("per-sample penalty undefined under batch coupling");
  }
  return gradient_penalty([&](const Tensor& x) { return critic.forward(x, NormMode::train); }, real,
                          fake, lambda, rng);
}

BatchSource tensor_source(Tensor data) {
  if (data.rank() < 1 || data.dim(0) < 1) throw std::invalid_argument("empty dataset");
  return [data = std::move(data)](std::int64_t n, Rng& rng) {
    const auto& s = data.shape();
    const std::int64_t row = data.numel() / s[0];
    Shape out_shape = s;
    out_shape[0] = n;
    return visit_dtype(data.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const auto src = data.data<T>();
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(n * row));
      for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(s[0])));
        v.insert(v.end(), src.begin() + k * row, src.begin() + (k + 1) * row);
      }
      return Tensor::from_vector(out_shape, std::move(v), data.dtype());
    });
  };
}

Tensor sample_latent(std::int64_t n, int dim, Rng& rng, DType dtype) {
  std::vector<double> v(static_cast<std::size_t>(n * dim));
  for (auto& x : v) x = rng.normal();
  return Tensor::from_vector({n, dim}, std::move(v), dtype);
}

// ---------------------------------------------------------------- GAN loop

namespace {

AdamConfig gan_adam(const TrainConfig& cfg) {
  return AdamConfig{cfg.lr_gan, cfg.gan_beta1, cfg.gan_beta2, 1e-8};
}

void check_grads(const std::vector<Tensor>& grads, const char* who, std::int64_t iteration) {
  for (const auto& g : grads) {
    if (!all_finite(g)) {
      throw NumericalFailure(std::string("non-finite ") + who + " gradient at iteration " +
                                 std::to_string(iteration),
                             iteration);
    }
  }
}

void check_loss(const Tensor& loss, const char* who, std::int64_t iteration) {
  if (!std::isfinite(loss.item())) {
    throw NumericalFailure(std::string("non-finite ") + who + " loss at iteration " +
                               std::to_string(iteration),
                           iteration);
  }
}

}  // namespace

GanTrainer::GanTrainer(Network generator, Network critic, TrainConfig cfg)
    : cfg_(std::move(cfg)),
      generator_(std::move(generator)),
      critic_(std::move(critic)),
      streams_(cfg_.seed),
      start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  if (generator_.input_shape() != Shape{cfg_.latent_dim}) {
    throw DimensionError("generator input " + shape_str(generator_.input_shape()) +
                         " does not match latent_dim " + std::to_string(cfg_.latent_dim));
  }
  if (generator_.output_shape() != critic_.input_shape()) {
    throw DimensionError("generator output " + shape_str(generator_.output_shape()) +
                         " does not match critic input " + shape_str(critic_.input_shape()));
  }
  if (cfg_.loss_kind == LossKind::wgan_gp && critic_.couples_batch(NormMode::train)) {
    throw std::invalid_argument("per-sample penalty undefined under batch coupling");
  }
  g_opt_ = AdamState::fresh(generator_.params(), gan_adam(cfg_));
  c_opt_ = AdamState::fresh(critic_.params(), gan_adam(cfg_));
  Rng grid(derive_seed(cfg_.seed, "sample-grid"));
  grid_latent_ = sample_latent(static_cast<std::int64_t>(cfg_.sample_grid) * cfg_.sample_grid,
                               cfg_.latent_dim, grid, generator_.dtype());
}

GanTrainer GanTrainer::resume(const Checkpoint& generator, const Checkpoint& critic,
                              TrainConfig cfg) {
  GanTrainer t(unpack_network(generator, "generator"), unpack_network(critic, "critic"),
               std::move(cfg));
  Snapshot s{generator, critic};
  t.restore(s);
  if (const auto* trace = generator.find_block("trace")) t.trace_ = LossTrace::from_csv(*trace);
  return t;
}

GanTrainer::Snapshot GanTrainer::snapshot() const {
  Snapshot s;
  pack_network(s.generator, "generator", generator_, &g_opt_);
  pack_network(s.critic, "critic", critic_, &c_opt_);
  pack_rng(s.generator, streams_);
  pack_iteration(s.generator, iteration_);
  pack_iteration(s.critic, iteration_);
  return s;
}

void GanTrainer::restore(const Snapshot& s) {
  generator_ = unpack_network(s.generator, "generator");
  critic_ = unpack_network(s.critic, "critic");
  auto g = unpack_adam(s.generator, "generator", generator_);
  auto c = unpack_adam(s.critic, "critic", critic_);
  if (!g || !c) throw CheckpointError("checkpoint lacks optimizer state");
  g_opt_ = std::move(*g);
  c_opt_ = std::move(*c);
  streams_ = unpack_rng(s.generator);
  iteration_ = unpack_iteration(s.generator);
  if (!trace_.empty() && trace_.rows().back().iter > iteration_) {
    LossTrace kept;
    for (const auto& r : trace_.rows())
      if (r.iter <= iteration_) kept.append(r);
    trace_ = std::move(kept);
  }
}

Checkpoint GanTrainer::generator_checkpoint() const {
  auto s = snapshot();
  s.generator.put_block("trace", trace_.to_csv());
  return std::move(s.generator);
}

Checkpoint GanTrainer::critic_checkpoint() const { return snapshot().critic; }

Tensor GanTrainer::grid_samples() {
  NoGradGuard ng;
  return generator_.forward(grid_latent_, NormMode::eval);
}

void GanTrainer::step(const BatchSource& real_source) {
  const std::int64_t b = cfg_.batch_size;
  const DType dt = generator_.dtype();
  const std::int64_t it = iteration_ + 1;
  TraceRow row;
  row.iter = it;
  for (int k = 0; k < cfg_.n_critic; ++k) {
    Tensor real = real_source(b, streams_.stream(streams::kDataOrder));
    if (real.dtype() != dt) real = real.to(dt);
    const Tensor z = sample_latent(b, cfg_.latent_dim, streams_.stream(streams::kLatent), dt);
    Tensor fake;
    {
      NoGradGuard ng;
      fake = generator_.forward(z, NormMode::train);
    }
    const Tensor d_real = critic_.forward(real, NormMode::train);
    const Tensor d_fake = critic_.forward(fake, NormMode::train);
    if (!all_finite(d_real) || !all_finite(d_fake)) {
      throw NumericalFailure("non-finite critic scores at iteration " + std::to_string(it), it);
    }
    Tensor loss;
    if (cfg_.loss_kind == LossKind::wgan_gp) {
      Tensor penalty;
      if (cfg_.penalty_weight > 0 || k + 1 == cfg_.n_critic) {
        auto pr = gradient_penalty(critic_, real, fake, cfg_.penalty_weight,
                                   streams_.stream(streams::kEpsilon));
        last_grad_norm_ = std::accumulate(pr.grad_norms.begin(), pr.grad_norms.end(), 0.0) /
                          static_cast<double>(pr.grad_norms.size());
        if (cfg_.penalty_weight > 0) penalty = pr.penalty;
        row.penalty = pr.penalty.item();
      }
      auto w = wasserstein_objective(d_real, d_fake, penalty);
      loss = w.critic_loss;
      row.critic_obj = w.estimate;
    } else {
      auto m = minimax_loss(sigmoid(d_real), sigmoid(d_fake), cfg_.literal_minimax);
      loss = m.d_loss;
      row.critic_obj = m.objective;
    }
    check_loss(loss, "critic", it);
    const auto grads = grad(loss, critic_.params().tensors());
    check_grads(grads, "critic", it);
    adam_step(critic_.params(), grads, c_opt_);
  }
  const Tensor z = sample_latent(b, cfg_.latent_dim, streams_.stream(streams::kLatent), dt);
  const Tensor d_fake = critic_.forward(generator_.forward(z, NormMode::train), NormMode::train);
  Tensor gen_loss;
  if (cfg_.loss_kind == LossKind::wgan_gp) {
    gen_loss = -mean(d_fake);
  } else {
    const Tensor p = sigmoid(d_fake);
    gen_loss = minimax_loss(p.detach(), p, cfg_.literal_minimax).g_loss;
  }
  check_loss(gen_loss, "generator", it);
  const auto grads = grad(gen_loss, generator_.params().tensors());
  check_grads(grads, "generator", it);
  adam_step(generator_.params(), grads, g_opt_);
  row.gen_obj = gen_loss.item();
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  if (!std::isfinite(row.critic_obj) || !std::isfinite(row.penalty)) {
    throw NumericalFailure("non-finite objective at iteration " + std::to_string(it), it);
  }
  trace_.append(row);
  iteration_ = it;
}

void GanTrainer::run(std::int64_t until, const BatchSource& real, const Hooks& hooks) {
  while (iteration_ < until) {
    const auto snap = snapshot();
    try {
      step(real);
    } catch (const NumericalFailure&) {
      restore(snap);
      throw;
    }
    if (hooks.on_row) hooks.on_row(trace_.rows().back());
    if (hooks.on_samples && cfg_.sample_every > 0 && iteration_ % cfg_.sample_every == 0) {
      hooks.on_samples(iteration_, grid_samples());
    }
  }
}

// ---------------------------------------------------------------- classifier

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax expects [N,K], got " + shape_str(logits.shape()));
  const auto n = logits.dim(0), k = logits.dim(1);
  const auto v = logits.to_vector();
  std::vector<int> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto row = v.begin() + i * k;
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
  const auto pred = argmax_rows(logits);
  if (pred.size() != labels.size()) throw DimensionError("logits and labels differ in count");
  if (pred.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

std::vector<int> labels_of(std::span<const Patch> patches) {
  std::vector<int> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    if (!p.label) throw std::invalid_argument("classifier patch without a label");
    out.push_back(*p.label);
  }
  return out;
}

}  // namespace

Tensor predict_logits(Network& net, std::span<const Patch> patches, int batch_size, DType dtype) {
  NoGradGuard ng;
  std::vector<double> all;
  std::int64_t k = 0;
  for (std::size_t start = 0; start < patches.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(patches.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&patches[i].image);
    const Tensor logits = net.forward(batch_images(imgs, dtype), NormMode::eval);
    k = logits.dim(1);
    const auto v = logits.to_vector();
    all.insert(all.end(), v.begin(), v.end());
  }
  return Tensor::from_vector({static_cast<std::int64_t>(patches.size()), k}, std::move(all), dtype);
}

std::vector<EpochRecord> train_classifier(Network& net, std::span<const Patch> train,
                                          std::span<const Patch> test, const TrainConfig& cfg,
                                          const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train.empty() || test.empty()) throw std::invalid_argument("empty training or test split");
  const auto train_labels = labels_of(train);
  const auto test_labels = labels_of(test);
  const auto n_classes = net.output_shape().at(0);
  for (int l : train_labels) {
    if (l < 0 || l >= n_classes) throw std::invalid_argument("label " + std::to_string(l) + " out of range");
  }
  RngStreams streams(cfg.seed);
  AdamState opt = AdamState::fresh(
      net.params(), AdamConfig{cfg.lr_classifier, cfg.classifier_beta1, cfg.classifier_beta2, 1e-8});
  const DType dt = net.dtype();
  std::vector<std::size_t> order(train.size());
  std::vector<EpochRecord> history;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng& shuffle = streams.stream(streams::kDataOrder);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double loss_sum = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      if (end - start < 2) break;  // batch statistics need two samples
      std::vector<Image> imgs;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const Patch& p = train[order[i]];
        imgs.push_back(cfg.augment ? augment(p, streams.stream(streams::kAugment), cfg.augment_config).image
                                   : p.image);
        labels.push_back(*p.label);
      }
      std::vector<const Image*> ptrs;
      for (const auto& im : imgs) ptrs.push_back(&im);
      const Tensor logits = net.forward(batch_images(ptrs, dt), NormMode::train,
                                        &streams.stream(streams::kDropout));
      const Tensor loss = cross_entropy(logits, labels);
      check_loss(loss, "classifier", epoch);
      const auto grads = grad(loss, net.params().tensors());
      check_grads(grads, "classifier", epoch);
      adam_step(net.params(), grads, opt);
      loss_sum += loss.item();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    rec.train_accuracy = accuracy(predict_logits(net, train, 64, dt), train_labels);
    rec.test_accuracy = accuracy(predict_logits(net, test, 64, dt), test_labels);
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

// ---------------------------------------------------------------- overfit demo

std::string OverfitReport::table() const {
  std::string out = "width,seed,train_acc,test_acc\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.2f,%llu,%.4f,%.4f\n", r.width_scale,
                  static_cast<unsigned long long>(r.seed), r.train_accuracy, r.test_accuracy);
    out += line;
  }
  out += "# width,mean_train,mean_test,std_test\n";
  for (const auto& s : summary) {
    std::snprintf(line, sizeof line, "# %.2f,%.4f,%.4f,%.4f\n", s.width_scale, s.mean_train,
                  s.mean_test, s.std_test);
    out += line;
  }
  std::snprintf(line, sizeof line, "# half_not_worse_fraction,%.4f\n", half_not_worse_fraction);
  out += line;
  return out;
}

OverfitReport overfit_demo(const OverfitConfig& cfg,
                           const std::function<void(const OverfitRow&)>& on_row) {
  if (cfg.seeds < 1 || cfg.train_size < 2 || cfg.test_size < 1 || cfg.widths.empty()) {
    throw std::invalid_argument("bad overfit demo configuration");
  }
  OverfitReport report;
  for (int s = 0; s < cfg.seeds; ++s) {
    const auto seed = cfg.train.seed + static_cast<std::uint64_t>(s);
    Rng data(derive_seed(seed, "overfit-data"));
    const auto train = synth_labeled_set(cfg.train_size, cfg.patch_size, data);
    const auto test = synth_labeled_set(cfg.test_size, cfg.patch_size, data);
    for (double w : cfg.widths) {
      NetworkConfig nc = cfg.network;
      nc.input_size = cfg.patch_size;
      nc.width_scale = w;
      Rng init(derive_seed(seed, streams::kInit));
      Network net = build_classifier(nc, 2, init, cfg.train.dtype);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      const auto hist = train_classifier(net, train, test, tc);
      OverfitRow row{w, seed, hist.empty() ? 0.0 : hist.back().train_accuracy,
                     hist.empty() ? 0.0 : hist.back().test_accuracy};
      report.rows.push_back(row);
      if (on_row) on_row(row);
    }
  }
  for (double w : cfg.widths) {
    std::vector<double> test, train;
    for (const auto& r : report.rows) {
      if (r.width_scale == w) {
        test.push_back(r.test_accuracy);
        train.push_back(r.train_accuracy);
      }
    }
    const double n = static_cast<double>(test.size());
    const double mt = std::accumulate(test.begin(), test.end(), 0.0) / n;
    const double mtr = std::accumulate(train.begin(), train.end(), 0.0) / n;
    double var = 0;
    for (double v : test) var += (v - mt) * (v - mt);
    report.summary.push_back({w, mt, test.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0, mtr});
  }
  const auto [small, large] = std::minmax_element(cfg.widths.begin(), cfg.widths.end());
  int not_worse = 0;
  for (int s = 0; s < cfg.seeds; ++s) {
    double a = 0, b = 0;
    for (const auto& r : report.rows) {
      if (r.seed != cfg.train.seed + static_cast<std::uint64_t>(s)) continue;
      if (r.width_scale == *small) a = r.test_accuracy;
      if (r.width_scale == *large) b = r.test_accuracy;
    }
    not_worse += a >= b;
  }
  report.half_not_worse_fraction = static_cast<double>(not_worse) / cfg.seeds;
  return report;
}

}  // namespace embryoforge
