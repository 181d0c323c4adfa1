// embryoforge command-line driver.
//
// Exit codes: 0 success, 1 input or configuration error, 2 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "embryoforge/checkpoint.hpp"
#include "embryoforge/gan.hpp"
#include "embryoforge/gradcheck.hpp"
#include "embryoforge/manifest.hpp"
#include "embryoforge/pgm.hpp"
#include "embryoforge/pipeline.hpp"
#include "embryoforge/synth.hpp"
#include "embryoforge/toy.hpp"

using namespace embryoforge;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNumericalFailure = 2;

DType dtype_of(const std::string& name) { return name == "f64" ? DType::f64 : DType::f32; }

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Every option of the invoked subcommand, defaults included, under its
// section name. Passing the file back via --config reproduces the run.
void write_resolved_config(const CLI::App& app, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const CLI::App* cmd = app.get_subcommands().front();
  write_text(out_dir / "resolved_config.toml",
             "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false));
}

std::vector<Patch> load_patch_dir(const fs::path& dir) {
  std::vector<Patch> out;
  for (const auto& e : read_manifest(dir / "manifest.jsonl")) {
    if (e.role != EntryRole::patch) continue;
    Patch p;
    p.image = read_pgm(dir / e.path);
    p.provenance = {e.embryo_id, e.time_min, e.slice_index.value_or(0), e.origin_x.value_or(0),
                    e.origin_y.value_or(0)};
    p.label = e.label;
    out.push_back(std::move(p));
  }
  if (out.empty()) throw std::invalid_argument("no patches listed in " + (dir / "manifest.jsonl").string());
  return out;
}

void write_montage(const fs::path& path, const std::vector<Image>& images, int columns) {
  fs::create_directories(path.parent_path());
  write_pgm(path, montage(images, std::max(1, std::min<int>(columns, static_cast<int>(images.size())))));
}

void write_trace(const fs::path& out, const LossTrace& trace) {
  write_text(out / "trace.csv", trace.to_csv());
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  fs::path out;
  SynthConfig corpus;
  std::uint64_t seed = 0;
  int labeled = 0;
  int patch = 32;
};

int cmd_synth(const CLI::App& app, const SynthOpts& o) {
  write_resolved_config(app, o.out);
  if (o.labeled > 0) {
    Rng rng(derive_seed(o.seed, "labeled"));
    const auto set = synth_labeled_set(o.labeled, o.patch, rng, o.corpus.bit_depth);
    fs::create_directories(o.out / "patches");
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < set.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "patches/l%05zu.pgm", i);
      write_pgm(o.out / name, set[i].image);
      ManifestEntry e;
      e.path = name;
      e.role = EntryRole::patch;
      e.label = set[i].label;
      e.seed_used = o.seed;
      entries.push_back(std::move(e));
    }
    write_manifest(o.out / "manifest.jsonl", entries);
    std::cout << "wrote " << entries.size() << " labeled patches to " << o.out.string() << "\n";
    return kOk;
  }
  const auto entries = write_synth_corpus(o.out, o.corpus, o.seed);
  std::cout << "wrote " << entries.size() << " stacks to " << o.out.string() << "\n";
  return kOk;
}

// ----------------------------------------------------------- preprocess

struct PreprocessOpts {
  fs::path input;
  fs::path manifest;
  fs::path out;
  std::string slices = "9:13";
  PreprocessConfig cfg;
};

int cmd_preprocess(const CLI::App& app, PreprocessOpts o) {
  std::tie(o.cfg.slice_lo, o.cfg.slice_hi) = parse_slice_range(o.slices);
  o.cfg.validate();
  const fs::path manifest = o.manifest.empty() ? o.input / "manifest.jsonl" : o.manifest;
  const auto entries = read_manifest(manifest, false);
  write_resolved_config(app, o.out);
  const auto report = preprocess_corpus(entries, o.input, o.out, o.cfg);
  std::cout << report.stacks_ok << " stacks, " << report.patches.size() << " patches written to "
            << o.out.string() << "\n";
  if (report.failures.empty()) return kOk;
  std::cerr << report.failures.size() << " stack(s) failed:\n";
  for (const auto& f : report.failures) std::cerr << "  " << f.path << ": " << f.error << "\n";
  return kInputError;
}

// ------------------------------------------------------------ train-gan

struct GanOpts {
  fs::path data;
  fs::path out;
  bool toy = false;
  double toy_mean = 3.0;
  double toy_std = 0.5;
  TrainConfig train;
  std::string loss = "wgan_gp";
  std::string dtype = "auto";
  NetworkConfig net;
  std::string critic_norm = "none";
  std::int64_t checkpoint_every = 500;
  bool resume = false;
};

int cmd_train_gan(const CLI::App& app, GanOpts o) {
  TrainConfig cfg = o.train;
  cfg.loss_kind = parse_loss_kind(o.loss);
  cfg.dtype = o.dtype == "auto" ? (o.toy ? DType::f64 : DType::f32) : dtype_of(o.dtype);
  o.net.critic_norm = parse_critic_norm(o.critic_norm);

  ToyConfig toy;
  BatchSource source;
  if (o.toy) {
    toy.mean = o.toy_mean;
    toy.stddev = o.toy_std;
    if (cfg.latent_dim == 0) cfg.latent_dim = toy.latent_dim;
    toy.latent_dim = cfg.latent_dim;
    toy.validate();
    source = toy_source(toy, cfg.dtype);
  } else {
    if (o.data.empty()) throw std::invalid_argument("train-gan needs --data DIR or --toy");
    if (cfg.latent_dim == 0) cfg.latent_dim = 128;
    const auto patches = load_patch_dir(o.data);
    std::vector<const Image*> ptrs;
    for (const auto& p : patches) ptrs.push_back(&p.image);
    o.net.input_size = patches.front().image.width;
    source = tensor_source(batch_images(ptrs, cfg.dtype));
  }
  cfg.validate();
  o.net.validate();
  write_resolved_config(app, o.out);

  const fs::path gen_path = o.out / "generator.ckpt";
  const fs::path critic_path = o.out / "critic.ckpt";
  auto make_trainer = [&]() -> GanTrainer {
    if (o.resume && fs::exists(gen_path) && fs::exists(critic_path)) {
      std::cout << "resuming from " << gen_path.string() << "\n";
      return GanTrainer::resume(load_checkpoint(gen_path), load_checkpoint(critic_path), cfg);
    }
    if (o.toy) return make_toy_trainer(toy, cfg);
    RngStreams s(cfg.seed);
    Network g = build_generator(cfg.latent_dim, o.net, s.stream(streams::kInit), cfg.dtype);
    Network d = build_critic(o.net, s.stream(streams::kInit), cfg.dtype);
    return GanTrainer(std::move(g), std::move(d), cfg);
  };
  GanTrainer trainer = make_trainer();

  GanTrainer::Hooks hooks;
  if (!o.toy) {
    hooks.on_samples = [&](std::int64_t it, const Tensor& samples) {
      char name[64];
      std::snprintf(name, sizeof name, "samples/generated_iter_%06lld.pgm", static_cast<long long>(it));
      write_montage(o.out / name, unbatch_images(samples), cfg.sample_grid);
    };
  }
  hooks.on_row = [&](const TraceRow& r) {
    if (r.iter % 100 == 0 || r.iter == cfg.iterations)
      std::printf("iter %lld  critic %.6g  gen %.6g  penalty %.6g\n", static_cast<long long>(r.iter),
                  r.critic_obj, r.gen_obj, r.penalty);
  };

  auto save = [&](const fs::path& g, const fs::path& c) {
    save_checkpoint(g, trainer.generator_checkpoint());
    save_checkpoint(c, trainer.critic_checkpoint());
    write_trace(o.out, trainer.trace());
  };

  try {
    while (trainer.iteration() < cfg.iterations) {
      std::int64_t target = cfg.iterations;
      if (o.checkpoint_every > 0)
        target = std::min(target, (trainer.iteration() / o.checkpoint_every + 1) * o.checkpoint_every);
      trainer.run(target, source, hooks);
      save(gen_path, critic_path);
    }
    save(gen_path, critic_path);
  } catch (const NumericalFailure& e) {
    const fs::path last_gen = o.out / "last_good_generator.ckpt";
    save(last_gen, o.out / "last_good_critic.ckpt");
    std::cerr << "numerical failure at iteration " << e.iteration() << ": " << e.what() << "\n"
              << "last good checkpoint: " << last_gen.string() << "\n";
    return kNumericalFailure;
  }

  if (o.toy) {
    const auto m = sample_moments(trainer.generator(), cfg.latent_dim, 4000, derive_seed(cfg.seed, "moments"));
    std::printf("generated mean %.4f  std %.4f  (target %.4f, %.4f)\n", m.mean, m.stddev, toy.mean,
                toy.stddev);
  }
  std::cout << "checkpoints and trace written to " << o.out.string() << "\n";
  return kOk;
}

// ----------------------------------------------------- train-classifier

struct ClassifierOpts {
  fs::path data;
  fs::path test_data;
  fs::path out;
  int train_size = 500;
  int test_size = 100;
  int patch = 32;
  TrainConfig train;
  NetworkConfig net;
  bool no_augment = false;
  std::string dtype = "f32";
};

int cmd_train_classifier(const CLI::App& app, ClassifierOpts o) {
  TrainConfig cfg = o.train;
  cfg.dtype = dtype_of(o.dtype);
  cfg.augment = !o.no_augment;
  o.net.dropout_rate = cfg.dropout_rate;

  std::vector<Patch> train, test;
  if (!o.data.empty()) {
    if (o.test_data.empty()) throw std::invalid_argument("--data needs a matching --test-data");
    train = load_patch_dir(o.data);
    test = load_patch_dir(o.test_data);
    for (const auto* set : {&train, &test})
      for (const auto& p : *set)
        if (!p.label) throw std::invalid_argument("classifier data must be labeled");
  } else {
    Rng rng(derive_seed(cfg.seed, "classifier-data"));
    train = synth_labeled_set(o.train_size, o.patch, rng);
    test = synth_labeled_set(o.test_size, o.patch, rng);
  }
  o.net.input_size = train.front().image.width;
  cfg.validate();
  o.net.validate();
  write_resolved_config(app, o.out);

  int n_classes = 2;
  for (const auto& p : train) n_classes = std::max(n_classes, *p.label + 1);
  RngStreams s(cfg.seed);
  Network net = build_classifier(o.net, n_classes, s.stream(streams::kInit), cfg.dtype);

  std::vector<Image> shown;
  for (std::size_t i = 0; i < train.size() && i < 64; ++i) shown.push_back(train[i].image);
  write_montage(o.out / "samples" / "real_train_patches.pgm", shown, 8);

  std::string csv = "epoch,train_loss,train_accuracy,test_accuracy\n";
  try {
    train_classifier(net, train, test, cfg, [&](const EpochRecord& r) {
      char line[160];
      std::snprintf(line, sizeof line, "%d,%.17g,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_accuracy,
                    r.test_accuracy);
      csv += line;
      std::printf("epoch %d  loss %.4f  train %.3f  test %.3f\n", r.epoch, r.train_loss, r.train_accuracy,
                  r.test_accuracy);
      std::fflush(stdout);
    });
  } catch (const NumericalFailure& e) {
    write_text(o.out / "epochs.csv", csv);
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
  write_text(o.out / "epochs.csv", csv);
  Checkpoint ckpt;
  pack_network(ckpt, "classifier", net);
  save_checkpoint(o.out / "classifier.ckpt", ckpt);
  std::cout << "checkpoint and trace written to " << o.out.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------- generate

struct GenerateOpts {
  fs::path checkpoint;
  fs::path out;
  int n = 64;
  std::uint64_t seed = 0;
  int columns = 8;
};

int cmd_generate(const CLI::App& app, const GenerateOpts& o) {
  if (o.n < 1) throw std::invalid_argument("--n must be positive");
  Network gen = unpack_network(load_checkpoint(o.checkpoint), "generator");
  if (gen.input_shape().size() != 1) throw std::invalid_argument("checkpoint does not hold a latent-input generator");
  const int latent = static_cast<int>(gen.input_shape()[0]);
  write_resolved_config(app, o.out);

  Rng rng(derive_seed(o.seed, streams::kLatent));
  NoGradGuard ng;
  const Tensor samples = gen.forward(sample_latent(o.n, latent, rng, gen.dtype()), NormMode::eval);
  if (samples.rank() == 2) {
    std::string csv = "value\n";
    char line[64];
    for (double v : samples.to_vector()) {
      std::snprintf(line, sizeof line, "%.17g\n", v);
      csv += line;
    }
    write_text(o.out / "samples.csv", csv);
    std::cout << "wrote " << o.n << " samples to " << (o.out / "samples.csv").string() << "\n";
    return kOk;
  }
  const auto images = unbatch_images(samples);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu.pgm", i);
    write_pgm(o.out / name, images[i]);
  }
  write_montage(o.out / "generated_montage.pgm", images, o.columns);
  std::cout << "wrote " << images.size() << " images and generated_montage.pgm to " << o.out.string() << "\n";
  return kOk;
}

// --------------------------------------------------------- overfit-demo

struct OverfitOpts {
  fs::path out;
  OverfitConfig cfg;
  std::string dtype = "f32";
};

int cmd_overfit(const CLI::App& app, OverfitOpts o) {
  o.cfg.train.dtype = dtype_of(o.dtype);
  o.cfg.network.input_size = o.cfg.patch_size;
  o.cfg.network.dropout_rate = o.cfg.train.dropout_rate;
  o.cfg.train.validate();
  o.cfg.network.validate();
  write_resolved_config(app, o.out);
  const auto report = overfit_demo(o.cfg, [](const OverfitRow& r) {
    std::printf("width %.2f  seed %llu  train %.3f  test %.3f\n", r.width_scale,
                static_cast<unsigned long long>(r.seed), r.train_accuracy, r.test_accuracy);
    std::fflush(stdout);
  });
  const std::string table = report.table();
  write_text(o.out / "overfit.csv", table);
  std::cout << table;
  return kOk;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckOpts {
  int cases = 20;
  double threshold = 1e-5;
  std::uint64_t seed = 2024;
};

int cmd_gradcheck(const GradcheckOpts& o) {
  bool all = true;
  std::printf("%-20s %6s %14s  %s\n", "op", "cases", "max_rel_error", "status");
  for (const auto& r : run_gradcheck(o.cases, o.threshold, o.seed)) {
    std::printf("%-20s %6d %14.3e  %s\n", r.op.c_str(), r.cases, r.max_rel_error, r.passed ? "ok" : "FAIL");
    all = all && r.passed;
  }
  std::printf("%s (threshold %.1e)\n", all ? "all ops passed" : "some ops FAILED", o.threshold);
  return all ? kOk : kNumericalFailure;
}

void add_dtype(CLI::App* cmd, std::string& target) {
  cmd->add_option("--dtype", target, "Floating-point precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic embryo membrane pipeline: preprocessing, GAN and classifier training"};
  app.set_config("--config", "", "TOML config file; command-line flags override its values");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 input/config error, 2 numerical failure.");

  SynthOpts synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic raw-stack corpus or a labeled patch set");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--embryos", synth.corpus.n_embryos, "Number of embryos")->capture_default_str();
  c_synth->add_option("--stacks", synth.corpus.stacks_per, "Stacks (time points) per embryo")->capture_default_str();
  c_synth->add_option("--size", synth.corpus.size, "Stack width and height in pixels")->capture_default_str();
  c_synth->add_option("--slices", synth.corpus.n_slices, "Slices per stack")->capture_default_str();
  c_synth->add_option("--first-time", synth.corpus.first_time_min, "Time stamp of the first stack (min)")->capture_default_str();
  c_synth->add_option("--bit-depth", synth.corpus.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}))->capture_default_str();
  c_synth->add_option("--spacing", synth.corpus.cell_spacing, "Cell spacing as a fraction of size")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
  c_synth->add_option("--labeled", synth.labeled, "Write N labeled rosette/non-rosette patches instead")->capture_default_str();
  c_synth->add_option("--patch", synth.patch, "Labeled patch size")->capture_default_str();

  PreprocessOpts pre;
  auto* c_pre = app.add_subcommand("preprocess", "Median filter, brightness stretch and patch extraction");
  c_pre->add_option("--input", pre.input, "Corpus root; manifest paths are relative to it")->required();
  c_pre->add_option("--manifest", pre.manifest, "Raw-stack manifest (default INPUT/manifest.jsonl)");
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--patch", pre.cfg.patch_size, "Patch size")->capture_default_str();
  c_pre->add_option("--slices", pre.slices, "Inclusive 0-based slice range lo:hi")->capture_default_str();
  c_pre->add_option("--per-slice", pre.cfg.per_slice, "Patches per slice")->capture_default_str();
  c_pre->add_option("--seed", pre.cfg.seed, "Master seed")->capture_default_str();
  c_pre->add_option("--median-radius", pre.cfg.median_radius, "3-D median filter radius")->capture_default_str();
  c_pre->add_option("--p-low", pre.cfg.p_low, "Lower brightness percentile")->capture_default_str();
  c_pre->add_option("--p-high", pre.cfg.p_high, "Upper brightness percentile")->capture_default_str();
  c_pre->add_option("--threads", pre.cfg.threads, "Worker threads (0 = auto, capped by EMBRYOFORGE_THREADS)")->capture_default_str();

  GanOpts gan;
  gan.train.latent_dim = 0;
  auto* c_gan = app.add_subcommand("train-gan", "Adversarial training on patches or the 1-D toy target");
  c_gan->add_option("--data", gan.data, "Patch directory with manifest.jsonl");
  c_gan->add_flag("--toy", gan.toy, "Train on a 1-D Gaussian instead of images");
  c_gan->add_option("--toy-mean", gan.toy_mean, "Toy target mean")->capture_default_str();
  c_gan->add_option("--toy-std", gan.toy_std, "Toy target standard deviation")->capture_default_str();
  c_gan->add_option("--out", gan.out, "Output directory")->required();
  c_gan->add_option("--iterations", gan.train.iterations, "Generator iterations")->capture_default_str();
  c_gan->add_option("--batch", gan.train.batch_size, "Batch size")->capture_default_str();
  c_gan->add_option("--n-critic", gan.train.n_critic, "Critic steps per generator step")->capture_default_str();
  c_gan->add_option("--lambda", gan.train.penalty_weight, "Gradient penalty weight")->capture_default_str();
  c_gan->add_option("--lr", gan.train.lr_gan, "Adam learning rate")->capture_default_str();
  c_gan->add_option("--beta1", gan.train.gan_beta1, "Adam beta1")->capture_default_str();
  c_gan->add_option("--beta2", gan.train.gan_beta2, "Adam beta2")->capture_default_str();
  c_gan->add_option("--latent", gan.train.latent_dim, "Latent size (0 = 128 for images, 8 for --toy)")->capture_default_str();
  c_gan->add_option("--seed", gan.train.seed, "Master seed")->capture_default_str();
  c_gan->add_option("--loss", gan.loss, "Objective")->check(CLI::IsMember({"wgan_gp", "minimax"}))->capture_default_str();
  c_gan->add_flag("--literal-minimax", gan.train.literal_minimax, "Use log(1 - D(G(z))) for the generator");
  c_gan->add_option("--dtype", gan.dtype, "Floating-point precision (auto = f64 for --toy, else f32)")
      ->check(CLI::IsMember({"auto", "f32", "f64"}))
      ->capture_default_str();
  c_gan->add_option("--base-filters", gan.net.base_filters, "Channels of the first conv layer")->capture_default_str();
  c_gan->add_option("--hidden", gan.net.hidden_units, "Dense hidden units")->capture_default_str();
  c_gan->add_option("--critic-norm", gan.critic_norm, "Critic normalization")
      ->check(CLI::IsMember({"none", "layer_norm", "batch_norm"}))->capture_default_str();
  c_gan->add_option("--sample-every", gan.train.sample_every, "Sample montage cadence (0 = off)")->capture_default_str();
  c_gan->add_option("--sample-grid", gan.train.sample_grid, "Montage side length")->capture_default_str();
  c_gan->add_option("--checkpoint-every", gan.checkpoint_every, "Checkpoint cadence (0 = end only)")->capture_default_str();
  c_gan->add_flag("--resume", gan.resume, "Continue from OUT/generator.ckpt and OUT/critic.ckpt");

  ClassifierOpts cls;
  auto* c_cls = app.add_subcommand("train-classifier", "Rosette classifier training");
  c_cls->add_option("--data", cls.data, "Labeled training patch directory");
  c_cls->add_option("--test-data", cls.test_data, "Labeled test patch directory");
  c_cls->add_option("--train-size", cls.train_size, "Synthetic training set size when --data is absent")->capture_default_str();
  c_cls->add_option("--test-size", cls.test_size, "Synthetic test set size when --data is absent")->capture_default_str();
  c_cls->add_option("--patch", cls.patch, "Synthetic patch size")->capture_default_str();
  c_cls->add_option("--out", cls.out, "Output directory")->required();
  c_cls->add_option("--epochs", cls.train.epochs, "Epochs")->capture_default_str();
  c_cls->add_option("--batch", cls.train.batch_size, "Batch size")->capture_default_str();
  c_cls->add_option("--lr", cls.train.lr_classifier, "Adam learning rate")->capture_default_str();
  c_cls->add_option("--dropout", cls.train.dropout_rate, "Dropout rate")->capture_default_str();
  c_cls->add_option("--seed", cls.train.seed, "Master seed")->capture_default_str();
  c_cls->add_option("--base-filters", cls.net.base_filters, "Channels of the first conv layer")->capture_default_str();
  c_cls->add_option("--hidden", cls.net.hidden_units, "Dense hidden units")->capture_default_str();
  c_cls->add_option("--width", cls.net.width_scale, "Width multiplier")->capture_default_str();
  c_cls->add_flag("--no-augment", cls.no_augment, "Disable flips and brightness/contrast jitter");
  add_dtype(c_cls, cls.dtype);

  GenerateOpts gen;
  auto* c_gen = app.add_subcommand("generate", "Sample a trained generator");
  c_gen->add_option("--checkpoint", gen.checkpoint, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Latent seed")->capture_default_str();
  c_gen->add_option("--columns", gen.columns, "Montage columns")->capture_default_str();

  OverfitOpts ov;
  auto* c_ov = app.add_subcommand("overfit-demo", "Full- versus half-width classifier on a small training set");
  c_ov->add_option("--out", ov.out, "Output directory")->required();
  c_ov->add_option("--seeds", ov.cfg.seeds, "Number of seeds")->capture_default_str();
  c_ov->add_option("--train-size", ov.cfg.train_size, "Training samples")->capture_default_str();
  c_ov->add_option("--test-size", ov.cfg.test_size, "Held-out samples")->capture_default_str();
  c_ov->add_option("--patch", ov.cfg.patch_size, "Patch size")->capture_default_str();
  c_ov->add_option("--epochs", ov.cfg.train.epochs, "Epochs")->capture_default_str();
  c_ov->add_option("--batch", ov.cfg.train.batch_size, "Batch size")->capture_default_str();
  c_ov->add_option("--lr", ov.cfg.train.lr_classifier, "Adam learning rate")->capture_default_str();
  c_ov->add_option("--seed", ov.cfg.train.seed, "First seed")->capture_default_str();
  c_ov->add_option("--base-filters", ov.cfg.network.base_filters, "Full-width first conv channels")->capture_default_str();
  c_ov->add_option("--hidden", ov.cfg.network.hidden_units, "Full-width dense hidden units")->capture_default_str();
  c_ov->add_flag("--augment", ov.cfg.train.augment, "Enable flips and brightness/contrast jitter");
  add_dtype(c_ov, ov.dtype);

  GradcheckOpts gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  c_gc->add_option("--cases", gc.cases, "Random cases per op")->capture_default_str();
  c_gc->add_option("--threshold", gc.threshold, "Maximum relative error")->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }

  try {
    if (*c_synth) return cmd_synth(app, synth);
    if (*c_pre) return cmd_preprocess(app, pre);
    if (*c_gan) return cmd_train_gan(app, gan);
    if (*c_cls) return cmd_train_classifier(app, cls);
    if (*c_gen) return cmd_generate(app, gen);
    if (*c_ov) return cmd_overfit(app, ov);
    if (*c_gc) return cmd_gradcheck(gc);
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
