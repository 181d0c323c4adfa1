#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <fstream>

#include "embryoforge/checkpoint.hpp"
#include "embryoforge/models.hpp"
#include "embryoforge/ops.hpp"
#include "embryoforge/pgm.hpp"
#include "embryoforge/synth.hpp"
#include "oracles.hpp"

using namespace embryoforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("embryoforge_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Pgm, HandEncodedFixture) {
  auto bytes = bytes_of("P5\n2 2\n255\n");
  for (std::uint8_t v : {0, 1, 2, 3}) bytes.push_back(v);
  const Image img = decode_pgm(bytes);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 2);
  EXPECT_EQ(img.at(0, 0), 0);
  EXPECT_EQ(img.at(1, 0), 1);
  EXPECT_EQ(img.at(0, 1), 2);
  EXPECT_EQ(img.at(1, 1), 3);
  EXPECT_EQ(encode_pgm(img), bytes);
}

TEST(Pgm, SixteenBitIsBigEndian) {
  Image img = Image::blank(2, 1, 16);
  img.pixels = {0x0102, 0xfffe};
  const auto bytes = encode_pgm(img);
  auto expect = bytes_of("P5\n2 1\n65535\n");
  for (std::uint8_t v : {0x01, 0x02, 0xff, 0xfe}) expect.push_back(v);
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(decode_pgm(bytes), img);
}

TEST(Pgm, RoundtripRandom) {
  Rng rng(17);
  for (int depth : {8, 16}) {
    Image img = Image::blank(17, 13, depth);
    for (auto& p : img.pixels) p = static_cast<std::uint16_t>(rng.below(img.max_value() + 1));
    const auto dir = scratch("pgm");
    write_pgm(dir / "a.pgm", img);
    EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
    EXPECT_EQ(read_file(dir / "a.pgm"), encode_pgm(img));
  }
}

TEST(Pgm, HeaderCommentsAccepted) {
  auto bytes = bytes_of("P5 # made by hand\n1 1 255\n");
  bytes.push_back(9);
  EXPECT_EQ(decode_pgm(bytes).pixels[0], 9);
}

TEST(Pgm, ErrorsCarryOffsets) {
  try {
    decode_pgm(bytes_of("P5\n2 2\n1024\n...."));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 7u);
    EXPECT_NE(std::string(e.what()).find("1024"), std::string::npos);
  }
  auto trunc = bytes_of("P5\n2 2\n255\n");
  trunc.push_back(0);
  EXPECT_THROW(decode_pgm(trunc), ParseError);
  EXPECT_THROW(decode_pgm(bytes_of("P2\n1 1\n255\n0")), ParseError);
  try {
    decode_pgm(bytes_of("P5\nx 2\n255\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(Pgm, StackRoundtrip) {
  Rng rng(2);
  ImageStack s = ImageStack::blank(5, 4, 3);
  for (auto& v : s.voxels) v = static_cast<std::uint16_t>(rng.below(256));
  const auto dir = scratch("stack");
  write_stack_pgm(dir / "s.pgm", s);
  EXPECT_EQ(read_stack_pgm(dir / "s.pgm", 3), s);
  EXPECT_THROW(read_stack_pgm(dir / "s.pgm", 5), std::runtime_error);
}

TEST(Montage, LayoutAndSeparators) {
  std::vector<Image> tiles;
  for (int i = 0; i < 5; ++i) {
    Image t = Image::blank(3, 2);
    std::fill(t.pixels.begin(), t.pixels.end(), static_cast<std::uint16_t>(10 * i));
    tiles.push_back(t);
  }
  const Image m = montage(tiles, 3);
  EXPECT_EQ(m.width, 3 * 3 + 2 * 2);
  EXPECT_EQ(m.height, 2 * 2 + 2);
  EXPECT_EQ(m.at(0, 0), 0);
  EXPECT_EQ(m.at(3, 0), 255);   // separator
  EXPECT_EQ(m.at(5, 1), 10);    // tile 1
  EXPECT_EQ(m.at(0, 4), 30);    // tile 3, second row
  EXPECT_EQ(m.at(12, 5), 255);  // empty slot
}

TEST(Manifest, JsonLinesRoundtripPreservesOrder) {
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 4; ++i) {
    ManifestEntry e;
    e.path = "patches/p" + std::to_string(3 - i) + ".pgm";
    e.role = i == 0 ? EntryRole::raw_stack : EntryRole::patch;
    e.embryo_id = i;
    e.time_min = 61 + i;
    if (i > 0) e.slice_index = 8 + i;
    e.bbox = BoundingBox{i, 2, 30, 31};
    if (i % 2) e.label = i;
    e.seed_used = 0xfedcba9876543210ull + i;
    if (i == 0) e.n_slices = 30;
    if (i > 0) {
      e.origin_x = 4;
      e.origin_y = 5;
    }
    entries.push_back(e);
  }
  const auto text = serialize_manifest(entries);
  EXPECT_EQ(parse_manifest(text), entries);
  EXPECT_EQ(serialize_manifest(parse_manifest(text)), text);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Manifest, ValidatesPathsOnLoad) {
  const auto dir = scratch("manifest");
  ManifestEntry e;
  e.path = "a.pgm";
  write_manifest(dir / "m.jsonl", {e, e});
  EXPECT_THROW(read_manifest(dir / "m.jsonl", false), std::invalid_argument);
  write_manifest(dir / "m.jsonl", {e});
  EXPECT_THROW(read_manifest(dir / "m.jsonl"), std::invalid_argument);
  write_pgm(dir / "a.pgm", Image::blank(1, 1));
  EXPECT_EQ(read_manifest(dir / "m.jsonl").size(), 1u);
}

namespace {

Checkpoint sample_checkpoint(Network& net, RngStreams& streams) {
  AdamState adam = AdamState::fresh(net.params(), AdamConfig{2e-4, 0.0, 0.9, 1e-8});
  adam.step = 7;
  for (auto& m : adam.m) m = full_like(m, 0.25);
  Checkpoint ck;
  pack_network(ck, "critic", net, &adam);
  streams.stream(streams::kLatent).normal();
  streams.stream(streams::kEpsilon).uniform();
  pack_rng(ck, streams);
  pack_iteration(ck, 1234);
  return ck;
}

}  // namespace

TEST(CheckpointFormat, HeaderLayout) {
  Checkpoint ck;
  ck.tensors.emplace_back("t", Tensor::from_vector({2}, {1.0, -2.0}));
  ck.put_block("b", "xy");
  const auto bytes = encode_checkpoint(ck);
  std::vector<std::uint8_t> expect = {'N', 'N', 'C', 'K', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
                                      1, 0, 't', 1, 1, 2, 0, 0, 0};                // name, f64, rank 1, dim 2
  for (double d : {1.0, -2.0}) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) expect.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  for (int b : {1, 0, 0, 0, 1, 0, int('b'), 2, 0, 0, 0, int('x'), int('y')}) expect.push_back(static_cast<std::uint8_t>(b));
  EXPECT_EQ(bytes, expect);
}

TEST(CheckpointFormat, SaveLoadSaveIsByteIdentical) {
  Rng init(3);
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.base_filters = 4;
  cfg.hidden_units = 8;
  cfg.critic_norm = CriticNorm::batch_norm;
  Network net = build_critic(cfg, init, DType::f32);
  RngStreams streams(99);
  const auto ck = sample_checkpoint(net, streams);
  const auto dir = scratch("ckpt");
  save_checkpoint(dir / "a.nnck", ck);
  const auto loaded = load_checkpoint(dir / "a.nnck");
  save_checkpoint(dir / "b.nnck", loaded);
  EXPECT_EQ(read_file(dir / "a.nnck"), read_file(dir / "b.nnck"));

  Network back = unpack_network(loaded, "critic");
  Rng xr(5);
  Tensor x = oracle::random_tensor({3, 1, 16, 16}, xr).to(DType::f32);
  const auto y0 = net.forward(x, NormMode::eval).to_vector();
  const auto y1 = back.forward(x, NormMode::eval).to_vector();
  EXPECT_EQ(y0, y1);

  const auto adam = unpack_adam(loaded, "critic", back);
  ASSERT_TRUE(adam.has_value());
  EXPECT_EQ(adam->step, 7);
  EXPECT_EQ(adam->config.lr, 2e-4);
  EXPECT_EQ(adam->config.beta1, 0.0);
  EXPECT_EQ(adam->m[0].value(0), 0.25);
  EXPECT_EQ(unpack_iteration(loaded), 1234);
  RngStreams restored = unpack_rng(loaded);
  EXPECT_EQ(restored.master(), 99u);
  EXPECT_EQ(restored.stream(streams::kLatent).next_u64(),
            streams.stream(streams::kLatent).next_u64());
}

TEST(CheckpointFormat, EveryTruncationFailsAndNamesRecord) {
  Rng init(3);
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.base_filters = 2;
  cfg.hidden_units = 4;
  Network net = build_critic(cfg, init, DType::f64);
  RngStreams streams(1);
  const auto bytes = encode_checkpoint(sample_checkpoint(net, streams));
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    EXPECT_THROW(decode_checkpoint(std::span(bytes.data(), cut)), CheckpointError) << cut;
  }
  try {
    decode_checkpoint(std::span(bytes.data(), bytes.size() - 1));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("block"), std::string::npos) << e.what();
  }
  try {
    decode_checkpoint(std::span(bytes.data(), 40));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("tensor 0 'critic.param.conv1.kernel'"), std::string::npos)
        << e.what();
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
}

TEST(Synth, DeterministicAndWideDynamicRange) {
  SynthConfig cfg;
  cfg.size = 48;
  cfg.n_slices = 14;
  const auto a = synth_stack(cfg, 1, 2, 7);
  const auto b = synth_stack(cfg, 1, 2, 7);
  EXPECT_EQ(a.stack, b.stack);
  EXPECT_EQ(a.bbox, b.bbox);
  EXPECT_NE(synth_stack(cfg, 1, 3, 7).stack, a.stack);
  EXPECT_EQ(a.stack.meta.time_min, 63);
  const auto [lo, hi] = std::minmax_element(a.stack.voxels.begin(), a.stack.voxels.end());
  EXPECT_GE(static_cast<double>(*hi - *lo) / 255.0, 0.6);
  EXPECT_GE(a.bbox.w, 38);
  EXPECT_GE(a.bbox.h, 38);
  EXPECT_LE(a.bbox.x + a.bbox.w, 48);
  EXPECT_LE(a.bbox.y + a.bbox.h, 48);
}

TEST(Synth, CorpusFilesAreByteIdenticalUnderSeed) {
  SynthConfig cfg;
  cfg.size = 40;
  cfg.n_slices = 6;
  cfg.n_embryos = 2;
  cfg.stacks_per = 2;
  const auto d1 = scratch("corpus1");
  const auto d2 = scratch("corpus2");
  const auto e1 = write_synth_corpus(d1, cfg, 5);
  write_synth_corpus(d2, cfg, 5);
  ASSERT_EQ(e1.size(), 4u);
  EXPECT_EQ(read_file(d1 / "manifest.jsonl"), read_file(d2 / "manifest.jsonl"));
  for (const auto& e : e1) EXPECT_EQ(read_file(d1 / e.path), read_file(d2 / e.path));
  const auto m = read_manifest(d1 / "manifest.jsonl");
  EXPECT_EQ(m, e1);
  EXPECT_EQ(read_stack_pgm(d1 / m[3].path, 6).n_slices, 6);
}

TEST(Synth, LabeledClassesBalanced) {
  Rng rng(12);
  const auto set = synth_labeled_set(1000, 16, rng);
  const auto ones = std::count_if(set.begin(), set.end(), [](const Patch& p) { return *p.label == 1; });
  EXPECT_GE(ones, 450);
  EXPECT_LE(ones, 550);
}
