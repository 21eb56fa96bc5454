#include <fstream>

#include <gtest/gtest.h>

#include "dhal/checkpoint.hpp"
#include "dhal/config.hpp"
#include "dhal/error.hpp"
#include "fixtures.hpp"

using namespace dhal;
using dhal::testing::TempDir;

namespace {

TrainingConfig tiny_config(TrainingMode mode = TrainingMode::kFull) {
  TrainingConfig c;
  c.image_size = 32;
  c.base_maps = 2;
  c.residual_blocks = 1;
  c.total_epochs = 3;
  c.seed = 12;
  c.mode = mode;
  return c;
}

template <typename Model>
std::vector<std::vector<float>> snapshot(Model& m) {
  std::vector<std::vector<float>> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, FileAndAssignments) {
  TempDir dir;
  std::ofstream(dir / "a.cfg") << "# comment\nlambda_pixel = 3.5\nmode=teacher_only  # trailing\n\nseed=9\n";
  auto c = load_config_file(dir / "a.cfg");
  EXPECT_DOUBLE_EQ(c.lambda_pixel, 3.5);
  EXPECT_EQ(c.mode, TrainingMode::kTeacherOnly);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.lambda_cyc, 5.0);
  apply_assignment(c, "seed=11");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_THROW(apply_assignment(c, "seed"), ConfigError);
}

TEST(Config, UnknownKeyListsValidKeys) {
  TrainingConfig c;
  const auto msg = message_of([&] { set_config_value(c, "lamda_pixel", "1"); });
  EXPECT_NE(msg.find("lamda_pixel"), std::string::npos);
  for (const auto& key : config_keys()) EXPECT_NE(msg.find(key), std::string::npos) << key;
  EXPECT_THROW(set_config_value(c, "seed", "abc"), ConfigError);
  EXPECT_THROW(set_config_value(c, "mode", "sideways"), ConfigError);
}

TEST(Config, FileErrorsCarryLineNumbers) {
  TempDir dir;
  std::ofstream(dir / "b.cfg") << "seed=1\nbogus=2\n";
  const auto msg = message_of([&] { load_config_file(dir / "b.cfg"); });
  EXPECT_NE(msg.find("b.cfg:2"), std::string::npos) << msg;
  EXPECT_THROW(load_config_file(dir / "missing.cfg"), ConfigError);
}

TEST(Config, CanonicalTextRoundTripsAndHashes) {
  auto c = tiny_config();
  c.alpha_teach = 1.0 / 3.0;
  c.teacher_data = "/data/t";
  TempDir dir;
  std::ofstream(dir / "c.cfg") << canonical_config_text(c);
  const auto back = load_config_file(dir / "c.cfg");
  EXPECT_EQ(canonical_config_text(back), canonical_config_text(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  auto d = c;
  d.seed += 1;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Archive, RoundTrip) {
  TempDir dir;
  std::vector<ArchiveEntry> entries{{"a", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"scalar", {}, {7.5f}},
                                    {"empty", {0}, {}}};
  write_archive(dir / "x.bin", entries);
  const auto back = read_archive(dir / "x.bin");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].name, entries[i].name);
    EXPECT_EQ(back[i].dims, entries[i].dims);
    EXPECT_EQ(back[i].data, entries[i].data);
  }
}

TEST(Archive, CorruptionDetected) {
  TempDir dir;
  write_archive(dir / "x.bin", {{"a", {4}, {1, 2, 3, 4}}});
  std::filesystem::resize_file(dir / "x.bin", std::filesystem::file_size(dir / "x.bin") - 3);
  EXPECT_THROW(read_archive(dir / "x.bin"), LoadError);
  std::ofstream(dir / "y.bin") << "NOPE....";
  EXPECT_THROW(read_archive(dir / "y.bin"), LoadError);
  EXPECT_THROW(read_archive(dir / "z.bin"), LoadError);
}

TEST(Generator, SaveLoadAndShapeDiff) {
  TempDir dir;
  auto g = init_generator<float>(GeneratorShape::with_base(4, 2), 3);
  save_generator(dir / "g.bin", g);
  auto back = load_generator(dir / "g.bin");
  EXPECT_EQ(back.shape(), g.shape());
  EXPECT_EQ(snapshot(back), snapshot(g));

  const auto msg = message_of([&] { load_generator(dir / "g.bin", GeneratorShape::with_base(8, 2)); });
  EXPECT_NE(msg.find("architecture mismatch"), std::string::npos) << msg;
  EXPECT_NE(msg.find("enc0.weight: expected [8,3,7,7], got [4,3,7,7]"), std::string::npos) << msg;
  const auto blocks = message_of([&] { load_generator(dir / "g.bin", GeneratorShape::with_base(4, 3)); });
  EXPECT_NE(blocks.find("res2"), std::string::npos) << blocks;
}

TEST(Checkpoint, TeacherOnlyOmitsStudentFiles) {
  TempDir dir;
  const auto config = tiny_config(TrainingMode::kTeacherOnly);
  const auto teacher = dhal::testing::synthetic_pairs(2, 32, 2, 1);
  Trainer trainer(config, teacher, {});
  const auto summary = trainer.run_epoch();
  const auto path = save_checkpoint(dir.path(), trainer, summary);
  EXPECT_EQ(path.filename(), "epoch_0001");
  EXPECT_TRUE(std::filesystem::exists(path / "G_A2B.bin"));
  EXPECT_TRUE(std::filesystem::exists(path / "D_depth.bin"));
  EXPECT_TRUE(std::filesystem::exists(path / "manifest.json"));
  EXPECT_FALSE(std::filesystem::exists(path / "G_B2A.bin"));
  EXPECT_FALSE(std::filesystem::exists(path / "D_RGB.bin"));
  EXPECT_FALSE(load_checkpoint_reverse_generator(path).has_value());
  const auto info = read_checkpoint_info(path);
  EXPECT_EQ(info.epoch, 1);
  EXPECT_EQ(info.config_hash, config_hash(config));
  EXPECT_EQ(info.mode, "teacher_only");
  EXPECT_EQ(canonical_config_text(read_checkpoint_config(path)), canonical_config_text(config));
}

TEST(Checkpoint, LatestPicksHighestEpoch) {
  TempDir dir;
  EXPECT_FALSE(latest_checkpoint(dir.path()).has_value());
  for (int e : {2, 10, 9}) {
    std::filesystem::create_directories(dir / checkpoint_dir_name(e));
    std::ofstream(dir / checkpoint_dir_name(e) / "manifest.json") << "{}";
  }
  std::filesystem::create_directories(dir / "epoch_junk");
  std::ofstream(dir / "epoch_junk" / "manifest.json") << "{}";
  // Interrupted write: no manifest yet.
  std::filesystem::create_directories(dir / checkpoint_dir_name(11));
  const auto latest = latest_checkpoint(dir.path());
  ASSERT_TRUE(latest.has_value());
  EXPECT_EQ(latest->filename(), "epoch_0010");
}

TEST(Checkpoint, ResumeIsBitExact) {
  const auto config = tiny_config();
  const auto teacher = dhal::testing::synthetic_pairs(3, 32, 3, 1);
  const auto target = dhal::testing::unpaired(dhal::testing::synthetic_pairs(4, 32, 4, 2));

  Trainer straight(config, teacher, target);
  while (!straight.done()) straight.run_epoch();

  TempDir dir;
  std::filesystem::path saved;
  {
    Trainer first(config, teacher, target);
    saved = save_checkpoint(dir.path(), first, first.run_epoch());
  }
  const auto info = read_checkpoint_info(saved);
  Trainer resumed(config, teacher, target, load_train_state(saved, config), info.trainer_rng);
  EXPECT_EQ(resumed.state().epoch, 1);
  while (!resumed.done()) resumed.run_epoch();

  auto& a = straight.state();
  auto& b = resumed.state();
  EXPECT_EQ(snapshot(a.g_a2b), snapshot(b.g_a2b));
  EXPECT_EQ(snapshot(a.g_b2a), snapshot(b.g_b2a));
  EXPECT_EQ(snapshot(a.d_depth), snapshot(b.d_depth));
  EXPECT_EQ(snapshot(a.d_rgb), snapshot(b.d_rgb));
  EXPECT_EQ(a.student_gen_opt.state().second, b.student_gen_opt.state().second);

  std::vector<double> tail_a, tail_b;
  for (const auto& r : straight.curves())
    if (r.epoch > 1) tail_a.push_back(r.value);
  for (const auto& r : resumed.curves()) tail_b.push_back(r.value);
  EXPECT_EQ(tail_a, tail_b);
}

TEST(Checkpoint, GeneratorFromDirectoryOrArchive) {
  TempDir dir;
  const auto config = tiny_config();
  const auto teacher = dhal::testing::synthetic_pairs(2, 32, 2, 1);
  const auto target = dhal::testing::unpaired(teacher);
  Trainer trainer(config, teacher, target);
  const auto path = save_checkpoint(dir.path(), trainer, trainer.run_epoch());
  auto from_dir = load_checkpoint_generator(path);
  auto from_bin = load_checkpoint_generator(path / "G_A2B.bin");
  EXPECT_EQ(snapshot(from_dir), snapshot(trainer.state().g_a2b));
  EXPECT_EQ(snapshot(from_bin), snapshot(trainer.state().g_a2b));
  auto reverse = load_checkpoint_reverse_generator(path);
  ASSERT_TRUE(reverse.has_value());
  EXPECT_EQ(snapshot(*reverse), snapshot(trainer.state().g_b2a));
}
