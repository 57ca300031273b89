#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "ptmf/config.hpp"
#include "ptmf/errors.hpp"

using namespace ptmf;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(ModelConfig{}.validate()); }

TEST(Config, SetParsesEveryKeyBack) {
  const ModelConfig base = fixture::tiny_config(5);
  ModelConfig copy;
  for (const auto& [k, v] : base.to_kv()) copy.set(k, v);
  EXPECT_EQ(copy.to_text(), base.to_text());
  EXPECT_EQ(copy.ablation, base.ablation);
  EXPECT_EQ(copy.seed, 5u);
}

TEST(Config, UnknownKeyAndBadValues) {
  ModelConfig c;
  EXPECT_THROW(c.set("d_modle", "8"), ValidationError);
  EXPECT_THROW(c.set("d_model", "eight"), ValidationError);
  EXPECT_THROW(c.set("ptmfim", "maybe"), ValidationError);
  EXPECT_THROW(c.set("task", "senary"), ValidationError);
  c.set("task", "quinary");
  EXPECT_EQ(c.n_classes(), 5u);
}

TEST(Config, InvariantsRejected) {
  ModelConfig c;
  c.d_model = 30;
  c.n_heads = 4;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.audio_hidden = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.lr = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, FileRoundTripAndComments) {
  fixture::TempDir dir;
  const ModelConfig base = fixture::tiny_config(9);
  write_config_file(base, dir / "c.cfg");
  ModelConfig back;
  apply_kv_file(back, dir / "c.cfg");
  EXPECT_EQ(back.to_text(), base.to_text());

  {
    std::ofstream out(dir / "partial.cfg");
    out << "# comment line\n\n  epochs = 7   # trailing\nptmfim=false\n";
  }
  ModelConfig partial;
  apply_kv_file(partial, dir / "partial.cfg");
  EXPECT_EQ(partial.epochs, 7u);
  EXPECT_FALSE(partial.ablation.ptmfim);
  EXPECT_EQ(partial.d_model, ModelConfig{}.d_model);

  std::ofstream(dir / "bad.cfg") << "epochs 7\n";
  EXPECT_THROW(apply_kv_file(partial, dir / "bad.cfg"), ValidationError);
  EXPECT_THROW(apply_kv_file(partial, dir / "none.cfg"), IoError);
}
